#include <cmath>
#include <map>

#include "doctest.h"
#include "pacmetric/evalstats.hpp"
#include "pacmetric/random.hpp"
#include "support/criteria.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pacmetric;
using namespace pacmetric::evalstats;

namespace {

using V = std::vector<double>;

Scorer table_scorer(std::map<std::string, double> scores) {
    Scorer s;
    s.fn = [scores = std::move(scores)](const std::string&, const std::string& cap, std::span<const std::string>) {
        return scores.at(cap);
    };
    return s;
}

}  // namespace

TEST_CASE("kendall examples") {
    CHECK(kendall_tau_b(V{1, 2, 3, 4}, V{1, 2, 3, 4}) == 1.0);
    CHECK(kendall_tau_b(V{1, 2, 3}, V{1, 3, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(kendall_tau_b(V{1, 1, 2}, V{1, 2, 3}) == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(kendall_tau_b(V{1, 1, 2}, V{1, 2, 3}) == doctest::Approx(oracle::tau_b(V{1, 1, 2}, V{1, 2, 3})));

    CHECK(kendall_tau_c(V{1, 2, 3}, V{1, 2, 3}) == doctest::Approx(oracle::tau_c(V{1, 2, 3}, V{1, 2, 3})));
    CHECK(kendall_tau_c(V{1, 2, 3, 4}, V{4, 3, 2, 1}) ==
          doctest::Approx(oracle::tau_c(V{1, 2, 3, 4}, V{4, 3, 2, 1})).epsilon(1e-15));
    CHECK_THROWS_AS(kendall_tau_c(V{2, 2, 2}, V{1, 2, 3}), UndefinedCorrelation);
    CHECK_THROWS_AS(kendall_tau_b(V{1, 2, 3}, V{5, 5, 5}), UndefinedCorrelation);
    CHECK_THROWS_AS(kendall_tau_b(V{1}, V{1}), UndefinedCorrelation);
    CHECK_THROWS_AS(kendall_tau_b(V{1, 2}, V{1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(kendall_tau_b(V{1, NAN}, V{1, 2}), std::invalid_argument);
}

TEST_CASE("spearman examples") {
    CHECK(spearman_rho(V{3, 1, 2}, V{3, 1, 2}) == doctest::Approx(1.0));
    CHECK(spearman_rho(V{1, 2, 3, 4}, V{4, 3, 2, 1}) == doctest::Approx(-1.0));
    const V x{1, 2, 2, 3}, y{1, 3, 2, 4};
    CHECK(spearman_rho(x, y) == doctest::Approx(oracle::spearman(x, y)).epsilon(1e-15));
    CHECK(average_ranks(x) == V{1, 2.5, 2.5, 4});
    CHECK_THROWS_AS(spearman_rho(V{1, 1}, V{1, 2}), UndefinedCorrelation);
}

TEST_CASE("correlations match brute force") {
    const auto outcome = criteria::correlation_oracle();
    INFO(outcome.detail);
    CHECK(outcome.pass);
}

TEST_CASE("correlation invariances") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 3 + uniform_index(rng, 20);
        V x(n), y(n);
        for (auto& v : x) v = static_cast<double>(uniform_index(rng, 5));
        for (auto& v : y) v = standard_normal(rng);
        x[0] = 0;
        x[1] = 4;
        V fx = x;
        for (auto& v : fx) v = std::exp(v) * 3 + 1;
        CHECK(kendall_tau_b(fx, y) == doctest::Approx(kendall_tau_b(x, y)).epsilon(1e-14));
        CHECK(kendall_tau_c(fx, y) == doctest::Approx(kendall_tau_c(x, y)).epsilon(1e-14));
        CHECK(spearman_rho(fx, y) == doctest::Approx(spearman_rho(x, y)).epsilon(1e-14));
        CHECK(kendall_tau_b(x, y) == doctest::Approx(kendall_tau_b(y, x)).epsilon(1e-14));
        CHECK(spearman_rho(x, y) == doctest::Approx(spearman_rho(y, x)).epsilon(1e-14));
    }
}

TEST_CASE("correlate over a judgment set") {
    JudgmentSet set{"toy", Aggregation::raw, {{"a", 1, {}}, {"b", 2, {}}, {"c", 3, {}}}};
    const V metric{0.1, 0.3, 0.2};
    const auto s = correlate(set, metric);
    CHECK(s.n == 3);
    CHECK(s.tau_b == doctest::Approx(1.0 / 3.0));
    CHECK(s.rho == doctest::Approx(0.5));
    CHECK_THROWS(correlate(set, V{1, 2}));
}

TEST_CASE("pairwise accuracy") {
    PairwiseSet set;
    set.dataset = "toy";
    const char* cats[] = {"HC", "HI", "HM", "MM"};
    for (int i = 0; i < 40; ++i) {
        const std::string id = std::to_string(i);
        set.pairs.push_back({"img" + id, "a" + id, "b" + id, static_cast<std::size_t>(i % 3 == 0 ? 1 : 3),
                             static_cast<std::size_t>(i % 3 == 0 ? 1 : 0), cats[i % 4]});
        set.ref_pool["img" + id] = {"r1", "r2", "r3", "r4", "r5", "r6"};
    }

    // human majority as scorer: every untied pair is correct
    Scorer majority;
    majority.fn = [](const std::string&, const std::string& cap, std::span<const std::string>) {
        return cap[0] == 'a' ? 1.0 : 0.0;
    };
    PairwiseSet untied = set;
    for (auto& p : untied.pairs) p.votes_b = 0;
    const auto perfect = pairwise_accuracy(untied, majority, 1);
    for (const auto& [cat, acc] : perfect.per_category) CHECK(acc == 1.0);
    CHECK(perfect.mean == 1.0);

    // constant scorer: ties are failures
    Scorer constant;
    constant.fn = [](const std::string&, const std::string&, std::span<const std::string>) { return 0.5; };
    CHECK(pairwise_accuracy(set, constant, 7).mean == 0.0);

    // seeded random scorer: near 0.5, reproducible, seed-dependent
    Scorer noisy;
    noisy.fn = [](const std::string& img, const std::string& cap, std::span<const std::string>) {
        return static_cast<double>(std::hash<std::string>{}(img + "/" + cap) % 1000);
    };
    PairwiseSet big;
    for (int i = 0; i < 2000; ++i) {
        const std::string id = std::to_string(i);
        big.pairs.push_back({"img" + id, "a" + id, "b" + id, 2, 1, cats[i % 4]});
    }
    const double acc = pairwise_accuracy(big, noisy, 1).mean;
    CHECK(acc > 0.45);
    CHECK(acc < 0.55);

    const auto r1 = pairwise_accuracy(set, majority, 11), r2 = pairwise_accuracy(set, majority, 11);
    CHECK(r1.per_category == r2.per_category);

    // forced miss
    PairwiseSet single{"one", {{"i", "a", "b", 0, 2, "HC"}}, {}};
    CHECK(pairwise_accuracy(single, majority, 0).mean == 0.0);

    // reference-based scorer needs enough references
    Scorer ref_based = majority;
    ref_based.reference_based = true;
    CHECK_NOTHROW(pairwise_accuracy(set, ref_based, 0, 5, 5));
    CHECK_THROWS(pairwise_accuracy(set, ref_based, 0, 5, 7));
    CHECK_THROWS(pairwise_accuracy(set, majority, 0, 0));
}

TEST_CASE("foil accuracy") {
    const auto outcome = criteria::foil_property();
    INFO(outcome.detail);
    CHECK(outcome.pass);

    FoilSet mixed{"mixed",
                  {{"i1", "c1", "f1", {}}, {"i2", "c2", "f2", {}}, {"i3", "c3", "f3", {}}, {"i4", "c4", "f4", {}}}};
    const Scorer s = table_scorer(
        {{"c1", 0.9}, {"f1", 0.1}, {"c2", 0.8}, {"f2", 0.2}, {"c3", 0.7}, {"f3", 0.3}, {"c4", 0.1}, {"f4", 0.6}});
    CHECK(foil_accuracy(mixed, s) == 0.75);
    std::swap(mixed.pairs[0], mixed.pairs[3]);
    CHECK(foil_accuracy(mixed, s) == 0.75);
}

TEST_CASE("fixture loaders") {
    fixtures::TempDir dir;
    fixtures::spit(dir / "j.jsonl", "{\"item_id\": \"a\", \"human_score\": 3}\n\n"
                                    "{\"item_id\": \"b\", \"human_score\": 1, \"metric_score\": 0.25}\n");
    const auto raw = load_judgments(dir / "j.jsonl", Aggregation::raw);
    CHECK(raw.dataset == "j");
    REQUIRE(raw.items.size() == 2);
    CHECK(raw.items[0].human_score == 3.0);
    CHECK_FALSE(raw.items[0].metric_score);
    CHECK(*raw.items[1].metric_score == 0.25);

    fixtures::spit(dir / "y.jsonl", "{\"item_id\": \"a\", \"annotations\": [1, 0, 1, 1]}\n"
                                    "{\"item_id\": \"b\", \"annotations\": [0, 0]}\n");
    const auto yes = load_judgments(dir / "y.jsonl", Aggregation::mean_proportion_yes);
    CHECK(yes.items[0].human_score == 0.75);
    CHECK(yes.items[1].human_score == 0.0);

    fixtures::spit(dir / "bad.jsonl", "{\"item_id\": \"a\"}\n{\"item_id\": \"b\", \"human_score\": 1}\n");
    CHECK_THROWS(load_judgments(dir / "bad.jsonl", Aggregation::raw));
    CHECK_THROWS(load_judgments(dir / "missing.jsonl", Aggregation::raw));

    fixtures::spit(dir / "p.jsonl", "{\"image_id\": \"i\", \"caption_a\": \"a\", \"caption_b\": \"b\", \"votes_a\": 2, "
                                    "\"votes_b\": 1, \"category\": \"HI\", \"ref_pool\": [\"r\"]}\n");
    const auto pw = load_pairwise(dir / "p.jsonl");
    REQUIRE(pw.pairs.size() == 1);
    CHECK(pw.pairs[0].category == "HI");
    CHECK(pw.ref_pool.at("i") == std::vector<std::string>{"r"});

    fixtures::spit(dir / "f.jsonl", "{\"image_id\": \"i\", \"correct\": \"c\", \"foil\": \"f\", \"refs\": [\"r1\", \"r2\"]}\n");
    const auto fs = load_foil(dir / "f.jsonl");
    REQUIRE(fs.pairs.size() == 1);
    CHECK(fs.pairs[0].refs.size() == 2);
}
