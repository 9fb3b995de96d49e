#include <fstream>
#include <set>

#include <json.hpp>

#include "pacmetric/evalstats.hpp"
#include "pacmetric/random.hpp"

namespace pacmetric::evalstats {

namespace {

const std::set<std::string> kCategories = {"HC", "HI", "HM", "MM"};

}  // namespace

PairwiseResult pairwise_accuracy(const PairwiseSet& set, const Scorer& scorer, std::uint64_t seed,
                                 std::size_t draws, std::size_t refs_per_draw) {
    if (!scorer.fn) throw std::invalid_argument("pairwise_accuracy: no scorer");
    if (draws == 0) throw std::invalid_argument("pairwise_accuracy: draws must be >= 1");
    if (set.pairs.empty()) throw std::invalid_argument("pairwise_accuracy: no pairs");
    for (const auto& p : set.pairs) {
        if (p.votes_a + p.votes_b == 0)
            throw std::invalid_argument("pairwise_accuracy: pair on '" + p.image_id + "' has no votes");
        if (!kCategories.contains(p.category))
            throw std::invalid_argument("pairwise_accuracy: unknown category '" + p.category + "'");
        if (scorer.reference_based) {
            auto it = set.ref_pool.find(p.image_id);
            if (it == set.ref_pool.end() || it->second.size() < refs_per_draw)
                throw std::invalid_argument("pairwise_accuracy: image '" + p.image_id + "' has fewer than " +
                                            std::to_string(refs_per_draw) + " references");
        }
    }

    Rng rng(seed);
    std::map<std::string, double> sum;
    std::map<std::string, std::size_t> count;
    for (const auto& p : set.pairs) count[p.category] += 1;

    std::vector<std::string> refs;
    for (std::size_t d = 0; d < draws; ++d) {
        std::map<std::string, std::size_t> hits;
        for (const auto& p : set.pairs) {
            bool a_wins = p.votes_a > p.votes_b;
            if (p.votes_a == p.votes_b) a_wins = uniform_index(rng, 2) == 0;

            refs.clear();
            if (scorer.reference_based) {
                const auto& pool = set.ref_pool.at(p.image_id);
                for (std::size_t k : sample_without_replacement(rng, pool.size(), refs_per_draw))
                    refs.push_back(pool[k]);
            }
            const double sa = scorer.fn(p.image_id, p.caption_a, refs);
            const double sb = scorer.fn(p.image_id, p.caption_b, refs);
            hits[p.category] += a_wins ? (sa > sb) : (sb > sa);
        }
        for (const auto& [cat, n] : count)
            sum[cat] += static_cast<double>(hits[cat]) / static_cast<double>(n);
    }

    PairwiseResult out;
    out.draws = draws;
    out.seed = seed;
    for (const auto& [cat, s] : sum) {
        out.per_category[cat] = s / static_cast<double>(draws);
        out.mean += out.per_category[cat];
    }
    out.mean /= static_cast<double>(out.per_category.size());
    return out;
}

double foil_accuracy(const FoilSet& set, const Scorer& scorer) {
    if (!scorer.fn) throw std::invalid_argument("foil_accuracy: no scorer");
    if (set.pairs.empty()) throw std::invalid_argument("foil_accuracy: no pairs");
    std::size_t hits = 0;
    for (const auto& p : set.pairs) {
        if (p.correct == p.foil)
            throw std::invalid_argument("foil_accuracy: correct and foil captions coincide on '" + p.image_id + "'");
        hits += scorer.fn(p.image_id, p.correct, p.refs) > scorer.fn(p.image_id, p.foil, p.refs);
    }
    return static_cast<double>(hits) / static_cast<double>(set.pairs.size());
}

// ---------------------------------------------------------------------------

namespace {

template <class F>
void for_each_line(const std::filesystem::path& path, F&& f) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            f(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

}  // namespace

JudgmentSet load_judgments(const std::filesystem::path& path, Aggregation aggregation) {
    JudgmentSet set;
    set.dataset = path.stem().string();
    set.aggregation = aggregation;
    for_each_line(path, [&](const nlohmann::json& j) {
        Judgment item;
        item.item_id = j.at("item_id").get<std::string>();
        if (aggregation == Aggregation::mean_proportion_yes) {
            const auto votes = j.at("annotations").get<std::vector<double>>();
            if (votes.empty()) throw std::runtime_error("judgment '" + item.item_id + "' has no annotations");
            double yes = 0.0;
            for (double v : votes) yes += v;
            item.human_score = yes / static_cast<double>(votes.size());
        } else {
            item.human_score = j.at("human_score").get<double>();
        }
        if (j.contains("metric_score")) item.metric_score = j["metric_score"].get<double>();
        set.items.push_back(std::move(item));
    });
    if (set.items.size() < 2) throw std::runtime_error(path.string() + ": need at least 2 judgments");
    return set;
}

PairwiseSet load_pairwise(const std::filesystem::path& path) {
    PairwiseSet set;
    set.dataset = path.stem().string();
    for_each_line(path, [&](const nlohmann::json& j) {
        PairJudgment p;
        p.image_id = j.at("image_id").get<std::string>();
        p.caption_a = j.at("caption_a").get<std::string>();
        p.caption_b = j.at("caption_b").get<std::string>();
        p.votes_a = j.at("votes_a").get<std::size_t>();
        p.votes_b = j.at("votes_b").get<std::size_t>();
        p.category = j.at("category").get<std::string>();
        if (j.contains("ref_pool")) set.ref_pool[p.image_id] = j["ref_pool"].get<std::vector<std::string>>();
        set.pairs.push_back(std::move(p));
    });
    return set;
}

FoilSet load_foil(const std::filesystem::path& path) {
    FoilSet set;
    set.dataset = path.stem().string();
    for_each_line(path, [&](const nlohmann::json& j) {
        FoilPair p;
        p.image_id = j.at("image_id").get<std::string>();
        p.correct = j.at("correct").get<std::string>();
        p.foil = j.at("foil").get<std::string>();
        if (j.contains("refs")) p.refs = j["refs"].get<std::vector<std::string>>();
        set.pairs.push_back(std::move(p));
    });
    return set;
}

}  // namespace pacmetric::evalstats
