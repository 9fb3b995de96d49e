#include <cmath>

#include "doctest.h"
#include "pacmetric/scoring.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pacmetric;
using namespace pacmetric::scoring;

namespace {

const ScoreConfig kBase{};

/// Unit vector at angle acos(c) from e1 in the plane (e1, e2).
Vector at_cosine(double c, std::size_t dim = 3) {
    Vector v(dim, 0.0);
    v[0] = c;
    v[1] = std::sqrt(1 - c * c);
    return v;
}

TokenizedCaption caption_of(const Matrix& rows) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < rows.rows(); ++i) toks.push_back("t" + std::to_string(i));
    if (toks.size() >= 2) {
        toks.front() = "<sos>";
        toks.back() = "<eos>";
    }
    return TokenizedCaption(rows, toks);
}

}  // namespace

TEST_CASE("score config") {
    CHECK(ScoreConfig::for_backbone("ViT-B/32").w == 2.5);
    CHECK(ScoreConfig::for_backbone("ViT-L/14").w == 3.0);
    CHECK_THROWS(ScoreConfig::for_backbone("RN50"));
    CHECK_THROWS((ScoreConfig{0.0, "x"}.validate()));
    CHECK_THROWS((ScoreConfig{-1.0, "x"}.validate()));
}

TEST_CASE("pac_score examples") {
    const Vector e1{1, 0, 0};
    CHECK(pac_score(e1, e1, kBase) == 2.5);
    CHECK(pac_score(e1, at_cosine(-0.3), kBase) == 0.0);
    CHECK(pac_score(e1, at_cosine(-0.3), ScoreConfig{3.0, "ViT-L/14"}) == 0.0);
    CHECK(pac_score(e1, at_cosine(0.4), kBase) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(pac_score(e1, Vector{1, 0}, kBase), ShapeError);
}

TEST_CASE("pac_score properties") {
    Rng rng(21);
    for (int t = 0; t < 200; ++t) {
        const Matrix m = fixtures::gaussian(2, 6, rng);
        const double s = pac_score(m.row(0), m.row(1), kBase);
        CHECK(s >= 0.0);
        CHECK(s <= 2.5);
        Vector scaled(m.row(0).begin(), m.row(0).end());
        const double alpha = 0.01 + 10 * uniform_unit(rng);
        for (auto& x : scaled) x *= alpha;
        CHECK(pac_score(scaled, m.row(1), kBase) == doctest::Approx(s).epsilon(1e-12));
    }
    double prev = -1;
    for (double c = -1.0; c <= 1.0; c += 0.05) {
        const double s = pac_score(Vector{1, 0, 0}, at_cosine(std::clamp(c, -1.0, 1.0)), kBase);
        CHECK(s >= prev);
        prev = s;
    }
}

TEST_CASE("harmonic mean convention") {
    CHECK(harmonic_mean(0.0, 3.0) == 0.0);
    CHECK(harmonic_mean(3.0, 0.0) == 0.0);
    CHECK(harmonic_mean(1.0, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("ref_pac_score") {
    const Vector v{1, 0, 0};
    // pac = 1.0 (cos 0.4), top-r = 0.5
    const Vector t = at_cosine(0.4);
    Vector r(3, 0.0);
    {
        // unit r with cos(t, r) = 0.5: rotate t by 60 degrees within its plane with e3
        const double a = std::acos(0.5);
        for (std::size_t i = 0; i < 3; ++i) r[i] = std::cos(a) * t[i];
        r[2] += std::sin(a);
    }
    CHECK(cosine_sim(t, r) == doctest::Approx(0.5).epsilon(1e-14));
    const double expected = 2.0 * (1.0 * 0.5) / (1.0 + 0.5);
    CHECK(ref_pac_score(v, t, Matrix::from_rows(std::vector<Vector>{r}, 3), kBase) ==
          doctest::Approx(expected).epsilon(1e-13));

    // pac = 0 -> 0 regardless of refs
    CHECK(ref_pac_score(v, at_cosine(-0.2), Matrix::from_rows(std::vector<Vector>{at_cosine(-0.2)}, 3), kBase) == 0.0);
    // all ref cosines negative -> 0
    Vector neg = t;
    for (auto& x : neg) x = -x;
    CHECK(ref_pac_score(v, t, Matrix::from_rows(std::vector<Vector>{neg}, 3), kBase) == 0.0);
    CHECK_THROWS(ref_pac_score(v, t, Matrix(0, 3), kBase));

    Rng rng(4);
    for (int k = 0; k < 200; ++k) {
        const Matrix m = fixtures::gaussian(4, 5, rng);
        const Matrix refs = m.slice_rows(2, 4);
        const double pac = pac_score(m.row(0), m.row(1), kBase);
        const double top = std::max({0.0, cosine_sim(m.row(1), refs.row(0)), cosine_sim(m.row(1), refs.row(1))});
        const double s = ref_pac_score(m.row(0), m.row(1), refs, kBase);
        if (pac > 0 && top > 0) {
            CHECK(s <= std::max(pac, top) + 1e-12);
            CHECK(s >= std::min(pac, top) - 1e-12);
        } else {
            CHECK(s == 0.0);
        }
    }
}

TEST_CASE("tokenized caption and video invariants") {
    CHECK_THROWS(TokenizedCaption(Matrix{{1, 0}}, {"<eos>"}));
    CHECK_THROWS(TokenizedCaption(Matrix{{1, 0}, {0, 1}}, {"a", "b", "c"}));
    CHECK_THROWS(VideoEmbedding(Matrix{{2, 0}}));
    CHECK_THROWS(VideoEmbedding(Matrix(0, 2)));
    const auto c = caption_of(Matrix{{1, 0}, {0, 1}});
    CHECK(c.global()[1] == 1.0);
}

TEST_CASE("coarse video embedding and score") {
    const Matrix one{{0.6, 0.8}};
    CHECK(coarse_video_embedding(VideoEmbedding(one)) == Vector{0.6, 0.8});
    const Vector two = coarse_video_embedding(VideoEmbedding(Matrix{{0.6, 0.8}, {0.6, 0.8}}));
    CHECK(two[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK_THROWS_AS(coarse_video_embedding(VideoEmbedding(Matrix{{1, 0}, {-1, 0}})), DegenerateInputError);

    CHECK(coarse_score(VideoEmbedding(one), caption_of(Matrix{{1, 0}, {0.6, 0.8}})) == doctest::Approx(1.0));
    CHECK(coarse_score(VideoEmbedding(one), caption_of(Matrix{{1, 0}, {-0.8, 0.6}})) == doctest::Approx(0.0));
    CHECK_THROWS(coarse_score(VideoEmbedding(one), caption_of(Matrix{{1, 0}, {2, 0}})));

    Rng rng(8);
    const Matrix frames = fixtures::unit_rows(3, 4, rng);
    const auto cap = caption_of(fixtures::unit_rows(3, 4, rng));
    Vector mean(4, 0.0);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t d = 0; d < 4; ++d) mean[d] += frames(j, d) / 3.0;
    double norm = 0, dotp = 0;
    for (double x : mean) norm += x * x;
    for (std::size_t d = 0; d < 4; ++d) dotp += mean[d] / std::sqrt(norm) * cap.global()[d];
    CHECK(coarse_score(VideoEmbedding(frames), cap) == doctest::Approx(dotp).epsilon(1e-13));
}

TEST_CASE("idf table") {
    const std::vector<std::vector<std::string>> two{{"<sos>", "dog", "<eos>"}, {"<sos>", "cat", "<eos>"}};
    const IdfTable a = build_idf(two);
    CHECK(a.weight("<sos>") == 0.0);
    CHECK(a.weight("dog") == doctest::Approx(std::log(3.0 / 2.0)));
    CHECK(a.weight("zebra") == doctest::Approx(std::log(3.0)));

    const std::vector<std::vector<std::string>> four{{"a", "x"}, {"b"}, {"b"}, {"b"}};
    const IdfTable b = build_idf(four);
    CHECK(b.weight("x") == doctest::Approx(0.9162907318741551).epsilon(1e-12));
    CHECK(b.doc_freq("b") == 3);
    CHECK(b.corpus_size() == 4);

    const std::vector<std::vector<std::string>> dup{{"a", "a", "a"}};
    CHECK(build_idf(dup).doc_freq("a") == 1);
}

TEST_CASE("fine-grained score examples") {
    const IdfTable idf = build_idf(std::vector<std::vector<std::string>>{{"x"}});
    const auto identity = fine_grained_score(Matrix{{0.6, 0.8}}, caption_of(Matrix{{0.6, 0.8}, {0.6, 0.8}}), idf);
    CHECK(identity.precision == doctest::Approx(1.0));
    CHECK(identity.recall == doctest::Approx(1.0));
    CHECK(identity.f1 == doctest::Approx(1.0));

    const auto ortho = fine_grained_score(Matrix{{0, 0, 1}}, caption_of(Matrix{{1, 0, 0}, {0, 1, 0}}), idf);
    CHECK(ortho.precision == 0.0);
    CHECK(ortho.recall == 0.0);
    CHECK(ortho.f1 == 0.0);

    // every weight zero -> uniform fallback, flagged
    const IdfTable all_zero = build_idf(std::vector<std::vector<std::string>>{{"<sos>", "t0", "<eos>"}});
    const auto cap = caption_of(Matrix{{1, 0}, {0.6, 0.8}});
    const auto fb = fine_grained_score(Matrix{{1, 0}}, cap, all_zero);
    CHECK(fb.uniform_idf_fallback);
    CHECK(fb.precision == doctest::Approx((1.0 + 0.6) / 2));
    CHECK_FALSE(fine_grained_score(Matrix{{1, 0}}, cap, idf).uniform_idf_fallback);
}

TEST_CASE("fine-grained score matches brute force") {
    Rng rng(12);
    const std::vector<std::string> vocab{"<sos>", "a", "b", "c", "<eos>"};
    std::vector<std::vector<std::string>> corpus;
    for (int i = 0; i < 6; ++i) corpus.push_back({vocab[uniform_index(rng, 5)], vocab[uniform_index(rng, 5)]});
    const IdfTable idf = build_idf(corpus);

    for (int t = 0; t < 300; ++t) {
        const std::size_t nf = 1 + uniform_index(rng, 5), nt = 2 + uniform_index(rng, 4), dim = 2 + uniform_index(rng, 4);
        const Matrix frames = fixtures::unit_rows(nf, dim, rng);
        const Matrix toks = fixtures::unit_rows(nt, dim, rng);
        std::vector<std::string> words;
        for (std::size_t l = 0; l < nt; ++l) words.push_back(vocab[uniform_index(rng, 5)]);
        const TokenizedCaption cap(toks, words);
        std::vector<double> w;
        for (const auto& s : words) w.push_back(idf.weight(s));

        const auto got = fine_grained_score(frames, cap, idf);
        const auto want = oracle::brute_fine(frames, toks, w);
        CHECK(std::abs(got.precision - want.p) <= 1e-12);
        CHECK(std::abs(got.recall - want.r) <= 1e-12);
        CHECK(std::abs(got.f1 - want.f1) <= 1e-12);

        // permutation of frames leaves P and R unchanged
        Matrix rev(nf, dim);
        for (std::size_t j = 0; j < nf; ++j)
            std::copy(frames.row(nf - 1 - j).begin(), frames.row(nf - 1 - j).end(), rev.row(j).begin());
        const auto perm = fine_grained_score(rev, cap, idf);
        CHECK(perm.precision == doctest::Approx(got.precision).epsilon(1e-12));
        CHECK(perm.recall == doctest::Approx(got.recall).epsilon(1e-12));
    }
}

TEST_CASE("zero-idf token never changes precision") {
    Rng rng(17);
    // "<sos>" is in every document -> weight 0
    const IdfTable idf = build_idf(std::vector<std::vector<std::string>>{{"<sos>", "a"}, {"<sos>", "b"}});
    REQUIRE(idf.weight("<sos>") == 0.0);
    for (int t = 0; t < 50; ++t) {
        const Matrix frames = fixtures::unit_rows(3, 4, rng);
        const Matrix toks = fixtures::unit_rows(3, 4, rng);
        const Matrix extra = fixtures::unit_rows(1, 4, rng);
        const TokenizedCaption base(toks, {"a", "b", "a"});
        Matrix more(4, 4);
        std::copy(extra.row(0).begin(), extra.row(0).end(), more.row(0).begin());
        for (std::size_t l = 0; l < 3; ++l) std::copy(toks.row(l).begin(), toks.row(l).end(), more.row(l + 1).begin());
        const TokenizedCaption with(more, {"<sos>", "a", "b", "a"});
        CHECK(fine_grained_score(frames, with, idf).precision ==
              doctest::Approx(fine_grained_score(frames, base, idf).precision).epsilon(1e-13));
    }
}

TEST_CASE("video score") {
    const IdfTable idf = build_idf(std::vector<std::vector<std::string>>{{"x"}});
    const VideoEmbedding one(Matrix{{0.6, 0.8}});
    const auto same = video_score(one, caption_of(Matrix{{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}}), idf);
    CHECK(same.value == doctest::Approx(1.0));

    // coarse = 1, F1 = 0: global aligned with the frame, other token orthogonal-negative
    const VideoEmbedding e1(Matrix{{1, 0, 0}});
    const TokenizedCaption half(Matrix{{0, -1, 0}, {1, 0, 0}}, {"<sos>", "<eos>"});
    const IdfTable only_sos = build_idf(std::vector<std::vector<std::string>>{{"<eos>"}, {"<eos>"}});
    // P = weight only on <sos> (<eos> has idf 0): max sim of <sos> = 0; R = 1
    const auto s = video_score(e1, half, only_sos);
    CHECK(s.coarse == doctest::Approx(1.0));
    CHECK(s.fine.precision == 0.0);
    CHECK(s.fine.f1 == 0.0);
    CHECK(s.value == doctest::Approx(0.5));

    Rng rng(31);
    const Matrix frames = fixtures::unit_rows(3, 5, rng);
    const auto cap = caption_of(fixtures::unit_rows(4, 5, rng));
    const auto v = video_score(VideoEmbedding(frames), cap, idf);
    CHECK(v.value == doctest::Approx((coarse_score(VideoEmbedding(frames), cap) +
                                      fine_grained_score(frames, cap, idf).f1) / 2).epsilon(1e-14));
}

TEST_CASE("ref video score") {
    Rng rng(41);
    const IdfTable idf = build_idf(std::vector<std::vector<std::string>>{{"t1"}, {"t2"}});
    const VideoEmbedding video(fixtures::unit_rows(3, 6, rng));
    const auto cand = caption_of(fixtures::unit_rows(4, 6, rng));

    CHECK(text_score(cand, cand, idf).value == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<TokenizedCaption> self{cand};
    const auto r = ref_video_score(video, cand, self, idf);
    CHECK(r.value == doctest::Approx((video_score(video, cand, idf).value + 1.0) / 2).epsilon(1e-12));

    // orthogonal reference: both terms vanish
    const TokenizedCaption e1(Matrix{{1, 0, 0}, {1, 0, 0}}, {"<sos>", "<eos>"});
    const TokenizedCaption e2(Matrix{{0, 1, 0}, {0, 1, 0}}, {"<sos>", "<eos>"});
    const VideoEmbedding v3(Matrix{{0, 0, 1}});
    CHECK(text_score(e2, e1, idf).value == 0.0);
    const std::vector<TokenizedCaption> ortho{e2};
    CHECK(ref_video_score(v3, e1, ortho, idf).value == doctest::Approx(video_score(v3, e1, idf).value / 2));

    const std::vector<TokenizedCaption> refs{caption_of(fixtures::unit_rows(3, 6, rng)), caption_of(fixtures::unit_rows(5, 6, rng))};
    const auto both = ref_video_score(video, cand, refs, idf);
    double best = -1;
    for (const auto& ref : refs) {
        const std::vector<TokenizedCaption> single{ref};
        best = std::max(best, ref_video_score(video, cand, single, idf).value);
    }
    CHECK(both.value == doctest::Approx(best).epsilon(1e-14));
    CHECK_THROWS(ref_video_score(video, cand, std::vector<TokenizedCaption>{}, idf));
}
