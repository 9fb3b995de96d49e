#include <cmath>
#include <cstring>

#include "doctest.h"
#include "pacmetric/embedkit.hpp"
#include "support/fixtures.hpp"

using namespace pacmetric;

namespace {

std::vector<std::uint8_t> bytes_of(const Matrix& m) { return encode_embeddings(m); }

std::uint64_t format_error_offset(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_embeddings(bytes);
    } catch (const FormatError& e) {
        return e.offset();
    }
    FAIL("expected a FormatError");
    return 0;
}

}  // namespace

TEST_CASE("matrix construction and access") {
    Matrix m{{1, 2, 3}, {4, 5, 6}};
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 6);
    CHECK(m.row(1)[0] == 4);
    CHECK(m.transposed()(2, 1) == 6);
    CHECK(m.slice_rows(1, 2) == Matrix{{4, 5, 6}});
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ShapeError);
}

TEST_CASE("l2_normalize") {
    const Vector v = l2_normalize(Vector{3, 4});
    CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK_THROWS_AS(l2_normalize(Vector{0, 0}), DegenerateInputError);

    Matrix m{{1, 0}, {0, 0}};
    try {
        l2_normalize(m);
        FAIL("zero row accepted");
    } catch (const DegenerateInputError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }

    Rng rng(3);
    const Matrix u = fixtures::unit_rows(20, 7, rng);
    const Matrix uu = l2_normalize(u);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(u.flat()[i] - uu.flat()[i]) <= 1e-12);
    for (std::size_t i = 0; i < u.rows(); ++i) CHECK(std::abs(l2_norm(u.row(i)) - 1.0) <= 1e-6);
}

TEST_CASE("cosine_sim") {
    CHECK(cosine_sim(Vector{2, 1}, Vector{2, 1}) == doctest::Approx(1.0));
    CHECK(cosine_sim(Vector{1, 0}, Vector{0, 1}) == 0.0);
    CHECK(cosine_sim(Vector{1, 0}, Vector{-1, 0}) == -1.0);
    CHECK_THROWS_AS(cosine_sim(Vector{1, 0}, Vector{1, 0, 0}), ShapeError);
    CHECK_THROWS_AS(cosine_sim(Vector{0, 0}, Vector{1, 0}), DegenerateInputError);

    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const Matrix ab = fixtures::gaussian(2, 9, rng);
        const double c = cosine_sim(ab.row(0), ab.row(1));
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
        CHECK(c == doctest::Approx(cosine_sim(ab.row(1), ab.row(0))).epsilon(1e-15));
        Vector scaled(ab.row(0).begin(), ab.row(0).end());
        for (auto& x : scaled) x *= 7.5;
        CHECK(cosine_sim(scaled, ab.row(1)) == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("pairwise_sim_matrix") {
    const Matrix I{{1, 0}, {0, 1}};
    CHECK(pairwise_sim_matrix(I, I) == I);

    Rng rng(9);
    const Matrix a = fixtures::gaussian(5, 8, rng), b = fixtures::gaussian(7, 8, rng);
    const Matrix s = pairwise_sim_matrix(a, b);
    REQUIRE(s.rows() == 5);
    REQUIRE(s.cols() == 7);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 7; ++j) CHECK(s(i, j) == doctest::Approx(cosine_sim(a.row(i), b.row(j))).epsilon(1e-14));

    const Matrix single = pairwise_sim_matrix(a.slice_rows(0, 1), b.slice_rows(0, 1));
    CHECK(single.rows() == 1);
    CHECK(single(0, 0) == doctest::Approx(cosine_sim(a.row(0), b.row(0))).epsilon(1e-14));

    const Matrix u = fixtures::unit_rows(6, 4, rng);
    const Matrix uu = pairwise_sim_matrix(u, u);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(std::abs(uu(i, i) - 1.0) <= 1e-6);
        for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(uu(i, j) - uu(j, i)) <= 1e-6);
    }
    CHECK_THROWS_AS(pairwise_sim_matrix(a, fixtures::gaussian(2, 3, rng)), ShapeError);
}

TEST_CASE("matmul variants agree with transposes") {
    Rng rng(1);
    const Matrix a = fixtures::gaussian(3, 4, rng), b = fixtures::gaussian(4, 5, rng), c = fixtures::gaussian(6, 4, rng);
    const Matrix ab = matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
            CHECK(ab(i, j) == doctest::Approx(s).epsilon(1e-14));
        }
    const Matrix act = matmul_transpose_b(a, c);
    const Matrix act2 = matmul(a, c.transposed());
    for (std::size_t i = 0; i < act.size(); ++i) CHECK(act.flat()[i] == doctest::Approx(act2.flat()[i]).epsilon(1e-14));
    const Matrix atb = matmul_transpose_a(c, fixtures::gaussian(6, 2, rng));
    CHECK(atb.rows() == 4);
    CHECK(atb.cols() == 2);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("embedding file round-trips") {
    fixtures::TempDir dir;
    Rng rng(11);

    const Matrix m = fixtures::float_exact(3, 4, rng);
    save_embeddings(m, dir / "m.pace");
    CHECK(load_embeddings(dir / "m.pace") == m);

    save_embeddings(Matrix{{0.5}}, dir / "one.pace");
    CHECK(load_embeddings(dir / "one.pace") == Matrix{{0.5}});

    const Matrix empty(0, 512);
    save_embeddings(empty, dir / "empty.pace");
    const Matrix e = load_embeddings(dir / "empty.pace");
    CHECK(e.rows() == 0);
    CHECK(e.cols() == 512);

    save_embeddings(m, dir / "again.pace");
    CHECK(fixtures::slurp(dir / "m.pace") == fixtures::slurp(dir / "again.pace"));

    for (int t = 0; t < 100; ++t) {
        const Matrix r = fixtures::float_exact(uniform_index(rng, 6), 1 + uniform_index(rng, 9), rng);
        CHECK(decode_embeddings(encode_embeddings(r)) == r);
    }
}

TEST_CASE("save rounds to nearest float32") {
    const double x = 0.1;  // not representable in float32
    const Matrix back = decode_embeddings(encode_embeddings(Matrix{{x}}));
    CHECK(back(0, 0) == static_cast<double>(static_cast<float>(x)));
}

TEST_CASE("header layout is little-endian and fixed") {
    const auto b = bytes_of(Matrix{{1.0, 2.0}});
    REQUIRE(b.size() == kEmbeddingHeaderSize + 8);
    CHECK(std::memcmp(b.data(), "PACE", 4) == 0);
    CHECK(b[4] == 1);
    CHECK(b[8] == 1);
    CHECK(b[12] == 2);
    CHECK(b[16] == 0);
    for (std::size_t i = 17; i < 32; ++i) CHECK(b[i] == 0);
    // 1.0f = 0x3f800000, little-endian
    CHECK(b[32] == 0x00);
    CHECK(b[35] == 0x3f);
}

TEST_CASE("corrupted files are rejected with byte offsets") {
    const auto good = bytes_of(Matrix{{1, 2}, {3, 4}});

    auto bad = good;
    std::memcpy(bad.data(), "XXXX", 4);
    CHECK(format_error_offset(bad) == 0);

    bad = good;
    bad[4] = 2;
    CHECK(format_error_offset(bad) == 4);

    bad = good;
    bad[16] = 1;
    CHECK(format_error_offset(bad) == 16);

    for (std::size_t i = 17; i < 32; ++i) {
        bad = good;
        bad[i] = 0xff;
        CHECK(format_error_offset(bad) == i);
    }

    bad = good;
    bad.resize(good.size() - 3);
    CHECK_THROWS_AS(decode_embeddings(bad), FormatError);

    bad = std::vector<std::uint8_t>(good.begin(), good.begin() + 10);
    CHECK_THROWS_AS(decode_embeddings(bad), FormatError);

    bad = good;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_embeddings(bad), FormatError);

    bad = good;
    bad[12] = 0;  // dim 0
    CHECK(format_error_offset(bad) == 12);

    bad = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 32 + 8, &nan, 4);
    CHECK(format_error_offset(bad) == 40);
}

TEST_CASE("save rejects non-finite values before writing") {
    fixtures::TempDir dir;
    Matrix m{{1, std::nan("")}};
    CHECK_THROWS_AS(save_embeddings(m, dir / "nan.pace"), DegenerateInputError);
    CHECK_FALSE(std::filesystem::exists(dir / "nan.pace"));
    Matrix big{{1e300}};  // overflows float32
    CHECK_THROWS_AS(save_embeddings(big, dir / "big.pace"), DegenerateInputError);
}

TEST_CASE("load errors name the file") {
    fixtures::TempDir dir;
    fixtures::spit(dir / "bad.pace", "XXXX0000000000000000000000000000");
    try {
        load_embeddings(dir / "bad.pace");
        FAIL("accepted bad magic");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("bad.pace") != std::string::npos);
        CHECK(e.offset() == 0);
    }
    CHECK_THROWS(load_embeddings(dir / "missing.pace"));
    CHECK_THROWS(save_embeddings(Matrix{{1.0}}, dir / "no" / "such" / "dir.pace"));
}

TEST_CASE("header-only read") {
    fixtures::TempDir dir;
    save_embeddings(Matrix(5, 3, 0.25), dir / "h.pace");
    const auto h = read_embedding_header(dir / "h.pace");
    CHECK(h.rows == 5);
    CHECK(h.dim == 3);
}
