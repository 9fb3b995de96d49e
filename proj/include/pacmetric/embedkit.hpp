#pragma once

// Dense real matrices over embeddings, similarity kernels and the on-disk
// embedding format shared with the extractor.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacmetric {

/// Raised when an embedding file or manifest does not match its format.
/// `offset()` is the byte offset of the offending field (0 for manifests).
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
          detail_(what),
          offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::uint64_t offset_;
};

/// Input is mathematically degenerate (zero-norm row, zero mean, ...).
class DegenerateInputError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Operand shapes are inconsistent.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Vector = std::vector<double>;

/// Row-major dense matrix of 64-bit reals. Used both for embedding
/// matrices (rows = items, cols = embedding dim) and for parameters.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix from_rows(std::span<const Vector> rows, std::size_t cols);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    /// Copy of rows [begin, end).
    Matrix slice_rows(std::size_t begin, std::size_t end) const;
    Matrix transposed() const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using EmbeddingMatrix = Matrix;

// ---------------------------------------------------------------------------
// Kernels. Dot products always accumulate left to right, so results do not
// depend on how callers partition work.

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Unit-norm copy of every row. Throws DegenerateInputError naming the first
/// zero-norm row.
Matrix l2_normalize(const Matrix& m);
Vector l2_normalize(std::span<const double> v);

/// Cosine similarity in [-1, 1]; throws on dim mismatch or a zero vector.
double cosine_sim(std::span<const double> a, std::span<const double> b);

/// N x M matrix of cosine similarities between the rows of `a` and `b`.
Matrix pairwise_sim_matrix(const Matrix& a, const Matrix& b);

/// Plain products used by the trainer. Shapes are checked.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);  // a^T * b

// ---------------------------------------------------------------------------
// Embedding file format (all integers little-endian):
//   0..3   magic "PACE"
//   4..7   u32 version = 1
//   8..11  u32 rows
//   12..15 u32 dim
//   16     u8 dtype = 0 (float32)
//   17..31 reserved, zero
//   32..   rows*dim float32, row-major

inline constexpr std::size_t kEmbeddingHeaderSize = 32;
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

std::vector<std::uint8_t> encode_embeddings(const Matrix& m);
Matrix decode_embeddings(std::span<const std::uint8_t> bytes);

/// Reads rows x dim from the header only; used to validate manifests
/// without loading payloads.
struct EmbeddingHeader {
    std::uint32_t rows = 0;
    std::uint32_t dim = 0;
};
EmbeddingHeader read_embedding_header(const std::filesystem::path& path);

Matrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const Matrix& m, const std::filesystem::path& path);

}  // namespace pacmetric
