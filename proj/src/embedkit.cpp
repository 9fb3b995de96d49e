#include "pacmetric/embedkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace pacmetric {

namespace {

void store_u32(std::vector<std::uint8_t>& out, std::size_t at, std::uint32_t v) {
    for (std::size_t i = 0; i < 4; ++i) out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
}

void require_same_dim(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size())
        throw ShapeError(std::string(op) + ": dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::from_rows(std::span<const Vector> rows, std::size_t cols) {
    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw ShapeError("Matrix::from_rows: ragged rows");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_)
        throw ShapeError("Matrix::slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + std::to_string(rows_) + " rows");
    return Matrix(end - begin, cols_,
                  std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                      data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool Matrix::all_finite() const noexcept {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector l2_normalize(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n > 0.0)) throw DegenerateInputError("l2_normalize: zero-norm vector");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

Matrix l2_normalize(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double n = l2_norm(m.row(r));
        if (!(n > 0.0))
            throw DegenerateInputError("l2_normalize: zero-norm row " + std::to_string(r));
        auto dst = out.row(r);
        auto src = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = src[c] / n;
    }
    return out;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "cosine_sim");
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInputError("cosine_sim: zero vector");
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

Matrix pairwise_sim_matrix(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("pairwise_sim_matrix: dimension mismatch (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = cosine_sim(a.row(i), b.row(j));
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += s * src[j];
        }
    }
    return out;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_transpose_b: inner dimension mismatch");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
    return out;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_transpose_a: inner dimension mismatch");
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            auto dst = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += arow[i] * brow[j];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_embeddings(const Matrix& m) {
    if (m.cols() < 1) throw ShapeError("save_embeddings: dim must be >= 1");
    constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
    if (m.rows() > kMax || m.cols() > kMax) throw ShapeError("save_embeddings: shape exceeds u32");

    std::vector<float> payload(m.size());
    auto src = m.flat();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const float f = static_cast<float>(src[i]);
        if (!std::isfinite(f))
            throw DegenerateInputError("save_embeddings: non-finite value at row " +
                                       std::to_string(i / m.cols()) + ", col " +
                                       std::to_string(i % m.cols()));
        payload[i] = f;
    }

    std::vector<std::uint8_t> out(kEmbeddingHeaderSize + 4 * payload.size(), 0);
    std::memcpy(out.data(), "PACE", 4);
    store_u32(out, 4, kEmbeddingFormatVersion);
    store_u32(out, 8, static_cast<std::uint32_t>(m.rows()));
    store_u32(out, 12, static_cast<std::uint32_t>(m.cols()));
    // byte 16: dtype 0 (float32); 17..31 reserved
    for (std::size_t i = 0; i < payload.size(); ++i)
        store_u32(out, kEmbeddingHeaderSize + 4 * i, std::bit_cast<std::uint32_t>(payload[i]));
    return out;
}

namespace {

EmbeddingHeader decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kEmbeddingHeaderSize)
        throw FormatError("embedding file: truncated header (" + std::to_string(bytes.size()) +
                              " bytes)",
                          bytes.size());
    if (std::memcmp(bytes.data(), "PACE", 4) != 0)
        throw FormatError("embedding file: bad magic", 0);
    if (const auto version = get_u32(bytes, 4); version != kEmbeddingFormatVersion)
        throw FormatError("embedding file: unsupported version " + std::to_string(version), 4);
    EmbeddingHeader h{get_u32(bytes, 8), get_u32(bytes, 12)};
    if (h.dim < 1) throw FormatError("embedding file: dim must be >= 1", 12);
    if (bytes[16] != 0)
        throw FormatError("embedding file: unsupported dtype " + std::to_string(bytes[16]), 16);
    for (std::size_t i = 17; i < kEmbeddingHeaderSize; ++i)
        if (bytes[i] != 0) throw FormatError("embedding file: reserved byte not zero", i);
    return h;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path, std::size_t limit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    if (limit == 0) {
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    } else {
        bytes.resize(limit);
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(limit));
        bytes.resize(static_cast<std::size_t>(in.gcount()));
    }
    return bytes;
}

}  // namespace

Matrix decode_embeddings(std::span<const std::uint8_t> bytes) {
    const auto h = decode_header(bytes);
    const std::uint64_t count = std::uint64_t{h.rows} * h.dim;
    const std::uint64_t expected = kEmbeddingHeaderSize + 4 * count;
    if (bytes.size() < expected)
        throw FormatError("embedding file: truncated payload, expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(bytes.size()),
                          bytes.size());
    if (bytes.size() > expected)
        throw FormatError("embedding file: trailing bytes after payload", expected);

    std::vector<double> data(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t at = kEmbeddingHeaderSize + 4 * i;
        const float f = std::bit_cast<float>(get_u32(bytes, at));
        if (!std::isfinite(f)) throw FormatError("embedding file: non-finite value", at);
        data[i] = f;
    }
    return Matrix(h.rows, h.dim, std::move(data));
}

EmbeddingHeader read_embedding_header(const std::filesystem::path& path) {
    const auto bytes = read_file(path, kEmbeddingHeaderSize);
    const auto h = decode_header(bytes);
    const auto size = std::filesystem::file_size(path);
    const std::uint64_t expected = kEmbeddingHeaderSize + 4 * std::uint64_t{h.rows} * h.dim;
    if (size != expected)
        throw FormatError(path.string() + ": payload size " + std::to_string(size) +
                              " does not match header (" + std::to_string(expected) + ")",
                          std::min<std::uint64_t>(size, expected));
    return h;
}

Matrix load_embeddings(const std::filesystem::path& path) {
    const auto bytes = read_file(path, 0);
    try {
        return decode_embeddings(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

void save_embeddings(const Matrix& m, const std::filesystem::path& path) {
    const auto bytes = encode_embeddings(m);  // validates before touching the file
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace pacmetric
