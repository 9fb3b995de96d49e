#include <cmath>

#include "pacmetric/paclearn.hpp"

namespace pacmetric::paclearn {

void LoraAdapter::validate() const {
    if (A.cols() == 0 || A.rows() == 0) throw ShapeError("LoraAdapter: empty A");
    if (B.rows() != A.cols())
        throw ShapeError("LoraAdapter: A is " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                         " but B has " + std::to_string(B.rows()) + " rows");
    if (!(alpha > 0.0)) throw std::invalid_argument("LoraAdapter: alpha must be > 0");
}

LoraAdapter LoraAdapter::init(std::size_t d_in, std::size_t d_out, std::size_t rank, double alpha,
                              Rng& rng) {
    if (rank != 2 && rank != 4 && rank != 8 && rank != 16)
        throw std::invalid_argument("LoraAdapter: rank must be one of 2, 4, 8, 16 (got " +
                                    std::to_string(rank) + ")");
    LoraAdapter a{Matrix(d_in, rank), Matrix(rank, d_out), alpha};
    for (auto& x : a.A.flat()) x = 0.02 * standard_normal(rng);
    a.validate();
    return a;
}

Matrix ProjectionHead::effective_weight() const {
    adapter.validate();
    if (base.rows() != adapter.d_in() || base.cols() != adapter.d_out())
        throw ShapeError("ProjectionHead: base is " + std::to_string(base.rows()) + "x" +
                         std::to_string(base.cols()) + ", adapter is " + std::to_string(adapter.d_in()) +
                         "x" + std::to_string(adapter.d_out()));
    Matrix w = base;
    const Matrix delta = matmul(adapter.A, adapter.B);
    const double s = adapter.scale();
    auto dst = w.flat();
    auto src = delta.flat();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
    return w;
}

Vector lora_forward(const Matrix& base, const LoraAdapter& adapter, std::span<const double> x) {
    const ProjectionHead head{base, adapter};
    const Matrix w = head.effective_weight();
    if (x.size() != w.rows())
        throw ShapeError("lora_forward: input dim " + std::to_string(x.size()) + " != " +
                         std::to_string(w.rows()));
    Vector out(w.cols(), 0.0);
    for (std::size_t k = 0; k < w.rows(); ++k)
        for (std::size_t j = 0; j < w.cols(); ++j) out[j] += x[k] * w(k, j);
    return out;
}

Matrix project(const ProjectionHead& head, const Matrix& x) {
    const Matrix w = head.effective_weight();
    if (x.cols() != w.rows())
        throw ShapeError("project: input dim " + std::to_string(x.cols()) + " != " + std::to_string(w.rows()));
    return matmul(x, w);
}

void TupleBatch::validate() const {
    if (v.rows() == 0) throw std::invalid_argument("TupleBatch: empty batch");
    if (t.rows() != v.rows() || v_gen.rows() != v.rows() || t_gen.rows() != v.rows())
        throw ShapeError("TupleBatch: all four members need the same row count");
    if (v_gen.cols() != v.cols() || t_gen.cols() != t.cols())
        throw ShapeError("TupleBatch: generated features must match real feature dims");
    if (!v.all_finite() || !t.all_finite() || !v_gen.all_finite() || !t_gen.all_finite())
        throw DegenerateInputError("TupleBatch: non-finite feature");
}

TupleBatch TupleBatch::select(std::span<const std::size_t> rows) const {
    const auto pick = [&](const Matrix& m) {
        Matrix out(rows.size(), m.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto src = m.row(rows[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    };
    return {pick(v), pick(t), pick(v_gen), pick(t_gen)};
}

}  // namespace pacmetric::paclearn
