#include <algorithm>
#include <cmath>
#include <limits>

#include "pacmetric/paclearn.hpp"

namespace pacmetric::paclearn {

namespace {

constexpr double kNormTol = 1e-4;

void require_normalized(const Matrix& m, const char* what) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (std::abs(l2_norm(m.row(r)) - 1.0) > kNormTol)
            throw DegenerateInputError(std::string(what) + ": row " + std::to_string(r) +
                                       " is not l2-normalized");
}

void require_pair(const Matrix& x, const Matrix& y, double tau, const char* what) {
    if (x.rows() == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw ShapeError(std::string(what) + ": operands must have identical shapes");
    if (!(tau > 0.0)) throw std::invalid_argument(std::string(what) + ": tau must be > 0");
    require_normalized(x, what);
    require_normalized(y, what);
}

struct SoftmaxStats {
    Matrix row_prob;  // softmax over j of logits(i, j)
    Matrix col_prob;  // softmax over i of logits(i, j)
    double loss = 0.0;
};

// logits = X Y^T / tau. Loss is the mean of the row-wise and column-wise
// cross-entropies with the diagonal as target.
SoftmaxStats contrastive_softmax(const Matrix& X, const Matrix& Y, double tau) {
    const std::size_t n = X.rows();
    Matrix logits = matmul_transpose_b(X, Y);
    for (auto& s : logits.flat()) s /= tau;

    SoftmaxStats st{Matrix(n, n), Matrix(n, n), 0.0};
    double row_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(logits(i, j) - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < n; ++j) st.row_prob(i, j) = std::exp(logits(i, j) - lse);
        row_loss += lse - logits(i, i);
    }
    double col_loss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) z += std::exp(logits(i, j) - mx);
        const double lse = mx + std::log(z);
        for (std::size_t i = 0; i < n; ++i) st.col_prob(i, j) = std::exp(logits(i, j) - lse);
        col_loss += lse - logits(j, j);
    }
    st.loss = 0.5 * (row_loss + col_loss) / static_cast<double>(n);
    return st;
}

struct NceGrad {
    double loss = 0.0;
    Matrix dX;
    Matrix dY;
};

// dL/dlogits = ((P_row - I) + (P_col - I)) / (2N); logits = X Y^T / tau.
NceGrad nce_with_grad(const Matrix& X, const Matrix& Y, double tau) {
    const std::size_t n = X.rows();
    auto st = contrastive_softmax(X, Y, tau);
    Matrix g(n, n);
    const double k = 0.5 / static_cast<double>(n) / tau;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            g(i, j) = k * (st.row_prob(i, j) + st.col_prob(i, j) - (i == j ? 2.0 : 0.0));
    return {st.loss, matmul(g, Y), matmul_transpose_a(g, X)};
}

// Backprop through row-wise l2 normalization x = u / |u|.
Matrix normalize_backward(const Matrix& u, const Matrix& x, const Matrix& dx) {
    Matrix du(u.rows(), u.cols());
    for (std::size_t r = 0; r < u.rows(); ++r) {
        const double norm = l2_norm(u.row(r));
        const double proj = dot(x.row(r), dx.row(r));
        for (std::size_t c = 0; c < u.cols(); ++c) du(r, c) = (dx(r, c) - x(r, c) * proj) / norm;
    }
    return du;
}

void add_scaled(Matrix& dst, const Matrix& src, double s) {
    auto d = dst.flat();
    auto x = src.flat();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * x[i];
}

}  // namespace

double info_nce(const Matrix& V, const Matrix& T, double tau) {
    require_pair(V, T, tau, "info_nce");
    return contrastive_softmax(V, T, tau).loss;
}

double cross_positive_loss(const Matrix& X, const Matrix& Y, double tau) {
    require_pair(X, Y, tau, "cross_positive_loss");
    return contrastive_softmax(X, Y, tau).loss;
}

LossTerms combined_loss(const TupleBatch& batch, const DualHeads& heads, const LossWeights& w) {
    batch.validate();
    const Matrix xv = l2_normalize(project(heads.image, batch.v));
    const Matrix xt = l2_normalize(project(heads.text, batch.t));
    const Matrix xvg = l2_normalize(project(heads.image, batch.v_gen));
    const Matrix xtg = l2_normalize(project(heads.text, batch.t_gen));
    LossTerms out;
    out.real = info_nce(xv, xt, w.tau);
    out.gen_image = cross_positive_loss(xvg, xt, w.tau);
    out.gen_text = cross_positive_loss(xv, xtg, w.tau);
    out.total = out.real + w.lambda_v * out.gen_image + w.lambda_t * out.gen_text;
    return out;
}

LossAndGrad combined_loss_grad(const TupleBatch& batch, const DualHeads& heads, const LossWeights& w) {
    batch.validate();
    if (!(w.tau > 0.0)) throw std::invalid_argument("combined_loss_grad: tau must be > 0");
    const Matrix Wv = heads.image.effective_weight();
    const Matrix Wt = heads.text.effective_weight();

    const Matrix uv = matmul(batch.v, Wv), ut = matmul(batch.t, Wt);
    const Matrix uvg = matmul(batch.v_gen, Wv), utg = matmul(batch.t_gen, Wt);
    const Matrix xv = l2_normalize(uv), xt = l2_normalize(ut);
    const Matrix xvg = l2_normalize(uvg), xtg = l2_normalize(utg);

    const auto real = nce_with_grad(xv, xt, w.tau);
    const auto gen_image = nce_with_grad(xvg, xt, w.tau);
    const auto gen_text = nce_with_grad(xv, xtg, w.tau);

    LossAndGrad out;
    out.loss.real = real.loss;
    out.loss.gen_image = gen_image.loss;
    out.loss.gen_text = gen_text.loss;
    out.loss.total = real.loss + w.lambda_v * gen_image.loss + w.lambda_t * gen_text.loss;

    Matrix dxv = real.dX;
    add_scaled(dxv, gen_text.dX, w.lambda_t);
    Matrix dxt = real.dY;
    add_scaled(dxt, gen_image.dY, w.lambda_v);
    Matrix dxvg = gen_image.dX;
    for (auto& x : dxvg.flat()) x *= w.lambda_v;
    Matrix dxtg = gen_text.dY;
    for (auto& x : dxtg.flat()) x *= w.lambda_t;

    // dL/dW for each side, summed over the real and generated inputs.
    Matrix dWv = matmul_transpose_a(batch.v, normalize_backward(uv, xv, dxv));
    add_scaled(dWv, matmul_transpose_a(batch.v_gen, normalize_backward(uvg, xvg, dxvg)), 1.0);
    Matrix dWt = matmul_transpose_a(batch.t, normalize_backward(ut, xt, dxt));
    add_scaled(dWt, matmul_transpose_a(batch.t_gen, normalize_backward(utg, xtg, dxtg)), 1.0);

    // W = base + s * A * B  =>  dA = s * dW * B^T, dB = s * A^T * dW.
    const auto factor_grads = [](const LoraAdapter& a, const Matrix& dW, Matrix& dA, Matrix& dB) {
        const double s = a.scale();
        dA = matmul_transpose_b(dW, a.B);
        dB = matmul_transpose_a(a.A, dW);
        for (auto& x : dA.flat()) x *= s;
        for (auto& x : dB.flat()) x *= s;
    };
    factor_grads(heads.image.adapter, dWv, out.grad.image_A, out.grad.image_B);
    factor_grads(heads.text.adapter, dWt, out.grad.text_A, out.grad.text_B);
    return out;
}

}  // namespace pacmetric::paclearn
