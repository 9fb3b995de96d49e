#pragma once

// Positive-augmented contrastive training of low-rank adapters placed on
// frozen projection heads.
//
// Each encoder side maps pre-projection features x (d_in) to the shared
// space through W = base + (alpha / r) * A * B, then l2-normalizes. The
// objective over a batch of (image, caption, generated image, generated
// caption) tuples is
//
//   L = nce(V, T) + lambda_v * nce(V', T) + lambda_t * nce(V, T')
//
// where nce is the symmetric InfoNCE loss, averaged over both directions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacmetric/embedkit.hpp"
#include "pacmetric/random.hpp"

namespace pacmetric::paclearn {

/// Rank-r delta A (d_in x r) * B (r x d_out) scaled by alpha / r.
struct LoraAdapter {
    Matrix A;
    Matrix B;
    double alpha = 4.0;

    std::size_t rank() const noexcept { return A.cols(); }
    std::size_t d_in() const noexcept { return A.rows(); }
    std::size_t d_out() const noexcept { return B.cols(); }
    double scale() const noexcept { return alpha / static_cast<double>(rank()); }
    void validate() const;

    /// A ~ N(0, 0.02^2), B = 0. Rank must be one of 2, 4, 8, 16.
    static LoraAdapter init(std::size_t d_in, std::size_t d_out, std::size_t rank, double alpha,
                            Rng& rng);
};

/// Frozen base projection plus its trainable adapter.
struct ProjectionHead {
    Matrix base;  // d_in x d_out, frozen
    LoraAdapter adapter;

    Matrix effective_weight() const;  // base + scale * A * B
};

struct DualHeads {
    ProjectionHead image;
    ProjectionHead text;
};

/// x * (base + (alpha / r) * A * B).
Vector lora_forward(const Matrix& base, const LoraAdapter& adapter, std::span<const double> x);

/// Projects every row of `x` through the head (no normalization).
Matrix project(const ProjectionHead& head, const Matrix& x);

/// Pre-projection features of a batch of tuples, one tuple per row index.
struct TupleBatch {
    Matrix v;      // real images
    Matrix t;      // real captions
    Matrix v_gen;  // generated images
    Matrix t_gen;  // generated captions

    std::size_t size() const noexcept { return v.rows(); }
    void validate() const;
    TupleBatch select(std::span<const std::size_t> rows) const;
};

struct TrainConfig {
    double tau = 0.01;
    double lambda_v = 0.1;
    double lambda_t = 0.001;
    double lr = 1e-4;
    double weight_decay = 0.01;
    std::size_t batch_size = 256;
    std::size_t patience_iters = 1500;
    std::size_t max_iters = 100000;
    std::size_t val_every = 100;
    std::size_t rank = 4;
    double alpha = 4.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
};

/// Symmetric InfoNCE on row-normalized V and T: the mean of the
/// image-to-text and text-to-image cross-entropies. Throws if a row is off
/// unit norm by more than 1e-4.
double info_nce(const Matrix& V, const Matrix& T, double tau);

/// Same functional form, applied to a real/generated pairing.
double cross_positive_loss(const Matrix& X, const Matrix& Y, double tau);

struct LossTerms {
    double real = 0.0;       // nce(V, T)
    double gen_image = 0.0;  // nce(V', T)
    double gen_text = 0.0;   // nce(V, T')
    double total = 0.0;
};

struct LossWeights {
    double tau = 0.01;
    double lambda_v = 0.1;
    double lambda_t = 0.001;

    static LossWeights from(const TrainConfig& cfg) { return {cfg.tau, cfg.lambda_v, cfg.lambda_t}; }
};

LossTerms combined_loss(const TupleBatch& batch, const DualHeads& heads, const LossWeights& w);

struct AdapterGrads {
    Matrix image_A, image_B, text_A, text_B;
};

struct LossAndGrad {
    LossTerms loss;
    AdapterGrads grad;
};

/// Exact gradients of combined_loss with respect to every adapter factor.
LossAndGrad combined_loss_grad(const TupleBatch& batch, const DualHeads& heads, const LossWeights& w);

// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// One AdamW update with decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// Moments are created on first use. A non-finite gradient throws and
/// leaves params and state untouched.
void adamw_step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads, AdamState& state, double lr);

// ---------------------------------------------------------------------------

struct HistoryRow {
    std::size_t iteration = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

struct TrainResult {
    DualHeads heads;  // best-validation adapters
    std::vector<HistoryRow> history;
    std::size_t best_iteration = 0;
    double best_val_loss = 0.0;
    std::size_t iterations = 0;
    bool early_stopped = false;
};

/// Minibatch AdamW on the adapters. Validation runs at iteration 0 and
/// every `val_every` iterations; training stops once no new validation
/// minimum has been seen for `patience_iters` iterations or at `max_iters`.
TrainResult train_adapters(const TupleBatch& train, const TupleBatch& val, DualHeads init,
                           const TrainConfig& cfg);

/// Fresh heads over the given frozen bases with LoRA-initialized adapters.
DualHeads init_heads(Matrix image_base, Matrix text_base, const TrainConfig& cfg);

/// Fraction of images whose most similar caption (by cosine) is their own.
/// With `labels`, any caption carrying the image's label counts as a hit.
double image_to_text_recall_at_1(const Matrix& image_emb, const Matrix& text_emb,
                                 std::span<const std::size_t> labels = {});

// ---------------------------------------------------------------------------
// Cluster generator: K random unit anchors in d_in; real image and caption
// features are anchor + N(0, noise_real^2), generated ones use noise_gen.
// Row i of a sample belongs to cluster i % K.

struct ClusterSpec {
    std::size_t clusters = 8;
    std::size_t dim = 16;
    double noise_real = 0.05;
    double noise_gen = 0.10;
};

struct ClusterWorld {
    Matrix anchors;  // K x dim
    ClusterSpec spec;

    static ClusterWorld make(const ClusterSpec& spec, Rng& rng);
    TupleBatch sample(std::size_t n, Rng& rng) const;
    std::vector<std::size_t> labels(std::size_t n) const;
};

// ---------------------------------------------------------------------------
// Adapter checkpoint: one JSON header line, then float32 LE payloads in the
// order image.A, image.B, text.A, text.B.

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string config_hash;
};

std::string config_hash(const TrainConfig& cfg);
void save_checkpoint(const DualHeads& heads, const CheckpointMeta& meta, const std::filesystem::path& path);
/// Restores the adapters into `heads` (whose frozen bases must match the
/// checkpoint dims) and returns the stored metadata.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, DualHeads& heads);

}  // namespace pacmetric::paclearn
