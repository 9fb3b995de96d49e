#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "pacmetric/paclearn.hpp"

namespace pacmetric::paclearn {

void TrainConfig::validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("TrainConfig: tau must be > 0");
    if (lambda_v < 0.0 || lambda_t < 0.0) throw std::invalid_argument("TrainConfig: lambdas must be >= 0");
    if (lr < 0.0) throw std::invalid_argument("TrainConfig: lr must be >= 0");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (val_every == 0) throw std::invalid_argument("TrainConfig: val_every must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("TrainConfig: alpha must be > 0");
}

std::string TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["tau"] = tau;
    j["lambda_v"] = lambda_v;
    j["lambda_t"] = lambda_t;
    j["lr"] = lr;
    j["weight_decay"] = weight_decay;
    j["batch_size"] = batch_size;
    j["patience_iters"] = patience_iters;
    j["max_iters"] = max_iters;
    j["val_every"] = val_every;
    j["rank"] = rank;
    j["alpha"] = alpha;
    j["seed"] = seed;
    return j.dump();
}

DualHeads init_heads(Matrix image_base, Matrix text_base, const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    auto image = LoraAdapter::init(image_base.rows(), image_base.cols(), cfg.rank, cfg.alpha, rng);
    auto text = LoraAdapter::init(text_base.rows(), text_base.cols(), cfg.rank, cfg.alpha, rng);
    return {{std::move(image_base), std::move(image)}, {std::move(text_base), std::move(text)}};
}

double image_to_text_recall_at_1(const Matrix& image_emb, const Matrix& text_emb,
                                 std::span<const std::size_t> labels) {
    if (image_emb.rows() == 0 || image_emb.rows() != text_emb.rows())
        throw ShapeError("recall_at_1: need matching non-empty image and caption sets");
    if (!labels.empty() && labels.size() != image_emb.rows())
        throw ShapeError("recall_at_1: one label per row required");
    const Matrix sim = pairwise_sim_matrix(image_emb, text_emb);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < sim.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < sim.cols(); ++j)
            if (sim(i, j) > sim(i, best)) best = j;
        hits += labels.empty() ? best == i : labels[best] == labels[i];
    }
    return static_cast<double>(hits) / static_cast<double>(sim.rows());
}

TrainResult train_adapters(const TupleBatch& train, const TupleBatch& val, DualHeads init,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0) throw std::invalid_argument("train_adapters: empty training set");
    if (val.size() == 0) throw std::invalid_argument("train_adapters: empty validation set");
    train.validate();
    val.validate();

    const LossWeights weights = LossWeights::from(cfg);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    AdamState adam;
    adam.weight_decay = cfg.weight_decay;

    TrainResult result;
    DualHeads heads = std::move(init);
    result.best_val_loss = combined_loss(val, heads, weights).total;
    result.heads = heads;
    result.history.push_back({0, combined_loss(train, heads, weights).total, result.best_val_loss});

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();
    const std::size_t batch = std::min(cfg.batch_size, train.size());

    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        if (cursor + batch > order.size()) {
            shuffle(order, rng);
            cursor = 0;
        }
        const auto rows = std::span<const std::size_t>(order).subspan(cursor, batch);
        cursor += batch;

        const auto lg = combined_loss_grad(train.select(rows), heads, weights);
        auto& ia = heads.image.adapter;
        auto& ta = heads.text.adapter;
        const std::span<double> params[] = {ia.A.flat(), ia.B.flat(), ta.A.flat(), ta.B.flat()};
        const std::span<const double> grads[] = {lg.grad.image_A.flat(), lg.grad.image_B.flat(),
                                                 lg.grad.text_A.flat(), lg.grad.text_B.flat()};
        adamw_step(params, grads, adam, cfg.lr);

        HistoryRow row{it, lg.loss.total, std::nullopt};
        if (it % cfg.val_every == 0) {
            const double vl = combined_loss(val, heads, weights).total;
            row.val_loss = vl;
            if (vl < result.best_val_loss) {
                result.best_val_loss = vl;
                result.best_iteration = it;
                result.heads = heads;
            }
        }
        result.history.push_back(row);
        result.iterations = it;
        if (it - result.best_iteration >= cfg.patience_iters) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

ClusterWorld ClusterWorld::make(const ClusterSpec& spec, Rng& rng) {
    if (spec.clusters == 0 || spec.dim == 0) throw std::invalid_argument("ClusterWorld: empty spec");
    Matrix anchors(spec.clusters, spec.dim);
    for (auto& x : anchors.flat()) x = standard_normal(rng);
    return {l2_normalize(anchors), spec};
}

std::vector<std::size_t> ClusterWorld::labels(std::size_t n) const {
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i % anchors.rows();
    return out;
}

TupleBatch ClusterWorld::sample(std::size_t n, Rng& rng) const {
    TupleBatch b{Matrix(n, spec.dim), Matrix(n, spec.dim), Matrix(n, spec.dim), Matrix(n, spec.dim)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto anchor = anchors.row(i % anchors.rows());
        const auto fill = [&](Matrix& m, double sigma) {
            auto row = m.row(i);
            for (std::size_t d = 0; d < spec.dim; ++d) row[d] = anchor[d] + sigma * standard_normal(rng);
        };
        fill(b.v, spec.noise_real);
        fill(b.t, spec.noise_real);
        fill(b.v_gen, spec.noise_gen);
        fill(b.t_gen, spec.noise_gen);
    }
    return b;
}

}  // namespace pacmetric::paclearn
