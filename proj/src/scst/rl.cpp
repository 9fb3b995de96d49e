#include <numeric>

#include "pacmetric/scst.hpp"

namespace pacmetric::scst {

Vector ToyTextEncoder::encode(const Tokens& tokens) const {
    if (tokens.empty()) throw std::invalid_argument("ToyTextEncoder: empty caption");
    Vector mean(token_vectors.cols(), 0.0);
    for (auto t : tokens) {
        if (t >= token_vectors.rows()) throw std::invalid_argument("ToyTextEncoder: token id out of range");
        auto row = token_vectors.row(t);
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += row[d];
    }
    for (auto& x : mean) x /= static_cast<double>(tokens.size());
    return l2_normalize(mean);
}

double reward(std::span<const double> image, const Tokens& caption, const ToyTextEncoder& encoder,
              const scoring::ScoreConfig& cfg, const Matrix* refs) {
    const Vector text = encoder.encode(caption);
    if (refs != nullptr) return scoring::ref_pac_score(image, text, *refs, cfg);
    return scoring::pac_score(image, text, cfg);
}

double baseline(std::span<const double> rewards) {
    if (rewards.empty()) throw std::invalid_argument("baseline: no rewards");
    return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

Matrix scst_gradient(const ToyPolicy& policy, std::span<const double> image, std::span<const Beam> beams,
                     std::span<const double> rewards, double b) {
    if (beams.size() != rewards.size())
        throw std::invalid_argument("scst_gradient: " + std::to_string(beams.size()) + " beams but " +
                                    std::to_string(rewards.size()) + " rewards");
    if (beams.empty()) throw std::invalid_argument("scst_gradient: no beams");
    Matrix g(policy.theta().rows(), policy.theta().cols());
    const double inv_l = 1.0 / static_cast<double>(beams.size());
    for (std::size_t i = 0; i < beams.size(); ++i) {
        const double adv = rewards[i] - b;
        if (adv == 0.0) continue;
        const Matrix glp = policy.grad_log_prob(image, beams[i].tokens);
        auto dst = g.flat();
        auto src = glp.flat();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= inv_l * adv * src[k];
    }
    return g;
}

void ScstConfig::validate() const {
    if (beam_size == 0) throw std::invalid_argument("ScstConfig: beam size must be >= 1");
    if (lr < 0.0) throw std::invalid_argument("ScstConfig: lr must be >= 0");
    if (images_per_step == 0) throw std::invalid_argument("ScstConfig: images_per_step must be >= 1");
}

ScstHistory scst_train(ToyPolicy& policy, const Matrix& images, const ScstConfig& cfg, const RewardFn& reward_fn) {
    cfg.validate();
    if (images.rows() == 0) throw std::invalid_argument("scst_train: no images");
    if (!reward_fn) throw std::invalid_argument("scst_train: no reward function");
    Rng rng(cfg.seed);
    ScstHistory history;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Matrix grad(policy.theta().rows(), policy.theta().cols());
        double reward_sum = 0.0;
        std::size_t reward_count = 0;
        for (std::size_t k = 0; k < cfg.images_per_step; ++k) {
            const std::size_t idx = uniform_index(rng, images.rows());
            const auto image = images.row(idx);
            const auto beams = beam_search(policy, image, cfg.beam_size);
            std::vector<double> rewards;
            rewards.reserve(beams.size());
            for (const auto& b : beams) rewards.push_back(reward_fn(idx, b.tokens));
            reward_sum += std::accumulate(rewards.begin(), rewards.end(), 0.0);
            reward_count += rewards.size();
            const Matrix g = scst_gradient(policy, image, beams, rewards, baseline(rewards));
            auto dst = grad.flat();
            auto src = g.flat();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        const double scale = cfg.lr / static_cast<double>(cfg.images_per_step);
        auto theta = policy.theta().flat();
        auto g = grad.flat();
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= scale * g[i];
        history.mean_reward.push_back(reward_sum / static_cast<double>(reward_count));
    }
    return history;
}

std::vector<double> xent_train(ToyPolicy& policy, const Matrix& images, std::span<const Tokens> captions,
                               double lr, std::size_t epochs) {
    if (images.rows() != captions.size())
        throw std::invalid_argument("xent_train: one caption per image required");
    if (captions.empty()) throw std::invalid_argument("xent_train: no training pairs");
    std::vector<double> losses;
    const double scale = lr / static_cast<double>(captions.size());
    for (std::size_t e = 0; e < epochs; ++e) {
        Matrix grad(policy.theta().rows(), policy.theta().cols());
        double loss = 0.0;
        for (std::size_t i = 0; i < captions.size(); ++i) {
            loss += xent_loss(policy, images.row(i), captions[i]);
            const Matrix g = xent_grad(policy, images.row(i), captions[i]);
            auto dst = grad.flat();
            auto src = g.flat();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
        auto theta = policy.theta().flat();
        auto g = grad.flat();
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= scale * g[k];
        losses.push_back(loss / static_cast<double>(captions.size()));
    }
    return losses;
}

}  // namespace pacmetric::scst
