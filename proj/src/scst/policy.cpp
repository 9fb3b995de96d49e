#include <algorithm>
#include <cmath>
#include <limits>

#include "pacmetric/scst.hpp"

namespace pacmetric::scst {

ToyPolicy::ToyPolicy(std::vector<std::string> vocab, std::optional<std::size_t> eos, Matrix token_embed,
                     Vector bos_embed, std::size_t image_dim, std::size_t max_len)
    : vocab_(std::move(vocab)),
      eos_(eos),
      token_embed_(std::move(token_embed)),
      bos_embed_(std::move(bos_embed)),
      image_dim_(image_dim),
      max_len_(max_len) {
    if (vocab_.empty()) throw std::invalid_argument("ToyPolicy: empty vocabulary");
    if (eos_ && *eos_ >= vocab_.size()) throw std::invalid_argument("ToyPolicy: EOS index out of range");
    if (token_embed_.rows() != vocab_.size())
        throw ShapeError("ToyPolicy: one token embedding per vocabulary entry required");
    if (bos_embed_.size() != token_embed_.cols()) throw ShapeError("ToyPolicy: BOS embedding dim mismatch");
    if (max_len_ == 0) throw std::invalid_argument("ToyPolicy: max_len must be >= 1");
    theta_ = Matrix(vocab_.size(), feature_dim());
}

ToyPolicy ToyPolicy::make(std::vector<std::string> vocab, std::optional<std::size_t> eos, std::size_t image_dim,
                          std::size_t embed_dim, std::size_t max_len, Rng& rng) {
    const double sigma = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    Matrix embed(vocab.size(), embed_dim);
    for (auto& x : embed.flat()) x = sigma * standard_normal(rng);
    Vector bos(embed_dim);
    for (auto& x : bos) x = sigma * standard_normal(rng);
    return ToyPolicy(std::move(vocab), eos, std::move(embed), std::move(bos), image_dim, max_len);
}

std::size_t ToyPolicy::token_id(const std::string& token) const {
    auto it = std::find(vocab_.begin(), vocab_.end(), token);
    if (it == vocab_.end()) throw std::invalid_argument("ToyPolicy: token '" + token + "' not in vocabulary");
    return static_cast<std::size_t>(it - vocab_.begin());
}

std::vector<std::string> ToyPolicy::token_strings(const Tokens& tokens) const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (auto t : tokens) out.push_back(vocab_.at(t));
    return out;
}

bool ToyPolicy::is_complete(const Tokens& prefix) const {
    if (prefix.size() >= max_len_) return true;
    return !prefix.empty() && eos_ && prefix.back() == *eos_;
}

Vector ToyPolicy::features(std::span<const double> image, const Tokens& prefix) const {
    if (image.size() != image_dim_)
        throw ShapeError("ToyPolicy: image dim " + std::to_string(image.size()) + " != " + std::to_string(image_dim_));
    const std::size_t d = token_embed_.cols();
    Vector phi(feature_dim(), 0.0);
    std::copy(image.begin(), image.end(), phi.begin());
    auto sum = std::span<double>(phi).subspan(image_dim_, d);
    for (std::size_t k = 0; k < d; ++k) sum[k] = bos_embed_[k];
    for (auto t : prefix) {
        if (t >= vocab_.size()) throw std::invalid_argument("ToyPolicy: token id out of range");
        auto e = token_embed_.row(t);
        for (std::size_t k = 0; k < d; ++k) sum[k] += e[k];
    }
    phi.back() = 1.0;
    return phi;
}

Vector ToyPolicy::logits(std::span<const double> image, const Tokens& prefix) const {
    const Vector phi = features(image, prefix);
    Vector z(vocab_.size());
    for (std::size_t v = 0; v < z.size(); ++v) z[v] = dot(theta_.row(v), phi);
    return z;
}

Vector ToyPolicy::log_probs(std::span<const double> image, const Tokens& prefix) const {
    Vector z = logits(image, prefix);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double x : z) s += std::exp(x - mx);
    const double lse = mx + std::log(s);
    for (auto& x : z) x -= lse;
    return z;
}

double ToyPolicy::log_prob(std::span<const double> image, const Tokens& sequence) const {
    double lp = 0.0;
    Tokens prefix;
    for (auto t : sequence) {
        if (t >= vocab_.size()) throw std::invalid_argument("ToyPolicy: token id out of range");
        lp += log_probs(image, prefix)[t];
        prefix.push_back(t);
    }
    return lp;
}

Matrix ToyPolicy::grad_log_prob(std::span<const double> image, const Tokens& sequence) const {
    Matrix g(theta_.rows(), theta_.cols());
    Tokens prefix;
    for (auto t : sequence) {
        if (t >= vocab_.size()) throw std::invalid_argument("ToyPolicy: token id out of range");
        const Vector phi = features(image, prefix);
        const Vector lp = log_probs(image, prefix);
        for (std::size_t v = 0; v < vocab_.size(); ++v) {
            const double coef = (v == t ? 1.0 : 0.0) - std::exp(lp[v]);
            auto row = g.row(v);
            for (std::size_t f = 0; f < phi.size(); ++f) row[f] += coef * phi[f];
        }
        prefix.push_back(t);
    }
    return g;
}

// ---------------------------------------------------------------------------

namespace {

void require_gt(const ToyPolicy& policy, const Tokens& gt) {
    if (gt.empty()) throw std::invalid_argument("xent: empty ground-truth caption");
    for (auto t : gt)
        if (t >= policy.vocab_size()) throw std::invalid_argument("xent: token id outside vocabulary");
    if (policy.eos() && gt.back() != *policy.eos())
        throw std::invalid_argument("xent: ground-truth caption must end with EOS");
}

}  // namespace

double xent_loss(const ToyPolicy& policy, std::span<const double> image, const Tokens& gt) {
    require_gt(policy, gt);
    return -policy.log_prob(image, gt);
}

Matrix xent_grad(const ToyPolicy& policy, std::span<const double> image, const Tokens& gt) {
    require_gt(policy, gt);
    Matrix g = policy.grad_log_prob(image, gt);
    for (auto& x : g.flat()) x = -x;
    return g;
}

std::vector<Beam> beam_search(const ToyPolicy& policy, std::span<const double> image, std::size_t l) {
    if (l == 0) throw std::invalid_argument("beam_search: beam size must be >= 1");
    const auto better = [](const Beam& a, const Beam& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        return a.tokens < b.tokens;
    };

    std::vector<Beam> beams{Beam{}};
    for (std::size_t step = 0; step < policy.max_len(); ++step) {
        std::vector<Beam> candidates;
        bool expanded = false;
        for (const auto& b : beams) {
            if (!b.tokens.empty() && policy.is_complete(b.tokens)) {
                candidates.push_back(b);
                continue;
            }
            expanded = true;
            const Vector lp = policy.log_probs(image, b.tokens);
            for (std::size_t v = 0; v < lp.size(); ++v) {
                Beam next{b.tokens, b.log_prob + lp[v]};
                next.tokens.push_back(v);
                candidates.push_back(std::move(next));
            }
        }
        if (!expanded) break;
        std::sort(candidates.begin(), candidates.end(), better);
        if (candidates.size() > l) candidates.resize(l);
        beams = std::move(candidates);
    }
    return beams;
}

}  // namespace pacmetric::scst
