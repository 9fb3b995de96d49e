#pragma once

// Self-critical sequence training at toy scale: an autoregressive policy
// with a closed-form gradient, beam search, score-based rewards with a
// beam-mean baseline, and the grammar metrics used to inspect generations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pacmetric/embedkit.hpp"
#include "pacmetric/random.hpp"
#include "pacmetric/scoring.hpp"

namespace pacmetric::scst {

using Tokens = std::vector<std::size_t>;

/// Next-token logits are a linear function of
///   [image embedding | sum of (BOS, previous token embeddings) | 1].
/// `theta` (V x feature_dim) is the only trainable parameter.
class ToyPolicy {
public:
    /// `eos` may be empty, in which case every sequence runs to max_len.
    ToyPolicy(std::vector<std::string> vocab, std::optional<std::size_t> eos, Matrix token_embed,
              Vector bos_embed, std::size_t image_dim, std::size_t max_len);

    /// Random token and BOS embeddings (N(0, 1/D)), theta = 0.
    static ToyPolicy make(std::vector<std::string> vocab, std::optional<std::size_t> eos,
                          std::size_t image_dim, std::size_t embed_dim, std::size_t max_len, Rng& rng);

    const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    std::size_t vocab_size() const noexcept { return vocab_.size(); }
    std::optional<std::size_t> eos() const noexcept { return eos_; }
    std::size_t max_len() const noexcept { return max_len_; }
    std::size_t image_dim() const noexcept { return image_dim_; }
    std::size_t feature_dim() const noexcept { return image_dim_ + token_embed_.cols() + 1; }

    Matrix& theta() noexcept { return theta_; }
    const Matrix& theta() const noexcept { return theta_; }

    std::size_t token_id(const std::string& token) const;
    std::vector<std::string> token_strings(const Tokens& tokens) const;

    /// True when `prefix` ends with EOS or has reached max_len.
    bool is_complete(const Tokens& prefix) const;

    Vector features(std::span<const double> image, const Tokens& prefix) const;
    Vector logits(std::span<const double> image, const Tokens& prefix) const;
    /// log softmax of the next-token logits.
    Vector log_probs(std::span<const double> image, const Tokens& prefix) const;

    double log_prob(std::span<const double> image, const Tokens& sequence) const;
    /// d log p(sequence) / d theta.
    Matrix grad_log_prob(std::span<const double> image, const Tokens& sequence) const;

private:
    std::vector<std::string> vocab_;
    std::optional<std::size_t> eos_;
    Matrix token_embed_;
    Vector bos_embed_;
    std::size_t image_dim_;
    std::size_t max_len_;
    Matrix theta_;
};

/// Teacher-forced negative log-likelihood, summed over positions.
double xent_loss(const ToyPolicy& policy, std::span<const double> image, const Tokens& gt);
Matrix xent_grad(const ToyPolicy& policy, std::span<const double> image, const Tokens& gt);

struct Beam {
    Tokens tokens;
    double log_prob = 0.0;
};

/// Width-l beam search. Completed hypotheses stay in the candidate pool;
/// ties in log-probability are broken by lexicographic token-id order.
/// Output is sorted best first and holds min(l, #reachable sequences) beams.
std::vector<Beam> beam_search(const ToyPolicy& policy, std::span<const double> image, std::size_t l);

/// Caption embedding used by the reward: normalized mean of per-token
/// vectors living in the image embedding space.
struct ToyTextEncoder {
    Matrix token_vectors;  // V x image_dim

    Vector encode(const Tokens& tokens) const;
};

/// pac_score of the encoded caption, or ref_pac_score when `refs` holds
/// reference caption embeddings.
double reward(std::span<const double> image, const Tokens& caption, const ToyTextEncoder& encoder,
              const scoring::ScoreConfig& cfg, const Matrix* refs = nullptr);

/// Mean reward of the beams generated for one image.
double baseline(std::span<const double> rewards);

/// -(1/l) * sum_i (r_i - b) * grad log p(beam_i).
Matrix scst_gradient(const ToyPolicy& policy, std::span<const double> image, std::span<const Beam> beams,
                     std::span<const double> rewards, double b);

struct ScstConfig {
    std::size_t beam_size = 5;
    double lr = 0.5;
    std::uint64_t seed = 0;
    std::size_t steps = 200;
    std::size_t images_per_step = 8;

    void validate() const;
};

/// Reward for the caption generated for image `index`.
using RewardFn = std::function<double(std::size_t index, const Tokens& caption)>;

struct ScstHistory {
    std::vector<double> mean_reward;  // mean beam reward of each step's batch
};

/// Plain gradient steps on the SCST loss; images per step are drawn with
/// the seeded RNG. Rows of `images` are image embeddings.
ScstHistory scst_train(ToyPolicy& policy, const Matrix& images, const ScstConfig& cfg, const RewardFn& reward_fn);

/// Teacher-forced pretraining with plain gradient steps over all
/// (image, caption) pairs per epoch. Returns mean loss per epoch.
std::vector<double> xent_train(ToyPolicy& policy, const Matrix& images, std::span<const Tokens> captions,
                               double lr, std::size_t epochs);

// ---------------------------------------------------------------------------
// Grammar metrics.

struct GrammarConfig {
    std::set<std::string> stoplist;
    std::size_t max_n = 4;

    void validate() const;
};

std::set<std::string> load_stoplist(const std::filesystem::path& path);

/// Lowercased whitespace tokens with surrounding punctuation removed.
std::vector<std::string> tokenize_caption(const std::string& caption);

/// Mean over captions of (#n-grams - #distinct n-grams).
double rep_n(std::span<const std::vector<std::string>> captions, std::size_t n);

struct EndingReport {
    double percent = 0.0;
    std::size_t empty_captions = 0;  // counted as incorrect
};

/// Percentage of captions whose last word (trailing punctuation stripped,
/// lowercased) is in the stoplist.
EndingReport pct_incorrect_endings(std::span<const std::string> captions, const GrammarConfig& cfg);

}  // namespace pacmetric::scst
