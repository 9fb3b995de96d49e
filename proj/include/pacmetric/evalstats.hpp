#pragma once

// Agreement between metric scores and human judgments: Kendall tau-b and
// tau-c, Spearman rho, pairwise-preference accuracy and hallucination (FOIL)
// accuracy.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pacmetric::evalstats {

/// Correlation is undefined for the input (constant list, no pairs, ...).
class UndefinedCorrelation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Pair counts behind Kendall's statistics, computed in O(n log n).
struct KendallCounts {
    std::int64_t n = 0;
    std::int64_t pairs = 0;       // n0 = n(n-1)/2
    std::int64_t ties_x = 0;      // n1
    std::int64_t ties_y = 0;      // n2
    std::int64_t ties_xy = 0;     // pairs tied in both
    std::int64_t concordant_minus_discordant = 0;
    std::size_t distinct_x = 0;
    std::size_t distinct_y = 0;
};

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y);

/// (n_c - n_d) / sqrt((n0 - n1)(n0 - n2)).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Stuart's tau-c: 2m(n_c - n_d) / (n^2 (m - 1)), m = min(#distinct x, #distinct y).
double kendall_tau_c(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks.
double spearman_rho(std::span<const double> x, std::span<const double> y);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);

// ---------------------------------------------------------------------------

enum class Aggregation { raw, mean_proportion_yes };

struct Judgment {
    std::string item_id;
    double human_score = 0.0;
    std::optional<double> metric_score;  // precomputed metric value, if any
};

struct JudgmentSet {
    std::string dataset;
    Aggregation aggregation = Aggregation::raw;
    std::vector<Judgment> items;
};

struct CorrelationSummary {
    double tau_b = 0.0;
    double tau_c = 0.0;
    double rho = 0.0;
    std::size_t n = 0;
};

/// Correlates `metric` (one value per judgment, same order) with the human
/// scores.
CorrelationSummary correlate(const JudgmentSet& set, std::span<const double> metric);

// ---------------------------------------------------------------------------

/// Maps (image id, caption id, reference caption ids) to a score.
struct Scorer {
    std::function<double(const std::string&, const std::string&, std::span<const std::string>)> fn;
    bool reference_based = false;
};

struct PairJudgment {
    std::string image_id;
    std::string caption_a;
    std::string caption_b;
    std::size_t votes_a = 0;
    std::size_t votes_b = 0;
    std::string category;  // HC, HI, HM or MM
};

struct PairwiseSet {
    std::string dataset;
    std::vector<PairJudgment> pairs;
    std::unordered_map<std::string, std::vector<std::string>> ref_pool;  // image id -> caption ids
};

struct PairwiseResult {
    std::map<std::string, double> per_category;
    double mean = 0.0;  // mean of the per-category accuracies
    std::size_t draws = 0;
    std::uint64_t seed = 0;
};

/// For every draw: resolve human-vote ties with the seeded RNG, sample
/// `refs_per_draw` references per image from its pool, and count a pair as
/// correct when the scorer gives the human-preferred caption a strictly
/// higher score. Accuracies are averaged over draws.
PairwiseResult pairwise_accuracy(const PairwiseSet& set, const Scorer& scorer, std::uint64_t seed,
                                 std::size_t draws = 5, std::size_t refs_per_draw = 5);

struct FoilPair {
    std::string image_id;
    std::string correct;
    std::string foil;
    std::vector<std::string> refs;
};

struct FoilSet {
    std::string dataset;
    std::vector<FoilPair> pairs;
};

/// Fraction of pairs with score(correct) > score(foil). Ties are failures.
double foil_accuracy(const FoilSet& set, const Scorer& scorer);

// ---------------------------------------------------------------------------
// JSON-lines fixtures, one judgment / pair per line.
//   judgments: {"item_id", "human_score" | "annotations": [0/1...], "metric_score"?}
//   pairwise:  {"image_id", "caption_a", "caption_b", "votes_a", "votes_b", "category", "ref_pool": [...]}
//   foil:      {"image_id", "correct", "foil", "refs": [...]}

JudgmentSet load_judgments(const std::filesystem::path& path, Aggregation aggregation);
PairwiseSet load_pairwise(const std::filesystem::path& path);
FoilSet load_foil(const std::filesystem::path& path);

}  // namespace pacmetric::evalstats
