#pragma once

// Composition layer used by the command-line tool: manifest-driven scoring,
// correlation reports, synthetic training runs and CSV/JSONL output.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pacmetric/evalstats.hpp"
#include "pacmetric/manifest.hpp"
#include "pacmetric/paclearn.hpp"
#include "pacmetric/scoring.hpp"

namespace pacmetric::pipeline {

// ---------------------------------------------------------------------------
// Deterministic fan-out.

/// Worker cap from PACMETRIC_THREADS (unset: hardware concurrency; 1 runs
/// everything on the calling thread). Invalid values throw.
std::size_t thread_count();

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Results come
/// back in index order; the exception of the lowest failing index is
/// rethrown.
template <class T>
std::vector<T> parallel_map(std::size_t n, std::size_t threads, const std::function<T(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Scores.

struct ScoreRecord {
    std::string id;
    std::string metric;
    double score = 0.0;
    std::vector<std::string> flags;
};

enum class IdfCorpus { refs, candidates, all };
IdfCorpus idf_corpus_from_string(const std::string& s);
std::string to_string(IdfCorpus c);

struct ScoringOptions {
    scoring::ScoreConfig score{};
    std::size_t refs = 0;  // 0: reference-free; N: use up to N references per caption
    IdfCorpus idf_corpus = IdfCorpus::refs;
    const paclearn::DualHeads* heads = nullptr;  // optional learned projections
    std::size_t threads = 1;
};

/// Scores every caption whose target is an image item.
std::vector<ScoreRecord> score_images(const Manifest& manifest, const EmbeddingStore& store,
                                      const ScoringOptions& opt);

/// Scores every caption whose target is a frame sequence.
std::vector<ScoreRecord> score_videos(const Manifest& manifest, const EmbeddingStore& store,
                                      const ScoringOptions& opt);

/// Caption-id keyed scorer over a manifest for the pairwise / FOIL drivers.
/// Reference-based when opt.refs > 0.
evalstats::Scorer make_image_scorer(const Manifest& manifest, const EmbeddingStore& store,
                                    const ScoringOptions& opt);

std::string to_jsonl(const std::vector<ScoreRecord>& records);

// ---------------------------------------------------------------------------
// Correlation reports.

struct CorrelationRecord {
    std::string metric;
    std::string dataset;
    std::string statistic;  // tau_b, tau_c or rho
    double value = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

std::vector<CorrelationRecord> correlation_records(const evalstats::CorrelationSummary& s,
                                                   const std::string& metric, const std::string& dataset,
                                                   std::uint64_t seed);

/// Metric values for a judgment set: the judgment's own metric_score if
/// present, otherwise the score of the caption with that id in `scores`.
std::vector<double> metric_values(const evalstats::JudgmentSet& set, const std::vector<ScoreRecord>* scores);

// ---------------------------------------------------------------------------
// Synthetic adapter training.

struct TrainingSetup {
    paclearn::ClusterSpec clusters{};
    std::size_t out_dim = 16;
    std::size_t n_train = 2048;
    std::size_t n_val = 256;
    std::size_t n_test = 256;
    paclearn::TrainConfig train{};
};

struct TrainingRun {
    Matrix image_base;
    Matrix text_base;
    paclearn::TrainResult result;
    double recall_at_1_before = 0.0;
    double recall_at_1_after = 0.0;
};

TrainingRun run_synthetic_training(const TrainingSetup& setup);

// ---------------------------------------------------------------------------
// Output.

/// Plot-ready table. Empty optional cells are written as empty fields.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<std::string>>> rows;
};

/// Shortest decimal text that round-trips the double; NaN becomes nullopt.
std::optional<std::string> format_number(double x);

CsvTable history_table(const std::vector<paclearn::HistoryRow>& history);
CsvTable scores_table(const std::vector<ScoreRecord>& records);

/// Writes the table atomically. Throws std::invalid_argument on an empty
/// series.
void emit_plot_data(const CsvTable& table, const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);

/// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace pacmetric::pipeline

#include "pacmetric/detail/parallel.hpp"
