#include "pacmetric/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unistd.h>
#include <unordered_map>

#include "json.hpp"
#include "pacmetric/random.hpp"

namespace pacmetric::pipeline {

using nlohmann::json;

std::size_t thread_count() {
    const char* env = std::getenv("PACMETRIC_THREADS");
    if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
    std::size_t n = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec != std::errc{} || ptr != end || n == 0)
        throw std::invalid_argument(std::string("PACMETRIC_THREADS must be a positive integer, got '") + env + "'");
    return n;
}

IdfCorpus idf_corpus_from_string(const std::string& s) {
    if (s == "refs") return IdfCorpus::refs;
    if (s == "candidates") return IdfCorpus::candidates;
    if (s == "all") return IdfCorpus::all;
    throw std::invalid_argument("unknown IDF corpus '" + s + "' (expected refs, candidates or all)");
}

std::string to_string(IdfCorpus c) {
    switch (c) {
        case IdfCorpus::refs: return "refs";
        case IdfCorpus::candidates: return "candidates";
        case IdfCorpus::all: return "all";
    }
    return "refs";
}

namespace {

/// Rows as seen by the scorer: projected through the head when one is
/// given, then row-normalized.
Matrix embed(const Matrix& rows, const paclearn::ProjectionHead* head) {
    if (head == nullptr) return l2_normalize(rows);
    return l2_normalize(paclearn::project(*head, rows));
}

Vector global_row(const Matrix& rows) {
    auto last = rows.row(rows.rows() - 1);
    return Vector(last.begin(), last.end());
}

const ItemRecord& target_of(const Manifest& m, const ItemRecord& caption) {
    if (!caption.target) throw std::invalid_argument("caption '" + caption.id + "' has no target");
    return m.at(*caption.target);
}

std::vector<const ItemRecord*> captions_targeting(const Manifest& m, ItemKind kind) {
    std::vector<const ItemRecord*> out;
    for (const auto& item : m.items)
        if (item.kind == ItemKind::caption && item.target && m.at(*item.target).kind == kind) out.push_back(&item);
    return out;
}

std::vector<std::string> chosen_refs(const ItemRecord& caption, std::size_t n, std::vector<std::string>& flags) {
    if (n == 0) return {};
    if (!caption.refs || caption.refs->empty())
        throw std::invalid_argument("caption '" + caption.id + "' has no references but --refs " +
                                    std::to_string(n) + " was requested");
    std::vector<std::string> refs = *caption.refs;
    if (refs.size() < n) flags.push_back("refs_truncated");
    if (refs.size() > n) refs.resize(n);
    return refs;
}

const paclearn::ProjectionHead* image_head(const ScoringOptions& opt) { return opt.heads ? &opt.heads->image : nullptr; }
const paclearn::ProjectionHead* text_head(const ScoringOptions& opt) { return opt.heads ? &opt.heads->text : nullptr; }

scoring::TokenizedCaption tokenized(const EmbeddingStore& store, const ItemRecord& caption, const ScoringOptions& opt) {
    if (!caption.tokens)
        throw std::invalid_argument("caption '" + caption.id + "' has no tokens; video scoring needs per-token rows");
    return scoring::TokenizedCaption(embed(store.rows_of(caption), text_head(opt)), *caption.tokens);
}

}  // namespace

std::vector<ScoreRecord> score_images(const Manifest& manifest, const EmbeddingStore& store,
                                      const ScoringOptions& opt) {
    opt.score.validate();
    const auto captions = captions_targeting(manifest, ItemKind::image);
    const std::string metric = opt.refs > 0 ? "ref_pac_s" : "pac_s";
    return parallel_map<ScoreRecord>(captions.size(), opt.threads, [&](std::size_t i) {
        const ItemRecord& cap = *captions[i];
        ScoreRecord rec{cap.id, metric, 0.0, {}};
        const Matrix image = embed(store.rows_of(target_of(manifest, cap)), image_head(opt));
        if (image.rows() != 1)
            throw std::invalid_argument("image '" + *cap.target + "' must have exactly one row");
        const Vector text = global_row(embed(store.rows_of(cap), text_head(opt)));
        const auto ref_ids = chosen_refs(cap, opt.refs, rec.flags);
        if (ref_ids.empty()) {
            rec.score = scoring::pac_score(image.row(0), text, opt.score);
        } else {
            Matrix refs(ref_ids.size(), text.size());
            for (std::size_t r = 0; r < ref_ids.size(); ++r) {
                const Vector g = global_row(embed(store.rows_of(ref_ids[r]), text_head(opt)));
                std::copy(g.begin(), g.end(), refs.row(r).begin());
            }
            rec.score = scoring::ref_pac_score(image.row(0), text, refs, opt.score);
        }
        return rec;
    });
}

std::vector<ScoreRecord> score_videos(const Manifest& manifest, const EmbeddingStore& store,
                                      const ScoringOptions& opt) {
    const auto captions = captions_targeting(manifest, ItemKind::frame_sequence);

    std::vector<std::vector<std::string>> docs;
    const auto add_doc = [&](const ItemRecord& item) {
        if (!item.tokens) throw std::invalid_argument("caption '" + item.id + "' has no tokens");
        docs.push_back(*item.tokens);
    };
    switch (opt.idf_corpus) {
        case IdfCorpus::refs: {
            std::vector<std::string> seen;
            for (const auto* c : captions)
                for (const auto& r : c->refs.value_or(std::vector<std::string>{}))
                    if (std::find(seen.begin(), seen.end(), r) == seen.end()) seen.push_back(r);
            for (const auto& r : seen) add_doc(manifest.at(r));
            if (!seen.empty()) break;
            [[fallthrough]];  // no references anywhere: use the candidates
        }
        case IdfCorpus::candidates:
            for (const auto* c : captions) add_doc(*c);
            break;
        case IdfCorpus::all:
            for (const auto& item : manifest.items)
                if (item.kind == ItemKind::caption) add_doc(item);
            break;
    }
    const scoring::IdfTable idf = scoring::build_idf(docs);

    const std::string metric = opt.refs > 0 ? "ref_pac_s_video" : "pac_s_video";
    return parallel_map<ScoreRecord>(captions.size(), opt.threads, [&](std::size_t i) {
        const ItemRecord& cap = *captions[i];
        ScoreRecord rec{cap.id, metric, 0.0, {}};
        const scoring::VideoEmbedding video(embed(store.rows_of(target_of(manifest, cap)), image_head(opt)));
        const auto candidate = tokenized(store, cap, opt);
        const auto ref_ids = chosen_refs(cap, opt.refs, rec.flags);
        bool fallback = false;
        if (ref_ids.empty()) {
            const auto s = scoring::video_score(video, candidate, idf);
            fallback = s.fine.uniform_idf_fallback;
            rec.score = s.value;
        } else {
            std::vector<scoring::TokenizedCaption> refs;
            for (const auto& id : ref_ids) refs.push_back(tokenized(store, manifest.at(id), opt));
            const auto s = scoring::ref_video_score(video, candidate, refs, idf);
            fallback = s.video.fine.uniform_idf_fallback;
            rec.score = s.value;
        }
        if (fallback) rec.flags.push_back("uniform_idf_fallback");
        return rec;
    });
}

evalstats::Scorer make_image_scorer(const Manifest& manifest, const EmbeddingStore& store,
                                    const ScoringOptions& opt) {
    opt.score.validate();
    evalstats::Scorer scorer;
    scorer.reference_based = opt.refs > 0;
    scorer.fn = [&manifest, &store, opt](const std::string& image_id, const std::string& caption_id,
                                         std::span<const std::string> ref_ids) {
        const Matrix image = embed(store.rows_of(manifest.at(image_id)), image_head(opt));
        const Vector text = global_row(embed(store.rows_of(caption_id), text_head(opt)));
        if (opt.refs == 0 || ref_ids.empty()) return scoring::pac_score(image.row(0), text, opt.score);
        Matrix refs(ref_ids.size(), text.size());
        for (std::size_t r = 0; r < ref_ids.size(); ++r) {
            const Vector g = global_row(embed(store.rows_of(ref_ids[r]), text_head(opt)));
            std::copy(g.begin(), g.end(), refs.row(r).begin());
        }
        return scoring::ref_pac_score(image.row(0), text, refs, opt.score);
    };
    return scorer;
}

namespace {

nlohmann::ordered_json number_or_null(double x) {
    return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string to_jsonl(const std::vector<ScoreRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j = {
            {"id", r.id}, {"metric", r.metric}, {"score", number_or_null(r.score)}, {"flags", r.flags}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<CorrelationRecord> correlation_records(const evalstats::CorrelationSummary& s,
                                                   const std::string& metric, const std::string& dataset,
                                                   std::uint64_t seed) {
    return {{metric, dataset, "tau_b", s.tau_b, s.n, seed},
            {metric, dataset, "tau_c", s.tau_c, s.n, seed},
            {metric, dataset, "rho", s.rho, s.n, seed}};
}

std::vector<double> metric_values(const evalstats::JudgmentSet& set, const std::vector<ScoreRecord>* scores) {
    std::unordered_map<std::string, double> by_id;
    if (scores)
        for (const auto& r : *scores) by_id.emplace(r.id, r.score);
    std::vector<double> out;
    out.reserve(set.items.size());
    for (const auto& j : set.items) {
        if (j.metric_score) {
            out.push_back(*j.metric_score);
            continue;
        }
        auto it = by_id.find(j.item_id);
        if (it == by_id.end())
            throw std::invalid_argument("judgment '" + j.item_id + "' has no metric_score and no scored caption");
        out.push_back(it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

Matrix random_projection(std::size_t d_in, std::size_t d_out, Rng& rng) {
    Matrix m(d_in, d_out);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (auto& x : m.flat()) x = sigma * standard_normal(rng);
    return m;
}

double recall(const paclearn::DualHeads& heads, const paclearn::TupleBatch& test,
              std::span<const std::size_t> labels) {
    return paclearn::image_to_text_recall_at_1(paclearn::project(heads.image, test.v),
                                               paclearn::project(heads.text, test.t), labels);
}

}  // namespace

TrainingRun run_synthetic_training(const TrainingSetup& setup) {
    setup.train.validate();
    if (setup.out_dim == 0) throw std::invalid_argument("training: output dim must be >= 1");
    if (setup.n_train == 0 || setup.n_val == 0 || setup.n_test == 0)
        throw std::invalid_argument("training: train, validation and test sizes must be >= 1");

    Rng rng(setup.train.seed);
    const auto world = paclearn::ClusterWorld::make(setup.clusters, rng);
    const auto train = world.sample(setup.n_train, rng);
    const auto val = world.sample(setup.n_val, rng);
    const auto test = world.sample(setup.n_test, rng);
    const auto labels = world.labels(setup.n_test);

    TrainingRun run;
    run.image_base = random_projection(setup.clusters.dim, setup.out_dim, rng);
    run.text_base = random_projection(setup.clusters.dim, setup.out_dim, rng);
    const auto heads = paclearn::init_heads(run.image_base, run.text_base, setup.train);
    run.recall_at_1_before = recall(heads, test, labels);
    run.result = paclearn::train_adapters(train, val, heads, setup.train);
    run.recall_at_1_after = recall(run.result.heads, test, labels);
    return run;
}

// ---------------------------------------------------------------------------

std::optional<std::string> format_number(double x) {
    if (std::isnan(x)) return std::nullopt;
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, ptr);
}

CsvTable history_table(const std::vector<paclearn::HistoryRow>& history) {
    CsvTable t{{"iteration", "train_loss", "val_loss"}, {}};
    for (const auto& h : history)
        t.rows.push_back({std::to_string(h.iteration), format_number(h.train_loss),
                          h.val_loss ? format_number(*h.val_loss) : std::nullopt});
    return t;
}

CsvTable scores_table(const std::vector<ScoreRecord>& records) {
    CsvTable t{{"id", "metric", "score", "flags"}, {}};
    for (const auto& r : records) {
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        t.rows.push_back({r.id, r.metric, format_number(r.score), flags});
    }
    return t;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

std::string to_csv(const CsvTable& table) {
    if (table.columns.empty()) throw std::invalid_argument("csv: no columns");
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + csv_field(table.columns[i]);
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::invalid_argument("csv: row has " + std::to_string(row.size()) + " cells, expected " +
                                        std::to_string(table.columns.size()));
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            if (row[i]) out += csv_field(*row[i]);
        }
        out += '\n';
    }
    return out;
}

void emit_plot_data(const CsvTable& table, const std::filesystem::path& path) {
    if (table.rows.empty()) throw std::invalid_argument("emit_plot_data: empty series");
    write_file_atomic(path, to_csv(table));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace pacmetric::pipeline
