// Command-line front end. Every subcommand validates its inputs, runs the
// library operations, then commits all outputs at once; nothing is written
// when any step fails.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pacmetric/evalstats.hpp"
#include "pacmetric/manifest.hpp"
#include "pacmetric/paclearn.hpp"
#include "pacmetric/pipeline.hpp"
#include "pacmetric/scoring.hpp"
#include "pacmetric/scst.hpp"
#include "pacmetric/scst_demo.hpp"

#ifndef PACMETRIC_DEFAULT_STOPLIST
#define PACMETRIC_DEFAULT_STOPLIST "stoplist.txt"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace pacmetric;

namespace {

// Input problems found before any work starts.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : std::runtime_error(problems.empty() ? "invalid configuration" : problems.front()),
          problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

class Checks {
public:
    void require(bool ok, const std::string& message) {
        if (!ok) problems_.push_back(message);
    }
    void file(const std::string& flag, const std::string& path) {
        if (path.empty())
            problems_.push_back(flag + " is required");
        else if (!fs::is_regular_file(path))
            problems_.push_back(flag + ": no such file '" + path + "'");
    }
    void dir(const std::string& flag, const std::string& path) {
        if (!path.empty() && !fs::is_directory(path)) problems_.push_back(flag + ": no such directory '" + path + "'");
    }
    void out(const std::string& path) {
        if (path.empty())
            problems_.push_back("--out is required");
        else if (fs::exists(path) && !fs::is_directory(path))
            problems_.push_back("--out: '" + path + "' exists and is not a directory");
    }
    void attempt(const std::function<void()>& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            problems_.emplace_back(e.what());
        }
    }
    void raise() const {
        if (!problems_.empty()) throw ValidationError(problems_);
    }

private:
    std::vector<std::string> problems_;
};

// Output files held in memory until every computation has succeeded.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    void text(const std::string& name, std::string content) {
        files_.push_back({name, [content = std::move(content)](const fs::path& p) {
                              pipeline::write_file_atomic(p, content);
                          }});
    }
    void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
    void writer(const std::string& name, std::function<void(const fs::path&)> fn) {
        files_.push_back({name, std::move(fn)});
    }

    void commit() const {
        fs::create_directories(dir_);
        std::vector<std::pair<fs::path, fs::path>> staged;
        try {
            for (const auto& [name, write] : files_) {
                const fs::path tmp = dir_ / ("." + name + ".partial");
                write(tmp);
                staged.emplace_back(tmp, dir_ / name);
            }
        } catch (...) {
            std::error_code ec;
            for (const auto& [tmp, dst] : staged) fs::remove(tmp, ec);
            throw;
        }
        for (const auto& [tmp, dst] : staged) fs::rename(tmp, dst);
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::function<void(const fs::path&)>>> files_;
};

std::string aggregation_name(evalstats::Aggregation a) {
    return a == evalstats::Aggregation::raw ? "raw" : "mean_proportion_yes";
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------------------
// Shared scoring flags.

struct ScoringArgs {
    std::string manifest;
    std::string embeddings_dir;
    std::size_t refs = 0;
    std::optional<double> w;
    std::string backbone = "ViT-B/32";
    std::string idf_corpus = "refs";
    std::string adapters;

    void add(CLI::App* app, bool with_idf) {
        app->add_option("--manifest", manifest, "JSON manifest of embedding items");
        app->add_option("--embeddings-dir", embeddings_dir, "Directory holding the embedding files (default: manifest dir)");
        app->add_option("--refs", refs, "References per caption (0 = reference-free)");
        app->add_option("--w", w, "Score scale (overrides the backbone default)");
        app->add_option("--backbone", backbone, "Backbone tag: ViT-B/32 or ViT-L/14");
        if (with_idf) app->add_option("--idf-corpus", idf_corpus, "IDF corpus: refs, candidates or all");
        app->add_option("--adapters", adapters, "Directory with adapters.ckpt, image_base.pace, text_base.pace");
    }

    void check(Checks& c, bool manifest_required = true) const {
        if (manifest_required || !manifest.empty()) c.file("--manifest", manifest);
        c.dir("--embeddings-dir", embeddings_dir);
        c.attempt([&] { config().validate(); });
        c.attempt([&] { pipeline::idf_corpus_from_string(idf_corpus); });
        if (!adapters.empty()) {
            c.dir("--adapters", adapters);
            for (const char* f : {"adapters.ckpt", "image_base.pace", "text_base.pace"})
                if (fs::is_directory(adapters))
                    c.require(fs::is_regular_file(fs::path(adapters) / f), "--adapters: missing " + std::string(f));
        }
    }

    scoring::ScoreConfig config() const {
        scoring::ScoreConfig cfg = scoring::ScoreConfig::for_backbone(backbone);
        if (w) cfg.w = *w;
        return cfg;
    }

    fs::path embeddings_root() const {
        return embeddings_dir.empty() ? fs::path(manifest).parent_path() : fs::path(embeddings_dir);
    }

    json echo(bool with_idf) const {
        json j = {{"manifest", manifest}, {"embeddings_dir", embeddings_root().string()}, {"refs", refs},
                  {"w", config().w},      {"backbone", backbone}};
        if (with_idf) j["idf_corpus"] = idf_corpus;
        j["adapters"] = adapters.empty() ? json(nullptr) : json(adapters);
        return j;
    }
};

// Manifest, embeddings and optional heads, loaded once per run.
struct Loaded {
    Manifest manifest;
    std::unique_ptr<EmbeddingStore> store;
    std::optional<paclearn::DualHeads> heads;
    pipeline::ScoringOptions options;

    explicit Loaded(const ScoringArgs& a) {
        manifest = load_manifest(a.manifest);
        const fs::path root = a.embeddings_root();
        validate_row_ranges(manifest, root);
        store = std::make_unique<EmbeddingStore>(manifest, root);
        if (!a.adapters.empty()) {
            const fs::path dir(a.adapters);
            paclearn::DualHeads h{{load_embeddings(dir / "image_base.pace"), {}},
                                  {load_embeddings(dir / "text_base.pace"), {}}};
            paclearn::load_checkpoint(dir / "adapters.ckpt", h);
            heads = std::move(h);
        }
        options.score = a.config();
        options.refs = a.refs;
        options.idf_corpus = pipeline::idf_corpus_from_string(a.idf_corpus);
        options.heads = heads ? &*heads : nullptr;
        options.threads = pipeline::thread_count();
    }
};

// ---------------------------------------------------------------------------
// Commands. Each returns the staged outputs and fills `report`.

struct Score {
    ScoringArgs scoring;
    std::string out;
    bool video = false;

    void add(CLI::App* app) {
        scoring.add(app, video);
        app->add_option("--out", out, "Output directory");
    }
    void check(Checks& c) const {
        scoring.check(c);
        c.out(out);
    }
    json config() const {
        json j = scoring.echo(video);
        j["out"] = out;
        return j;
    }
    void run(json& report, Outputs& outputs) const {
        Loaded data(scoring);
        const auto records = video ? pipeline::score_videos(data.manifest, *data.store, data.options)
                                   : pipeline::score_images(data.manifest, *data.store, data.options);
        outputs.text("scores.jsonl", pipeline::to_jsonl(records));
        const auto table = pipeline::scores_table(records);
        if (!records.empty()) outputs.text("scores.csv", pipeline::to_csv(table));
        report["metric"] = records.empty() ? json(nullptr) : json(records.front().metric);
        report["count"] = records.size();
        report["threads"] = data.options.threads;
    }
};

struct EvalCorr {
    std::string judgments;
    std::string aggregation = "raw";
    std::string dataset;
    ScoringArgs scoring;
    std::uint64_t seed = 0;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--judgments", judgments, "Judgment JSON-lines fixture");
        app->add_option("--aggregation", aggregation, "Human score aggregation: raw or yes")
            ->check(CLI::IsMember({"raw", "yes"}));
        app->add_option("--dataset", dataset, "Dataset label (default: file stem)");
        scoring.add(app, false);
        app->add_option("--seed", seed, "Seed recorded with the results");
        app->add_option("--out", out, "Output directory");
    }
    void check(Checks& c) const {
        c.file("--judgments", judgments);
        scoring.check(c, false);
        c.out(out);
    }
    json config() const {
        json j = {{"judgments", judgments}, {"aggregation", aggregation}, {"dataset", dataset}};
        j["scoring"] = scoring.manifest.empty() ? json(nullptr) : scoring.echo(false);
        j["seed"] = seed;
        j["out"] = out;
        return j;
    }
    void run(json& report, Outputs& outputs) const {
        auto set = evalstats::load_judgments(
            judgments, aggregation == "raw" ? evalstats::Aggregation::raw : evalstats::Aggregation::mean_proportion_yes);
        if (!dataset.empty()) set.dataset = dataset;
        bool precomputed = true;
        for (const auto& j : set.items) precomputed = precomputed && j.metric_score.has_value();
        if (!precomputed && scoring.manifest.empty())
            throw ValidationError({"--manifest is required: some judgments carry no metric_score"});

        std::string metric = "metric_score";
        std::vector<pipeline::ScoreRecord> records;
        if (!precomputed) {
            Loaded data(scoring);
            records = pipeline::score_images(data.manifest, *data.store, data.options);
            if (!records.empty()) metric = records.front().metric;
        }
        const auto values = pipeline::metric_values(set, precomputed ? nullptr : &records);
        const auto summary = evalstats::correlate(set, values);
        const auto rows = pipeline::correlation_records(summary, metric, set.dataset, seed);

        pipeline::CsvTable table{{"metric", "dataset", "statistic", "value", "n", "seed"}, {}};
        json list = json::array();
        for (const auto& r : rows) {
            table.rows.push_back({r.metric, r.dataset, r.statistic, pipeline::format_number(r.value),
                                  std::to_string(r.n), std::to_string(r.seed)});
            list.push_back({{"metric", r.metric}, {"dataset", r.dataset}, {"statistic", r.statistic},
                            {"value", number(r.value)}, {"n", r.n}, {"seed", r.seed}});
        }
        outputs.text("correlations.csv", pipeline::to_csv(table));
        report["aggregation"] = aggregation_name(set.aggregation);
        report["metric"] = metric;
        report["tau_b"] = number(summary.tau_b);
        report["tau_c"] = number(summary.tau_c);
        report["rho"] = number(summary.rho);
        report["n"] = summary.n;
        report["records"] = list;
    }
};

struct EvalPairwise {
    std::string pairs;
    ScoringArgs scoring;
    std::size_t draws = 5;
    std::size_t refs_per_draw = 5;
    std::uint64_t seed = 0;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--pairs", pairs, "Pairwise judgment JSON-lines fixture");
        scoring.add(app, false);
        app->add_option("--draws", draws, "Reference draws to average over");
        app->add_option("--refs-per-draw", refs_per_draw, "References sampled per image per draw");
        app->add_option("--seed", seed, "Seed for tie breaking and reference sampling");
        app->add_option("--out", out, "Output directory");
    }
    void check(Checks& c) const {
        c.file("--pairs", pairs);
        scoring.check(c);
        c.require(draws > 0, "--draws must be positive");
        c.out(out);
    }
    json config() const {
        json j = scoring.echo(false);
        j["pairs"] = pairs;
        j["draws"] = draws;
        j["refs_per_draw"] = refs_per_draw;
        j["seed"] = seed;
        j["out"] = out;
        return j;
    }
    void run(json& report, Outputs& outputs) const {
        const auto set = evalstats::load_pairwise(pairs);
        Loaded data(scoring);
        const auto scorer = pipeline::make_image_scorer(data.manifest, *data.store, data.options);
        const auto result = evalstats::pairwise_accuracy(set, scorer, seed, draws, refs_per_draw);

        pipeline::CsvTable table{{"category", "accuracy"}, {}};
        json per = json::object();
        for (const auto& [cat, acc] : result.per_category) {
            table.rows.push_back({cat, pipeline::format_number(acc)});
            per[cat] = number(acc);
        }
        table.rows.push_back({"mean", pipeline::format_number(result.mean)});
        outputs.text("pairwise.csv", pipeline::to_csv(table));
        report["dataset"] = set.dataset;
        report["reference_based"] = scorer.reference_based;
        report["per_category"] = per;
        report["mean"] = number(result.mean);
        report["pairs"] = set.pairs.size();
    }
};

struct EvalFoil {
    std::string foil;
    ScoringArgs scoring;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--foil", foil, "FOIL pair JSON-lines fixture");
        scoring.add(app, false);
        app->add_option("--out", out, "Output directory");
    }
    void check(Checks& c) const {
        c.file("--foil", foil);
        scoring.check(c);
        c.out(out);
    }
    json config() const {
        json j = scoring.echo(false);
        j["foil"] = foil;
        j["out"] = out;
        return j;
    }
    void run(json& report, Outputs&) const {
        auto set = evalstats::load_foil(foil);
        for (auto& p : set.pairs) {
            if (scoring.refs > 0 && p.refs.size() < scoring.refs)
                throw std::invalid_argument("foil pair '" + p.image_id + "' has fewer than --refs references");
            p.refs.resize(std::min(p.refs.size(), scoring.refs));
        }
        Loaded data(scoring);
        const auto scorer = pipeline::make_image_scorer(data.manifest, *data.store, data.options);
        report["dataset"] = set.dataset;
        report["reference_based"] = scorer.reference_based;
        report["accuracy"] = number(evalstats::foil_accuracy(set, scorer));
        report["pairs"] = set.pairs.size();
    }
};

struct TrainPac {
    pipeline::TrainingSetup setup;
    std::string out;

    TrainPac() {
        setup.train.lr = 1e-3;
        setup.train.batch_size = 128;
        setup.train.max_iters = 2000;
    }

    void add(CLI::App* app) {
        auto& t = setup.train;
        app->add_option("--rank", t.rank, "Adapter rank (2, 4, 8 or 16)");
        app->add_option("--alpha", t.alpha, "Adapter scale numerator");
        app->add_option("--lambda-v", t.lambda_v, "Weight of the generated-image term");
        app->add_option("--lambda-t", t.lambda_t, "Weight of the generated-caption term");
        app->add_option("--tau", t.tau, "Contrastive temperature");
        app->add_option("--lr", t.lr, "AdamW learning rate");
        app->add_option("--weight-decay", t.weight_decay, "AdamW decoupled weight decay");
        app->add_option("--batch", t.batch_size, "Minibatch size");
        app->add_option("--max-iters", t.max_iters, "Iteration cap");
        app->add_option("--patience", t.patience_iters, "Iterations without a new validation minimum before stopping");
        app->add_option("--val-every", t.val_every, "Validation interval");
        app->add_option("--seed", t.seed, "Seed for data, initialization and batching");
        app->add_option("--clusters", setup.clusters.clusters, "Synthetic clusters");
        app->add_option("--dim", setup.clusters.dim, "Feature dimension");
        app->add_option("--out-dim", setup.out_dim, "Projection output dimension");
        app->add_option("--noise-real", setup.clusters.noise_real, "Noise on real features");
        app->add_option("--noise-gen", setup.clusters.noise_gen, "Noise on generated features");
        app->add_option("--n-train", setup.n_train, "Training tuples");
        app->add_option("--n-val", setup.n_val, "Validation tuples");
        app->add_option("--n-test", setup.n_test, "Test tuples for recall");
        app->add_option("--out", out, "Output directory");
    }
    void check(Checks& c) const {
        c.attempt([&] { setup.train.validate(); });
        c.require(setup.clusters.clusters > 0 && setup.clusters.dim > 0 && setup.out_dim > 0,
                  "--clusters, --dim and --out-dim must be positive");
        c.require(setup.n_train > 0 && setup.n_val > 0 && setup.n_test > 0, "--n-train, --n-val and --n-test must be positive");
        c.out(out);
    }
    json config() const {
        json j = json::parse(setup.train.to_json());
        j["clusters"] = setup.clusters.clusters;
        j["dim"] = setup.clusters.dim;
        j["out_dim"] = setup.out_dim;
        j["noise_real"] = setup.clusters.noise_real;
        j["noise_gen"] = setup.clusters.noise_gen;
        j["n_train"] = setup.n_train;
        j["n_val"] = setup.n_val;
        j["n_test"] = setup.n_test;
        j["out"] = out;
        return j;
    }
    void run(json& report, Outputs& outputs) const {
        auto run = std::make_shared<pipeline::TrainingRun>(pipeline::run_synthetic_training(setup));
        const auto& r = run->result;
        outputs.text("history.csv", pipeline::to_csv(pipeline::history_table(r.history)));
        const paclearn::CheckpointMeta meta{setup.train.seed, paclearn::config_hash(setup.train)};
        outputs.writer("adapters.ckpt", [run, meta](const fs::path& p) { paclearn::save_checkpoint(run->result.heads, meta, p); });
        outputs.writer("image_base.pace", [run](const fs::path& p) { save_embeddings(run->image_base, p); });
        outputs.writer("text_base.pace", [run](const fs::path& p) { save_embeddings(run->text_base, p); });
        report["recall_at_1_before"] = number(run->recall_at_1_before);
        report["recall_at_1_after"] = number(run->recall_at_1_after);
        report["best_iteration"] = r.best_iteration;
        report["best_val_loss"] = number(r.best_val_loss);
        report["iterations"] = r.iterations;
        report["early_stopped"] = r.early_stopped;
        report["config_hash"] = meta.config_hash;
    }
};

std::string join_words(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
}

json grammar_summary(const std::vector<std::vector<std::string>>& tokens, const std::vector<std::string>& captions,
                     const scst::GrammarConfig& cfg) {
    json rep = json::object();
    for (std::size_t n = 1; n <= cfg.max_n; ++n) rep[std::to_string(n)] = number(scst::rep_n(tokens, n));
    const auto endings = scst::pct_incorrect_endings(captions, cfg);
    return {{"captions", captions.size()},
            {"rep_n", rep},
            {"pct_incorrect_endings", number(endings.percent)},
            {"empty_captions", endings.empty_captions}};
}

struct ScstDemo {
    scst::DemoSpec spec;
    std::string stoplist = PACMETRIC_DEFAULT_STOPLIST;
    std::size_t max_n = 4;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--beam", spec.scst.beam_size, "Beam size (the beam set is also the baseline)");
        app->add_option("--lr", spec.scst.lr, "SCST learning rate");
        app->add_option("--steps", spec.scst.steps, "SCST steps");
        app->add_option("--images-per-step", spec.scst.images_per_step, "Images per SCST step");
        app->add_option("--xe-epochs", spec.xe_epochs, "Cross-entropy pretraining epochs");
        app->add_option("--xe-lr", spec.xe_lr, "Cross-entropy learning rate");
        app->add_option("--w", spec.score.w, "Reward scale");
        app->add_option("--seed", spec.seed, "Seed for the synthetic world and training");
        app->add_option("--stoplist", stoplist, "Ending stoplist, one word per line");
        app->add_option("--max-n", max_n, "Largest n for Rep-n");
        app->add_option("--out", out, "Output directory");
    }
    void check(Checks& c) const {
        c.attempt([&] { spec.scst.validate(); });
        c.attempt([&] { spec.score.validate(); });
        c.require(spec.xe_epochs > 0, "--xe-epochs must be positive");
        c.require(max_n > 0, "--max-n must be positive");
        c.file("--stoplist", stoplist);
        c.out(out);
    }
    json config() const {
        return {{"beam", spec.scst.beam_size}, {"lr", spec.scst.lr},         {"steps", spec.scst.steps},
                {"images_per_step", spec.scst.images_per_step}, {"xe_epochs", spec.xe_epochs},
                {"xe_lr", spec.xe_lr},         {"w", spec.score.w},           {"seed", spec.seed},
                {"stoplist", stoplist},        {"max_n", max_n},              {"out", out}};
    }
    void run(json& report, Outputs& outputs) const {
        const scst::GrammarConfig grammar{scst::load_stoplist(stoplist), max_n};
        grammar.validate();
        scst::DemoSpec s = spec;
        s.scst.seed = spec.seed;
        const auto demo = scst::run_scst_demo(s);

        std::string curve_jsonl;
        pipeline::CsvTable curve{{"step", "mean_reward"}, {}};
        for (std::size_t i = 0; i < demo.reward_curve.size(); ++i) {
            curve_jsonl += json{{"step", i}, {"mean_reward", number(demo.reward_curve[i])}}.dump() + "\n";
            curve.rows.push_back({std::to_string(i), pipeline::format_number(demo.reward_curve[i])});
        }
        outputs.text("reward_curve.jsonl", curve_jsonl);
        if (!curve.rows.empty()) outputs.text("reward_curve.csv", pipeline::to_csv(curve));

        std::string captions;
        json stages = json::object();
        for (const auto& [stage, toks] : {std::pair{"xe", &demo.captions_xe}, std::pair{"scst", &demo.captions_scst}}) {
            std::vector<std::string> texts;
            for (std::size_t i = 0; i < toks->size(); ++i) {
                texts.push_back(join_words((*toks)[i]));
                captions += json{{"image", i}, {"stage", stage}, {"caption", texts.back()}}.dump() + "\n";
            }
            stages[stage] = grammar_summary(*toks, texts, grammar);
        }
        outputs.text("captions.jsonl", captions);

        report["xe_heldout_reward"] = number(demo.xe_heldout_reward);
        report["scst_heldout_reward"] = number(demo.scst_heldout_reward);
        report["relative_gain"] = number((demo.scst_heldout_reward - demo.xe_heldout_reward) / demo.xe_heldout_reward);
        report["xe_final_loss"] = demo.xe_losses.empty() ? json(nullptr) : number(demo.xe_losses.back());
        report["grammar"] = stages;
    }
};

struct Grammar {
    std::string captions;
    std::string stoplist = PACMETRIC_DEFAULT_STOPLIST;
    std::size_t max_n = 4;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--captions", captions, "Captions: plain text (one per line) or JSON-lines with a caption field");
        app->add_option("--stoplist", stoplist, "Ending stoplist, one word per line");
        app->add_option("--max-n", max_n, "Largest n for Rep-n");
        app->add_option("--out", out, "Output directory");
    }
    void check(Checks& c) const {
        c.file("--captions", captions);
        c.file("--stoplist", stoplist);
        c.require(max_n > 0, "--max-n must be positive");
        c.out(out);
    }
    json config() const {
        return {{"captions", captions}, {"stoplist", stoplist}, {"max_n", max_n}, {"out", out}};
    }
    void run(json& report, Outputs&) const {
        const scst::GrammarConfig grammar{scst::load_stoplist(stoplist), max_n};
        grammar.validate();
        const bool jsonl = fs::path(captions).extension() == ".jsonl";
        std::ifstream in(captions);
        if (!in) throw std::runtime_error("cannot open " + captions);
        std::vector<std::string> texts;
        std::string line;
        for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!jsonl) {
                texts.push_back(line);
                continue;
            }
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            try {
                texts.push_back(json::parse(line).at("caption").get<std::string>());
            } catch (const json::exception& e) {
                throw std::runtime_error(captions + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        std::vector<std::vector<std::string>> tokens;
        for (const auto& t : texts) tokens.push_back(scst::tokenize_caption(t));
        report["grammar"] = grammar_summary(tokens, texts, grammar);
    }
};

// ---------------------------------------------------------------------------

void print_error(const std::string& command, const std::string& kind, const std::vector<std::string>& messages) {
    const json record = {{"status", "error"}, {"command", command.empty() ? json(nullptr) : json(command)},
                         {"kind", kind},      {"errors", messages}};
    std::cerr << record.dump() << "\n";
}

template <class Cmd>
int execute(const std::string& name, const Cmd& cmd, const std::string& config_file) {
    Checks checks;
    cmd.check(checks);
    checks.raise();

    json report = {{"status", "ok"}, {"command", name}};
    report["config"] = cmd.config();
    report["config_file"] = config_file.empty() ? json(nullptr) : json(config_file);
    Outputs outputs{fs::path(cmd.out)};
    cmd.run(report, outputs);
    outputs.json_file("report.json", report);
    outputs.commit();
    std::cout << report.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Captioning metric engine: scoring, evaluation, adapter training and SCST"};
    app.require_subcommand(1);
    std::string config_file;
    app.set_config("--config", "", "TOML or INI file; sections name subcommands, flags take precedence");

    Score image, video;
    video.video = true;
    EvalCorr corr;
    EvalPairwise pairwise;
    EvalFoil foil;
    TrainPac train;
    ScstDemo demo;
    Grammar grammar;

    std::map<std::string, std::function<int()>> runners;
    auto sub = [&](const std::string& name, const std::string& help, auto& cmd) {
        cmd.add(app.add_subcommand(name, help));
        runners[name] = [&cmd, &config_file, name] { return execute(name, cmd, config_file); };
    };
    sub("score-image", "Score captions against images", image);
    sub("score-video", "Score captions against frame sequences", video);
    sub("eval-corr", "Correlate metric scores with human judgments", corr);
    sub("eval-pairwise", "Pairwise preference accuracy", pairwise);
    sub("eval-foil", "Correct-versus-foil caption accuracy", foil);
    sub("train-pac", "Train projection adapters on synthetic clusters", train);
    sub("scst-demo", "Cross-entropy then SCST training of a toy captioner", demo);
    sub("grammar", "Rep-n and incorrect-ending statistics for captions", grammar);

    std::string command;
    try {
        app.parse(argc, argv);
        command = app.get_subcommands().front()->get_name();
        if (auto* opt = app.get_option_no_throw("--config"); opt && opt->count() > 0) config_file = opt->as<std::string>();
        return runners.at(command)();
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error(command, "usage", {e.what()});
        return 2;
    } catch (const ValidationError& e) {
        print_error(command, "validation", e.problems());
        return 2;
    } catch (const FormatError& e) {
        print_error(command, "format", {e.what()});
        return 1;
    } catch (const std::exception& e) {
        print_error(command, "runtime", {e.what()});
        return 1;
    }
}
