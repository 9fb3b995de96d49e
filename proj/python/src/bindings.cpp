// Python bindings: embeddings as float64 numpy arrays, results as plain
// Python values.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pacmetric/embedkit.hpp"
#include "pacmetric/evalstats.hpp"
#include "pacmetric/manifest.hpp"
#include "pacmetric/paclearn.hpp"
#include "pacmetric/pipeline.hpp"
#include "pacmetric/scoring.hpp"
#include "pacmetric/scst.hpp"
#include "pacmetric/scst_demo.hpp"

namespace py = pybind11;
using namespace pacmetric;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
    return {a.data(), a.data() + a.shape(0)};
}

Array to_array(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.flat().begin(), m.flat().end(), out.mutable_data());
    return out;
}

scoring::ScoreConfig score_config(const std::string& backbone, std::optional<double> w) {
    auto cfg = scoring::ScoreConfig::for_backbone(backbone);
    if (w) cfg.w = *w;
    cfg.validate();
    return cfg;
}

py::list records(const std::vector<pipeline::ScoreRecord>& recs) {
    py::list out;
    for (const auto& r : recs)
        out.append(py::dict(py::arg("id") = r.id, py::arg("metric") = r.metric, py::arg("score") = r.score,
                            py::arg("flags") = r.flags));
    return out;
}

std::vector<pipeline::ScoreRecord> score_manifest(const std::filesystem::path& manifest_path,
                                                  std::optional<std::filesystem::path> embeddings_dir,
                                                  std::size_t refs, std::optional<double> w,
                                                  const std::string& backbone, const std::string& idf_corpus,
                                                  bool video) {
    const Manifest m = load_manifest(manifest_path);
    const auto dir = embeddings_dir ? *embeddings_dir : manifest_path.parent_path();
    validate_row_ranges(m, dir);
    const EmbeddingStore store(m, dir);
    pipeline::ScoringOptions opt;
    opt.score = score_config(backbone, w);
    opt.refs = refs;
    opt.idf_corpus = pipeline::idf_corpus_from_string(idf_corpus);
    opt.threads = pipeline::thread_count();
    py::gil_scoped_release release;
    return video ? pipeline::score_videos(m, store, opt) : pipeline::score_images(m, store, opt);
}

}  // namespace

PYBIND11_MODULE(_pacmetric, m) {
    m.doc() = "Captioning metric engine: embedding files, scores, correlations, adapters and SCST";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    // embeddings
    m.def("load_embeddings", [](const std::filesystem::path& p) { return to_array(load_embeddings(p)); },
          py::arg("path"), "Reads an embedding file into an (N, D) float64 array.");
    m.def("save_embeddings", [](const Array& a, const std::filesystem::path& p) { save_embeddings(to_matrix(a), p); },
          py::arg("array"), py::arg("path"), "Writes an (N, D) array as float32.");
    m.def("l2_normalize", [](const Array& a) { return to_array(l2_normalize(to_matrix(a))); }, py::arg("array"));

    // scores
    m.def("harmonic_mean", &scoring::harmonic_mean, py::arg("x"), py::arg("y"));
    m.def(
        "pac_score",
        [](const Array& image, const Array& caption, std::optional<double> w, const std::string& backbone) {
            return scoring::pac_score(to_vector(image), to_vector(caption), score_config(backbone, w));
        },
        py::arg("image"), py::arg("caption"), py::arg("w") = py::none(), py::arg("backbone") = "ViT-B/32",
        "w * max(cos(image, caption), 0).");
    m.def(
        "ref_pac_score",
        [](const Array& image, const Array& caption, const Array& refs, std::optional<double> w,
           const std::string& backbone) {
            return scoring::ref_pac_score(to_vector(image), to_vector(caption), to_matrix(refs),
                                          score_config(backbone, w));
        },
        py::arg("image"), py::arg("caption"), py::arg("refs"), py::arg("w") = py::none(),
        py::arg("backbone") = "ViT-B/32", "Harmonic mean of the image score and the best reference cosine.");
    m.def(
        "video_score",
        [](const Array& frames, const Array& token_embeddings, const std::vector<std::string>& tokens,
           const std::vector<std::vector<std::string>>& idf_corpus) {
            const scoring::VideoEmbedding video(l2_normalize(to_matrix(frames)));
            const scoring::TokenizedCaption caption(l2_normalize(to_matrix(token_embeddings)), tokens);
            const auto s = scoring::video_score(video, caption, scoring::build_idf(idf_corpus));
            return py::dict(py::arg("coarse") = s.coarse, py::arg("precision") = s.fine.precision,
                            py::arg("recall") = s.fine.recall, py::arg("f1") = s.fine.f1, py::arg("value") = s.value,
                            py::arg("uniform_idf_fallback") = s.fine.uniform_idf_fallback);
        },
        py::arg("frames"), py::arg("token_embeddings"), py::arg("tokens"), py::arg("idf_corpus"),
        "Coarse, fine-grained and combined video score; rows are normalized first.");
    m.def(
        "score_images",
        [](const std::filesystem::path& manifest, std::optional<std::filesystem::path> embeddings_dir,
           std::size_t refs, std::optional<double> w, const std::string& backbone) {
            return records(score_manifest(manifest, embeddings_dir, refs, w, backbone, "refs", false));
        },
        py::arg("manifest"), py::arg("embeddings_dir") = py::none(), py::arg("refs") = 0, py::arg("w") = py::none(),
        py::arg("backbone") = "ViT-B/32");
    m.def(
        "score_videos",
        [](const std::filesystem::path& manifest, std::optional<std::filesystem::path> embeddings_dir,
           std::size_t refs, std::optional<double> w, const std::string& backbone, const std::string& idf_corpus) {
            return records(score_manifest(manifest, embeddings_dir, refs, w, backbone, idf_corpus, true));
        },
        py::arg("manifest"), py::arg("embeddings_dir") = py::none(), py::arg("refs") = 0, py::arg("w") = py::none(),
        py::arg("backbone") = "ViT-B/32", py::arg("idf_corpus") = "refs");

    // correlations
    m.def("kendall_tau_b", [](const std::vector<double>& x, const std::vector<double>& y) { return evalstats::kendall_tau_b(x, y); },
          py::arg("x"), py::arg("y"));
    m.def("kendall_tau_c", [](const std::vector<double>& x, const std::vector<double>& y) { return evalstats::kendall_tau_c(x, y); },
          py::arg("x"), py::arg("y"));
    m.def("spearman_rho", [](const std::vector<double>& x, const std::vector<double>& y) { return evalstats::spearman_rho(x, y); },
          py::arg("x"), py::arg("y"));

    // contrastive training
    m.def(
        "info_nce", [](const Array& v, const Array& t, double tau) { return paclearn::info_nce(to_matrix(v), to_matrix(t), tau); },
        py::arg("images"), py::arg("captions"), py::arg("tau"), "Symmetric InfoNCE on unit-norm rows.");
    m.def(
        "train_synthetic",
        [](std::size_t rank, double lambda_v, double lambda_t, double tau, double lr, std::size_t batch,
           std::size_t max_iters, std::uint64_t seed) {
            pipeline::TrainingSetup setup;
            setup.train.rank = rank;
            setup.train.lambda_v = lambda_v;
            setup.train.lambda_t = lambda_t;
            setup.train.tau = tau;
            setup.train.lr = lr;
            setup.train.batch_size = batch;
            setup.train.max_iters = max_iters;
            setup.train.seed = seed;
            pipeline::TrainingRun run;
            {
                py::gil_scoped_release release;
                run = pipeline::run_synthetic_training(setup);
            }
            py::list history;
            for (const auto& h : run.result.history)
                history.append(py::make_tuple(h.iteration, h.train_loss, h.val_loss));
            return py::dict(py::arg("recall_at_1_before") = run.recall_at_1_before,
                            py::arg("recall_at_1_after") = run.recall_at_1_after,
                            py::arg("best_iteration") = run.result.best_iteration,
                            py::arg("iterations") = run.result.iterations, py::arg("history") = history);
        },
        py::arg("rank") = 4, py::arg("lambda_v") = 0.1, py::arg("lambda_t") = 0.001, py::arg("tau") = 0.01,
        py::arg("lr") = 1e-3, py::arg("batch") = 128, py::arg("max_iters") = 2000, py::arg("seed") = 0,
        "Trains adapters on synthetic clusters; returns recall and loss history.");

    // SCST and grammar
    m.def(
        "scst_demo",
        [](std::size_t steps, std::size_t beam, double lr, std::size_t xe_epochs, std::uint64_t seed) {
            scst::DemoSpec spec;
            spec.scst.steps = steps;
            spec.scst.beam_size = beam;
            spec.scst.lr = lr;
            spec.scst.seed = seed;
            spec.xe_epochs = xe_epochs;
            spec.seed = seed;
            scst::DemoReport r;
            {
                py::gil_scoped_release release;
                r = scst::run_scst_demo(spec);
            }
            return py::dict(py::arg("xe_heldout_reward") = r.xe_heldout_reward,
                            py::arg("scst_heldout_reward") = r.scst_heldout_reward,
                            py::arg("rep1_xe") = r.rep1_xe, py::arg("rep1_scst") = r.rep1_scst,
                            py::arg("reward_curve") = r.reward_curve, py::arg("captions_scst") = r.captions_scst);
        },
        py::arg("steps") = 200, py::arg("beam") = 5, py::arg("lr") = 5.0, py::arg("xe_epochs") = 300, py::arg("seed") = 0,
        "Cross-entropy pretraining then SCST on the synthetic captioning world.");
    m.def("tokenize_caption", &scst::tokenize_caption, py::arg("caption"));
    m.def(
        "rep_n",
        [](const std::vector<std::string>& captions, std::size_t n) {
            std::vector<std::vector<std::string>> tokens;
            for (const auto& c : captions) tokens.push_back(scst::tokenize_caption(c));
            return scst::rep_n(tokens, n);
        },
        py::arg("captions"), py::arg("n"), "Mean count of repeated n-grams per caption.");
    m.def(
        "pct_incorrect_endings",
        [](const std::vector<std::string>& captions, const std::set<std::string>& stoplist) {
            const scst::GrammarConfig cfg{stoplist, 4};
            cfg.validate();
            return scst::pct_incorrect_endings(captions, cfg).percent;
        },
        py::arg("captions"), py::arg("stoplist"), "Percentage of captions ending in a stoplist word.");
}
