#include "pacmetric/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace pacmetric::scoring {

namespace {

constexpr double kUnitTol = 1e-6;

void require_unit_rows(const Matrix& m, const char* what) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (std::abs(l2_norm(m.row(r)) - 1.0) > kUnitTol)
            throw DegenerateInputError(std::string(what) + ": row " + std::to_string(r) +
                                       " is not unit-norm");
}

}  // namespace

ScoreConfig ScoreConfig::for_backbone(const std::string& tag) {
    if (tag == "ViT-B/32") return {2.5, tag};
    if (tag == "ViT-L/14") return {3.0, tag};
    throw std::invalid_argument("unknown backbone '" + tag + "' (expected ViT-B/32 or ViT-L/14)");
}

void ScoreConfig::validate() const {
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("ScoreConfig: w must be > 0");
}

double harmonic_mean(double x, double y) {
    if (x <= 0.0 || y <= 0.0) return 0.0;
    return 2.0 * x * y / (x + y);
}

double pac_score(std::span<const double> image, std::span<const double> caption,
                 const ScoreConfig& cfg) {
    cfg.validate();
    return cfg.w * std::max(cosine_sim(image, caption), 0.0);
}

double ref_pac_score(std::span<const double> image, std::span<const double> caption,
                     const Matrix& refs, const ScoreConfig& cfg) {
    if (refs.rows() == 0)
        throw std::invalid_argument("ref_pac_score: no references (use pac_score for reference-free scoring)");
    const double score = pac_score(image, caption, cfg);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < refs.rows(); ++r) top = std::max(top, cosine_sim(caption, refs.row(r)));
    return harmonic_mean(score, std::max(0.0, top));
}

// ---------------------------------------------------------------------------

TokenizedCaption::TokenizedCaption(Matrix token_embeddings, std::vector<std::string> tokens)
    : embeddings_(std::move(token_embeddings)), tokens_(std::move(tokens)) {
    if (tokens_.size() < 2)
        throw std::invalid_argument("TokenizedCaption: needs start and end markers (L >= 2)");
    if (embeddings_.rows() != tokens_.size())
        throw ShapeError("TokenizedCaption: " + std::to_string(tokens_.size()) + " tokens but " +
                         std::to_string(embeddings_.rows()) + " embedding rows");
}

VideoEmbedding::VideoEmbedding(Matrix frames) : frames_(std::move(frames)) {
    if (frames_.rows() == 0) throw std::invalid_argument("VideoEmbedding: no frames");
    require_unit_rows(frames_, "VideoEmbedding");
}

IdfTable::IdfTable(std::unordered_map<std::string, std::size_t> doc_freq, std::size_t corpus_size)
    : doc_freq_(std::move(doc_freq)), corpus_size_(corpus_size) {}

std::size_t IdfTable::doc_freq(const std::string& token) const {
    auto it = doc_freq_.find(token);
    return it == doc_freq_.end() ? 0 : it->second;
}

double IdfTable::weight(const std::string& token) const {
    return std::log((static_cast<double>(corpus_size_) + 1.0) /
                    (static_cast<double>(doc_freq(token)) + 1.0));
}

IdfTable build_idf(std::span<const std::vector<std::string>> token_lists) {
    if (token_lists.empty()) throw std::invalid_argument("build_idf: empty corpus");
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& tokens : token_lists) {
        std::unordered_set<std::string> seen(tokens.begin(), tokens.end());
        for (const auto& t : seen) ++df[t];
    }
    return IdfTable(std::move(df), token_lists.size());
}

IdfTable build_idf(std::span<const TokenizedCaption> corpus) {
    std::vector<std::vector<std::string>> lists;
    lists.reserve(corpus.size());
    for (const auto& c : corpus) lists.push_back(c.tokens());
    return build_idf(lists);
}

// ---------------------------------------------------------------------------

Vector coarse_video_embedding(const VideoEmbedding& video) {
    const auto& f = video.frames();
    Vector mean(f.cols(), 0.0);
    for (std::size_t j = 0; j < f.rows(); ++j) {
        auto row = f.row(j);
        for (std::size_t d = 0; d < f.cols(); ++d) mean[d] += row[d];
    }
    for (auto& x : mean) x /= static_cast<double>(f.rows());
    if (l2_norm(mean) <= 1e-12)
        throw DegenerateInputError("coarse_video_embedding: mean-pooled frames have zero norm");
    return l2_normalize(mean);
}

double coarse_score(const VideoEmbedding& video, const TokenizedCaption& caption) {
    const auto global = caption.global();
    if (std::abs(l2_norm(global) - 1.0) > kUnitTol)
        throw DegenerateInputError("coarse_score: caption global embedding is not unit-norm");
    return dot(coarse_video_embedding(video), global);
}

FineGrainedScore fine_grained_score(const Matrix& frames, const TokenizedCaption& caption,
                                    const IdfTable& idf) {
    const auto& tokens = caption.embeddings();
    if (frames.rows() == 0) throw std::invalid_argument("fine_grained_score: no frames");
    if (frames.cols() != tokens.cols())
        throw ShapeError("fine_grained_score: frame dim " + std::to_string(frames.cols()) +
                         " != token dim " + std::to_string(tokens.cols()));

    // sim(j, l) = frame_j . token_l
    const Matrix sim = matmul_transpose_b(frames, tokens);

    FineGrainedScore out;
    std::vector<double> weights(caption.length());
    double weight_sum = 0.0;
    for (std::size_t l = 0; l < caption.length(); ++l) {
        weights[l] = idf.weight(caption.tokens()[l]);
        weight_sum += weights[l];
    }
    if (!(weight_sum > 0.0)) {
        std::fill(weights.begin(), weights.end(), 1.0);
        weight_sum = static_cast<double>(weights.size());
        out.uniform_idf_fallback = true;
    }

    double p = 0.0;
    for (std::size_t l = 0; l < caption.length(); ++l) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < frames.rows(); ++j) best = std::max(best, sim(j, l));
        p += weights[l] * best;
    }
    out.precision = p / weight_sum;

    double r = 0.0;
    for (std::size_t j = 0; j < frames.rows(); ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < caption.length(); ++l) best = std::max(best, sim(j, l));
        r += best;
    }
    out.recall = r / static_cast<double>(frames.rows());

    const double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
    return out;
}

FineGrainedScore fine_grained_score(const VideoEmbedding& video, const TokenizedCaption& caption,
                                    const IdfTable& idf) {
    require_unit_rows(caption.embeddings(), "fine_grained_score");
    return fine_grained_score(video.frames(), caption, idf);
}

VideoScore video_score(const VideoEmbedding& video, const TokenizedCaption& caption,
                       const IdfTable& idf) {
    VideoScore s;
    s.coarse = coarse_score(video, caption);
    s.fine = fine_grained_score(video, caption, idf);
    s.value = (s.coarse + s.fine.f1) / 2.0;
    return s;
}

VideoScore text_score(const TokenizedCaption& reference, const TokenizedCaption& caption,
                      const IdfTable& idf) {
    require_unit_rows(reference.embeddings(), "text_score (reference)");
    require_unit_rows(caption.embeddings(), "text_score (candidate)");
    VideoScore s;
    s.coarse = dot(reference.global(), caption.global());
    s.fine = fine_grained_score(reference.embeddings(), caption, idf);
    s.value = (s.coarse + s.fine.f1) / 2.0;
    return s;
}

RefVideoScore ref_video_score(const VideoEmbedding& video, const TokenizedCaption& caption,
                              std::span<const TokenizedCaption> refs, const IdfTable& idf) {
    if (refs.empty()) throw std::invalid_argument("ref_video_score: no references");
    RefVideoScore out;
    out.video = video_score(video, caption, idf);
    out.best_text = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const double s = text_score(refs[i], caption, idf).value;
        if (s > out.best_text) {
            out.best_text = s;
            out.best_ref = i;
        }
    }
    out.value = (out.video.value + out.best_text) / 2.0;
    return out;
}

}  // namespace pacmetric::scoring
