#pragma once

// Image and video caption scores computed in a shared image-text embedding
// space.

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pacmetric/embedkit.hpp"

namespace pacmetric::scoring {

/// Scaling factor `w` per backbone: 2.5 for the base backbone, 3.0 for the
/// large one.
struct ScoreConfig {
    double w = 2.5;
    std::string backbone_tag = "ViT-B/32";

    static ScoreConfig for_backbone(const std::string& tag);
    void validate() const;
};

/// Harmonic mean with the convention H(x, 0) = H(0, y) = 0.
double harmonic_mean(double x, double y);

/// w * max(cos(v, t), 0).
double pac_score(std::span<const double> image, std::span<const double> caption,
                 const ScoreConfig& cfg);

/// Harmonic mean of pac_score(v, t) and max(0, max_r cos(t, r)). `refs`
/// holds one reference caption embedding per row and must be non-empty.
double ref_pac_score(std::span<const double> image, std::span<const double> caption,
                     const Matrix& refs, const ScoreConfig& cfg);

/// Per-token caption embeddings with start and end markers. The last row
/// (end marker) is the caption's global embedding.
class TokenizedCaption {
public:
    TokenizedCaption(Matrix token_embeddings, std::vector<std::string> tokens);

    const Matrix& embeddings() const noexcept { return embeddings_; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    std::size_t length() const noexcept { return tokens_.size(); }
    std::span<const double> global() const { return embeddings_.row(embeddings_.rows() - 1); }

private:
    Matrix embeddings_;
    std::vector<std::string> tokens_;
};

/// Frame embeddings of one video, rows unit-norm.
class VideoEmbedding {
public:
    explicit VideoEmbedding(Matrix frames);
    const Matrix& frames() const noexcept { return frames_; }
    std::size_t frame_count() const noexcept { return frames_.rows(); }

private:
    Matrix frames_;
};

/// Smoothed inverse document frequency, ln((M + 1) / (df + 1)).
class IdfTable {
public:
    IdfTable() = default;
    IdfTable(std::unordered_map<std::string, std::size_t> doc_freq, std::size_t corpus_size);

    double weight(const std::string& token) const;
    std::size_t corpus_size() const noexcept { return corpus_size_; }
    std::size_t doc_freq(const std::string& token) const;

private:
    std::unordered_map<std::string, std::size_t> doc_freq_;
    std::size_t corpus_size_ = 0;
};

IdfTable build_idf(std::span<const std::vector<std::string>> token_lists);
IdfTable build_idf(std::span<const TokenizedCaption> corpus);

/// Normalized mean of the frames.
Vector coarse_video_embedding(const VideoEmbedding& video);

/// Inner product of the coarse video embedding and the caption's global
/// embedding.
double coarse_score(const VideoEmbedding& video, const TokenizedCaption& caption);

struct FineGrainedScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool uniform_idf_fallback = false;
};

/// IDF-weighted precision over tokens, mean recall over frames, and their F1
/// (0 when P + R <= 0). When every token weight is zero the weights fall back
/// to uniform and the result is flagged.
FineGrainedScore fine_grained_score(const Matrix& frames, const TokenizedCaption& caption,
                                    const IdfTable& idf);
FineGrainedScore fine_grained_score(const VideoEmbedding& video, const TokenizedCaption& caption,
                                    const IdfTable& idf);

struct VideoScore {
    double coarse = 0.0;
    FineGrainedScore fine;
    double value = 0.0;  // (coarse + F1) / 2
};

VideoScore video_score(const VideoEmbedding& video, const TokenizedCaption& caption,
                       const IdfTable& idf);

/// Candidate-vs-reference text score: the reference's tokens take the place
/// of video frames in the fine-grained term and its global embedding takes
/// the place of the coarse video embedding.
VideoScore text_score(const TokenizedCaption& reference, const TokenizedCaption& caption,
                      const IdfTable& idf);

struct RefVideoScore {
    VideoScore video;
    double best_text = 0.0;
    std::size_t best_ref = 0;
    double value = 0.0;  // (video.value + best_text) / 2
};

RefVideoScore ref_video_score(const VideoEmbedding& video, const TokenizedCaption& caption,
                              std::span<const TokenizedCaption> refs, const IdfTable& idf);

}  // namespace pacmetric::scoring
