#pragma once

// Synthetic captioning world for exercising XE pretraining followed by SCST.
//
// Every word has a random direction in image space (the toy text encoder).
// Images are the normalized sum of an object word, a scene word, the
// function words of the training pattern "a <object> on the <scene>" and
// EOS, plus noise, so the reward peaks at the correctly grounded
// training-style caption. Training captions often fall back to a default
// scene word; XE imitates that habit and SCST has to unlearn it.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pacmetric/scst.hpp"

namespace pacmetric::scst {

struct DemoSpec {
    std::size_t image_dim = 32;
    std::size_t embed_dim = 24;
    std::size_t train_images = 96;
    std::size_t heldout_images = 48;
    double image_noise = 0.15;
    double function_scale = 0.5;  // norm of function-word and EOS vectors
    double scene_fidelity = 0.35;  // chance a training caption names the true scene, else "street"
    std::size_t xe_epochs = 300;
    double xe_lr = 2.0;
    ScstConfig scst{.beam_size = 5, .lr = 5.0};
    scoring::ScoreConfig score{};
    std::uint64_t seed = 0;
};

struct DemoWorld {
    ToyPolicy policy;
    ToyTextEncoder encoder;
    Matrix train_images;
    Matrix heldout_images;
    std::vector<Tokens> train_captions;
};

DemoWorld make_demo_world(const DemoSpec& spec);

/// Captions decoded with beam search (best beam) for every row of `images`.
std::vector<Tokens> decode_best(const ToyPolicy& policy, const Matrix& images, std::size_t beam_size);

/// Mean reward of the best beam over `images`.
double mean_best_beam_reward(const ToyPolicy& policy, const Matrix& images, const ToyTextEncoder& encoder,
                             const scoring::ScoreConfig& score, std::size_t beam_size);

struct DemoReport {
    std::vector<double> xe_losses;
    double xe_heldout_reward = 0.0;
    double scst_heldout_reward = 0.0;
    double rep1_xe = 0.0;
    double rep1_scst = 0.0;
    std::vector<double> reward_curve;  // per SCST step, training batches
    std::vector<std::vector<std::string>> captions_xe;
    std::vector<std::vector<std::string>> captions_scst;
};

DemoReport run_scst_demo(const DemoSpec& spec);

}  // namespace pacmetric::scst
