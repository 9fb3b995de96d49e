#include "pacmetric/scst_demo.hpp"

namespace pacmetric::scst {

namespace {

const std::vector<std::string> kObjects = {"dog", "cat", "horse", "bird", "car", "boat"};
const std::vector<std::string> kScenes = {"beach", "street", "field", "snow", "river", "park"};
const std::vector<std::string> kFunction = {"a", "the", "on", "in", "with", "and"};

Vector random_unit(std::size_t dim, Rng& rng) {
    Vector v(dim);
    for (auto& x : v) x = standard_normal(rng);
    return l2_normalize(v);
}

}  // namespace

DemoWorld make_demo_world(const DemoSpec& spec) {
    Rng rng(spec.seed);

    std::vector<std::string> vocab = kObjects;
    vocab.insert(vocab.end(), kScenes.begin(), kScenes.end());
    vocab.insert(vocab.end(), kFunction.begin(), kFunction.end());
    vocab.push_back("<eos>");
    const std::size_t eos = vocab.size() - 1;

    const std::size_t dim = spec.image_dim;
    // Every word gets its own direction; object and scene words are unit,
    // function words and EOS are scaled down.
    Matrix words(vocab.size(), dim);
    for (std::size_t w = 0; w < vocab.size(); ++w) {
        const double scale = w < kObjects.size() + kScenes.size() ? 1.0 : spec.function_scale;
        const Vector u = random_unit(dim, rng);
        for (std::size_t d = 0; d < dim; ++d) words(w, d) = scale * u[d];
    }

    ToyPolicy policy = ToyPolicy::make(vocab, eos, dim, spec.embed_dim, 6, rng);
    const std::size_t a = policy.token_id("a"), on = policy.token_id("on"), the = policy.token_id("the");

    // Images carry the caption pattern's function words too, so the reward
    // peaks at the grounded "a <obj> on the <scene> <eos>" and any repeated
    // or dropped word costs.
    Vector pattern(dim, 0.0);
    for (auto w : {a, on, the, eos})
        for (std::size_t d = 0; d < dim; ++d) pattern[d] += words(w, d);

    const std::size_t default_scene = policy.token_id("street");
    const auto make_images = [&](std::size_t n, std::vector<Tokens>* captions) {
        Matrix images(n, dim);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t o = uniform_index(rng, kObjects.size());
            const std::size_t s = kObjects.size() + uniform_index(rng, kScenes.size());
            Vector v(dim);
            for (std::size_t d = 0; d < dim; ++d)
                v[d] = words(o, d) + words(s, d) + pattern[d] + spec.image_noise * standard_normal(rng);
            v = l2_normalize(v);
            std::copy(v.begin(), v.end(), images.row(i).begin());
            if (captions) {
                const bool faithful = uniform_unit(rng) < spec.scene_fidelity;
                captions->push_back({a, o, on, the, faithful ? s : default_scene, eos});
            }
        }
        return images;
    };

    std::vector<Tokens> captions;
    Matrix train = make_images(spec.train_images, &captions);
    Matrix heldout = make_images(spec.heldout_images, nullptr);
    return DemoWorld{std::move(policy), ToyTextEncoder{std::move(words)}, std::move(train), std::move(heldout),
                     std::move(captions)};
}

std::vector<Tokens> decode_best(const ToyPolicy& policy, const Matrix& images, std::size_t beam_size) {
    std::vector<Tokens> out;
    out.reserve(images.rows());
    for (std::size_t i = 0; i < images.rows(); ++i) out.push_back(beam_search(policy, images.row(i), beam_size).front().tokens);
    return out;
}

double mean_best_beam_reward(const ToyPolicy& policy, const Matrix& images, const ToyTextEncoder& encoder,
                             const scoring::ScoreConfig& score, std::size_t beam_size) {
    const auto captions = decode_best(policy, images, beam_size);
    double sum = 0.0;
    for (std::size_t i = 0; i < captions.size(); ++i) sum += reward(images.row(i), captions[i], encoder, score);
    return sum / static_cast<double>(captions.size());
}

namespace {

std::vector<std::vector<std::string>> words_without_eos(const ToyPolicy& policy, const std::vector<Tokens>& caps) {
    std::vector<std::vector<std::string>> out;
    for (const auto& c : caps) {
        auto words = policy.token_strings(c);
        if (!words.empty() && policy.eos() && c.back() == *policy.eos()) words.pop_back();
        out.push_back(std::move(words));
    }
    return out;
}

}  // namespace

DemoReport run_scst_demo(const DemoSpec& spec) {
    spec.scst.validate();
    spec.score.validate();
    DemoWorld world = make_demo_world(spec);
    auto& policy = world.policy;

    DemoReport report;
    report.xe_losses = xent_train(policy, world.train_images, world.train_captions, spec.xe_lr, spec.xe_epochs);
    report.xe_heldout_reward =
        mean_best_beam_reward(policy, world.heldout_images, world.encoder, spec.score, spec.scst.beam_size);
    report.captions_xe = words_without_eos(policy, decode_best(policy, world.heldout_images, spec.scst.beam_size));
    report.rep1_xe = rep_n(report.captions_xe, 1);

    const RewardFn reward_fn = [&](std::size_t idx, const Tokens& caption) {
        return reward(world.train_images.row(idx), caption, world.encoder, spec.score);
    };
    report.reward_curve = scst_train(policy, world.train_images, spec.scst, reward_fn).mean_reward;

    report.scst_heldout_reward =
        mean_best_beam_reward(policy, world.heldout_images, world.encoder, spec.score, spec.scst.beam_size);
    report.captions_scst = words_without_eos(policy, decode_best(policy, world.heldout_images, spec.scst.beam_size));
    report.rep1_scst = rep_n(report.captions_scst, 1);
    return report;
}

}  // namespace pacmetric::scst
