#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "pacmetric/paclearn.hpp"

namespace pacmetric::paclearn {

namespace {

void write_f32(std::ostream& out, const Matrix& m) {
    for (double x : m.flat()) {
        const float f = static_cast<float>(x);
        if (!std::isfinite(f)) throw DegenerateInputError("checkpoint: non-finite adapter weight");
        const auto bits = std::bit_cast<std::uint32_t>(f);
        const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                               static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
        out.write(bytes, 4);
    }
}

void read_f32(const std::vector<std::uint8_t>& bytes, std::size_t& at, Matrix& m) {
    if (at + 4 * m.size() > bytes.size())
        throw FormatError("checkpoint: truncated payload", bytes.size());
    for (auto& x : m.flat()) {
        std::uint32_t bits = 0;
        for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f)) throw FormatError("checkpoint: non-finite value", at);
        x = f;
        at += 4;
    }
}

nlohmann::ordered_json side_json(const ProjectionHead& h) {
    return {{"d_in", h.adapter.d_in()}, {"d_out", h.adapter.d_out()}};
}

}  // namespace

std::string config_hash(const TrainConfig& cfg) {
    // FNV-1a 64 over the canonical config JSON.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : cfg.to_json()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_checkpoint(const DualHeads& heads, const CheckpointMeta& meta, const std::filesystem::path& path) {
    heads.image.adapter.validate();
    heads.text.adapter.validate();
    if (heads.image.adapter.rank() != heads.text.adapter.rank() ||
        heads.image.adapter.alpha != heads.text.adapter.alpha)
        throw std::invalid_argument("save_checkpoint: both sides must share rank and alpha");

    nlohmann::ordered_json header;
    header["format"] = "pacmetric-lora";
    header["version"] = 1;
    header["rank"] = heads.image.adapter.rank();
    header["alpha"] = heads.image.adapter.alpha;
    header["dims"] = {{"image", side_json(heads.image)}, {"text", side_json(heads.text)}};
    header["seed"] = meta.seed;
    header["config_hash"] = meta.config_hash;
    header["payload"] = {"image.A", "image.B", "text.A", "text.B"};

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << header.dump() << '\n';
    write_f32(out, heads.image.adapter.A);
    write_f32(out, heads.image.adapter.B);
    write_f32(out, heads.text.adapter.A);
    write_f32(out, heads.text.adapter.B);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, DualHeads& heads) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t newline = 0;
    while (newline < bytes.size() && bytes[newline] != '\n') ++newline;
    if (newline == bytes.size()) throw FormatError("checkpoint: missing header line", 0);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(newline));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: bad header: ") + e.what(), 0);
    }

    CheckpointMeta meta;
    try {
        if (header.at("format") != "pacmetric-lora" || header.at("version") != 1)
            throw FormatError("checkpoint: unsupported format", 0);
        const auto rank = header.at("rank").get<std::size_t>();
        const auto alpha = header.at("alpha").get<double>();
        const auto make = [&](const char* side) {
            const auto& d = header.at("dims").at(side);
            return LoraAdapter{Matrix(d.at("d_in").get<std::size_t>(), rank),
                               Matrix(rank, d.at("d_out").get<std::size_t>()), alpha};
        };
        LoraAdapter image = make("image");
        LoraAdapter text = make("text");
        std::size_t at = newline + 1;
        read_f32(bytes, at, image.A);
        read_f32(bytes, at, image.B);
        read_f32(bytes, at, text.A);
        read_f32(bytes, at, text.B);
        if (at != bytes.size()) throw FormatError("checkpoint: trailing bytes", at);
        if (image.d_in() != heads.image.base.rows() || image.d_out() != heads.image.base.cols() ||
            text.d_in() != heads.text.base.rows() || text.d_out() != heads.text.base.cols())
            throw ShapeError("checkpoint: adapter dims do not match the frozen projections");
        heads.image.adapter = std::move(image);
        heads.text.adapter = std::move(text);
        meta.seed = header.at("seed").get<std::uint64_t>();
        meta.config_hash = header.at("config_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: bad header: ") + e.what(), 0);
    }
    return meta;
}

}  // namespace pacmetric::paclearn
