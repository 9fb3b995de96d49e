#include "pacmetric/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pacmetric {

using nlohmann::json;

std::string to_string(ItemKind kind) {
    switch (kind) {
        case ItemKind::image: return "image";
        case ItemKind::caption: return "caption";
        case ItemKind::frame_sequence: return "frame_sequence";
    }
    return "image";
}

ItemKind item_kind_from_string(const std::string& s) {
    if (s == "image") return ItemKind::image;
    if (s == "caption") return ItemKind::caption;
    if (s == "frame_sequence") return ItemKind::frame_sequence;
    throw FormatError("manifest: unknown item kind '" + s + "'", 0);
}

const ItemRecord* Manifest::find(const std::string& id) const {
    if (by_id_.size() != items.size())
        throw std::logic_error("Manifest::find: items changed since index()");
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &items[it->second];
}

const ItemRecord& Manifest::at(const std::string& id) const {
    if (const auto* item = find(id)) return *item;
    throw FormatError("manifest: unknown item id '" + id + "'", 0);
}

void Manifest::index() {
    by_id_.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        if (item.id.empty()) throw FormatError("manifest: item " + std::to_string(i) + " has empty id", 0);
        if (!by_id_.emplace(item.id, i).second)
            throw FormatError("manifest: duplicate item id '" + item.id + "'", 0);
        if (item.row_end < item.row_begin)
            throw FormatError("manifest: item '" + item.id + "' has inverted row range", 0);
        if (item.tokens) {
            if (item.kind != ItemKind::caption)
                throw FormatError("manifest: tokens on non-caption item '" + item.id + "'", 0);
            if (item.tokens->size() != item.row_count())
                throw FormatError("manifest: caption '" + item.id + "' has " +
                                      std::to_string(item.tokens->size()) + " tokens but " +
                                      std::to_string(item.row_count()) + " rows",
                                  0);
        }
    }
    for (const auto& item : items) {
        for (const auto& ref : item.refs.value_or(std::vector<std::string>{})) {
            auto it = by_id_.find(ref);
            if (it == by_id_.end())
                throw FormatError("manifest: item '" + item.id + "' references unknown id '" + ref + "'", 0);
            if (items[it->second].kind != ItemKind::caption)
                throw FormatError("manifest: reference '" + ref + "' is not a caption", 0);
        }
        if (item.target) {
            auto it = by_id_.find(*item.target);
            if (it == by_id_.end())
                throw FormatError("manifest: item '" + item.id + "' targets unknown id '" + *item.target + "'", 0);
        }
    }
}

Manifest parse_manifest(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("manifest: ") + e.what(), e.byte);
    }
    Manifest m;
    try {
        m.corpus_id = j.at("corpus_id").get<std::string>();
        for (const auto& ji : j.at("items")) {
            ItemRecord item;
            item.id = ji.at("id").get<std::string>();
            item.kind = item_kind_from_string(ji.at("kind").get<std::string>());
            item.file = ji.at("file").get<std::string>();
            const auto& range = ji.at("row_range");
            if (!range.is_array() || range.size() != 2)
                throw FormatError("manifest: row_range of '" + item.id + "' must be [start, end)", 0);
            item.row_begin = range[0].get<std::size_t>();
            item.row_end = range[1].get<std::size_t>();
            if (ji.contains("tokens")) item.tokens = ji["tokens"].get<std::vector<std::string>>();
            if (ji.contains("refs")) item.refs = ji["refs"].get<std::vector<std::string>>();
            if (ji.contains("target")) item.target = ji["target"].get<std::string>();
            m.items.push_back(std::move(item));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what(), 0);
    }
    m.index();
    return m;
}

std::string manifest_to_json(const Manifest& m) {
    json j;
    j["corpus_id"] = m.corpus_id;
    j["items"] = json::array();
    for (const auto& item : m.items) {
        json ji;
        ji["id"] = item.id;
        ji["kind"] = to_string(item.kind);
        ji["file"] = item.file.generic_string();
        ji["row_range"] = {item.row_begin, item.row_end};
        if (item.tokens) ji["tokens"] = *item.tokens;
        if (item.refs) ji["refs"] = *item.refs;
        if (item.target) ji["target"] = *item.target;
        j["items"].push_back(std::move(ji));
    }
    return j.dump(2);
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_manifest(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << manifest_to_json(m) << '\n';
}

void validate_row_ranges(const Manifest& m, const std::filesystem::path& embeddings_dir) {
    std::map<std::filesystem::path, EmbeddingHeader> headers;
    for (const auto& item : m.items) {
        auto it = headers.find(item.file);
        if (it == headers.end())
            it = headers.emplace(item.file, read_embedding_header(embeddings_dir / item.file)).first;
        if (item.row_end > it->second.rows)
            throw FormatError("manifest: item '" + item.id + "' row range [" +
                                  std::to_string(item.row_begin) + ", " + std::to_string(item.row_end) +
                                  ") exceeds " + std::to_string(it->second.rows) + " rows of " +
                                  item.file.string(),
                              0);
    }
}

EmbeddingStore::EmbeddingStore(const Manifest& manifest, std::filesystem::path embeddings_dir)
    : manifest_(manifest), dir_(std::move(embeddings_dir)) {}

void EmbeddingStore::preload() {
    for (const auto& item : manifest_.items) file(item.file);
}

const Matrix& EmbeddingStore::file(const std::filesystem::path& rel) const {
    std::lock_guard lock(*mutex_);
    auto it = files_.find(rel);
    if (it == files_.end()) it = files_.emplace(rel, load_embeddings(dir_ / rel)).first;
    return it->second;
}

Matrix EmbeddingStore::rows_of(const ItemRecord& item) const {
    return file(item.file).slice_rows(item.row_begin, item.row_end);
}

Matrix EmbeddingStore::rows_of(const std::string& id) const { return rows_of(manifest_.at(id)); }

}  // namespace pacmetric
