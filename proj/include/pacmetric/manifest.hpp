#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pacmetric/embedkit.hpp"

namespace pacmetric {

enum class ItemKind { image, caption, frame_sequence };

std::string to_string(ItemKind kind);
ItemKind item_kind_from_string(const std::string& s);

/// One manifest entry: a row range [row_begin, row_end) of an embedding file.
struct ItemRecord {
    std::string id;
    ItemKind kind = ItemKind::image;
    std::filesystem::path file;
    std::size_t row_begin = 0;
    std::size_t row_end = 0;
    std::optional<std::vector<std::string>> tokens;  // captions only
    std::optional<std::vector<std::string>> refs;    // reference caption ids
    std::optional<std::string> target;               // image / video a caption describes

    std::size_t row_count() const noexcept { return row_end - row_begin; }
};

struct Manifest {
    std::string corpus_id;
    std::vector<ItemRecord> items;

    const ItemRecord& at(const std::string& id) const;
    const ItemRecord* find(const std::string& id) const;

    /// Builds the id index and checks structural invariants (unique ids,
    /// token counts, ref targets). Throws FormatError.
    void index();

private:
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// JSON text <-> Manifest. parse_manifest validates structure only; row
/// ranges are checked against files by validate_row_ranges.
Manifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const Manifest& m);

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

/// Checks every row range against the header of its embedding file.
void validate_row_ranges(const Manifest& m, const std::filesystem::path& embeddings_dir);

/// Lazily loads embedding files relative to a base directory and hands out
/// the rows of manifest items. Safe to share between reader threads.
class EmbeddingStore {
public:
    EmbeddingStore(const Manifest& manifest, std::filesystem::path embeddings_dir);

    void preload();
    Matrix rows_of(const std::string& id) const;
    Matrix rows_of(const ItemRecord& item) const;
    const Manifest& manifest() const noexcept { return manifest_; }

private:
    const Matrix& file(const std::filesystem::path& rel) const;

    const Manifest& manifest_;
    std::filesystem::path dir_;
    mutable std::map<std::filesystem::path, Matrix> files_;
    std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace pacmetric
