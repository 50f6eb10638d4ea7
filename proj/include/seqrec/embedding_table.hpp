#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqrec/error.hpp"
#include "seqrec/metrics.hpp"  // ItemIndex

namespace seqrec {

// Frozen item vectors, one row per catalog item, row-major float32. The item
// strings travel with the table so files are self-describing.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::vector<std::string> items, std::size_t dim);
    EmbeddingTable(std::vector<std::string> items, std::size_t dim, std::vector<float> data);

    std::size_t size() const { return items_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& items() const { return items_; }
    const std::vector<float>& data() const { return data_; }

    std::span<const float> row(ItemIndex index) const;
    std::span<float> row_mut(ItemIndex index);

    std::optional<ItemIndex> find(std::string_view item) const;

    // FNV-1a over the raw float bytes; used by the freeze checks.
    std::uint64_t content_hash() const;

    // Text: first line "n_items dim", then "item v1 .. vd" with enough digits
    // to round-trip float32 exactly. Binary: magic header, little-endian
    // float32 rows, length-prefixed item strings.
    void save_text(const std::filesystem::path& path) const;
    void save_binary(const std::filesystem::path& path) const;
    static EmbeddingTable load(const std::filesystem::path& path);  // sniffs the format

private:
    void build_index();

    std::vector<std::string> items_;
    std::size_t dim_ = 0;
    std::vector<float> data_;
    std::unordered_map<std::string, ItemIndex> index_;
};

}  // namespace seqrec
