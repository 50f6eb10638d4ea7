#include "seqrec/embedding_table.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "seqrec/bin_io.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

namespace {
constexpr char kBinaryMagic[8] = {'S', 'Q', 'R', 'E', 'M', 'B', '0', '1'};
constexpr std::uint32_t kBinaryVersion = 1;
}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> items, std::size_t dim)
    : items_(std::move(items)), dim_(dim), data_(items_.size() * dim, 0.0f) {
    if (dim_ < 2) fail(ErrorCode::InvalidArgument, "embedding dim must be >= 2");
    build_index();
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> items, std::size_t dim, std::vector<float> data)
    : items_(std::move(items)), dim_(dim), data_(std::move(data)) {
    if (dim_ < 2) fail(ErrorCode::InvalidArgument, "embedding dim must be >= 2");
    if (data_.size() != items_.size() * dim_) {
        fail(ErrorCode::InvalidArgument, "embedding data size does not match items * dim");
    }
    build_index();
}

void EmbeddingTable::build_index() {
    index_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto [it, inserted] = index_.emplace(items_[i], static_cast<ItemIndex>(i));
        if (!inserted) fail(ErrorCode::InvalidArgument, "duplicate item in embedding table: " + items_[i]);
    }
}

std::span<const float> EmbeddingTable::row(ItemIndex index) const {
    if (index >= items_.size()) {
        fail(ErrorCode::IndexOutOfRange,
             "embedding lookup out of range: " + std::to_string(index) + " >= " + std::to_string(items_.size()));
    }
    return {data_.data() + static_cast<std::size_t>(index) * dim_, dim_};
}

std::span<float> EmbeddingTable::row_mut(ItemIndex index) {
    if (index >= items_.size()) fail(ErrorCode::IndexOutOfRange, "embedding row out of range");
    return {data_.data() + static_cast<std::size_t>(index) * dim_, dim_};
}

std::optional<ItemIndex> EmbeddingTable::find(std::string_view item) const {
    const auto it = index_.find(std::string(item));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t EmbeddingTable::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(data_.data());
    for (std::size_t i = 0; i < data_.size() * sizeof(float); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

void EmbeddingTable::save_text(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open embedding file for writing: " + path.string());
    os << items_.size() << " " << dim_ << "\n";
    char buf[48];
    for (std::size_t i = 0; i < items_.size(); ++i) {
        os << items_[i];
        for (std::size_t j = 0; j < dim_; ++j) {
            std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(data_[i * dim_ + j]));
            os << buf;
        }
        os << "\n";
    }
    if (!os) fail(ErrorCode::Io, "failed writing embedding file: " + path.string());
}

void EmbeddingTable::save_binary(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open embedding file for writing: " + path.string());
    bin::write_magic(os, kBinaryMagic);
    bin::write_u32(os, kBinaryVersion);
    bin::write_u64(os, items_.size());
    bin::write_u32(os, static_cast<std::uint32_t>(dim_));
    for (std::size_t i = 0; i < items_.size(); ++i) {
        bin::write_string(os, items_[i]);
        for (std::size_t j = 0; j < dim_; ++j) bin::write_f32(os, data_[i * dim_ + j]);
    }
    if (!os) fail(ErrorCode::Io, "failed writing embedding file: " + path.string());
}

namespace {

EmbeddingTable load_binary(std::istream& is, const std::string& name) {
    bin::expect_magic(is, kBinaryMagic, "seqrec embedding");
    const std::uint32_t version = bin::read_u32(is);
    if (version != kBinaryVersion) fail(ErrorCode::Parse, name + ": unsupported embedding file version");
    const std::uint64_t n = bin::read_u64(is);
    const std::uint32_t dim = bin::read_u32(is);
    std::vector<std::string> items;
    items.reserve(n);
    std::vector<float> data(n * dim);
    for (std::uint64_t i = 0; i < n; ++i) {
        items.push_back(bin::read_string(is));
        for (std::uint32_t j = 0; j < dim; ++j) data[i * dim + j] = bin::read_f32(is);
    }
    return EmbeddingTable(std::move(items), dim, std::move(data));
}

EmbeddingTable load_text(std::istream& is, const std::string& name) {
    std::string header;
    if (!std::getline(is, header)) fail(ErrorCode::Parse, name + ": empty embedding file");
    std::istringstream hs(header);
    std::size_t n = 0, dim = 0;
    if (!(hs >> n >> dim)) fail(ErrorCode::Parse, name + ": bad embedding header line");
    std::vector<std::string> items;
    items.reserve(n);
    std::vector<float> data;
    data.reserve(n * dim);
    std::string line;
    while (items.size() < n && std::getline(is, line)) {
        std::istringstream ls(line);
        std::string item;
        if (!(ls >> item)) fail(ErrorCode::Parse, name + ": bad embedding row");
        items.push_back(item);
        for (std::size_t j = 0; j < dim; ++j) {
            double v = 0.0;
            if (!(ls >> v)) fail(ErrorCode::Parse, name + ": embedding row has too few values");
            data.push_back(static_cast<float>(v));
        }
    }
    if (items.size() != n) fail(ErrorCode::Parse, name + ": embedding file truncated");
    return EmbeddingTable(std::move(items), dim, std::move(data));
}

}  // namespace

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open embedding file: " + path.string());
    char probe[8] = {};
    is.read(probe, 8);
    is.clear();
    is.seekg(0);
    if (std::memcmp(probe, kBinaryMagic, 8) == 0) return load_binary(is, path.string());
    return load_text(is, path.string());
}

}  // namespace seqrec
