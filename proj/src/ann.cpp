#include "seqrec/ann.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <queue>
#include <tuple>

#include "seqrec/bin_io.hpp"
#include "seqrec/rng.hpp"
#include "seqrec/vecmath.hpp"

namespace seqrec {

namespace {

constexpr char kIndexMagic[8] = {'S', 'Q', 'R', 'A', 'N', 'N', '0', '1'};
constexpr std::uint32_t kIndexVersion = 1;

void sort_scored(QueryResult& result) {
    std::sort(result.begin(), result.end(), [](const ScoredItem& a, const ScoredItem& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.item < b.item;
    });
}

struct TreeBuilder {
    const std::vector<float>& unit;
    std::size_t dim;
    std::uint32_t leaf_size;
    Rng& rng;
    RpForest::Tree& tree;

    const float* unit_row(ItemIndex item) const { return unit.data() + static_cast<std::size_t>(item) * dim; }

    bool rows_equal(ItemIndex a, ItemIndex b) const {
        return std::memcmp(unit_row(a), unit_row(b), dim * sizeof(float)) == 0;
    }

    std::int32_t add_node() {
        tree.nodes.emplace_back();
        tree.normals.resize(tree.nodes.size() * dim, 0.0f);
        return static_cast<std::int32_t>(tree.nodes.size() - 1);
    }

    std::int32_t build(std::vector<ItemIndex>& items) {
        const std::int32_t node_id = add_node();
        if (items.size() <= leaf_size) {
            tree.nodes[node_id].items_begin = static_cast<std::uint32_t>(tree.leaf_items.size());
            tree.leaf_items.insert(tree.leaf_items.end(), items.begin(), items.end());
            tree.nodes[node_id].items_end = static_cast<std::uint32_t>(tree.leaf_items.size());
            return node_id;
        }

        std::vector<double> normal(dim, 0.0);
        double offset = 0.0;
        bool have_split = false;
        // Perpendicular bisector of two random member points; duplicate-heavy
        // nodes get up to 3 attempts before the arbitrary halving fallback.
        for (int attempt = 0; attempt < 3 && !have_split; ++attempt) {
            const std::size_t a = static_cast<std::size_t>(rng.next_below(items.size()));
            std::size_t b = static_cast<std::size_t>(rng.next_below(items.size() - 1));
            if (b >= a) ++b;
            if (rows_equal(items[a], items[b])) continue;
            const float* pa = unit_row(items[a]);
            const float* pb = unit_row(items[b]);
            double nrm = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                normal[j] = static_cast<double>(pa[j]) - static_cast<double>(pb[j]);
                nrm += normal[j] * normal[j];
            }
            nrm = std::sqrt(nrm);
            if (nrm == 0.0) continue;
            offset = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                normal[j] /= nrm;
                offset += normal[j] * 0.5 * (static_cast<double>(pa[j]) + static_cast<double>(pb[j]));
            }
            have_split = true;
        }

        std::vector<ItemIndex> left_items, right_items;
        if (have_split) {
            for (const ItemIndex item : items) {
                const float* row = unit_row(item);
                double side = -offset;
                for (std::size_t j = 0; j < dim; ++j) side += normal[j] * static_cast<double>(row[j]);
                (side < 0.0 ? left_items : right_items).push_back(item);
            }
        }
        if (!have_split || left_items.empty() || right_items.empty()) {
            // Arbitrary half split keeps the recursion making progress.
            const std::size_t mid = items.size() / 2;
            left_items.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(mid));
            right_items.assign(items.begin() + static_cast<std::ptrdiff_t>(mid), items.end());
            std::fill(normal.begin(), normal.end(), 0.0);
            offset = 0.0;
        }

        float* stored_normal = tree.normals.data() + static_cast<std::size_t>(node_id) * dim;
        for (std::size_t j = 0; j < dim; ++j) stored_normal[j] = static_cast<float>(normal[j]);
        tree.nodes[node_id].offset = static_cast<float>(offset);

        items.clear();
        items.shrink_to_fit();
        const std::int32_t left_id = build(left_items);
        tree.nodes[node_id].left = left_id;
        const std::int32_t right_id = build(right_items);
        tree.nodes[node_id].right = right_id;
        return node_id;
    }
};

}  // namespace

RpForest RpForest::build(const EmbeddingTable& table, std::uint32_t n_trees,
                         std::uint32_t leaf_size, std::uint64_t seed) {
    if (table.size() == 0) fail(ErrorCode::InvalidArgument, "RpForest::build: empty table");
    if (n_trees == 0 || leaf_size == 0) {
        fail(ErrorCode::InvalidArgument, "RpForest::build: n_trees and leaf_size must be >= 1");
    }
    RpForest forest;
    forest.n_items_ = table.size();
    forest.dim_ = table.dim();
    forest.n_trees_ = n_trees;
    forest.leaf_size_ = leaf_size;
    forest.seed_ = seed;
    forest.vectors_ = table.data();

    // Unit copy for hyperplane geometry; zero rows stay zero.
    std::vector<float> unit(forest.vectors_.size());
    for (std::size_t i = 0; i < forest.n_items_; ++i) {
        const float* src = forest.vectors_.data() + i * forest.dim_;
        float* dst = unit.data() + i * forest.dim_;
        double nrm = 0.0;
        for (std::size_t j = 0; j < forest.dim_; ++j) nrm += static_cast<double>(src[j]) * src[j];
        nrm = std::sqrt(nrm);
        for (std::size_t j = 0; j < forest.dim_; ++j) {
            dst[j] = nrm == 0.0 ? 0.0f : static_cast<float>(src[j] / nrm);
        }
    }

    forest.trees_.resize(n_trees);
    Rng root_rng(mix64(seed, 0xf0e57ULL));
    for (std::uint32_t t = 0; t < n_trees; ++t) {
        Rng tree_rng = root_rng.fork(t);
        std::vector<ItemIndex> items(forest.n_items_);
        for (std::size_t i = 0; i < forest.n_items_; ++i) items[i] = static_cast<ItemIndex>(i);
        TreeBuilder builder{unit, forest.dim_, leaf_size, tree_rng, forest.trees_[t]};
        builder.build(items);
    }
    return forest;
}

QueryResult RpForest::query(std::span<const double> q, std::size_t top_n,
                            std::size_t search_budget) const {
    if (top_n == 0) fail(ErrorCode::InvalidArgument, "query: top_n must be >= 1");
    if (q.size() != dim_) fail(ErrorCode::InvalidArgument, "query: dimension mismatch");
    const double q_norm = norm(q);
    if (q_norm == 0.0) fail(ErrorCode::ZeroVector, "query: zero query vector");
    if (search_budget == 0) search_budget = default_budget(top_n);

    std::vector<double> q_unit(q.begin(), q.end());
    for (double& v : q_unit) v /= q_norm;

    // (priority, tree, node); largest margin-so-far first, ties resolved by
    // ids so traversal order is deterministic.
    using Entry = std::tuple<double, std::uint32_t, std::int32_t>;
    std::priority_queue<Entry> heap;
    for (std::uint32_t t = 0; t < trees_.size(); ++t) {
        heap.emplace(std::numeric_limits<double>::infinity(), t, 0);
    }

    std::vector<char> seen(n_items_, 0);
    std::vector<ItemIndex> candidates;
    candidates.reserve(std::min(search_budget + leaf_size_, n_items_));

    while (!heap.empty() && candidates.size() < search_budget) {
        const auto [priority, tree_id, node_id] = heap.top();
        heap.pop();
        const Tree& tree = trees_[tree_id];
        const Node& node = tree.nodes[static_cast<std::size_t>(node_id)];
        if (node.left < 0) {
            for (std::uint32_t i = node.items_begin; i < node.items_end; ++i) {
                const ItemIndex item = tree.leaf_items[i];
                if (!seen[item]) {
                    seen[item] = 1;
                    candidates.push_back(item);
                }
            }
            continue;
        }
        const float* normal = tree.normals.data() + static_cast<std::size_t>(node_id) * dim_;
        double margin = -static_cast<double>(node.offset);
        for (std::size_t j = 0; j < dim_; ++j) margin += static_cast<double>(normal[j]) * q_unit[j];
        heap.emplace(std::min(priority, margin), tree_id, node.right);
        heap.emplace(std::min(priority, -margin), tree_id, node.left);
    }

    QueryResult scored;
    scored.reserve(candidates.size());
    for (const ItemIndex item : candidates) {
        const std::span<const float> row{vectors_.data() + static_cast<std::size_t>(item) * dim_, dim_};
        scored.push_back(ScoredItem{item, cosine_sim_f32(q, q_norm, row)});
    }
    sort_scored(scored);
    if (scored.size() > top_n) scored.resize(top_n);
    return scored;
}

QueryResult exact_query(const EmbeddingTable& table, std::span<const double> q, std::size_t top_n) {
    if (top_n == 0) fail(ErrorCode::InvalidArgument, "exact_query: top_n must be >= 1");
    if (q.size() != table.dim()) fail(ErrorCode::InvalidArgument, "exact_query: dimension mismatch");
    const double q_norm = norm(q);
    if (q_norm == 0.0) fail(ErrorCode::ZeroVector, "exact_query: zero query vector");

    QueryResult scored;
    scored.reserve(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        scored.push_back(
            ScoredItem{static_cast<ItemIndex>(i), cosine_sim_f32(q, q_norm, table.row(static_cast<ItemIndex>(i)))});
    }
    sort_scored(scored);
    if (scored.size() > top_n) scored.resize(top_n);
    return scored;
}

void RpForest::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open index file for writing: " + path.string());
    bin::write_magic(os, kIndexMagic);
    bin::write_u32(os, kIndexVersion);
    bin::write_u32(os, static_cast<std::uint32_t>(dim_));
    bin::write_u64(os, n_items_);
    bin::write_u32(os, n_trees_);
    bin::write_u32(os, leaf_size_);
    bin::write_u64(os, seed_);
    for (const float v : vectors_) bin::write_f32(os, v);
    for (const Tree& tree : trees_) {
        bin::write_u64(os, tree.nodes.size());
        for (const Node& node : tree.nodes) {
            bin::write_u32(os, static_cast<std::uint32_t>(node.left));
            bin::write_u32(os, static_cast<std::uint32_t>(node.right));
            bin::write_u32(os, node.items_begin);
            bin::write_u32(os, node.items_end);
            bin::write_f32(os, node.offset);
        }
        bin::write_u64(os, tree.normals.size());
        for (const float v : tree.normals) bin::write_f32(os, v);
        bin::write_u64(os, tree.leaf_items.size());
        for (const ItemIndex item : tree.leaf_items) bin::write_u32(os, item);
    }
    if (!os) fail(ErrorCode::Io, "failed writing index file: " + path.string());
}

RpForest RpForest::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open index file: " + path.string());
    bin::expect_magic(is, kIndexMagic, "seqrec index");
    const std::uint32_t version = bin::read_u32(is);
    if (version != kIndexVersion) fail(ErrorCode::Parse, path.string() + ": unsupported index version");
    RpForest forest;
    forest.dim_ = bin::read_u32(is);
    forest.n_items_ = bin::read_u64(is);
    forest.n_trees_ = bin::read_u32(is);
    forest.leaf_size_ = bin::read_u32(is);
    forest.seed_ = bin::read_u64(is);
    forest.vectors_.resize(forest.n_items_ * forest.dim_);
    for (float& v : forest.vectors_) v = bin::read_f32(is);
    forest.trees_.resize(forest.n_trees_);
    for (Tree& tree : forest.trees_) {
        const std::uint64_t n_nodes = bin::read_u64(is);
        tree.nodes.resize(n_nodes);
        for (Node& node : tree.nodes) {
            node.left = static_cast<std::int32_t>(bin::read_u32(is));
            node.right = static_cast<std::int32_t>(bin::read_u32(is));
            node.items_begin = bin::read_u32(is);
            node.items_end = bin::read_u32(is);
            node.offset = bin::read_f32(is);
        }
        const std::uint64_t n_normals = bin::read_u64(is);
        tree.normals.resize(n_normals);
        for (float& v : tree.normals) v = bin::read_f32(is);
        const std::uint64_t n_leaf_items = bin::read_u64(is);
        tree.leaf_items.resize(n_leaf_items);
        for (ItemIndex& item : tree.leaf_items) item = bin::read_u32(is);
    }
    return forest;
}

}  // namespace seqrec
