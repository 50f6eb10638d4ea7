#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "seqrec/embedding_table.hpp"
#include "seqrec/error.hpp"
#include "seqrec/metrics.hpp"  // ItemIndex

namespace seqrec {

struct ScoredItem {
    ItemIndex item;
    double similarity;
};

// Descending similarity, ties broken by lower item index.
using QueryResult = std::vector<ScoredItem>;

// Random-projection forest over the embedding rows, angular metric. Each
// internal node splits on the perpendicular bisector of two randomly sampled
// member points (computed on L2-normalized vectors, so the hyperplane passes
// through the origin); leaves hold at most leaf_size items. The forest keeps
// its own copy of the raw rows, so a loaded index answers queries without
// the originating table.
class RpForest {
public:
    struct Node {
        std::int32_t left = -1;   // child node ids; -1 marks a leaf
        std::int32_t right = -1;
        std::uint32_t items_begin = 0;  // leaf payload range
        std::uint32_t items_end = 0;
        float offset = 0.0f;  // bisector offset (0 up to rounding on the unit sphere)
    };

    struct Tree {
        std::vector<Node> nodes;           // node 0 is the root
        std::vector<float> normals;        // node id x dim
        std::vector<ItemIndex> leaf_items;
    };

    static RpForest build(const EmbeddingTable& table, std::uint32_t n_trees,
                          std::uint32_t leaf_size, std::uint64_t seed);

    // Priority-queue traversal across all trees until at least
    // `search_budget` distinct candidates have been inspected, then exact
    // cosine on the candidates. search_budget 0 picks the default
    // n_trees * top_n * 8, which holds recall@10 >= 0.9 on random data at
    // the default tree count.
    QueryResult query(std::span<const double> q, std::size_t top_n,
                      std::size_t search_budget = 0) const;

    std::size_t default_budget(std::size_t top_n) const {
        return static_cast<std::size_t>(n_trees_) * top_n * 8;
    }

    std::size_t size() const { return n_items_; }
    std::size_t dim() const { return dim_; }
    std::uint32_t n_trees() const { return n_trees_; }
    std::uint32_t leaf_size() const { return leaf_size_; }
    const std::vector<Tree>& trees() const { return trees_; }

    void save(const std::filesystem::path& path) const;
    static RpForest load(const std::filesystem::path& path);

private:
    std::size_t n_items_ = 0;
    std::size_t dim_ = 0;
    std::uint32_t n_trees_ = 16;
    std::uint32_t leaf_size_ = 32;
    std::uint64_t seed_ = 0;
    std::vector<float> vectors_;  // raw rows, n_items x dim
    std::vector<Tree> trees_;
};

// Exhaustive cosine scan; the oracle for recall measurements.
QueryResult exact_query(const EmbeddingTable& table, std::span<const double> q, std::size_t top_n);

}  // namespace seqrec
