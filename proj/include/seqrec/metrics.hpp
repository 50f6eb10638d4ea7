#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqrec/error.hpp"

namespace seqrec {

using ItemIndex = std::uint32_t;

// One evaluated example: the top-N list produced for it plus the ground truth.
struct RecommendationRun {
    struct Entry {
        std::vector<ItemIndex> recommended;  // <= 10 unique items
        ItemIndex label = 0;
    };
    std::vector<Entry> entries;
    std::size_t n_catalog = 0;
};

struct RankCount {
    std::uint32_t rank;  // 1-based, descending count order
    std::uint64_t count;
};

struct EvalReport {
    double ndcg_at_10 = 0.0;
    double gini = 0.0;
    double coverage = 0.0;
    bool gini_in_target_band = false;  // [0.4, 0.7], reported only
    std::size_t n_examples = 0;
    std::vector<std::uint64_t> exposure;  // per catalog item
};

// Binary relevance, one relevant item per example: 1/log2(rank+1) when the
// label lands in the top 10, else 0. IDCG is identically 1.
double ndcg_at_10(const RecommendationRun& run);

// Gini over the full catalog, zero-exposure items included. With counts
// sorted ascending: G = sum_i (2i - n - 1) x_i / (n * sum x), i in [1, n].
double gini(std::span<const std::uint64_t> exposure);

// Fraction of catalog items with nonzero exposure.
double coverage(std::span<const std::uint64_t> exposure);

// Exposed items only, sorted by descending count; plot-ready (rank, count).
std::vector<RankCount> rank_frequency_report(std::span<const std::uint64_t> exposure);

// Per-item recommendation counts over the whole run.
std::vector<std::uint64_t> exposure_histogram(const RecommendationRun& run);

EvalReport evaluate_run(const RecommendationRun& run);

// Merge shard reports: exposures add, NDCG combines by example-weighted mean.
EvalReport merge_reports(const EvalReport& a, const EvalReport& b);

// Flat key-value text file; extra_echo rows (e.g. the run config) are
// appended as-is so every report is self-describing.
void save_report(const std::filesystem::path& path, const EvalReport& report,
                 std::span<const std::pair<std::string, std::string>> extra_echo);
EvalReport load_report(const std::filesystem::path& path);

// Two-column TSV of rank_frequency_report for external plotting.
void save_rank_frequency_tsv(const std::filesystem::path& path,
                             std::span<const std::uint64_t> exposure);

}  // namespace seqrec
