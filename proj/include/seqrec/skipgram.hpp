#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqrec/embedding_table.hpp"
#include "seqrec/error.hpp"
#include "seqrec/metrics.hpp"  // ItemIndex

namespace seqrec {

struct SgConfig {
    std::size_t dim = 64;
    std::size_t window = 5;       // symmetric, in items
    std::size_t negatives = 5;    // noise draws per positive pair
    std::size_t epochs = 5;
    double learning_rate = 0.025;  // linearly decayed
    std::size_t min_count = 1;
    double subsample_threshold = 0.0;  // 0 disables frequent-item subsampling
    std::uint64_t seed = 1;
    std::size_t threads = 1;  // >1 enables the lock-free parallel mode
};

struct Vocab {
    std::vector<std::uint64_t> counts;  // per catalog item; below-min_count items keep their raw count
    std::vector<double> noise_dist;     // ∝ count^0.75 over retained items, sums to 1
    std::vector<ItemIndex> retained;    // items meeting min_count, ascending
    std::uint64_t total_positions = 0;  // retained tokens across all sequences

    bool is_retained(ItemIndex item) const { return noise_dist[item] > 0.0; }
};

Vocab build_vocab(std::span<const std::vector<ItemIndex>> sequences, std::size_t n_items,
                  std::size_t min_count);

// Loss of one skip-gram negative-sampling step:
//   L = -log sigmoid(u_center . v_ctx) - sum_k log sigmoid(-u_center . v_neg_k)
double sg_pair_loss(std::span<const double> center, std::span<const double> context,
                    std::span<const std::vector<double>> negatives);

// Analytic gradients of sg_pair_loss. grad_negatives holds one d-vector per
// negative. This is the exact update rule the trainer applies.
void sg_pair_grad(std::span<const double> center, std::span<const double> context,
                  std::span<const std::vector<double>> negatives, std::span<double> grad_center,
                  std::span<double> grad_context, std::span<std::vector<double>> grad_negatives);

// Seeded uniform init in [-0.5/dim, +0.5/dim] for the input vectors. The
// context table starts at zero and is discarded after training.
std::vector<double> initial_input_vectors(std::size_t n_items, std::size_t dim, std::uint64_t seed);

// Skip-gram with negative sampling over item view sequences. Deterministic
// for a fixed seed when threads == 1; the input-vector table is returned as
// float32 rows aligned with `items`.
EmbeddingTable train_skipgram(std::span<const std::vector<ItemIndex>> sequences,
                              std::vector<std::string> items, const SgConfig& config);

}  // namespace seqrec
