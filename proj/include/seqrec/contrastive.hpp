#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqrec/embedding_table.hpp"
#include "seqrec/error.hpp"
#include "seqrec/ingest.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

enum class LossKind { Cosine, Weighted, CrossEntropy };

struct LossSpec {
    LossKind kind = LossKind::Cosine;
    double alpha = 2.0;  // weight on the positive similarity (weighted loss)
    double beta = 1.0;   // weight on the mean negative similarity (weighted loss)
    double tau = 0.05;   // softmax temperature (cross-entropy loss)
    // The softmax denominator includes the positive term by default, which
    // keeps the loss nonnegative; negatives_only reproduces the denominator
    // with negatives alone.
    bool denominator_includes_positive = true;
};

enum class SamplingStrategy { None, InBatch, TopK };

struct SamplingSpec {
    SamplingStrategy strategy = SamplingStrategy::None;
    std::size_t cap = 100;       // in-batch sampling cap
    std::size_t pool_cap = 100;  // in-batch pool size before top-k filtering
    std::size_t k = 5;           // hard negatives kept by the top-k filter
};

// Negative item indices; embeddings come from the frozen table.
struct NegativeSet {
    std::vector<ItemIndex> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> d_zi;  // gradient w.r.t. the predicted embedding
};

// L = -sim(z_i, z_t)
LossGrad cosine_loss(std::span<const double> zi, std::span<const double> zt);

// L = -alpha * sim(z_i, z_t) + beta/N * sum_j sim(z_i, z_j)
LossGrad weighted_loss(std::span<const double> zi, std::span<const double> zt,
                       std::span<const std::vector<double>> negatives, double alpha, double beta);

// L = -log( exp(sim(z_i,z_t)/tau) / sum_c exp(sim(z_i,z_c)/tau) ), computed
// with max-subtraction; c ranges over the negatives plus, by default, the
// positive.
LossGrad cross_entropy_loss(std::span<const double> zi, std::span<const double> zt,
                            std::span<const std::vector<double>> negatives, double tau,
                            bool denominator_includes_positive = true);

// Table-backed wrappers used by the trainer.
LossGrad weighted_loss(std::span<const double> zi, std::span<const double> zt,
                       const NegativeSet& negatives, const EmbeddingTable& table,
                       double alpha, double beta);
LossGrad cross_entropy_loss(std::span<const double> zi, std::span<const double> zt,
                            const NegativeSet& negatives, const EmbeddingTable& table, double tau,
                            bool denominator_includes_positive = true);

// Candidate pool: labels of the other batch members, de-duplicated, minus
// this example's label and every item of its input sequence. Pools above
// `cap` are down-sampled uniformly without replacement. An empty pool is a
// valid outcome; the caller falls back to the cosine loss for that example.
NegativeSet sample_in_batch(std::span<const TrainingExample> batch, std::size_t index,
                            std::size_t cap, Rng& rng);

// The k pool members most similar to the prediction (hard negatives), ties
// broken by lower item index. Pools of size <= k pass through unchanged.
NegativeSet filter_top_k(std::span<const double> zi, const NegativeSet& pool, std::size_t k,
                         const EmbeddingTable& table);

struct ExampleLossResult {
    double loss = 0.0;
    std::vector<double> d_zi;
    std::size_t negatives_used = 0;
    bool fell_back_to_cosine = false;  // empty pool under a contrastive loss
};

// Per-example dispatch used by the training loop: selects negatives per the
// sampling spec, evaluates the configured loss, and returns dL/dz_i.
ExampleLossResult example_loss(std::span<const double> zi, std::span<const TrainingExample> batch,
                               std::size_t index, const EmbeddingTable& table, const LossSpec& loss,
                               const SamplingSpec& sampling, Rng& rng);

const char* loss_kind_name(LossKind kind);
const char* sampling_strategy_name(SamplingStrategy strategy);

}  // namespace seqrec
