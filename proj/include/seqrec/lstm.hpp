#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqrec/contrastive.hpp"
#include "seqrec/embedding_table.hpp"
#include "seqrec/error.hpp"
#include "seqrec/ingest.hpp"

namespace seqrec {

// Single-layer LSTM over frozen item embeddings; the final hidden state is
// projected back into embedding space. Gate blocks are stacked in the fixed
// order [input, forget, candidate, output].
struct ModelParams {
    std::size_t hidden = 0;
    std::size_t dim = 0;
    std::vector<double> w_x;   // 4h x d
    std::vector<double> w_h;   // 4h x h
    std::vector<double> b;     // 4h
    std::vector<double> proj;  // d x h

    std::size_t parameter_count() const {
        return w_x.size() + w_h.size() + b.size() + proj.size();
    }
};

// Orthogonal recurrent blocks, uniform-scaled input weights, forget-gate
// bias +1, zeros elsewhere.
ModelParams init_params(std::size_t hidden, std::size_t dim, std::uint64_t seed);

struct ForwardTrace {
    std::size_t steps = 0;
    std::size_t hidden = 0;
    std::vector<ItemIndex> inputs;
    // Per-step activations, each steps x hidden, row-major.
    std::vector<double> gate_i, gate_f, gate_g, gate_o;
    std::vector<double> cell;    // c_t
    std::vector<double> hidden_states;  // h_t
    std::vector<double> x;       // steps x dim input embeddings
    std::vector<double> z;       // final prediction, dim
};

ForwardTrace forward(const ModelParams& params, const EmbeddingTable& table,
                     std::span<const ItemIndex> input);

// z_i only.
std::vector<double> predict(const ModelParams& params, const EmbeddingTable& table,
                            std::span<const ItemIndex> input);

struct Gradients {
    std::vector<double> w_x, w_h, b, proj;

    void resize_like(const ModelParams& params);
    void zero();
    void add(const Gradients& other);
    void scale_all(double factor);
    double global_norm() const;
};

// Backpropagation through time for dL/dz. Gradients flow into the four
// parameter blocks only; the embedding table is frozen by construction.
Gradients backward(const ForwardTrace& trace, const ModelParams& params,
                   std::span<const double> d_z);

// Rescales to max_norm when the global norm exceeds it; returns the
// pre-clip norm.
double clip_gradients(Gradients& grads, double max_norm);

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    std::size_t hidden = 128;
    std::size_t batch_size = 128;
    std::size_t epochs = 5;
    double learning_rate = 1e-3;
    double gradient_clip_norm = 5.0;
    std::uint64_t seed = 1;
    Optimizer optimizer = Optimizer::Adam;
    // Adam moment decay; fixed defaults, exposed for the checkpoint echo.
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
};

struct AdamState {
    Gradients m;
    Gradients v;
    std::uint64_t step = 0;
};

struct EpochStats {
    double mean_loss = 0.0;
    std::size_t examples = 0;
    std::size_t cosine_fallbacks = 0;  // contrastive examples with an empty pool
};

// One pass over the examples: seeded shuffle into batches, per-example
// forward, loss/gradient delegation to the contrastive module, BPTT,
// batch-mean gradient, clip, optimizer step. Deterministic for a fixed
// (seed, epoch_index).
EpochStats train_epoch(ModelParams& params, AdamState& adam, const EmbeddingTable& table,
                       std::span<const TrainingExample> examples, const LossSpec& loss,
                       const SamplingSpec& sampling, const TrainConfig& config,
                       std::size_t epoch_index);

// Rejects combinations that cannot train (e.g. in-batch sampling with
// batch_size < 2) before any work happens.
void validate_train_setup(const TrainConfig& config, const LossSpec& loss,
                          const SamplingSpec& sampling);

// Versioned binary checkpoint: h, d, the four blocks as little-endian
// float32, and a key-value echo of the train/loss/sampling configuration.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::span<const std::pair<std::string, std::string>> config_echo);
std::pair<ModelParams, std::vector<std::pair<std::string, std::string>>> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace seqrec
