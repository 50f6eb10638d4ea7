#include "seqrec/skipgram.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "seqrec/rng.hpp"
#include "seqrec/vecmath.hpp"

namespace seqrec {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log sigmoid(x), stable on both tails
double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double checked_dot(std::span<const double> a, std::span<const double> b) {
    const double v = dot(a, b);
    if (!std::isfinite(v)) {
        fail(ErrorCode::NonFinite, "skip-gram update diverged (non-finite activation); lower the learning rate");
    }
    return v;
}

}  // namespace

Vocab build_vocab(std::span<const std::vector<ItemIndex>> sequences, std::size_t n_items,
                  std::size_t min_count) {
    if (sequences.empty()) fail(ErrorCode::EmptyVocab, "build_vocab: no sequences");
    Vocab vocab;
    vocab.counts.assign(n_items, 0);
    for (const auto& seq : sequences) {
        for (const ItemIndex item : seq) {
            if (item >= n_items) fail(ErrorCode::IndexOutOfRange, "build_vocab: item index out of range");
            ++vocab.counts[item];
        }
    }
    vocab.noise_dist.assign(n_items, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n_items; ++i) {
        if (vocab.counts[i] >= min_count && vocab.counts[i] > 0) {
            vocab.retained.push_back(static_cast<ItemIndex>(i));
            const double w = std::pow(static_cast<double>(vocab.counts[i]), 0.75);
            vocab.noise_dist[i] = w;
            total += w;
            vocab.total_positions += vocab.counts[i];
        }
    }
    if (vocab.retained.empty()) fail(ErrorCode::EmptyVocab, "build_vocab: no items meet min_count");
    for (double& p : vocab.noise_dist) p /= total;
    return vocab;
}

double sg_pair_loss(std::span<const double> center, std::span<const double> context,
                    std::span<const std::vector<double>> negatives) {
    double loss = -log_sigmoid(dot(center, context));
    for (const auto& neg : negatives) loss -= log_sigmoid(-dot(center, neg));
    return loss;
}

void sg_pair_grad(std::span<const double> center, std::span<const double> context,
                  std::span<const std::vector<double>> negatives, std::span<double> grad_center,
                  std::span<double> grad_context, std::span<std::vector<double>> grad_negatives) {
    const std::size_t d = center.size();
    const double g_pos = sigmoid(checked_dot(center, context)) - 1.0;
    for (std::size_t j = 0; j < d; ++j) {
        grad_center[j] = g_pos * context[j];
        grad_context[j] = g_pos * center[j];
    }
    for (std::size_t k = 0; k < negatives.size(); ++k) {
        const double g_neg = sigmoid(checked_dot(center, negatives[k]));
        for (std::size_t j = 0; j < d; ++j) {
            grad_center[j] += g_neg * negatives[k][j];
            grad_negatives[k][j] = g_neg * center[j];
        }
    }
}

std::vector<double> initial_input_vectors(std::size_t n_items, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> table(n_items * dim);
    const double half = 0.5 / static_cast<double>(dim);
    for (double& v : table) v = rng.uniform(-half, half);
    return table;
}

namespace {

struct NoiseSampler {
    // Cumulative distribution over retained items.
    std::vector<double> cumulative;
    std::vector<ItemIndex> items;

    explicit NoiseSampler(const Vocab& vocab) {
        items = vocab.retained;
        cumulative.reserve(items.size());
        double acc = 0.0;
        for (const ItemIndex item : items) {
            acc += vocab.noise_dist[item];
            cumulative.push_back(acc);
        }
        cumulative.back() = 1.0;
    }

    ItemIndex draw(Rng& rng) const {
        const double u = rng.next_double();
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t pos = std::min<std::size_t>(
            static_cast<std::size_t>(it - cumulative.begin()), items.size() - 1);
        return items[pos];
    }
};

struct TrainShard {
    std::span<const std::vector<ItemIndex>> sequences;
    std::size_t begin = 0;
    std::size_t stride = 1;
};

void train_shard(const TrainShard& shard, const Vocab& vocab, const NoiseSampler& sampler,
                 const SgConfig& config, std::vector<double>& input_vecs,
                 std::vector<double>& context_vecs, std::atomic<std::uint64_t>& processed,
                 std::uint64_t total_steps, Rng rng) {
    const std::size_t d = config.dim;
    std::vector<double> grad_center(d), grad_context(d);
    std::vector<std::vector<double>> neg_rows(config.negatives, std::vector<double>(d));
    std::vector<std::vector<double>> grad_negs(config.negatives, std::vector<double>(d));
    std::vector<ItemIndex> neg_items(config.negatives);
    std::vector<ItemIndex> filtered;

    for (std::size_t s = shard.begin; s < shard.sequences.size(); s += shard.stride) {
        filtered.clear();
        for (const ItemIndex item : shard.sequences[s]) {
            if (!vocab.is_retained(item)) continue;
            if (config.subsample_threshold > 0.0) {
                const double f = static_cast<double>(vocab.counts[item]) /
                                 static_cast<double>(vocab.total_positions);
                const double keep = (std::sqrt(f / config.subsample_threshold) + 1.0) *
                                    (config.subsample_threshold / f);
                if (keep < 1.0 && rng.next_double() > keep) continue;
            }
            filtered.push_back(item);
        }
        for (std::size_t pos = 0; pos < filtered.size(); ++pos) {
            const std::uint64_t done = processed.fetch_add(1, std::memory_order_relaxed);
            const double progress = static_cast<double>(done) / static_cast<double>(total_steps);
            const double lr = config.learning_rate * std::max(1e-4, 1.0 - progress);

            const ItemIndex center = filtered[pos];
            const std::span<double> u{input_vecs.data() + static_cast<std::size_t>(center) * d, d};
            const std::size_t lo = pos >= config.window ? pos - config.window : 0;
            const std::size_t hi = std::min(filtered.size(), pos + config.window + 1);
            for (std::size_t q = lo; q < hi; ++q) {
                if (q == pos) continue;
                const ItemIndex context = filtered[q];
                const std::span<double> v{
                    context_vecs.data() + static_cast<std::size_t>(context) * d, d};

                std::size_t n_negs = 0;
                for (std::size_t attempt = 0; attempt < 2 * config.negatives + 8 && n_negs < config.negatives;
                     ++attempt) {
                    const ItemIndex neg = sampler.draw(rng);
                    if (neg == context) continue;
                    neg_items[n_negs] = neg;
                    std::copy_n(context_vecs.data() + static_cast<std::size_t>(neg) * d, d,
                                neg_rows[n_negs].data());
                    ++n_negs;
                }

                sg_pair_grad(u, v, std::span(neg_rows.data(), n_negs), grad_center, grad_context,
                             std::span(grad_negs.data(), n_negs));
                for (std::size_t j = 0; j < d; ++j) {
                    u[j] -= lr * grad_center[j];
                    v[j] -= lr * grad_context[j];
                }
                for (std::size_t k = 0; k < n_negs; ++k) {
                    double* vn = context_vecs.data() + static_cast<std::size_t>(neg_items[k]) * d;
                    for (std::size_t j = 0; j < d; ++j) vn[j] -= lr * grad_negs[k][j];
                }
            }
        }
    }
}

}  // namespace

EmbeddingTable train_skipgram(std::span<const std::vector<ItemIndex>> sequences,
                              std::vector<std::string> items, const SgConfig& config) {
    if (config.dim < 2) fail(ErrorCode::InvalidArgument, "skip-gram dim must be >= 2");
    if (config.window == 0) fail(ErrorCode::InvalidArgument, "skip-gram window must be >= 1");
    if (!(config.learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning_rate must be positive");
    const std::size_t n_items = items.size();
    const Vocab vocab = build_vocab(sequences, n_items, config.min_count);

    std::vector<double> input_vecs = initial_input_vectors(n_items, config.dim, config.seed);
    std::vector<double> context_vecs(n_items * config.dim, 0.0);

    if (config.epochs > 0) {
        const NoiseSampler sampler(vocab);
        const std::uint64_t total_steps =
            std::max<std::uint64_t>(1, vocab.total_positions * config.epochs);
        std::atomic<std::uint64_t> processed{0};

        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            if (config.threads <= 1) {
                TrainShard shard{sequences, 0, 1};
                train_shard(shard, vocab, sampler, config, input_vecs, context_vecs, processed,
                            total_steps, Rng(mix64(config.seed, epoch + 1)));
            } else {
                // Lock-free parallel mode: shards race on the shared tables,
                // so results are not reproducible run to run.
                std::vector<std::thread> workers;
                workers.reserve(config.threads);
                std::exception_ptr first_error;
                std::mutex error_mutex;
                for (std::size_t t = 0; t < config.threads; ++t) {
                    workers.emplace_back([&, t] {
                        try {
                            TrainShard shard{sequences, t, config.threads};
                            train_shard(shard, vocab, sampler, config, input_vecs, context_vecs,
                                        processed, total_steps,
                                        Rng(mix64(config.seed, (epoch + 1) * 1000 + t)));
                        } catch (...) {
                            const std::scoped_lock lock(error_mutex);
                            if (!first_error) first_error = std::current_exception();
                        }
                    });
                }
                for (auto& w : workers) w.join();
                if (first_error) std::rethrow_exception(first_error);
            }
        }
    }

    std::vector<float> data(n_items * config.dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(input_vecs[i])) {
            fail(ErrorCode::NonFinite, "skip-gram training diverged; lower the learning rate");
        }
        data[i] = static_cast<float>(input_vecs[i]);
    }
    return EmbeddingTable(std::move(items), config.dim, std::move(data));
}

}  // namespace seqrec
