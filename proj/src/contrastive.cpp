#include "seqrec/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "seqrec/vecmath.hpp"

namespace seqrec {

LossGrad cosine_loss(std::span<const double> zi, std::span<const double> zt) {
    const double sim = cosine_sim(zi, zt);
    LossGrad out;
    out.loss = -sim;
    out.d_zi.resize(zi.size());
    cosine_sim_grad(zi, zt, sim, out.d_zi);
    for (double& g : out.d_zi) g = -g;
    return out;
}

LossGrad weighted_loss(std::span<const double> zi, std::span<const double> zt,
                       std::span<const std::vector<double>> negatives, double alpha, double beta) {
    if (negatives.empty()) fail(ErrorCode::EmptyInput, "weighted_loss: empty negative set");
    const std::size_t d = zi.size();
    LossGrad out;
    out.d_zi.assign(d, 0.0);
    std::vector<double> grad(d);

    const double sim_t = cosine_sim(zi, zt);
    cosine_sim_grad(zi, zt, sim_t, grad);
    out.loss = -alpha * sim_t;
    axpy(-alpha, grad, out.d_zi);

    const double inv_n = 1.0 / static_cast<double>(negatives.size());
    for (const auto& zj : negatives) {
        const double sim_j = cosine_sim(zi, zj);
        cosine_sim_grad(zi, zj, sim_j, grad);
        out.loss += beta * inv_n * sim_j;
        axpy(beta * inv_n, grad, out.d_zi);
    }
    return out;
}

LossGrad cross_entropy_loss(std::span<const double> zi, std::span<const double> zt,
                            std::span<const std::vector<double>> negatives, double tau,
                            bool denominator_includes_positive) {
    if (negatives.empty()) fail(ErrorCode::EmptyInput, "cross_entropy_loss: empty negative set");
    if (!(tau > 0.0)) fail(ErrorCode::InvalidArgument, "cross_entropy_loss: tau must be positive");
    const std::size_t d = zi.size();
    const std::size_t n = negatives.size();

    // Scaled similarities; slot 0 is the positive.
    std::vector<double> scores(n + 1);
    scores[0] = cosine_sim(zi, zt) / tau;
    for (std::size_t j = 0; j < n; ++j) scores[j + 1] = cosine_sim(zi, negatives[j]) / tau;

    const std::size_t denom_begin = denominator_includes_positive ? 0 : 1;
    double max_score = scores[denom_begin];
    for (std::size_t c = denom_begin; c < scores.size(); ++c) max_score = std::max(max_score, scores[c]);

    double sum_exp = 0.0;
    for (std::size_t c = denom_begin; c < scores.size(); ++c) sum_exp += std::exp(scores[c] - max_score);
    const double log_denominator = max_score + std::log(sum_exp);

    LossGrad out;
    out.loss = log_denominator - scores[0];
    out.d_zi.assign(d, 0.0);
    std::vector<double> grad(d);

    // dL/d score_c = softmax_c (over the denominator set) - [c == positive]
    const double inv_tau = 1.0 / tau;
    {
        const double p = denominator_includes_positive ? std::exp(scores[0] - log_denominator) : 0.0;
        cosine_sim_grad(zi, zt, scores[0] * tau, grad);
        axpy((p - 1.0) * inv_tau, grad, out.d_zi);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double p = std::exp(scores[j + 1] - log_denominator);
        cosine_sim_grad(zi, negatives[j], scores[j + 1] * tau, grad);
        axpy(p * inv_tau, grad, out.d_zi);
    }
    return out;
}

namespace {

std::vector<std::vector<double>> gather_negative_rows(const NegativeSet& negatives,
                                                      const EmbeddingTable& table) {
    std::vector<std::vector<double>> rows;
    rows.reserve(negatives.size());
    for (const ItemIndex item : negatives.items) rows.push_back(to_double(table.row(item)));
    return rows;
}

}  // namespace

LossGrad weighted_loss(std::span<const double> zi, std::span<const double> zt,
                       const NegativeSet& negatives, const EmbeddingTable& table,
                       double alpha, double beta) {
    const auto rows = gather_negative_rows(negatives, table);
    return weighted_loss(zi, zt, rows, alpha, beta);
}

LossGrad cross_entropy_loss(std::span<const double> zi, std::span<const double> zt,
                            const NegativeSet& negatives, const EmbeddingTable& table, double tau,
                            bool denominator_includes_positive) {
    const auto rows = gather_negative_rows(negatives, table);
    return cross_entropy_loss(zi, zt, rows, tau, denominator_includes_positive);
}

NegativeSet sample_in_batch(std::span<const TrainingExample> batch, std::size_t index,
                            std::size_t cap, Rng& rng) {
    if (batch.size() < 2) fail(ErrorCode::InvalidArgument, "sample_in_batch: batch must hold >= 2 examples");
    if (index >= batch.size()) fail(ErrorCode::IndexOutOfRange, "sample_in_batch: index out of range");
    if (cap == 0) fail(ErrorCode::InvalidArgument, "sample_in_batch: cap must be >= 1");

    const TrainingExample& current = batch[index];
    std::vector<ItemIndex> pool;
    pool.reserve(batch.size() - 1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (i != index) pool.push_back(batch[i].label);
    }
    // Canonical order before sampling keeps the draw a function of the seed
    // alone, not of batch member order.
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    // Exclude the example's own label and everything it has already seen.
    std::vector<ItemIndex> excluded(current.input.begin(), current.input.end());
    excluded.push_back(current.label);
    std::sort(excluded.begin(), excluded.end());
    std::erase_if(pool, [&](ItemIndex item) {
        return std::binary_search(excluded.begin(), excluded.end(), item);
    });

    NegativeSet out;
    if (pool.size() <= cap) {
        out.items = std::move(pool);
        return out;
    }
    // Partial Fisher-Yates: uniform sample of `cap` without replacement.
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(cap);
    std::sort(pool.begin(), pool.end());
    out.items = std::move(pool);
    return out;
}

NegativeSet filter_top_k(std::span<const double> zi, const NegativeSet& pool, std::size_t k,
                         const EmbeddingTable& table) {
    if (k == 0) fail(ErrorCode::InvalidArgument, "filter_top_k: k must be >= 1");
    if (pool.size() <= k) return pool;

    const double zi_norm = norm(zi);
    if (zi_norm == 0.0) fail(ErrorCode::ZeroVector, "filter_top_k: prediction is a zero vector");

    std::vector<std::pair<double, ItemIndex>> scored;
    scored.reserve(pool.size());
    for (const ItemIndex item : pool.items) {
        scored.emplace_back(cosine_sim_f32(zi, zi_norm, table.row(item)), item);
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                      [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });
    NegativeSet out;
    out.items.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.items.push_back(scored[i].second);
    return out;
}

ExampleLossResult example_loss(std::span<const double> zi, std::span<const TrainingExample> batch,
                               std::size_t index, const EmbeddingTable& table, const LossSpec& loss,
                               const SamplingSpec& sampling, Rng& rng) {
    const TrainingExample& current = batch[index];
    const std::vector<double> zt = to_double(table.row(current.label));

    NegativeSet negatives;
    if (loss.kind != LossKind::Cosine && sampling.strategy != SamplingStrategy::None) {
        const std::size_t pool_cap =
            sampling.strategy == SamplingStrategy::TopK ? sampling.pool_cap : sampling.cap;
        negatives = sample_in_batch(batch, index, pool_cap, rng);
        if (sampling.strategy == SamplingStrategy::TopK && !negatives.empty()) {
            negatives = filter_top_k(zi, negatives, sampling.k, table);
        }
    }

    ExampleLossResult out;
    out.negatives_used = negatives.size();
    if (loss.kind == LossKind::Cosine || negatives.empty()) {
        out.fell_back_to_cosine = loss.kind != LossKind::Cosine;
        LossGrad lg = cosine_loss(zi, zt);
        out.loss = lg.loss;
        out.d_zi = std::move(lg.d_zi);
        return out;
    }
    LossGrad lg = loss.kind == LossKind::Weighted
                      ? weighted_loss(zi, zt, negatives, table, loss.alpha, loss.beta)
                      : cross_entropy_loss(zi, zt, negatives, table, loss.tau,
                                           loss.denominator_includes_positive);
    out.loss = lg.loss;
    out.d_zi = std::move(lg.d_zi);
    return out;
}

const char* loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::Cosine: return "cosine";
        case LossKind::Weighted: return "weighted";
        case LossKind::CrossEntropy: return "cross_entropy";
    }
    return "unknown";
}

const char* sampling_strategy_name(SamplingStrategy strategy) {
    switch (strategy) {
        case SamplingStrategy::None: return "none";
        case SamplingStrategy::InBatch: return "in_batch";
        case SamplingStrategy::TopK: return "top_k";
    }
    return "unknown";
}

}  // namespace seqrec
