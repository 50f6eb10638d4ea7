#include "seqrec/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "seqrec/bin_io.hpp"
#include "seqrec/rng.hpp"
#include "seqrec/vecmath.hpp"

namespace seqrec {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'Q', 'R', 'C', 'K', 'P', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Orthonormalize a hidden x hidden gaussian block with modified Gram-Schmidt.
void orthogonal_block(std::span<double> block, std::size_t h, Rng& rng) {
    for (double& v : block) v = rng.gaussian();
    for (std::size_t col = 0; col < h; ++col) {
        for (std::size_t prev = 0; prev < col; ++prev) {
            double proj = 0.0;
            for (std::size_t r = 0; r < h; ++r) proj += block[r * h + col] * block[r * h + prev];
            for (std::size_t r = 0; r < h; ++r) block[r * h + col] -= proj * block[r * h + prev];
        }
        double nrm = 0.0;
        for (std::size_t r = 0; r < h; ++r) nrm += block[r * h + col] * block[r * h + col];
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) {
            // Degenerate column; replace with a unit basis vector.
            for (std::size_t r = 0; r < h; ++r) block[r * h + col] = (r == col % h) ? 1.0 : 0.0;
        } else {
            for (std::size_t r = 0; r < h; ++r) block[r * h + col] /= nrm;
        }
    }
}

}  // namespace

ModelParams init_params(std::size_t hidden, std::size_t dim, std::uint64_t seed) {
    if (hidden == 0 || dim == 0) fail(ErrorCode::InvalidArgument, "hidden and dim must be positive");
    ModelParams p;
    p.hidden = hidden;
    p.dim = dim;
    p.w_x.resize(4 * hidden * dim);
    p.w_h.assign(4 * hidden * hidden, 0.0);
    p.b.assign(4 * hidden, 0.0);
    p.proj.resize(dim * hidden);

    Rng rng(mix64(seed, 0x5e55u));
    const double x_scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& v : p.w_x) v = rng.uniform(-x_scale, x_scale);

    std::vector<double> block(hidden * hidden);
    for (std::size_t gate = 0; gate < 4; ++gate) {
        orthogonal_block(block, hidden, rng);
        for (std::size_t r = 0; r < hidden; ++r) {
            for (std::size_t c = 0; c < hidden; ++c) {
                p.w_h[(gate * hidden + r) * hidden + c] = block[r * hidden + c];
            }
        }
    }
    // Forget-gate bias starts at +1 so early cell states persist.
    for (std::size_t r = 0; r < hidden; ++r) p.b[hidden + r] = 1.0;

    const double p_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& v : p.proj) v = rng.uniform(-p_scale, p_scale);
    return p;
}

ForwardTrace forward(const ModelParams& params, const EmbeddingTable& table,
                     std::span<const ItemIndex> input) {
    const std::size_t h = params.hidden;
    const std::size_t d = params.dim;
    if (input.empty() || input.size() > kMaxInputLength) {
        fail(ErrorCode::InvalidArgument, "forward: sequence length must lie in [1, 100]");
    }
    if (table.dim() != d) fail(ErrorCode::InvalidArgument, "forward: embedding dim mismatch");

    const std::size_t steps = input.size();
    ForwardTrace trace;
    trace.steps = steps;
    trace.hidden = h;
    trace.inputs.assign(input.begin(), input.end());
    trace.gate_i.resize(steps * h);
    trace.gate_f.resize(steps * h);
    trace.gate_g.resize(steps * h);
    trace.gate_o.resize(steps * h);
    trace.cell.resize(steps * h);
    trace.hidden_states.resize(steps * h);
    trace.x.resize(steps * d);

    std::vector<double> pre(4 * h);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto row = table.row(input[t]);  // throws IndexOutOfRange
        for (std::size_t j = 0; j < d; ++j) trace.x[t * d + j] = static_cast<double>(row[j]);

        const double* x_t = trace.x.data() + t * d;
        const double* h_prev = t > 0 ? trace.hidden_states.data() + (t - 1) * h : nullptr;
        for (std::size_t r = 0; r < 4 * h; ++r) {
            double acc = params.b[r];
            const double* wx_row = params.w_x.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) acc += wx_row[j] * x_t[j];
            if (h_prev != nullptr) {
                const double* wh_row = params.w_h.data() + r * h;
                for (std::size_t j = 0; j < h; ++j) acc += wh_row[j] * h_prev[j];
            }
            pre[r] = acc;
        }
        for (std::size_t r = 0; r < h; ++r) {
            const double i_g = sigmoid(pre[r]);
            const double f_g = sigmoid(pre[h + r]);
            const double g_g = std::tanh(pre[2 * h + r]);
            const double o_g = sigmoid(pre[3 * h + r]);
            const double c_prev = t > 0 ? trace.cell[(t - 1) * h + r] : 0.0;
            const double c_t = f_g * c_prev + i_g * g_g;
            const double h_t = o_g * std::tanh(c_t);
            trace.gate_i[t * h + r] = i_g;
            trace.gate_f[t * h + r] = f_g;
            trace.gate_g[t * h + r] = g_g;
            trace.gate_o[t * h + r] = o_g;
            trace.cell[t * h + r] = c_t;
            trace.hidden_states[t * h + r] = h_t;
            if (!std::isfinite(h_t)) fail(ErrorCode::NonFinite, "forward: non-finite activation");
        }
    }

    trace.z.assign(d, 0.0);
    const double* h_last = trace.hidden_states.data() + (steps - 1) * h;
    for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        const double* p_row = params.proj.data() + r * h;
        for (std::size_t j = 0; j < h; ++j) acc += p_row[j] * h_last[j];
        trace.z[r] = acc;
    }
    return trace;
}

std::vector<double> predict(const ModelParams& params, const EmbeddingTable& table,
                            std::span<const ItemIndex> input) {
    return forward(params, table, input).z;
}

void Gradients::resize_like(const ModelParams& params) {
    w_x.assign(params.w_x.size(), 0.0);
    w_h.assign(params.w_h.size(), 0.0);
    b.assign(params.b.size(), 0.0);
    proj.assign(params.proj.size(), 0.0);
}

void Gradients::zero() {
    std::fill(w_x.begin(), w_x.end(), 0.0);
    std::fill(w_h.begin(), w_h.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
    std::fill(proj.begin(), proj.end(), 0.0);
}

void Gradients::add(const Gradients& other) {
    for (std::size_t i = 0; i < w_x.size(); ++i) w_x[i] += other.w_x[i];
    for (std::size_t i = 0; i < w_h.size(); ++i) w_h[i] += other.w_h[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += other.b[i];
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] += other.proj[i];
}

void Gradients::scale_all(double factor) {
    scale(w_x, factor);
    scale(w_h, factor);
    scale(b, factor);
    scale(proj, factor);
}

double Gradients::global_norm() const {
    const double sq = dot(w_x, w_x) + dot(w_h, w_h) + dot(b, b) + dot(proj, proj);
    return std::sqrt(sq);
}

Gradients backward(const ForwardTrace& trace, const ModelParams& params,
                   std::span<const double> d_z) {
    const std::size_t h = params.hidden;
    const std::size_t d = params.dim;
    if (trace.hidden != h || trace.z.size() != d) {
        fail(ErrorCode::InvalidArgument, "backward: trace does not match parameters");
    }

    Gradients grads;
    grads.resize_like(params);

    // dP and dh_T from z = P h_T.
    std::vector<double> dh(h, 0.0);
    const double* h_last = trace.hidden_states.data() + (trace.steps - 1) * h;
    for (std::size_t r = 0; r < d; ++r) {
        const double g = d_z[r];
        double* p_grad_row = grads.proj.data() + r * h;
        const double* p_row = params.proj.data() + r * h;
        for (std::size_t j = 0; j < h; ++j) {
            p_grad_row[j] += g * h_last[j];
            dh[j] += g * p_row[j];
        }
    }

    std::vector<double> dc(h, 0.0);
    std::vector<double> da(4 * h);
    std::vector<double> dh_prev(h);
    for (std::size_t t = trace.steps; t-- > 0;) {
        const double* i_g = trace.gate_i.data() + t * h;
        const double* f_g = trace.gate_f.data() + t * h;
        const double* g_g = trace.gate_g.data() + t * h;
        const double* o_g = trace.gate_o.data() + t * h;
        const double* c_t = trace.cell.data() + t * h;
        const double* c_prev = t > 0 ? trace.cell.data() + (t - 1) * h : nullptr;

        for (std::size_t r = 0; r < h; ++r) {
            const double tanh_c = std::tanh(c_t[r]);
            const double do_g = dh[r] * tanh_c;
            const double dc_r = dc[r] + dh[r] * o_g[r] * (1.0 - tanh_c * tanh_c);
            const double di_g = dc_r * g_g[r];
            const double df_g = dc_r * (c_prev != nullptr ? c_prev[r] : 0.0);
            const double dg_g = dc_r * i_g[r];
            da[r] = di_g * i_g[r] * (1.0 - i_g[r]);
            da[h + r] = df_g * f_g[r] * (1.0 - f_g[r]);
            da[2 * h + r] = dg_g * (1.0 - g_g[r] * g_g[r]);
            da[3 * h + r] = do_g * o_g[r] * (1.0 - o_g[r]);
            dc[r] = dc_r * f_g[r];  // flows to c_{t-1}
        }

        const double* x_t = trace.x.data() + t * d;
        const double* h_prev = t > 0 ? trace.hidden_states.data() + (t - 1) * h : nullptr;
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        for (std::size_t r = 0; r < 4 * h; ++r) {
            const double g = da[r];
            if (g == 0.0) continue;
            double* wx_grad = grads.w_x.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) wx_grad[j] += g * x_t[j];
            grads.b[r] += g;
            if (h_prev != nullptr) {
                double* wh_grad = grads.w_h.data() + r * h;
                const double* wh_row = params.w_h.data() + r * h;
                for (std::size_t j = 0; j < h; ++j) {
                    wh_grad[j] += g * h_prev[j];
                    dh_prev[j] += g * wh_row[j];
                }
            }
        }
        dh = dh_prev;
    }

    if (!all_finite(grads.w_x) || !all_finite(grads.w_h) || !all_finite(grads.b) ||
        !all_finite(grads.proj)) {
        fail(ErrorCode::NonFinite, "backward: non-finite gradient");
    }
    return grads;
}

double clip_gradients(Gradients& grads, double max_norm) {
    const double nrm = grads.global_norm();
    if (max_norm > 0.0 && nrm > max_norm) grads.scale_all(max_norm / nrm);
    return nrm;
}

void validate_train_setup(const TrainConfig& config, const LossSpec& loss,
                          const SamplingSpec& sampling) {
    if (config.hidden == 0) fail(ErrorCode::Config, "hidden_size must be >= 1");
    if (config.batch_size == 0) fail(ErrorCode::Config, "batch_size must be >= 1");
    if (!(config.learning_rate >= 0.0)) fail(ErrorCode::Config, "learning_rate must be >= 0");
    if (!(loss.alpha > 0.0)) fail(ErrorCode::Config, "loss.alpha must be > 0");
    if (loss.beta < 0.0) fail(ErrorCode::Config, "loss.beta must be >= 0");
    if (!(loss.tau > 0.0)) fail(ErrorCode::Config, "loss.tau must be > 0");
    if (sampling.strategy != SamplingStrategy::None) {
        if (loss.kind == LossKind::Cosine) {
            fail(ErrorCode::Config,
                 "the cosine loss takes no negatives; use sampling.strategy = none");
        }
        if (config.batch_size < 2) {
            fail(ErrorCode::Config,
                 "in-batch sampling needs batch_size >= 2 (no negatives exist otherwise)");
        }
        if (sampling.cap == 0 || sampling.pool_cap == 0) {
            fail(ErrorCode::Config, "sampling.cap and sampling.pool_cap must be >= 1");
        }
        if (sampling.strategy == SamplingStrategy::TopK && sampling.k > sampling.pool_cap) {
            fail(ErrorCode::Config, "sampling.k must not exceed sampling.pool_cap");
        }
    } else if (loss.kind != LossKind::Cosine) {
        fail(ErrorCode::Config, std::string(loss_kind_name(loss.kind)) +
                                    " loss needs negatives; use sampling.strategy = in_batch or top_k");
    }
}

namespace {

void apply_sgd(std::span<double> param, std::span<const double> grad, double lr) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

void apply_adam(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, const TrainConfig& config, double bias1, double bias2) {
    const double lr = config.learning_rate;
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * grad[i];
        v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
}

void optimizer_step(ModelParams& params, const Gradients& grads, AdamState& adam,
                    const TrainConfig& config) {
    if (config.optimizer == Optimizer::Sgd) {
        apply_sgd(params.w_x, grads.w_x, config.learning_rate);
        apply_sgd(params.w_h, grads.w_h, config.learning_rate);
        apply_sgd(params.b, grads.b, config.learning_rate);
        apply_sgd(params.proj, grads.proj, config.learning_rate);
        return;
    }
    if (adam.m.w_x.empty()) {
        adam.m.resize_like(params);
        adam.v.resize_like(params);
    }
    ++adam.step;
    const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.step));
    const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.step));
    apply_adam(params.w_x, grads.w_x, adam.m.w_x, adam.v.w_x, config, bias1, bias2);
    apply_adam(params.w_h, grads.w_h, adam.m.w_h, adam.v.w_h, config, bias1, bias2);
    apply_adam(params.b, grads.b, adam.m.b, adam.v.b, config, bias1, bias2);
    apply_adam(params.proj, grads.proj, adam.m.proj, adam.v.proj, config, bias1, bias2);
}

}  // namespace

EpochStats train_epoch(ModelParams& params, AdamState& adam, const EmbeddingTable& table,
                       std::span<const TrainingExample> examples, const LossSpec& loss,
                       const SamplingSpec& sampling, const TrainConfig& config,
                       std::size_t epoch_index) {
    if (examples.empty()) fail(ErrorCode::EmptyInput, "train_epoch: no examples");
    validate_train_setup(config, loss, sampling);

    // Seeded shuffle; batch order is a function of (seed, epoch) only.
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix64(config.seed, 0xb47c4ULL + epoch_index));
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
    Rng sample_rng(mix64(config.seed ^ 0x5a5a5a5aULL, epoch_index));

    EpochStats stats;
    Gradients batch_grads;
    batch_grads.resize_like(params);
    std::vector<TrainingExample> batch;
    batch.reserve(config.batch_size);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        batch.clear();
        for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);

        batch_grads.zero();
        try {
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const ForwardTrace trace = forward(params, table, batch[i].input);
                const ExampleLossResult result =
                    example_loss(trace.z, batch, i, table, loss, sampling, sample_rng);
                loss_sum += result.loss;
                if (result.fell_back_to_cosine) ++stats.cosine_fallbacks;
                const Gradients example_grads = backward(trace, params, result.d_zi);
                batch_grads.add(example_grads);
            }
        } catch (const SeqrecError& e) {
            if (e.code() == ErrorCode::NonFinite) {
                fail(ErrorCode::NonFinite,
                     "training aborted at batch " + std::to_string(batch_index) + ": " + e.what());
            }
            throw;
        }
        batch_grads.scale_all(1.0 / static_cast<double>(batch.size()));
        clip_gradients(batch_grads, config.gradient_clip_norm);
        optimizer_step(params, batch_grads, adam, config);
    }

    stats.examples = examples.size();
    stats.mean_loss = loss_sum / static_cast<double>(examples.size());
    return stats;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::span<const std::pair<std::string, std::string>> config_echo) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open checkpoint for writing: " + path.string());
    bin::write_magic(os, kCheckpointMagic);
    bin::write_u32(os, kCheckpointVersion);
    bin::write_u32(os, static_cast<std::uint32_t>(params.hidden));
    bin::write_u32(os, static_cast<std::uint32_t>(params.dim));
    const auto write_block = [&](const std::vector<double>& block) {
        bin::write_u64(os, block.size());
        for (const double v : block) bin::write_f32(os, static_cast<float>(v));
    };
    write_block(params.w_x);
    write_block(params.w_h);
    write_block(params.b);
    write_block(params.proj);
    bin::write_u32(os, static_cast<std::uint32_t>(config_echo.size()));
    for (const auto& [key, value] : config_echo) {
        bin::write_string(os, key);
        bin::write_string(os, value);
    }
    if (!os) fail(ErrorCode::Io, "failed writing checkpoint: " + path.string());
}

std::pair<ModelParams, std::vector<std::pair<std::string, std::string>>> load_checkpoint(
    const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open checkpoint: " + path.string());
    bin::expect_magic(is, kCheckpointMagic, "seqrec checkpoint");
    const std::uint32_t version = bin::read_u32(is);
    if (version != kCheckpointVersion) fail(ErrorCode::Parse, path.string() + ": unsupported checkpoint version");
    ModelParams params;
    params.hidden = bin::read_u32(is);
    params.dim = bin::read_u32(is);
    const auto read_block = [&](std::vector<double>& block, std::size_t expected) {
        const std::uint64_t n = bin::read_u64(is);
        if (n != expected) fail(ErrorCode::Parse, path.string() + ": checkpoint block size mismatch");
        block.resize(n);
        for (auto& v : block) v = static_cast<double>(bin::read_f32(is));
    };
    read_block(params.w_x, 4 * params.hidden * params.dim);
    read_block(params.w_h, 4 * params.hidden * params.hidden);
    read_block(params.b, 4 * params.hidden);
    read_block(params.proj, params.dim * params.hidden);
    const std::uint32_t n_echo = bin::read_u32(is);
    std::vector<std::pair<std::string, std::string>> echo;
    echo.reserve(n_echo);
    for (std::uint32_t i = 0; i < n_echo; ++i) {
        auto key = bin::read_string(is);
        auto value = bin::read_string(is);
        echo.emplace_back(std::move(key), std::move(value));
    }
    return {std::move(params), std::move(echo)};
}

}  // namespace seqrec
