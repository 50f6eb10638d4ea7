// Acceptance suite: runs every release criterion at its pinned tolerance and
// prints one PASS/FAIL line per criterion. Exit code 0 only when all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "seqrec/ann.hpp"
#include "seqrec/contrastive.hpp"
#include "seqrec/lstm.hpp"
#include "seqrec/metrics.hpp"
#include "seqrec/pipeline.hpp"
#include "seqrec/rng.hpp"
#include "seqrec/vecmath.hpp"

namespace fs = std::filesystem;
using namespace seqrec;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
std::vector<std::string> g_details;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int number, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s - %s\n", pass ? "PASS" : "FAIL", number, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::vector<double> random_vector(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double worst_mismatch(std::span<const double> analytic, std::span<const double> numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1e-6});
        worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

EmbeddingTable random_table(std::size_t n_items, std::size_t dim, std::uint64_t seed) {
    std::vector<std::string> items;
    std::vector<float> data(n_items * dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < n_items; ++i) {
        items.push_back("i" + std::to_string(i));
        for (std::size_t j = 0; j < dim; ++j) data[i * dim + j] = static_cast<float>(rng.gaussian());
    }
    return EmbeddingTable(std::move(items), dim, std::move(data));
}

std::string file_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return "<missing:" + path.string() + ">";
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. gradient suite: losses and LSTM blocks vs central finite differences

bool gradient_suite(std::string& detail) {
    const auto start = Clock::now();
    const double tol = 1e-4;
    const double step = 1e-5;
    double worst = 0.0;
    Rng rng(20260808);

    // losses, 100 random instances each (d=6, N<=5)
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 6;
        const auto zi = random_vector(rng, d);
        const auto zt = random_vector(rng, d);
        const std::size_t n_negs = 1 + rng.next_below(5);
        std::vector<std::vector<double>> negs;
        for (std::size_t k = 0; k < n_negs; ++k) negs.push_back(random_vector(rng, d));

        const auto fd = [&](const std::function<double(std::span<const double>)>& f,
                            std::vector<double> x) {
            std::vector<double> grad(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double keep = x[i];
                x[i] = keep + step;
                const double hi = f(x);
                x[i] = keep - step;
                const double lo = f(x);
                x[i] = keep;
                grad[i] = (hi - lo) / (2.0 * step);
            }
            return grad;
        };

        const LossGrad cos_lg = cosine_loss(zi, zt);
        worst = std::max(worst, worst_mismatch(cos_lg.d_zi, fd([&](std::span<const double> x) {
            return cosine_loss(x, zt).loss;
        }, zi)));

        const LossGrad w_lg = weighted_loss(zi, zt, negs, 2.0, 1.0);
        worst = std::max(worst, worst_mismatch(w_lg.d_zi, fd([&](std::span<const double> x) {
            return weighted_loss(x, zt, negs, 2.0, 1.0).loss;
        }, zi)));

        const LossGrad ce_lg = cross_entropy_loss(zi, zt, negs, 0.05, true);
        worst = std::max(worst, worst_mismatch(ce_lg.d_zi, fd([&](std::span<const double> x) {
            return cross_entropy_loss(x, zt, negs, 0.05, true).loss;
        }, zi)));
    }

    // LSTM parameter blocks, 100 random instances (h=4, d=6, 3-step input)
    const EmbeddingTable table = random_table(30, 6, 99);
    for (int trial = 0; trial < 100; ++trial) {
        ModelParams params = init_params(4, 6, 1000 + static_cast<std::uint64_t>(trial));
        std::vector<ItemIndex> input = {static_cast<ItemIndex>(rng.next_below(30)),
                                        static_cast<ItemIndex>(rng.next_below(30)),
                                        static_cast<ItemIndex>(rng.next_below(30))};
        const auto zt = random_vector(rng, 6);
        const std::size_t n_negs = 1 + rng.next_below(5);
        std::vector<std::vector<double>> negs;
        for (std::size_t k = 0; k < n_negs; ++k) negs.push_back(random_vector(rng, 6));

        const int which = trial % 3;
        const auto loss_at_z = [&](std::span<const double> z) -> LossGrad {
            if (which == 0) return cosine_loss(z, zt);
            if (which == 1) return weighted_loss(z, zt, negs, 2.0, 1.0);
            return cross_entropy_loss(z, zt, negs, 0.05, true);
        };

        const ForwardTrace trace = forward(params, table, input);
        const Gradients analytic = backward(trace, params, loss_at_z(trace.z).d_zi);

        const auto loss_now = [&]() { return loss_at_z(forward(params, table, input).z).loss; };
        const auto check_block = [&](std::vector<double>& block, const std::vector<double>& grads) {
            for (std::size_t i = 0; i < block.size(); ++i) {
                const double keep = block[i];
                block[i] = keep + step;
                const double hi = loss_now();
                block[i] = keep - step;
                const double lo = loss_now();
                block[i] = keep;
                const double numeric = (hi - lo) / (2.0 * step);
                const double denom = std::max({std::fabs(numeric), std::fabs(grads[i]), 1e-6});
                worst = std::max(worst, std::fabs(numeric - grads[i]) / denom);
            }
        };
        check_block(params.w_x, analytic.w_x);
        check_block(params.w_h, analytic.w_h);
        check_block(params.b, analytic.b);
        check_block(params.proj, analytic.proj);
    }

    const double elapsed = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "worst relative error %.3g (tol %.0e), %.1f s (limit 30 s)", worst,
                  tol, elapsed);
    detail = buf;
    return worst < tol && elapsed < 30.0;
}

// ---------------------------------------------------------------------------
// 2. metric oracles, exact to 1e-12

bool metric_oracles(std::string& detail) {
    const double tol = 1e-12;
    double worst = 0.0;
    const auto track = [&](double got, double want) { worst = std::max(worst, std::fabs(got - want)); };

    RecommendationRun rank1;
    rank1.n_catalog = 10;
    rank1.entries.push_back({{7, 1, 2}, 7});
    track(ndcg_at_10(rank1), 1.0);

    RecommendationRun rank3;
    rank3.n_catalog = 10;
    rank3.entries.push_back({{1, 2, 7}, 7});
    track(ndcg_at_10(rank3), 0.5);

    RecommendationRun absent;
    absent.n_catalog = 10;
    absent.entries.push_back({{1, 2, 3}, 7});
    track(ndcg_at_10(absent), 0.0);

    track(gini(std::vector<std::uint64_t>(25, 4)), 0.0);
    std::vector<std::uint64_t> one_hot(10, 0);
    one_hot[3] = 9;
    track(gini(one_hot), 0.9);
    track(gini(std::vector<std::uint64_t>{0, 0, 1, 1}), 0.5);

    std::vector<std::uint64_t> exposure(10, 0);
    exposure[0] = 2;
    exposure[4] = 1;
    exposure[9] = 5;
    track(coverage(exposure), 0.3);
    track(coverage(std::vector<std::uint64_t>(7, 1)), 1.0);
    track(coverage(std::vector<std::uint64_t>(7, 0)), 0.0);

    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst absolute error %.3g (tol 1e-12)", worst);
    detail = buf;
    return worst < tol;
}

// ---------------------------------------------------------------------------
// 3. sampling correctness over 1000 random batches

bool sampling_correctness(std::string& detail) {
    Rng rng(31337);
    Rng sample_rng(271828);
    const EmbeddingTable table = random_table(60, 8, 3);
    std::size_t violations = 0;
    std::size_t checked = 0;

    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t batch_size = 2 + rng.next_below(40);
        std::vector<TrainingExample> batch;
        for (std::size_t i = 0; i < batch_size; ++i) {
            TrainingExample ex;
            ex.user_id = "u" + std::to_string(i);
            const std::size_t len = 1 + rng.next_below(8);
            for (std::size_t j = 0; j < len; ++j) {
                ex.input.push_back(static_cast<ItemIndex>(rng.next_below(60)));
            }
            ex.label = static_cast<ItemIndex>(rng.next_below(60));
            batch.push_back(std::move(ex));
        }
        const std::size_t index = rng.next_below(batch_size);
        const std::size_t cap = 1 + rng.next_below(12);
        const NegativeSet pool = sample_in_batch(batch, index, cap, sample_rng);
        ++checked;

        const auto& current = batch[index];
        if (pool.size() > cap) ++violations;
        std::set<ItemIndex> unique(pool.items.begin(), pool.items.end());
        if (unique.size() != pool.size()) ++violations;
        for (const ItemIndex item : pool.items) {
            if (item == current.label) ++violations;
            if (std::find(current.input.begin(), current.input.end(), item) != current.input.end()) {
                ++violations;
            }
        }

        // top-k filter vs an independent repeated-argmax oracle
        if (!pool.empty()) {
            const auto zi = random_vector(rng, 8);
            const std::size_t k = 1 + rng.next_below(pool.size());
            const NegativeSet filtered = filter_top_k(zi, pool, k, table);

            const double zn = norm(zi);
            std::vector<std::pair<double, ItemIndex>> scored;
            for (const ItemIndex item : pool.items) {
                scored.emplace_back(cosine_sim_f32(zi, zn, table.row(item)), item);
            }
            std::vector<ItemIndex> expected;
            std::vector<bool> used(scored.size(), false);
            while (expected.size() < std::min(k, scored.size())) {
                std::size_t best = scored.size();
                for (std::size_t i = 0; i < scored.size(); ++i) {
                    if (used[i]) continue;
                    if (best == scored.size() || scored[i].first > scored[best].first ||
                        (scored[i].first == scored[best].first && scored[i].second < scored[best].second)) {
                        best = i;
                    }
                }
                used[best] = true;
                expected.push_back(scored[best].second);
            }
            std::vector<ItemIndex> got = filtered.items;
            std::sort(got.begin(), got.end());
            std::sort(expected.begin(), expected.end());
            if (got != expected) ++violations;
        }
    }

    char buf[96];
    std::snprintf(buf, sizeof(buf), "%zu batches checked, %zu violations", checked, violations);
    detail = buf;
    return violations == 0;
}

// ---------------------------------------------------------------------------
// 4. ANN fidelity: exhaustive equality at unlimited budget, recall at default

bool ann_fidelity(std::string& detail) {
    Rng rng(424242);
    std::size_t mismatches = 0;
    // exhaustive equality on every catalog size 1..500
    for (std::size_t n = 1; n <= 500; ++n) {
        const EmbeddingTable table = random_table(n, 8, 5000 + n);
        const RpForest forest = RpForest::build(table, 4, 8, 70 + n);
        for (int q = 0; q < 3; ++q) {
            const auto query_vec = random_vector(rng, 8);
            const QueryResult approx = forest.query(query_vec, 10, n);
            const QueryResult exact = exact_query(table, query_vec, 10);
            if (approx.size() != exact.size()) {
                ++mismatches;
                continue;
            }
            for (std::size_t i = 0; i < approx.size(); ++i) {
                if (approx[i].item != exact[i].item || approx[i].similarity != exact[i].similarity) {
                    ++mismatches;
                    break;
                }
            }
        }
    }

    // recall at the default budget on 2000 random 32-d points
    const EmbeddingTable table = random_table(2000, 32, 777);
    const RpForest forest = RpForest::build(table, 16, 32, 123);
    double recall_total = 0.0;
    const int n_queries = 200;
    for (int q = 0; q < n_queries; ++q) {
        const auto query_vec = random_vector(rng, 32);
        const QueryResult approx = forest.query(query_vec, 10, 0);
        const QueryResult exact = exact_query(table, query_vec, 10);
        std::set<ItemIndex> truth;
        for (const auto& scored : exact) truth.insert(scored.item);
        std::size_t hits = 0;
        for (const auto& scored : approx) hits += truth.count(scored.item);
        recall_total += static_cast<double>(hits) / static_cast<double>(truth.size());
    }
    const double recall = recall_total / n_queries;

    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu mismatches over catalogs 1..500; mean recall@10 %.4f (need >= 0.9)",
                  mismatches, recall);
    detail = buf;
    return mismatches == 0 && recall >= 0.9;
}

// ---------------------------------------------------------------------------
// 5..7 share the synth pipeline runs

struct PipelineOutcome {
    EvalReport report;
    fs::path out_dir;
};

RunConfig desk_config(const fs::path& out_dir) {
    RunConfig config;
    config.set("out_dir", out_dir.string());
    config.set("synth.n_items", "2000");
    config.set("synth.n_users", "5000");
    config.set("synth.n_communities", "20");
    config.set("synth.seed", "11");
    // Long-tail regime: strong popularity skew and noisy cart signal, the
    // conditions under which the production system exhibits its popularity
    // bias and contrastive sampling pays off.
    config.set("synth.zipf_exponent", "1.5");
    config.set("synth.add_to_cart_prob", "0.6");
    config.set("embeddings.dim", "24");
    config.set("embeddings.epochs", "6");
    config.set("embeddings.seed", "11");
    config.set("model.hidden_size", "32");
    config.set("model.batch_size", "128");
    config.set("model.epochs", "10");
    config.set("model.seed", "11");
    config.set("ingest.split_seed", "11");
    config.set("ann.seed", "11");
    return config;
}

PipelineOutcome run_desk_pipeline(const fs::path& out_dir, bool contrastive) {
    RunConfig config = desk_config(out_dir);
    if (contrastive) {
        config.set("loss.kind", "cross_entropy");
        config.set("sampling.strategy", "in_batch");
        config.set("sampling.cap", "100");
    }
    pipeline::run_pipeline(config);
    const auto artifacts = pipeline::artifacts_for(config);
    return PipelineOutcome{load_report(artifacts.report()), out_dir};
}

bool directional_reproduction(const PipelineOutcome& baseline, const PipelineOutcome& contrastive,
                              double elapsed_seconds, std::string& detail) {
    const double coverage_gain =
        (contrastive.report.coverage - baseline.report.coverage) / baseline.report.coverage;
    const double gini_drop = (baseline.report.gini - contrastive.report.gini) / baseline.report.gini;
    const double ndcg_change =
        (contrastive.report.ndcg_at_10 - baseline.report.ndcg_at_10) / baseline.report.ndcg_at_10;

    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "coverage %.4f -> %.4f (%+.1f%%, need >= +10%%); gini %.4f -> %.4f (%+.2f%%, need <= "
                  "-2%%); ndcg %.4f -> %.4f (%+.1f%%, floor -10%%); %.0f s (limit 600 s)",
                  baseline.report.coverage, contrastive.report.coverage, 100.0 * coverage_gain,
                  baseline.report.gini, contrastive.report.gini, -100.0 * gini_drop,
                  baseline.report.ndcg_at_10, contrastive.report.ndcg_at_10, 100.0 * ndcg_change,
                  elapsed_seconds);
    detail = buf;
    return coverage_gain >= 0.10 && gini_drop >= 0.02 && ndcg_change >= -0.10 &&
           elapsed_seconds <= 600.0;
}

bool determinism(const fs::path& dir_a, const fs::path& dir_b, std::string& detail) {
    const std::vector<std::string> names = {"events.csv",      "embeddings.bin",
                                            "model.ckpt",      "eval_report.txt",
                                            "rank_frequency.tsv"};
    std::string mismatched;
    for (const auto& name : names) {
        if (file_bytes(dir_a / name) != file_bytes(dir_b / name)) {
            mismatched += mismatched.empty() ? name : ", " + name;
        }
    }
    detail = mismatched.empty() ? "embedding file, checkpoint and reports byte-identical across reruns"
                                : "byte mismatch in: " + mismatched;
    return mismatched.empty();
}

bool long_tail_audit(const PipelineOutcome& baseline, std::string& detail) {
    // the (rank, count) rows come from the run's rank_frequency.tsv artifact
    std::vector<RankCount> rows;
    {
        std::ifstream is(baseline.out_dir / "rank_frequency.tsv");
        std::string line;
        std::getline(is, line);  // header
        while (std::getline(is, line)) {
            const auto tab = line.find('\t');
            if (tab == std::string::npos) continue;
            rows.push_back(RankCount{static_cast<std::uint32_t>(std::stoul(line.substr(0, tab))),
                                     std::stoull(line.substr(tab + 1))});
        }
    }
    if (rows.size() < 3) {
        detail = "rank-frequency report too small";
        return false;
    }
    // Spearman correlation of rank vs count with average ranks for ties.
    const std::size_t n = rows.size();
    std::vector<double> count_rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && rows[j].count == rows[i].count) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) count_rank[k] = avg;
        i = j;
    }
    // rank column is 1..n already (no ties)
    double mean_x = 0.5 * static_cast<double>(n + 1);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i + 1) - mean_x;
        // count ranks ascend where counts descend, so correlate against the
        // reversed count rank to measure rank-vs-count association.
        const double dy = (static_cast<double>(n + 1) - count_rank[i]) - mean_x;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double spearman = sxy / std::sqrt(sxx * syy);

    char buf[160];
    std::snprintf(buf, sizeof(buf), "spearman(rank, count) = %.4f over %zu exposed items (need <= -0.95)",
                  spearman, n);
    detail = buf;
    return spearman <= -0.95;
}

}  // namespace

int main() {
    std::string detail;

    {
        const bool pass = gradient_suite(detail);
        report(1, "gradient suite (losses + LSTM blocks vs finite differences)", pass, detail);
    }
    {
        const bool pass = metric_oracles(detail);
        report(2, "metric oracles (ndcg, gini, coverage closed forms)", pass, detail);
    }
    {
        const bool pass = sampling_correctness(detail);
        report(3, "sampling correctness (exclusion, cap, top-k oracle)", pass, detail);
    }
    {
        const bool pass = ann_fidelity(detail);
        report(4, "ANN fidelity (exact equality + recall@10)", pass, detail);
    }

    const fs::path base = fs::temp_directory_path() / "seqrec_acceptance";
    fs::remove_all(base);
    fs::create_directories(base);

    const auto t5 = Clock::now();
    PipelineOutcome baseline = run_desk_pipeline(base / "baseline", false);
    PipelineOutcome contrastive = run_desk_pipeline(base / "contrastive", true);
    const double elapsed5 = seconds_since(t5);
    {
        const bool pass = directional_reproduction(baseline, contrastive, elapsed5, detail);
        report(5, "directional trade-off on synth (cross-entropy/in-batch-100 vs cosine)", pass, detail);
    }

    {
        PipelineOutcome rerun = run_desk_pipeline(base / "baseline_rerun", false);
        const bool pass = determinism(baseline.out_dir, rerun.out_dir, detail);
        report(6, "determinism (byte-identical artifacts across reruns)", pass, detail);
    }

    {
        const bool pass = long_tail_audit(baseline, detail);
        report(7, "long-tail audit (decreasing rank-frequency profile)", pass, detail);
    }

    fs::remove_all(base);

    if (g_failures == 0) {
        std::printf("acceptance: all 7 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return 1;
}
