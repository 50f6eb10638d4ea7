#include "seqrec/lstm.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "doctest.h"
#include "seqrec/contrastive.hpp"
#include "seqrec/vecmath.hpp"
#include "test_util.hpp"

using namespace seqrec;

namespace {

EmbeddingTable random_table(std::size_t n_items, std::size_t dim, std::uint64_t seed) {
    std::vector<std::string> items;
    std::vector<float> data(n_items * dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < n_items; ++i) {
        items.push_back("i" + std::to_string(i));
        for (std::size_t j = 0; j < dim; ++j) data[i * dim + j] = static_cast<float>(rng.uniform(-1, 1));
    }
    return EmbeddingTable(std::move(items), dim, std::move(data));
}

using LossEval = std::function<LossGrad(std::span<const double>)>;

// Finite differences of loss(forward(params).z) w.r.t. every entry of every
// parameter block; the mandatory pre-build oracle for backward().
void check_parameter_gradients(ModelParams params, const EmbeddingTable& table,
                               const std::vector<ItemIndex>& input, const LossEval& loss,
                               double tolerance) {
    const ForwardTrace trace = forward(params, table, input);
    const LossGrad at_z = loss(trace.z);
    const Gradients analytic = backward(trace, params, at_z.d_zi);

    const auto loss_of_params = [&]() {
        return loss(forward(params, table, input).z).loss;
    };
    const double step = 1e-5;
    const auto check_block = [&](std::vector<double>& block, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < block.size(); ++i) {
            const double keep = block[i];
            block[i] = keep + step;
            const double hi = loss_of_params();
            block[i] = keep - step;
            const double lo = loss_of_params();
            block[i] = keep;
            const double numeric = (hi - lo) / (2.0 * step);
            const double denom = std::max({std::fabs(numeric), std::fabs(grad[i]), 1e-6});
            CHECK(std::fabs(numeric - grad[i]) / denom < tolerance);
        }
    };
    check_block(params.w_x, analytic.w_x);
    check_block(params.w_h, analytic.w_h);
    check_block(params.b, analytic.b);
    check_block(params.proj, analytic.proj);
}

std::vector<TrainingExample> last_item_examples(std::size_t n, std::size_t n_items, Rng& rng) {
    // label equals the last viewed item: a learnable synthetic task
    std::vector<TrainingExample> examples;
    for (std::size_t i = 0; i < n; ++i) {
        TrainingExample ex;
        ex.user_id = "u" + std::to_string(i);
        const std::size_t len = 2 + rng.next_below(5);
        for (std::size_t j = 0; j < len; ++j) {
            ex.input.push_back(static_cast<ItemIndex>(rng.next_below(n_items)));
        }
        ex.label = ex.input.back();
        examples.push_back(std::move(ex));
    }
    return examples;
}

}  // namespace

TEST_CASE("forward: all-zero parameters map any sequence to the zero vector") {
    const EmbeddingTable table = random_table(10, 6, 1);
    ModelParams params;
    params.hidden = 4;
    params.dim = 6;
    params.w_x.assign(4 * 4 * 6, 0.0);
    params.w_h.assign(4 * 4 * 4, 0.0);
    params.b.assign(16, 0.0);
    params.proj.assign(6 * 4, 0.0);
    for (const auto& input : {std::vector<ItemIndex>{0}, std::vector<ItemIndex>{1, 2, 3, 4}}) {
        const ForwardTrace trace = forward(params, table, input);
        for (const double v : trace.z) CHECK(v == 0.0);
        for (const double v : trace.hidden_states) CHECK(v == 0.0);
    }
}

TEST_CASE("forward: trace shape matches input length, outputs finite and deterministic") {
    const EmbeddingTable table = random_table(10, 6, 2);
    const ModelParams params = init_params(4, 6, 11);
    const std::vector<ItemIndex> short_input = {3};
    const std::vector<ItemIndex> long_input = {7, 3};
    const ForwardTrace a = forward(params, table, short_input);
    const ForwardTrace b = forward(params, table, long_input);
    CHECK(a.steps == 1);
    CHECK(b.steps == 2);
    CHECK(all_finite(a.z));
    CHECK(all_finite(b.z));
    const ForwardTrace c = forward(params, table, long_input);
    CHECK(b.z == c.z);  // bit-identical
}

TEST_CASE("forward: bad inputs are rejected") {
    const EmbeddingTable table = random_table(5, 6, 3);
    const ModelParams params = init_params(4, 6, 1);
    CHECK_THROWS_AS(forward(params, table, std::vector<ItemIndex>{}), SeqrecError);
    CHECK_THROWS_AS(forward(params, table, std::vector<ItemIndex>{99}), SeqrecError);
    std::vector<ItemIndex> too_long(101, 0);
    CHECK_THROWS_AS(forward(params, table, too_long), SeqrecError);
}

TEST_CASE("forward: non-finite parameters are caught") {
    const EmbeddingTable table = random_table(5, 6, 3);
    ModelParams params = init_params(4, 6, 1);
    params.w_x[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        forward(params, table, std::vector<ItemIndex>{1, 2});
        FAIL("expected NonFinite");
    } catch (const SeqrecError& e) {
        CHECK(e.code() == ErrorCode::NonFinite);
    }
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
    const EmbeddingTable table = random_table(8, 6, 4);
    const ModelParams params = init_params(4, 6, 5);
    const ForwardTrace trace = forward(params, table, std::vector<ItemIndex>{1, 2, 3});
    const std::vector<double> zero(6, 0.0);
    const Gradients grads = backward(trace, params, zero);
    CHECK(grads.global_norm() == 0.0);
}

TEST_CASE("backward: every block matches finite differences (h=4, d=6, 3 steps)") {
    const EmbeddingTable table = random_table(12, 6, 6);
    const std::vector<ItemIndex> input = {2, 7, 4};
    Rng rng(31);
    const auto direction = testutil::random_vector(rng, 6);
    const auto z_target = testutil::random_vector(rng, 6);
    std::vector<std::vector<double>> negatives;
    for (int k = 0; k < 3; ++k) negatives.push_back(testutil::random_vector(rng, 6));

    const LossEval linear_probe = [&](std::span<const double> z) {
        LossGrad lg;
        lg.loss = dot(z, direction);
        lg.d_zi = direction;
        return lg;
    };
    const LossEval cosine_eval = [&](std::span<const double> z) { return cosine_loss(z, z_target); };
    const LossEval weighted_eval = [&](std::span<const double> z) {
        return weighted_loss(z, z_target, negatives, 2.0, 1.0);
    };
    const LossEval ce_eval = [&](std::span<const double> z) {
        return cross_entropy_loss(z, z_target, negatives, 0.05, true);
    };

    for (const auto& loss : {linear_probe, cosine_eval, weighted_eval, ce_eval}) {
        check_parameter_gradients(init_params(4, 6, 41), table, input, loss, 1e-4);
    }
}

TEST_CASE("backward: length-1 sequences exercise the no-recurrence path") {
    const EmbeddingTable table = random_table(12, 6, 7);
    const std::vector<ItemIndex> input = {5};
    Rng rng(33);
    const auto z_target = testutil::random_vector(rng, 6);
    const LossEval cosine_eval = [&](std::span<const double> z) { return cosine_loss(z, z_target); };
    check_parameter_gradients(init_params(4, 6, 43), table, input, cosine_eval, 1e-4);
}

TEST_CASE("clip_gradients: rescales norm 10 to norm 5") {
    ModelParams params = init_params(2, 3, 1);
    Gradients grads;
    grads.resize_like(params);
    grads.w_x[0] = 6.0;
    grads.proj[0] = 8.0;  // global norm 10
    const double before = clip_gradients(grads, 5.0);
    CHECK(before == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(grads.global_norm() == doctest::Approx(5.0).epsilon(1e-12));
    // below the threshold nothing changes
    Gradients small;
    small.resize_like(params);
    small.b[0] = 1.0;
    clip_gradients(small, 5.0);
    CHECK(small.b[0] == 1.0);
}

TEST_CASE("train_epoch: zero learning rate leaves parameters unchanged, loss reported") {
    const EmbeddingTable table = random_table(10, 6, 8);
    Rng rng(51);
    const auto examples = last_item_examples(40, 10, rng);
    TrainConfig config;
    config.hidden = 4;
    config.batch_size = 8;
    config.learning_rate = 0.0;
    config.seed = 5;
    ModelParams params = init_params(config.hidden, 6, config.seed);
    const ModelParams before = params;
    AdamState adam;
    const EpochStats stats = train_epoch(params, adam, table, examples, LossSpec{}, SamplingSpec{}, config, 0);
    CHECK(stats.examples == 40);
    CHECK(std::isfinite(stats.mean_loss));
    CHECK(params.w_x == before.w_x);
    CHECK(params.w_h == before.w_h);
    CHECK(params.b == before.b);
    CHECK(params.proj == before.proj);
}

TEST_CASE("train_epoch: deterministic under fixed seed") {
    const EmbeddingTable table = random_table(12, 6, 9);
    Rng rng(53);
    const auto examples = last_item_examples(60, 12, rng);
    TrainConfig config;
    config.hidden = 8;
    config.batch_size = 16;
    config.learning_rate = 0.01;
    config.seed = 99;

    LossSpec loss;
    loss.kind = LossKind::CrossEntropy;
    SamplingSpec sampling;
    sampling.strategy = SamplingStrategy::InBatch;
    sampling.cap = 5;

    ModelParams a = init_params(config.hidden, 6, config.seed);
    ModelParams b = init_params(config.hidden, 6, config.seed);
    AdamState adam_a, adam_b;
    for (int epoch = 0; epoch < 2; ++epoch) {
        train_epoch(a, adam_a, table, examples, loss, sampling, config, epoch);
        train_epoch(b, adam_b, table, examples, loss, sampling, config, epoch);
    }
    CHECK(a.w_x == b.w_x);
    CHECK(a.w_h == b.w_h);
    CHECK(a.b == b.b);
    CHECK(a.proj == b.proj);
}

TEST_CASE("train_epoch: embedding table is frozen through training") {
    const EmbeddingTable table = random_table(12, 6, 10);
    const std::uint64_t hash_before = table.content_hash();
    Rng rng(57);
    const auto examples = last_item_examples(50, 12, rng);
    TrainConfig config;
    config.hidden = 8;
    config.batch_size = 10;
    config.learning_rate = 0.05;
    config.seed = 3;
    ModelParams params = init_params(config.hidden, 6, config.seed);
    AdamState adam;
    for (int epoch = 0; epoch < 3; ++epoch) {
        train_epoch(params, adam, table, examples, LossSpec{}, SamplingSpec{}, config, epoch);
    }
    CHECK(table.content_hash() == hash_before);
}

TEST_CASE("train_epoch: cosine smoke train decreases the loss over early epochs") {
    const EmbeddingTable table = random_table(20, 8, 11);
    Rng rng(61);
    const auto examples = last_item_examples(200, 20, rng);
    TrainConfig config;
    config.hidden = 16;
    config.batch_size = 32;
    config.learning_rate = 0.01;
    config.seed = 7;
    ModelParams params = init_params(config.hidden, 8, config.seed);
    AdamState adam;
    std::vector<double> losses;
    for (int epoch = 0; epoch < 20; ++epoch) {
        losses.push_back(
            train_epoch(params, adam, table, examples, LossSpec{}, SamplingSpec{}, config, epoch).mean_loss);
    }
    for (int epoch = 1; epoch < 5; ++epoch) {
        CHECK(losses[epoch] < losses[epoch - 1]);
    }
    CHECK(losses[19] < losses[0]);
}

TEST_CASE("validate_train_setup: batch_size 1 with in-batch sampling is rejected up front") {
    TrainConfig config;
    config.batch_size = 1;
    LossSpec loss;
    loss.kind = LossKind::Weighted;
    SamplingSpec sampling;
    sampling.strategy = SamplingStrategy::InBatch;
    try {
        validate_train_setup(config, loss, sampling);
        FAIL("expected Config error");
    } catch (const SeqrecError& e) {
        CHECK(e.code() == ErrorCode::Config);
    }
}

TEST_CASE("validate_train_setup: cosine loss with sampling, contrastive loss without") {
    TrainConfig config;
    LossSpec cosine;
    SamplingSpec in_batch;
    in_batch.strategy = SamplingStrategy::InBatch;
    CHECK_THROWS_AS(validate_train_setup(config, cosine, in_batch), SeqrecError);

    LossSpec ce;
    ce.kind = LossKind::CrossEntropy;
    SamplingSpec none;
    CHECK_THROWS_AS(validate_train_setup(config, ce, none), SeqrecError);

    SamplingSpec bad_topk;
    bad_topk.strategy = SamplingStrategy::TopK;
    bad_topk.pool_cap = 4;
    bad_topk.k = 9;
    CHECK_THROWS_AS(validate_train_setup(config, ce, bad_topk), SeqrecError);
}

TEST_CASE("train_epoch: sgd optimizer path") {
    const EmbeddingTable table = random_table(10, 6, 12);
    Rng rng(63);
    const auto examples = last_item_examples(40, 10, rng);
    TrainConfig config;
    config.hidden = 4;
    config.batch_size = 8;
    config.learning_rate = 0.05;
    config.optimizer = Optimizer::Sgd;
    config.seed = 15;
    ModelParams params = init_params(config.hidden, 6, config.seed);
    AdamState adam;
    double first = 0.0, last = 0.0;
    for (int epoch = 0; epoch < 8; ++epoch) {
        const double loss =
            train_epoch(params, adam, table, examples, LossSpec{}, SamplingSpec{}, config, epoch).mean_loss;
        if (epoch == 0) first = loss;
        last = loss;
    }
    CHECK(last < first);
}

TEST_CASE("checkpoint: save/load/save is byte-identical and predictions survive") {
    const EmbeddingTable table = random_table(10, 6, 13);
    const ModelParams params = init_params(8, 6, 21);
    const std::vector<std::pair<std::string, std::string>> echo = {{"config.model.hidden_size", "8"}};
    const auto dir = std::filesystem::temp_directory_path();
    const auto path_a = dir / "seqrec_test_ckpt_a.bin";
    const auto path_b = dir / "seqrec_test_ckpt_b.bin";

    save_checkpoint(path_a, params, echo);
    const auto [loaded, loaded_echo] = load_checkpoint(path_a);
    CHECK(loaded.hidden == 8);
    CHECK(loaded.dim == 6);
    REQUIRE(loaded_echo.size() == 1);
    CHECK(loaded_echo[0].first == "config.model.hidden_size");

    save_checkpoint(path_b, loaded, loaded_echo);
    std::ifstream fa(path_a, std::ios::binary), fb(path_b, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);

    const std::vector<ItemIndex> input = {1, 4, 2};
    const auto z = predict(loaded, table, input);
    CHECK(all_finite(z));
    CHECK(z.size() == 6);

    std::filesystem::remove(path_a);
    std::filesystem::remove(path_b);
}
