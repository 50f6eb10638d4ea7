// seqrec command-line front-end. Talks to the core exclusively through the
// C API in seqrec.h; exit codes are 0 on success, 1 for validation errors
// (bad flags, bad config, missing inputs), 2 for runtime failures.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "seqrec.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct ConfigHandle {
    seqrec_config* ptr = nullptr;
    ~ConfigHandle() { seqrec_config_free(ptr); }
};

int report_failure(seqrec_status status) {
    std::fprintf(stderr, "error (%s): %s\n", seqrec_status_name(status), seqrec_last_error());
    return seqrec_status_is_validation(status) ? kExitValidation : kExitRuntime;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;  // key=value
    long long seed = -1;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool seed_required) {
    cmd->add_option("-c,--config", opts.config_path, "run config file (key = value lines)");
    cmd->add_option("-o,--out-dir", opts.out_dir, "output directory (overrides out_dir)");
    cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set loss.kind=cosine")
        ->type_name("KEY=VALUE");
    auto* seed = cmd->add_option("--seed", opts.seed, "seed for this command's stochastic steps");
    seed->check(CLI::NonNegativeNumber);
    if (seed_required) seed->required();
}

// Builds the effective config: file, then --set overrides, then --out-dir
// and --seed, which win.
seqrec_status build_config(const CommonOpts& opts, const std::vector<std::string>& seed_keys,
                           ConfigHandle& handle) {
    seqrec_status status = opts.config_path.empty()
                               ? seqrec_config_create(&handle.ptr)
                               : seqrec_config_load(opts.config_path.c_str(), &handle.ptr);
    if (status != SEQREC_OK) return status;
    for (const std::string& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
            return SEQREC_E_INVALID_ARGUMENT;
        }
        status = seqrec_config_set(handle.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (status != SEQREC_OK) return status;
    }
    if (!opts.out_dir.empty()) {
        status = seqrec_config_set(handle.ptr, "out_dir", opts.out_dir.c_str());
        if (status != SEQREC_OK) return status;
    }
    if (opts.seed >= 0) {
        const std::string seed_text = std::to_string(opts.seed);
        for (const std::string& key : seed_keys) {
            status = seqrec_config_set(handle.ptr, key.c_str(), seed_text.c_str());
            if (status != SEQREC_OK) return status;
        }
    }
    return seqrec_config_validate(handle.ptr);
}

int run_command(const CommonOpts& opts, const std::vector<std::string>& seed_keys,
                seqrec_status (*fn)(const seqrec_config*)) {
    ConfigHandle handle;
    seqrec_status status = build_config(opts, seed_keys, handle);
    if (status != SEQREC_OK) return report_failure(status);
    status = fn(handle.ptr);
    if (status != SEQREC_OK) return report_failure(status);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"seqrec - LSTM sequential recommender with contrastive negative sampling"};
    app.require_subcommand(1);

    CommonOpts synth_opts, ingest_opts, embed_opts, model_opts, eval_opts, rec_opts;

    auto* synth = app.add_subcommand("synth", "generate a synthetic long-tail event log");
    add_common_flags(synth, synth_opts, false);

    auto* ingest = app.add_subcommand("ingest", "parse events, split, and write example manifests");
    add_common_flags(ingest, ingest_opts, false);

    auto* embed = app.add_subcommand("train-embeddings", "train item embeddings (skip-gram)");
    add_common_flags(embed, embed_opts, true);

    auto* model = app.add_subcommand("train-model", "train the LSTM session model");
    add_common_flags(model, model_opts, true);

    auto* evaluate = app.add_subcommand("evaluate", "compute NDCG@10, Gini, coverage and the exposure report");
    add_common_flags(evaluate, eval_opts, false);

    auto* recommend = app.add_subcommand("recommend", "top-N recommendations for a session of item ids");
    add_common_flags(recommend, rec_opts, false);
    std::vector<std::string> items;
    std::size_t top_n = 10;
    recommend->add_option("items", items, "viewed item ids, in order")->required();
    recommend->add_option("-n,--top-n", top_n, "list length (default 10)");

    auto* grid = app.add_subcommand("grid", "run a list of configs end to end (full pipeline each)");
    std::vector<std::string> grid_configs;
    grid->add_option("configs", grid_configs, "config files, one pipeline run each")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    if (synth->parsed()) {
        return run_command(synth_opts, {"synth.seed"}, seqrec_run_synth);
    }
    if (ingest->parsed()) {
        return run_command(ingest_opts, {"ingest.split_seed"}, seqrec_run_ingest);
    }
    if (embed->parsed()) {
        return run_command(embed_opts, {"embeddings.seed"}, seqrec_run_train_embeddings);
    }
    if (model->parsed()) {
        return run_command(model_opts, {"model.seed"}, seqrec_run_train_model);
    }
    if (evaluate->parsed()) {
        return run_command(eval_opts, {"ann.seed"}, seqrec_run_evaluate);
    }
    if (recommend->parsed()) {
        ConfigHandle handle;
        seqrec_status status = build_config(rec_opts, {}, handle);
        if (status != SEQREC_OK) return report_failure(status);
        std::vector<const char*> raw;
        raw.reserve(items.size());
        for (const std::string& item : items) raw.push_back(item.c_str());
        char* text = nullptr;
        status = seqrec_run_recommend(handle.ptr, raw.data(), raw.size(), top_n, &text);
        if (status != SEQREC_OK) return report_failure(status);
        std::fputs(text, stdout);
        seqrec_string_free(text);
        return kExitOk;
    }
    if (grid->parsed()) {
        for (const std::string& path : grid_configs) {
            ConfigHandle handle;
            seqrec_status status = seqrec_config_load(path.c_str(), &handle.ptr);
            if (status != SEQREC_OK) return report_failure(status);
            status = seqrec_config_validate(handle.ptr);
            if (status != SEQREC_OK) return report_failure(status);
            std::fprintf(stderr, "grid: running %s\n", path.c_str());
            status = seqrec_run_pipeline(handle.ptr);
            if (status != SEQREC_OK) return report_failure(status);
            char out_dir[4096];
            if (seqrec_config_get(handle.ptr, "out_dir", out_dir, sizeof(out_dir)) == SEQREC_OK) {
                std::fprintf(stderr, "grid: %s done, artifacts in %s\n", path.c_str(), out_dir);
            }
        }
        return kExitOk;
    }
    return kExitValidation;
}
