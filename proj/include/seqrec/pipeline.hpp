#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqrec/config.hpp"
#include "seqrec/metrics.hpp"

namespace seqrec::pipeline {

// Artifact layout under out_dir. Fixed names keep runs self-describing and
// make stage skipping trivial.
struct Artifacts {
    std::filesystem::path out_dir;

    std::filesystem::path events() const { return out_dir / "events.csv"; }
    std::filesystem::path catalog() const { return out_dir / "catalog.txt"; }
    std::filesystem::path embed_sequences() const { return out_dir / "embed_sequences.jsonl"; }
    std::filesystem::path train_examples() const { return out_dir / "train_examples.jsonl"; }
    std::filesystem::path eval_examples() const { return out_dir / "eval_examples.jsonl"; }
    std::filesystem::path embeddings(bool binary) const {
        return out_dir / (binary ? "embeddings.bin" : "embeddings.txt");
    }
    std::filesystem::path checkpoint() const { return out_dir / "model.ckpt"; }
    std::filesystem::path train_log() const { return out_dir / "train_log.tsv"; }
    std::filesystem::path index() const { return out_dir / "index.bin"; }
    std::filesystem::path report() const { return out_dir / "eval_report.txt"; }
    std::filesystem::path rank_frequency() const { return out_dir / "rank_frequency.tsv"; }
    std::filesystem::path manifest(const std::string& command) const {
        return out_dir / ("manifest_" + command + ".txt");
    }
};

Artifacts artifacts_for(const RunConfig& config);

// Pipeline commands. Each validates the config, reads its inputs, writes its
// artifacts plus a manifest under out_dir, and is deterministic for a fixed
// config.
void cmd_synth(const RunConfig& config);
void cmd_ingest(const RunConfig& config);
void cmd_train_embeddings(const RunConfig& config);
void cmd_train_model(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);

struct Recommendation {
    std::string item_id;
    double score;
};

// Top-N items for an ad-hoc session of item-id strings. Unknown ids are a
// validation error listing every offender.
std::vector<Recommendation> cmd_recommend(const RunConfig& config,
                                          std::span<const std::string> item_ids, std::size_t top_n);

// Full run with stage skipping: synth (synth preset only), ingest and
// train-embeddings run when their artifacts are missing; train-model and
// evaluate always run. The building block of `grid`.
void run_pipeline(const RunConfig& config);

}  // namespace seqrec::pipeline
