#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqrec/ann.hpp"
#include "seqrec/contrastive.hpp"
#include "seqrec/error.hpp"
#include "seqrec/ingest.hpp"
#include "seqrec/lstm.hpp"
#include "seqrec/skipgram.hpp"
#include "seqrec/synth.hpp"

namespace seqrec {

enum class DatasetPreset { Synth, RetailRocket, GenericCsv };

// Flat `key = value` run configuration; sections mirror the module names
// (ingest.*, embeddings.*, model.*, loss.*, sampling.*, ann.*, eval.*,
// synth.*). Unknown keys are rejected so typos fail loudly, and every key
// has a default, so a config file only states what differs.
class RunConfig {
public:
    RunConfig();

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(std::string_view text, const std::string& origin = "<inline>");

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    bool has_default(const std::string& key) const;

    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    DatasetPreset dataset_preset() const;
    std::filesystem::path out_dir() const;
    std::filesystem::path events_path() const;  // input events (preset-dependent)

    SplitSpec split_spec() const;
    std::uint64_t split_seed() const;
    SgConfig sg_config() const;
    bool embeddings_binary_format() const;
    TrainConfig train_config() const;
    LossSpec loss_spec() const;
    SamplingSpec sampling_spec() const;
    SynthConfig synth_config() const;

    std::uint32_t ann_trees() const;
    std::uint32_t ann_leaf_size() const;
    std::size_t ann_search_budget() const;  // 0 = default
    std::uint64_t ann_seed() const;

    std::size_t eval_top_n() const;
    bool eval_exclude_inputs() const;
    bool recommend_exclude_inputs() const;

    // Field-level and cross-field validation (ranges, incompatible
    // loss/sampling combinations). Does not touch the filesystem.
    void validate() const;

    // Every key with its effective value, sorted; used for report and
    // checkpoint echoes.
    std::vector<std::pair<std::string, std::string>> echo() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace seqrec
