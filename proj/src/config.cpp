#include "seqrec/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace seqrec {

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"dataset.preset", "synth"},
        {"dataset.format", "csv"},
        {"dataset.events", ""},
        {"out_dir", "out"},

        {"ingest.w2v_fraction", "0.5"},
        {"ingest.train_fraction", "0.8"},
        {"ingest.split_seed", "1"},

        {"embeddings.dim", "64"},
        {"embeddings.window", "5"},
        {"embeddings.negatives", "5"},
        {"embeddings.epochs", "5"},
        {"embeddings.learning_rate", "0.025"},
        {"embeddings.min_count", "1"},
        {"embeddings.subsample_threshold", "0"},
        {"embeddings.seed", "1"},
        {"embeddings.threads", "1"},
        {"embeddings.format", "binary"},

        {"model.hidden_size", "128"},
        {"model.batch_size", "128"},
        {"model.epochs", "5"},
        {"model.learning_rate", "0.001"},
        {"model.gradient_clip_norm", "5"},
        {"model.optimizer", "adam"},
        {"model.seed", "1"},

        {"loss.kind", "cosine"},
        {"loss.alpha", "2"},
        {"loss.beta", "1"},
        {"loss.tau", "0.05"},
        {"loss.denominator", "full"},

        {"sampling.strategy", "none"},
        {"sampling.cap", "100"},
        {"sampling.pool_cap", "100"},
        {"sampling.k", "5"},

        {"ann.n_trees", "16"},
        {"ann.leaf_size", "32"},
        {"ann.search_budget", "0"},
        {"ann.seed", "1"},

        {"eval.top_n", "10"},
        {"eval.exclude_inputs", "false"},
        {"recommend.exclude_inputs", "true"},

        {"synth.n_items", "2000"},
        {"synth.n_users", "5000"},
        {"synth.views_min", "12"},
        {"synth.views_max", "40"},
        {"synth.zipf_exponent", "1.1"},
        {"synth.n_communities", "20"},
        {"synth.add_to_cart_prob", "0.8"},
        {"synth.seed", "1"},
    };
    return defaults;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    fail(ErrorCode::Config, "config key '" + key + "': bad value '" + value + "' (expected " + expected + ")");
}

}  // namespace

RunConfig::RunConfig() : values_(default_values()) {}

RunConfig RunConfig::parse(std::string_view text, const std::string& origin) {
    RunConfig config;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', start), text.size());
        std::string_view line = trim(text.substr(start, eol - start));
        start = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail(ErrorCode::Config, origin + ":" + std::to_string(line_no) +
                                        ": expected 'key = value', got '" + std::string(line) + "'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        try {
            config.set(key, value);
        } catch (const SeqrecError& e) {
            fail(ErrorCode::Config, origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Config, "cannot open config file: " + path.string());
    std::ostringstream buffer;
    buffer << is.rdbuf();
    return parse(buffer.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::Config, "unknown config key: '" + key + "'");
    it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::Config, "unknown config key: '" + key + "'");
    return it->second;
}

bool RunConfig::has_default(const std::string& key) const {
    const auto it = default_values().find(key);
    return it != default_values().end() && get(key) == it->second;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& raw = get(key);
    try {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != raw.size()) bad_value(key, raw, "a number");
        return v;
    } catch (const SeqrecError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, raw, "a number");
    }
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    const std::string& raw = get(key);
    try {
        std::size_t used = 0;
        const std::int64_t v = std::stoll(raw, &used);
        if (used != raw.size()) bad_value(key, raw, "an integer");
        return v;
    } catch (const SeqrecError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, raw, "an integer");
    }
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
    const std::int64_t v = get_int(key);
    if (v < 0) bad_value(key, get(key), "a nonnegative integer");
    return static_cast<std::uint64_t>(v);
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& raw = get(key);
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    bad_value(key, raw, "true or false");
}

DatasetPreset RunConfig::dataset_preset() const {
    const std::string& raw = get("dataset.preset");
    if (raw == "synth") return DatasetPreset::Synth;
    if (raw == "retailrocket") return DatasetPreset::RetailRocket;
    if (raw == "generic-csv") return DatasetPreset::GenericCsv;
    bad_value("dataset.preset", raw, "synth | retailrocket | generic-csv");
}

std::filesystem::path RunConfig::out_dir() const { return get("out_dir"); }

std::filesystem::path RunConfig::events_path() const {
    if (dataset_preset() == DatasetPreset::Synth) return out_dir() / "events.csv";
    const std::string& raw = get("dataset.events");
    if (raw.empty()) {
        fail(ErrorCode::Config, "dataset.events must point at the input events file for preset '" +
                                    get("dataset.preset") + "'");
    }
    return raw;
}

SplitSpec RunConfig::split_spec() const {
    SplitSpec spec;
    spec.w2v_fraction = get_double("ingest.w2v_fraction");
    spec.train_fraction = get_double("ingest.train_fraction");
    return spec;
}

std::uint64_t RunConfig::split_seed() const { return get_uint("ingest.split_seed"); }

SgConfig RunConfig::sg_config() const {
    SgConfig config;
    config.dim = get_uint("embeddings.dim");
    config.window = get_uint("embeddings.window");
    config.negatives = get_uint("embeddings.negatives");
    config.epochs = get_uint("embeddings.epochs");
    config.learning_rate = get_double("embeddings.learning_rate");
    config.min_count = get_uint("embeddings.min_count");
    config.subsample_threshold = get_double("embeddings.subsample_threshold");
    config.seed = get_uint("embeddings.seed");
    config.threads = get_uint("embeddings.threads");
    return config;
}

bool RunConfig::embeddings_binary_format() const {
    const std::string& raw = get("embeddings.format");
    if (raw == "binary") return true;
    if (raw == "text") return false;
    bad_value("embeddings.format", raw, "binary | text");
}

TrainConfig RunConfig::train_config() const {
    TrainConfig config;
    config.hidden = get_uint("model.hidden_size");
    config.batch_size = get_uint("model.batch_size");
    config.epochs = get_uint("model.epochs");
    config.learning_rate = get_double("model.learning_rate");
    config.gradient_clip_norm = get_double("model.gradient_clip_norm");
    config.seed = get_uint("model.seed");
    const std::string& opt = get("model.optimizer");
    if (opt == "adam") {
        config.optimizer = Optimizer::Adam;
    } else if (opt == "sgd") {
        config.optimizer = Optimizer::Sgd;
    } else {
        bad_value("model.optimizer", opt, "adam | sgd");
    }
    return config;
}

LossSpec RunConfig::loss_spec() const {
    LossSpec spec;
    const std::string& kind = get("loss.kind");
    if (kind == "cosine") {
        spec.kind = LossKind::Cosine;
    } else if (kind == "weighted") {
        spec.kind = LossKind::Weighted;
    } else if (kind == "cross_entropy") {
        spec.kind = LossKind::CrossEntropy;
    } else {
        bad_value("loss.kind", kind, "cosine | weighted | cross_entropy");
    }
    spec.alpha = get_double("loss.alpha");
    spec.beta = get_double("loss.beta");
    spec.tau = get_double("loss.tau");
    const std::string& denom = get("loss.denominator");
    if (denom == "full") {
        spec.denominator_includes_positive = true;
    } else if (denom == "negatives_only") {
        spec.denominator_includes_positive = false;
    } else {
        bad_value("loss.denominator", denom, "full | negatives_only");
    }
    return spec;
}

SamplingSpec RunConfig::sampling_spec() const {
    SamplingSpec spec;
    const std::string& strategy = get("sampling.strategy");
    if (strategy == "none") {
        spec.strategy = SamplingStrategy::None;
    } else if (strategy == "in_batch") {
        spec.strategy = SamplingStrategy::InBatch;
    } else if (strategy == "top_k") {
        spec.strategy = SamplingStrategy::TopK;
    } else {
        bad_value("sampling.strategy", strategy, "none | in_batch | top_k");
    }
    spec.cap = get_uint("sampling.cap");
    spec.pool_cap = get_uint("sampling.pool_cap");
    spec.k = get_uint("sampling.k");
    return spec;
}

SynthConfig RunConfig::synth_config() const {
    SynthConfig config;
    config.n_items = get_uint("synth.n_items");
    config.n_users = get_uint("synth.n_users");
    config.views_min = get_uint("synth.views_min");
    config.views_max = get_uint("synth.views_max");
    config.zipf_exponent = get_double("synth.zipf_exponent");
    config.n_communities = get_uint("synth.n_communities");
    config.add_to_cart_prob = get_double("synth.add_to_cart_prob");
    config.seed = get_uint("synth.seed");
    return config;
}

std::uint32_t RunConfig::ann_trees() const { return static_cast<std::uint32_t>(get_uint("ann.n_trees")); }
std::uint32_t RunConfig::ann_leaf_size() const { return static_cast<std::uint32_t>(get_uint("ann.leaf_size")); }
std::size_t RunConfig::ann_search_budget() const { return get_uint("ann.search_budget"); }
std::uint64_t RunConfig::ann_seed() const { return get_uint("ann.seed"); }

std::size_t RunConfig::eval_top_n() const { return get_uint("eval.top_n"); }
bool RunConfig::eval_exclude_inputs() const { return get_bool("eval.exclude_inputs"); }
bool RunConfig::recommend_exclude_inputs() const { return get_bool("recommend.exclude_inputs"); }

void RunConfig::validate() const {
    dataset_preset();
    const std::string& format = get("dataset.format");
    if (format != "csv" && format != "jsonl") bad_value("dataset.format", format, "csv | jsonl");

    const SplitSpec split = split_spec();
    if (!(split.w2v_fraction > 0.0 && split.w2v_fraction < 1.0)) {
        fail(ErrorCode::Config, "ingest.w2v_fraction must lie in (0, 1)");
    }
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
        fail(ErrorCode::Config, "ingest.train_fraction must lie in (0, 1)");
    }

    const SgConfig sg = sg_config();
    if (sg.dim < 2) fail(ErrorCode::Config, "embeddings.dim must be >= 2");
    if (sg.window == 0) fail(ErrorCode::Config, "embeddings.window must be >= 1");
    if (!(sg.learning_rate > 0.0)) fail(ErrorCode::Config, "embeddings.learning_rate must be > 0");
    if (sg.min_count == 0) fail(ErrorCode::Config, "embeddings.min_count must be >= 1");
    if (sg.threads == 0) fail(ErrorCode::Config, "embeddings.threads must be >= 1");
    embeddings_binary_format();

    // Cross-field loss/sampling rules live next to the trainer.
    validate_train_setup(train_config(), loss_spec(), sampling_spec());

    if (ann_trees() == 0) fail(ErrorCode::Config, "ann.n_trees must be >= 1");
    if (ann_leaf_size() == 0) fail(ErrorCode::Config, "ann.leaf_size must be >= 1");
    if (eval_top_n() == 0) fail(ErrorCode::Config, "eval.top_n must be >= 1");
    eval_exclude_inputs();
    recommend_exclude_inputs();

    if (dataset_preset() == DatasetPreset::Synth) {
        const SynthConfig synth = synth_config();
        if (synth.n_items < synth.n_communities || synth.n_communities == 0) {
            fail(ErrorCode::Config, "synth.n_items >= synth.n_communities >= 1 required");
        }
        if (synth.views_min == 0 || synth.views_max < synth.views_min) {
            fail(ErrorCode::Config, "synth views range must satisfy 1 <= views_min <= views_max");
        }
        if (!(synth.zipf_exponent > 0.0)) fail(ErrorCode::Config, "synth.zipf_exponent must be > 0");
        if (!(synth.add_to_cart_prob > 0.0 && synth.add_to_cart_prob <= 1.0)) {
            fail(ErrorCode::Config, "synth.add_to_cart_prob must lie in (0, 1]");
        }
    }
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(values_.size());
    for (const auto& [key, value] : values_) {
        // Filesystem locations stay out of the echo so artifacts produced by
        // the same experiment are byte-identical wherever they are written.
        if (key == "out_dir" || key == "dataset.events") continue;
        out.emplace_back("config." + key, value);
    }
    return out;
}

}  // namespace seqrec
