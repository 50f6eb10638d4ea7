#include "seqrec/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "seqrec/ann.hpp"
#include "seqrec/lstm.hpp"
#include "seqrec/skipgram.hpp"
#include "seqrec/synth.hpp"
#include "seqrec/vecmath.hpp"

namespace seqrec::pipeline {

namespace {

namespace fs = std::filesystem;

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_manifest(const Artifacts& artifacts, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& rows,
                    const RunConfig& config) {
    std::ofstream os(artifacts.manifest(command), std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot write manifest for " + command);
    os << "command " << command << "\n";
    for (const auto& [key, value] : rows) os << key << " " << value << "\n";
    for (const auto& [key, value] : config.echo()) os << key << " " << value << "\n";
}

EventFormat dataset_format(const RunConfig& config) {
    return config.get("dataset.format") == "jsonl" ? EventFormat::Jsonl : EventFormat::Csv;
}

CsvPreset dataset_preset_columns(const RunConfig& config) {
    return config.dataset_preset() == DatasetPreset::RetailRocket ? CsvPreset::RetailRocket
                                                                  : CsvPreset::Standard;
}

EmbeddingTable load_table(const RunConfig& config) {
    const Artifacts artifacts = artifacts_for(config);
    const fs::path path = artifacts.embeddings(config.embeddings_binary_format());
    if (!fs::exists(path)) {
        fail(ErrorCode::Config, "embedding file missing: " + path.string() + " (run train-embeddings first)");
    }
    return EmbeddingTable::load(path);
}

ModelParams load_model(const RunConfig& config) {
    const Artifacts artifacts = artifacts_for(config);
    if (!fs::exists(artifacts.checkpoint())) {
        fail(ErrorCode::Config,
             "checkpoint missing: " + artifacts.checkpoint().string() + " (run train-model first)");
    }
    return load_checkpoint(artifacts.checkpoint()).first;
}

RpForest load_or_build_index(const RunConfig& config, const EmbeddingTable& table) {
    const Artifacts artifacts = artifacts_for(config);
    if (fs::exists(artifacts.index())) {
        RpForest forest = RpForest::load(artifacts.index());
        if (forest.size() == table.size() && forest.dim() == table.dim()) return forest;
    }
    RpForest forest = RpForest::build(table, config.ann_trees(), config.ann_leaf_size(), config.ann_seed());
    forest.save(artifacts.index());
    return forest;
}

// Query with room for exclusions, drop excluded items, truncate to top_n.
std::vector<ItemIndex> retrieve(const RpForest& forest, std::span<const double> z,
                                std::size_t top_n, std::size_t budget,
                                std::span<const ItemIndex> excluded) {
    std::set<ItemIndex> banned(excluded.begin(), excluded.end());
    const std::size_t want = top_n + banned.size();
    const QueryResult result = forest.query(z, want, budget == 0 ? forest.default_budget(want) : budget);
    std::vector<ItemIndex> items;
    items.reserve(top_n);
    for (const ScoredItem& scored : result) {
        if (banned.count(scored.item) > 0) continue;
        items.push_back(scored.item);
        if (items.size() == top_n) break;
    }
    return items;
}

}  // namespace

Artifacts artifacts_for(const RunConfig& config) { return Artifacts{config.out_dir()}; }

void cmd_synth(const RunConfig& config) {
    config.validate();
    if (config.dataset_preset() != DatasetPreset::Synth) {
        fail(ErrorCode::Config, "synth requires dataset.preset = synth");
    }
    const Artifacts artifacts = artifacts_for(config);
    ensure_out_dir(artifacts.out_dir);
    const std::vector<EventRecord> events = generate_events(config.synth_config());
    write_events_csv_file(artifacts.events(), events);
    write_manifest(artifacts, "synth",
                   {{"artifact.events", artifacts.events().filename().string()},
                    {"stat.events", std::to_string(events.size())}},
                   config);
}

void cmd_ingest(const RunConfig& config) {
    config.validate();
    const Artifacts artifacts = artifacts_for(config);
    const fs::path events_path = config.events_path();
    if (!fs::exists(events_path)) {
        fail(ErrorCode::Config, "events file not found: " + events_path.string());
    }
    ensure_out_dir(artifacts.out_dir);

    const EventFormat format =
        config.dataset_preset() == DatasetPreset::Synth ? EventFormat::Csv : dataset_format(config);
    const ParseResult parsed = parse_events_file(events_path, format, dataset_preset_columns(config));

    auto [embed_split, model_split] = chronological_split(parsed.records, config.split_spec());

    const Catalog catalog = Catalog::from_events(embed_split);
    catalog.save(artifacts.catalog());

    const auto sequences = view_sequences(embed_split, catalog);
    save_sequences_jsonl(artifacts.embed_sequences(), sequences);

    const BuildExamplesResult built = build_examples(model_split, catalog);
    if (built.examples.empty()) {
        fail(ErrorCode::EmptyInput, "ingest produced no training examples (carts seen: " +
                                        std::to_string(built.carts_seen) + ")");
    }
    const auto [train, eval] =
        split_by_user(built.examples, config.split_spec().train_fraction, config.split_seed());
    save_examples_jsonl(artifacts.train_examples(), train);
    save_examples_jsonl(artifacts.eval_examples(), eval);

    write_manifest(artifacts, "ingest",
                   {{"artifact.catalog", artifacts.catalog().filename().string()},
                    {"artifact.embed_sequences", artifacts.embed_sequences().filename().string()},
                    {"artifact.train_examples", artifacts.train_examples().filename().string()},
                    {"artifact.eval_examples", artifacts.eval_examples().filename().string()},
                    {"stat.events_parsed", std::to_string(parsed.records.size())},
                    {"stat.events_malformed", std::to_string(parsed.malformed)},
                    {"stat.embed_split_events", std::to_string(embed_split.size())},
                    {"stat.model_split_events", std::to_string(model_split.size())},
                    {"stat.catalog_items", std::to_string(catalog.size())},
                    {"stat.carts_seen", std::to_string(built.carts_seen)},
                    {"stat.examples", std::to_string(built.examples.size())},
                    {"stat.dropped_empty_input", std::to_string(built.dropped_empty_input)},
                    {"stat.dropped_unknown_label", std::to_string(built.dropped_unknown_label)},
                    {"stat.train_examples", std::to_string(train.size())},
                    {"stat.eval_examples", std::to_string(eval.size())}},
                   config);
}

void cmd_train_embeddings(const RunConfig& config) {
    config.validate();
    const Artifacts artifacts = artifacts_for(config);
    if (!fs::exists(artifacts.catalog())) {
        fail(ErrorCode::Config, "catalog missing: " + artifacts.catalog().string() + " (run ingest first)");
    }
    const Catalog catalog = Catalog::load(artifacts.catalog());
    const auto sequences = load_sequences_jsonl(artifacts.embed_sequences());

    const EmbeddingTable table = train_skipgram(sequences, catalog.items(), config.sg_config());

    const bool binary = config.embeddings_binary_format();
    const fs::path path = artifacts.embeddings(binary);
    if (binary) {
        table.save_binary(path);
    } else {
        table.save_text(path);
    }
    write_manifest(artifacts, "train_embeddings",
                   {{"artifact.embeddings", path.filename().string()},
                    {"stat.items", std::to_string(table.size())},
                    {"stat.dim", std::to_string(table.dim())}},
                   config);
}

void cmd_train_model(const RunConfig& config) {
    config.validate();
    const Artifacts artifacts = artifacts_for(config);
    const EmbeddingTable table = load_table(config);
    const auto train = load_examples_jsonl(artifacts.train_examples());
    if (train.empty()) fail(ErrorCode::EmptyInput, "no training examples in " + artifacts.train_examples().string());

    const TrainConfig train_config = config.train_config();
    const LossSpec loss = config.loss_spec();
    const SamplingSpec sampling = config.sampling_spec();
    validate_train_setup(train_config, loss, sampling);

    ModelParams params = init_params(train_config.hidden, table.dim(), train_config.seed);
    AdamState adam;

    std::ofstream log(artifacts.train_log(), std::ios::binary);
    if (!log) fail(ErrorCode::Io, "cannot open train log for writing: " + artifacts.train_log().string());
    log << "epoch\tmean_loss\tcosine_fallbacks\n";
    char buf[64];
    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        const EpochStats stats =
            train_epoch(params, adam, table, train, loss, sampling, train_config, epoch);
        std::snprintf(buf, sizeof(buf), "%.17g", stats.mean_loss);
        log << epoch << "\t" << buf << "\t" << stats.cosine_fallbacks << "\n";
    }

    save_checkpoint(artifacts.checkpoint(), params, config.echo());
    write_manifest(artifacts, "train_model",
                   {{"artifact.checkpoint", artifacts.checkpoint().filename().string()},
                    {"artifact.train_log", artifacts.train_log().filename().string()},
                    {"stat.examples", std::to_string(train.size())},
                    {"stat.hidden", std::to_string(params.hidden)},
                    {"stat.dim", std::to_string(params.dim)}},
                   config);
}

void cmd_evaluate(const RunConfig& config) {
    config.validate();
    const Artifacts artifacts = artifacts_for(config);
    const EmbeddingTable table = load_table(config);
    const ModelParams params = load_model(config);
    if (params.dim != table.dim()) {
        fail(ErrorCode::Config, "checkpoint embedding dim does not match the embedding file");
    }
    const auto eval = load_examples_jsonl(artifacts.eval_examples());
    if (eval.empty()) fail(ErrorCode::EmptyInput, "no eval examples in " + artifacts.eval_examples().string());

    const RpForest forest = load_or_build_index(config, table);
    const std::size_t top_n = config.eval_top_n();
    const bool exclude_inputs = config.eval_exclude_inputs();
    const std::size_t budget = config.ann_search_budget();

    RecommendationRun run;
    run.n_catalog = table.size();
    run.entries.reserve(eval.size());
    for (const TrainingExample& example : eval) {
        const std::vector<double> z = predict(params, table, example.input);
        RecommendationRun::Entry entry;
        entry.label = example.label;
        if (exclude_inputs) {
            entry.recommended = retrieve(forest, z, top_n, budget, example.input);
        } else {
            const QueryResult result =
                forest.query(z, top_n, budget == 0 ? forest.default_budget(top_n) : budget);
            entry.recommended.reserve(result.size());
            for (const ScoredItem& scored : result) entry.recommended.push_back(scored.item);
        }
        run.entries.push_back(std::move(entry));
    }

    const EvalReport report = evaluate_run(run);
    const auto echo = config.echo();
    save_report(artifacts.report(), report, echo);
    save_rank_frequency_tsv(artifacts.rank_frequency(), report.exposure);
    write_manifest(artifacts, "evaluate",
                   {{"artifact.report", artifacts.report().filename().string()},
                    {"artifact.rank_frequency", artifacts.rank_frequency().filename().string()},
                    {"artifact.index", artifacts.index().filename().string()},
                    {"stat.eval_examples", std::to_string(eval.size())}},
                   config);
}

std::vector<Recommendation> cmd_recommend(const RunConfig& config,
                                          std::span<const std::string> item_ids, std::size_t top_n) {
    config.validate();
    if (item_ids.empty()) fail(ErrorCode::InvalidArgument, "recommend: need at least one item id");
    if (top_n == 0) fail(ErrorCode::InvalidArgument, "recommend: top_n must be >= 1");
    const EmbeddingTable table = load_table(config);
    const ModelParams params = load_model(config);

    std::vector<ItemIndex> input;
    input.reserve(item_ids.size());
    std::string unknown;
    for (const std::string& id : item_ids) {
        if (const auto index = table.find(id)) {
            input.push_back(*index);
        } else {
            unknown += unknown.empty() ? id : ", " + id;
        }
    }
    if (!unknown.empty()) fail(ErrorCode::UnknownItem, "unknown item ids: " + unknown);
    if (input.size() > kMaxInputLength) {
        input.erase(input.begin(), input.end() - static_cast<std::ptrdiff_t>(kMaxInputLength));
    }

    const RpForest forest = load_or_build_index(config, table);
    const std::vector<double> z = predict(params, table, input);

    std::vector<ItemIndex> items;
    if (config.recommend_exclude_inputs()) {
        items = retrieve(forest, z, top_n, config.ann_search_budget(), input);
    } else {
        const std::size_t budget = config.ann_search_budget();
        for (const ScoredItem& scored :
             forest.query(z, top_n, budget == 0 ? forest.default_budget(top_n) : budget)) {
            items.push_back(scored.item);
        }
    }

    // Re-score for output; the ranked order is preserved.
    const double z_norm = norm(z);
    std::vector<Recommendation> out;
    out.reserve(items.size());
    for (const ItemIndex item : items) {
        out.push_back(Recommendation{table.items()[item], cosine_sim_f32(z, z_norm, table.row(item))});
    }
    return out;
}

void run_pipeline(const RunConfig& config) {
    config.validate();
    const Artifacts artifacts = artifacts_for(config);
    if (config.dataset_preset() == DatasetPreset::Synth && !fs::exists(artifacts.events())) {
        cmd_synth(config);
    }
    if (!fs::exists(artifacts.catalog()) || !fs::exists(artifacts.train_examples()) ||
        !fs::exists(artifacts.eval_examples()) || !fs::exists(artifacts.embed_sequences())) {
        cmd_ingest(config);
    }
    if (!fs::exists(artifacts.embeddings(config.embeddings_binary_format()))) {
        cmd_train_embeddings(config);
    }
    cmd_train_model(config);
    cmd_evaluate(config);
}

}  // namespace seqrec::pipeline
