#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqrec/error.hpp"
#include "seqrec/metrics.hpp"  // ItemIndex

namespace seqrec {

enum class EventType : std::uint8_t { View, AddToCart };

struct EventRecord {
    std::int64_t timestamp = 0;  // milliseconds since epoch
    std::string user_id;
    std::string item_id;
    EventType type = EventType::View;
};

enum class EventFormat { Csv, Jsonl };

// Column naming presets for CSV input. Standard expects the header
// `timestamp,user_id,item_id,event_type`; RetailRocket maps the public
// events.csv header `timestamp,visitorid,event,itemid` (extra columns such
// as transactionid are ignored). Event tokens are `view` / `addtocart` in
// both presets; rows with any other token count as malformed.
enum class CsvPreset { Standard, RetailRocket };

struct ParseResult {
    std::vector<EventRecord> records;  // file order
    std::size_t malformed = 0;         // skipped rows
};

ParseResult parse_events(std::istream& stream, EventFormat format,
                         CsvPreset preset = CsvPreset::Standard);
ParseResult parse_events_file(const std::filesystem::path& path, EventFormat format,
                              CsvPreset preset = CsvPreset::Standard);

void write_events_csv(std::ostream& os, std::span<const EventRecord> events);
void write_events_csv_file(const std::filesystem::path& path, std::span<const EventRecord> events);

// Dense item universe. Indices are assigned in first-seen order over the
// events the catalog is built from, so they are contiguous from 0 and the
// string<->index mapping is a bijection.
class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::vector<std::string> items);

    static Catalog from_events(std::span<const EventRecord> events);

    std::size_t size() const { return items_.size(); }
    const std::vector<std::string>& items() const { return items_; }
    const std::string& item(ItemIndex index) const;
    std::optional<ItemIndex> find(std::string_view item) const;

    void save(const std::filesystem::path& path) const;
    static Catalog load(const std::filesystem::path& path);

private:
    std::vector<std::string> items_;
    std::unordered_map<std::string, ItemIndex> index_;
};

struct SplitSpec {
    double w2v_fraction = 0.5;    // chronological share for embedding training
    double train_fraction = 0.8;  // per-user share of the remainder
};

// Views preceding an add-to-cart, newest 100 kept, plus the cart item.
struct TrainingExample {
    std::string user_id;
    std::vector<ItemIndex> input;  // time order, length in [1, 100]
    ItemIndex label = 0;
};

inline constexpr std::size_t kMaxInputLength = 100;

// Stable-sorts by timestamp and cuts at ~w2v_fraction of the events, pushing
// tied timestamps entirely into the earlier split so no timestamp straddles
// the boundary. Concatenating the two outputs reproduces the sorted input.
std::pair<std::vector<EventRecord>, std::vector<EventRecord>> chronological_split(
    std::vector<EventRecord> events, const SplitSpec& spec);

struct BuildExamplesResult {
    std::vector<TrainingExample> examples;
    std::size_t carts_seen = 0;
    std::size_t dropped_empty_input = 0;
    std::size_t dropped_unknown_label = 0;
};

BuildExamplesResult build_examples(std::span<const EventRecord> events, const Catalog& catalog);

// Assignment is a pure function of (user_id, seed); no user straddles the
// boundary.
std::pair<std::vector<TrainingExample>, std::vector<TrainingExample>> split_by_user(
    std::span<const TrainingExample> examples, double train_fraction, std::uint64_t seed);

// Per-user view sequences (time order, dense indices) for embedding training.
// Items absent from the catalog are dropped; empty sequences are omitted.
std::vector<std::vector<ItemIndex>> view_sequences(std::span<const EventRecord> events,
                                                   const Catalog& catalog);

// Split manifests: one JSON object per example,
// {"input":[...],"label":n,"user":"..."} with catalog-dense indices.
void save_examples_jsonl(const std::filesystem::path& path, std::span<const TrainingExample> examples);
std::vector<TrainingExample> load_examples_jsonl(const std::filesystem::path& path);

// Sequence manifest: {"items":[...],"user":"..."} per user.
void save_sequences_jsonl(const std::filesystem::path& path,
                          std::span<const std::vector<ItemIndex>> sequences);
std::vector<std::vector<ItemIndex>> load_sequences_jsonl(const std::filesystem::path& path);

}  // namespace seqrec
