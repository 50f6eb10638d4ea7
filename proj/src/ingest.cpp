#include "seqrec/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "seqrec/rng.hpp"

namespace seqrec {

namespace {

using nlohmann::json;

bool clean_user_id(std::string_view s) {
    if (s.empty()) return false;
    for (const char c : s) {
        if (static_cast<unsigned char>(c) < 0x20 || c == 0x7f) return false;
    }
    return true;
}

// Item ids flow into line- and space-delimited artifacts (catalog, text
// embeddings), so whitespace is rejected up front.
bool clean_item_id(std::string_view s) {
    if (!clean_user_id(s)) return false;
    for (const char c : s) {
        if (c == ' ') return false;
    }
    return true;
}

std::optional<std::int64_t> parse_timestamp(std::string_view s) {
    if (s.empty() || s.size() > 19) return std::nullopt;
    std::int64_t v = 0;
    for (const char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + (c - '0');
    }
    return v;
}

std::optional<EventType> parse_event_token(std::string_view s) {
    if (s == "view") return EventType::View;
    if (s == "addtocart") return EventType::AddToCart;
    return std::nullopt;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

struct CsvColumns {
    std::size_t timestamp, user, item, event;
    std::size_t min_fields;
};

CsvColumns resolve_columns(const std::string& header, CsvPreset preset) {
    const auto names = split_csv_line(header);
    const auto find = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return i;
        }
        return std::nullopt;
    };
    const char* user_col = preset == CsvPreset::RetailRocket ? "visitorid" : "user_id";
    const char* item_col = preset == CsvPreset::RetailRocket ? "itemid" : "item_id";
    const char* event_col = preset == CsvPreset::RetailRocket ? "event" : "event_type";
    const auto ts = find("timestamp");
    const auto us = find(user_col);
    const auto it = find(item_col);
    const auto ev = find(event_col);
    if (!ts || !us || !it || !ev) {
        fail(ErrorCode::Parse, "unrecognized CSV header: expected columns timestamp," +
                                   std::string(user_col) + "," + item_col + "," + event_col);
    }
    CsvColumns cols{*ts, *us, *it, *ev, 0};
    cols.min_fields = std::max({*ts, *us, *it, *ev}) + 1;
    return cols;
}

void parse_csv(std::istream& stream, CsvPreset preset, ParseResult& out) {
    std::string header;
    if (!std::getline(stream, header)) {
        fail(ErrorCode::Parse, "CSV input has no header row");
    }
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const CsvColumns cols = resolve_columns(header, preset);

    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < cols.min_fields) {
            ++out.malformed;
            continue;
        }
        const auto ts = parse_timestamp(fields[cols.timestamp]);
        const auto type = parse_event_token(fields[cols.event]);
        if (!ts || !type || !clean_user_id(fields[cols.user]) || !clean_item_id(fields[cols.item])) {
            ++out.malformed;
            continue;
        }
        out.records.push_back(EventRecord{*ts, fields[cols.user], fields[cols.item], *type});
    }
}

void parse_jsonl(std::istream& stream, ParseResult& out) {
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (!obj.is_object() || !obj.contains("timestamp") || !obj.contains("user_id") ||
            !obj.contains("item_id") || !obj.contains("event_type")) {
            ++out.malformed;
            continue;
        }
        const auto& ts = obj["timestamp"];
        const auto& user = obj["user_id"];
        const auto& item = obj["item_id"];
        const auto& type = obj["event_type"];
        if (!ts.is_number_integer() || ts.get<std::int64_t>() < 0 || !user.is_string() ||
            !item.is_string() || !type.is_string()) {
            ++out.malformed;
            continue;
        }
        const auto parsed_type = parse_event_token(type.get<std::string>());
        if (!parsed_type || !clean_user_id(user.get<std::string>()) ||
            !clean_item_id(item.get<std::string>())) {
            ++out.malformed;
            continue;
        }
        out.records.push_back(EventRecord{ts.get<std::int64_t>(), user.get<std::string>(),
                                          item.get<std::string>(), *parsed_type});
    }
}

// Group record indices per user in first-seen order, each group stably
// sorted by timestamp.
std::vector<std::vector<std::size_t>> group_by_user(std::span<const EventRecord> events) {
    std::unordered_map<std::string_view, std::size_t> slot;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto [it, inserted] = slot.try_emplace(events[i].user_id, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    for (auto& group : groups) {
        std::stable_sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
            return events[a].timestamp < events[b].timestamp;
        });
    }
    return groups;
}

}  // namespace

ParseResult parse_events(std::istream& stream, EventFormat format, CsvPreset preset) {
    if (!stream) fail(ErrorCode::Io, "event stream is not readable");
    ParseResult out;
    switch (format) {
        case EventFormat::Csv: parse_csv(stream, preset, out); break;
        case EventFormat::Jsonl: parse_jsonl(stream, out); break;
    }
    if (stream.bad()) fail(ErrorCode::Io, "I/O error while reading event stream");
    if (out.records.empty()) {
        fail(ErrorCode::EmptyInput, "no valid event records in input (" +
                                        std::to_string(out.malformed) + " malformed rows)");
    }
    return out;
}

ParseResult parse_events_file(const std::filesystem::path& path, EventFormat format, CsvPreset preset) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open events file: " + path.string());
    return parse_events(is, format, preset);
}

void write_events_csv(std::ostream& os, std::span<const EventRecord> events) {
    os << "timestamp,user_id,item_id,event_type\n";
    for (const auto& e : events) {
        if (e.user_id.find(',') != std::string::npos || e.item_id.find(',') != std::string::npos) {
            fail(ErrorCode::InvalidArgument, "CSV writer does not support ids containing commas");
        }
        os << e.timestamp << ',' << e.user_id << ',' << e.item_id << ','
           << (e.type == EventType::View ? "view" : "addtocart") << '\n';
    }
}

void write_events_csv_file(const std::filesystem::path& path, std::span<const EventRecord> events) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open events file for writing: " + path.string());
    write_events_csv(os, events);
    if (!os) fail(ErrorCode::Io, "failed writing events file: " + path.string());
}

Catalog::Catalog(std::vector<std::string> items) : items_(std::move(items)) {
    index_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto [it, inserted] = index_.emplace(items_[i], static_cast<ItemIndex>(i));
        if (!inserted) fail(ErrorCode::InvalidArgument, "duplicate item in catalog: " + items_[i]);
    }
}

Catalog Catalog::from_events(std::span<const EventRecord> events) {
    Catalog catalog;
    for (const auto& e : events) {
        const auto [it, inserted] =
            catalog.index_.try_emplace(e.item_id, static_cast<ItemIndex>(catalog.items_.size()));
        if (inserted) catalog.items_.push_back(e.item_id);
    }
    return catalog;
}

const std::string& Catalog::item(ItemIndex index) const {
    if (index >= items_.size()) fail(ErrorCode::IndexOutOfRange, "catalog index out of range");
    return items_[index];
}

std::optional<ItemIndex> Catalog::find(std::string_view item) const {
    const auto it = index_.find(std::string(item));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void Catalog::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open catalog file for writing: " + path.string());
    os << items_.size() << "\n";
    for (const auto& item : items_) os << item << "\n";
    if (!os) fail(ErrorCode::Io, "failed writing catalog file: " + path.string());
}

Catalog Catalog::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open catalog file: " + path.string());
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::Parse, "catalog file is empty: " + path.string());
    std::size_t n = 0;
    try {
        n = std::stoull(line);
    } catch (const std::exception&) {
        fail(ErrorCode::Parse, "catalog file has a bad count line: " + path.string());
    }
    std::vector<std::string> items;
    items.reserve(n);
    while (items.size() < n && std::getline(is, line)) {
        items.push_back(line);
    }
    if (items.size() != n) fail(ErrorCode::Parse, "catalog file truncated: " + path.string());
    return Catalog(std::move(items));
}

std::pair<std::vector<EventRecord>, std::vector<EventRecord>> chronological_split(
    std::vector<EventRecord> events, const SplitSpec& spec) {
    if (events.empty()) fail(ErrorCode::EmptyInput, "chronological_split: no events");
    if (!(spec.w2v_fraction > 0.0 && spec.w2v_fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument, "w2v_fraction must lie in (0,1)");
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
    const std::size_t n = events.size();
    std::size_t cut = static_cast<std::size_t>(std::floor(spec.w2v_fraction * static_cast<double>(n)));
    // Ties at the boundary go entirely into the earlier split.
    while (cut > 0 && cut < n && events[cut].timestamp == events[cut - 1].timestamp) ++cut;
    if (cut == 0 || cut == n) {
        fail(ErrorCode::DegenerateSplit, "chronological_split: one side is empty after boundary adjustment");
    }
    std::vector<EventRecord> embed(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<EventRecord> model(events.begin() + static_cast<std::ptrdiff_t>(cut), events.end());
    return {std::move(embed), std::move(model)};
}

BuildExamplesResult build_examples(std::span<const EventRecord> events, const Catalog& catalog) {
    BuildExamplesResult out;
    for (const auto& group : group_by_user(events)) {
        // (timestamp, dense index) of catalog-known views, time order
        std::vector<std::pair<std::int64_t, ItemIndex>> views;
        for (const std::size_t idx : group) {
            const EventRecord& e = events[idx];
            if (e.type == EventType::View) {
                if (const auto dense = catalog.find(e.item_id)) {
                    views.emplace_back(e.timestamp, *dense);
                }
                continue;
            }
            ++out.carts_seen;
            const auto label = catalog.find(e.item_id);
            if (!label) {
                ++out.dropped_unknown_label;
                continue;
            }
            // Views strictly before the label timestamp.
            const auto end = std::lower_bound(
                views.begin(), views.end(), e.timestamp,
                [](const auto& view, std::int64_t ts) { return view.first < ts; });
            const std::size_t available = static_cast<std::size_t>(end - views.begin());
            if (available == 0) {
                ++out.dropped_empty_input;
                continue;
            }
            const std::size_t keep = std::min(available, kMaxInputLength);
            TrainingExample example;
            example.user_id = e.user_id;
            example.label = *label;
            example.input.reserve(keep);
            for (std::size_t i = available - keep; i < available; ++i) {
                example.input.push_back(views[i].second);
            }
            out.examples.push_back(std::move(example));
        }
    }
    return out;
}

std::pair<std::vector<TrainingExample>, std::vector<TrainingExample>> split_by_user(
    std::span<const TrainingExample> examples, double train_fraction, std::uint64_t seed) {
    if (examples.empty()) fail(ErrorCode::EmptyInput, "split_by_user: no examples");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument, "train_fraction must lie in (0,1)");
    }
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> eval;
    for (const auto& example : examples) {
        const std::uint64_t h = mix64(stable_hash64(example.user_id), seed);
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        (u < train_fraction ? train : eval).push_back(example);
    }
    if (train.empty() || eval.empty()) {
        fail(ErrorCode::DegenerateSplit, "split_by_user: one side is empty (train users=" +
                                             std::to_string(train.size()) + ")");
    }
    return {std::move(train), std::move(eval)};
}

std::vector<std::vector<ItemIndex>> view_sequences(std::span<const EventRecord> events,
                                                   const Catalog& catalog) {
    std::vector<std::vector<ItemIndex>> sequences;
    for (const auto& group : group_by_user(events)) {
        std::vector<ItemIndex> seq;
        for (const std::size_t idx : group) {
            const EventRecord& e = events[idx];
            if (e.type != EventType::View) continue;
            if (const auto dense = catalog.find(e.item_id)) seq.push_back(*dense);
        }
        if (!seq.empty()) sequences.push_back(std::move(seq));
    }
    return sequences;
}

void save_examples_jsonl(const std::filesystem::path& path, std::span<const TrainingExample> examples) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open manifest for writing: " + path.string());
    for (const auto& example : examples) {
        json obj;
        obj["user"] = example.user_id;
        obj["input"] = example.input;
        obj["label"] = example.label;
        os << obj.dump() << "\n";
    }
    if (!os) fail(ErrorCode::Io, "failed writing manifest: " + path.string());
}

std::vector<TrainingExample> load_examples_jsonl(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open manifest: " + path.string());
    std::vector<TrainingExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (!obj.is_object() || !obj.contains("user") || !obj.contains("input") || !obj.contains("label")) {
            fail(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": bad example record");
        }
        TrainingExample example;
        example.user_id = obj["user"].get<std::string>();
        example.input = obj["input"].get<std::vector<ItemIndex>>();
        example.label = obj["label"].get<ItemIndex>();
        examples.push_back(std::move(example));
    }
    return examples;
}

void save_sequences_jsonl(const std::filesystem::path& path,
                          std::span<const std::vector<ItemIndex>> sequences) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open manifest for writing: " + path.string());
    for (const auto& seq : sequences) {
        json obj;
        obj["items"] = seq;
        os << obj.dump() << "\n";
    }
    if (!os) fail(ErrorCode::Io, "failed writing manifest: " + path.string());
}

std::vector<std::vector<ItemIndex>> load_sequences_jsonl(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open manifest: " + path.string());
    std::vector<std::vector<ItemIndex>> sequences;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (!obj.is_object() || !obj.contains("items")) {
            fail(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": bad sequence record");
        }
        sequences.push_back(obj["items"].get<std::vector<ItemIndex>>());
    }
    return sequences;
}

}  // namespace seqrec
