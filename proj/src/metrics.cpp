#include "seqrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace seqrec {

double ndcg_at_10(const RecommendationRun& run) {
    if (run.entries.empty()) fail(ErrorCode::EmptyInput, "ndcg_at_10: empty run");
    double total = 0.0;
    for (const auto& entry : run.entries) {
        const std::size_t depth = std::min<std::size_t>(entry.recommended.size(), 10);
        for (std::size_t pos = 0; pos < depth; ++pos) {
            if (entry.recommended[pos] == entry.label) {
                total += 1.0 / std::log2(static_cast<double>(pos + 2));
                break;
            }
        }
    }
    return total / static_cast<double>(run.entries.size());
}

double gini(std::span<const std::uint64_t> exposure) {
    const std::size_t n = exposure.size();
    if (n < 2) fail(ErrorCode::InvalidArgument, "gini: catalog must contain at least 2 items");
    std::vector<std::uint64_t> sorted(exposure.begin(), exposure.end());
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(sorted[i]);
        total += x;
        weighted += (2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0) * x;
    }
    if (total == 0.0) fail(ErrorCode::EmptyInput, "gini: total exposure is zero");
    return weighted / (static_cast<double>(n) * total);
}

double coverage(std::span<const std::uint64_t> exposure) {
    if (exposure.empty()) fail(ErrorCode::InvalidArgument, "coverage: empty catalog");
    std::size_t nonzero = 0;
    for (const auto c : exposure) {
        if (c > 0) ++nonzero;
    }
    return static_cast<double>(nonzero) / static_cast<double>(exposure.size());
}

std::vector<RankCount> rank_frequency_report(std::span<const std::uint64_t> exposure) {
    std::vector<std::uint64_t> counts;
    counts.reserve(exposure.size());
    for (const auto c : exposure) {
        if (c > 0) counts.push_back(c);
    }
    std::sort(counts.begin(), counts.end(), std::greater<>());
    std::vector<RankCount> report(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        report[i] = RankCount{static_cast<std::uint32_t>(i + 1), counts[i]};
    }
    return report;
}

std::vector<std::uint64_t> exposure_histogram(const RecommendationRun& run) {
    std::vector<std::uint64_t> exposure(run.n_catalog, 0);
    for (const auto& entry : run.entries) {
        for (const auto item : entry.recommended) {
            if (item >= run.n_catalog) fail(ErrorCode::IndexOutOfRange, "exposure_histogram: item outside catalog");
            ++exposure[item];
        }
    }
    return exposure;
}

EvalReport evaluate_run(const RecommendationRun& run) {
    EvalReport report;
    report.exposure = exposure_histogram(run);
    report.ndcg_at_10 = ndcg_at_10(run);
    report.gini = gini(report.exposure);
    report.coverage = coverage(report.exposure);
    report.gini_in_target_band = report.gini >= 0.4 && report.gini <= 0.7;
    report.n_examples = run.entries.size();
    return report;
}

EvalReport merge_reports(const EvalReport& a, const EvalReport& b) {
    if (a.exposure.size() != b.exposure.size()) {
        fail(ErrorCode::InvalidArgument, "merge_reports: catalog sizes differ");
    }
    EvalReport merged;
    merged.exposure.resize(a.exposure.size());
    for (std::size_t i = 0; i < a.exposure.size(); ++i) {
        merged.exposure[i] = a.exposure[i] + b.exposure[i];
    }
    merged.n_examples = a.n_examples + b.n_examples;
    const double wa = static_cast<double>(a.n_examples);
    const double wb = static_cast<double>(b.n_examples);
    merged.ndcg_at_10 = (a.ndcg_at_10 * wa + b.ndcg_at_10 * wb) / (wa + wb);
    merged.gini = gini(merged.exposure);
    merged.coverage = coverage(merged.exposure);
    merged.gini_in_target_band = merged.gini >= 0.4 && merged.gini <= 0.7;
    return merged;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_report(const std::filesystem::path& path, const EvalReport& report,
                 std::span<const std::pair<std::string, std::string>> extra_echo) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open report file for writing: " + path.string());
    os << "ndcg_at_10 " << format_double(report.ndcg_at_10) << "\n";
    os << "gini " << format_double(report.gini) << "\n";
    os << "coverage " << format_double(report.coverage) << "\n";
    os << "gini_in_target_band " << (report.gini_in_target_band ? "true" : "false") << "\n";
    os << "n_examples " << report.n_examples << "\n";
    os << "n_catalog " << report.exposure.size() << "\n";
    for (const auto& [key, value] : extra_echo) {
        os << key << " " << value << "\n";
    }
    if (!os) fail(ErrorCode::Io, "failed writing report file: " + path.string());
}

EvalReport load_report(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::Io, "cannot open report file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto space = line.find(' ');
        if (space == std::string::npos) continue;
        kv.emplace(line.substr(0, space), line.substr(space + 1));
    }
    EvalReport report;
    const auto need = [&](const char* key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) fail(ErrorCode::Parse, std::string("report missing key: ") + key);
        return it->second;
    };
    report.ndcg_at_10 = std::stod(need("ndcg_at_10"));
    report.gini = std::stod(need("gini"));
    report.coverage = std::stod(need("coverage"));
    report.gini_in_target_band = need("gini_in_target_band") == "true";
    report.n_examples = static_cast<std::size_t>(std::stoull(need("n_examples")));
    return report;
}

void save_rank_frequency_tsv(const std::filesystem::path& path,
                             std::span<const std::uint64_t> exposure) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open TSV for writing: " + path.string());
    os << "rank\tcount\n";
    for (const auto& row : rank_frequency_report(exposure)) {
        os << row.rank << "\t" << row.count << "\n";
    }
    if (!os) fail(ErrorCode::Io, "failed writing TSV: " + path.string());
}

}  // namespace seqrec
