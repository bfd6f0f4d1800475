#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace loyalty::bench {

/// One metric of one method across seeds. A missing per-seed value marks a
/// failed run; mean and std are only set when every seed produced a value.
struct Cell {
    std::vector<std::optional<double>> per_seed;
    std::optional<double> mean;
    /// Sample standard deviation (0 for a single seed).
    std::optional<double> std;

    bool failed() const { return !mean.has_value(); }
    /// Recomputes mean and std from per_seed.
    void aggregate();

    friend bool operator==(const Cell&, const Cell&) = default;
};

struct MethodRow {
    std::string name;
    std::optional<std::size_t> n_layers;
    Cell speedup;
    Cell accuracy;
    Cell label_loyalty;
    Cell probability_loyalty;
    Cell after_attack_accuracy;
    /// Mean queries over attacked examples (the #Query column).
    Cell mean_queries;
    /// Mean queries over all attacked-or-skipped examples.
    Cell mean_queries_all;
    Cell attack_success_rate;
    /// "seed N: message" for every failed run.
    std::vector<std::string> errors;
    /// Timing diagnostics such as unstable measurements.
    std::vector<std::string> warnings;

    bool failed() const { return !errors.empty(); }

    friend bool operator==(const MethodRow&, const MethodRow&) = default;
};

/// Names of the numeric cells in report order, with accessors.
struct MetricField {
    const char* key;
    Cell MethodRow::*cell;
    /// Timing-derived cells vary between identical runs.
    bool timing;
};
extern const MetricField kMetricFields[8];

struct BenchReport {
    std::vector<MethodRow> rows;
    std::vector<std::uint64_t> seeds;
    std::string config_hash;
    std::string hardware;
    std::string log_base;
    std::string split;
    /// Wall-clock seconds spent on each seed.
    std::vector<double> seed_seconds;

    bool partial() const;
    const MethodRow* find(const std::string& name) const;

    friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

/// Full-precision JSON. Without timing the speed-up cells, timing warnings
/// and wall-clock fields are omitted, leaving only deterministic content.
nlohmann::json to_json(const BenchReport& r, bool include_timing = true);
/// Inverse of to_json; throws FormatError for malformed documents.
BenchReport report_from_json(const nlohmann::json& j);

/// Table with columns Method, #Layer, Speed-up, Acc, Label, Probability,
/// AA-Acc, #Query. Failed cells show "—" with a numbered footnote.
std::string to_markdown(const BenchReport& r);

enum class ReportFormat { json, markdown };
ReportFormat parse_report_format(const std::string& s);

/// Writes the report in the given format; IoError when the path is unwritable.
void write_report(const BenchReport& r, const std::filesystem::path& path, ReportFormat format);
BenchReport read_report(const std::filesystem::path& path);

struct CellDelta {
    std::string metric;
    std::optional<double> a;
    std::optional<double> b;
    /// b - a when both sides are present.
    std::optional<double> delta;
};

struct RowComparison {
    std::string name;
    std::vector<CellDelta> deltas;
};

struct Comparison {
    std::vector<RowComparison> rows;
    /// Methods present in only one report, tagged "(a)" or "(b)".
    std::vector<std::string> unmatched;
};

/// Per-cell mean deltas for methods present in both reports. Throws
/// InvalidInput when the reports share no method.
Comparison compare(const BenchReport& a, const BenchReport& b);
nlohmann::json to_json(const Comparison& c);
std::string to_markdown(const Comparison& c);

}  // namespace loyalty::bench
