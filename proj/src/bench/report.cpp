#include "loyalty/bench/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "loyalty/errors.hpp"

namespace loyalty::bench {

using nlohmann::json;

const MetricField kMetricFields[8] = {
    {"speedup", &MethodRow::speedup, true},
    {"accuracy", &MethodRow::accuracy, false},
    {"label_loyalty", &MethodRow::label_loyalty, false},
    {"probability_loyalty", &MethodRow::probability_loyalty, false},
    {"after_attack_accuracy", &MethodRow::after_attack_accuracy, false},
    {"mean_queries", &MethodRow::mean_queries, false},
    {"mean_queries_all", &MethodRow::mean_queries_all, false},
    {"attack_success_rate", &MethodRow::attack_success_rate, false},
};

void Cell::aggregate() {
    mean.reset();
    std.reset();
    if (per_seed.empty()) return;
    double sum = 0.0;
    for (const auto& v : per_seed) {
        if (!v) return;
        sum += *v;
    }
    const double n = static_cast<double>(per_seed.size());
    const double m = sum / n;
    double ss = 0.0;
    for (const auto& v : per_seed) ss += (*v - m) * (*v - m);
    mean = m;
    std = per_seed.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

bool BenchReport::partial() const {
    for (const auto& r : rows) {
        if (r.failed()) return true;
    }
    return false;
}

const MethodRow* BenchReport::find(const std::string& name) const {
    for (const auto& r : rows) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_number(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_number()) throw FormatError("report cell value must be a number or null", std::nullopt);
    return j.get<double>();
}

json cell_json(const Cell& c) {
    json seeds = json::array();
    for (const auto& v : c.per_seed) seeds.push_back(optional_json(v));
    return {{"per_seed", seeds}, {"mean", optional_json(c.mean)}, {"std", optional_json(c.std)}};
}

Cell cell_from_json(const json& j) {
    Cell c;
    for (const auto& v : j.at("per_seed")) c.per_seed.push_back(optional_number(v));
    c.mean = optional_number(j.at("mean"));
    c.std = optional_number(j.at("std"));
    return c;
}

std::string format_cell(const Cell& c, const char* suffix = "") {
    if (c.per_seed.size() > 1) return fmt::format("{:.1f}{} (±{:.1f})", *c.mean, suffix, *c.std);
    return fmt::format("{:.1f}{}", *c.mean, suffix);
}

}  // namespace

json to_json(const BenchReport& r, bool include_timing) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        json jr = {{"name", row.name},
                   {"n_layers", row.n_layers ? json(*row.n_layers) : json(nullptr)},
                   {"errors", row.errors}};
        for (const auto& f : kMetricFields) {
            if (f.timing && !include_timing) continue;
            jr[f.key] = cell_json(row.*f.cell);
        }
        if (include_timing) jr["warnings"] = row.warnings;
        rows.push_back(std::move(jr));
    }
    json j = {{"provenance",
               {{"config_hash", r.config_hash},
                {"seeds", r.seeds},
                {"hardware", r.hardware},
                {"log_base", r.log_base},
                {"split", r.split}}},
              {"partial", r.partial()},
              {"rows", rows}};
    if (include_timing) j["timing"] = {{"seed_seconds", r.seed_seconds}};
    return j;
}

BenchReport report_from_json(const json& j) {
    try {
        BenchReport r;
        const auto& p = j.at("provenance");
        r.config_hash = p.at("config_hash").get<std::string>();
        r.seeds = p.at("seeds").get<std::vector<std::uint64_t>>();
        r.hardware = p.at("hardware").get<std::string>();
        r.log_base = p.at("log_base").get<std::string>();
        r.split = p.at("split").get<std::string>();
        for (const auto& jr : j.at("rows")) {
            MethodRow row;
            row.name = jr.at("name").get<std::string>();
            if (!jr.at("n_layers").is_null()) row.n_layers = jr.at("n_layers").get<std::size_t>();
            row.errors = jr.at("errors").get<std::vector<std::string>>();
            for (const auto& f : kMetricFields) {
                if (jr.contains(f.key)) row.*f.cell = cell_from_json(jr.at(f.key));
            }
            if (jr.contains("warnings")) row.warnings = jr.at("warnings").get<std::vector<std::string>>();
            r.rows.push_back(std::move(row));
        }
        if (j.contains("timing")) {
            r.seed_seconds = j.at("timing").at("seed_seconds").get<std::vector<double>>();
        }
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what(), std::nullopt);
    }
}

std::string to_markdown(const BenchReport& r) {
    std::ostringstream out;
    out << "| Method | #Layer | Speed-up | Acc | Label | Probability | AA-Acc | #Query |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    std::vector<std::string> footnotes;
    for (const auto& row : r.rows) {
        std::string mark;
        const auto cell = [&](const Cell& c, const char* suffix = "") -> std::string {
            if (!c.failed()) return format_cell(c, suffix);
            if (mark.empty()) {
                std::string why;
                for (const auto& e : row.errors) why += (why.empty() ? "" : "; ") + e;
                if (why.empty()) why = "no value recorded";
                footnotes.push_back(row.name + ": " + why);
                mark = "—[" + std::to_string(footnotes.size()) + "]";
            }
            return mark;
        };
        out << "| " << row.name << " | " << (row.n_layers ? std::to_string(*row.n_layers) : "—")
            << " | " << cell(row.speedup, "×") << " | " << cell(row.accuracy) << " | "
            << cell(row.label_loyalty) << " | " << cell(row.probability_loyalty) << " | "
            << cell(row.after_attack_accuracy) << " | " << cell(row.mean_queries) << " |\n";
    }
    out << "\nSeeds: ";
    for (std::size_t i = 0; i < r.seeds.size(); ++i) out << (i ? ", " : "") << r.seeds[i];
    out << ". Mean (±sample std) over seeds. Config " << r.config_hash << ", split " << r.split
        << ", log base " << r.log_base << ".\n";
    if (!footnotes.empty()) {
        out << "\n";
        for (std::size_t i = 0; i < footnotes.size(); ++i) {
            out << "[" << i + 1 << "] " << footnotes[i] << "\n";
        }
    }
    return out.str();
}

ReportFormat parse_report_format(const std::string& s) {
    if (s == "json") return ReportFormat::json;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    throw InvalidConfig("unknown report format '" + s + "' (expected json or markdown)");
}

void write_report(const BenchReport& r, const std::filesystem::path& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report to " + path.string());
    if (format == ReportFormat::json) {
        out << to_json(r).dump(2) << "\n";
    } else {
        out << to_markdown(r);
    }
    if (!out) throw IoError("failed writing report to " + path.string());
}

BenchReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read report " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("report is not valid JSON: ") + e.what(), e.byte);
    }
    return report_from_json(j);
}

Comparison compare(const BenchReport& a, const BenchReport& b) {
    Comparison c;
    for (const auto& ra : a.rows) {
        const MethodRow* rb = b.find(ra.name);
        if (!rb) {
            c.unmatched.push_back(ra.name + " (a)");
            continue;
        }
        RowComparison row{ra.name, {}};
        for (const auto& f : kMetricFields) {
            CellDelta d{f.key, (ra.*f.cell).mean, (rb->*f.cell).mean, std::nullopt};
            if (d.a && d.b) d.delta = *d.b - *d.a;
            row.deltas.push_back(d);
        }
        c.rows.push_back(std::move(row));
    }
    for (const auto& rb : b.rows) {
        if (!a.find(rb.name)) c.unmatched.push_back(rb.name + " (b)");
    }
    if (c.rows.empty()) throw InvalidInput("the reports share no method");
    return c;
}

json to_json(const Comparison& c) {
    json rows = json::array();
    for (const auto& r : c.rows) {
        json deltas = json::object();
        for (const auto& d : r.deltas) {
            deltas[d.metric] = {{"a", optional_json(d.a)}, {"b", optional_json(d.b)},
                                {"delta", optional_json(d.delta)}};
        }
        rows.push_back({{"name", r.name}, {"deltas", deltas}});
    }
    return {{"rows", rows}, {"unmatched", c.unmatched}};
}

std::string to_markdown(const Comparison& c) {
    std::ostringstream out;
    out << "| Method | Δ Speed-up | Δ Acc | Δ Label | Δ Probability | Δ AA-Acc | Δ #Query |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : c.rows) {
        out << "| " << r.name;
        for (const auto& d : r.deltas) {
            if (d.metric == "mean_queries_all" || d.metric == "attack_success_rate") continue;
            out << " | " << (d.delta ? fmt::format("{:+.1f}", *d.delta) : "—");
        }
        out << " |\n";
    }
    if (!c.unmatched.empty()) {
        out << "\nUnmatched: ";
        for (std::size_t i = 0; i < c.unmatched.size(); ++i) out << (i ? ", " : "") << c.unmatched[i];
        out << "\n";
    }
    return out.str();
}

}  // namespace loyalty::bench
