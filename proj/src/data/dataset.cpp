#include "loyalty/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "loyalty/errors.hpp"
#include "loyalty/rng.hpp"

namespace loyalty::data {

using nlohmann::json;

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev" || s == "validation") return Split::dev;
    if (s == "test") return Split::test;
    throw InvalidInput("unknown split '" + s + "'");
}

std::string to_string(FileFormat f) { return f == FileFormat::csv ? "csv" : "jsonl"; }

FileFormat parse_format(const std::string& s) {
    if (s == "csv") return FileFormat::csv;
    if (s == "jsonl") return FileFormat::jsonl;
    throw InvalidInput("unknown dataset format '" + s + "' (expected csv or jsonl)");
}

std::vector<Example> TextDataset::split(Split s) const {
    std::vector<Example> out;
    for (const auto& e : examples) {
        if (e.split == s) out.push_back(e);
    }
    return out;
}

std::vector<std::string> TextDataset::texts(Split s) const {
    std::vector<std::string> out;
    for (const auto& e : examples) {
        if (e.split == s) out.push_back(e.text);
    }
    return out;
}

void TextDataset::validate() const {
    if (label_names.empty()) throw InvalidInput("dataset has no label names");
    std::unordered_set<std::string> ids;
    for (const auto& e : examples) {
        if (!ids.insert(e.id).second) throw InvalidInput("duplicate example id '" + e.id + "'");
        if (e.label >= label_names.size()) {
            throw InvalidInput("example '" + e.id + "' has label " + std::to_string(e.label) +
                               " but only " + std::to_string(label_names.size()) + " classes");
        }
    }
}

namespace {

struct RawRow {
    std::optional<std::string> id;
    std::string text;
    std::string label;
    std::optional<std::string> split;
    std::size_t line = 0;
};

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty() || was_quoted) {
                throw FormatError("stray quote inside unquoted CSV field", std::nullopt, line_no);
            }
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            if (was_quoted) {
                throw FormatError("text after closing quote in CSV field", std::nullopt, line_no);
            }
            field += c;
        }
    }
    if (quoted) throw FormatError("unterminated quoted CSV field", std::nullopt, line_no);
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && !s.empty()) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<RawRow> read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        header = split_csv_line(line, line_no);
        break;
    }
    if (header.empty()) throw FormatError("CSV file has no header row", std::nullopt, line_no);

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!col.emplace(header[i], i).second) {
            throw FormatError("duplicate CSV column '" + header[i] + "'", std::nullopt, line_no);
        }
    }
    for (const char* required : {"text", "label"}) {
        if (!col.contains(required)) {
            throw FormatError(std::string("CSV header lacks a '") + required + "' column",
                              std::nullopt, line_no);
        }
    }

    std::vector<RawRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line, line_no);
        if (fields.size() != header.size()) {
            throw FormatError("expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()),
                              std::nullopt, line_no);
        }
        RawRow row;
        row.line = line_no;
        row.text = fields[col.at("text")];
        row.label = fields[col.at("label")];
        if (row.label.empty()) throw FormatError("row is missing its label", std::nullopt, line_no);
        if (auto it = col.find("id"); it != col.end() && !fields[it->second].empty()) {
            row.id = fields[it->second];
        }
        if (auto it = col.find("split"); it != col.end()) row.split = fields[it->second];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string scalar_to_string(const json& v, const char* field, std::size_t line_no) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw FormatError(std::string("field '") + field + "' must be a string or integer",
                      std::nullopt, line_no);
}

std::vector<RawRow> read_jsonl(std::istream& in) {
    std::vector<RawRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(std::string("invalid JSON: ") + e.what(), std::nullopt, line_no);
        }
        if (!j.is_object()) throw FormatError("row is not a JSON object", std::nullopt, line_no);
        RawRow row;
        row.line = line_no;
        if (!j.contains("text") || !j["text"].is_string()) {
            throw FormatError("row is missing a string 'text' field", std::nullopt, line_no);
        }
        row.text = j["text"].get<std::string>();
        if (!j.contains("label") || j["label"].is_null()) {
            throw FormatError("row is missing its label", std::nullopt, line_no);
        }
        row.label = scalar_to_string(j["label"], "label", line_no);
        if (j.contains("id") && !j["id"].is_null()) row.id = scalar_to_string(j["id"], "id", line_no);
        if (j.contains("split") && !j["split"].is_null()) {
            row.split = scalar_to_string(j["split"], "split", line_no);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

bool is_integer(const std::string& s) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::vector<std::string> infer_labels(const std::vector<RawRow>& rows) {
    std::set<std::string> unique;
    for (const auto& r : rows) unique.insert(r.label);
    std::vector<std::string> names(unique.begin(), unique.end());
    if (std::all_of(names.begin(), names.end(), is_integer)) {
        std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
            return std::stoll(a) < std::stoll(b);
        });
    }
    return names;
}

}  // namespace

TextDataset ingest(const std::filesystem::path& path, FileFormat format,
                   const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file " + path.string());

    std::vector<RawRow> rows = format == FileFormat::csv ? read_csv(in) : read_jsonl(in);
    if (rows.empty()) throw FormatError("dataset file has no rows", std::nullopt, 1);

    TextDataset ds;
    ds.provenance = path.string();
    ds.seed = options.split_seed;
    ds.label_names = options.label_names.empty() ? infer_labels(rows) : options.label_names;

    std::unordered_map<std::string, std::size_t> label_index;
    for (std::size_t i = 0; i < ds.label_names.size(); ++i) label_index.emplace(ds.label_names[i], i);

    const bool any_split = std::any_of(rows.begin(), rows.end(), [](const RawRow& r) {
        return r.split.has_value();
    });
    std::unordered_set<std::string> seen_ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RawRow& r = rows[i];
        Example e;
        e.id = r.id.value_or(std::to_string(i));
        if (!seen_ids.insert(e.id).second) {
            throw FormatError("duplicate id '" + e.id + "'", std::nullopt, r.line);
        }
        e.text = r.text;
        auto it = label_index.find(r.label);
        if (it == label_index.end()) {
            throw FormatError("unknown label '" + r.label + "'", std::nullopt, r.line);
        }
        e.label = it->second;
        if (any_split) {
            if (!r.split || r.split->empty()) {
                throw FormatError("row is missing its split", std::nullopt, r.line);
            }
            try {
                e.split = parse_split(*r.split);
            } catch (const InvalidInput& err) {
                throw FormatError(err.what(), std::nullopt, r.line);
            }
        }
        ds.examples.push_back(std::move(e));
    }

    if (!any_split) {
        std::vector<std::size_t> order(ds.examples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng = make_rng(options.split_seed, "split");
        shuffle(order.begin(), order.end(), rng);
        const std::size_t n_test = order.size() / 10;
        const std::size_t n_dev = order.size() / 10;
        for (std::size_t k = 0; k < order.size(); ++k) {
            Split s = Split::train;
            if (k < n_test) {
                s = Split::test;
            } else if (k < n_test + n_dev) {
                s = Split::dev;
            }
            ds.examples[order[k]].split = s;
        }
    }
    return ds;
}

void export_dataset(const TextDataset& dataset, const std::filesystem::path& path,
                    FileFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset file " + path.string());
    if (format == FileFormat::csv) {
        out << "id,text,label,split\n";
        for (const auto& e : dataset.examples) {
            out << csv_escape(e.id) << ',' << csv_escape(e.text) << ','
                << csv_escape(dataset.label_names.at(e.label)) << ',' << to_string(e.split) << '\n';
        }
    } else {
        for (const auto& e : dataset.examples) {
            json j = {{"id", e.id},
                      {"text", e.text},
                      {"label", dataset.label_names.at(e.label)},
                      {"split", to_string(e.split)}};
            out << j.dump() << '\n';
        }
    }
    if (!out) throw IoError("failed writing dataset file " + path.string());
}

}  // namespace loyalty::data
