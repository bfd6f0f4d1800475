#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace loyalty::data {

enum class Split { train, dev, test };

std::string to_string(Split s);
/// Parses "train" / "dev" / "test"; throws InvalidInput otherwise.
Split parse_split(const std::string& s);

struct Example {
    std::string id;
    std::string text;
    std::size_t label = 0;
    Split split = Split::train;

    friend bool operator==(const Example&, const Example&) = default;
};

/// Labeled text examples with a train/dev/test assignment.
struct TextDataset {
    std::vector<Example> examples;
    std::vector<std::string> label_names;
    /// File path or "synthetic(seed=...)".
    std::string provenance;
    std::uint64_t seed = 0;
    /// Word pairs planted by the synthetic generator as interchangeable.
    std::vector<std::pair<std::string, std::string>> planted_synonyms;

    std::size_t num_classes() const { return label_names.size(); }
    std::vector<Example> split(Split s) const;
    std::vector<std::string> texts(Split s) const;

    /// Throws InvalidInput when ids repeat, labels are out of range, or a split
    /// is empty.
    void validate() const;
};

enum class FileFormat { csv, jsonl };
std::string to_string(FileFormat f);
FileFormat parse_format(const std::string& s);

struct IngestOptions {
    /// Known labels; when empty they are inferred (sorted unique values).
    std::vector<std::string> label_names;
    /// Seed for the 80/10/10 split when the file has no split column.
    std::uint64_t split_seed = 0;
};

/// Reads (id?, text, label, split?) rows. CSV needs a header row naming the
/// columns. Throws FormatError with the 1-based line number for malformed
/// rows and unknown labels.
TextDataset ingest(const std::filesystem::path& path, FileFormat format,
                   const IngestOptions& options = {});

/// Writes every example with its id, text, label name and split.
void export_dataset(const TextDataset& dataset, const std::filesystem::path& path,
                    FileFormat format);

}  // namespace loyalty::data
