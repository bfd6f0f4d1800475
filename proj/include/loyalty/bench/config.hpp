#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "loyalty/compress/recipe.hpp"
#include "loyalty/data/dataset.hpp"
#include "loyalty/data/embeddings.hpp"
#include "loyalty/data/synthetic.hpp"
#include "loyalty/metrics/loyalty.hpp"
#include "loyalty/metrics/speedup.hpp"

namespace loyalty::bench {

struct DatasetConfig {
    /// "synthetic" or "file".
    std::string source = "synthetic";
    std::filesystem::path path;
    data::FileFormat format = data::FileFormat::csv;
    std::vector<std::string> label_names;
    /// Generator settings; the seed comes from the run seed.
    data::SyntheticOptions synthetic;
};

struct TokenizerConfig {
    std::size_t max_vocab = 1000;
    std::size_t max_length = 32;
};

struct ModelShape {
    std::size_t hidden = 64;
    std::size_t heads = 4;
    std::size_t layers = 4;
    std::size_t ffn = 256;
};

struct CompressionConfig {
    compress::RecipeDefaults defaults;
    /// Theseus slope; when unset it is chosen so that p reaches 1 halfway
    /// through the replacing phase.
    std::optional<double> theseus_k;
    /// Dev examples used for activation calibration.
    std::size_t calibration_examples = 128;
};

struct MetricConfig {
    metrics::LogBase log_base = metrics::LogBase::two;
    data::Split split = data::Split::test;
    /// Only "mean_std" (mean with sample standard deviation) is supported.
    std::string aggregation = "mean_std";
};

struct AttackConfig {
    /// Examples attacked per method, drawn from the evaluation split in a
    /// seeded order.
    std::size_t max_examples = 200;
    std::size_t neighbors = 8;
    double min_cosine = 0.5;
    std::size_t max_candidates = 8;
    data::EmbeddingOptions embeddings;
};

struct SpeedupConfig {
    metrics::TimingOptions timing;
    std::size_t batch_size = 64;
};

struct BenchConfig {
    DatasetConfig dataset;
    TokenizerConfig tokenizer;
    ModelShape model;
    compress::TrainOptions teacher;
    CompressionConfig compression;
    std::vector<compress::CompressionRecipe> recipes;
    MetricConfig metrics;
    AttackConfig attack;
    SpeedupConfig speedup;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::filesystem::path output_dir = "bench_out";

    /// Throws InvalidConfig for inconsistent settings (duplicate recipe
    /// names, empty seed list, bad model shape, ...).
    void validate() const;
};

/// The thirteen single and combined compression methods of the standard report.
std::vector<compress::CompressionRecipe> default_recipes();

/// A configuration with every default filled in.
BenchConfig default_config();

/// Parses a config document. Missing keys keep their defaults; unknown keys
/// and ill-typed values throw InvalidConfig naming the offending path. The
/// result is validated.
BenchConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchConfig& c);
/// Reads and parses a JSON config file (IoError when unreadable).
BenchConfig load_config(const std::filesystem::path& path);

/// 16 hex digits identifying every setting that influences report numbers
/// (seeds and output directory excluded).
std::string config_hash(const BenchConfig& c);

}  // namespace loyalty::bench
