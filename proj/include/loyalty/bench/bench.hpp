#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loyalty/attack/attack.hpp"
#include "loyalty/bench/config.hpp"
#include "loyalty/bench/report.hpp"
#include "loyalty/data/encoded.hpp"
#include "loyalty/model/classifier.hpp"
#include "loyalty/model/tokenizer.hpp"

namespace loyalty::bench {

/// File layout of one seed's artifacts under the output directory.
struct SeedPaths {
    std::filesystem::path root;

    SeedPaths(const std::filesystem::path& output_dir, std::uint64_t seed);

    std::filesystem::path dataset() const { return root / "dataset.jsonl"; }
    std::filesystem::path tokenizer() const { return root / "tokenizer.json"; }
    std::filesystem::path teacher() const { return root / "teacher.ckpt"; }
    std::filesystem::path synonyms() const { return root / "synonyms.json"; }
    std::filesystem::path method_dir(const std::string& method) const;
};

/// Lower-case directory name for a method ("Head Prune + KD" -> "head-prune-kd").
std::string method_slug(const std::string& name);

/// The dataset, tokenizer and encoded splits of one seed.
struct SeedData {
    data::TextDataset dataset;
    model::Tokenizer tokenizer;
    std::vector<data::EncodedExample> train;
    std::vector<data::EncodedExample> dev;
    /// The evaluation split named in the config.
    std::vector<data::EncodedExample> eval;
};

/// Generates (synthetic) or reads (file) the dataset for `seed` and builds the
/// tokenizer on its training split.
SeedData prepare_data(const BenchConfig& config, std::uint64_t seed);

model::ModelConfig teacher_config(const BenchConfig& config, const SeedData& data);

/// Trains the teacher from the seed's "init" and "teacher" streams.
model::ClassifierModel train_teacher(const BenchConfig& config, const SeedData& data,
                                     std::uint64_t seed);

/// The recipes selected by `methods` (all when empty), in config order.
/// Throws InvalidConfig for a name that matches no recipe.
std::vector<compress::CompressionRecipe> select_recipes(const BenchConfig& config,
                                                        const std::vector<std::string>& methods);

/// Writes dataset, tokenizer and teacher checkpoint for one seed.
void run_train_stage(const BenchConfig& config, std::uint64_t seed);

/// Runs each recipe from the stored teacher and writes, per method, the
/// compressed checkpoint, the stage log, predictions on the evaluation split
/// and the speed-up measurement. A failing recipe leaves an error.txt
/// instead. Runs the train stage first when the teacher is missing.
void run_compress_stage(const BenchConfig& config, std::uint64_t seed,
                        const std::vector<compress::CompressionRecipe>& recipes);

/// Builds the synonym table and attacks every stored method checkpoint,
/// writing one outcome stream per method.
void run_attack_stage(const BenchConfig& config, std::uint64_t seed,
                      const std::vector<compress::CompressionRecipe>& recipes);

/// Report numbers of one method on one seed.
struct MethodMetrics {
    std::size_t n_layers = 0;
    double speedup = 1.0;
    std::vector<std::string> warnings;
    double accuracy = 0.0;
    double label_loyalty = 0.0;
    double probability_loyalty = 0.0;
    attack::RobustnessReport robustness;
};

struct MethodResult {
    std::optional<MethodMetrics> metrics;
    std::string error;
};

/// Recomputes every report cell of `recipes` for one seed from the files on
/// disk alone (no training or attacking).
std::map<std::string, MethodResult> evaluate_seed(const BenchConfig& config, std::uint64_t seed,
                                                  const std::vector<compress::CompressionRecipe>& recipes);

/// Folds per-seed results into report rows (mean and sample std).
BenchReport aggregate(const BenchConfig& config, const std::vector<std::uint64_t>& seeds,
                      const std::vector<compress::CompressionRecipe>& recipes,
                      const std::vector<std::map<std::string, MethodResult>>& per_seed,
                      const std::vector<double>& seed_seconds);

struct BenchOptions {
    /// Recipe names to run; empty runs all of them.
    std::vector<std::string> methods;
};

/// Trains, compresses, attacks and evaluates every seed, then writes
/// config.json, report.json and report.md to the output directory.
BenchReport run_bench(const BenchConfig& config, const BenchOptions& options = {});

/// Short description of the host for the report.
std::string hardware_note();

}  // namespace loyalty::bench
