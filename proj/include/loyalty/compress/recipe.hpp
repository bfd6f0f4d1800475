#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "loyalty/compress/theseus.hpp"
#include "loyalty/compress/trainer.hpp"
#include "loyalty/data/encoded.hpp"
#include "loyalty/metrics/loyalty.hpp"
#include "loyalty/model/classifier.hpp"

namespace loyalty::compress {

enum class StageType {
    truncate,
    truncate_finetune,
    pure_kd,
    patient_kd,
    ptq,
    qat,
    head_prune,
    theseus,
    finetune,
};

std::string to_string(StageType t);
/// Accepts the names above with dashes, plus "kd" for pure-kd.
StageType parse_stage_type(const std::string& s);
bool is_training_stage(StageType t);

/// One recipe step. Unset hyperparameters fall back to RecipeDefaults.
struct Stage {
    StageType type = StageType::finetune;
    std::optional<std::size_t> layers;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> post_epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
    std::optional<LossChoice> loss;
    std::optional<double> temperature;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> fraction;
    std::optional<double> b;
    std::optional<double> k;
    /// For ptq/qat: int8 weights are final and no later stage may train.
    bool final_precision = false;

    friend bool operator==(const Stage&, const Stage&) = default;
};

struct CompressionRecipe {
    std::string name;
    std::vector<Stage> stages;

    /// Throws InvalidConfig naming the stage when more than one quantization
    /// stage is final or a training stage follows a final one.
    void validate() const;

    friend bool operator==(const CompressionRecipe&, const CompressionRecipe&) = default;
};

nlohmann::json to_json(const Stage& s);
/// Rejects unknown keys and ill-typed values with InvalidConfig.
Stage stage_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CompressionRecipe& r);
CompressionRecipe recipe_from_json(const nlohmann::json& j);

/// Hyperparameters used when a stage leaves them unset.
struct RecipeDefaults {
    TrainOptions train;
    /// Student depth for truncation; 0 means half the teacher's layers.
    std::size_t student_layers = 0;
    double temperature = 10.0;
    double patient_alpha = 0.7;
    double patient_beta = 500.0;
    double prune_fraction = 0.45;
    ReplacementSchedule schedule;
    std::size_t theseus_post_epochs = 1;
    std::size_t importance_batch_size = 32;

    friend bool operator==(const RecipeDefaults&, const RecipeDefaults&) = default;
};

/// Teacher outputs on the training set, computed on first use.
class TeacherCache {
public:
    TeacherCache(const model::ClassifierModel& teacher,
                 std::span<const data::EncodedExample> train_set)
        : teacher_(teacher), train_set_(train_set) {}

    const TeacherSignals& signals(bool with_hidden);

private:
    const model::ClassifierModel& teacher_;
    std::span<const data::EncodedExample> train_set_;
    std::unique_ptr<TeacherSignals> logits_only_;
    std::unique_ptr<TeacherSignals> with_hidden_;
};

struct StageLogEntry {
    std::string recipe;
    std::size_t index = 0;
    std::string stage;
    std::string provenance;
    std::size_t n_layers = 0;
    std::size_t active_heads = 0;
    bool quantized = false;
    bool int8_final = false;
    std::optional<double> final_train_loss;
    double accuracy = 0.0;
    double label_loyalty = 0.0;
    double probability_loyalty = 0.0;

    friend bool operator==(const StageLogEntry&, const StageLogEntry&) = default;
};

nlohmann::json to_json(const StageLogEntry& e);

struct RecipeResult {
    model::ClassifierModel model;
    std::vector<StageLogEntry> log;
};

/// Finished recipe prefixes keyed by their serialized stage list. A cache
/// belongs to one teacher and context; runs from an explicit start model skip it.
using PrefixCache = std::map<std::string, RecipeResult>;

struct RecipeContext {
    const model::ClassifierModel* teacher = nullptr;
    std::span<const data::EncodedExample> train;
    /// Importance scoring for head pruning.
    std::span<const data::EncodedExample> dev;
    /// Activation calibration for quantization.
    std::span<const data::EncodedExample> calibration;
    /// Examples for the per-stage accuracy and loyalty snapshot.
    std::span<const data::EncodedExample> snapshot;
    TeacherCache* teacher_cache = nullptr;
    /// Teacher predictions on `snapshot` (computed when null).
    const metrics::PredictionSet* teacher_snapshot = nullptr;
    std::uint64_t seed = 0;
    RecipeDefaults defaults;
    /// Index given to the first stage, so stages run one at a time draw the
    /// same random streams as inside the full recipe.
    std::size_t stage_offset = 0;
    metrics::LogBase log_base = metrics::LogBase::two;
    PrefixCache* prefix_cache = nullptr;
};

/// Executes the stages in order starting from `start` (the teacher when
/// null). An empty recipe returns the start model unchanged.
RecipeResult run_recipe(const CompressionRecipe& recipe, const RecipeContext& context,
                        const model::ClassifierModel* start = nullptr);

void write_stage_log(const std::vector<StageLogEntry>& log, const std::filesystem::path& path);

}  // namespace loyalty::compress
