#include "loyalty/compress/recipe.hpp"

#include <fstream>
#include <set>

#include "loyalty/compress/distill.hpp"
#include "loyalty/compress/prune.hpp"
#include "loyalty/compress/quantize.hpp"
#include "loyalty/errors.hpp"
#include "loyalty/metrics/predict.hpp"

namespace loyalty::compress {

using nlohmann::json;

namespace {

struct StageName {
    StageType type;
    const char* name;
};

constexpr StageName kStageNames[] = {
    {StageType::truncate, "truncate"},
    {StageType::truncate_finetune, "truncate-finetune"},
    {StageType::pure_kd, "pure-kd"},
    {StageType::patient_kd, "patient-kd"},
    {StageType::ptq, "ptq"},
    {StageType::qat, "qat"},
    {StageType::head_prune, "head-prune"},
    {StageType::theseus, "theseus"},
    {StageType::finetune, "finetune"},
};

const std::set<std::string> kTrainKeys = {"epochs", "batch_size", "learning_rate"};

std::set<std::string> allowed_keys(StageType t) {
    std::set<std::string> keys = {"type"};
    auto add = [&keys](std::initializer_list<const char*> more) {
        for (const char* k : more) keys.insert(k);
    };
    if (is_training_stage(t)) keys.insert(kTrainKeys.begin(), kTrainKeys.end());
    switch (t) {
        case StageType::truncate: add({"layers"}); break;
        case StageType::truncate_finetune: add({"layers", "loss", "temperature", "alpha"}); break;
        case StageType::pure_kd: add({"temperature", "alpha"}); break;
        case StageType::patient_kd: add({"temperature", "alpha", "beta"}); break;
        case StageType::ptq: add({"final"}); break;
        case StageType::qat: add({"loss", "temperature", "alpha", "final"}); break;
        case StageType::head_prune: add({"fraction"}); break;
        case StageType::theseus: add({"loss", "temperature", "alpha", "b", "k", "post_epochs"}); break;
        case StageType::finetune: add({"loss", "temperature", "alpha"}); break;
    }
    return keys;
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidConfig(std::string("stage field '") + key + "' has the wrong type");
    }
}

std::optional<std::size_t> count_field(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_number_unsigned()) {
        throw InvalidConfig(std::string("stage field '") + key + "' must be a non-negative integer");
    }
    return j.at(key).get<std::size_t>();
}

std::optional<double> number_field(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_number()) {
        throw InvalidConfig(std::string("stage field '") + key + "' must be a number");
    }
    return j.at(key).get<double>();
}

}  // namespace

std::string to_string(StageType t) {
    for (const auto& n : kStageNames) {
        if (n.type == t) return n.name;
    }
    return "unknown";
}

StageType parse_stage_type(const std::string& s) {
    if (s == "kd") return StageType::pure_kd;
    for (const auto& n : kStageNames) {
        if (s == n.name) return n.type;
    }
    throw InvalidConfig("unknown stage type '" + s + "'");
}

bool is_training_stage(StageType t) {
    switch (t) {
        case StageType::truncate:
        case StageType::ptq:
        case StageType::head_prune:
            return false;
        default:
            return true;
    }
}

void CompressionRecipe::validate() const {
    bool seen_final = false;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const Stage& s = stages[i];
        const std::string label = "recipe '" + name + "' stage " + std::to_string(i) + " (" +
                                  to_string(s.type) + ")";
        if (s.final_precision) {
            if (s.type != StageType::ptq && s.type != StageType::qat) {
                throw InvalidConfig(label + ": only quantization stages can be final");
            }
            if (seen_final) throw InvalidConfig(label + ": a second final-precision stage");
            seen_final = true;
            continue;
        }
        if (seen_final && is_training_stage(s.type)) {
            throw InvalidConfig(label + ": trains a model whose int8 weights are final");
        }
        if (s.fraction && !(*s.fraction >= 0.0 && *s.fraction < 1.0)) {
            throw InvalidConfig(label + ": fraction must lie in [0, 1)");
        }
        if (s.layers && *s.layers == 0) throw InvalidConfig(label + ": layers must be positive");
    }
}

json to_json(const Stage& s) {
    json j = {{"type", to_string(s.type)}};
    if (s.layers) j["layers"] = *s.layers;
    if (s.epochs) j["epochs"] = *s.epochs;
    if (s.post_epochs) j["post_epochs"] = *s.post_epochs;
    if (s.batch_size) j["batch_size"] = *s.batch_size;
    if (s.learning_rate) j["learning_rate"] = *s.learning_rate;
    if (s.loss) j["loss"] = to_string(*s.loss);
    if (s.temperature) j["temperature"] = *s.temperature;
    if (s.alpha) j["alpha"] = *s.alpha;
    if (s.beta) j["beta"] = *s.beta;
    if (s.fraction) j["fraction"] = *s.fraction;
    if (s.b) j["b"] = *s.b;
    if (s.k) j["k"] = *s.k;
    if (s.final_precision) j["final"] = true;
    return j;
}

Stage stage_from_json(const json& j) {
    if (j.is_string()) {
        Stage s;
        s.type = parse_stage_type(j.get<std::string>());
        return s;
    }
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
        throw InvalidConfig("a stage must be a name or an object with a 'type'");
    }
    Stage s;
    s.type = parse_stage_type(j.at("type").get<std::string>());
    const auto allowed = allowed_keys(s.type);
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) {
            throw InvalidConfig("unknown key '" + key + "' for stage " + to_string(s.type));
        }
    }
    s.layers = count_field(j, "layers");
    s.epochs = count_field(j, "epochs");
    s.post_epochs = count_field(j, "post_epochs");
    s.batch_size = count_field(j, "batch_size");
    s.learning_rate = number_field(j, "learning_rate");
    if (auto loss = optional_field<std::string>(j, "loss")) s.loss = parse_loss_choice(*loss);
    s.temperature = number_field(j, "temperature");
    s.alpha = number_field(j, "alpha");
    s.beta = number_field(j, "beta");
    s.fraction = number_field(j, "fraction");
    s.b = number_field(j, "b");
    s.k = number_field(j, "k");
    s.final_precision = optional_field<bool>(j, "final").value_or(false);
    return s;
}

json to_json(const CompressionRecipe& r) {
    json stages = json::array();
    for (const auto& s : r.stages) stages.push_back(to_json(s));
    return json{{"name", r.name}, {"stages", stages}};
}

CompressionRecipe recipe_from_json(const json& j) {
    if (!j.is_object()) throw InvalidConfig("a recipe must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key != "name" && key != "stages") {
            throw InvalidConfig("unknown recipe key '" + key + "'");
        }
    }
    if (!j.contains("name") || !j.at("name").is_string()) {
        throw InvalidConfig("recipe needs a string 'name'");
    }
    CompressionRecipe r;
    r.name = j.at("name").get<std::string>();
    if (j.contains("stages")) {
        if (!j.at("stages").is_array()) throw InvalidConfig("recipe 'stages' must be an array");
        for (const auto& s : j.at("stages")) r.stages.push_back(stage_from_json(s));
    }
    r.validate();
    return r;
}

const TeacherSignals& TeacherCache::signals(bool with_hidden) {
    if (with_hidden) {
        if (!with_hidden_) {
            with_hidden_ = std::make_unique<TeacherSignals>(teacher_signals(teacher_, train_set_, true));
        }
        return *with_hidden_;
    }
    if (with_hidden_) return *with_hidden_;
    if (!logits_only_) {
        logits_only_ = std::make_unique<TeacherSignals>(teacher_signals(teacher_, train_set_, false));
    }
    return *logits_only_;
}

json to_json(const StageLogEntry& e) {
    return json{{"recipe", e.recipe},
                {"index", e.index},
                {"stage", e.stage},
                {"provenance", e.provenance},
                {"n_layers", e.n_layers},
                {"active_heads", e.active_heads},
                {"quantized", e.quantized},
                {"int8_final", e.int8_final},
                {"final_train_loss", e.final_train_loss ? json(*e.final_train_loss) : json(nullptr)},
                {"accuracy", e.accuracy},
                {"label_loyalty", e.label_loyalty},
                {"probability_loyalty", e.probability_loyalty}};
}

void write_stage_log(const std::vector<StageLogEntry>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write stage log " + path.string());
    for (const auto& e : log) out << to_json(e).dump() << '\n';
    if (!out) throw IoError("failed writing stage log " + path.string());
}

namespace {

class StageRunner {
public:
    StageRunner(const RecipeContext& ctx, TeacherCache& cache) : ctx_(ctx), cache_(cache) {}

    /// Applies one stage; returns the final epoch's mean loss for training stages.
    std::optional<double> run(model::ClassifierModel& m, const Stage& s, std::size_t index) {
        Rng rng = make_rng(ctx_.seed, "stage/" + std::to_string(index) + "/" + to_string(s.type));
        const auto& d = ctx_.defaults;
        const std::size_t student_layers =
            s.layers.value_or(d.student_layers > 0 ? d.student_layers : m.num_layers() / 2);

        if (is_training_stage(s.type) && m.int8_final()) {
            throw InvalidConfig("stage " + std::to_string(index) + " (" + to_string(s.type) +
                                ") cannot train model '" + m.provenance() +
                                "' whose int8 weights are final");
        }

        switch (s.type) {
            case StageType::truncate:
                m = model::truncate(m, student_layers);
                return std::nullopt;
            case StageType::truncate_finetune: {
                m = model::truncate(m, student_layers);
                return train_stage(m, s, LossChoice::cross_entropy, rng);
            }
            case StageType::pure_kd:
            case StageType::patient_kd: {
                const bool patient = s.type == StageType::patient_kd;
                DistillOptions o;
                o.variant = patient ? DistillVariant::patient : DistillVariant::pure;
                o.temperature = s.temperature.value_or(d.temperature);
                o.alpha = s.alpha.value_or(patient ? d.patient_alpha : 1.0);
                o.beta = s.beta.value_or(d.patient_beta);
                o.train = train_options(s, LossChoice::kd);
                TrainResult r;
                const bool quantized = m.quantized();
                m = distill(*ctx_.teacher, m, ctx_.train, cache_.signals(patient), o, rng, &r);
                if (quantized) m = requantize(m, ctx_.calibration);
                return last_loss(r);
            }
            case StageType::ptq:
                m = quantize_ptq(m, ctx_.calibration, s.final_precision);
                return std::nullopt;
            case StageType::qat: {
                const TrainOptions t = train_options(s, LossChoice::cross_entropy);
                TrainResult r;
                m = train_qat(m, ctx_.train, ctx_.calibration, signals_for(t), t, rng, &r);
                if (s.final_precision) m.set_int8_final(true);
                return last_loss(r);
            }
            case StageType::head_prune:
                m = head_prune(m, ctx_.dev, s.fraction.value_or(d.prune_fraction),
                               d.importance_batch_size)
                        .model;
                return std::nullopt;
            case StageType::theseus: {
                TheseusOptions o;
                o.schedule = d.schedule;
                if (s.b) o.schedule.b = *s.b;
                if (s.k) o.schedule.k = *s.k;
                o.replacing = train_options(s, LossChoice::cross_entropy);
                o.post = o.replacing;
                o.post.epochs = s.post_epochs.value_or(d.theseus_post_epochs);
                o.seed = substream_seed(ctx_.seed, "stage/" + std::to_string(index));
                TheseusStats stats;
                m = theseus_train(m, ctx_.train, signals_for(o.replacing), o, rng, &stats);
                return last_loss(o.post.epochs > 0 ? stats.post : stats.replacing);
            }
            case StageType::finetune:
                return train_stage(m, s, LossChoice::cross_entropy, rng);
        }
        return std::nullopt;
    }

private:
    TrainOptions train_options(const Stage& s, LossChoice default_loss) const {
        TrainOptions t = ctx_.defaults.train;
        if (s.epochs) t.epochs = *s.epochs;
        if (s.batch_size) t.batch_size = *s.batch_size;
        if (s.learning_rate) t.learning_rate = *s.learning_rate;
        t.loss = s.loss.value_or(default_loss);
        t.temperature = s.temperature.value_or(ctx_.defaults.temperature);
        if (s.alpha) t.alpha = *s.alpha;
        t.beta = 0.0;
        t.fake_quant = false;
        return t;
    }

    const TeacherSignals* signals_for(const TrainOptions& t) {
        if (t.loss == LossChoice::cross_entropy) return nullptr;
        return &cache_.signals(false);
    }

    std::optional<double> train_stage(model::ClassifierModel& m, const Stage& s,
                                      LossChoice default_loss, Rng& rng) {
        const TrainOptions t = train_options(s, default_loss);
        const std::string before = m.provenance();
        const TrainResult r = train(m, ctx_.train, signals_for(t), t, rng);
        if (m.quantized()) m = requantize(m, ctx_.calibration);
        m.set_provenance(to_string(s.type) + "(" + before + ")");
        return last_loss(r);
    }

    static std::optional<double> last_loss(const TrainResult& r) {
        if (r.epochs.empty()) return std::nullopt;
        return r.epochs.back().mean_loss;
    }

    const RecipeContext& ctx_;
    TeacherCache& cache_;
};

std::string prefix_key(const CompressionRecipe& recipe, std::size_t count, std::size_t offset) {
    json stages = json::array();
    for (std::size_t i = 0; i < count; ++i) stages.push_back(to_json(recipe.stages[i]));
    return json{{"offset", offset}, {"stages", stages}}.dump();
}

}  // namespace

RecipeResult run_recipe(const CompressionRecipe& recipe, const RecipeContext& ctx,
                        const model::ClassifierModel* start) {
    if (!ctx.teacher) throw InvalidInput("run_recipe needs a teacher");
    recipe.validate();

    std::unique_ptr<TeacherCache> own_cache;
    TeacherCache* cache = ctx.teacher_cache;
    if (!cache) {
        own_cache = std::make_unique<TeacherCache>(*ctx.teacher, ctx.train);
        cache = own_cache.get();
    }
    std::optional<metrics::PredictionSet> own_teacher_preds;
    const metrics::PredictionSet* teacher_preds = ctx.teacher_snapshot;
    if (!teacher_preds && !ctx.snapshot.empty()) {
        own_teacher_preds = metrics::predict(*ctx.teacher, ctx.snapshot, "snapshot");
        teacher_preds = &*own_teacher_preds;
    }
    const auto gold = metrics::gold_labels(ctx.snapshot);

    RecipeResult result{start ? *start : *ctx.teacher, {}};
    std::size_t first = 0;
    // Prefixes are only shared between runs that start from the teacher.
    PrefixCache* prefix_cache = start ? nullptr : ctx.prefix_cache;
    if (prefix_cache) {
        for (std::size_t n = recipe.stages.size(); n > 0; --n) {
            auto it = prefix_cache->find(prefix_key(recipe, n, ctx.stage_offset));
            if (it == prefix_cache->end()) continue;
            result = it->second;
            for (auto& e : result.log) e.recipe = recipe.name;
            first = n;
            break;
        }
    }

    StageRunner runner(ctx, *cache);
    for (std::size_t i = first; i < recipe.stages.size(); ++i) {
        const Stage& stage = recipe.stages[i];
        const std::size_t index = ctx.stage_offset + i;
        StageLogEntry entry;
        entry.final_train_loss = runner.run(result.model, stage, index);
        entry.recipe = recipe.name;
        entry.index = index;
        entry.stage = to_string(stage.type);
        entry.provenance = result.model.provenance();
        entry.n_layers = result.model.num_layers();
        entry.active_heads = result.model.active_heads();
        entry.quantized = result.model.quantized();
        entry.int8_final = result.model.int8_final();
        if (teacher_preds) {
            const auto preds = metrics::predict(result.model, ctx.snapshot, "snapshot");
            entry.accuracy = metrics::accuracy(preds, gold);
            entry.label_loyalty = metrics::label_loyalty(*teacher_preds, preds);
            entry.probability_loyalty = metrics::probability_loyalty(*teacher_preds, preds, ctx.log_base);
        }
        result.log.push_back(entry);
        if (prefix_cache) {
            prefix_cache->emplace(prefix_key(recipe, i + 1, ctx.stage_offset), result);
        }
    }
    return result;
}

}  // namespace loyalty::compress
