#include "loyalty/bench/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "loyalty/errors.hpp"

namespace loyalty::bench {

using nlohmann::json;
using compress::CompressionRecipe;

namespace {

// Reads the keys of one JSON object into typed fields and rejects any key
// that no field asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InvalidConfig(where() + " must be an object");
    }

    void read(const char* key, std::size_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) throw type_error(key, "a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void read(const char* key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw type_error(key, "a number");
            out = v->get<double>();
        }
    }
    void read(const char* key, std::optional<double>& out) {
        if (const json* v = take(key)) {
            if (v->is_null()) {
                out.reset();
                return;
            }
            if (!v->is_number()) throw type_error(key, "a number or null");
            out = v->get<double>();
        }
    }
    void read(const char* key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw type_error(key, "a string");
            out = v->get<std::string>();
        }
    }
    void read(const char* key, std::vector<std::string>& out) {
        if (const json* v = take(key)) {
            if (!v->is_array()) throw type_error(key, "an array of strings");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_string()) throw type_error(key, "an array of strings");
                out.push_back(e.get<std::string>());
            }
        }
    }

    /// A nested object, or nullptr when absent.
    const json* child(const char* key) { return take(key); }
    std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw InvalidConfig("unknown config key '" + path(key.c_str()) + "'");
        }
    }

    InvalidConfig type_error(const char* key, const char* expected) const {
        return InvalidConfig("config key '" + path(key) + "' must be " + expected);
    }

private:
    const json* take(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string where() const { return path_.empty() ? "config" : "config key '" + path_ + "'"; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Parse>
auto parse_enum(ObjectReader& r, const char* key, const std::string& text, Parse parse) {
    try {
        return parse(text);
    } catch (const Error& e) {
        throw InvalidConfig("config key '" + r.path(key) + "': " + e.what());
    }
}

void read_train(const json& j, const std::string& path, compress::TrainOptions& t) {
    ObjectReader r(j, path);
    r.read("epochs", t.epochs);
    r.read("batch_size", t.batch_size);
    r.read("learning_rate", t.learning_rate);
    r.read("warmup_fraction", t.warmup_fraction);
    r.read("weight_decay", t.weight_decay);
    r.read("clip_norm", t.clip_norm);
    r.finish();
}

json train_json(const compress::TrainOptions& t) {
    return {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"warmup_fraction", t.warmup_fraction},
            {"weight_decay", t.weight_decay},
            {"clip_norm", t.clip_norm}};
}

void read_dataset(const json& j, DatasetConfig& d) {
    ObjectReader r(j, "dataset");
    r.read("source", d.source);
    std::string path = d.path.string();
    r.read("path", path);
    d.path = path;
    std::string format = data::to_string(d.format);
    r.read("format", format);
    d.format = parse_enum(r, "format", format, data::parse_format);
    r.read("label_names", d.label_names);
    if (const json* s = r.child("synthetic")) {
        ObjectReader g(*s, "dataset.synthetic");
        auto& o = d.synthetic;
        g.read("n_examples", o.n_examples);
        g.read("n_classes", o.n_classes);
        g.read("dev_examples", o.dev_examples);
        g.read("test_examples", o.test_examples);
        g.read("cues_per_class", o.cues_per_class);
        g.read("cues_per_example", o.cues_per_example);
        g.read("cue_fidelity", o.cue_fidelity);
        g.read("synonym_rate", o.synonym_rate);
        g.read("companion_rate", o.companion_rate);
        g.read("label_noise", o.label_noise);
        g.finish();
    }
    r.finish();
}

void read_compression(const json& j, CompressionConfig& c) {
    ObjectReader r(j, "compression");
    auto& d = c.defaults;
    if (const json* t = r.child("train")) read_train(*t, "compression.train", d.train);
    r.read("student_layers", d.student_layers);
    r.read("temperature", d.temperature);
    r.read("patient_alpha", d.patient_alpha);
    r.read("patient_beta", d.patient_beta);
    r.read("prune_fraction", d.prune_fraction);
    r.read("theseus_b", d.schedule.b);
    r.read("theseus_k", c.theseus_k);
    r.read("theseus_post_epochs", d.theseus_post_epochs);
    r.read("importance_batch_size", d.importance_batch_size);
    r.read("calibration_examples", c.calibration_examples);
    r.finish();
}

void read_attack(const json& j, AttackConfig& a) {
    ObjectReader r(j, "attack");
    r.read("max_examples", a.max_examples);
    r.read("neighbors", a.neighbors);
    r.read("min_cosine", a.min_cosine);
    r.read("max_candidates", a.max_candidates);
    if (const json* e = r.child("embeddings")) {
        ObjectReader g(*e, "attack.embeddings");
        g.read("dim", a.embeddings.dim);
        g.read("epochs", a.embeddings.epochs);
        g.read("window", a.embeddings.window);
        g.read("negatives", a.embeddings.negatives);
        g.read("learning_rate", a.embeddings.learning_rate);
        g.finish();
    }
    r.finish();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

compress::Stage stage(compress::StageType type, bool final_precision = false) {
    compress::Stage s;
    s.type = type;
    s.final_precision = final_precision;
    return s;
}

}  // namespace

std::vector<CompressionRecipe> default_recipes() {
    using compress::StageType;
    const auto s = [](StageType t) { return stage(t); };
    const auto final_ptq = stage(StageType::ptq, true);
    return {
        {"Teacher", {}},
        {"Truncate & Finetune", {s(StageType::truncate_finetune)}},
        {"Pure KD", {s(StageType::truncate), s(StageType::pure_kd)}},
        {"Patient KD", {s(StageType::truncate), s(StageType::patient_kd)}},
        {"Theseus", {s(StageType::theseus)}},
        {"Q8-PTQ", {final_ptq}},
        {"Q8-QAT", {stage(StageType::qat, true)}},
        {"Head Prune", {s(StageType::head_prune)}},
        {"Head Prune + Finetune", {s(StageType::head_prune), s(StageType::finetune)}},
        {"Head Prune + KD", {s(StageType::head_prune), s(StageType::pure_kd)}},
        {"Head Prune + KD + PTQ", {s(StageType::head_prune), s(StageType::pure_kd), final_ptq}},
        {"Q8-PTQ + Finetune", {s(StageType::ptq), s(StageType::finetune)}},
        {"Q8-PTQ + KD", {s(StageType::ptq), s(StageType::pure_kd)}},
    };
}

BenchConfig default_config() {
    BenchConfig c;
    c.dataset.synthetic.n_examples = 4000;
    c.dataset.synthetic.dev_examples = 500;
    c.dataset.synthetic.test_examples = 500;
    c.teacher.epochs = 3;
    c.compression.defaults.train.epochs = 2;
    c.recipes = default_recipes();
    return c;
}

void BenchConfig::validate() const {
    if (dataset.source != "synthetic" && dataset.source != "file") {
        throw InvalidConfig("dataset.source must be 'synthetic' or 'file', got '" + dataset.source + "'");
    }
    if (dataset.source == "file" && dataset.path.empty()) {
        throw InvalidConfig("dataset.path is required when dataset.source is 'file'");
    }
    if (seeds.empty()) throw InvalidConfig("seeds must list at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw InvalidConfig("seeds contain duplicates");
    }
    if (recipes.empty()) throw InvalidConfig("recipes must not be empty");
    std::set<std::string> names;
    for (const auto& r : recipes) {
        if (r.name.empty()) throw InvalidConfig("recipe names must not be empty");
        if (!names.insert(r.name).second) throw InvalidConfig("duplicate recipe name '" + r.name + "'");
        r.validate();
    }
    if (model.heads == 0 || model.hidden % model.heads != 0) {
        throw InvalidConfig("model.hidden must be a positive multiple of model.heads");
    }
    if (model.layers == 0 || model.ffn == 0) throw InvalidConfig("model.layers and model.ffn must be positive");
    if (tokenizer.max_length < 2) throw InvalidConfig("tokenizer.max_length must be at least 2");
    teacher.validate();
    compression.defaults.train.validate();
    compression.defaults.schedule.validate();
    if (compression.theseus_k && *compression.theseus_k < 0.0) {
        throw InvalidConfig("compression.theseus_k must be non-negative");
    }
    if (compression.calibration_examples == 0) {
        throw InvalidConfig("compression.calibration_examples must be positive");
    }
    if (!(compression.defaults.prune_fraction >= 0.0 && compression.defaults.prune_fraction < 1.0)) {
        throw InvalidConfig("compression.prune_fraction must lie in [0, 1)");
    }
    if (metrics.aggregation != "mean_std") {
        throw InvalidConfig("metrics.aggregation must be 'mean_std', got '" + metrics.aggregation + "'");
    }
    if (attack.max_examples == 0) throw InvalidConfig("attack.max_examples must be positive");
    if (speedup.batch_size == 0) throw InvalidConfig("speedup.batch_size must be positive");
    if (speedup.timing.timed_runs < 30) throw InvalidConfig("speedup.timed_runs must be at least 30");
}

BenchConfig config_from_json(const json& j) {
    BenchConfig c = default_config();
    ObjectReader r(j, "");
    if (const json* v = r.child("dataset")) read_dataset(*v, c.dataset);
    if (const json* v = r.child("tokenizer")) {
        ObjectReader t(*v, "tokenizer");
        t.read("max_vocab", c.tokenizer.max_vocab);
        t.read("max_length", c.tokenizer.max_length);
        t.finish();
    }
    if (const json* v = r.child("model")) {
        ObjectReader m(*v, "model");
        m.read("hidden", c.model.hidden);
        m.read("heads", c.model.heads);
        m.read("layers", c.model.layers);
        m.read("ffn", c.model.ffn);
        m.finish();
    }
    if (const json* v = r.child("teacher")) read_train(*v, "teacher", c.teacher);
    if (const json* v = r.child("compression")) read_compression(*v, c.compression);
    if (const json* v = r.child("recipes")) {
        if (!v->is_array()) throw r.type_error("recipes", "an array");
        c.recipes.clear();
        for (const auto& rj : *v) c.recipes.push_back(compress::recipe_from_json(rj));
    }
    if (const json* v = r.child("metrics")) {
        ObjectReader m(*v, "metrics");
        std::string base = metrics::to_string(c.metrics.log_base);
        m.read("log_base", base);
        c.metrics.log_base = parse_enum(m, "log_base", base, metrics::parse_log_base);
        std::string split = data::to_string(c.metrics.split);
        m.read("split", split);
        c.metrics.split = parse_enum(m, "split", split, data::parse_split);
        m.read("aggregation", c.metrics.aggregation);
        m.finish();
    }
    if (const json* v = r.child("attack")) read_attack(*v, c.attack);
    if (const json* v = r.child("speedup")) {
        ObjectReader s(*v, "speedup");
        s.read("warmup_runs", c.speedup.timing.warmup_runs);
        s.read("timed_runs", c.speedup.timing.timed_runs);
        s.read("max_relative_spread", c.speedup.timing.max_relative_spread);
        s.read("batch_size", c.speedup.batch_size);
        s.finish();
    }
    if (const json* v = r.child("seeds")) {
        if (!v->is_array()) throw r.type_error("seeds", "an array of non-negative integers");
        c.seeds.clear();
        for (const auto& s : *v) {
            if (!s.is_number_unsigned()) throw r.type_error("seeds", "an array of non-negative integers");
            c.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    std::string out = c.output_dir.string();
    r.read("output_dir", out);
    c.output_dir = out;
    r.finish();
    c.validate();
    return c;
}

json to_json(const BenchConfig& c) {
    const auto& s = c.dataset.synthetic;
    const auto& d = c.compression.defaults;
    json recipes = json::array();
    for (const auto& r : c.recipes) recipes.push_back(compress::to_json(r));
    return {
        {"dataset",
         {{"source", c.dataset.source},
          {"path", c.dataset.path.string()},
          {"format", data::to_string(c.dataset.format)},
          {"label_names", c.dataset.label_names},
          {"synthetic",
           {{"n_examples", s.n_examples},
            {"n_classes", s.n_classes},
            {"dev_examples", s.dev_examples},
            {"test_examples", s.test_examples},
            {"cues_per_class", s.cues_per_class},
            {"cues_per_example", s.cues_per_example},
            {"cue_fidelity", s.cue_fidelity},
            {"synonym_rate", s.synonym_rate},
            {"companion_rate", s.companion_rate},
            {"label_noise", s.label_noise}}}}},
        {"tokenizer", {{"max_vocab", c.tokenizer.max_vocab}, {"max_length", c.tokenizer.max_length}}},
        {"model",
         {{"hidden", c.model.hidden},
          {"heads", c.model.heads},
          {"layers", c.model.layers},
          {"ffn", c.model.ffn}}},
        {"teacher", train_json(c.teacher)},
        {"compression",
         {{"train", train_json(d.train)},
          {"student_layers", d.student_layers},
          {"temperature", d.temperature},
          {"patient_alpha", d.patient_alpha},
          {"patient_beta", d.patient_beta},
          {"prune_fraction", d.prune_fraction},
          {"theseus_b", d.schedule.b},
          {"theseus_k", c.compression.theseus_k ? json(*c.compression.theseus_k) : json(nullptr)},
          {"theseus_post_epochs", d.theseus_post_epochs},
          {"importance_batch_size", d.importance_batch_size},
          {"calibration_examples", c.compression.calibration_examples}}},
        {"recipes", recipes},
        {"metrics",
         {{"log_base", metrics::to_string(c.metrics.log_base)},
          {"split", data::to_string(c.metrics.split)},
          {"aggregation", c.metrics.aggregation}}},
        {"attack",
         {{"max_examples", c.attack.max_examples},
          {"neighbors", c.attack.neighbors},
          {"min_cosine", c.attack.min_cosine},
          {"max_candidates", c.attack.max_candidates},
          {"embeddings",
           {{"dim", c.attack.embeddings.dim},
            {"epochs", c.attack.embeddings.epochs},
            {"window", c.attack.embeddings.window},
            {"negatives", c.attack.embeddings.negatives},
            {"learning_rate", c.attack.embeddings.learning_rate}}}}},
        {"speedup",
         {{"warmup_runs", c.speedup.timing.warmup_runs},
          {"timed_runs", c.speedup.timing.timed_runs},
          {"max_relative_spread", c.speedup.timing.max_relative_spread},
          {"batch_size", c.speedup.batch_size}}},
        {"seeds", c.seeds},
        {"output_dir", c.output_dir.string()},
    };
}

BenchConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidConfig("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::string config_hash(const BenchConfig& c) {
    json j = to_json(c);
    j.erase("seeds");
    j.erase("output_dir");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

}  // namespace loyalty::bench
