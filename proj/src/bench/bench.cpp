#include "loyalty/bench/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "loyalty/compress/recipe.hpp"
#include "loyalty/data/embeddings.hpp"
#include "loyalty/errors.hpp"
#include "loyalty/metrics/predict.hpp"
#include "loyalty/metrics/speedup.hpp"
#include "loyalty/model/checkpoint.hpp"

namespace loyalty::bench {

namespace fs = std::filesystem;
using nlohmann::json;
using compress::CompressionRecipe;

SeedPaths::SeedPaths(const fs::path& output_dir, std::uint64_t seed)
    : root(output_dir / ("seed-" + std::to_string(seed))) {}

fs::path SeedPaths::method_dir(const std::string& method) const {
    return root / "methods" / method_slug(method);
}

std::string method_slug(const std::string& name) {
    std::string out;
    for (unsigned char c : name) {
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
        } else if (!out.empty() && out.back() != '-') {
            out += '-';
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    if (out.empty()) throw InvalidConfig("method name '" + name + "' has no letters or digits");
    return out;
}

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing artifact " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("artifact " + path.string() + " is not valid JSON", e.byte);
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text << '\n';
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    std::string line, all;
    while (std::getline(in, line)) all += (all.empty() ? "" : "\n") + line;
    return all;
}

// The stored artifacts must come from the same settings as the current run.
void check_meta(const BenchConfig& config, const SeedPaths& paths) {
    const json meta = read_json(paths.root / "seed.json");
    const std::string stored = meta.at("config_hash").get<std::string>();
    if (stored != config_hash(config)) {
        throw InvalidConfig("artifacts in " + paths.root.string() + " were produced by config " +
                            stored + ", not " + config_hash(config));
    }
}

std::vector<data::EncodedExample> take(const std::vector<data::EncodedExample>& v, std::size_t n) {
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

compress::RecipeDefaults recipe_defaults(const BenchConfig& config, std::size_t n_train) {
    compress::RecipeDefaults d = config.compression.defaults;
    if (config.compression.theseus_k) {
        d.schedule.k = *config.compression.theseus_k;
    } else {
        const std::size_t batch = d.train.batch_size;
        const std::size_t steps = (n_train + batch - 1) / batch * d.train.epochs;
        d.schedule.k = (1.0 - d.schedule.b) / std::max<double>(1.0, steps / 2.0);
    }
    return d;
}

std::vector<attack::LabeledText> attack_examples(const BenchConfig& config,
                                                 const data::TextDataset& dataset,
                                                 std::uint64_t seed) {
    auto pool = dataset.split(config.metrics.split);
    Rng rng = make_rng(seed, "attack");
    shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), config.attack.max_examples));
    std::vector<attack::LabeledText> out;
    out.reserve(pool.size());
    for (const auto& e : pool) out.push_back({e.id, model::Tokenizer::split(e.text), e.label});
    return out;
}

json speedup_json(const metrics::SpeedupResult& r, bool timed) {
    return {{"ratio", r.ratio},
            {"timed", timed},
            {"reference_median_seconds", r.reference.median},
            {"candidate_median_seconds", r.candidate.median},
            {"warnings", r.warnings}};
}

}  // namespace

SeedData prepare_data(const BenchConfig& config, std::uint64_t seed) {
    SeedData d;
    if (config.dataset.source == "synthetic") {
        data::SyntheticOptions o = config.dataset.synthetic;
        o.seed = seed;
        d.dataset = data::generate_synthetic(o);
    } else {
        data::IngestOptions o;
        o.label_names = config.dataset.label_names;
        o.split_seed = seed;
        d.dataset = data::ingest(config.dataset.path, config.dataset.format, o);
    }
    const auto texts = d.dataset.texts(data::Split::train);
    d.tokenizer = model::Tokenizer::build(texts, config.tokenizer.max_vocab, config.tokenizer.max_length);
    d.train = data::encode(d.dataset, data::Split::train, d.tokenizer);
    d.dev = data::encode(d.dataset, data::Split::dev, d.tokenizer);
    d.eval = data::encode(d.dataset, config.metrics.split, d.tokenizer);
    return d;
}

model::ModelConfig teacher_config(const BenchConfig& config, const SeedData& data) {
    model::ModelConfig c;
    c.vocab_size = data.tokenizer.size();
    c.hidden = config.model.hidden;
    c.heads = config.model.heads;
    c.layers = config.model.layers;
    c.ffn = config.model.ffn;
    c.max_length = config.tokenizer.max_length;
    c.num_classes = data.dataset.num_classes();
    return c;
}

model::ClassifierModel train_teacher(const BenchConfig& config, const SeedData& data,
                                     std::uint64_t seed) {
    Rng init = make_rng(seed, "init");
    auto teacher = model::ClassifierModel::random(teacher_config(config, data), init);
    Rng rng = make_rng(seed, "teacher");
    compress::train(teacher, data.train, nullptr, config.teacher, rng);
    teacher.set_provenance("teacher");
    return teacher;
}

std::vector<CompressionRecipe> select_recipes(const BenchConfig& config,
                                              const std::vector<std::string>& methods) {
    if (methods.empty()) return config.recipes;
    for (const auto& m : methods) {
        const bool known = std::any_of(config.recipes.begin(), config.recipes.end(),
                                       [&](const CompressionRecipe& r) { return r.name == m; });
        if (!known) throw InvalidConfig("no recipe named '" + m + "' in the config");
    }
    std::vector<CompressionRecipe> out;
    for (const auto& r : config.recipes) {
        if (std::find(methods.begin(), methods.end(), r.name) != methods.end()) out.push_back(r);
    }
    return out;
}

void run_train_stage(const BenchConfig& config, std::uint64_t seed) {
    const SeedPaths paths(config.output_dir, seed);
    fs::create_directories(paths.root);
    const auto t0 = std::chrono::steady_clock::now();
    const SeedData data = prepare_data(config, seed);
    data::export_dataset(data.dataset, paths.dataset(), data::FileFormat::jsonl);
    write_json(paths.tokenizer(), data.tokenizer.to_json());
    const auto teacher = train_teacher(config, data, seed);
    model::save(teacher, paths.teacher());
    write_json(paths.root / "seed.json", {{"seed", seed},
                                          {"config_hash", config_hash(config)},
                                          {"label_names", data.dataset.label_names},
                                          {"dataset", data.dataset.provenance}});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("seed {}: teacher trained on {} examples in {:.1f}s", seed, data.train.size(), secs);
}

void run_compress_stage(const BenchConfig& config, std::uint64_t seed,
                        const std::vector<CompressionRecipe>& recipes) {
    const SeedPaths paths(config.output_dir, seed);
    if (!fs::exists(paths.teacher())) run_train_stage(config, seed);
    check_meta(config, paths);
    const SeedData data = prepare_data(config, seed);
    const auto teacher = model::load(paths.teacher());
    const std::string split = data::to_string(config.metrics.split);

    const auto teacher_preds = metrics::predict(teacher, data.eval, split);
    metrics::write_jsonl(teacher_preds, paths.root / "teacher_predictions.jsonl");

    const auto calibration = take(data.dev, config.compression.calibration_examples);
    std::vector<std::vector<model::TokenId>> timing_batch;
    for (const auto& e : take(data.eval, config.speedup.batch_size)) timing_batch.push_back(e.ids);

    compress::TeacherCache teacher_cache(teacher, data.train);
    compress::PrefixCache prefix_cache;
    const auto dev_teacher_preds = metrics::predict(teacher, data.dev, "dev");
    compress::RecipeContext ctx;
    ctx.teacher = &teacher;
    ctx.train = data.train;
    ctx.dev = data.dev;
    ctx.calibration = calibration;
    ctx.snapshot = data.dev;
    ctx.teacher_cache = &teacher_cache;
    ctx.teacher_snapshot = &dev_teacher_preds;
    ctx.seed = substream_seed(seed, "recipes");
    ctx.defaults = recipe_defaults(config, data.train.size());
    ctx.log_base = config.metrics.log_base;
    ctx.prefix_cache = &prefix_cache;

    for (const auto& recipe : recipes) {
        const fs::path dir = paths.method_dir(recipe.name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto result = compress::run_recipe(recipe, ctx);
            model::save(result.model, dir / "model.ckpt");
            compress::write_stage_log(result.log, dir / "stages.jsonl");
            auto preds = metrics::predict(result.model, data.eval, split);
            preds.provenance = recipe.name;
            metrics::write_jsonl(preds, dir / "predictions.jsonl");
            if (recipe.stages.empty()) {
                metrics::SpeedupResult same;
                same.ratio = 1.0;
                write_json(dir / "speedup.json", speedup_json(same, false));
            } else {
                const auto s = metrics::measure_speedup(teacher, result.model, timing_batch,
                                                        config.speedup.timing);
                write_json(dir / "speedup.json", speedup_json(s, true));
            }
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            spdlog::info("seed {}: {} compressed in {:.1f}s", seed, recipe.name, secs);
        } catch (const std::exception& e) {
            spdlog::error("seed {}: {} failed: {}", seed, recipe.name, e.what());
            write_text(dir / "error.txt", e.what());
        }
    }
}

void run_attack_stage(const BenchConfig& config, std::uint64_t seed,
                      const std::vector<CompressionRecipe>& recipes) {
    const SeedPaths paths(config.output_dir, seed);
    check_meta(config, paths);
    const SeedData data = prepare_data(config, seed);
    const auto tokenizer = model::Tokenizer::from_json(read_json(paths.tokenizer()));

    data::EmbeddingOptions eo = config.attack.embeddings;
    eo.seed = substream_seed(seed, "embeddings");
    const auto embeddings = data::train_embeddings(data.dataset, tokenizer, eo);
    const auto table =
        attack::SynonymTable::build(embeddings, config.attack.neighbors, config.attack.min_cosine);
    write_json(paths.synonyms(), table.to_json());

    const auto examples = attack_examples(config, data.dataset, seed);
    attack::AttackOptions options;
    options.max_candidates = config.attack.max_candidates;
    for (const auto& recipe : recipes) {
        const fs::path dir = paths.method_dir(recipe.name);
        if (fs::exists(dir / "error.txt")) continue;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto m = model::load(dir / "model.ckpt");
            const auto r = attack::evaluate_robustness(attack::classifier_oracle(m, tokenizer),
                                                       examples, table, options);
            attack::write_outcomes(r.outcomes, dir / "attack.jsonl");
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            spdlog::info("seed {}: {} attacked ({:.1f}% left, {:.1f} queries) in {:.1f}s", seed,
                         recipe.name, r.report.after_attack_accuracy, r.report.mean_queries, secs);
        } catch (const std::exception& e) {
            spdlog::error("seed {}: attacking {} failed: {}", seed, recipe.name, e.what());
            write_text(dir / "error.txt", e.what());
        }
    }
}

std::map<std::string, MethodResult> evaluate_seed(const BenchConfig& config, std::uint64_t seed,
                                                  const std::vector<CompressionRecipe>& recipes) {
    const SeedPaths paths(config.output_dir, seed);
    check_meta(config, paths);
    const json meta = read_json(paths.root / "seed.json");
    data::IngestOptions io;
    io.label_names = meta.at("label_names").get<std::vector<std::string>>();
    const auto dataset = data::ingest(paths.dataset(), data::FileFormat::jsonl, io);
    std::map<std::string, std::size_t> gold_by_id;
    for (const auto& e : dataset.split(config.metrics.split)) gold_by_id[e.id] = e.label;
    const auto teacher_preds = metrics::read_jsonl(paths.root / "teacher_predictions.jsonl");

    std::map<std::string, MethodResult> out;
    for (const auto& recipe : recipes) {
        const fs::path dir = paths.method_dir(recipe.name);
        MethodResult result;
        if (fs::exists(dir / "error.txt")) {
            result.error = read_text(dir / "error.txt");
            out[recipe.name] = result;
            continue;
        }
        try {
            MethodMetrics m;
            const auto preds = metrics::read_jsonl(dir / "predictions.jsonl");
            std::vector<std::size_t> gold;
            gold.reserve(preds.ids.size());
            for (const auto& id : preds.ids) {
                auto it = gold_by_id.find(id);
                if (it == gold_by_id.end()) throw InvalidInput("prediction for unknown example '" + id + "'");
                gold.push_back(it->second);
            }
            m.accuracy = metrics::accuracy(preds, gold);
            m.label_loyalty = metrics::label_loyalty(teacher_preds, preds);
            m.probability_loyalty = metrics::probability_loyalty(teacher_preds, preds, config.metrics.log_base);
            m.n_layers = model::load(dir / "model.ckpt").num_layers();
            const json s = read_json(dir / "speedup.json");
            m.speedup = s.at("ratio").get<double>();
            m.warnings = s.at("warnings").get<std::vector<std::string>>();
            if (!fs::exists(dir / "attack.jsonl")) throw IoError("missing artifact " + (dir / "attack.jsonl").string());
            m.robustness = attack::summarize(attack::read_outcomes(dir / "attack.jsonl"));
            result.metrics = m;
        } catch (const std::exception& e) {
            result.error = e.what();
        }
        out[recipe.name] = result;
    }
    return out;
}

BenchReport aggregate(const BenchConfig& config, const std::vector<std::uint64_t>& seeds,
                      const std::vector<CompressionRecipe>& recipes,
                      const std::vector<std::map<std::string, MethodResult>>& per_seed,
                      const std::vector<double>& seed_seconds) {
    if (per_seed.size() != seeds.size()) throw InvalidInput("one result map per seed is required");
    BenchReport report;
    report.seeds = seeds;
    report.config_hash = config_hash(config);
    report.hardware = hardware_note();
    report.log_base = metrics::to_string(config.metrics.log_base);
    report.split = data::to_string(config.metrics.split);
    report.seed_seconds = seed_seconds;
    for (const auto& recipe : recipes) {
        MethodRow row;
        row.name = recipe.name;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto it = per_seed[s].find(recipe.name);
            const MethodResult* r = it == per_seed[s].end() ? nullptr : &it->second;
            const MethodMetrics* m = r && r->metrics ? &*r->metrics : nullptr;
            if (!m) {
                row.errors.push_back("seed " + std::to_string(seeds[s]) + ": " +
                                     (r ? r->error : std::string("not run")));
            } else {
                if (!row.n_layers) row.n_layers = m->n_layers;
                for (const auto& w : m->warnings) {
                    row.warnings.push_back("seed " + std::to_string(seeds[s]) + ": " + w);
                }
            }
            const auto put = [&](Cell& c, std::optional<double> v) { c.per_seed.push_back(v); };
            const auto val = [&](auto f) { return m ? std::optional<double>(f(*m)) : std::nullopt; };
            put(row.speedup, val([](const MethodMetrics& x) { return x.speedup; }));
            put(row.accuracy, val([](const MethodMetrics& x) { return x.accuracy; }));
            put(row.label_loyalty, val([](const MethodMetrics& x) { return x.label_loyalty; }));
            put(row.probability_loyalty, val([](const MethodMetrics& x) { return x.probability_loyalty; }));
            put(row.after_attack_accuracy,
                val([](const MethodMetrics& x) { return x.robustness.after_attack_accuracy; }));
            put(row.mean_queries, val([](const MethodMetrics& x) { return x.robustness.mean_queries; }));
            put(row.mean_queries_all,
                val([](const MethodMetrics& x) { return x.robustness.mean_queries_all; }));
            put(row.attack_success_rate,
                val([](const MethodMetrics& x) { return x.robustness.success_rate; }));
        }
        for (const auto& f : kMetricFields) (row.*f.cell).aggregate();
        report.rows.push_back(std::move(row));
    }
    return report;
}

BenchReport run_bench(const BenchConfig& config, const BenchOptions& options) {
    config.validate();
    const auto recipes = select_recipes(config, options.methods);
    fs::create_directories(config.output_dir);
    write_json(config.output_dir / "config.json", to_json(config));
    std::vector<std::map<std::string, MethodResult>> per_seed;
    std::vector<double> seconds;
    for (const auto seed : config.seeds) {
        const auto t0 = std::chrono::steady_clock::now();
        run_train_stage(config, seed);
        run_compress_stage(config, seed, recipes);
        run_attack_stage(config, seed, recipes);
        per_seed.push_back(evaluate_seed(config, seed, recipes));
        seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        spdlog::info("seed {} finished in {:.1f}s", seed, seconds.back());
    }
    const auto report = aggregate(config, config.seeds, recipes, per_seed, seconds);
    write_report(report, config.output_dir / "report.json", ReportFormat::json);
    write_report(report, config.output_dir / "report.md", ReportFormat::markdown);
    return report;
}

std::string hardware_note() {
    std::string cpu = "unknown cpu";
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) cpu = line.substr(colon + 2);
            break;
        }
    }
    return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

}  // namespace loyalty::bench
