#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "loyalty/bench/bench.hpp"
#include "loyalty/errors.hpp"

using namespace loyalty;
using namespace loyalty::bench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("loyalty-bench-test-" + name);
    fs::remove_all(dir);
    return dir;
}

compress::CompressionRecipe recipe(const std::string& name, const json& stages) {
    return compress::recipe_from_json({{"name", name}, {"stages", stages}});
}

// A pipeline small enough to run several times per test.
BenchConfig tiny_config(const fs::path& out) {
    BenchConfig c = default_config();
    auto& s = c.dataset.synthetic;
    s.n_examples = 400;
    s.dev_examples = 60;
    s.test_examples = 60;
    c.tokenizer.max_vocab = 300;
    c.tokenizer.max_length = 16;
    c.model = {8, 2, 2, 16};
    c.teacher.epochs = 2;
    c.teacher.learning_rate = 3e-3;
    c.compression.defaults.train.epochs = 1;
    c.compression.defaults.train.learning_rate = 3e-3;
    c.compression.calibration_examples = 32;
    c.attack.max_examples = 30;
    c.attack.embeddings.epochs = 1;
    c.speedup.timing.warmup_runs = 1;
    c.speedup.batch_size = 8;
    c.recipes = {recipe("Teacher", json::array()),
                 recipe("Pure KD", {"truncate", "pure-kd"}),
                 recipe("Q8-PTQ", {{{"type", "ptq"}, {"final", true}}})};
    c.seeds = {5};
    c.output_dir = out;
    return c;
}

Cell cell(std::vector<std::optional<double>> values) {
    Cell c{std::move(values), std::nullopt, std::nullopt};
    c.aggregate();
    return c;
}

BenchReport sample_report() {
    BenchReport r;
    r.seeds = {0, 1};
    r.config_hash = "0123456789abcdef";
    r.hardware = "test host";
    r.log_base = "2";
    r.split = "test";
    r.seed_seconds = {1.5, 2.5};
    MethodRow teacher;
    teacher.name = "Teacher";
    teacher.n_layers = 4;
    teacher.speedup = cell({1.0, 1.0});
    teacher.accuracy = cell({80.0, 82.0});
    teacher.label_loyalty = cell({100.0, 100.0});
    teacher.probability_loyalty = cell({100.0, 100.0});
    teacher.after_attack_accuracy = cell({10.0, 12.0});
    teacher.mean_queries = cell({20.0, 22.0});
    teacher.mean_queries_all = cell({18.0, 19.0});
    teacher.attack_success_rate = cell({0.875, 0.85});
    MethodRow student = teacher;
    student.name = "Pure KD";
    student.n_layers = 2;
    student.speedup = cell({2.0, 1.9});
    student.label_loyalty = cell({91.0, 93.0});
    student.warnings = {"seed 1: unstable timing"};
    r.rows = {teacher, student};
    return r;
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
    const BenchConfig c = default_config();
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.recipes.size(), 13u);
    EXPECT_EQ(c.recipes.front().name, "Teacher");
    const BenchConfig back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, UnknownKeysNameTheirPath) {
    try {
        config_from_json({{"model", {{"hiden", 8}}}});
        FAIL() << "expected InvalidConfig";
    } catch (const InvalidConfig& e) {
        EXPECT_NE(std::string(e.what()).find("model.hiden"), std::string::npos) << e.what();
    }
    EXPECT_THROW(config_from_json({{"colour", "blue"}}), InvalidConfig);
    EXPECT_THROW(config_from_json({{"attack", {{"max_examples", -3}}}}), InvalidConfig);
    EXPECT_THROW(config_from_json({{"seeds", {1, 1}}}), InvalidConfig);
    EXPECT_THROW(config_from_json({{"metrics", {{"log_base", "10"}}}}), InvalidConfig);
    EXPECT_THROW(config_from_json({{"model", {{"hidden", 10}, {"heads", 4}}}}), InvalidConfig);
    EXPECT_THROW(config_from_json(json::array()), InvalidConfig);
}

TEST(Config, HashIgnoresSeedsAndOutputButNotSettings) {
    BenchConfig a = default_config();
    BenchConfig b = a;
    b.seeds = {7};
    b.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b.attack.min_cosine = 0.6;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, LoadReportsMissingFilesAndBadJson) {
    const fs::path dir = fresh_dir("config");
    fs::create_directories(dir);
    EXPECT_THROW(load_config(dir / "absent.json"), IoError);
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(load_config(dir / "bad.json"), InvalidConfig);
    std::ofstream(dir / "ok.json") << R"({"seeds": [3, 4], "teacher": {"epochs": 1}})";
    const BenchConfig c = load_config(dir / "ok.json");
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
    EXPECT_EQ(c.teacher.epochs, 1u);
}

TEST(Report, CellAggregatesWithSampleStd) {
    const Cell c = cell({1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(*c.mean, 2.0);
    EXPECT_DOUBLE_EQ(*c.std, 1.0);
    EXPECT_DOUBLE_EQ(*cell({4.0}).std, 0.0);
    EXPECT_TRUE(cell({1.0, std::nullopt}).failed());
}

TEST(Report, JsonRoundTripAndTimingFreeView) {
    const BenchReport r = sample_report();
    EXPECT_EQ(report_from_json(json::parse(to_json(r).dump())), r);

    const json plain = to_json(r, false);
    EXPECT_FALSE(plain.contains("timing"));
    for (const auto& row : plain.at("rows")) {
        EXPECT_FALSE(row.contains("speedup"));
        EXPECT_FALSE(row.contains("warnings"));
    }
    EXPECT_THROW(report_from_json({{"rows", json::array()}}), FormatError);
}

TEST(Report, MarkdownColumnsAndFailedCells) {
    BenchReport r = sample_report();
    std::string md = to_markdown(r);
    EXPECT_EQ(md.substr(0, md.find('\n')),
              "| Method | #Layer | Speed-up | Acc | Label | Probability | AA-Acc | #Query |");
    EXPECT_NE(md.find("| Pure KD | 2 | 1.9× (±0.1) | 81.0 (±1.4) | 92.0 (±1.4) |"), std::string::npos)
        << md;

    r.rows[1].errors = {"seed 1: stage 2 (ptq) failed"};
    r.rows[1].accuracy = cell({80.0, std::nullopt});
    md = to_markdown(r);
    EXPECT_NE(md.find("—[1]"), std::string::npos) << md;
    EXPECT_NE(md.find("[1] Pure KD: seed 1: stage 2 (ptq) failed"), std::string::npos) << md;
    EXPECT_TRUE(r.partial());
}

TEST(Report, WriteAndReadBack) {
    const fs::path dir = fresh_dir("report");
    fs::create_directories(dir);
    const BenchReport r = sample_report();
    write_report(r, dir / "r.json", ReportFormat::json);
    EXPECT_EQ(read_report(dir / "r.json"), r);
    EXPECT_THROW(write_report(r, dir / "missing" / "r.json", ReportFormat::json), IoError);
    EXPECT_THROW(read_report(dir / "absent.json"), IoError);
    EXPECT_EQ(parse_report_format("md"), ReportFormat::markdown);
    EXPECT_THROW(parse_report_format("html"), InvalidConfig);
}

TEST(Compare, SelfComparisonHasZeroDeltas) {
    const BenchReport r = sample_report();
    const Comparison c = compare(r, r);
    ASSERT_EQ(c.rows.size(), 2u);
    EXPECT_TRUE(c.unmatched.empty());
    for (const auto& row : c.rows) {
        for (const auto& d : row.deltas) {
            ASSERT_TRUE(d.delta.has_value()) << row.name << " " << d.metric;
            EXPECT_EQ(*d.delta, 0.0);
        }
    }
}

TEST(Compare, UnmatchedAndDisjointReports) {
    const BenchReport a = sample_report();
    BenchReport b = a;
    b.rows[1].name = "Patient KD";
    b.rows[0].accuracy = cell({85.0, 85.0});
    const Comparison c = compare(a, b);
    ASSERT_EQ(c.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(*c.rows[0].deltas[1].delta, 4.0);
    EXPECT_EQ(c.unmatched, (std::vector<std::string>{"Pure KD (a)", "Patient KD (b)"}));

    b.rows[0].name = "Theseus";
    EXPECT_THROW(compare(a, b), InvalidInput);
}

TEST(Bench, MethodSlugs) {
    EXPECT_EQ(method_slug("Head Prune + KD"), "head-prune-kd");
    EXPECT_EQ(method_slug("Q8-PTQ"), "q8-ptq");
    EXPECT_EQ(method_slug("  Truncate & Finetune "), "truncate-finetune");
    EXPECT_THROW(method_slug("+ -"), InvalidConfig);
}

TEST(Bench, SelectRecipesRejectsUnknownNames) {
    const BenchConfig c = tiny_config("unused");
    EXPECT_EQ(select_recipes(c, {}).size(), 3u);
    EXPECT_EQ(select_recipes(c, {"Q8-PTQ"}).front().name, "Q8-PTQ");
    EXPECT_THROW(select_recipes(c, {"Nope"}), InvalidConfig);
}

TEST(Bench, EndToEndIsDeterministicAndRecomputableFromArtifacts) {
    const BenchConfig a = tiny_config(fresh_dir("e2e-a"));
    const BenchReport first = run_bench(a);
    EXPECT_FALSE(first.partial());
    for (const char* file : {"config.json", "report.json", "report.md"}) {
        EXPECT_TRUE(fs::exists(a.output_dir / file)) << file;
    }

    const MethodRow* teacher = first.find("Teacher");
    ASSERT_NE(teacher, nullptr);
    EXPECT_EQ(*teacher->label_loyalty.mean, 100.0);
    EXPECT_EQ(*teacher->probability_loyalty.mean, 100.0);
    EXPECT_EQ(*first.find("Pure KD")->n_layers, 1u);
    for (const auto& row : first.rows) {
        EXPECT_LE(*row.after_attack_accuracy.mean, *row.accuracy.mean) << row.name;
    }

    BenchConfig b = a;
    b.output_dir = fresh_dir("e2e-b");
    const BenchReport second = run_bench(b);
    EXPECT_EQ(to_json(first, false).dump(), to_json(second, false).dump());

    // Every cell can be rebuilt from the files on disk alone.
    const auto recipes = select_recipes(a, {});
    const auto offline = aggregate(a, a.seeds, recipes, {evaluate_seed(a, 5, recipes)}, {});
    EXPECT_EQ(to_json(offline, false), to_json(first, false));
}

TEST(Bench, SwappedStageOrderChangesRobustness) {
    BenchConfig a = tiny_config(fresh_dir("order-a"));
    a.recipes = {recipe("Teacher", json::array()),
                 recipe("KD and PTQ", {"truncate", "pure-kd", "ptq"})};
    BenchConfig b = a;
    b.output_dir = fresh_dir("order-b");
    b.recipes[1] = recipe("KD and PTQ", {"truncate", "ptq", "pure-kd"});
    const Comparison c = compare(run_bench(a), run_bench(b));
    ASSERT_EQ(c.rows.size(), 2u);
    const auto& deltas = c.rows[1].deltas;
    bool robustness_changed = false;
    for (const auto& d : deltas) {
        if (d.metric == "after_attack_accuracy" || d.metric == "mean_queries") {
            robustness_changed = robustness_changed || (d.delta && *d.delta != 0.0);
        }
    }
    EXPECT_TRUE(robustness_changed);
    for (const auto& d : c.rows[0].deltas) {
        if (d.metric != "speedup") {
            EXPECT_EQ(*d.delta, 0.0) << d.metric;
        }
    }
}

TEST(Bench, FailingRecipeYieldsPartialReport) {
    BenchConfig c = tiny_config(fresh_dir("partial"));
    // Removing more heads than the teacher has fails at run time.
    c.recipes = {recipe("Teacher", json::array()),
                 recipe("Over Prune", {{{"type", "head-prune"}, {"fraction", 0.9}},
                                       {{"type", "head-prune"}, {"fraction", 0.9}}})};
    const BenchReport r = run_bench(c);
    EXPECT_TRUE(r.partial());
    const MethodRow* row = r.find("Over Prune");
    ASSERT_NE(row, nullptr);
    ASSERT_EQ(row->errors.size(), 1u);
    EXPECT_EQ(row->errors[0].rfind("seed 5:", 0), 0u) << row->errors[0];
    EXPECT_TRUE(row->accuracy.failed());
    EXPECT_FALSE(r.find("Teacher")->failed());
    EXPECT_TRUE(fs::exists(SeedPaths(c.output_dir, 5).method_dir("Over Prune") / "error.txt"));
}
