// Command-line front end: train, compress, attack, evaluate, bench, compare
// and report. Exit codes: 0 success, 2 configuration error, 3 stage failure.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "loyalty/bench/bench.hpp"
#include "loyalty/errors.hpp"

namespace fs = std::filesystem;
using namespace loyalty;
using namespace loyalty::bench;

namespace {

constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

struct CommonArgs {
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::string out;
    std::string format = "markdown";
    std::vector<std::string> methods;
};

void add_common(CLI::App* app, CommonArgs& args, bool with_methods = true) {
    app->add_option("--config", args.config, "JSON config file (defaults apply when omitted)");
    app->add_option("--seed", args.seeds, "Seed to run; repeat for several")->take_all();
    app->add_option("--out", args.out, "Output directory (overrides the config)");
    if (with_methods) {
        app->add_option("--methods", args.methods, "Only these recipe names")->delimiter(',');
    }
}

BenchConfig resolve(const CommonArgs& args) {
    BenchConfig c = args.config.empty() ? default_config() : load_config(args.config);
    if (!args.seeds.empty()) c.seeds = args.seeds;
    if (!args.out.empty()) c.output_dir = args.out;
    c.validate();
    return c;
}

void print_report(const BenchReport& r, const std::string& format) {
    if (parse_report_format(format) == ReportFormat::json) {
        std::cout << to_json(r).dump(2) << "\n";
    } else {
        std::cout << to_markdown(r);
    }
}

// Methods whose artifacts record a failure.
bool any_failed(const BenchConfig& c, const std::vector<compress::CompressionRecipe>& recipes) {
    for (const auto seed : c.seeds) {
        const SeedPaths paths(c.output_dir, seed);
        for (const auto& r : recipes) {
            if (fs::exists(paths.method_dir(r.name) / "error.txt")) return true;
        }
    }
    return false;
}

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("loyalty");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    if (const char* level = std::getenv("LOYALTY_LOG_LEVEL")) {
        spdlog::set_level(spdlog::level::from_str(level));
    } else {
        spdlog::set_level(spdlog::level::info);
    }
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Compression loyalty and robustness benchmark"};
    app.require_subcommand(1);

    CommonArgs train_args, compress_args, attack_args, evaluate_args, bench_args;
    auto* train_cmd = app.add_subcommand("train", "Generate data and train the teacher");
    add_common(train_cmd, train_args, false);
    auto* compress_cmd = app.add_subcommand("compress", "Run compression recipes from the teacher");
    add_common(compress_cmd, compress_args);
    auto* attack_cmd = app.add_subcommand("attack", "Attack every compressed model");
    add_common(attack_cmd, attack_args);
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Recompute the report from artifacts");
    add_common(evaluate_cmd, evaluate_args);
    evaluate_cmd->add_option("--format", evaluate_args.format, "json or markdown");
    auto* bench_cmd = app.add_subcommand("bench", "Run the whole pipeline for every seed");
    add_common(bench_cmd, bench_args);
    bench_cmd->add_option("--format", bench_args.format, "json or markdown");

    std::string report_a, report_b, compare_format = "markdown";
    auto* compare_cmd = app.add_subcommand("compare", "Per-cell deltas between two reports");
    compare_cmd->add_option("a", report_a, "Baseline report.json")->required();
    compare_cmd->add_option("b", report_b, "Other report.json")->required();
    compare_cmd->add_option("--format", compare_format, "json or markdown");

    std::string report_in, report_format = "markdown", report_out;
    auto* report_cmd = app.add_subcommand("report", "Render a report.json");
    report_cmd->add_option("report", report_in, "report.json")->required();
    report_cmd->add_option("--format", report_format, "json or markdown");
    report_cmd->add_option("--out", report_out, "Write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*train_cmd) {
            const auto c = resolve(train_args);
            for (const auto seed : c.seeds) run_train_stage(c, seed);
            return 0;
        }
        if (*compress_cmd) {
            const auto c = resolve(compress_args);
            const auto recipes = select_recipes(c, compress_args.methods);
            for (const auto seed : c.seeds) run_compress_stage(c, seed, recipes);
            return any_failed(c, recipes) ? kStageFailure : 0;
        }
        if (*attack_cmd) {
            const auto c = resolve(attack_args);
            const auto recipes = select_recipes(c, attack_args.methods);
            for (const auto seed : c.seeds) run_attack_stage(c, seed, recipes);
            return any_failed(c, recipes) ? kStageFailure : 0;
        }
        if (*evaluate_cmd) {
            const auto c = resolve(evaluate_args);
            const auto recipes = select_recipes(c, evaluate_args.methods);
            std::vector<std::map<std::string, MethodResult>> per_seed;
            for (const auto seed : c.seeds) per_seed.push_back(evaluate_seed(c, seed, recipes));
            const auto r = aggregate(c, c.seeds, recipes, per_seed, {});
            print_report(r, evaluate_args.format);
            return r.partial() ? kStageFailure : 0;
        }
        if (*bench_cmd) {
            const auto c = resolve(bench_args);
            BenchOptions o;
            o.methods = bench_args.methods;
            const auto r = run_bench(c, o);
            print_report(r, bench_args.format);
            return r.partial() ? kStageFailure : 0;
        }
        if (*compare_cmd) {
            const auto format = parse_report_format(compare_format);
            const auto diff = compare(read_report(report_a), read_report(report_b));
            if (format == ReportFormat::json) {
                std::cout << to_json(diff).dump(2) << "\n";
            } else {
                std::cout << to_markdown(diff);
            }
            return 0;
        }
        if (*report_cmd) {
            const auto format = parse_report_format(report_format);
            const auto r = read_report(report_in);
            if (report_out.empty()) {
                print_report(r, report_format);
            } else {
                write_report(r, report_out, format);
            }
            return 0;
        }
    } catch (const InvalidConfig& e) {
        spdlog::error("configuration error: {}", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kStageFailure;
    }
    return 0;
}
