#include "loyalty/metrics/speedup.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "loyalty/errors.hpp"

namespace loyalty::metrics {

double TimingStats::relative_spread() const {
    return median > 0.0 ? std::sqrt(variance) / median : 0.0;
}

namespace {

TimingStats summarize(std::vector<double> seconds) {
    TimingStats s;
    s.seconds = seconds;
    std::sort(seconds.begin(), seconds.end());
    const std::size_t n = seconds.size();
    s.median = n % 2 == 1 ? seconds[n / 2] : 0.5 * (seconds[n / 2 - 1] + seconds[n / 2]);
    double mean = 0.0;
    for (double v : seconds) mean += v;
    mean /= static_cast<double>(n);
    for (double v : seconds) s.variance += (v - mean) * (v - mean);
    s.variance /= static_cast<double>(n > 1 ? n - 1 : 1);
    return s;
}

double time_once(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(stop - start).count();
}

}  // namespace

SpeedupResult measure_speedup(const std::function<void()>& reference,
                              const std::function<void()>& candidate,
                              const TimingOptions& options) {
    if (options.timed_runs < 30) throw InvalidInput("measure_speedup needs at least 30 timed runs");
    for (std::size_t i = 0; i < options.warmup_runs; ++i) {
        reference();
        candidate();
    }
    std::vector<double> ref, cand;
    for (std::size_t i = 0; i < options.timed_runs; ++i) {
        ref.push_back(time_once(reference));
        cand.push_back(time_once(candidate));
    }
    SpeedupResult r;
    r.reference = summarize(std::move(ref));
    r.candidate = summarize(std::move(cand));
    r.ratio = r.reference.median / r.candidate.median;
    for (const auto* side : {&r.reference, &r.candidate}) {
        if (side->relative_spread() > options.max_relative_spread) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "UnstableTiming: %s std is %.1f%% of its median",
                          side == &r.reference ? "reference" : "candidate",
                          100.0 * side->relative_spread());
            r.warnings.emplace_back(msg);
        }
    }
    return r;
}

SpeedupResult measure_speedup(const model::ClassifierModel& reference,
                              const model::ClassifierModel& candidate,
                              std::span<const std::vector<model::TokenId>> batch,
                              const TimingOptions& options) {
    if (batch.empty()) throw InvalidInput("measure_speedup needs a non-empty batch");
    volatile double sink = 0.0;
    auto run = [&](const model::ClassifierModel& m) {
        return [&m, &batch, &sink] {
            for (const auto& ids : batch) sink = sink + model::logits(m, ids)[0];
        };
    };
    return measure_speedup(run(reference), run(candidate), options);
}

}  // namespace loyalty::metrics
