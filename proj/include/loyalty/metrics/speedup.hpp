#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "loyalty/model/classifier.hpp"

namespace loyalty::metrics {

struct TimingOptions {
    std::size_t warmup_runs = 5;
    std::size_t timed_runs = 30;
    /// Standard deviation above this fraction of the median flags the result.
    double max_relative_spread = 0.2;
};

struct TimingStats {
    std::vector<double> seconds;
    double median = 0.0;
    double variance = 0.0;

    double relative_spread() const;
};

struct SpeedupResult {
    double ratio = 0.0;
    TimingStats reference;
    TimingStats candidate;
    /// Set when either side's spread exceeded the threshold ("UnstableTiming").
    std::vector<std::string> warnings;
};

/// Runs `reference` and `candidate` alternately (warm-up runs discarded) and
/// returns median(reference) / median(candidate).
SpeedupResult measure_speedup(const std::function<void()>& reference,
                              const std::function<void()>& candidate,
                              const TimingOptions& options = {});

/// Times one inference pass of each model over every sequence of `batch`.
SpeedupResult measure_speedup(const model::ClassifierModel& reference,
                              const model::ClassifierModel& candidate,
                              std::span<const std::vector<model::TokenId>> batch,
                              const TimingOptions& options = {});

}  // namespace loyalty::metrics
