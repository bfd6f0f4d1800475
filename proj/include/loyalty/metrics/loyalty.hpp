#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "loyalty/nn/losses.hpp"

namespace loyalty::metrics {

enum class LogBase { two, natural };

std::string to_string(LogBase b);
LogBase parse_log_base(const std::string& s);

/// Predictions of one model over one dataset split.
struct PredictionSet {
    std::vector<std::string> ids;
    std::vector<std::size_t> labels;
    std::vector<nn::ProbVector> probs;
    std::string provenance;
    std::string split;

    std::size_t size() const { return ids.size(); }

    /// Labels are derived as the argmax of each distribution.
    static PredictionSet from_probs(std::vector<std::string> ids, std::vector<nn::ProbVector> probs,
                                    std::string provenance, std::string split);

    /// Throws InvalidInput on length mismatch or a label that is not the argmax.
    void validate() const;

    friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

/// JSON-lines: an optional {"provenance", "split"} header line followed by one
/// {"id", "label", "probs"} object per example.
void write_jsonl(const PredictionSet& set, const std::filesystem::path& path);
PredictionSet read_jsonl(const std::filesystem::path& path);

/// Sum of p log(p/q) over entries with p > 0. When q is zero where p is not,
/// q is smoothed by 1e-12 and renormalized first.
double kl_divergence(const nn::ProbVector& p, const nn::ProbVector& q, LogBase base = LogBase::two);

/// Jensen-Shannon divergence; in [0, 1] for base 2 and [0, ln 2] for base e.
double js_divergence(const nn::ProbVector& p, const nn::ProbVector& q, LogBase base = LogBase::two);

/// 1 - sqrt(JS(p, q)) for a single pair.
double pair_probability_loyalty(const nn::ProbVector& p, const nn::ProbVector& q,
                                LogBase base = LogBase::two);

/// Percentage of examples whose student label equals the teacher label.
/// Throws InvalidInput naming the first mismatched id when sets are not aligned.
double label_loyalty(const PredictionSet& teacher, const PredictionSet& student);

/// Per-example 1 - sqrt(JS), in example order.
std::vector<double> probability_loyalty_per_example(const PredictionSet& teacher,
                                                    const PredictionSet& student,
                                                    LogBase base = LogBase::two);

/// 100 times the mean per-example probability loyalty.
double probability_loyalty(const PredictionSet& teacher, const PredictionSet& student,
                           LogBase base = LogBase::two);

/// Percentage of labels equal to `gold`.
double accuracy(const PredictionSet& predictions, std::span<const std::size_t> gold);

struct LoyaltyReport {
    double label_loyalty = 0.0;
    double probability_loyalty = 0.0;
    double accuracy = 0.0;
    std::size_t n_examples = 0;
    double lp_min = 0.0;
    double lp_median = 0.0;
    double lp_max = 0.0;
    LogBase log_base = LogBase::two;

    friend bool operator==(const LoyaltyReport&, const LoyaltyReport&) = default;
};

LoyaltyReport loyalty_report(const PredictionSet& teacher, const PredictionSet& student,
                             std::span<const std::size_t> gold, LogBase base = LogBase::two);

nlohmann::json to_json(const LoyaltyReport& r);
LoyaltyReport loyalty_report_from_json(const nlohmann::json& j);

}  // namespace loyalty::metrics
