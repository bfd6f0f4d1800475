#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "loyalty/data/embeddings.hpp"
#include "loyalty/model/classifier.hpp"
#include "loyalty/nn/losses.hpp"

namespace loyalty::attack {

using Words = std::vector<std::string>;

/// Word -> substitutes ranked by descending cosine similarity.
class SynonymTable {
public:
    SynonymTable() = default;
    explicit SynonymTable(std::map<std::string, Words> entries);

    /// Keeps, for every word, the k most similar other words whose cosine is at
    /// least `min_cosine` (similarity ties broken alphabetically). Throws
    /// InvalidInput for empty embeddings.
    static SynonymTable build(const data::WordEmbeddings& embeddings, std::size_t k,
                              double min_cosine);

    /// Candidates for `word`; empty when it has none.
    std::span<const std::string> candidates(const std::string& word) const;
    const std::map<std::string, Words>& entries() const { return entries_; }

    nlohmann::json to_json() const;
    static SynonymTable from_json(const nlohmann::json& j);

    friend bool operator==(const SynonymTable&, const SynonymTable&) = default;

private:
    std::map<std::string, Words> entries_;
};

/// The only view of a model the attack gets: words in, distribution out.
using PredictFn = std::function<nn::ProbVector(const Words&)>;

/// Black-box oracle that counts every model invocation.
class CountingOracle {
public:
    explicit CountingOracle(PredictFn predict) : predict_(std::move(predict)) {}

    nn::ProbVector operator()(const Words& words) {
        ++queries_;
        return predict_(words);
    }
    std::size_t queries() const { return queries_; }

private:
    PredictFn predict_;
    std::size_t queries_ = 0;
};

/// Wraps a classifier and its tokenizer as a PredictFn.
PredictFn classifier_oracle(const model::ClassifierModel& model, const model::Tokenizer& tokenizer);

struct WordImportance {
    std::vector<std::size_t> order;  // positions, most important first
    std::vector<double> scores;      // per position, in position order
};

/// Score of position i = p(label | words) - p(label | words without i), using
/// `base` as p(label | words). Positions are sorted by descending score with
/// ties in position order. Each deletion probe is one query; a single-word
/// input is not probed.
WordImportance rank_word_importance(CountingOracle& oracle, const Words& words, std::size_t label,
                                    const nn::ProbVector& base);

struct AttackOutcome {
    std::string id;
    bool originally_correct = false;
    bool success = false;
    std::string final_text;
    std::size_t queries = 0;
    std::size_t words_changed = 0;
    std::size_t n_words = 0;

    friend bool operator==(const AttackOutcome&, const AttackOutcome&) = default;
};

nlohmann::json to_json(const AttackOutcome& o);
AttackOutcome attack_outcome_from_json(const nlohmann::json& j);

struct AttackOptions {
    /// Candidates tried per position (a prefix of the table's list).
    std::size_t max_candidates = 8;
};

/// Greedy substitution attack on one labeled example. One query checks the
/// clean prediction; a misclassified example stops there. Otherwise positions
/// are visited by importance, every candidate for the position is queried,
/// and the first candidate in table order that flips the label ends the
/// attack with success. Failing that, the candidate with the lowest
/// true-class probability is kept if it lowers that probability.
AttackOutcome attack_example(const PredictFn& model, const std::string& id, const Words& words,
                             std::size_t label, const SynonymTable& table,
                             const AttackOptions& options = {});

struct LabeledText {
    std::string id;
    Words words;
    std::size_t label = 0;
};

struct RobustnessReport {
    double clean_accuracy = 0.0;
    double after_attack_accuracy = 0.0;
    /// Mean queries over attacked (originally correct) examples.
    double mean_queries = 0.0;
    /// Mean queries over all examples, the misclassified ones counting 1.
    double mean_queries_all = 0.0;
    double success_rate = 0.0;
    /// Mean fraction of words changed by successful attacks.
    double mean_perturbation = 0.0;
    std::size_t n_examples = 0;
    std::size_t n_attacked = 0;

    friend bool operator==(const RobustnessReport&, const RobustnessReport&) = default;
};

nlohmann::json to_json(const RobustnessReport& r);
RobustnessReport robustness_report_from_json(const nlohmann::json& j);

struct RobustnessResult {
    RobustnessReport report;
    std::vector<AttackOutcome> outcomes;
};

/// Attacks every example in order. Throws InvalidInput for an empty list.
RobustnessResult evaluate_robustness(const PredictFn& model, std::span<const LabeledText> examples,
                                     const SynonymTable& table, const AttackOptions& options = {});

/// Summary statistics of a list of outcomes.
RobustnessReport summarize(std::span<const AttackOutcome> outcomes);

void write_outcomes(std::span<const AttackOutcome> outcomes, const std::filesystem::path& path);
std::vector<AttackOutcome> read_outcomes(const std::filesystem::path& path);

}  // namespace loyalty::attack
