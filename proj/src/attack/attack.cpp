#include "loyalty/attack/attack.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>

#include "loyalty/errors.hpp"

namespace loyalty::attack {

using nlohmann::json;

SynonymTable::SynonymTable(std::map<std::string, Words> entries) : entries_(std::move(entries)) {
    for (const auto& [word, list] : entries_) {
        if (std::find(list.begin(), list.end(), word) != list.end()) {
            throw InvalidInput("synonym table lists '" + word + "' as its own candidate");
        }
    }
}

SynonymTable SynonymTable::build(const data::WordEmbeddings& emb, std::size_t k, double min_cosine) {
    const std::size_t n = emb.words.size();
    if (n == 0) throw InvalidInput("build_synonym_table: empty vocabulary");
    std::map<std::string, Words> entries;
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t i = 0; i < n; ++i) {
        sims.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double c = emb.cosine(i, j);
            if (c >= min_cosine) sims.emplace_back(c, j);
        }
        std::sort(sims.begin(), sims.end(), [&emb](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return emb.words[a.second] < emb.words[b.second];
        });
        Words list;
        for (std::size_t r = 0; r < sims.size() && r < k; ++r) list.push_back(emb.words[sims[r].second]);
        entries.emplace(emb.words[i], std::move(list));
    }
    return SynonymTable(std::move(entries));
}

std::span<const std::string> SynonymTable::candidates(const std::string& word) const {
    auto it = entries_.find(word);
    if (it == entries_.end()) return {};
    return it->second;
}

json SynonymTable::to_json() const { return json(entries_); }

SynonymTable SynonymTable::from_json(const json& j) {
    return SynonymTable(j.get<std::map<std::string, Words>>());
}

PredictFn classifier_oracle(const model::ClassifierModel& model, const model::Tokenizer& tokenizer) {
    return [&model, &tokenizer](const Words& words) {
        return model::predict_proba(model, tokenizer.encode_words(words));
    };
}

WordImportance rank_word_importance(CountingOracle& oracle, const Words& words, std::size_t label,
                                    const nn::ProbVector& base) {
    WordImportance out;
    out.scores.assign(words.size(), 0.0);
    out.order.resize(words.size());
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
    if (words.size() <= 1) return out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        Words without;
        without.reserve(words.size() - 1);
        for (std::size_t j = 0; j < words.size(); ++j) {
            if (j != i) without.push_back(words[j]);
        }
        out.scores[i] = base[label] - oracle(without)[label];
    }
    std::stable_sort(out.order.begin(), out.order.end(),
                     [&out](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
    return out;
}

AttackOutcome attack_example(const PredictFn& model, const std::string& id, const Words& words,
                             std::size_t label, const SynonymTable& table,
                             const AttackOptions& options) {
    CountingOracle oracle(model);
    AttackOutcome out;
    out.id = id;
    out.n_words = words.size();
    Words current = words;

    const nn::ProbVector clean = oracle(current);
    out.originally_correct = clean.argmax() == label;
    if (out.originally_correct) {
        const WordImportance importance = rank_word_importance(oracle, current, label, clean);
        double current_p = clean[label];
        for (std::size_t pos : importance.order) {
            const auto cands = table.candidates(words[pos]);
            const std::size_t limit = std::min(cands.size(), options.max_candidates);
            if (limit == 0) continue;
            std::optional<std::size_t> flip;
            std::size_t best = 0;
            double best_p = current_p;
            Words trial = current;
            for (std::size_t c = 0; c < limit; ++c) {
                trial[pos] = cands[c];
                const nn::ProbVector p = oracle(trial);
                if (p.argmax() != label && !flip) flip = c;
                if (p[label] < best_p) {
                    best_p = p[label];
                    best = c;
                }
            }
            if (flip) {
                current[pos] = cands[*flip];
                out.success = true;
                break;
            }
            if (best_p < current_p) {
                current[pos] = cands[best];
                current_p = best_p;
            }
        }
    }
    for (std::size_t i = 0; i < words.size(); ++i) out.words_changed += current[i] != words[i];
    out.final_text = model::Tokenizer::join(current);
    out.queries = oracle.queries();
    return out;
}

json to_json(const AttackOutcome& o) {
    return json{{"id", o.id},
                {"originally_correct", o.originally_correct},
                {"success", o.success},
                {"final_text", o.final_text},
                {"queries", o.queries},
                {"words_changed", o.words_changed},
                {"n_words", o.n_words}};
}

AttackOutcome attack_outcome_from_json(const json& j) {
    AttackOutcome o;
    o.id = j.at("id").get<std::string>();
    o.originally_correct = j.at("originally_correct").get<bool>();
    o.success = j.at("success").get<bool>();
    o.final_text = j.at("final_text").get<std::string>();
    o.queries = j.at("queries").get<std::size_t>();
    o.words_changed = j.at("words_changed").get<std::size_t>();
    o.n_words = j.at("n_words").get<std::size_t>();
    return o;
}

json to_json(const RobustnessReport& r) {
    return json{{"clean_accuracy", r.clean_accuracy},
                {"after_attack_accuracy", r.after_attack_accuracy},
                {"mean_queries", r.mean_queries},
                {"mean_queries_all", r.mean_queries_all},
                {"success_rate", r.success_rate},
                {"mean_perturbation", r.mean_perturbation},
                {"n_examples", r.n_examples},
                {"n_attacked", r.n_attacked}};
}

RobustnessReport robustness_report_from_json(const json& j) {
    RobustnessReport r;
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    r.after_attack_accuracy = j.at("after_attack_accuracy").get<double>();
    r.mean_queries = j.at("mean_queries").get<double>();
    r.mean_queries_all = j.at("mean_queries_all").get<double>();
    r.success_rate = j.at("success_rate").get<double>();
    r.mean_perturbation = j.at("mean_perturbation").get<double>();
    r.n_examples = j.at("n_examples").get<std::size_t>();
    r.n_attacked = j.at("n_attacked").get<std::size_t>();
    return r;
}

RobustnessReport summarize(std::span<const AttackOutcome> outcomes) {
    RobustnessReport r;
    r.n_examples = outcomes.size();
    if (outcomes.empty()) return r;
    std::size_t survived = 0, successes = 0, queries_attacked = 0, queries_all = 0;
    double perturbation = 0.0;
    for (const auto& o : outcomes) {
        queries_all += o.queries;
        if (!o.originally_correct) continue;
        ++r.n_attacked;
        queries_attacked += o.queries;
        if (o.success) {
            ++successes;
            if (o.n_words > 0) {
                perturbation += static_cast<double>(o.words_changed) / static_cast<double>(o.n_words);
            }
        } else {
            ++survived;
        }
    }
    const auto n = static_cast<double>(outcomes.size());
    r.clean_accuracy = 100.0 * static_cast<double>(r.n_attacked) / n;
    r.after_attack_accuracy = 100.0 * static_cast<double>(survived) / n;
    r.mean_queries_all = static_cast<double>(queries_all) / n;
    if (r.n_attacked > 0) {
        r.mean_queries = static_cast<double>(queries_attacked) / static_cast<double>(r.n_attacked);
        r.success_rate = 100.0 * static_cast<double>(successes) / static_cast<double>(r.n_attacked);
    }
    if (successes > 0) r.mean_perturbation = perturbation / static_cast<double>(successes);
    return r;
}

RobustnessResult evaluate_robustness(const PredictFn& model, std::span<const LabeledText> examples,
                                     const SynonymTable& table, const AttackOptions& options) {
    if (examples.empty()) throw InvalidInput("evaluate_robustness on an empty dataset");
    RobustnessResult result;
    result.outcomes.reserve(examples.size());
    for (const auto& ex : examples) {
        result.outcomes.push_back(attack_example(model, ex.id, ex.words, ex.label, table, options));
    }
    result.report = summarize(result.outcomes);
    return result;
}

void write_outcomes(std::span<const AttackOutcome> outcomes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write attack outcomes " + path.string());
    for (const auto& o : outcomes) out << to_json(o).dump() << '\n';
    if (!out) throw IoError("failed writing attack outcomes " + path.string());
}

std::vector<AttackOutcome> read_outcomes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open attack outcomes " + path.string());
    std::vector<AttackOutcome> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(attack_outcome_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw FormatError(std::string("invalid attack outcome: ") + e.what(), std::nullopt, line_no);
        }
    }
    return out;
}

}  // namespace loyalty::attack
