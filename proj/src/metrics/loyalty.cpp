#include "loyalty/metrics/loyalty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "loyalty/errors.hpp"

namespace loyalty::metrics {

using nlohmann::json;

std::string to_string(LogBase b) { return b == LogBase::two ? "log2" : "ln"; }

LogBase parse_log_base(const std::string& s) {
    if (s == "log2" || s == "2") return LogBase::two;
    if (s == "ln" || s == "e" || s == "natural") return LogBase::natural;
    throw InvalidInput("unknown log base '" + s + "' (expected log2 or ln)");
}

PredictionSet PredictionSet::from_probs(std::vector<std::string> ids,
                                        std::vector<nn::ProbVector> probs, std::string provenance,
                                        std::string split) {
    if (ids.size() != probs.size()) throw InvalidInput("ids and probs differ in length");
    PredictionSet set;
    set.ids = std::move(ids);
    set.probs = std::move(probs);
    set.provenance = std::move(provenance);
    set.split = std::move(split);
    set.labels.reserve(set.probs.size());
    for (const auto& p : set.probs) set.labels.push_back(p.argmax());
    return set;
}

void PredictionSet::validate() const {
    if (ids.size() != labels.size() || ids.size() != probs.size()) {
        throw InvalidInput("prediction set sequences differ in length");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (labels[i] != probs[i].argmax()) {
            throw InvalidInput("label of '" + ids[i] + "' is not the argmax of its probabilities");
        }
    }
}

void write_jsonl(const PredictionSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write prediction set " + path.string());
    out << json{{"provenance", set.provenance}, {"split", set.split}}.dump() << '\n';
    for (std::size_t i = 0; i < set.size(); ++i) {
        json probs = json::array();
        for (double p : set.probs[i].probs()) probs.push_back(p);
        out << json{{"id", set.ids[i]}, {"label", set.labels[i]}, {"probs", probs}}.dump() << '\n';
    }
    if (!out) throw IoError("failed writing prediction set " + path.string());
}

PredictionSet read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open prediction set " + path.string());
    PredictionSet set;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            if (!j.contains("id")) {
                if (line_no != 1 || !j.contains("provenance")) {
                    throw FormatError("row has no 'id'", std::nullopt, line_no);
                }
                set.provenance = j.at("provenance").get<std::string>();
                set.split = j.value("split", "");
                continue;
            }
            const auto& id = j.at("id");
            set.ids.push_back(id.is_string() ? id.get<std::string>() : id.dump());
            nn::ProbVector probs(j.at("probs").get<std::vector<double>>());
            const std::size_t label = j.contains("label") ? j.at("label").get<std::size_t>()
                                                          : probs.argmax();
            if (label != probs.argmax()) {
                throw FormatError("label is not the argmax of probs", std::nullopt, line_no);
            }
            set.labels.push_back(label);
            set.probs.push_back(std::move(probs));
        } catch (const json::exception& e) {
            throw FormatError(std::string("invalid prediction row: ") + e.what(), std::nullopt,
                              line_no);
        } catch (const InvalidInput& e) {
            throw FormatError(e.what(), std::nullopt, line_no);
        }
    }
    return set;
}

namespace {

double log_in(double x, LogBase base) { return base == LogBase::two ? std::log2(x) : std::log(x); }

void check_dims(const nn::ProbVector& p, const nn::ProbVector& q) {
    if (p.size() != q.size()) {
        throw InvalidInput("distributions differ in dimension (" + std::to_string(p.size()) +
                           " vs " + std::to_string(q.size()) + ")");
    }
    if (p.size() == 0) throw InvalidInput("empty distribution");
}

double kl_terms(std::span<const double> p, std::span<const double> q, LogBase base) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) sum += p[i] * log_in(p[i] / q[i], base);
    }
    return std::max(sum, 0.0);
}

void check_aligned(const PredictionSet& a, const PredictionSet& b) {
    a.validate();
    b.validate();
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a.ids[i] != b.ids[i]) {
            throw InvalidInput("prediction sets are not aligned: first mismatch at '" + a.ids[i] +
                               "' vs '" + b.ids[i] + "'");
        }
    }
    if (a.size() != b.size()) {
        const auto& longer = a.size() > b.size() ? a : b;
        throw InvalidInput("prediction sets are not aligned: first mismatch at '" + longer.ids[n] +
                           "' (present in only one set)");
    }
    if (a.size() == 0) throw InvalidInput("prediction sets are empty");
}

}  // namespace

double kl_divergence(const nn::ProbVector& p, const nn::ProbVector& q, LogBase base) {
    check_dims(p, q);
    bool needs_smoothing = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0 && q[i] == 0.0) needs_smoothing = true;
    }
    if (!needs_smoothing) return kl_terms(p.probs(), q.probs(), base);

    constexpr double eps = 1e-12;
    std::vector<double> smoothed(q.probs().begin(), q.probs().end());
    const double z = 1.0 + eps * static_cast<double>(smoothed.size());
    for (double& v : smoothed) v = (v + eps) / z;
    return kl_terms(p.probs(), smoothed, base);
}

double js_divergence(const nn::ProbVector& p, const nn::ProbVector& q, LogBase base) {
    check_dims(p, q);
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    const double js = 0.5 * kl_terms(p.probs(), m, base) + 0.5 * kl_terms(q.probs(), m, base);
    const double upper = base == LogBase::two ? 1.0 : std::log(2.0);
    return std::clamp(js, 0.0, upper);
}

double pair_probability_loyalty(const nn::ProbVector& p, const nn::ProbVector& q, LogBase base) {
    return 1.0 - std::sqrt(js_divergence(p, q, base));
}

double label_loyalty(const PredictionSet& teacher, const PredictionSet& student) {
    check_aligned(teacher, student);
    return accuracy(student, teacher.labels);
}

std::vector<double> probability_loyalty_per_example(const PredictionSet& teacher,
                                                    const PredictionSet& student, LogBase base) {
    check_aligned(teacher, student);
    std::vector<double> out(teacher.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = pair_probability_loyalty(teacher.probs[i], student.probs[i], base);
    }
    return out;
}

double probability_loyalty(const PredictionSet& teacher, const PredictionSet& student,
                           LogBase base) {
    const auto per = probability_loyalty_per_example(teacher, student, base);
    double sum = 0.0;
    for (double v : per) sum += v;
    return 100.0 * sum / static_cast<double>(per.size());
}

double accuracy(const PredictionSet& predictions, std::span<const std::size_t> gold) {
    if (predictions.labels.size() != gold.size()) {
        throw InvalidInput("accuracy: " + std::to_string(predictions.labels.size()) +
                           " predictions for " + std::to_string(gold.size()) + " gold labels");
    }
    if (gold.empty()) throw InvalidInput("accuracy of an empty prediction set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions.labels[i] == gold[i];
    return 100.0 * static_cast<double>(hits) / static_cast<double>(gold.size());
}

LoyaltyReport loyalty_report(const PredictionSet& teacher, const PredictionSet& student,
                             std::span<const std::size_t> gold, LogBase base) {
    LoyaltyReport r;
    r.log_base = base;
    r.label_loyalty = label_loyalty(teacher, student);
    auto per = probability_loyalty_per_example(teacher, student, base);
    double sum = 0.0;
    for (double v : per) sum += v;
    r.probability_loyalty = 100.0 * sum / static_cast<double>(per.size());
    r.accuracy = accuracy(student, gold);
    r.n_examples = per.size();
    std::sort(per.begin(), per.end());
    r.lp_min = per.front();
    r.lp_max = per.back();
    const std::size_t n = per.size();
    r.lp_median = n % 2 == 1 ? per[n / 2] : 0.5 * (per[n / 2 - 1] + per[n / 2]);
    return r;
}

json to_json(const LoyaltyReport& r) {
    return json{{"label_loyalty", r.label_loyalty},
                {"probability_loyalty", r.probability_loyalty},
                {"accuracy", r.accuracy},
                {"n_examples", r.n_examples},
                {"lp_min", r.lp_min},
                {"lp_median", r.lp_median},
                {"lp_max", r.lp_max},
                {"log_base", to_string(r.log_base)}};
}

LoyaltyReport loyalty_report_from_json(const json& j) {
    LoyaltyReport r;
    r.label_loyalty = j.at("label_loyalty").get<double>();
    r.probability_loyalty = j.at("probability_loyalty").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.n_examples = j.at("n_examples").get<std::size_t>();
    r.lp_min = j.at("lp_min").get<double>();
    r.lp_median = j.at("lp_median").get<double>();
    r.lp_max = j.at("lp_max").get<double>();
    r.log_base = parse_log_base(j.at("log_base").get<std::string>());
    return r;
}

}  // namespace loyalty::metrics
