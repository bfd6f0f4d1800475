#include "support/fixtures.hpp"

#include <cmath>

namespace loyalty::testing {

using attack::LabeledText;
using attack::PredictFn;
using attack::SynonymTable;
using attack::Words;
using nn::ProbVector;

// Two-class bag-of-words scorer: p(class 1) = sigmoid(sum of word weights).
PredictFn keyword_model(std::map<std::string, double> weights) {
    return [weights](const Words& words) {
        double score = 0.0;
        for (const auto& w : words) {
            if (auto it = weights.find(w); it != weights.end()) score += it->second;
        }
        const double p = 1.0 / (1.0 + std::exp(-score));
        return nn::ProbVector({1.0 - p, p});
    };
}

const std::map<std::string, double> kWeights{
    {"good", 2.0}, {"great", 2.0}, {"fine", 1.0}, {"ok", 0.5}, {"bad", -2.0},
    {"awful", -2.5}, {"dull", -1.0}, {"fun", 1.0}, {"slow", -0.5}, {"not", -1.5}};

std::vector<LabeledText> fixture_suite() {
    return {
        {"a", {"the", "good", "film"}, 1},
        {"b", {"a", "great", "and", "fun", "story"}, 1},
        {"c", {"the", "bad", "plot"}, 0},
        {"d", {"awful", "and", "slow"}, 0},
        {"e", {"fine", "acting"}, 1},
        {"f", {"dull", "but", "good"}, 0},  // misclassified by the scorer
        {"g", {"not", "fun"}, 0},
    };
}

SynonymTable small_table() {
    return SynonymTable({{"good", {"fine", "ok"}},
                         {"great", {"good"}},
                         {"fun", {"fine"}},
                         {"bad", {"dull"}},
                         {"awful", {"bad"}},
                         {"fine", {"ok"}}});
}

// Every list of small_table() extended at the end.
SynonymTable enlarged_table() {
    return SynonymTable({{"good", {"fine", "ok", "bad"}},
                         {"great", {"good", "dull"}},
                         {"fun", {"fine", "slow"}},
                         {"bad", {"dull", "ok"}},
                         {"awful", {"bad", "fine"}},
                         {"fine", {"ok", "not"}},
                         {"not", {"ok"}}});
}

ProbVector random_dist(Rng& rng, std::size_t dim, bool allow_zeros) {
    std::vector<double> v(dim);
    double total = 0.0;
    for (auto& x : v) {
        x = uniform01(rng);
        if (allow_zeros && uniform01(rng) < 0.2) x = 0.0;
        total += x;
    }
    if (total == 0.0) {
        v[0] = 1.0;
        total = 1.0;
    }
    for (auto& x : v) x /= total;
    return ProbVector(v);
}

// Independent oracle: long-double natural logs, converted to bits at the end.
long double oracle_kl(const ProbVector& p, const ProbVector& q) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const long double a = p[i];
        const long double b = q[i];
        if (a != 0.0L) s += a * (std::log(a) - std::log(b));
    }
    return s / std::log(2.0L);
}

long double oracle_js(const ProbVector& p, const ProbVector& q) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const long double a = p[i];
        const long double b = q[i];
        const long double m = (a + b) / 2.0L;
        if (a != 0.0L) s += 0.5L * a * (std::log(a) - std::log(m));
        if (b != 0.0L) s += 0.5L * b * (std::log(b) - std::log(m));
    }
    return s / std::log(2.0L);
}

}  // namespace loyalty::testing
