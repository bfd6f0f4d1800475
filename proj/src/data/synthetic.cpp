#include "loyalty/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "loyalty/errors.hpp"
#include "loyalty/rng.hpp"

namespace loyalty::data {

namespace {

constexpr std::uint64_t kLexiconSeed = 0x5eed;

/// Pseudo-words are two or three consonant-vowel syllables. The lexicon is a
/// fixed function of the class count so every dataset seed shares words.
class Lexicon {
public:
    explicit Lexicon(std::size_t n_words) {
        static constexpr std::string_view consonants = "bdfgklmnprstvz";
        static constexpr std::string_view vowels = "aeiou";
        std::vector<std::string> syllables;
        for (char c : consonants) {
            for (char v : vowels) syllables.push_back(std::string{c, v});
        }
        std::vector<std::string> pool;
        for (const auto& a : syllables) {
            for (const auto& b : syllables) pool.push_back(a + b);
        }
        Rng rng = make_rng(kLexiconSeed, "lexicon");
        shuffle(pool.begin(), pool.end(), rng);
        if (n_words > pool.size()) throw InvalidInput("synthetic lexicon too large");
        pool.resize(n_words);
        words_ = std::move(pool);
    }

    std::string next() { return words_.at(cursor_++); }

private:
    std::vector<std::string> words_;
    std::size_t cursor_ = 0;
};

struct SynonymWord {
    std::string base;
    std::string synonym;    // empty when the word has no planted partner
    std::string companion;  // preceding word shared by base and synonym
};

struct Vocabulary {
    std::vector<std::vector<SynonymWord>> cues;  // per class
    std::vector<SynonymWord> nouns;
    std::vector<SynonymWord> adjectives;
    std::vector<std::string> verbs;
};

constexpr std::size_t kNouns = 40;
constexpr std::size_t kNounSynonyms = 8;
constexpr std::size_t kAdjectives = 20;
constexpr std::size_t kAdjectiveSynonyms = 6;
constexpr std::size_t kVerbs = 16;

Vocabulary build_vocabulary(const SyntheticOptions& o) {
    const std::size_t n_cue_words = 3 * o.n_classes * o.cues_per_class;
    Lexicon lex(n_cue_words + kNouns + 2 * kNounSynonyms + kAdjectives + 2 * kAdjectiveSynonyms +
                kVerbs);
    Vocabulary v;
    v.cues.resize(o.n_classes);
    for (auto& cls : v.cues) {
        for (std::size_t i = 0; i < o.cues_per_class; ++i) {
            SynonymWord w{lex.next(), {}, {}};
            w.synonym = lex.next();
            w.companion = lex.next();
            cls.push_back(std::move(w));
        }
    }
    for (std::size_t i = 0; i < kNouns; ++i) {
        SynonymWord w{lex.next(), {}, {}};
        if (i < kNounSynonyms) {
            w.synonym = lex.next();
            w.companion = lex.next();
        }
        v.nouns.push_back(std::move(w));
    }
    for (std::size_t i = 0; i < kAdjectives; ++i) {
        SynonymWord w{lex.next(), {}, {}};
        if (i < kAdjectiveSynonyms) {
            w.synonym = lex.next();
            w.companion = lex.next();
        }
        v.adjectives.push_back(std::move(w));
    }
    for (std::size_t i = 0; i < kVerbs; ++i) v.verbs.push_back(lex.next());
    return v;
}

std::vector<std::string> label_names_for(std::size_t k) {
    if (k == 3) return {"entailment", "neutral", "contradiction"};
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("class" + std::to_string(i));
    return names;
}

void validate_options(const SyntheticOptions& o) {
    if (o.n_examples < 100) throw InvalidInput("generate_synthetic needs n_examples >= 100");
    if (o.n_classes < 2) throw InvalidInput("generate_synthetic needs at least 2 classes");
    if (o.dev_examples + o.test_examples + 50 > o.n_examples) {
        throw InvalidInput("n_examples too small for the requested dev/test split sizes");
    }
    if (o.cues_per_class == 0 || o.cues_per_example == 0) {
        throw InvalidInput("cue counts must be positive");
    }
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput(std::string(name) + " must lie in [0, 1]");
    };
    prob(o.cue_fidelity, "cue_fidelity");
    prob(o.synonym_rate, "synonym_rate");
    prob(o.label_noise, "label_noise");
    prob(o.companion_rate, "companion_rate");
}

/// Uniform draw from [0, n) excluding `skip`.
std::size_t other_than(Rng& rng, std::size_t n, std::size_t skip) {
    std::size_t c = uniform_index(rng, n - 1);
    return c >= skip ? c + 1 : c;
}

}  // namespace

TextDataset generate_synthetic(const SyntheticOptions& o) {
    validate_options(o);
    const Vocabulary vocab = build_vocabulary(o);
    Rng rng = make_rng(o.seed, "data");

    // A planted pair shares its companion word, which gives the two members a
    // context that no other word has.
    auto surface = [&](const SynonymWord& w) -> std::string {
        if (w.synonym.empty()) return w.base;
        const std::string& word = uniform01(rng) < o.synonym_rate ? w.synonym : w.base;
        if (uniform01(rng) < o.companion_rate) return w.companion + " " + word;
        return word;
    };
    auto pick = [&](const auto& list) -> const auto& { return list[uniform_index(rng, list.size())]; };

    TextDataset ds;
    ds.label_names = label_names_for(o.n_classes);
    ds.seed = o.seed;
    ds.provenance = "synthetic(seed=" + std::to_string(o.seed) + ")";
    for (const auto& cls : vocab.cues) {
        for (const auto& w : cls) ds.planted_synonyms.emplace_back(w.base, w.synonym);
    }
    for (const auto* list : {&vocab.nouns, &vocab.adjectives}) {
        for (const auto& w : *list) {
            if (!w.synonym.empty()) ds.planted_synonyms.emplace_back(w.base, w.synonym);
        }
    }

    for (std::size_t i = 0; i < o.n_examples; ++i) {
        const std::size_t truth = i % o.n_classes;

        std::string premise = "the " + surface(pick(vocab.adjectives)) + " " +
                              surface(pick(vocab.nouns)) + " " + pick(vocab.verbs) + " the " +
                              surface(pick(vocab.nouns));
        if (uniform01(rng) < 0.5) premise += " near the " + surface(pick(vocab.nouns));

        std::vector<std::string> slots;
        for (std::size_t c = 0; c < o.cues_per_example; ++c) {
            std::size_t cls = truth;
            if (uniform01(rng) >= o.cue_fidelity) cls = other_than(rng, o.n_classes, truth);
            slots.push_back(surface(pick(vocab.cues[cls])));
        }
        slots.push_back(surface(pick(vocab.adjectives)));
        shuffle(slots.begin(), slots.end(), rng);
        std::string hypothesis = "the " + surface(pick(vocab.nouns));
        for (const auto& s : slots) hypothesis += " " + s;

        std::size_t label = truth;
        if (uniform01(rng) < o.label_noise) label = other_than(rng, o.n_classes, truth);

        char id[32];
        std::snprintf(id, sizeof id, "syn-%06zu", i);
        ds.examples.push_back(Example{id, premise + " [sep] " + hypothesis, label, Split::train});
    }

    std::vector<std::size_t> order(o.n_examples);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng = make_rng(o.seed, "split");
    shuffle(order.begin(), order.end(), split_rng);
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k < o.test_examples) {
            ds.examples[order[k]].split = Split::test;
        } else if (k < o.test_examples + o.dev_examples) {
            ds.examples[order[k]].split = Split::dev;
        }
    }
    return ds;
}

double bayes_optimal_accuracy(const SyntheticOptions& o) {
    validate_options(o);
    const std::size_t k = o.n_classes;
    const std::size_t n = o.cues_per_example;
    const double off = (1.0 - o.cue_fidelity) / static_cast<double>(k - 1);
    const double noise_off = o.label_noise / static_cast<double>(k - 1);

    // Words within a cue class are exchangeable, so the class tuple is a
    // sufficient statistic; enumerate all k^n of them.
    std::vector<std::size_t> tuple(n, 0);
    double accuracy = 0.0;
    while (true) {
        std::vector<double> joint(k);  // P(truth = y, tuple)
        for (std::size_t y = 0; y < k; ++y) {
            double p = 1.0 / static_cast<double>(k);
            for (std::size_t c : tuple) p *= (c == y) ? o.cue_fidelity : off;
            joint[y] = p;
        }
        double best = 0.0;
        for (std::size_t z = 0; z < k; ++z) {
            double p_obs = 0.0;  // P(observed = z, tuple)
            for (std::size_t y = 0; y < k; ++y) p_obs += joint[y] * (z == y ? 1.0 - o.label_noise : noise_off);
            best = std::max(best, p_obs);
        }
        accuracy += best;

        std::size_t pos = 0;
        while (pos < n && ++tuple[pos] == k) tuple[pos++] = 0;
        if (pos == n) break;
    }
    return accuracy;
}

}  // namespace loyalty::data
