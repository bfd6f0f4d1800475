#include "loyalty/data/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "loyalty/errors.hpp"
#include "loyalty/rng.hpp"

namespace loyalty::data {

double WordEmbeddings::cosine(std::size_t a, std::size_t b) const {
    double dot = 0.0;
    for (std::size_t d = 0; d < dim(); ++d) dot += vectors(a, d) * vectors(b, d);
    return dot;
}

std::ptrdiff_t WordEmbeddings::index_of(const std::string& word) const {
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i] == word) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
}

namespace {

double sigmoid(double x) {
    if (x > 30.0) return 1.0;
    if (x < -30.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

WordEmbeddings train_embeddings(const TextDataset& dataset, const model::Tokenizer& tokenizer,
                                const EmbeddingOptions& options) {
    using model::Tokenizer;
    if (tokenizer.size() < Tokenizer::kNumSpecial + 2) {
        throw InvalidInput("train_embeddings needs a vocabulary of at least 2 words");
    }
    if (options.dim == 0 || options.window == 0) {
        throw InvalidInput("embedding dim and window must be positive");
    }
    const std::size_t n_words = tokenizer.size() - Tokenizer::kNumSpecial;
    const std::size_t dim = options.dim;

    // Sentences as word indices (special and unknown tokens dropped).
    std::vector<std::vector<std::size_t>> sentences;
    std::vector<double> counts(n_words, 0.0);
    for (const auto& text : dataset.texts(Split::train)) {
        std::vector<std::size_t> s;
        for (const auto& w : Tokenizer::split(text)) {
            const auto id = tokenizer.id(w);
            if (Tokenizer::is_special(id)) continue;
            s.push_back(id - Tokenizer::kNumSpecial);
            counts[s.back()] += 1.0;
        }
        if (s.size() > 1) sentences.push_back(std::move(s));
    }

    // Unigram^0.75 noise distribution as a cumulative table.
    std::vector<double> cdf(n_words);
    double total = 0.0;
    for (std::size_t i = 0; i < n_words; ++i) {
        total += std::pow(counts[i], 0.75);
        cdf[i] = total;
    }

    Rng rng = make_rng(options.seed, "embeddings");
    auto sample_noise = [&]() -> std::size_t {
        if (total <= 0.0) return uniform_index(rng, n_words);
        const double u = uniform01(rng) * total;
        return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) %
               n_words;
    };

    std::vector<double> in(n_words * dim);
    std::vector<double> out(n_words * dim, 0.0);
    for (auto& v : in) v = (uniform01(rng) - 0.5) / static_cast<double>(dim);

    std::size_t total_tokens = 0;
    for (const auto& s : sentences) total_tokens += s.size();
    const double planned = static_cast<double>(total_tokens * options.epochs);
    double processed = 0.0;

    std::vector<double> grad_in(dim);
    std::vector<std::size_t> order(sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto update = [&](std::size_t center, std::size_t target, double label, double lr) {
        double* u = &in[center * dim];
        double* v = &out[target * dim];
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += u[d] * v[d];
        const double g = lr * (label - sigmoid(dot));
        for (std::size_t d = 0; d < dim; ++d) {
            grad_in[d] += g * v[d];
            v[d] += g * u[d];
        }
    };

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        shuffle(order.begin(), order.end(), rng);
        for (std::size_t si : order) {
            const auto& s = sentences[si];
            for (std::size_t pos = 0; pos < s.size(); ++pos) {
                const double lr =
                    options.learning_rate * std::max(1e-4, 1.0 - processed / std::max(planned, 1.0));
                processed += 1.0;
                const std::size_t lo = pos >= options.window ? pos - options.window : 0;
                const std::size_t hi = std::min(s.size() - 1, pos + options.window);
                for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
                    if (ctx == pos) continue;
                    std::fill(grad_in.begin(), grad_in.end(), 0.0);
                    update(s[pos], s[ctx], 1.0, lr);
                    for (std::size_t k = 0; k < options.negatives; ++k) {
                        const std::size_t neg = sample_noise();
                        if (neg == s[ctx]) continue;
                        update(s[pos], neg, 0.0, lr);
                    }
                    double* u = &in[s[pos] * dim];
                    for (std::size_t d = 0; d < dim; ++d) u[d] += grad_in[d];
                }
            }
        }
    }

    WordEmbeddings emb;
    emb.vectors = nn::Tensor::matrix(n_words, dim);
    for (std::size_t i = 0; i < n_words; ++i) {
        emb.words.push_back(tokenizer.word(i + Tokenizer::kNumSpecial));
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) norm += in[i * dim + d] * in[i * dim + d];
        norm = std::sqrt(norm);
        for (std::size_t d = 0; d < dim; ++d) {
            emb.vectors(i, d) = norm > 0.0 ? in[i * dim + d] / norm : (d == 0 ? 1.0 : 0.0);
        }
    }
    return emb;
}

}  // namespace loyalty::data
