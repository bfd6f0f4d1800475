#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "loyalty/data/dataset.hpp"
#include "loyalty/model/tokenizer.hpp"
#include "loyalty/nn/tensor.hpp"

namespace loyalty::data {

/// One unit-length vector per vocabulary word (special tokens excluded).
struct WordEmbeddings {
    std::vector<std::string> words;
    nn::Tensor vectors;  // [words x dim]

    std::size_t dim() const { return vectors.cols(); }
    /// Cosine of two rows (rows are unit length, so this is a dot product).
    double cosine(std::size_t a, std::size_t b) const;
    std::ptrdiff_t index_of(const std::string& word) const;
};

struct EmbeddingOptions {
    std::size_t dim = 32;
    std::size_t epochs = 5;
    std::size_t window = 3;
    std::size_t negatives = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 0;
};

/// Skip-gram with negative sampling over the training split. Deterministic for
/// a fixed seed. Throws InvalidInput when fewer than 2 non-special words exist.
WordEmbeddings train_embeddings(const TextDataset& dataset, const model::Tokenizer& tokenizer,
                                const EmbeddingOptions& options);

}  // namespace loyalty::data
