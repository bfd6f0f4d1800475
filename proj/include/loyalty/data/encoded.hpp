#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "loyalty/data/dataset.hpp"
#include "loyalty/model/tokenizer.hpp"

namespace loyalty::data {

/// An example turned into token ids ([cls] first).
struct EncodedExample {
    std::string id;
    std::vector<model::TokenId> ids;
    std::size_t label = 0;
};

std::vector<EncodedExample> encode(const TextDataset& dataset, Split split,
                                   const model::Tokenizer& tokenizer);

}  // namespace loyalty::data
