#include "loyalty/data/encoded.hpp"

namespace loyalty::data {

std::vector<EncodedExample> encode(const TextDataset& dataset, Split split,
                                   const model::Tokenizer& tokenizer) {
    std::vector<EncodedExample> out;
    for (const auto& e : dataset.examples) {
        if (e.split != split) continue;
        out.push_back(EncodedExample{e.id, tokenizer.encode(e.text), e.label});
    }
    return out;
}

}  // namespace loyalty::data
