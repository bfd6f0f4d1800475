#include "loyalty/model/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "loyalty/errors.hpp"

namespace loyalty::model {

namespace {

const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> kSpecials{"[pad]", "[unk]", "[cls]", "[sep]"};
    return kSpecials;
}

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> vocab, std::size_t max_length)
    : vocab_(std::move(vocab)), max_length_(max_length) {
    if (vocab_.size() < kNumSpecial ||
        !std::equal(special_tokens().begin(), special_tokens().end(), vocab_.begin())) {
        throw InvalidInput("vocabulary must start with the four special tokens");
    }
    if (max_length_ < 2) throw InvalidInput("max_length must be at least 2");
    for (TokenId i = 0; i < vocab_.size(); ++i) {
        if (!index_.emplace(vocab_[i], i).second) {
            throw InvalidInput("duplicate vocabulary entry '" + vocab_[i] + "'");
        }
    }
}

Tokenizer Tokenizer::build(std::span<const std::string> texts, std::size_t max_vocab,
                           std::size_t max_length) {
    if (max_vocab <= kNumSpecial) throw InvalidInput("max_vocab must exceed the special tokens");
    std::map<std::string, std::size_t> counts;
    for (const auto& text : texts) {
        for (auto& w : split(text)) {
            if (std::find(special_tokens().begin(), special_tokens().end(), w) ==
                special_tokens().end()) {
                ++counts[w];
            }
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> vocab = special_tokens();
    for (const auto& [w, _] : ranked) {
        if (vocab.size() >= max_vocab) break;
        vocab.push_back(w);
    }
    return Tokenizer(std::move(vocab), max_length);
}

std::vector<std::string> Tokenizer::split(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string Tokenizer::join(std::span<const std::string> words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
    const auto words = split(text);
    return encode_words(words);
}

std::vector<TokenId> Tokenizer::encode_words(std::span<const std::string> words) const {
    std::vector<TokenId> ids;
    ids.reserve(std::min(words.size() + 1, max_length_));
    ids.push_back(kCls);
    for (const auto& w : words) {
        if (ids.size() >= max_length_) break;
        ids.push_back(id(w));
    }
    return ids;
}

TokenId Tokenizer::id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? kUnk : it->second;
}

bool Tokenizer::contains(std::string_view word) const {
    return index_.contains(std::string(word));
}

nlohmann::json Tokenizer::to_json() const {
    return {{"max_length", max_length_}, {"vocab", vocab_}};
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
    return Tokenizer(j.at("vocab").get<std::vector<std::string>>(),
                     j.at("max_length").get<std::size_t>());
}

}  // namespace loyalty::model
