#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace loyalty::model {

using TokenId = std::size_t;

/// Whitespace + lowercasing tokenizer over a frequency-built vocabulary.
/// Encoded sequences start with [cls]; the literal word "[sep]" maps to the
/// separator id; unknown words map to [unk].
class Tokenizer {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kCls = 2;
    static constexpr TokenId kSep = 3;
    static constexpr std::size_t kNumSpecial = 4;

    Tokenizer() = default;
    Tokenizer(std::vector<std::string> vocab, std::size_t max_length);

    /// Keeps the `max_vocab - 4` most frequent words of `texts`; frequency ties
    /// are broken lexicographically so the result ignores corpus order.
    static Tokenizer build(std::span<const std::string> texts, std::size_t max_vocab,
                           std::size_t max_length);

    /// Lowercased whitespace split.
    static std::vector<std::string> split(std::string_view text);
    static std::string join(std::span<const std::string> words);

    std::vector<TokenId> encode(std::string_view text) const;
    /// [cls] followed by the ids of `words`, truncated to max_length.
    std::vector<TokenId> encode_words(std::span<const std::string> words) const;

    TokenId id(std::string_view word) const;
    bool contains(std::string_view word) const;
    const std::string& word(TokenId id) const { return vocab_.at(id); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    std::size_t size() const { return vocab_.size(); }
    std::size_t max_length() const { return max_length_; }
    static bool is_special(TokenId id) { return id < kNumSpecial; }

    nlohmann::json to_json() const;
    static Tokenizer from_json(const nlohmann::json& j);

    friend bool operator==(const Tokenizer& a, const Tokenizer& b) {
        return a.vocab_ == b.vocab_ && a.max_length_ == b.max_length_;
    }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> index_;
    std::size_t max_length_ = 64;
};

}  // namespace loyalty::model
