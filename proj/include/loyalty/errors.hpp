#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace loyalty {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller passed arguments that violate an operation's precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A configuration, recipe or stage combination that cannot be executed.
class InvalidConfig : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries the byte offset (binary formats) or the
/// 1-based line number (text formats) where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::optional<std::size_t> byte_offset,
                std::optional<std::size_t> line = std::nullopt)
        : Error(decorate(what, byte_offset, line)), byte_offset_(byte_offset), line_(line) {}

    std::optional<std::size_t> byte_offset() const { return byte_offset_; }
    std::optional<std::size_t> line() const { return line_; }

private:
    static std::string decorate(const std::string& what, std::optional<std::size_t> offset,
                                std::optional<std::size_t> line) {
        std::string out = what;
        if (offset) out += " (at byte offset " + std::to_string(*offset) + ")";
        if (line) out += " (at line " + std::to_string(*line) + ")";
        return out;
    }

    std::optional<std::size_t> byte_offset_;
    std::optional<std::size_t> line_;
};

}  // namespace loyalty
