#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vse {

// Every error carries a short category tag; the CLI prints it as "[category] message".
class Error : public std::runtime_error {
   public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

   private:
    std::string category_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

struct DegenerateVectorError : Error {
    explicit DegenerateVectorError(const std::string& what) : Error("degenerate", what) {}
};

struct ContractError : Error {
    explicit ContractError(const std::string& what) : Error("contract", what) {}
};

struct VocabularyError : Error {
    VocabularyError(std::size_t index, std::size_t position, std::size_t vocab_size)
        : Error("vocabulary", "token index " + std::to_string(index) + " at position " +
                                  std::to_string(position) + " is outside vocabulary of size " +
                                  std::to_string(vocab_size)),
          index(index),
          position(position) {}
    std::size_t index;
    std::size_t position;
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io", what) {}
};

// Malformed binary tensor data. `offset` is the byte position where parsing failed.
struct FormatError : Error {
    FormatError(const std::string& detail, std::size_t offset)
        : Error("format", detail + " (at byte offset " + std::to_string(offset) + ")"),
          detail(detail),
          offset(offset) {}
    std::string detail;
    std::size_t offset;
};

// Malformed manifest or config line.
struct ParseError : Error {
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error("parse", source + ":" + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

}  // namespace vse
