#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dialsum {

enum class ErrorCode {
    EmptyDialogue,
    MissingSpeaker,
    IoError,
    MalformedRecord,
    MalformedVocab,
    TooManySpeakers,
    SingleSpeaker,
    NoDonors,
    KTooLarge,
    NoSummary,
    SequenceEmpty,
    InvalidConfig,
    EmptyPairs,
    MissingId,
    DimensionMismatch,
    SequenceTooLong,
    PositionOutOfRange,
    NoLabels,
    ShapeMismatch,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised by the corpus/example readers; `line` is 1-based.
class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line, const std::string &detail)
        : Error(ErrorCode::MalformedRecord,
                "malformed record at line " + std::to_string(line) + ": " + detail),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace dialsum
