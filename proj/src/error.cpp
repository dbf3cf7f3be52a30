#include "dialsum/error.hpp"

namespace dialsum {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyDialogue: return "EmptyDialogue";
    case ErrorCode::MissingSpeaker: return "MissingSpeaker";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MalformedVocab: return "MalformedVocab";
    case ErrorCode::TooManySpeakers: return "TooManySpeakers";
    case ErrorCode::SingleSpeaker: return "SingleSpeaker";
    case ErrorCode::NoDonors: return "NoDonors";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::NoSummary: return "NoSummary";
    case ErrorCode::SequenceEmpty: return "SequenceEmpty";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyPairs: return "EmptyPairs";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::PositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::NoLabels: return "NoLabels";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    }
    return "Unknown";
}

} // namespace dialsum
