#include "ntl/error.hpp"

namespace ntl {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingParent: return "DanglingParent";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::HighOrderBranch: return "HighOrderBranch";
    case ErrorCode::PathTooShort: return "PathTooShort";
    case ErrorCode::NotAdjacent: return "NotAdjacent";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::GraphNotBuilt: return "GraphNotBuilt";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::TooFewGeometries: return "TooFewGeometries";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::SlotMismatch: return "SlotMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

int error_exit_code(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError:
        return 2;
    case ErrorCode::IoError:
        return 3;
    case ErrorCode::MalformedLine:
    case ErrorCode::DuplicateId:
    case ErrorCode::DanglingParent:
    case ErrorCode::MultipleRoots:
    case ErrorCode::NoRoot:
    case ErrorCode::CycleDetected:
    case ErrorCode::NonPositiveRadius:
    case ErrorCode::DegenerateSegment:
        return 4;
    case ErrorCode::HighOrderBranch:
    case ErrorCode::PathTooShort:
    case ErrorCode::NotAdjacent:
        return 5;
    case ErrorCode::NonFiniteState:
    case ErrorCode::NegativeInput:
    case ErrorCode::NotConverged:
        return 6;
    case ErrorCode::CorruptCheckpoint:
    case ErrorCode::ArchitectureMismatch:
    case ErrorCode::HashMismatch:
        return 7;
    default:
        return 1;
    }
}

} // namespace ntl
