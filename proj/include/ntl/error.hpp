#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ntl {

// Every failure surfaced by the library carries one of these codes. The CLI
// prints the code name verbatim, so the names are part of the external
// interface and must stay stable.
enum class ErrorCode {
    MalformedLine,
    DuplicateId,
    DanglingParent,
    MultipleRoots,
    NoRoot,
    CycleDetected,
    NonPositiveRadius,
    DegenerateSegment,
    InvalidArgument,
    HighOrderBranch,
    PathTooShort,
    NotAdjacent,
    DimensionMismatch,
    NonFiniteState,
    NegativeInput,
    NotConverged,
    GraphNotBuilt,
    ShapeMismatch,
    CorruptCheckpoint,
    ArchitectureMismatch,
    KindMismatch,
    EmptyDataset,
    UnknownKind,
    TooFewGeometries,
    MissingPrediction,
    SlotMismatch,
    EmptyInput,
    LengthMismatch,
    DegenerateRange,
    HashMismatch,
    IoError,
    ConfigError,
};

std::string_view error_code_name(ErrorCode code);

// Process exit code used by the CLI for a given error.
int error_exit_code(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) {
        throw Error(code, message);
    }
}

} // namespace ntl
