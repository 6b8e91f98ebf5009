#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oba {

enum class ErrorCode {
    UnsupportedFormat,
    CorruptFile,
    WorldFileMalformed,
    ParseError,
    InvalidGeometry,
    SingularTransform,
    WindowOutOfBounds,
    EmptyMask,
    PoolEmpty,
    NoCleanWindow,
    SizeMismatch,
    EmptyBank,
    NoOriginals,
    IoError,
    EpochNotReported,
    TrainerCrash,
    StoreCorrupt,
    MissingPair,
    NonBinaryMask,
    InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::WorldFileMalformed: return "WorldFileMalformed";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::InvalidGeometry: return "InvalidGeometry";
        case ErrorCode::SingularTransform: return "SingularTransform";
        case ErrorCode::WindowOutOfBounds: return "WindowOutOfBounds";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::PoolEmpty: return "PoolEmpty";
        case ErrorCode::NoCleanWindow: return "NoCleanWindow";
        case ErrorCode::SizeMismatch: return "SizeMismatch";
        case ErrorCode::EmptyBank: return "EmptyBank";
        case ErrorCode::NoOriginals: return "NoOriginals";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::EpochNotReported: return "EpochNotReported";
        case ErrorCode::TrainerCrash: return "TrainerCrash";
        case ErrorCode::StoreCorrupt: return "StoreCorrupt";
        case ErrorCode::MissingPair: return "MissingPair";
        case ErrorCode::NonBinaryMask: return "NonBinaryMask";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

/// Library-wide exception. `code()` is stable and machine-checkable;
/// `what()` carries the human-readable context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace oba
