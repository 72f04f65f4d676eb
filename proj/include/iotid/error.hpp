#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iotid {

enum class ErrorCode {
    MalformedCapture,
    UnsupportedLinkType,
    MalformedManifest,
    NonPositiveWindow,
    EmptyFlow,
    EmptyInput,
    PreconditionFailed,
    SumMismatch,
    AllRowsDropped,
    InsufficientSessions,
    NotFitted,
    EmptyClass,
    EmptyData,
    SchemaMismatch,
    SingleClass,
    EmptySpace,
    InvalidParams,
    LeakageDetected,
    SchemaVersionMismatch,
    IoFailure,
    CorruptFile,
    DuplicateConflict,
    BadConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every data-level failure in the library is reported through this type.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace iotid
