#include "iotid/error.hpp"
#include "iotid/random.hpp"

#include <cmath>
#include <numbers>

namespace iotid {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MalformedCapture: return "MalformedCapture";
    case ErrorCode::UnsupportedLinkType: return "UnsupportedLinkType";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::NonPositiveWindow: return "NonPositiveWindow";
    case ErrorCode::EmptyFlow: return "EmptyFlow";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::SumMismatch: return "SumMismatch";
    case ErrorCode::AllRowsDropped: return "AllRowsDropped";
    case ErrorCode::InsufficientSessions: return "InsufficientSessions";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptySpace: return "EmptySpace";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::LeakageDetected: return "LeakageDetected";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::DuplicateConflict: return "DuplicateConflict";
    case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

double Rng::normal(double mean, double sd) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + sd * z;
}

}  // namespace iotid
