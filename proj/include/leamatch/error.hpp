#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace leamatch {

enum class ErrorCode {
    // scan-core
    BadMagic,
    CorruptHeader,
    DimensionMismatch,
    TooSparse,
    NonFiniteUnmasked,
    TooSmall,
    BadResolution,
    StoreCorrupt,
    UnknownId,
    InvalidBullet,
    Io,
    // surface-pipeline
    NoStableRegion,
    InteriorTooNarrow,
    TooFewSamples,
    GapTooLong,
    // striae-compare
    NoAdmissibleLag,
    FeatureUnavailable,
    // scoring
    ClassImbalance,
    DegenerateFeatures,
    BadForest,
    AllMasked,
    // examiner-service
    UnknownCase,
    UnknownSession,
    ScoresNotComputed,
    OutOfOrder,
    MissingSelection,
    AlreadyActive,
    LevelNotActive,
    BadPhase,
    BadLevel,
    BadRequest,
    PrematureConclusion,
    AlreadyConcluded,
    BadConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is reported as an Error
/// carrying a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace leamatch
