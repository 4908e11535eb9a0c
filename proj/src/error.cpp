#include "leamatch/error.hpp"

namespace leamatch {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::CorruptHeader: return "CorruptHeader";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::TooSparse: return "TooSparse";
        case ErrorCode::NonFiniteUnmasked: return "NonFiniteUnmasked";
        case ErrorCode::TooSmall: return "TooSmall";
        case ErrorCode::BadResolution: return "BadResolution";
        case ErrorCode::StoreCorrupt: return "StoreCorrupt";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::InvalidBullet: return "InvalidBullet";
        case ErrorCode::Io: return "Io";
        case ErrorCode::NoStableRegion: return "NoStableRegion";
        case ErrorCode::InteriorTooNarrow: return "InteriorTooNarrow";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::GapTooLong: return "GapTooLong";
        case ErrorCode::NoAdmissibleLag: return "NoAdmissibleLag";
        case ErrorCode::FeatureUnavailable: return "FeatureUnavailable";
        case ErrorCode::ClassImbalance: return "ClassImbalance";
        case ErrorCode::DegenerateFeatures: return "DegenerateFeatures";
        case ErrorCode::BadForest: return "BadForest";
        case ErrorCode::AllMasked: return "AllMasked";
        case ErrorCode::UnknownCase: return "UnknownCase";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::ScoresNotComputed: return "ScoresNotComputed";
        case ErrorCode::OutOfOrder: return "OutOfOrder";
        case ErrorCode::MissingSelection: return "MissingSelection";
        case ErrorCode::AlreadyActive: return "AlreadyActive";
        case ErrorCode::LevelNotActive: return "LevelNotActive";
        case ErrorCode::BadPhase: return "BadPhase";
        case ErrorCode::BadLevel: return "BadLevel";
        case ErrorCode::BadRequest: return "BadRequest";
        case ErrorCode::PrematureConclusion: return "PrematureConclusion";
        case ErrorCode::AlreadyConcluded: return "AlreadyConcluded";
        case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

}  // namespace leamatch
