#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leamatch/numeric/types.hpp"
#include "leamatch/scan.hpp"

namespace leamatch {

// ---------------------------------------------------------------------------
// Crosscut selection
// ---------------------------------------------------------------------------

struct CrosscutConfig {
    int min_row_offset = 10;
    int band = 5;
    int delta = 25;
    double stability_threshold = 0.9;
    /// Candidate bands at or above this masked fraction are skipped.
    double max_band_masked = 0.05;
};

struct CrosscutCandidate {
    Eigen::Index row = 0;
    /// Empty when the band failed the mask check before correlation.
    std::optional<double> stability;

    bool operator==(const CrosscutCandidate&) const = default;
};

struct CrosscutSelection {
    Eigen::Index row_index = 0;
    int band = 1;
    double stability = 0.0;
    std::vector<CrosscutCandidate> search_trace;

    bool operator==(const CrosscutSelection&) const = default;
};

/// Lowest row r >= min_row_offset whose band [r, r+band) is less than
/// max_band_masked masked and whose band mean correlates (lag 0, Pearson
/// over columns valid in both) with the band mean `delta` rows above at
/// least stability_threshold. Throws Error(NoStableRegion).
CrosscutSelection select_crosscut(const SurfaceScan& scan, const CrosscutConfig& cfg);

/// Mean of the band rows in a single column over unmasked cells.
struct Profile {
    VectorXd values;
    MaskVector mask;
    double x_res_um = 1.0;
    Eigen::Index row_index = 0;
    int band = 1;

    Eigen::Index size() const { return values.size(); }
};

/// values[j] = mean of unmasked heights of column j over the selection
/// band; masked iff every band cell in that column is masked.
Profile extract_profile(const SurfaceScan& scan, const CrosscutSelection& selection);

// ---------------------------------------------------------------------------
// Grooves
// ---------------------------------------------------------------------------

struct GrooveConfig {
    double shoulder_fraction = 0.25;
    double rise_threshold_um = 4.0;
    int persistence = 5;
    int irls_iterations = 3;
    double biweight_tuning = 4.685;
    int min_interior = 64;
    int min_profile_length = 128;
};

/// Inclusive interior [left_index, right_index] between the groove
/// shoulders. A bound that was not found sits at the profile end.
struct GrooveBounds {
    Eigen::Index left_index = 0;
    Eigen::Index right_index = 0;
    bool left_found = false;
    bool right_found = false;

    Eigen::Index width() const { return right_index - left_index + 1; }
    bool operator==(const GrooveBounds&) const = default;
};

/// Robust quadratic over the central span, then an outward walk on each
/// side for the first sample whose residual stays above rise_threshold_um
/// for `persistence` consecutive samples. Throws Error(InteriorTooNarrow)
/// or Error(TooFewSamples) for profiles shorter than min_profile_length.
GrooveBounds detect_grooves(const Profile& profile, const GrooveConfig& cfg);

// ---------------------------------------------------------------------------
// Signature
// ---------------------------------------------------------------------------

struct LowessConfig {
    double span = 0.30;
    int degree = 2;
};

struct SignatureConfig {
    LowessConfig lowess;
    /// Longest masked run allowed, as a fraction of the interior.
    double max_gap_fraction = 0.10;
};

struct SignatureProvenance {
    std::string bullet_id;
    std::string land_id;
    Eigen::Index row_index = 0;
    GrooveBounds grooves;
    double lowess_span = 0.0;
};

/// LOWESS residuals over the groove-trimmed interior, mean-centred over
/// unmasked samples. Masked samples hold 0 and are flagged in `mask`.
struct Signature {
    VectorXd residuals;
    MaskVector mask;
    /// LOWESS fit of the interior the residuals were taken from.
    VectorXd trend;
    double x_res_um = 1.0;
    SignatureProvenance provenance;

    Eigen::Index size() const { return residuals.size(); }
};

/// Convenience for tests and tools: an unmasked signature over `values`.
Signature make_signature(VectorXd values, double x_res_um = 1.0);

/// Longest run of consecutive true entries.
Eigen::Index longest_masked_run(const MaskVector& mask);

Signature extract_signature(const Profile& profile, const GrooveBounds& grooves, const SignatureConfig& cfg,
                            const std::string& bullet_id = {}, const std::string& land_id = {});

// ---------------------------------------------------------------------------
// Whole land
// ---------------------------------------------------------------------------

struct SurfaceConfig {
    CrosscutConfig crosscut;
    GrooveConfig grooves;
    SignatureConfig signature;
};

struct LandArtifacts {
    CrosscutSelection crosscut;
    Profile profile;
    GrooveBounds grooves;
    Signature signature;
};

/// scan -> crosscut -> profile -> grooves -> signature. Throws the first
/// pipeline Error encountered.
LandArtifacts process_land(const SurfaceScan& scan, const SurfaceConfig& cfg);

/// Same as process_land but starting from a given crosscut.
LandArtifacts process_land_at(const SurfaceScan& scan, const CrosscutSelection& crosscut, const SurfaceConfig& cfg);

/// CSV with header `index,x_um,value_um,masked`; masked values are empty.
void write_series_csv(std::ostream& out, const VectorXd& values, const MaskVector& mask, double x_res_um);

}  // namespace leamatch
