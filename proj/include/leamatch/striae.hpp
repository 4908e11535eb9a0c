#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "leamatch/surface.hpp"

namespace leamatch {

struct StriaeConfig {
    double min_overlap_frac = 0.5;
    int smooth_window = 11;
    double min_prominence_um = 0.3;
    int match_tolerance = 8;
};

/// Lag convention: sample a[i] is paired with b[i - lag], i.e. b is moved
/// `lag` samples to the right. A b-index j sits at j + lag in a's frame.
struct Alignment {
    int lag = 0;
    double ccf = 0.0;
    Eigen::Index overlap_len = 0;
};

/// Overlap floor used by align: max(16, ceil(min_overlap_frac * min(len))).
Eigen::Index min_overlap(Eigen::Index len_a, Eigen::Index len_b, double min_overlap_frac);

/// Pearson correlation at one lag over pairs unmasked on both sides. NaN
/// if undefined.
double ccf_at_lag(const Signature& a, const Signature& b, int lag);

/// Lag maximising ccf_at_lag over every lag whose index overlap reaches
/// min_overlap. Ties go to smaller |lag|, then to the negative lag. Throws
/// Error(NoAdmissibleLag).
Alignment align(const Signature& a, const Signature& b, const StriaeConfig& cfg);

enum class ExtremumKind { Peak, Valley };

struct Extremum {
    ExtremumKind kind = ExtremumKind::Peak;
    Eigen::Index index = 0;
    double height = 0.0;
    /// Distance between the flanking zero crossings, in samples.
    double width = 1.0;

    bool operator==(const Extremum&) const = default;
};

/// Sign changes in the first difference of the moving-average-smoothed
/// signature (plateaus resolve to their midpoint), keeping only those with
/// |height| >= min_prominence_um and the sign matching their kind.
std::vector<Extremum> find_extrema(const Signature& sig, const StriaeConfig& cfg);

struct ExtremaMatch {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<bool> a_matched;
    std::vector<bool> b_matched;
};

/// Greedy left-to-right over `ea`: each a-extremum takes the unmatched
/// b-extremum of the same kind nearest to it in a's frame within `tol`,
/// ties to the earlier b.
ExtremaMatch match_extrema(const std::vector<Extremum>& ea, const std::vector<Extremum>& eb, int lag, int tol);

struct RunLengths {
    std::size_t cms = 0;
    std::size_t non_cms = 0;

    bool operator==(const RunLengths&) const = default;
};

RunLengths cms(const std::vector<bool>& match_flags);

/// a-extrema in index order with their matched flag, with unmatched
/// b-extrema interleaved by their position in a's frame (a first on ties).
std::vector<bool> merged_match_sequence(const std::vector<Extremum>& ea, const std::vector<Extremum>& eb,
                                        const ExtremaMatch& match, int lag);

struct FeatureVector {
    double ccf = 0.0;
    double lag_um = 0.0;
    double D = 0.0;
    int n_matches = 0;
    int n_mismatches = 0;
    int cms = 0;
    int non_cms = 0;
    double sum_peaks = 0.0;
    double overlap_frac = 0.0;

    bool operator==(const FeatureVector&) const = default;
};

inline constexpr std::size_t kFeatureCount = 9;
extern const std::array<const char*, kFeatureCount> kFeatureNames;

/// Forest inputs in kFeatureNames order; the lag enters as |lag_um| so
/// scores do not depend on argument order.
std::array<double, kFeatureCount> forest_inputs(const FeatureVector& fv);

struct PairComparison {
    Alignment alignment;
    FeatureVector features;
};

/// Full land-pair comparison. The pair is evaluated in a canonical order
/// so compare(a,b) and compare(b,a) agree exactly up to the lag sign.
/// Throws Error(FeatureUnavailable) when no lag is admissible.
PairComparison compare(const Signature& a, const Signature& b, const StriaeConfig& cfg);

inline FeatureVector features(const Signature& a, const Signature& b, const StriaeConfig& cfg) {
    return compare(a, b, cfg).features;
}

struct FeatureRow {
    std::string bullet_a, land_a, bullet_b, land_b;
    FeatureVector features;
};

void write_feature_csv(std::ostream& out, const std::vector<FeatureRow>& rows);

}  // namespace leamatch
