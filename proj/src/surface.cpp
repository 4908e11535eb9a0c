#include "leamatch/surface.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "leamatch/numeric/correlation.hpp"
#include "leamatch/numeric/lowess.hpp"

namespace leamatch {

namespace {

/// Column means of rows [row, row+band) over unmasked cells.
std::pair<VectorXd, MaskVector> band_mean(const SurfaceScan& scan, Eigen::Index row, int band) {
    const Eigen::Index cols = scan.cols();
    VectorXd values = VectorXd::Zero(cols);
    MaskVector mask(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        double sum = 0.0;
        int n = 0;
        for (Eigen::Index r = row; r < row + band; ++r) {
            if (scan.mask(r, c)) continue;
            sum += scan.heights(r, c);
            ++n;
        }
        mask(c) = n == 0;
        values(c) = n > 0 ? sum / n : 0.0;
    }
    return {std::move(values), std::move(mask)};
}

}  // namespace

CrosscutSelection select_crosscut(const SurfaceScan& scan, const CrosscutConfig& cfg) {
    if (cfg.band < 1 || cfg.delta < 1 || cfg.min_row_offset < 0)
        throw Error(ErrorCode::BadConfig, "crosscut band/delta must be positive");

    CrosscutSelection sel;
    sel.band = cfg.band;
    const Eigen::Index last = scan.rows() - cfg.delta - cfg.band;
    const double band_cells = static_cast<double>(cfg.band) * static_cast<double>(scan.cols());
    for (Eigen::Index r = cfg.min_row_offset; r <= last; ++r) {
        const auto masked = scan.mask.middleRows(r, cfg.band).count();
        if (static_cast<double>(masked) / band_cells >= cfg.max_band_masked) {
            sel.search_trace.push_back({r, std::nullopt});
            continue;
        }
        const auto [lower, lower_mask] = band_mean(scan, r, cfg.band);
        const auto [upper, upper_mask] = band_mean(scan, r + cfg.delta, cfg.band);
        double stability = pearson_masked(lower, lower_mask, upper, upper_mask);
        if (std::isnan(stability)) stability = -1.0;
        sel.search_trace.push_back({r, stability});
        if (stability >= cfg.stability_threshold) {
            sel.row_index = r;
            sel.stability = stability;
            return sel;
        }
    }
    throw Error(ErrorCode::NoStableRegion, scan.bullet_id + "/" + scan.land_id + ": no row band qualifies");
}

Profile extract_profile(const SurfaceScan& scan, const CrosscutSelection& selection) {
    if (selection.row_index < 0 || selection.band < 1 || selection.row_index + selection.band > scan.rows())
        throw Error(ErrorCode::BadConfig, "crosscut band outside the scan");
    auto [values, mask] = band_mean(scan, selection.row_index, selection.band);
    Profile p;
    p.values = std::move(values);
    p.mask = std::move(mask);
    p.x_res_um = scan.x_res_um;
    p.row_index = selection.row_index;
    p.band = selection.band;
    return p;
}

GrooveBounds detect_grooves(const Profile& profile, const GrooveConfig& cfg) {
    const Eigen::Index n = profile.size();
    if (n < cfg.min_profile_length)
        throw Error(ErrorCode::TooFewSamples, "profile shorter than " + std::to_string(cfg.min_profile_length));

    const auto c_lo = static_cast<Eigen::Index>(std::floor(cfg.shoulder_fraction * static_cast<double>(n)));
    const auto c_hi = static_cast<Eigen::Index>(std::ceil((1.0 - cfg.shoulder_fraction) * static_cast<double>(n)));

    std::vector<double> xs, ys;
    for (Eigen::Index i = c_lo; i < c_hi; ++i) {
        if (profile.mask(i)) continue;
        xs.push_back(static_cast<double>(i));
        ys.push_back(profile.values(i));
    }
    if (xs.size() < 8) throw Error(ErrorCode::TooFewSamples, "central span has too few unmasked samples");
    const auto fit = robust_polyfit(Eigen::Map<const VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                                    Eigen::Map<const VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())),
                                    2, cfg.irls_iterations, cfg.biweight_tuning);

    auto raised = [&](Eigen::Index i) {
        return !profile.mask(i) && profile.values(i) - fit(static_cast<double>(i)) > cfg.rise_threshold_um;
    };

    GrooveBounds b;
    b.left_index = 0;
    b.right_index = n - 1;
    for (Eigen::Index i = c_lo - 1; i - (cfg.persistence - 1) >= 0; --i) {
        bool run = true;
        for (int k = 0; k < cfg.persistence && run; ++k) run = raised(i - k);
        if (run) {
            b.left_index = i + 1;
            b.left_found = true;
            break;
        }
    }
    for (Eigen::Index i = c_hi; i + (cfg.persistence - 1) < n; ++i) {
        bool run = true;
        for (int k = 0; k < cfg.persistence && run; ++k) run = raised(i + k);
        if (run) {
            b.right_index = i - 1;
            b.right_found = true;
            break;
        }
    }
    if (b.width() < cfg.min_interior)
        throw Error(ErrorCode::InteriorTooNarrow, "interior of " + std::to_string(b.width()) + " samples");
    return b;
}

Signature make_signature(VectorXd values, double x_res_um) {
    Signature s;
    s.mask = no_mask(values.size());
    s.residuals = std::move(values);
    s.x_res_um = x_res_um;
    return s;
}

Eigen::Index longest_masked_run(const MaskVector& mask) {
    Eigen::Index best = 0, run = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        run = mask(i) ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

Signature extract_signature(const Profile& profile, const GrooveBounds& grooves, const SignatureConfig& cfg,
                            const std::string& bullet_id, const std::string& land_id) {
    if (grooves.left_index < 0 || grooves.right_index >= profile.size() || grooves.width() < 1)
        throw Error(ErrorCode::InteriorTooNarrow, "groove bounds outside the profile");
    const Eigen::Index width = grooves.width();
    const VectorXd interior = profile.values.segment(grooves.left_index, width);
    const MaskVector mask = profile.mask.segment(grooves.left_index, width);

    const Eigen::Index gap = longest_masked_run(mask);
    if (static_cast<double>(gap) > cfg.max_gap_fraction * static_cast<double>(width))
        throw Error(ErrorCode::GapTooLong, "masked run of " + std::to_string(gap) + " samples");

    const VectorXd fitted = lowess(interior, mask, cfg.lowess.span, cfg.lowess.degree);

    Signature s;
    s.residuals = interior - fitted;
    s.mask = mask;
    s.trend = fitted;
    double sum = 0.0;
    Eigen::Index valid = 0;
    for (Eigen::Index i = 0; i < width; ++i) {
        if (mask(i)) continue;
        sum += s.residuals(i);
        ++valid;
    }
    const double mean = valid > 0 ? sum / static_cast<double>(valid) : 0.0;
    for (Eigen::Index i = 0; i < width; ++i) s.residuals(i) = mask(i) ? 0.0 : s.residuals(i) - mean;

    s.x_res_um = profile.x_res_um;
    s.provenance = {bullet_id, land_id, profile.row_index, grooves, cfg.lowess.span};
    return s;
}

LandArtifacts process_land_at(const SurfaceScan& scan, const CrosscutSelection& crosscut, const SurfaceConfig& cfg) {
    LandArtifacts a;
    a.crosscut = crosscut;
    a.profile = extract_profile(scan, crosscut);
    a.grooves = detect_grooves(a.profile, cfg.grooves);
    a.signature = extract_signature(a.profile, a.grooves, cfg.signature, scan.bullet_id, scan.land_id);
    return a;
}

LandArtifacts process_land(const SurfaceScan& scan, const SurfaceConfig& cfg) {
    return process_land_at(scan, select_crosscut(scan, cfg.crosscut), cfg);
}

void write_series_csv(std::ostream& out, const VectorXd& values, const MaskVector& mask, double x_res_um) {
    out << "index,x_um,value_um,masked\n";
    char buf[64];
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        out << i << ',';
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(i) * x_res_um);
        out << buf << ',';
        if (!mask(i)) {
            std::snprintf(buf, sizeof buf, "%.17g", values(i));
            out << buf;
        }
        out << ',' << (mask(i) ? 1 : 0) << '\n';
    }
}

}  // namespace leamatch
