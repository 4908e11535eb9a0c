#include "leamatch/striae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <ostream>
#include <tuple>

#include "leamatch/digest.hpp"
#include "leamatch/numeric/correlation.hpp"

namespace leamatch {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "ccf", "lag_um", "D", "n_matches", "n_mismatches", "cms", "non_cms", "sum_peaks", "overlap_frac"};

namespace {

struct OverlapRange {
    Eigen::Index begin = 0;  // in a's index
    Eigen::Index end = 0;
    Eigen::Index size() const { return std::max<Eigen::Index>(0, end - begin); }
};

OverlapRange overlap(Eigen::Index na, Eigen::Index nb, int lag) {
    return {std::max<Eigen::Index>(0, lag), std::min<Eigen::Index>(na, nb + lag)};
}

}  // namespace

Eigen::Index min_overlap(Eigen::Index len_a, Eigen::Index len_b, double min_overlap_frac) {
    const double shorter = static_cast<double>(std::min(len_a, len_b));
    const auto frac = static_cast<Eigen::Index>(std::ceil(min_overlap_frac * shorter - 1e-12));
    return std::max<Eigen::Index>(16, frac);
}

double ccf_at_lag(const Signature& a, const Signature& b, int lag) {
    const auto ov = overlap(a.size(), b.size(), lag);
    PearsonAccumulator<double> acc;
    for (Eigen::Index i = ov.begin; i < ov.end; ++i) {
        const Eigen::Index j = i - lag;
        if (a.mask(i) || b.mask(j)) continue;
        acc.add(a.residuals(i), b.residuals(j));
    }
    return acc.value();
}

Alignment align(const Signature& a, const Signature& b, const StriaeConfig& cfg) {
    const Eigen::Index na = a.size(), nb = b.size();
    if (na == 0 || nb == 0) throw Error(ErrorCode::NoAdmissibleLag, "empty signature");
    if (!(cfg.min_overlap_frac > 0.0 && cfg.min_overlap_frac <= 1.0))
        throw Error(ErrorCode::BadConfig, "min_overlap_frac must be in (0,1]");
    const Eigen::Index floor_len = min_overlap(na, nb, cfg.min_overlap_frac);

    Alignment best;
    bool found = false;
    const auto max_abs = static_cast<int>(std::max(na, nb));
    // Visit lags in tie-break order 0, -1, +1, -2, +2, ... and only replace
    // on strict improvement.
    for (int mag = 0; mag <= max_abs; ++mag) {
        for (int sign : {-1, 1}) {
            if (mag == 0 && sign == 1) continue;
            const int lag = sign * mag;
            const auto ov = overlap(na, nb, lag);
            if (ov.size() < floor_len) continue;
            const double r = ccf_at_lag(a, b, lag);
            if (std::isnan(r)) continue;
            if (!found || r > best.ccf) {
                best = {lag, r, ov.size()};
                found = true;
            }
        }
    }
    if (!found) throw Error(ErrorCode::NoAdmissibleLag, "no lag reaches the overlap floor with defined correlation");
    return best;
}

std::vector<Extremum> find_extrema(const Signature& sig, const StriaeConfig& cfg) {
    std::vector<Extremum> out;
    const Eigen::Index n = sig.size();
    if (n < 3) return out;
    int window = std::max(1, cfg.smooth_window);
    if (window % 2 == 0) ++window;
    const VectorXd s = moving_average(sig.residuals, sig.mask, window);

    auto crossing_left = [&](Eigen::Index idx, double sign) {
        for (Eigen::Index j = idx - 1; j >= 0; --j) {
            if (sign * s(j) <= 0.0) {
                const double t = s(j) / (s(j) - s(j + 1));
                return static_cast<double>(j) + t;
            }
        }
        return 0.0;
    };
    auto crossing_right = [&](Eigen::Index idx, double sign) {
        for (Eigen::Index j = idx + 1; j < n; ++j) {
            if (sign * s(j) <= 0.0) {
                const double t = s(j - 1) / (s(j - 1) - s(j));
                return static_cast<double>(j - 1) + t;
            }
        }
        return static_cast<double>(n - 1);
    };

    int prev_sign = 0;
    Eigen::Index plateau_start = 0;  // first sample after the last nonzero step
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double d = s(i + 1) - s(i);
        const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (sign == 0) continue;
        if (prev_sign != 0 && sign != prev_sign) {
            const Eigen::Index idx = (plateau_start + i) / 2;
            const ExtremumKind kind = prev_sign > 0 ? ExtremumKind::Peak : ExtremumKind::Valley;
            const double h = s(idx);
            const bool sign_ok = kind == ExtremumKind::Peak ? h > 0.0 : h < 0.0;
            if (!sig.mask(idx) && sign_ok && std::abs(h) >= cfg.min_prominence_um) {
                const double dir = kind == ExtremumKind::Peak ? 1.0 : -1.0;
                const double w = crossing_right(idx, dir) - crossing_left(idx, dir);
                out.push_back({kind, idx, h, std::max(1.0, w)});
            }
        }
        prev_sign = sign;
        plateau_start = i + 1;
    }
    return out;
}

ExtremaMatch match_extrema(const std::vector<Extremum>& ea, const std::vector<Extremum>& eb, int lag, int tol) {
    ExtremaMatch m;
    m.a_matched.assign(ea.size(), false);
    m.b_matched.assign(eb.size(), false);
    for (std::size_t ia = 0; ia < ea.size(); ++ia) {
        std::size_t best = eb.size();
        Eigen::Index best_dist = std::numeric_limits<Eigen::Index>::max();
        for (std::size_t ib = 0; ib < eb.size(); ++ib) {
            if (m.b_matched[ib] || eb[ib].kind != ea[ia].kind) continue;
            const Eigen::Index dist = std::abs(ea[ia].index - (eb[ib].index + lag));
            if (dist <= tol && dist < best_dist) {
                best = ib;
                best_dist = dist;
            }
        }
        if (best < eb.size()) {
            m.a_matched[ia] = true;
            m.b_matched[best] = true;
            m.pairs.emplace_back(ia, best);
        }
    }
    return m;
}

RunLengths cms(const std::vector<bool>& flags) {
    RunLengths out;
    std::size_t run_t = 0, run_f = 0;
    for (bool f : flags) {
        if (f) {
            ++run_t;
            run_f = 0;
        } else {
            ++run_f;
            run_t = 0;
        }
        out.cms = std::max(out.cms, run_t);
        out.non_cms = std::max(out.non_cms, run_f);
    }
    return out;
}

std::vector<bool> merged_match_sequence(const std::vector<Extremum>& ea, const std::vector<Extremum>& eb,
                                        const ExtremaMatch& match, int lag) {
    // (position in a's frame, source: 0 = a, 1 = b, ordinal, matched)
    std::vector<std::tuple<Eigen::Index, int, std::size_t, bool>> seq;
    for (std::size_t i = 0; i < ea.size(); ++i) seq.emplace_back(ea[i].index, 0, i, match.a_matched[i]);
    for (std::size_t j = 0; j < eb.size(); ++j)
        if (!match.b_matched[j]) seq.emplace_back(eb[j].index + lag, 1, j, false);
    std::sort(seq.begin(), seq.end());
    std::vector<bool> flags;
    flags.reserve(seq.size());
    for (const auto& e : seq) flags.push_back(std::get<3>(e));
    return flags;
}

std::array<double, kFeatureCount> forest_inputs(const FeatureVector& fv) {
    return {fv.ccf,
            std::abs(fv.lag_um),
            fv.D,
            static_cast<double>(fv.n_matches),
            static_cast<double>(fv.n_mismatches),
            static_cast<double>(fv.cms),
            static_cast<double>(fv.non_cms),
            fv.sum_peaks,
            fv.overlap_frac};
}

namespace {

std::uint64_t content_key(const Signature& s) {
    Fnv1a h;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        h.update_value(s.residuals(i));
        h.update_value(static_cast<unsigned char>(s.mask(i)));
    }
    return h.value();
}

bool canonical_before(const Signature& a, const Signature& b) {
    const auto ka = std::make_tuple(a.provenance.bullet_id, a.provenance.land_id, a.size(), content_key(a));
    const auto kb = std::make_tuple(b.provenance.bullet_id, b.provenance.land_id, b.size(), content_key(b));
    return ka <= kb;
}

PairComparison compare_ordered(const Signature& a, const Signature& b, const StriaeConfig& cfg) {
    PairComparison out;
    try {
        out.alignment = align(a, b, cfg);
    } catch (const Error& e) {
        throw Error(ErrorCode::FeatureUnavailable, e.what());
    }
    const int lag = out.alignment.lag;
    FeatureVector& fv = out.features;
    fv.ccf = out.alignment.ccf;
    fv.lag_um = lag * a.x_res_um;
    fv.overlap_frac = static_cast<double>(out.alignment.overlap_len) /
                      static_cast<double>(std::min(a.size(), b.size()));

    const auto ov = overlap(a.size(), b.size(), lag);
    double dsum = 0.0;
    Eigen::Index dn = 0;
    for (Eigen::Index i = ov.begin; i < ov.end; ++i) {
        const Eigen::Index j = i - lag;
        if (a.mask(i) || b.mask(j)) continue;
        dsum += std::abs(a.residuals(i) - b.residuals(j));
        ++dn;
    }
    fv.D = dn > 0 ? dsum / static_cast<double>(dn) : 0.0;

    const auto ea = find_extrema(a, cfg);
    const auto eb = find_extrema(b, cfg);
    const auto match = match_extrema(ea, eb, lag, cfg.match_tolerance);
    fv.n_matches = static_cast<int>(match.pairs.size());
    fv.n_mismatches = static_cast<int>(ea.size() + eb.size() - 2 * match.pairs.size());
    for (const auto& [ia, ib] : match.pairs) fv.sum_peaks += 0.5 * (std::abs(ea[ia].height) + std::abs(eb[ib].height));
    const auto runs = cms(merged_match_sequence(ea, eb, match, lag));
    fv.cms = static_cast<int>(runs.cms);
    fv.non_cms = static_cast<int>(runs.non_cms);
    return out;
}

}  // namespace

PairComparison compare(const Signature& a, const Signature& b, const StriaeConfig& cfg) {
    if (canonical_before(a, b)) return compare_ordered(a, b, cfg);
    PairComparison out = compare_ordered(b, a, cfg);
    out.alignment.lag = -out.alignment.lag;
    out.features.lag_um = out.alignment.lag * a.x_res_um;
    return out;
}

void write_feature_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
    out << "bullet_a,land_a,bullet_b,land_b,ccf,lag_um,D,n_matches,n_mismatches,cms,non_cms,sum_peaks,overlap_frac\n";
    char buf[512];
    for (const auto& r : rows) {
        const auto& f = r.features;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%d,%d,%d,%.17g,%.17g", f.ccf, f.lag_um, f.D,
                      f.n_matches, f.n_mismatches, f.cms, f.non_cms, f.sum_peaks, f.overlap_frac);
        out << r.bullet_a << ',' << r.land_a << ',' << r.bullet_b << ',' << r.land_b << ',' << buf << '\n';
    }
}

}  // namespace leamatch
