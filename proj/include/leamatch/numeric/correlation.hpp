#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "leamatch/numeric/types.hpp"

namespace leamatch {

/// Running sums for a Pearson correlation. Accumulating pairs in the same
/// order gives bit-identical results regardless of which series is "a".
template <typename Scalar>
struct PearsonAccumulator {
    Scalar sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    Eigen::Index n = 0;

    void add(Scalar a, Scalar b) {
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
        ++n;
    }

    /// NaN when fewer than two pairs or either side has zero variance.
    Scalar value() const {
        if (n < 2) return std::numeric_limits<Scalar>::quiet_NaN();
        const Scalar nn = static_cast<Scalar>(n);
        const Scalar va = saa - sa * sa / nn;
        const Scalar vb = sbb - sb * sb / nn;
        const Scalar cov = sab - sa * sb / nn;
        if (!(va > 0) || !(vb > 0)) return std::numeric_limits<Scalar>::quiet_NaN();
        const Scalar r = cov / std::sqrt(va * vb);
        return std::clamp(r, Scalar(-1), Scalar(1));
    }
};

/// Pearson correlation of two equally sized series.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson(const Eigen::DenseBase<DerivedA>& a,
                                  const Eigen::DenseBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    eigen_assert(a.size() == b.size());
    // Two-pass for accuracy on long, offset series.
    const Scalar ma = a.derived().mean();
    const Scalar mb = b.derived().mean();
    const auto da = (a.derived().array() - ma);
    const auto db = (b.derived().array() - mb);
    const Scalar denom = std::sqrt((da * da).sum() * (db * db).sum());
    if (!(denom > 0)) return std::numeric_limits<Scalar>::quiet_NaN();
    return (da * db).sum() / denom;
}

/// Pearson correlation over positions unmasked in both series.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson_masked(const Eigen::DenseBase<DerivedA>& a, const MaskVector& mask_a,
                                         const Eigen::DenseBase<DerivedB>& b, const MaskVector& mask_b) {
    using Scalar = typename DerivedA::Scalar;
    eigen_assert(a.size() == b.size());
    Scalar ma = 0, mb = 0;
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (mask_a(i) || mask_b(i)) continue;
        ma += a.derived()(i);
        mb += b.derived()(i);
        ++n;
    }
    if (n < 2) return std::numeric_limits<Scalar>::quiet_NaN();
    ma /= n;
    mb /= n;
    Scalar sab = 0, saa = 0, sbb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (mask_a(i) || mask_b(i)) continue;
        const Scalar da = a.derived()(i) - ma;
        const Scalar db = b.derived()(i) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    const Scalar denom = std::sqrt(saa * sbb);
    if (!(denom > 0)) return std::numeric_limits<Scalar>::quiet_NaN();
    return sab / denom;
}

/// Centered moving average over unmasked samples; window shrinks at the
/// ends. Positions with no unmasked sample in their window get 0.
template <typename Derived>
Vector<typename Derived::Scalar> moving_average(const Eigen::MatrixBase<Derived>& x, const MaskVector& mask,
                                                Eigen::Index window) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = x.size();
    const Eigen::Index half = window / 2;
    Vector<Scalar> prefix = Vector<Scalar>::Zero(n + 1);
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 1> count = decltype(count)::Zero(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        prefix(i + 1) = prefix(i) + (mask(i) ? Scalar(0) : x(i));
        count(i + 1) = count(i) + (mask(i) ? 0 : 1);
    }
    Vector<Scalar> out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
        const Eigen::Index hi = std::min<Eigen::Index>(n, i + half + 1);
        const Eigen::Index c = count(hi) - count(lo);
        out(i) = c > 0 ? (prefix(hi) - prefix(lo)) / static_cast<Scalar>(c) : Scalar(0);
    }
    return out;
}

}  // namespace leamatch
