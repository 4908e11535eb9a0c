#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "leamatch/error.hpp"
#include "leamatch/numeric/types.hpp"

namespace leamatch {

namespace detail {

template <typename Scalar>
Scalar tricube(Scalar u) {
    if (u >= Scalar(1)) return Scalar(0);
    const Scalar t = Scalar(1) - u * u * u;
    return t * t * t;
}

}  // namespace detail

/// Locally weighted polynomial regression on an equally spaced series.
///
/// For every sample (masked or not) a polynomial of `degree` is fitted by
/// weighted least squares to the k = ceil(span * n) nearest unmasked
/// samples with tricube weights, distances scaled by the largest distance
/// in the neighbourhood. Masked samples never enter a fit. Throws
/// Error(TooFewSamples) when fewer than max(8, k) samples are unmasked.
template <typename Derived>
Vector<typename Derived::Scalar> lowess(const Eigen::MatrixBase<Derived>& y, const MaskVector& mask,
                                        double span, int degree) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = y.size();
    if (!(span > 0.0 && span <= 1.0)) throw Error(ErrorCode::BadConfig, "lowess span must be in (0,1]");
    if (degree < 1 || degree > 2) throw Error(ErrorCode::BadConfig, "lowess degree must be 1 or 2");

    std::vector<Eigen::Index> pos;
    pos.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        if (!mask(i)) pos.push_back(i);
    const auto m = static_cast<Eigen::Index>(pos.size());

    Eigen::Index k = static_cast<Eigen::Index>(std::ceil(span * static_cast<double>(n) - 1e-12));
    k = std::max<Eigen::Index>(k, degree + 2);
    if (m < std::max<Eigen::Index>(8, k))
        throw Error(ErrorCode::TooFewSamples,
                    std::to_string(m) + " unmasked samples, need " + std::to_string(std::max<Eigen::Index>(8, k)));

    const int p = degree + 1;
    Vector<Scalar> fitted(n);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> design(k, p);
    Vector<Scalar> rhs(k);

    Eigen::Index lo = 0;  // window [lo, lo + k) into pos
    for (Eigen::Index i = 0; i < n; ++i) {
        // Slide right while the sample past the window is strictly closer
        // than the window's left end.
        while (lo + k < m && (pos[lo + k] - i) < (i - pos[lo])) ++lo;
        const Scalar h = static_cast<Scalar>(std::max(i - pos[lo], pos[lo + k - 1] - i));
        for (Eigen::Index r = 0; r < k; ++r) {
            const Eigen::Index j = pos[lo + r];
            const Scalar d = static_cast<Scalar>(j - i);
            const Scalar w = h > 0 ? detail::tricube(std::abs(d) / h) : Scalar(1);
            const Scalar sw = std::sqrt(w);
            const Scalar u = h > 0 ? d / h : Scalar(0);
            Scalar basis = 1;
            for (int c = 0; c < p; ++c) {
                design(r, c) = sw * basis;
                basis *= u;
            }
            rhs(r) = sw * y(j);
        }
        const Vector<Scalar> coef = design.colPivHouseholderQr().solve(rhs);
        fitted(i) = coef(0);
    }
    return fitted;
}

/// Polynomial in u = (x - center) / scale, coefficients lowest order first.
struct ScaledPolynomial {
    VectorXd coef;
    double center = 0.0;
    double scale = 1.0;

    double operator()(double x) const {
        const double u = (x - center) / scale;
        double v = 0.0;
        for (Eigen::Index c = coef.size() - 1; c >= 0; --c) v = v * u + coef(c);
        return v;
    }
};

/// Iteratively reweighted least squares with Tukey biweight weights,
/// c = tuning * MAD of the current residuals. A fixed iteration count keeps
/// the result deterministic.
template <typename DerivedX, typename DerivedY>
ScaledPolynomial robust_polyfit(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                                int degree, int iterations, double tuning = 4.685) {
    const Eigen::Index n = x.size();
    const int p = degree + 1;
    if (n < p) throw Error(ErrorCode::TooFewSamples, "robust_polyfit needs at least degree+1 points");

    ScaledPolynomial poly;
    poly.center = 0.5 * (x.minCoeff() + x.maxCoeff());
    poly.scale = std::max(0.5 * (x.maxCoeff() - x.minCoeff()), 1e-12);

    Eigen::MatrixXd basis(n, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double u = (static_cast<double>(x(r)) - poly.center) / poly.scale;
        double b = 1.0;
        for (int c = 0; c < p; ++c) {
            basis(r, c) = b;
            b *= u;
        }
    }
    const VectorXd yy = y.template cast<double>();
    VectorXd w = VectorXd::Ones(n);
    for (int it = 0; it <= iterations; ++it) {
        const VectorXd sw = w.array().sqrt();
        const Eigen::MatrixXd a = sw.asDiagonal() * basis;
        const VectorXd b = sw.asDiagonal() * yy;
        poly.coef = a.colPivHouseholderQr().solve(b);
        if (it == iterations) break;

        const VectorXd resid = yy - basis * poly.coef;
        std::vector<double> absr(resid.data(), resid.data() + n);
        for (auto& v : absr) v = std::abs(v);
        std::nth_element(absr.begin(), absr.begin() + n / 2, absr.end());
        const double mad = absr[static_cast<std::size_t>(n / 2)];
        const double c = tuning * mad;
        if (!(c > 0.0)) break;  // exact fit on at least half the points
        for (Eigen::Index r = 0; r < n; ++r) {
            const double t = resid(r) / c;
            w(r) = std::abs(t) < 1.0 ? (1.0 - t * t) * (1.0 - t * t) : 0.0;
        }
    }
    return poly;
}

}  // namespace leamatch
