#pragma once

#include <Eigen/Core>

namespace leamatch {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using VectorXd = Vector<double>;
using MaskVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline MaskVector no_mask(Eigen::Index n) { return MaskVector::Constant(n, false); }

}  // namespace leamatch
