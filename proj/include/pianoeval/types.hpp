#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

namespace pianoeval {

using Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using VectorXi = Eigen::VectorXi;
using ConstMatRef = Eigen::Ref<const MatrixXd>;
using ConstVecRef = Eigen::Ref<const VectorXd>;

inline constexpr int kNumFeatures = 16;
inline constexpr int kNumInputs = kNumFeatures + 1;

using Vector16 = Eigen::Matrix<double, kNumFeatures, 1>;
using Vector17 = Eigen::Matrix<double, kNumInputs, 1>;

enum class Metric { euclidean, manhattan };

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar distance(const Eigen::MatrixBase<DerivedA>& a,
                                   const Eigen::MatrixBase<DerivedB>& b,
                                   Metric metric) {
  if (metric == Metric::manhattan) return (a - b).template lpNorm<1>();
  return (a - b).norm();
}

}  // namespace pianoeval
