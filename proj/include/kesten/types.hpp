#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace kesten {

/// Largest dimension the grids and samplers are validated for.
inline constexpr int kMaxDim = 3;

// Fixed-capacity dynamic types: no heap traffic for d <= 3.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using ColVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;

}  // namespace kesten
