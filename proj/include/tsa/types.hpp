// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace tsa {

using Scalar = float;

// Dense row-major carriers used throughout. Row-major matches the on-disk
// checkpoint layout, so loads are straight memcpys.
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using IndexList = std::vector<int>;

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
    return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

inline std::string shape_str(const Matrix& m) { return shape_str(m.rows(), m.cols()); }

}  // namespace tsa
