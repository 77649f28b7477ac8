// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>

#include "tsa/random.hpp"
#include "tsa/types.hpp"

namespace tsa::test {

/// Exact comparison including signed zeros.
inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<size_t>(a.size())) == 0;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.size() == 0 && b.size() == 0) return 0.0;
    return (a - b).array().abs().maxCoeff();
}

}  // namespace tsa::test
