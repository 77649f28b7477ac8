// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "tsa/types.hpp"

namespace tsa {

/// C(i,j) = sum_p A(i,p) * B(p,j), accumulated in ascending p for every
/// element so single-threaded runs are bit-reproducible.
/// Throws std::invalid_argument when the inner dimensions disagree.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Row-wise max-subtracted softmax. Each row sums to 1.
Matrix softmax_rows(const Matrix& m);

/// Masked variant: masked-out entries are exactly 0 in the result and are
/// ignored when taking the row max. A fully masked row is an error, never a
/// silent NaN.
Matrix softmax_rows(const Matrix& m, const BoolMask& mask);

/// Copies rows t[idx[0]], t[idx[1]], ... into a new |idx| x cols matrix.
/// Indices must be strictly ascending and in [0, rows).
Matrix gather_rows(const Matrix& t, const IndexList& idx);

/// Inverse of gather_rows: writes tc's rows into a zero-initialized
/// rows x cols matrix at the given indices. Off-index rows stay exactly 0.
Matrix scatter_rows(const Matrix& tc, const IndexList& idx, int rows);

/// Same-length moving average with an odd kernel; windows shrink at the
/// edges instead of zero-padding so boundary values are not deflated.
/// kernel == 1 is the identity.
Vector avg_pool_1d(const Vector& v, int kernel);

}  // namespace tsa
