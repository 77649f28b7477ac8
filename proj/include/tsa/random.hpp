// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "tsa/types.hpp"

namespace tsa {

/// Seeded generator with fully specified output. std::mt19937_64 is defined
/// by the standard bit-for-bit; the float conversions below avoid the
/// implementation-defined std::uniform_real_distribution so streams are
/// identical across toolchains.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1) with 24 mantissa bits.
    Scalar uniform() { return static_cast<Scalar>(gen_() >> 40) * Scalar(0x1p-24); }

    /// Uniform in [lo, hi).
    Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int below(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

    uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
};

/// Matrix with i.i.d. uniform entries in [-scale, scale), filled row-major.
inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, Scalar scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.uniform(-scale, scale);
        }
    }
    return m;
}

}  // namespace tsa
