// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/tensor_ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsa {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a) +
                                    " x " + shape_str(b));
    }
    Matrix c = Matrix::Zero(a.rows(), b.cols());
    // i,p,j order: per output element the p-accumulation runs left to right.
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index p = 0; p < a.cols(); ++p) {
            c.row(i) += a(i, p) * b.row(p);
        }
    }
    return c;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.cols() == 0) {
        throw std::invalid_argument("softmax_rows: rows have no entries");
    }
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const Scalar mx = m.row(i).maxCoeff();
        out.row(i) = (m.row(i).array() - mx).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

Matrix softmax_rows(const Matrix& m, const BoolMask& mask) {
    if (mask.rows() != m.rows() || mask.cols() != m.cols()) {
        throw std::invalid_argument("softmax_rows: mask shape " +
                                    shape_str(mask.rows(), mask.cols()) +
                                    " does not match input " + shape_str(m));
    }
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        bool any = false;
        Scalar mx = 0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!mask(i, j)) continue;
            mx = any ? std::max(mx, m(i, j)) : m(i, j);
            any = true;
        }
        if (!any) {
            throw std::invalid_argument("softmax_rows: row " + std::to_string(i) +
                                        " is fully masked");
        }
        Scalar sum = 0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!mask(i, j)) continue;
            const Scalar e = std::exp(m(i, j) - mx);
            out(i, j) = e;
            sum += e;
        }
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (mask(i, j)) out(i, j) /= sum;
        }
    }
    return out;
}

namespace {

void check_indices(const IndexList& idx, Eigen::Index rows, const char* op) {
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= rows) {
            throw std::invalid_argument(std::string(op) + ": index " + std::to_string(idx[r]) +
                                        " out of range [0, " + std::to_string(rows) + ")");
        }
        if (r > 0 && idx[r] <= idx[r - 1]) {
            throw std::invalid_argument(std::string(op) +
                                        ": indices must be strictly ascending, got " +
                                        std::to_string(idx[r - 1]) + " before " +
                                        std::to_string(idx[r]));
        }
    }
}

}  // namespace

Matrix gather_rows(const Matrix& t, const IndexList& idx) {
    check_indices(idx, t.rows(), "gather_rows");
    Matrix out(static_cast<Eigen::Index>(idx.size()), t.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = t.row(idx[r]);
    }
    return out;
}

Matrix scatter_rows(const Matrix& tc, const IndexList& idx, int rows) {
    if (static_cast<Eigen::Index>(idx.size()) != tc.rows()) {
        throw std::invalid_argument("scatter_rows: " + std::to_string(idx.size()) +
                                    " indices for " + std::to_string(tc.rows()) + " rows");
    }
    check_indices(idx, rows, "scatter_rows");
    Matrix out = Matrix::Zero(rows, tc.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
        out.row(idx[r]) = tc.row(static_cast<Eigen::Index>(r));
    }
    return out;
}

Vector avg_pool_1d(const Vector& v, int kernel) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("avg_pool_1d: kernel must be odd and positive, got " +
                                    std::to_string(kernel));
    }
    if (kernel == 1) return v;
    const Eigen::Index n = v.size();
    const Eigen::Index h = kernel / 2;
    Vector out(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, t - h);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + h);
        out(t) = v.segment(lo, hi - lo + 1).mean();
    }
    return out;
}

}  // namespace tsa
