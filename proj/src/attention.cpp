// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tsa/tensor_ops.hpp"

namespace tsa {

namespace {

void check_head(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.cols() != k.cols() || k.rows() != v.rows() || k.cols() != q.cols()) {
        throw std::invalid_argument("attention: inconsistent head shapes Q" + shape_str(q) +
                                    " K" + shape_str(k) + " V" + shape_str(v));
    }
}

}  // namespace

Matrix dense_causal_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    check_head(q, k, v);
    if (q.rows() != k.rows()) {
        throw std::invalid_argument("dense_causal_attention: Q" + shape_str(q) +
                                    " and K" + shape_str(k) + " disagree on length");
    }
    const Eigen::Index n = q.rows();
    const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
    Matrix scores = matmul(q, Matrix(k.transpose()));
    scores *= inv_sqrt_d;
    BoolMask causal(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) causal(i, j) = j <= i;
    }
    return matmul(softmax_rows(scores, causal), v);
}

Matrix masked_sparse_oracle(const Matrix& q, const Matrix& k, const Matrix& v,
                            const IndexList& s) {
    check_head(q, k, v);
    const Eigen::Index n = q.rows();
    std::vector<char> in_s(static_cast<size_t>(n), 0);
    for (size_t r = 0; r < s.size(); ++r) {
        if (s[r] < 0 || s[r] >= n) {
            throw std::invalid_argument("masked_sparse_oracle: index " + std::to_string(s[r]) +
                                        " out of range [0, " + std::to_string(n) + ")");
        }
        if (r > 0 && s[r] <= s[r - 1]) {
            throw std::invalid_argument("masked_sparse_oracle: indices must be strictly ascending");
        }
        in_s[static_cast<size_t>(s[r])] = 1;
    }
    const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
    Matrix scores = matmul(q, Matrix(k.transpose()));
    scores *= inv_sqrt_d;
    Matrix out = Matrix::Zero(n, v.cols());
    // Masked rows are skipped entirely instead of fed to softmax_rows, which
    // would reject them as fully masked; their outputs stay exactly zero.
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!in_s[static_cast<size_t>(i)]) continue;
        BoolMask mask(1, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            mask(0, j) = in_s[static_cast<size_t>(j)] && j <= i;
        }
        out.row(i) = matmul(softmax_rows(scores.row(i), mask), v);
    }
    return out;
}

std::vector<Matrix> token_sparse_attention(const HeadTensors& heads, const TokenSelection& sel,
                                           const AttentionKernel& inner) {
    const int n_heads = heads.n_heads();
    if (n_heads == 0 || heads.n_kv_heads() == 0 || n_heads % heads.n_kv_heads() != 0) {
        throw std::invalid_argument("token_sparse_attention: " + std::to_string(n_heads) +
                                    " query heads not divisible by " +
                                    std::to_string(heads.n_kv_heads()) + " KV heads");
    }
    if (static_cast<int>(sel.indices.size()) != n_heads) {
        throw std::invalid_argument("token_sparse_attention: selection covers " +
                                    std::to_string(sel.indices.size()) + " heads, tensors have " +
                                    std::to_string(n_heads));
    }
    const int seq_len = static_cast<int>(heads.q[0].rows());
    validate(sel, seq_len);
    std::vector<Matrix> out(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        const IndexList& s = sel.indices[static_cast<size_t>(h)];
        const int kv = heads.kv_head(h);
        const Matrix qc = gather_rows(heads.q[static_cast<size_t>(h)], s);
        const Matrix kc = gather_rows(heads.k[static_cast<size_t>(kv)], s);
        const Matrix vc = gather_rows(heads.v[static_cast<size_t>(kv)], s);
        out[static_cast<size_t>(h)] = scatter_rows(inner(qc, kc, vc), s, seq_len);
    }
    return out;
}

}  // namespace tsa
