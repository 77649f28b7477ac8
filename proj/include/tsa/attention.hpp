// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "tsa/selection.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// Per-head Q/K/V slices for one layer. q holds one [L x d_head] matrix per
/// query head; k and v hold one per KV head (n_kv_heads <= n_heads, with
/// n_heads divisible by n_kv_heads). For plain multi-head attention k and v
/// have the same length as q.
struct HeadTensors {
    std::vector<Matrix> q;
    std::vector<Matrix> k;
    std::vector<Matrix> v;

    int n_heads() const { return static_cast<int>(q.size()); }
    int n_kv_heads() const { return static_cast<int>(k.size()); }
    /// KV head serving query head h.
    int kv_head(int h) const { return h / (n_heads() / n_kv_heads()); }
};

/// Single-head attention backend: (Q, K, V) -> output, all [rows x d_head].
using AttentionKernel = std::function<Matrix(const Matrix&, const Matrix&, const Matrix&)>;

/// Exact causal attention for one head: softmax_rows(Q K^T / sqrt(d), j <= i) V.
Matrix dense_causal_attention(const Matrix& q, const Matrix& k, const Matrix& v);

/// Ground-truth sparse attention: full L x L attention where entry (i, j) is
/// allowed iff i and j are both in `s` and j <= i. Rows outside `s` are
/// exactly zero. The compressed fast path must match this.
Matrix masked_sparse_oracle(const Matrix& q, const Matrix& k, const Matrix& v,
                            const IndexList& s);

/// Two-stage Token Sparse Attention. Per query head h: gather Q/K/V rows at
/// sel.indices[h] (K/V from the head's KV group), run `inner` on the
/// compressed tensors with a plain lower-triangular mask (valid because the
/// indices are ascending), and scatter the result back into a zero-initialized
/// [L x d_head] output. Returns one output matrix per query head.
std::vector<Matrix> token_sparse_attention(const HeadTensors& heads, const TokenSelection& sel,
                                           const AttentionKernel& inner = dense_causal_attention);

}  // namespace tsa
