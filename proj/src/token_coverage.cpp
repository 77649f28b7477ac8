// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/token_coverage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tsa/tensor_ops.hpp"

namespace tsa {

HeadScores score_tokens(const HeadTensors& heads, int last_q, int kernel) {
    if (last_q < 1) {
        throw std::invalid_argument("score_tokens: last_q must be positive, got " +
                                    std::to_string(last_q));
    }
    const int n_heads = heads.n_heads();
    const Eigen::Index seq_len = heads.q[0].rows();
    const int lq = std::min<int>(last_q, static_cast<int>(seq_len));
    HeadScores hs;
    hs.last_q = lq;
    hs.kernel = kernel;
    hs.s.resize(n_heads, seq_len);
    for (int h = 0; h < n_heads; ++h) {
        const Matrix& q = heads.q[static_cast<size_t>(h)];
        const Matrix& k = heads.k[static_cast<size_t>(heads.kv_head(h))];
        const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
        Matrix scores = matmul(q.bottomRows(lq), Matrix(k.transpose()));
        scores *= inv_sqrt_d;
        // Query row r is the original row seq_len - lq + r; it may only see
        // keys at or before that position.
        BoolMask mask(lq, seq_len);
        for (Eigen::Index r = 0; r < lq; ++r) {
            for (Eigen::Index j = 0; j < seq_len; ++j) {
                mask(r, j) = j <= seq_len - lq + r;
            }
        }
        const Matrix proxy = softmax_rows(scores, mask);
        Vector col_sums = Vector::Zero(seq_len);
        for (Eigen::Index r = 0; r < lq; ++r) {
            col_sums += proxy.row(r).transpose();
        }
        hs.s.row(h) = avg_pool_1d(col_sums, kernel).transpose();
    }
    return hs;
}

LayerScores aggregate_scores(const HeadScores& hs) {
    const Eigen::Index seq_len = hs.s.cols();
    Vector sum = Vector::Zero(seq_len);
    for (Eigen::Index h = 0; h < hs.s.rows(); ++h) {
        sum += hs.s.row(h).transpose();
    }
    Scalar total = 0;
    for (Eigen::Index t = 0; t < seq_len; ++t) {
        total += sum(t);
    }
    if (!(total > Scalar(0))) {
        throw std::invalid_argument("aggregate_scores: all scores are zero, cannot normalize");
    }
    return LayerScores{sum / total};
}

int coverage_budget(const LayerScores& sl, double tau, int min_keep) {
    const int seq_len = static_cast<int>(sl.s.size());
    if (tau < 0.0 || tau > 1.0) {
        throw std::invalid_argument("coverage_budget: tau " + std::to_string(tau) +
                                    " outside [0, 1]");
    }
    if (min_keep < 1 || min_keep > seq_len) {
        throw std::invalid_argument("coverage_budget: min_keep " + std::to_string(min_keep) +
                                    " outside [1, " + std::to_string(seq_len) + "]");
    }
    std::vector<int> order(static_cast<size_t>(seq_len));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&sl](int a, int b) { return sl.s(a) < sl.s(b); });
    int k_sparse = seq_len;
    double prefix = 0.0;
    if (prefix >= tau) {
        k_sparse = 0;
    } else {
        for (int k = 1; k <= seq_len; ++k) {
            prefix += static_cast<double>(sl.s(order[static_cast<size_t>(k - 1)]));
            if (prefix >= tau) {
                k_sparse = k;
                break;
            }
        }
    }
    return std::max(seq_len - k_sparse, min_keep);
}

int fixed_budget(int seq_len, double s, int min_keep) {
    if (s < 0.0 || s >= 1.0) {
        throw std::invalid_argument("fixed_budget: sparsity ratio " + std::to_string(s) +
                                    " outside [0, 1)");
    }
    if (min_keep < 1 || min_keep > seq_len) {
        throw std::invalid_argument("fixed_budget: min_keep " + std::to_string(min_keep) +
                                    " outside [1, " + std::to_string(seq_len) + "]");
    }
    const int k = static_cast<int>(std::lround((1.0 - s) * seq_len));
    return std::max(k, min_keep);
}

TokenSelection select_tokens(const HeadScores& hs, int k_keep, const IndexList& forced) {
    const int seq_len = static_cast<int>(hs.s.cols());
    IndexList f = forced;
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    for (int t : f) {
        if (t < 0 || t >= seq_len) {
            throw std::invalid_argument("select_tokens: forced index " + std::to_string(t) +
                                        " out of range [0, " + std::to_string(seq_len) + ")");
        }
    }
    const int min_keep = std::max<int>(1, static_cast<int>(f.size()));
    if (k_keep < min_keep || k_keep > seq_len) {
        throw std::invalid_argument("select_tokens: k_keep " + std::to_string(k_keep) +
                                    " outside [" + std::to_string(min_keep) + ", " +
                                    std::to_string(seq_len) + "]");
    }
    std::vector<char> is_forced(static_cast<size_t>(seq_len), 0);
    for (int t : f) is_forced[static_cast<size_t>(t)] = 1;
    IndexList pool;
    pool.reserve(static_cast<size_t>(seq_len) - f.size());
    for (int t = 0; t < seq_len; ++t) {
        if (!is_forced[static_cast<size_t>(t)]) pool.push_back(t);
    }
    TokenSelection sel;
    sel.k_keep = k_keep;
    sel.forced = f;
    sel.indices.resize(static_cast<size_t>(hs.s.rows()));
    const size_t n_free = static_cast<size_t>(k_keep) - f.size();
    for (Eigen::Index h = 0; h < hs.s.rows(); ++h) {
        IndexList ranked = pool;
        // stable sort on descending score keeps equal-score candidates in
        // ascending index order, the documented tie-break.
        std::stable_sort(ranked.begin(), ranked.end(),
                         [&hs, h](int a, int b) { return hs.s(h, a) > hs.s(h, b); });
        IndexList s(f);
        s.insert(s.end(), ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n_free));
        std::sort(s.begin(), s.end());
        sel.indices[static_cast<size_t>(h)] = std::move(s);
    }
    return sel;
}

}  // namespace tsa
