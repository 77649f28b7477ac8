// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsa/attention.hpp"
#include "tsa/selection.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// Per-head token-importance scores for one layer.
struct HeadScores {
    /// s(h, t): importance of token t under head h, nonnegative. With
    /// kernel == 1 each head's row sums to min(last_q, L) exactly (every
    /// proxy softmax row sums to 1); wider kernels preserve the total only
    /// approximately at the sequence edges.
    Matrix s;
    int last_q = 0;
    int kernel = 1;
};

/// Head-aggregated, globally normalized token scores; sums to 1.
struct LayerScores {
    Vector s;
};

/// Builds the proxy attention map for the trailing `last_q` query rows
/// (causally masked inside that block), column-sums it, and smooths the
/// per-token totals with an edge-clamped average pool of width `kernel`.
/// last_q is clamped to the sequence length. Scores are computed per query
/// head; K comes from the head's KV group.
HeadScores score_tokens(const HeadTensors& heads, int last_q, int kernel);

/// Sums scores across heads and divides by the global total.
/// Throws std::invalid_argument when every score is zero.
LayerScores aggregate_scores(const HeadScores& hs);

/// Dynamic coverage budget: sort tokens by ascending importance (ties toward
/// the lower index), find the smallest ascending prefix whose mass reaches
/// tau, and keep the rest: k_keep = max(L - k_sparse, min_keep). tau = 0
/// keeps everything; tau = 1 collapses to min_keep.
int coverage_budget(const LayerScores& sl, double tau, int min_keep);

/// Fixed-ratio budget: k_keep = max(round((1 - s) * L), min_keep), 0 <= s < 1.
int fixed_budget(int seq_len, double s, int min_keep);

/// Head-wise top-k: per head, the forced indices plus the highest-scoring
/// k_keep - |forced| remaining tokens (ties toward the lower index), returned
/// strictly ascending. Requires max(1, |forced|) <= k_keep <= L.
TokenSelection select_tokens(const HeadScores& hs, int k_keep, const IndexList& forced);

}  // namespace tsa
