// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsa/types.hpp"

namespace tsa {

/// Per-head token keep-sets for one layer. Produced by the coverage budgeter
/// (plan_tokens / fixed_budget + select_tokens) and consumed by the sparse
/// attention kernel.
struct TokenSelection {
    /// indices[h] lists the kept token positions for head h, strictly ascending.
    std::vector<IndexList> indices;
    /// Number of tokens kept per head; every indices[h] has exactly this size.
    int k_keep = 0;
    /// Coverage threshold the plan was built with (0 when a fixed budget was used).
    double tau = 0.0;
    /// Positions every head was required to keep (subset of each indices[h]).
    IndexList forced;
};

/// Checks structural invariants of `sel` against sequence length `seq_len`:
/// per-head lists strictly ascending in [0, seq_len), all of size k_keep,
/// k_keep >= max(1, |forced|), and forced indices present in every head.
/// Throws std::invalid_argument naming the violated head on failure.
void validate(const TokenSelection& sel, int seq_len);

}  // namespace tsa
