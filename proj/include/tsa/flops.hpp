// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

namespace tsa {

/// FLOP-model comparison of a dense run against a sparse plan over the same
/// layers. Overhead counts token scoring, sort/top-k and gather/scatter as
/// data-movement-equivalent operations.
struct FlopReport {
    double dense_flops = 0.0;
    double sparse_flops = 0.0;    // attention under the plan, dense layers included
    double overhead_flops = 0.0;  // scoring + indexing + compression, sparse layers only
    double est_speedup = 1.0;     // dense / (sparse + overhead)
    double attn_ratio = 1.0;      // dense / sparse, overhead excluded
    std::vector<double> map_sparsity;  // per sparse layer, 1 - (k_keep/L)^2
    double avg_map_sparsity = 0.0;     // mean over sparse layers, 0 when none
};

/// Cost model per head: dense attention 4*L^2*d; compressed attention
/// 4*k^2*d; overhead 2*last_q*L*d (proxy scores) + L*(kernel + log2(L))
/// (pooling and sort/top-k) + 6*k*d + L*d (gather/scatter moves). Each entry
/// of k_keep gives one layer's budget; nullopt marks a dense layer, which
/// contributes equally to both sides.
FlopReport estimate_flops(int seq_len, int d_head, int n_heads,
                          const std::vector<std::optional<int>>& k_keep, int last_q, int kernel);

}  // namespace tsa
