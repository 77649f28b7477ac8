// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/flops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsa {

FlopReport estimate_flops(int seq_len, int d_head, int n_heads,
                          const std::vector<std::optional<int>>& k_keep, int last_q, int kernel) {
    if (seq_len < 1 || d_head < 1 || n_heads < 1 || last_q < 1 || kernel < 1) {
        throw std::invalid_argument("estimate_flops: dimensions must be positive");
    }
    const double L = seq_len;
    const double d = d_head;
    const double H = n_heads;
    const double dense_per_layer = 4.0 * L * L * d * H;
    const double lq = std::min<double>(last_q, L);

    FlopReport r;
    for (const std::optional<int>& budget : k_keep) {
        r.dense_flops += dense_per_layer;
        if (!budget.has_value()) {
            r.sparse_flops += dense_per_layer;
            continue;
        }
        const int k_int = *budget;
        if (k_int < 1 || k_int > seq_len) {
            throw std::invalid_argument("estimate_flops: k_keep " + std::to_string(k_int) +
                                        " outside [1, " + std::to_string(seq_len) + "]");
        }
        const double k = k_int;
        r.sparse_flops += 4.0 * k * k * d * H;
        r.overhead_flops += H * (2.0 * lq * L * d            // proxy QK^T scores
                                 + L * (kernel + std::log2(L))  // pooling + sort/top-k
                                 + 6.0 * k * d + L * d);        // gather x3, scatter
        r.map_sparsity.push_back(1.0 - (k / L) * (k / L));
    }
    r.attn_ratio = r.sparse_flops > 0 ? r.dense_flops / r.sparse_flops : 1.0;
    const double total = r.sparse_flops + r.overhead_flops;
    r.est_speedup = total > 0 ? r.dense_flops / total : 1.0;
    if (!r.map_sparsity.empty()) {
        double acc = 0.0;
        for (double m : r.map_sparsity) acc += m;
        r.avg_map_sparsity = acc / static_cast<double>(r.map_sparsity.size());
    }
    return r;
}

}  // namespace tsa
