// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "tsa/model.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// Inter-layer representation drift and the layers picked for sparsification.
struct DriftProfile {
    std::vector<double> R;       // per-layer mean relative L2 change
    std::vector<double> R_hat;   // normalized drift ranks in {1/n, ..., 1}
    double delta = 0.5;
    IndexList sparse_layers;     // {l : R_hat[l] <= delta}
    double epsilon = 1e-6;
};

/// Drift across each layer boundary: given the n_layers + 1 hidden-state
/// matrices of a forward pass (layer inputs plus the final output), returns
/// n_layers values R[l] = mean over tokens of
/// |h[l+1][t] - h[l][t]|_2 / (|h[l][t]|_2 + epsilon).
std::vector<double> compute_drift(const std::vector<Matrix>& hidden, double epsilon);

/// Normalized drift rank R_hat[l] = (1/n) * #{k : R[k] <= R[l]} and the
/// sparse set {l : R_hat[l] <= delta}. Equal drifts share a rank, so a fully
/// tied profile selects nothing.
DriftProfile select_sparse_layers(const std::vector<double>& R, double delta);

/// One-time preprocessing pass: dense forward over every prompt, per-layer
/// drift averaged across prompts (arithmetic mean), then rank selection.
DriftProfile calibrate(const ModelWeights& model, const std::vector<std::vector<int>>& prompts,
                       double epsilon, double delta);

/// Stable JSON serialization: {"R": [...], "R_hat": [...], "delta": d,
/// "sparse_layers": [...]}.
std::string drift_profile_json(const DriftProfile& p);

}  // namespace tsa
