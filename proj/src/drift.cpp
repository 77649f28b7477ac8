// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/drift.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace tsa {

std::vector<double> compute_drift(const std::vector<Matrix>& hidden, double epsilon) {
    if (hidden.size() < 2) {
        throw std::invalid_argument("compute_drift: need at least 2 hidden-state matrices, got " +
                                    std::to_string(hidden.size()));
    }
    if (!(epsilon > 0)) {
        throw std::invalid_argument("compute_drift: epsilon must be positive");
    }
    for (size_t l = 1; l < hidden.size(); ++l) {
        if (hidden[l].rows() != hidden[0].rows() || hidden[l].cols() != hidden[0].cols()) {
            throw std::invalid_argument("compute_drift: layer " + std::to_string(l) + " shape " +
                                        shape_str(hidden[l]) + " != " + shape_str(hidden[0]));
        }
    }
    const Eigen::Index n_tokens = hidden[0].rows();
    std::vector<double> R(hidden.size() - 1);
    for (size_t l = 0; l + 1 < hidden.size(); ++l) {
        double acc = 0.0;
        for (Eigen::Index t = 0; t < n_tokens; ++t) {
            double num = 0.0;
            double den = 0.0;
            for (Eigen::Index j = 0; j < hidden[0].cols(); ++j) {
                const double d = static_cast<double>(hidden[l + 1](t, j)) - hidden[l](t, j);
                num += d * d;
                den += static_cast<double>(hidden[l](t, j)) * hidden[l](t, j);
            }
            acc += std::sqrt(num) / (std::sqrt(den) + epsilon);
        }
        R[l] = acc / static_cast<double>(n_tokens);
    }
    return R;
}

DriftProfile select_sparse_layers(const std::vector<double>& R, double delta) {
    if (R.empty()) {
        throw std::invalid_argument("select_sparse_layers: empty drift vector");
    }
    const size_t n = R.size();
    DriftProfile p;
    p.R = R;
    p.delta = delta;
    p.R_hat.resize(n);
    for (size_t l = 0; l < n; ++l) {
        int count = 0;
        for (size_t k = 0; k < n; ++k) {
            if (R[k] <= R[l]) ++count;
        }
        p.R_hat[l] = static_cast<double>(count) / static_cast<double>(n);
        if (p.R_hat[l] <= delta) p.sparse_layers.push_back(static_cast<int>(l));
    }
    return p;
}

DriftProfile calibrate(const ModelWeights& model, const std::vector<std::vector<int>>& prompts,
                       double epsilon, double delta) {
    if (prompts.empty()) {
        throw std::invalid_argument("calibrate: need at least one prompt");
    }
    SparsePlan dense;
    std::vector<double> mean(static_cast<size_t>(model.config.n_layers), 0.0);
    for (const std::vector<int>& prompt : prompts) {
        const ForwardResult res = model_forward(model, prompt, dense);
        const std::vector<double> r = compute_drift(res.hidden_trace, epsilon);
        for (size_t l = 0; l < mean.size(); ++l) mean[l] += r[l];
    }
    for (double& m : mean) m /= static_cast<double>(prompts.size());
    DriftProfile p = select_sparse_layers(mean, delta);
    p.epsilon = epsilon;
    return p;
}

std::string drift_profile_json(const DriftProfile& p) {
    nlohmann::json j;
    j["R"] = p.R;
    j["R_hat"] = p.R_hat;
    j["delta"] = p.delta;
    j["sparse_layers"] = p.sparse_layers;
    return j.dump(2) + "\n";
}

}  // namespace tsa
