// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tsa/drift.hpp"
#include "tsa/flops.hpp"
#include "tsa/model.hpp"

namespace tsa {

enum class ReportFormat { kJson, kCsv };

/// Fully resolved run parameters; every report embeds these.
struct RunConfig {
    std::string command;
    uint64_t seed = 0;
    int seq_len = 256;
    std::vector<int> seq_lens;        // sweep lengths; empty -> {seq_len}
    std::vector<double> taus;         // sweep / fixed-vs-dynamic; empty -> {0.005, 0.01}
    double tau = 0.005;               // single-tau commands (triplet)
    double delta = 0.5;
    double epsilon = 1e-6;
    int last_q = 64;
    int kernel = 7;
    std::vector<double> s_fixed = {0.3, 0.5};
    int trials = -1;                  // equiv instance count; -1 = full grid
    int runs = 200;                   // triplet runs
    int n_prompts = 2;                // drift calibration prompts
    std::string checkpoint;           // empty = random init from seed
    ModelConfig model;
    ForcedPolicy forced = ForcedPolicy::kFinalToken;
    int flops_k_keep = 0;             // flops command; 0 -> seq_len / 2
    IndexList flops_sparse_layers;    // flops command; empty -> all layers
    std::string out_path;             // empty = stdout
    std::optional<ReportFormat> format;  // unset -> by extension / command default
};

/// |a - b|_F / |b|_F accumulated in double.
double rel_l2(const Matrix& a, const Matrix& b);

/// Per-layer budgets for estimate_flops: k_keep on sparse layers, nullopt on
/// dense ones.
std::vector<std::optional<int>> budgets_from_stats(const std::vector<LayerStat>& stats);

/// One randomized oracle-equivalence instance.
struct EquivTrial {
    int seq_len = 0;
    int n_heads = 0;
    int d_head = 0;
    double tau = 0.0;
    int k_keep = 0;
    double max_abs_err = 0.0;
};
/// Trials over the (L, H, d, tau) grid; cfg.trials < 0 runs the full grid,
/// otherwise exactly that many instances (cycling the grid with fresh data).
std::vector<EquivTrial> run_equiv(const RunConfig& cfg);

struct SweepRow {
    double tau = 0.0;
    int seq_len = 0;
    double avg_k_keep = 0.0;
    double map_sparsity = 0.0;  // mean over sparse layers
    double est_speedup = 0.0;
};
std::vector<SweepRow> run_sweep(const RunConfig& cfg);

struct ComparisonRow {
    std::string mode;  // "fixed" or "dynamic"
    double param = 0.0;  // s for fixed, tau for dynamic
    double avg_k_keep = 0.0;
    double map_sparsity = 0.0;
    double est_speedup = 0.0;
    double output_deviation = 0.0;  // rel_l2 of logits vs the dense run
};
std::vector<ComparisonRow> run_fixed_vs_dynamic(const RunConfig& cfg);

DriftProfile run_drift(const RunConfig& cfg);

struct TripletRow {
    int run = 0;
    std::array<int, 3> layers{};
    double mean_drift = 0.0;       // mean R over the triplet
    double mean_drift_rank = 0.0;  // mean R_hat over the triplet
    double deviation = 0.0;        // final hidden state rel_l2 vs dense
    double deviation_tau0 = 0.0;   // control: same layers at tau = 0
};
struct TripletReport {
    std::vector<TripletRow> rows;
    double rank_correlation = 0.0;  // Spearman(mean_drift, deviation)
};
TripletReport run_triplet(const RunConfig& cfg);

/// CLI entry points: execute, serialize to `out`, return the process exit
/// code (0 ok, 2 when cmd_equiv sees a trial above the 1e-5 gate).
int cmd_equiv(const RunConfig& cfg, std::ostream& out);
int cmd_sweep(const RunConfig& cfg, std::ostream& out);
int cmd_fixed_vs_dynamic(const RunConfig& cfg, std::ostream& out);
int cmd_drift(const RunConfig& cfg, std::ostream& out);
int cmd_triplet(const RunConfig& cfg, std::ostream& out);
int cmd_flops(const RunConfig& cfg, std::ostream& out);

/// Dispatches cfg.command, writing the report to cfg.out_path or stdout.
int run_command(const RunConfig& cfg);

}  // namespace tsa
