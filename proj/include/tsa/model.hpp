// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "tsa/attention.hpp"
#include "tsa/selection.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// Toy decoder-only transformer dimensions. d_model must equal
/// n_heads * d_head and n_heads must be divisible by n_kv_heads.
struct ModelConfig {
    int n_layers = 4;
    int n_heads = 8;
    int n_kv_heads = 2;
    int d_model = 128;
    int d_head = 16;
    int d_ff = 256;
    int vocab_size = 512;
    Scalar rope_theta = 10000.0f;
    Scalar norm_eps = 1e-5f;

    /// Throws std::invalid_argument on inconsistent dimensions.
    void check() const;
};

/// One decoder layer: pre-norm attention and SwiGLU feed-forward, all
/// projections bias-free. Weights multiply row vectors from the right,
/// so wq is [d_model x n_heads*d_head], w_down is [d_ff x d_model], etc.
struct LayerWeights {
    Vector attn_norm;  // RMSNorm gain [d_model]
    Matrix wq, wk, wv; // [d_model x n_heads*d_head], K/V use n_kv_heads
    Matrix wo;         // [n_heads*d_head x d_model]
    Vector ffn_norm;   // [d_model]
    Matrix w_gate, w_up; // [d_model x d_ff]
    Matrix w_down;       // [d_ff x d_model]
};

struct ModelWeights {
    ModelConfig config;
    Matrix tok_embed;  // [vocab_size x d_model]
    std::vector<LayerWeights> layers;
    Vector final_norm; // [d_model]
    Matrix lm_head;    // [d_model x vocab_size]
};

enum class SparseMode { kDense, kDynamic, kFixed };

/// Which positions every head must keep regardless of score.
enum class ForcedPolicy { kFinalToken, kRecentWindow };

/// Per-run sparsification plan: which layers run Token Sparse Attention and
/// how their budgets are chosen.
struct SparsePlan {
    SparseMode mode = SparseMode::kDense;
    IndexList sparse_layers;  // ignored in dense mode
    double tau = 0.005;       // dynamic budget coverage
    double s_fixed = 0.0;     // fixed budget sparsity ratio
    int last_q = 64;
    int kernel = 7;
    ForcedPolicy forced = ForcedPolicy::kFinalToken;

    /// Throws std::invalid_argument when parameters are out of range or
    /// sparse_layers mentions a layer outside [0, n_layers).
    void check(int n_layers) const;
    bool is_sparse_layer(int layer) const;
    /// The force-kept index set for a sequence of the given length.
    IndexList forced_set(int seq_len) const;
};

/// Per-layer accounting from one forward pass.
struct LayerStat {
    int layer = 0;
    bool sparse = false;
    int k_keep = 0;          // seq_len on dense layers
    double attn_flops = 0.0; // 4 * k_keep^2 * d_head * n_heads
    TokenSelection selection; // populated on sparse layers only
};

struct ForwardResult {
    Matrix logits;  // [seq_len x vocab_size]
    /// n_layers + 1 matrices: the input of each layer followed by the final
    /// layer's output (the stream entering the final norm).
    std::vector<Matrix> hidden_trace;
    std::vector<LayerStat> stats;
};

/// Root-mean-square normalization with learned gain, eps inside the sqrt.
Matrix rms_norm(const Matrix& x, const Vector& gain, Scalar eps);

/// Rotary position encoding: adjacent pairs (2i, 2i+1) of each row rotated by
/// angle positions[row] * theta^(-2i/d). Requires an even column count.
Matrix apply_rope(const Matrix& x, const IndexList& positions, Scalar theta);

/// Projects normalized activations to per-head Q/K/V with rotary phases
/// applied to Q and K at original positions 0..L-1.
HeadTensors project_qkv(const Matrix& x_norm, const LayerWeights& w, const ModelConfig& cfg);

/// One pre-norm decoder layer. On layers in plan.sparse_layers the attention
/// runs through scoring -> budget -> selection -> token_sparse_attention;
/// elsewhere it is exact dense causal attention. Appends accounting to stats
/// when non-null.
Matrix layer_forward(const Matrix& x, const LayerWeights& w, const ModelConfig& cfg,
                     const SparsePlan& plan, int layer, LayerStat* stat = nullptr);

/// Full prefill pass over a token sequence.
ForwardResult model_forward(const ModelWeights& model, const std::vector<int>& tokens,
                            const SparsePlan& plan);

/// Deterministically initialized random weights (same seed, same bits).
ModelWeights init_random(const ModelConfig& cfg, uint64_t seed);

/// Binary checkpoint container; load(save(w)) reproduces every tensor
/// bitwise. Layout: 8-byte magic "TSACKPT1", u64 little-endian manifest
/// length, JSON manifest (config plus tensor name/shape/offset table), then
/// the tensors as little-endian f32, densely packed in manifest order.
void save_checkpoint(const ModelWeights& w, const std::string& path);
ModelWeights load_checkpoint(const std::string& path);

}  // namespace tsa
