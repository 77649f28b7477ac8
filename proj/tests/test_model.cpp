// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsa/model.hpp"
#include "tsa/random.hpp"
#include "tsa/tensor_ops.hpp"
#include "tsa/token_coverage.hpp"
#include "util.hpp"

using namespace tsa;
using test::bitwise_equal;
using test::max_abs_diff;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.n_layers = 3;
    cfg.n_heads = 4;
    cfg.n_kv_heads = 2;
    cfg.d_head = 8;
    cfg.d_model = 32;
    cfg.d_ff = 64;
    cfg.vocab_size = 97;
    return cfg;
}

std::vector<int> random_tokens(Rng& rng, int n, int vocab) {
    std::vector<int> t(static_cast<size_t>(n));
    for (int& x : t) x = rng.below(vocab);
    return t;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("./" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("defaults are consistent") {
        ModelConfig cfg;
        CHECK_NOTHROW(cfg.check());
    }

    TEST_CASE("inconsistent dimensions are rejected") {
        ModelConfig cfg = small_config();
        cfg.d_model = 33;
        CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
        cfg = small_config();
        cfg.n_kv_heads = 3;
        CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
        cfg = small_config();
        cfg.d_head = 7;  // rope needs even d_head
        cfg.d_model = 28;
        CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
        cfg = small_config();
        cfg.n_layers = 0;
        CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    }
}

TEST_SUITE("rms_norm") {
    TEST_CASE("unit gain normalizes rows to unit RMS") {
        Rng rng(50);
        const Matrix x = random_matrix(rng, 5, 16, 2.0f);
        const Matrix y = rms_norm(x, Vector::Ones(16), 0.0f);
        for (int i = 0; i < 5; ++i) {
            double ss = 0;
            for (int j = 0; j < 16; ++j) ss += static_cast<double>(y(i, j)) * y(i, j);
            CHECK(std::sqrt(ss / 16) == doctest::Approx(1.0).epsilon(1e-5));
        }
    }

    TEST_CASE("gain scales coordinates independently") {
        Matrix x(1, 2);
        x << 3.0f, 4.0f;  // RMS = sqrt(25/2)
        Vector g(2);
        g << 2.0f, 0.5f;
        const Matrix y = rms_norm(x, g, 0.0f);
        const double rms = std::sqrt(12.5);
        CHECK(y(0, 0) == doctest::Approx(2.0 * 3.0 / rms).epsilon(1e-6));
        CHECK(y(0, 1) == doctest::Approx(0.5 * 4.0 / rms).epsilon(1e-6));
    }

    TEST_CASE("eps keeps zero rows finite") {
        const Matrix y = rms_norm(Matrix::Zero(2, 4), Vector::Ones(4), 1e-5f);
        CHECK(max_abs_diff(y, Matrix::Zero(2, 4)) == 0.0);
    }

    TEST_CASE("gain size mismatch throws") {
        CHECK_THROWS_AS(rms_norm(Matrix::Zero(2, 4), Vector::Ones(3), 1e-5f),
                        std::invalid_argument);
    }
}

TEST_SUITE("apply_rope") {
    TEST_CASE("position 0 is the identity") {
        Rng rng(51);
        const Matrix x = random_matrix(rng, 1, 16, 1.0f);
        CHECK(bitwise_equal(apply_rope(x, {0}, 10000.0f), x));
    }

    TEST_CASE("rotation preserves pair norms") {
        Rng rng(52);
        const Matrix x = random_matrix(rng, 6, 16, 1.0f);
        IndexList pos;
        for (int i = 0; i < 6; ++i) pos.push_back(100 + 37 * i);
        const Matrix y = apply_rope(x, pos, 10000.0f);
        for (int r = 0; r < 6; ++r) {
            for (int p = 0; p < 8; ++p) {
                const double nx = std::hypot(static_cast<double>(x(r, 2 * p)), x(r, 2 * p + 1));
                const double ny = std::hypot(static_cast<double>(y(r, 2 * p)), y(r, 2 * p + 1));
                CHECK(ny == doctest::Approx(nx).epsilon(1e-5));
            }
        }
    }

    TEST_CASE("dot products depend only on relative position") {
        Rng rng(53);
        const Matrix qk = random_matrix(rng, 2, 8, 1.0f);
        const Matrix q = qk.topRows(1), k = qk.bottomRows(1);
        auto rotated_dot = [&](int pq, int pk) {
            const Matrix rq = apply_rope(q, {pq}, 10000.0f);
            const Matrix rk = apply_rope(k, {pk}, 10000.0f);
            double d = 0;
            for (int j = 0; j < 8; ++j) d += static_cast<double>(rq(0, j)) * rk(0, j);
            return d;
        };
        const double base = rotated_dot(7, 3);
        for (int shift : {1, 10, 100}) {
            CHECK(rotated_dot(7 + shift, 3 + shift) == doctest::Approx(base).epsilon(1e-4));
        }
        // and it does change when relative distance changes
        CHECK(std::abs(rotated_dot(8, 3) - base) > 1e-5);
    }

    TEST_CASE("odd column count and position mismatch throw") {
        CHECK_THROWS_AS(apply_rope(Matrix::Zero(1, 3), {0}, 1e4f), std::invalid_argument);
        CHECK_THROWS_AS(apply_rope(Matrix::Zero(2, 4), {0}, 1e4f), std::invalid_argument);
    }
}

TEST_SUITE("sparse plan") {
    TEST_CASE("validation bounds") {
        SparsePlan plan;
        plan.mode = SparseMode::kDynamic;
        plan.sparse_layers = {1, 3};
        CHECK_NOTHROW(plan.check(4));
        plan.sparse_layers = {4};
        CHECK_THROWS_AS(plan.check(4), std::invalid_argument);
        plan.sparse_layers = {1};
        plan.tau = 1.5;
        CHECK_THROWS_AS(plan.check(4), std::invalid_argument);
        plan.tau = 0.005;
        plan.mode = SparseMode::kFixed;
        plan.s_fixed = 1.0;
        CHECK_THROWS_AS(plan.check(4), std::invalid_argument);
    }

    TEST_CASE("forced policies") {
        SparsePlan plan;
        plan.forced = ForcedPolicy::kFinalToken;
        CHECK(plan.forced_set(10) == IndexList{9});
        plan.forced = ForcedPolicy::kRecentWindow;
        plan.last_q = 4;
        CHECK(plan.forced_set(10) == IndexList{6, 7, 8, 9});
        CHECK(plan.forced_set(3) == IndexList{0, 1, 2});
    }
}

TEST_SUITE("forward pass") {
    TEST_CASE("shapes, trace length and stats") {
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 7);
        Rng rng(54);
        const std::vector<int> tokens = random_tokens(rng, 24, cfg.vocab_size);
        const ForwardResult r = model_forward(w, tokens, SparsePlan{});
        CHECK(r.logits.rows() == 24);
        CHECK(r.logits.cols() == cfg.vocab_size);
        REQUIRE(r.hidden_trace.size() == static_cast<size_t>(cfg.n_layers) + 1);
        for (const Matrix& h : r.hidden_trace) {
            CHECK(h.rows() == 24);
            CHECK(h.cols() == cfg.d_model);
        }
        REQUIRE(r.stats.size() == static_cast<size_t>(cfg.n_layers));
        for (int l = 0; l < cfg.n_layers; ++l) {
            CHECK(r.stats[static_cast<size_t>(l)].layer == l);
            CHECK_FALSE(r.stats[static_cast<size_t>(l)].sparse);
            CHECK(r.stats[static_cast<size_t>(l)].k_keep == 24);
        }
    }

    TEST_CASE("same seed, same bits; different seed, different logits") {
        const ModelConfig cfg = small_config();
        Rng rng(55);
        const std::vector<int> tokens = random_tokens(rng, 12, cfg.vocab_size);
        const ForwardResult a = model_forward(init_random(cfg, 3), tokens, SparsePlan{});
        const ForwardResult b = model_forward(init_random(cfg, 3), tokens, SparsePlan{});
        const ForwardResult c = model_forward(init_random(cfg, 4), tokens, SparsePlan{});
        CHECK(bitwise_equal(a.logits, b.logits));
        CHECK(max_abs_diff(a.logits, c.logits) > 1e-3);
    }

    TEST_CASE("out-of-vocabulary tokens are rejected") {
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 7);
        CHECK_THROWS_AS(model_forward(w, {0, cfg.vocab_size}, SparsePlan{}),
                        std::invalid_argument);
        CHECK_THROWS_AS(model_forward(w, {-1}, SparsePlan{}), std::invalid_argument);
        CHECK_THROWS_AS(model_forward(w, {}, SparsePlan{}), std::invalid_argument);
    }

    TEST_CASE("tau = 0 dynamic sparse equals dense exactly") {
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 11);
        Rng rng(56);
        const std::vector<int> tokens = random_tokens(rng, 32, cfg.vocab_size);
        SparsePlan plan;
        plan.mode = SparseMode::kDynamic;
        plan.sparse_layers = {0, 1, 2};
        plan.tau = 0.0;
        plan.last_q = 16;
        const ForwardResult dense = model_forward(w, tokens, SparsePlan{});
        const ForwardResult sparse = model_forward(w, tokens, plan);
        CHECK(max_abs_diff(dense.logits, sparse.logits) <= 1e-5);
        for (const LayerStat& st : sparse.stats) {
            CHECK(st.sparse);
            CHECK(st.k_keep == 32);
        }
    }

    TEST_CASE("fixed budget honors the requested ratio") {
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 12);
        Rng rng(57);
        const std::vector<int> tokens = random_tokens(rng, 64, cfg.vocab_size);
        SparsePlan plan;
        plan.mode = SparseMode::kFixed;
        plan.sparse_layers = {1, 2};
        plan.s_fixed = 0.5;
        plan.last_q = 16;
        const ForwardResult r = model_forward(w, tokens, plan);
        CHECK_FALSE(r.stats[0].sparse);
        CHECK(r.stats[0].k_keep == 64);
        for (size_t l : {size_t(1), size_t(2)}) {
            CHECK(r.stats[l].sparse);
            CHECK(r.stats[l].k_keep == 32);
            CHECK_NOTHROW(validate(r.stats[l].selection, 64));
            CHECK(r.stats[l].attn_flops ==
                  doctest::Approx(4.0 * 32 * 32 * cfg.d_head * cfg.n_heads));
        }
    }

    TEST_CASE("dynamic budgets stay within [1, L] and selections validate") {
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 13);
        Rng rng(58);
        const std::vector<int> tokens = random_tokens(rng, 48, cfg.vocab_size);
        SparsePlan plan;
        plan.mode = SparseMode::kDynamic;
        plan.sparse_layers = {0, 2};
        plan.tau = 0.2;
        plan.last_q = 16;
        const ForwardResult r = model_forward(w, tokens, plan);
        for (const LayerStat& st : r.stats) {
            if (!st.sparse) continue;
            CHECK(st.k_keep >= 1);
            CHECK(st.k_keep <= 48);
            CHECK_NOTHROW(validate(st.selection, 48));
            CHECK(st.selection.tau == doctest::Approx(0.2));
        }
    }

    TEST_CASE("layer_forward composes the public primitives") {
        // Rebuild one sparse layer out of score_tokens / coverage_budget /
        // select_tokens / token_sparse_attention and the raw projections, and
        // require bitwise agreement with layer_forward.
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 14);
        Rng rng(59);
        const Matrix x = random_matrix(rng, 20, cfg.d_model, 0.5f);
        SparsePlan plan;
        plan.mode = SparseMode::kDynamic;
        plan.sparse_layers = {0};
        plan.tau = 0.1;
        plan.last_q = 8;
        plan.kernel = 3;
        const Matrix got = layer_forward(x, w.layers[0], cfg, plan, 0);

        const Matrix xn = rms_norm(x, w.layers[0].attn_norm, cfg.norm_eps);
        const HeadTensors heads = project_qkv(xn, w.layers[0], cfg);
        const HeadScores hs = score_tokens(heads, plan.last_q, plan.kernel);
        const IndexList forced = plan.forced_set(20);
        const int k_keep = coverage_budget(aggregate_scores(hs), plan.tau,
                                           std::max(1, static_cast<int>(forced.size())));
        const TokenSelection sel = select_tokens(hs, k_keep, forced);
        const std::vector<Matrix> heads_out = token_sparse_attention(heads, sel);
        Matrix concat(20, cfg.n_heads * cfg.d_head);
        for (int h = 0; h < cfg.n_heads; ++h) {
            concat.middleCols(h * cfg.d_head, cfg.d_head) = heads_out[static_cast<size_t>(h)];
        }
        const Matrix x1 = x + matmul(concat, w.layers[0].wo);
        const Matrix fn = rms_norm(x1, w.layers[0].ffn_norm, cfg.norm_eps);
        const Matrix gate = matmul(fn, w.layers[0].w_gate);
        const Matrix up = matmul(fn, w.layers[0].w_up);
        Matrix act(gate.rows(), gate.cols());
        for (Eigen::Index i = 0; i < gate.rows(); ++i) {
            for (Eigen::Index j = 0; j < gate.cols(); ++j) {
                const Scalar g = gate(i, j);
                act(i, j) = g / (Scalar(1) + std::exp(-g)) * up(i, j);
            }
        }
        const Matrix expect = x1 + matmul(act, w.layers[0].w_down);
        CHECK(bitwise_equal(got, expect));
    }

    TEST_CASE("sparse layer agrees with the hard-masked oracle end to end") {
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 15);
        Rng rng(60);
        const Matrix x = random_matrix(rng, 28, cfg.d_model, 0.5f);
        SparsePlan plan;
        plan.mode = SparseMode::kFixed;
        plan.sparse_layers = {0};
        plan.s_fixed = 0.4;
        plan.last_q = 12;
        LayerStat stat;
        const Matrix got = layer_forward(x, w.layers[0], cfg, plan, 0, &stat);

        const Matrix xn = rms_norm(x, w.layers[0].attn_norm, cfg.norm_eps);
        const HeadTensors heads = project_qkv(xn, w.layers[0], cfg);
        Matrix concat(28, cfg.n_heads * cfg.d_head);
        for (int h = 0; h < cfg.n_heads; ++h) {
            const int kv = heads.kv_head(h);
            concat.middleCols(h * cfg.d_head, cfg.d_head) = masked_sparse_oracle(
                heads.q[static_cast<size_t>(h)], heads.k[static_cast<size_t>(kv)],
                heads.v[static_cast<size_t>(kv)], stat.selection.indices[static_cast<size_t>(h)]);
        }
        const Matrix x1 = x + matmul(concat, w.layers[0].wo);
        const Matrix fn = rms_norm(x1, w.layers[0].ffn_norm, cfg.norm_eps);
        const Matrix gate = matmul(fn, w.layers[0].w_gate);
        const Matrix up = matmul(fn, w.layers[0].w_up);
        Matrix act(gate.rows(), gate.cols());
        for (Eigen::Index i = 0; i < gate.rows(); ++i) {
            for (Eigen::Index j = 0; j < gate.cols(); ++j) {
                const Scalar g = gate(i, j);
                act(i, j) = g / (Scalar(1) + std::exp(-g)) * up(i, j);
            }
        }
        const Matrix expect = x1 + matmul(act, w.layers[0].w_down);
        CHECK(max_abs_diff(got, expect) <= 1e-5);
    }
}

TEST_SUITE("checkpoint") {
    TEST_CASE("round-trip reproduces every tensor bitwise") {
        const ModelConfig cfg = small_config();
        const ModelWeights w = init_random(cfg, 21);
        TempFile f("ckpt_roundtrip.bin");
        save_checkpoint(w, f.path);
        const ModelWeights r = load_checkpoint(f.path);
        CHECK(r.config.n_layers == cfg.n_layers);
        CHECK(r.config.vocab_size == cfg.vocab_size);
        CHECK(bitwise_equal(r.tok_embed, w.tok_embed));
        CHECK(bitwise_equal(r.lm_head, w.lm_head));
        CHECK(bitwise_equal(Matrix(r.final_norm.transpose()),
                            Matrix(w.final_norm.transpose())));
        REQUIRE(r.layers.size() == w.layers.size());
        for (size_t l = 0; l < w.layers.size(); ++l) {
            CHECK(bitwise_equal(r.layers[l].wq, w.layers[l].wq));
            CHECK(bitwise_equal(r.layers[l].wk, w.layers[l].wk));
            CHECK(bitwise_equal(r.layers[l].wv, w.layers[l].wv));
            CHECK(bitwise_equal(r.layers[l].wo, w.layers[l].wo));
            CHECK(bitwise_equal(r.layers[l].w_gate, w.layers[l].w_gate));
            CHECK(bitwise_equal(r.layers[l].w_up, w.layers[l].w_up));
            CHECK(bitwise_equal(r.layers[l].w_down, w.layers[l].w_down));
            CHECK(bitwise_equal(Matrix(r.layers[l].attn_norm.transpose()),
                                Matrix(w.layers[l].attn_norm.transpose())));
            CHECK(bitwise_equal(Matrix(r.layers[l].ffn_norm.transpose()),
                                Matrix(w.layers[l].ffn_norm.transpose())));
        }
        // and the loaded model computes identical logits
        Rng rng(61);
        const std::vector<int> tokens = random_tokens(rng, 16, cfg.vocab_size);
        CHECK(bitwise_equal(model_forward(w, tokens, SparsePlan{}).logits,
                            model_forward(r, tokens, SparsePlan{}).logits));
    }

    TEST_CASE("corrupted magic is rejected") {
        const ModelWeights w = init_random(small_config(), 22);
        TempFile f("ckpt_magic.bin");
        save_checkpoint(w, f.path);
        std::fstream s(f.path, std::ios::in | std::ios::out | std::ios::binary);
        s.seekp(0);
        s.write("XXXXXXXX", 8);
        s.close();
        CHECK_THROWS_AS(load_checkpoint(f.path), std::runtime_error);
    }

    TEST_CASE("truncated payload is rejected") {
        const ModelWeights w = init_random(small_config(), 23);
        TempFile f("ckpt_trunc.bin");
        save_checkpoint(w, f.path);
        std::ifstream in(f.path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 64));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(f.path), std::runtime_error);
    }

    TEST_CASE("missing tensor is rejected") {
        const ModelWeights w = init_random(small_config(), 24);
        TempFile f("ckpt_missing.bin");
        save_checkpoint(w, f.path);
        std::ifstream in(f.path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        // Rename "lm_head" inside the manifest; byte length is unchanged so
        // offsets stay valid, but the expected tensor disappears.
        const size_t pos = bytes.find("lm_head");
        REQUIRE(pos != std::string::npos);
        bytes[pos + 6] = 'X';
        std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(f.path), std::runtime_error);
    }

    TEST_CASE("nonexistent path is rejected") {
        CHECK_THROWS_AS(load_checkpoint("./no_such_checkpoint.bin"), std::runtime_error);
    }
}
