// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tsa/bench.hpp"
#include "tsa/random.hpp"
#include "util.hpp"

using namespace tsa;

TEST_SUITE("estimate_flops") {
    TEST_CASE("half budget gives an attention ratio of exactly 4") {
        const FlopReport r = estimate_flops(256, 16, 8, {128, 128, 128, 128}, 64, 7);
        CHECK(r.attn_ratio == 4.0);
        CHECK(r.map_sparsity.size() == 4);
        for (double m : r.map_sparsity) CHECK(m == 0.75);
        CHECK(r.avg_map_sparsity == 0.75);
        CHECK(r.est_speedup > 1.0);
        CHECK(r.est_speedup < 4.0);  // overhead keeps it below the pure ratio
    }

    TEST_CASE("hand-checked single layer, single head") {
        // L=8, d=2, k=4, last_q=4, kernel=1:
        //   dense    = 4 * 64 * 2        = 512
        //   sparse   = 4 * 16 * 2        = 128
        //   overhead = 2*4*8*2 + 8*(1+3) + 6*4*2 + 8*2 = 128 + 32 + 48 + 16 = 224
        const FlopReport r = estimate_flops(8, 2, 1, {4}, 4, 1);
        CHECK(r.dense_flops == 512.0);
        CHECK(r.sparse_flops == 128.0);
        CHECK(r.overhead_flops == 224.0);
        CHECK(r.attn_ratio == 4.0);
        CHECK(r.est_speedup == doctest::Approx(512.0 / 352.0).epsilon(1e-12));
        CHECK(r.map_sparsity[0] == 0.75);
    }

    TEST_CASE("full budget cannot speed anything up") {
        const FlopReport r = estimate_flops(128, 16, 4, {128, 128}, 64, 7);
        CHECK(r.attn_ratio == 1.0);
        CHECK(r.est_speedup < 1.0);
        for (double m : r.map_sparsity) CHECK(m == 0.0);
    }

    TEST_CASE("speedup decreases monotonically as budgets grow") {
        double prev = 1e300;
        for (int k = 8; k <= 256; k += 8) {
            const FlopReport r = estimate_flops(256, 16, 8, {k, k, k, k}, 64, 7);
            CHECK(r.est_speedup < prev);
            prev = r.est_speedup;
        }
    }

    TEST_CASE("dense layers contribute equally to both sides") {
        const FlopReport sparse_only = estimate_flops(128, 16, 4, {64}, 32, 7);
        const FlopReport mixed = estimate_flops(128, 16, 4, {64, std::nullopt}, 32, 7);
        const double dense_layer = 4.0 * 128 * 128 * 16 * 4;
        CHECK(mixed.dense_flops == sparse_only.dense_flops + dense_layer);
        CHECK(mixed.sparse_flops == sparse_only.sparse_flops + dense_layer);
        CHECK(mixed.overhead_flops == sparse_only.overhead_flops);
        CHECK(mixed.map_sparsity.size() == 1);  // dense layers carry no entry
        CHECK(mixed.est_speedup < sparse_only.est_speedup);
    }

    TEST_CASE("all-dense plan is exactly neutral") {
        const FlopReport r = estimate_flops(64, 8, 2, {std::nullopt, std::nullopt}, 16, 7);
        CHECK(r.dense_flops == r.sparse_flops);
        CHECK(r.overhead_flops == 0.0);
        CHECK(r.est_speedup == 1.0);
        CHECK(r.attn_ratio == 1.0);
        CHECK(r.map_sparsity.empty());
        CHECK(r.avg_map_sparsity == 0.0);
    }

    TEST_CASE("rejects invalid dimensions and budgets") {
        CHECK_THROWS_AS(estimate_flops(0, 16, 4, {8}, 16, 7), std::invalid_argument);
        CHECK_THROWS_AS(estimate_flops(64, 0, 4, {8}, 16, 7), std::invalid_argument);
        CHECK_THROWS_AS(estimate_flops(64, 16, 4, {0}, 16, 7), std::invalid_argument);
        CHECK_THROWS_AS(estimate_flops(64, 16, 4, {65}, 16, 7), std::invalid_argument);
    }

    TEST_CASE("zero-layer plan reduces to the neutral report") {
        const FlopReport r = estimate_flops(64, 16, 4, {}, 16, 7);
        CHECK(r.dense_flops == 0.0);
        CHECK(r.est_speedup == 1.0);
        CHECK(r.attn_ratio == 1.0);
    }
}

TEST_SUITE("rel_l2") {
    TEST_CASE("identical matrices give zero") {
        Rng rng(80);
        const Matrix a = random_matrix(rng, 5, 7, 1.0f);
        CHECK(rel_l2(a, a) == 0.0);
    }

    TEST_CASE("hand value") {
        Matrix a(1, 2), b(1, 2);
        a << 3.0f, 4.0f;
        b << 0.0f, 0.0f;
        // |a - b| = 5, |b| = 0: degenerate denominator falls back to |a - b|
        CHECK(rel_l2(a, b) == doctest::Approx(5.0).epsilon(1e-12));
        // |b - a| = 5 against |a| = 5
        CHECK(rel_l2(b, a) == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("scale invariance in the reference") {
        Rng rng(81);
        const Matrix b = random_matrix(rng, 6, 6, 1.0f);
        const Matrix a = b * 1.25f;
        CHECK(rel_l2(a, b) == doctest::Approx(0.25).epsilon(1e-5));
    }
}

TEST_SUITE("run_equiv") {
    TEST_CASE("full grid covers every combination once") {
        RunConfig cfg;
        cfg.seed = 42;
        cfg.trials = -1;
        const std::vector<EquivTrial> trials = run_equiv(cfg);
        CHECK(trials.size() == 135);  // 3 lengths x 3 head counts x 3 dims x 5 taus
        for (const EquivTrial& t : trials) {
            CHECK(t.max_abs_err <= 1e-5);
            CHECK(t.k_keep >= 1);
            CHECK(t.k_keep <= t.seq_len);
        }
    }

    TEST_CASE("tau = 0 trials keep the full sequence") {
        RunConfig cfg;
        cfg.seed = 43;
        cfg.trials = 27;  // first tau stripe of the grid is tau = 0
        const std::vector<EquivTrial> trials = run_equiv(cfg);
        for (const EquivTrial& t : trials) {
            if (t.tau == 0.0) {
                CHECK(t.k_keep == t.seq_len);
                CHECK(t.max_abs_err == 0.0);
            }
        }
    }

    TEST_CASE("explicit trial counts cycle the grid") {
        RunConfig cfg;
        cfg.seed = 44;
        cfg.trials = 5;
        CHECK(run_equiv(cfg).size() == 5);
        cfg.trials = 0;
        CHECK(run_equiv(cfg).empty());
    }

    TEST_CASE("deterministic for a fixed seed") {
        RunConfig cfg;
        cfg.seed = 45;
        cfg.trials = 10;
        const std::vector<EquivTrial> a = run_equiv(cfg);
        const std::vector<EquivTrial> b = run_equiv(cfg);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].max_abs_err == b[i].max_abs_err);
            CHECK(a[i].k_keep == b[i].k_keep);
        }
    }
}

TEST_SUITE("reports") {
    TEST_CASE("cmd_equiv emits byte-identical output for equal configs") {
        RunConfig cfg;
        cfg.command = "equiv";
        cfg.seed = 46;
        cfg.trials = 6;
        std::ostringstream a, b;
        CHECK(cmd_equiv(cfg, a) == 0);
        CHECK(cmd_equiv(cfg, b) == 0);
        CHECK(a.str() == b.str());
        CHECK(a.str().find("\"command\": \"equiv\"") != std::string::npos);
        CHECK(a.str().find("max_abs_err") != std::string::npos);
    }

    TEST_CASE("cmd_flops defaults to a half budget over all layers") {
        RunConfig cfg;
        cfg.command = "flops";
        cfg.seq_len = 128;
        std::ostringstream out;
        CHECK(cmd_flops(cfg, out) == 0);
        CHECK(out.str().find("\"attn_ratio\": 4.0") != std::string::npos);
    }

    TEST_CASE("csv format produces a config header and column row") {
        RunConfig cfg;
        cfg.command = "flops";
        cfg.seq_len = 64;
        cfg.format = ReportFormat::kCsv;
        std::ostringstream out;
        CHECK(cmd_flops(cfg, out) == 0);
        const std::string s = out.str();
        CHECK(s.rfind("# config ", 0) == 0);
        CHECK(s.find("dense_flops") != std::string::npos);
    }

    TEST_CASE("run_command rejects unknown commands") {
        RunConfig cfg;
        cfg.command = "frobnicate";
        CHECK_THROWS_AS(run_command(cfg), std::invalid_argument);
    }
}

TEST_SUITE("model-level pipelines") {
    // Small model keeps these integration-ish checks fast.
    static RunConfig small_cfg(const char* command) {
        RunConfig cfg;
        cfg.command = command;
        cfg.seed = 47;
        cfg.model.n_layers = 4;
        cfg.model.n_heads = 4;
        cfg.model.n_kv_heads = 2;
        cfg.model.d_head = 8;
        cfg.model.d_model = 32;
        cfg.model.d_ff = 64;
        cfg.model.vocab_size = 64;
        cfg.seq_len = 48;
        cfg.seq_lens = {48};
        cfg.last_q = 16;
        cfg.kernel = 3;
        return cfg;
    }

    TEST_CASE("sweep: avg_k_keep shrinks and speedup grows with tau") {
        RunConfig cfg = small_cfg("sweep");
        cfg.taus = {0.0, 0.05, 0.2, 0.5};
        const std::vector<SweepRow> rows = run_sweep(cfg);
        REQUIRE(rows.size() == 4);
        for (size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].avg_k_keep <= rows[i - 1].avg_k_keep);
            CHECK(rows[i].map_sparsity >= rows[i - 1].map_sparsity);
            CHECK(rows[i].est_speedup >= rows[i - 1].est_speedup);
        }
        CHECK(rows[0].avg_k_keep == 48.0);  // tau = 0 keeps everything
    }

    TEST_CASE("fixed-vs-dynamic: dense-equal dynamic row has zero deviation") {
        RunConfig cfg = small_cfg("fixed-vs-dynamic");
        cfg.taus = {0.0, 0.1};
        cfg.s_fixed = {0.5};
        const std::vector<ComparisonRow> rows = run_fixed_vs_dynamic(cfg);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].mode == "fixed");
        CHECK(rows[0].param == 0.5);
        CHECK(rows[0].avg_k_keep == 24.0);
        CHECK(rows[0].map_sparsity == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(rows[0].output_deviation > 0.0);
        CHECK(rows[1].mode == "dynamic");
        CHECK(rows[1].param == 0.0);
        CHECK(rows[1].output_deviation <= 1e-6);
        CHECK(rows[2].param == 0.1);
        CHECK(rows[2].output_deviation >= rows[1].output_deviation);
    }

    TEST_CASE("drift profile from the bench pipeline is well-formed") {
        RunConfig cfg = small_cfg("drift");
        cfg.n_prompts = 2;
        const DriftProfile p = run_drift(cfg);
        REQUIRE(p.R.size() == 4);
        REQUIRE(p.R_hat.size() == 4);
        for (double rh : p.R_hat) {
            CHECK(rh >= 0.25);
            CHECK(rh <= 1.0);
        }
        for (int l : p.sparse_layers) {
            CHECK(p.R_hat[static_cast<size_t>(l)] <= 0.5);
        }
    }

    TEST_CASE("triplet: control column is identically zero, correlation in range") {
        RunConfig cfg = small_cfg("triplet");
        cfg.runs = 12;
        cfg.tau = 0.99;
        const TripletReport rep = run_triplet(cfg);
        REQUIRE(rep.rows.size() == 12);
        CHECK(rep.rank_correlation >= -1.0);
        CHECK(rep.rank_correlation <= 1.0);
        for (const TripletRow& row : rep.rows) {
            CHECK(row.deviation_tau0 == 0.0);
            CHECK(row.deviation >= 0.0);
            CHECK(std::isfinite(row.mean_drift));
            CHECK(row.layers[0] < row.layers[1]);
            CHECK(row.layers[1] < row.layers[2]);
            CHECK(row.layers[2] < 4);
            CHECK(row.layers[0] >= 0);
        }
    }

    TEST_CASE("triplet requires at least four layers") {
        RunConfig cfg = small_cfg("triplet");
        cfg.model.n_layers = 3;
        CHECK_THROWS_AS(run_triplet(cfg), std::invalid_argument);
    }
}
