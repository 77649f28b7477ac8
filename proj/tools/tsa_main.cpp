// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0
//
// tsa — Token Sparse Attention bench harness.
//
//   tsa <equiv|sweep|fixed-vs-dynamic|drift|triplet|flops> [options]
//
// Exit codes: 0 success, 1 bad configuration or I/O failure, 2 failed
// acceptance gate (equiv trials above tolerance).

#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsa/bench.hpp"

namespace {

using nlohmann::json;

// Values from --config land in cfg before the flag pass, so explicit flags
// always win over the file and the file wins over built-in defaults.
struct CliState {
    tsa::RunConfig cfg;
    std::vector<double> taus;
    bool tau_given = false;
    std::string format;
    bool random_init = false;
};

void apply_config_file(const std::string& path, CliState& st) {
    std::ifstream f(path);
    if (!f) throw CLI::ValidationError("--config", "cannot open " + path);
    json j;
    try {
        j = json::parse(f, nullptr, true, true);  // allow // comments
    } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", std::string("parse error: ") + e.what());
    }
    tsa::RunConfig& c = st.cfg;
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("seq_len")) c.seq_len = j["seq_len"].get<int>();
    if (j.contains("seq_lens")) c.seq_lens = j["seq_lens"].get<std::vector<int>>();
    if (j.contains("tau")) {
        c.tau = j["tau"].get<double>();
        c.taus = {c.tau};
        st.tau_given = true;
    }
    if (j.contains("taus")) {
        c.taus = j["taus"].get<std::vector<double>>();
        if (!c.taus.empty()) c.tau = c.taus.front();
        st.tau_given = true;
    }
    if (j.contains("delta")) c.delta = j["delta"].get<double>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("last_q")) c.last_q = j["last_q"].get<int>();
    if (j.contains("kernel")) c.kernel = j["kernel"].get<int>();
    if (j.contains("s_fixed")) c.s_fixed = j["s_fixed"].get<std::vector<double>>();
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("runs")) c.runs = j["runs"].get<int>();
    if (j.contains("n_prompts")) c.n_prompts = j["n_prompts"].get<int>();
    if (j.contains("checkpoint")) c.checkpoint = j["checkpoint"].get<std::string>();
    if (j.contains("out")) c.out_path = j["out"].get<std::string>();
    if (j.contains("format")) st.format = j["format"].get<std::string>();
    if (j.contains("forced")) {
        const std::string f_str = j["forced"].get<std::string>();
        if (f_str == "final-token") {
            c.forced = tsa::ForcedPolicy::kFinalToken;
        } else if (f_str == "recent-window") {
            c.forced = tsa::ForcedPolicy::kRecentWindow;
        } else {
            throw CLI::ValidationError("--config", "unknown forced policy '" + f_str + "'");
        }
    }
    if (j.contains("k_keep")) c.flops_k_keep = j["k_keep"].get<int>();
    if (j.contains("sparse_layers")) {
        c.flops_sparse_layers = j["sparse_layers"].get<tsa::IndexList>();
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        tsa::ModelConfig& mc = c.model;
        if (m.contains("n_layers")) mc.n_layers = m["n_layers"].get<int>();
        if (m.contains("n_heads")) mc.n_heads = m["n_heads"].get<int>();
        if (m.contains("n_kv_heads")) mc.n_kv_heads = m["n_kv_heads"].get<int>();
        if (m.contains("d_head")) mc.d_head = m["d_head"].get<int>();
        if (m.contains("d_ff")) mc.d_ff = m["d_ff"].get<int>();
        if (m.contains("vocab_size")) mc.vocab_size = m["vocab_size"].get<int>();
        if (m.contains("rope_theta")) mc.rope_theta = m["rope_theta"].get<float>();
        if (m.contains("norm_eps")) mc.norm_eps = m["norm_eps"].get<float>();
    }
}

void add_common_options(CLI::App* sub, CliState& st) {
    tsa::RunConfig& c = st.cfg;
    sub->add_option("--tau", st.taus, "Coverage threshold(s) in [0,1]");
    sub->add_option("--delta", c.delta, "Drift rank threshold")->capture_default_str();
    sub->add_option("--epsilon", c.epsilon, "Drift denominator guard")->capture_default_str();
    sub->add_option("--last-q", c.last_q, "Scoring observation window")->capture_default_str();
    sub->add_option("--kernel", c.kernel, "Score pooling width (odd)")->capture_default_str();
    sub->add_option("--seq-len", c.seq_lens, "Sequence length(s)");
    sub->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
    sub->add_option("--s", c.s_fixed, "Fixed sparsity ratio(s) in [0,1)");
    sub->add_option("--trials", c.trials, "Equivalence trial count (-1 = full grid)");
    sub->add_option("--runs", c.runs, "Triplet run count")->capture_default_str();
    sub->add_option("--prompts", c.n_prompts, "Calibration prompt count")->capture_default_str();
    auto* ckpt = sub->add_option("--checkpoint", c.checkpoint, "Checkpoint file to load");
    sub->add_flag("--random-init", st.random_init, "Use seeded random weights (default)")
        ->excludes(ckpt);
    sub->add_option("--out", c.out_path, "Report path (.json/.csv; default stdout)");
    sub->add_option("--format", st.format, "Report format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--k-keep", c.flops_k_keep, "FLOP model tokens kept per sparse layer");
    sub->add_option("--sparse-layers", c.flops_sparse_layers, "FLOP model sparse layer indices");
    sub->add_option("--n-layers", c.model.n_layers, "Model depth")->capture_default_str();
    sub->add_option("--n-heads", c.model.n_heads, "Query heads")->capture_default_str();
    sub->add_option("--n-kv-heads", c.model.n_kv_heads, "KV heads")->capture_default_str();
    sub->add_option("--d-head", c.model.d_head, "Head dimension")->capture_default_str();
    sub->add_option("--d-ff", c.model.d_ff, "Feed-forward width")->capture_default_str();
    sub->add_option("--vocab-size", c.model.vocab_size, "Vocabulary size")
        ->capture_default_str();
    sub->add_option("--forced-policy",
                    [&c](const std::vector<std::string>& vals) {
                        if (vals[0] == "final-token") {
                            c.forced = tsa::ForcedPolicy::kFinalToken;
                        } else if (vals[0] == "recent-window") {
                            c.forced = tsa::ForcedPolicy::kRecentWindow;
                        } else {
                            return false;
                        }
                        return true;
                    },
                    "Force-kept tokens: final-token or recent-window");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Token Sparse Attention bench harness"};
    app.require_subcommand(1);

    CliState st;
    std::string config_path;

    // The config file must be applied before CLI11 binds flag values, so it
    // is pulled out of argv by hand first.
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        for (size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config") {
                if (i + 1 >= args.size()) {
                    std::cerr << "tsa: --config requires a path\n";
                    return 1;
                }
                config_path = args[i + 1];
            } else if (args[i].rfind("--config=", 0) == 0) {
                config_path = args[i].substr(9);
            }
        }
        if (!config_path.empty()) apply_config_file(config_path, st);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "tsa: " << e.what() << "\n";
        return 1;
    }

    const std::vector<std::string> commands = {"equiv",  "sweep",   "fixed-vs-dynamic",
                                               "drift",  "triplet", "flops"};
    for (const std::string& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        add_common_options(sub, st);
    }
    app.get_subcommand("equiv")->description("Randomized oracle-equivalence suite");
    app.get_subcommand("sweep")->description("Coverage sweep: sparsity and speedup vs tau");
    app.get_subcommand("fixed-vs-dynamic")->description("Fixed-ratio vs dynamic budgets");
    app.get_subcommand("drift")->description("Inter-layer drift profile and sparse layer set");
    app.get_subcommand("triplet")->description("Random 3-layer sparsification study");
    app.get_subcommand("flops")->description("Standalone FLOP model report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const CLI::App* sub = app.get_subcommands().front();
    st.cfg.command = sub->get_name();
    if (!st.taus.empty()) {
        st.cfg.taus = st.taus;
        st.cfg.tau = st.taus.front();
        st.tau_given = true;
    }
    // The triplet study defaults to near-total sparsification of the chosen
    // layers; every other command keeps the standard default.
    if (st.cfg.command == "triplet" && !st.tau_given) st.cfg.tau = 0.99;
    if (!st.cfg.seq_lens.empty()) st.cfg.seq_len = st.cfg.seq_lens.front();
    if (!st.format.empty()) {
        st.cfg.format = st.format == "csv" ? tsa::ReportFormat::kCsv : tsa::ReportFormat::kJson;
    }
    st.cfg.model.d_model = st.cfg.model.n_heads * st.cfg.model.d_head;

    try {
        return tsa::run_command(st.cfg);
    } catch (const std::invalid_argument& e) {
        std::cerr << "tsa: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "tsa: " << e.what() << "\n";
        return 1;
    }
}
