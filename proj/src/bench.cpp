// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "tsa/attention.hpp"
#include "tsa/random.hpp"
#include "tsa/token_coverage.hpp"

namespace tsa {

namespace {

using nlohmann::json;

constexpr double kEquivGate = 1e-5;

// Stream separation: each consumer derives its own seed so adding a command
// never shifts another command's random draws.
uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

ModelWeights model_for(const RunConfig& cfg) {
    if (!cfg.checkpoint.empty()) return load_checkpoint(cfg.checkpoint);
    return init_random(cfg.model, cfg.seed);
}

std::vector<int> random_tokens(Rng& rng, int len, int vocab) {
    std::vector<int> t(static_cast<size_t>(len));
    for (int& x : t) x = rng.below(vocab);
    return t;
}

std::vector<double> default_taus(const RunConfig& cfg) {
    return cfg.taus.empty() ? std::vector<double>{0.005, 0.01} : cfg.taus;
}

std::vector<int> default_seq_lens(const RunConfig& cfg) {
    return cfg.seq_lens.empty() ? std::vector<int>{cfg.seq_len} : cfg.seq_lens;
}

SparsePlan plan_for(const RunConfig& cfg, SparseMode mode, const IndexList& layers, double tau,
                    double s_fixed) {
    SparsePlan p;
    p.mode = mode;
    p.sparse_layers = layers;
    p.tau = tau;
    p.s_fixed = s_fixed;
    p.last_q = cfg.last_q;
    p.kernel = cfg.kernel;
    p.forced = cfg.forced;
    return p;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

json model_json(const ModelConfig& c) {
    return json{{"n_layers", c.n_layers},     {"n_heads", c.n_heads},
                {"n_kv_heads", c.n_kv_heads}, {"d_model", c.d_model},
                {"d_head", c.d_head},         {"d_ff", c.d_ff},
                {"vocab_size", c.vocab_size}, {"rope_theta", c.rope_theta},
                {"norm_eps", c.norm_eps}};
}

json config_json(const RunConfig& cfg) {
    json j;
    j["command"] = cfg.command;
    j["seed"] = cfg.seed;
    j["seq_len"] = cfg.seq_len;
    j["seq_lens"] = default_seq_lens(cfg);
    j["taus"] = default_taus(cfg);
    j["tau"] = cfg.tau;
    j["delta"] = cfg.delta;
    j["epsilon"] = cfg.epsilon;
    j["last_q"] = cfg.last_q;
    j["kernel"] = cfg.kernel;
    j["s_fixed"] = cfg.s_fixed;
    j["trials"] = cfg.trials;
    j["runs"] = cfg.runs;
    j["n_prompts"] = cfg.n_prompts;
    j["weights"] = cfg.checkpoint.empty() ? "random-init" : cfg.checkpoint;
    j["model"] = model_json(cfg.model);
    j["forced"] = cfg.forced == ForcedPolicy::kFinalToken ? "final-token" : "recent-window";
    return j;
}

ReportFormat resolve_format(const RunConfig& cfg, ReportFormat fallback) {
    if (cfg.format.has_value()) return *cfg.format;
    const std::string& p = cfg.out_path;
    if (p.size() >= 4 && p.substr(p.size() - 4) == ".csv") return ReportFormat::kCsv;
    if (p.size() >= 5 && p.substr(p.size() - 5) == ".json") return ReportFormat::kJson;
    return fallback;
}

void csv_config_header(const RunConfig& cfg, std::ostream& out) {
    out << "# config " << config_json(cfg).dump() << "\n";
}

// Average ranks (1-based), ties share their mean rank.
std::vector<double> avg_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&v](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Spearman rho: Pearson correlation of average ranks. 0 when either side is
// constant (no ordering information).
double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const std::vector<double> rx = avg_ranks(x);
    const std::vector<double> ry = avg_ranks(y);
    const size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

json reference_points_sweep() {
    // Published operating points at 128K context used as comparison anchors.
    return json::array({json{{"tau", 0.005}, {"seq_len", 131072}, {"map_sparsity_pct", 54.44}},
                        json{{"tau", 0.01}, {"seq_len", 131072}, {"map_sparsity_pct", 67.36}}});
}

json reference_points_fvd() {
    return json::array(
        {json{{"mode", "fixed"}, {"param", 0.3}, {"map_sparsity_pct", 50.96}, {"speedup", 1.32}},
         json{{"mode", "fixed"}, {"param", 0.5}, {"map_sparsity_pct", 74.95}, {"speedup", 1.57}},
         json{{"mode", "dynamic"}, {"param", 0.005}, {"map_sparsity_pct", 54.44}, {"speedup", 1.36}},
         json{{"mode", "dynamic"}, {"param", 0.01}, {"map_sparsity_pct", 67.36}, {"speedup", 1.51}}});
}

struct SparseRunMetrics {
    double avg_k_keep = 0.0;
    double map_sparsity = 0.0;
    double est_speedup = 0.0;
};

SparseRunMetrics metrics_from_stats(const RunConfig& cfg, int seq_len,
                                    const std::vector<LayerStat>& stats) {
    const FlopReport fr = estimate_flops(seq_len, cfg.model.d_head, cfg.model.n_heads,
                                         budgets_from_stats(stats), cfg.last_q, cfg.kernel);
    SparseRunMetrics m;
    m.map_sparsity = fr.avg_map_sparsity;
    m.est_speedup = fr.est_speedup;
    int n_sparse = 0;
    double k_acc = 0.0;
    for (const LayerStat& st : stats) {
        if (!st.sparse) continue;
        ++n_sparse;
        k_acc += st.k_keep;
    }
    m.avg_k_keep = n_sparse > 0 ? k_acc / n_sparse : static_cast<double>(seq_len);
    return m;
}

}  // namespace

double rel_l2(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("rel_l2: shape mismatch " + shape_str(a) + " vs " +
                                    shape_str(b));
    }
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double d = static_cast<double>(a(i, j)) - b(i, j);
            num += d * d;
            den += static_cast<double>(b(i, j)) * b(i, j);
        }
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num) / std::sqrt(den);
}

std::vector<std::optional<int>> budgets_from_stats(const std::vector<LayerStat>& stats) {
    std::vector<std::optional<int>> budgets;
    budgets.reserve(stats.size());
    for (const LayerStat& st : stats) {
        budgets.push_back(st.sparse ? std::optional<int>(st.k_keep) : std::nullopt);
    }
    return budgets;
}

std::vector<EquivTrial> run_equiv(const RunConfig& cfg) {
    const int grid_l[] = {16, 64, 256};
    const int grid_h[] = {1, 4, 8};
    const int grid_d[] = {8, 16, 32};
    const double grid_tau[] = {0.0, 0.005, 0.1, 0.5, 0.99};
    struct Combo {
        int seq_len, n_heads, d_head;
        double tau;
    };
    std::vector<Combo> grid;
    for (int L : grid_l) {
        for (int H : grid_h) {
            for (int d : grid_d) {
                for (double tau : grid_tau) grid.push_back({L, H, d, tau});
            }
        }
    }
    const size_t n = cfg.trials < 0 ? grid.size() : static_cast<size_t>(cfg.trials);
    std::vector<EquivTrial> trials;
    trials.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const Combo& c = grid[i % grid.size()];
        Rng rng(mix_seed(cfg.seed, 1000 + i));
        HeadTensors heads;
        for (int h = 0; h < c.n_heads; ++h) {
            heads.q.push_back(random_matrix(rng, c.seq_len, c.d_head, Scalar(1)));
            heads.k.push_back(random_matrix(rng, c.seq_len, c.d_head, Scalar(1)));
            heads.v.push_back(random_matrix(rng, c.seq_len, c.d_head, Scalar(1)));
        }
        const HeadScores hs = score_tokens(heads, cfg.last_q, cfg.kernel);
        const IndexList forced = {c.seq_len - 1};
        const int k_keep = coverage_budget(aggregate_scores(hs), c.tau,
                                           static_cast<int>(forced.size()));
        const TokenSelection sel = select_tokens(hs, k_keep, forced);
        const std::vector<Matrix> fast = token_sparse_attention(heads, sel);
        double max_err = 0.0;
        for (int h = 0; h < c.n_heads; ++h) {
            const Matrix oracle =
                masked_sparse_oracle(heads.q[static_cast<size_t>(h)],
                                     heads.k[static_cast<size_t>(h)],
                                     heads.v[static_cast<size_t>(h)], sel.indices[static_cast<size_t>(h)]);
            const double err =
                (fast[static_cast<size_t>(h)] - oracle).array().abs().maxCoeff();
            max_err = std::max(max_err, err);
        }
        trials.push_back({c.seq_len, c.n_heads, c.d_head, c.tau, k_keep, max_err});
    }
    return trials;
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
    const ModelWeights model = model_for(cfg);
    std::vector<SweepRow> rows;
    int len_index = 0;
    for (int L : default_seq_lens(cfg)) {
        Rng prng(mix_seed(cfg.seed, 100 + static_cast<uint64_t>(len_index++)));
        const std::vector<int> tokens = random_tokens(prng, L, model.config.vocab_size);
        const DriftProfile profile =
            calibrate(model, {tokens}, cfg.epsilon, cfg.delta);
        for (double tau : default_taus(cfg)) {
            const SparsePlan plan =
                plan_for(cfg, SparseMode::kDynamic, profile.sparse_layers, tau, 0.0);
            const ForwardResult res = model_forward(model, tokens, plan);
            const SparseRunMetrics m = metrics_from_stats(cfg, L, res.stats);
            rows.push_back({tau, L, m.avg_k_keep, m.map_sparsity, m.est_speedup});
        }
    }
    return rows;
}

std::vector<ComparisonRow> run_fixed_vs_dynamic(const RunConfig& cfg) {
    const ModelWeights model = model_for(cfg);
    Rng prng(mix_seed(cfg.seed, 200));
    const std::vector<int> tokens = random_tokens(prng, cfg.seq_len, model.config.vocab_size);
    const DriftProfile profile = calibrate(model, {tokens}, cfg.epsilon, cfg.delta);
    const ForwardResult dense = model_forward(model, tokens, SparsePlan{});
    std::vector<ComparisonRow> rows;
    auto push = [&](SparseMode mode, double param) {
        const SparsePlan plan =
            plan_for(cfg, mode, profile.sparse_layers, mode == SparseMode::kDynamic ? param : 0.0,
                     mode == SparseMode::kFixed ? param : 0.0);
        const ForwardResult res = model_forward(model, tokens, plan);
        const SparseRunMetrics m = metrics_from_stats(cfg, cfg.seq_len, res.stats);
        rows.push_back({mode == SparseMode::kFixed ? "fixed" : "dynamic", param, m.avg_k_keep,
                        m.map_sparsity, m.est_speedup, rel_l2(res.logits, dense.logits)});
    };
    for (double s : cfg.s_fixed) push(SparseMode::kFixed, s);
    for (double tau : default_taus(cfg)) push(SparseMode::kDynamic, tau);
    return rows;
}

DriftProfile run_drift(const RunConfig& cfg) {
    const ModelWeights model = model_for(cfg);
    Rng prng(mix_seed(cfg.seed, 300));
    std::vector<std::vector<int>> prompts;
    for (int p = 0; p < cfg.n_prompts; ++p) {
        prompts.push_back(random_tokens(prng, cfg.seq_len, model.config.vocab_size));
    }
    return calibrate(model, prompts, cfg.epsilon, cfg.delta);
}

TripletReport run_triplet(const RunConfig& cfg) {
    const ModelWeights model = model_for(cfg);
    const int n_layers = model.config.n_layers;
    if (n_layers < 4) {
        throw std::invalid_argument("triplet: need at least 4 layers, model has " +
                                    std::to_string(n_layers));
    }
    Rng prng(mix_seed(cfg.seed, 400));
    const std::vector<int> tokens = random_tokens(prng, cfg.seq_len, model.config.vocab_size);
    const ForwardResult dense = model_forward(model, tokens, SparsePlan{});
    const std::vector<double> R = compute_drift(dense.hidden_trace, cfg.epsilon);
    const DriftProfile profile = select_sparse_layers(R, cfg.delta);

    Rng trng(mix_seed(cfg.seed, 401));
    std::map<std::array<int, 3>, std::pair<double, double>> memo;
    TripletReport report;
    for (int run = 0; run < cfg.runs; ++run) {
        std::array<int, 3> triplet{};
        int filled = 0;
        while (filled < 3) {
            const int l = trng.below(n_layers);
            bool dup = false;
            for (int i = 0; i < filled; ++i) dup = dup || triplet[static_cast<size_t>(i)] == l;
            if (!dup) triplet[static_cast<size_t>(filled++)] = l;
        }
        std::sort(triplet.begin(), triplet.end());
        auto it = memo.find(triplet);
        if (it == memo.end()) {
            const IndexList layers(triplet.begin(), triplet.end());
            const ForwardResult sparse = model_forward(
                model, tokens, plan_for(cfg, SparseMode::kDynamic, layers, cfg.tau, 0.0));
            const ForwardResult control = model_forward(
                model, tokens, plan_for(cfg, SparseMode::kDynamic, layers, 0.0, 0.0));
            const double dev = rel_l2(sparse.hidden_trace.back(), dense.hidden_trace.back());
            const double dev0 = rel_l2(control.hidden_trace.back(), dense.hidden_trace.back());
            it = memo.emplace(triplet, std::make_pair(dev, dev0)).first;
        }
        TripletRow row;
        row.run = run;
        row.layers = triplet;
        for (int l : triplet) {
            row.mean_drift += R[static_cast<size_t>(l)] / 3.0;
            row.mean_drift_rank += profile.R_hat[static_cast<size_t>(l)] / 3.0;
        }
        row.deviation = it->second.first;
        row.deviation_tau0 = it->second.second;
        report.rows.push_back(row);
    }
    std::vector<double> xs, ys;
    for (const TripletRow& r : report.rows) {
        xs.push_back(r.mean_drift);
        ys.push_back(r.deviation);
    }
    report.rank_correlation = report.rows.empty() ? 0.0 : spearman(xs, ys);
    return report;
}

int cmd_equiv(const RunConfig& cfg, std::ostream& out) {
    const std::vector<EquivTrial> trials = run_equiv(cfg);
    if (trials.empty()) {
        std::cerr << "tsa equiv: warning: no trials requested, report is empty\n";
    }
    double max_err = 0.0;
    for (const EquivTrial& t : trials) max_err = std::max(max_err, t.max_abs_err);
    const bool pass = max_err <= kEquivGate;
    if (resolve_format(cfg, ReportFormat::kJson) == ReportFormat::kCsv) {
        csv_config_header(cfg, out);
        out << "seq_len,n_heads,d_head,tau,k_keep,max_abs_err\n";
        for (const EquivTrial& t : trials) {
            out << t.seq_len << "," << t.n_heads << "," << t.d_head << "," << fmt(t.tau) << ","
                << t.k_keep << "," << fmt(t.max_abs_err) << "\n";
        }
        out << "# max_abs_err " << fmt(max_err) << "\n";
        out << "# pass " << (pass ? "true" : "false") << "\n";
    } else {
        json j;
        j["command"] = "equiv";
        j["config"] = config_json(cfg);
        j["trials"] = json::array();
        for (const EquivTrial& t : trials) {
            j["trials"].push_back(json{{"seq_len", t.seq_len},
                                       {"n_heads", t.n_heads},
                                       {"d_head", t.d_head},
                                       {"tau", t.tau},
                                       {"k_keep", t.k_keep},
                                       {"max_abs_err", t.max_abs_err}});
        }
        j["max_abs_err"] = max_err;
        j["threshold"] = kEquivGate;
        j["pass"] = pass;
        out << j.dump(2) << "\n";
    }
    return pass ? 0 : 2;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
    const std::vector<SweepRow> rows = run_sweep(cfg);
    if (resolve_format(cfg, ReportFormat::kCsv) == ReportFormat::kCsv) {
        csv_config_header(cfg, out);
        out << "# reference " << reference_points_sweep().dump() << "\n";
        out << "tau,seq_len,avg_k_keep,map_sparsity,est_speedup\n";
        for (const SweepRow& r : rows) {
            out << fmt(r.tau) << "," << r.seq_len << "," << fmt(r.avg_k_keep) << ","
                << fmt(r.map_sparsity) << "," << fmt(r.est_speedup) << "\n";
        }
    } else {
        json j;
        j["command"] = "sweep";
        j["config"] = config_json(cfg);
        j["reference_points"] = reference_points_sweep();
        j["rows"] = json::array();
        for (const SweepRow& r : rows) {
            j["rows"].push_back(json{{"tau", r.tau},
                                     {"seq_len", r.seq_len},
                                     {"avg_k_keep", r.avg_k_keep},
                                     {"map_sparsity", r.map_sparsity},
                                     {"est_speedup", r.est_speedup}});
        }
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_fixed_vs_dynamic(const RunConfig& cfg, std::ostream& out) {
    const std::vector<ComparisonRow> rows = run_fixed_vs_dynamic(cfg);
    if (resolve_format(cfg, ReportFormat::kCsv) == ReportFormat::kCsv) {
        csv_config_header(cfg, out);
        out << "# reference " << reference_points_fvd().dump() << "\n";
        out << "mode,param,avg_k_keep,map_sparsity,est_speedup,output_deviation\n";
        for (const ComparisonRow& r : rows) {
            out << r.mode << "," << fmt(r.param) << "," << fmt(r.avg_k_keep) << ","
                << fmt(r.map_sparsity) << "," << fmt(r.est_speedup) << ","
                << fmt(r.output_deviation) << "\n";
        }
    } else {
        json j;
        j["command"] = "fixed-vs-dynamic";
        j["config"] = config_json(cfg);
        j["reference_points"] = reference_points_fvd();
        j["rows"] = json::array();
        for (const ComparisonRow& r : rows) {
            j["rows"].push_back(json{{"mode", r.mode},
                                     {"param", r.param},
                                     {"avg_k_keep", r.avg_k_keep},
                                     {"map_sparsity", r.map_sparsity},
                                     {"est_speedup", r.est_speedup},
                                     {"output_deviation", r.output_deviation}});
        }
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_drift(const RunConfig& cfg, std::ostream& out) {
    const DriftProfile p = run_drift(cfg);
    if (resolve_format(cfg, ReportFormat::kJson) == ReportFormat::kCsv) {
        csv_config_header(cfg, out);
        out << "layer,R,R_hat,sparse\n";
        for (size_t l = 0; l < p.R.size(); ++l) {
            const bool sparse = std::find(p.sparse_layers.begin(), p.sparse_layers.end(),
                                          static_cast<int>(l)) != p.sparse_layers.end();
            out << l << "," << fmt(p.R[l]) << "," << fmt(p.R_hat[l]) << "," << (sparse ? 1 : 0)
                << "\n";
        }
    } else {
        json j;
        j["R"] = p.R;
        j["R_hat"] = p.R_hat;
        j["delta"] = p.delta;
        j["sparse_layers"] = p.sparse_layers;
        j["command"] = "drift";
        j["config"] = config_json(cfg);
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_triplet(const RunConfig& cfg, std::ostream& out) {
    const TripletReport report = run_triplet(cfg);
    if (resolve_format(cfg, ReportFormat::kCsv) == ReportFormat::kCsv) {
        csv_config_header(cfg, out);
        out << "run,layer0,layer1,layer2,mean_drift,mean_drift_rank,deviation,deviation_tau0\n";
        for (const TripletRow& r : report.rows) {
            out << r.run << "," << r.layers[0] << "," << r.layers[1] << "," << r.layers[2] << ","
                << fmt(r.mean_drift) << "," << fmt(r.mean_drift_rank) << "," << fmt(r.deviation)
                << "," << fmt(r.deviation_tau0) << "\n";
        }
        out << "# rank_correlation " << fmt(report.rank_correlation) << "\n";
    } else {
        json j;
        j["command"] = "triplet";
        j["config"] = config_json(cfg);
        j["rows"] = json::array();
        for (const TripletRow& r : report.rows) {
            j["rows"].push_back(json{{"run", r.run},
                                     {"layers", r.layers},
                                     {"mean_drift", r.mean_drift},
                                     {"mean_drift_rank", r.mean_drift_rank},
                                     {"deviation", r.deviation},
                                     {"deviation_tau0", r.deviation_tau0}});
        }
        j["rank_correlation"] = report.rank_correlation;
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_flops(const RunConfig& cfg, std::ostream& out) {
    const int k = cfg.flops_k_keep > 0 ? cfg.flops_k_keep : cfg.seq_len / 2;
    IndexList sparse = cfg.flops_sparse_layers;
    if (sparse.empty()) {
        for (int l = 0; l < cfg.model.n_layers; ++l) sparse.push_back(l);
    }
    std::vector<std::optional<int>> budgets(static_cast<size_t>(cfg.model.n_layers), std::nullopt);
    for (int l : sparse) {
        if (l < 0 || l >= cfg.model.n_layers) {
            throw std::invalid_argument("flops: sparse layer " + std::to_string(l) +
                                        " outside [0, " + std::to_string(cfg.model.n_layers) +
                                        ")");
        }
        budgets[static_cast<size_t>(l)] = k;
    }
    const FlopReport r = estimate_flops(cfg.seq_len, cfg.model.d_head, cfg.model.n_heads, budgets,
                                        cfg.last_q, cfg.kernel);
    if (resolve_format(cfg, ReportFormat::kJson) == ReportFormat::kCsv) {
        csv_config_header(cfg, out);
        out << "dense_flops,sparse_flops,overhead_flops,est_speedup,attn_ratio,avg_map_sparsity\n";
        out << fmt(r.dense_flops) << "," << fmt(r.sparse_flops) << "," << fmt(r.overhead_flops)
            << "," << fmt(r.est_speedup) << "," << fmt(r.attn_ratio) << ","
            << fmt(r.avg_map_sparsity) << "\n";
    } else {
        json j;
        j["command"] = "flops";
        j["config"] = config_json(cfg);
        j["k_keep"] = k;
        j["dense_flops"] = r.dense_flops;
        j["sparse_flops"] = r.sparse_flops;
        j["overhead_flops"] = r.overhead_flops;
        j["est_speedup"] = r.est_speedup;
        j["attn_ratio"] = r.attn_ratio;
        j["avg_map_sparsity"] = r.avg_map_sparsity;
        j["map_sparsity"] = r.map_sparsity;
        out << j.dump(2) << "\n";
    }
    return 0;
}

int run_command(const RunConfig& cfg) {
    std::ofstream file;
    if (!cfg.out_path.empty()) {
        file.open(cfg.out_path, std::ios::trunc);
        if (!file) throw std::runtime_error("cannot open output file " + cfg.out_path);
    }
    std::ostream& out = cfg.out_path.empty() ? std::cout : file;
    if (cfg.command == "equiv") return cmd_equiv(cfg, out);
    if (cfg.command == "sweep") return cmd_sweep(cfg, out);
    if (cfg.command == "fixed-vs-dynamic") return cmd_fixed_vs_dynamic(cfg, out);
    if (cfg.command == "drift") return cmd_drift(cfg, out);
    if (cfg.command == "triplet") return cmd_triplet(cfg, out);
    if (cfg.command == "flops") return cmd_flops(cfg, out);
    throw std::invalid_argument("unknown command '" + cfg.command + "'");
}

}  // namespace tsa
