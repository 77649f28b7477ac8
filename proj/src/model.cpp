// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <type_traits>

#include <json.hpp>

#include "tsa/random.hpp"
#include "tsa/tensor_ops.hpp"
#include "tsa/token_coverage.hpp"

namespace tsa {

void ModelConfig::check() const {
    if (n_layers < 1 || n_heads < 1 || n_kv_heads < 1 || d_model < 1 || d_head < 1 ||
        d_ff < 1 || vocab_size < 1) {
        throw std::invalid_argument("ModelConfig: all dimensions must be positive");
    }
    if (d_model != n_heads * d_head) {
        throw std::invalid_argument("ModelConfig: d_model " + std::to_string(d_model) +
                                    " != n_heads*d_head " + std::to_string(n_heads * d_head));
    }
    if (n_heads % n_kv_heads != 0) {
        throw std::invalid_argument("ModelConfig: n_heads " + std::to_string(n_heads) +
                                    " not divisible by n_kv_heads " + std::to_string(n_kv_heads));
    }
    if (d_head % 2 != 0) {
        throw std::invalid_argument("ModelConfig: d_head " + std::to_string(d_head) +
                                    " must be even for rotary encoding");
    }
    if (!(rope_theta > 0) || !(norm_eps > 0)) {
        throw std::invalid_argument("ModelConfig: rope_theta and norm_eps must be positive");
    }
}

void SparsePlan::check(int n_layers) const {
    if (tau < 0.0 || tau > 1.0) {
        throw std::invalid_argument("SparsePlan: tau " + std::to_string(tau) + " outside [0, 1]");
    }
    if (s_fixed < 0.0 || s_fixed >= 1.0) {
        throw std::invalid_argument("SparsePlan: s_fixed " + std::to_string(s_fixed) +
                                    " outside [0, 1)");
    }
    if (last_q < 1) {
        throw std::invalid_argument("SparsePlan: last_q must be positive");
    }
    if (kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("SparsePlan: kernel must be odd and positive");
    }
    for (int l : sparse_layers) {
        if (l < 0 || l >= n_layers) {
            throw std::invalid_argument("SparsePlan: sparse layer " + std::to_string(l) +
                                        " outside [0, " + std::to_string(n_layers) + ")");
        }
    }
}

bool SparsePlan::is_sparse_layer(int layer) const {
    if (mode == SparseMode::kDense) return false;
    return std::find(sparse_layers.begin(), sparse_layers.end(), layer) != sparse_layers.end();
}

IndexList SparsePlan::forced_set(int seq_len) const {
    if (forced == ForcedPolicy::kFinalToken) return {seq_len - 1};
    IndexList window;
    for (int t = std::max(0, seq_len - last_q); t < seq_len; ++t) window.push_back(t);
    return window;
}

Matrix rms_norm(const Matrix& x, const Vector& gain, Scalar eps) {
    if (gain.size() != x.cols()) {
        throw std::invalid_argument("rms_norm: gain size " + std::to_string(gain.size()) +
                                    " != width of " + shape_str(x));
    }
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Scalar ss = 0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) ss += x(i, j) * x(i, j);
        const Scalar inv = Scalar(1) / std::sqrt(ss / static_cast<Scalar>(x.cols()) + eps);
        for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) * inv * gain(j);
    }
    return out;
}

Matrix apply_rope(const Matrix& x, const IndexList& positions, Scalar theta) {
    if (x.cols() % 2 != 0) {
        throw std::invalid_argument("apply_rope: odd head dimension " + std::to_string(x.cols()));
    }
    if (static_cast<Eigen::Index>(positions.size()) != x.rows()) {
        throw std::invalid_argument("apply_rope: " + std::to_string(positions.size()) +
                                    " positions for " + std::to_string(x.rows()) + " rows");
    }
    const Eigen::Index half = x.cols() / 2;
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index i = 0; i < half; ++i) {
            // Angles in double: float cos/sin at positions in the thousands
            // would cost several digits of rotation accuracy.
            const double freq = std::pow(static_cast<double>(theta),
                                         -2.0 * static_cast<double>(i) /
                                             static_cast<double>(x.cols()));
            const double angle = static_cast<double>(positions[static_cast<size_t>(r)]) * freq;
            const Scalar c = static_cast<Scalar>(std::cos(angle));
            const Scalar s = static_cast<Scalar>(std::sin(angle));
            const Scalar x0 = x(r, 2 * i);
            const Scalar x1 = x(r, 2 * i + 1);
            out(r, 2 * i) = x0 * c - x1 * s;
            out(r, 2 * i + 1) = x0 * s + x1 * c;
        }
    }
    return out;
}

namespace {

std::vector<Matrix> split_heads(const Matrix& proj, int n_heads, int d_head) {
    std::vector<Matrix> heads(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        heads[static_cast<size_t>(h)] = proj.middleCols(h * d_head, d_head);
    }
    return heads;
}

Matrix silu(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            out(i, j) = x(i, j) / (Scalar(1) + std::exp(-x(i, j)));
        }
    }
    return out;
}

}  // namespace

HeadTensors project_qkv(const Matrix& x_norm, const LayerWeights& w, const ModelConfig& cfg) {
    const Eigen::Index seq_len = x_norm.rows();
    IndexList positions(static_cast<size_t>(seq_len));
    std::iota(positions.begin(), positions.end(), 0);
    HeadTensors heads;
    heads.q = split_heads(matmul(x_norm, w.wq), cfg.n_heads, cfg.d_head);
    heads.k = split_heads(matmul(x_norm, w.wk), cfg.n_kv_heads, cfg.d_head);
    heads.v = split_heads(matmul(x_norm, w.wv), cfg.n_kv_heads, cfg.d_head);
    for (Matrix& q : heads.q) q = apply_rope(q, positions, cfg.rope_theta);
    for (Matrix& k : heads.k) k = apply_rope(k, positions, cfg.rope_theta);
    return heads;
}

Matrix layer_forward(const Matrix& x, const LayerWeights& w, const ModelConfig& cfg,
                     const SparsePlan& plan, int layer, LayerStat* stat) {
    const int seq_len = static_cast<int>(x.rows());
    const HeadTensors heads = project_qkv(rms_norm(x, w.attn_norm, cfg.norm_eps), w, cfg);

    LayerStat st;
    st.layer = layer;
    st.sparse = plan.is_sparse_layer(layer);
    std::vector<Matrix> head_out;
    if (st.sparse) {
        const HeadScores hs = score_tokens(heads, plan.last_q, plan.kernel);
        const IndexList forced = plan.forced_set(seq_len);
        const int min_keep = std::max<int>(1, static_cast<int>(forced.size()));
        int k_keep = 0;
        if (plan.mode == SparseMode::kDynamic) {
            k_keep = coverage_budget(aggregate_scores(hs), plan.tau, min_keep);
        } else {
            k_keep = fixed_budget(seq_len, plan.s_fixed, min_keep);
        }
        TokenSelection sel = select_tokens(hs, k_keep, forced);
        sel.tau = plan.mode == SparseMode::kDynamic ? plan.tau : 0.0;
        head_out = token_sparse_attention(heads, sel);
        st.k_keep = k_keep;
        st.selection = std::move(sel);
    } else {
        head_out.resize(static_cast<size_t>(cfg.n_heads));
        for (int h = 0; h < cfg.n_heads; ++h) {
            const int kv = heads.kv_head(h);
            head_out[static_cast<size_t>(h)] =
                dense_causal_attention(heads.q[static_cast<size_t>(h)],
                                       heads.k[static_cast<size_t>(kv)],
                                       heads.v[static_cast<size_t>(kv)]);
        }
        st.k_keep = seq_len;
    }
    st.attn_flops = 4.0 * static_cast<double>(st.k_keep) * st.k_keep * cfg.d_head * cfg.n_heads;

    Matrix cat(seq_len, cfg.n_heads * cfg.d_head);
    for (int h = 0; h < cfg.n_heads; ++h) {
        cat.middleCols(h * cfg.d_head, cfg.d_head) = head_out[static_cast<size_t>(h)];
    }
    Matrix x1 = x + matmul(cat, w.wo);

    const Matrix xn = rms_norm(x1, w.ffn_norm, cfg.norm_eps);
    const Matrix gated = silu(matmul(xn, w.w_gate)).cwiseProduct(matmul(xn, w.w_up));
    Matrix out = x1 + matmul(gated, w.w_down);
    if (stat != nullptr) *stat = std::move(st);
    return out;
}

ForwardResult model_forward(const ModelWeights& model, const std::vector<int>& tokens,
                            const SparsePlan& plan) {
    const ModelConfig& cfg = model.config;
    cfg.check();
    plan.check(cfg.n_layers);
    if (tokens.empty()) {
        throw std::invalid_argument("model_forward: empty token sequence");
    }
    const Eigen::Index seq_len = static_cast<Eigen::Index>(tokens.size());
    Matrix x(seq_len, cfg.d_model);
    for (Eigen::Index t = 0; t < seq_len; ++t) {
        const int tok = tokens[static_cast<size_t>(t)];
        if (tok < 0 || tok >= cfg.vocab_size) {
            throw std::invalid_argument("model_forward: token " + std::to_string(tok) +
                                        " outside vocab [0, " + std::to_string(cfg.vocab_size) +
                                        ")");
        }
        x.row(t) = model.tok_embed.row(tok);
    }

    ForwardResult res;
    res.hidden_trace.reserve(static_cast<size_t>(cfg.n_layers) + 1);
    res.stats.resize(static_cast<size_t>(cfg.n_layers));
    for (int l = 0; l < cfg.n_layers; ++l) {
        res.hidden_trace.push_back(x);
        x = layer_forward(x, model.layers[static_cast<size_t>(l)], cfg, plan, l,
                          &res.stats[static_cast<size_t>(l)]);
    }
    res.hidden_trace.push_back(x);
    res.logits = matmul(rms_norm(x, model.final_norm, cfg.norm_eps), model.lm_head);
    return res;
}

ModelWeights init_random(const ModelConfig& cfg, uint64_t seed) {
    cfg.check();
    Rng rng(seed);
    auto xavier = [&rng](Eigen::Index rows, Eigen::Index cols) {
        const Scalar a = std::sqrt(Scalar(6) / static_cast<Scalar>(rows + cols));
        return random_matrix(rng, rows, cols, a);
    };
    ModelWeights w;
    w.config = cfg;
    w.tok_embed = random_matrix(rng, cfg.vocab_size, cfg.d_model, Scalar(1));
    w.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (LayerWeights& l : w.layers) {
        l.attn_norm = Vector::Ones(cfg.d_model);
        l.wq = xavier(cfg.d_model, cfg.n_heads * cfg.d_head);
        l.wk = xavier(cfg.d_model, cfg.n_kv_heads * cfg.d_head);
        l.wv = xavier(cfg.d_model, cfg.n_kv_heads * cfg.d_head);
        l.wo = xavier(cfg.n_heads * cfg.d_head, cfg.d_model);
        l.ffn_norm = Vector::Ones(cfg.d_model);
        l.w_gate = xavier(cfg.d_model, cfg.d_ff);
        l.w_up = xavier(cfg.d_model, cfg.d_ff);
        l.w_down = xavier(cfg.d_ff, cfg.d_model);
    }
    w.final_norm = Vector::Ones(cfg.d_model);
    w.lm_head = xavier(cfg.d_model, cfg.vocab_size);
    return w;
}

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'T', 'S', 'A', 'C', 'K', 'P', 'T', '1'};

struct TensorRef {
    std::string name;
    std::vector<Eigen::Index> shape;
    const Scalar* data;
    Scalar* mut = nullptr;
    Eigen::Index count() const {
        Eigen::Index n = 1;
        for (Eigen::Index s : shape) n *= s;
        return n;
    }
};

// Canonical tensor order shared by save, load and init.
template <typename W>
std::vector<TensorRef> tensor_table(W& w) {
    std::vector<TensorRef> t;
    auto add = [&t](const std::string& name, auto& m) {
        TensorRef r;
        r.name = name;
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Vector>) {
            r.shape = {m.size()};
        } else {
            r.shape = {m.rows(), m.cols()};
        }
        r.data = m.data();
        if constexpr (!std::is_const_v<W>) r.mut = m.data();
        t.push_back(std::move(r));
    };
    add("tok_embed", w.tok_embed);
    for (size_t l = 0; l < w.layers.size(); ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        add(p + "attn_norm", w.layers[l].attn_norm);
        add(p + "wq", w.layers[l].wq);
        add(p + "wk", w.layers[l].wk);
        add(p + "wv", w.layers[l].wv);
        add(p + "wo", w.layers[l].wo);
        add(p + "ffn_norm", w.layers[l].ffn_norm);
        add(p + "w_gate", w.layers[l].w_gate);
        add(p + "w_up", w.layers[l].w_up);
        add(p + "w_down", w.layers[l].w_down);
    }
    add("final_norm", w.final_norm);
    add("lm_head", w.lm_head);
    return t;
}

json config_json(const ModelConfig& c) {
    return json{{"n_layers", c.n_layers},   {"n_heads", c.n_heads},
                {"n_kv_heads", c.n_kv_heads}, {"d_model", c.d_model},
                {"d_head", c.d_head},       {"d_ff", c.d_ff},
                {"vocab_size", c.vocab_size}, {"rope_theta", c.rope_theta},
                {"norm_eps", c.norm_eps}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_kv_heads = j.at("n_kv_heads").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.d_head = j.at("d_head").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.rope_theta = j.at("rope_theta").get<Scalar>();
    c.norm_eps = j.at("norm_eps").get<Scalar>();
    return c;
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, Scalar v) {
    const uint32_t bits = std::bit_cast<uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

uint64_t get_u64(const char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

Scalar get_f32(const char* p) {
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<Scalar>(bits);
}

}  // namespace

void save_checkpoint(const ModelWeights& w, const std::string& path) {
    w.config.check();
    const auto table = tensor_table(w);
    json manifest;
    manifest["config"] = config_json(w.config);
    uint64_t offset = 0;
    for (const TensorRef& t : table) {
        json shape = json::array();
        for (Eigen::Index s : t.shape) shape.push_back(s);
        manifest["tensors"].push_back(json{{"name", t.name}, {"shape", shape}, {"offset", offset}});
        offset += static_cast<uint64_t>(t.count()) * 4;
    }
    const std::string mtext = manifest.dump();
    std::string out;
    out.reserve(16 + mtext.size() + offset);
    out.append(kMagic, sizeof(kMagic));
    put_u64(out, mtext.size());
    out.append(mtext);
    for (const TensorRef& t : table) {
        for (Eigen::Index i = 0; i < t.count(); ++i) put_f32(out, t.data[i]);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

ModelWeights load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    const uint64_t mlen = get_u64(bytes.data() + 8);
    if (bytes.size() < 16 + mlen) {
        throw std::runtime_error("load_checkpoint: truncated manifest in " + path);
    }
    json manifest;
    try {
        manifest = json::parse(bytes.substr(16, mlen));
    } catch (const json::exception& e) {
        throw std::runtime_error("load_checkpoint: manifest parse error: " + std::string(e.what()));
    }
    ModelWeights w;
    w.config = config_from_json(manifest.at("config"));
    w.config.check();
    // Allocate per the config, then fill from the manifest's offsets.
    w.tok_embed.resize(w.config.vocab_size, w.config.d_model);
    w.layers.resize(static_cast<size_t>(w.config.n_layers));
    for (LayerWeights& l : w.layers) {
        l.attn_norm.resize(w.config.d_model);
        l.wq.resize(w.config.d_model, w.config.n_heads * w.config.d_head);
        l.wk.resize(w.config.d_model, w.config.n_kv_heads * w.config.d_head);
        l.wv.resize(w.config.d_model, w.config.n_kv_heads * w.config.d_head);
        l.wo.resize(w.config.n_heads * w.config.d_head, w.config.d_model);
        l.ffn_norm.resize(w.config.d_model);
        l.w_gate.resize(w.config.d_model, w.config.d_ff);
        l.w_up.resize(w.config.d_model, w.config.d_ff);
        l.w_down.resize(w.config.d_ff, w.config.d_model);
    }
    w.final_norm.resize(w.config.d_model);
    w.lm_head.resize(w.config.d_model, w.config.vocab_size);

    struct Entry {
        std::vector<Eigen::Index> shape;
        uint64_t offset = 0;
    };
    std::map<std::string, Entry> listed;
    for (const json& t : manifest.at("tensors")) {
        Entry e;
        for (const json& s : t.at("shape")) e.shape.push_back(s.get<Eigen::Index>());
        e.offset = t.at("offset").get<uint64_t>();
        listed[t.at("name").get<std::string>()] = std::move(e);
    }
    const char* payload = bytes.data() + 16 + mlen;
    const uint64_t payload_size = bytes.size() - 16 - mlen;
    auto table = tensor_table(w);
    for (TensorRef& t : table) {
        const auto it = listed.find(t.name);
        if (it == listed.end()) {
            throw std::runtime_error("load_checkpoint: missing tensor '" + t.name + "'");
        }
        if (it->second.shape != t.shape) {
            throw std::runtime_error("load_checkpoint: tensor '" + t.name + "' has shape " +
                                     shape_str(it->second.shape.front(),
                                               it->second.shape.back()) +
                                     ", expected " + shape_str(t.shape.front(), t.shape.back()));
        }
        const uint64_t need = static_cast<uint64_t>(t.count()) * 4;
        if (it->second.offset + need > payload_size) {
            throw std::runtime_error("load_checkpoint: truncated payload reading tensor '" +
                                     t.name + "'");
        }
        const char* src = payload + it->second.offset;
        for (Eigen::Index i = 0; i < t.count(); ++i) t.mut[i] = get_f32(src + i * 4);
    }
    return w;
}

}  // namespace tsa
