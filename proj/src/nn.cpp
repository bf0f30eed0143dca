// Copyright 2026 The hoikit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hoikit/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hoikit {

void ParamStore::define(const std::string& name, Tensor init, bool trainable) {
    if (name.empty()) throw std::runtime_error("ParamStore::define: empty name");
    if (entries_.count(name))
        throw std::runtime_error("ParamStore::define: duplicate parameter '" + name + "'");
    Entry e;
    e.m = Tensor(init.rows, init.cols);
    e.v = Tensor(init.rows, init.cols);
    e.value = std::move(init);
    e.trainable = trainable;
    entries_.emplace(name, std::move(e));
    order_.push_back(name);
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw std::runtime_error("ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw std::runtime_error("ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParamStore::value(const std::string& name) { return entry(name).value; }
const Tensor& ParamStore::value(const std::string& name) const { return entry(name).value; }
bool ParamStore::trainable(const std::string& name) const { return entry(name).trainable; }
void ParamStore::set_trainable(const std::string& name, bool trainable) {
    entry(name).trainable = trainable;
}
const Tensor& ParamStore::adam_m(const std::string& name) const { return entry(name).m; }
const Tensor& ParamStore::adam_v(const std::string& name) const { return entry(name).v; }
Tensor& ParamStore::adam_m(const std::string& name) { return entry(name).m; }
Tensor& ParamStore::adam_v(const std::string& name) { return entry(name).v; }

std::vector<ParamInfo> ParamStore::census() const {
    std::vector<ParamInfo> out;
    out.reserve(order_.size());
    for (const auto& name : order_) {
        const Entry& e = entry(name);
        out.push_back({name, e.value.rows, e.value.cols, e.trainable});
    }
    return out;
}

size_t ParamStore::scalar_count(bool trainable_only) const {
    size_t n = 0;
    for (const auto& [name, e] : entries_)
        if (!trainable_only || e.trainable) n += e.value.size();
    return n;
}

void ParamStore::start_step(Tape& tape) {
    tape_ = &tape;
    bound_.clear();
}

Tape& ParamStore::tape() {
    if (!tape_) throw std::runtime_error("ParamStore: no tape bound; call start_step first");
    return *tape_;
}

Var ParamStore::p(const std::string& name) {
    Tape& t = tape();
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const Entry& e = entry(name);
    Var v = t.leaf(e.value, e.trainable);
    bound_.emplace(name, v);
    return v;
}

StepReport ParamStore::apply_adam(const AdamConfig& cfg) {
    Tape& t = tape();
    StepReport rep;
    double sq = 0.0;
    std::vector<std::pair<Entry*, const Tensor*>> live;
    for (const auto& name : order_) {
        auto bit = bound_.find(name);
        if (bit == bound_.end()) continue;
        Entry& e = entry(name);
        if (!e.trainable) continue;
        const Tensor& g = t.grad(bit->second);
        if (g.size() != e.value.size())
            throw std::runtime_error("ParamStore::apply_adam: missing gradient for '" + name +
                                     "' (was backward() run?)");
        for (double gv : g.data) {
            if (!std::isfinite(gv)) rep.finite = false;
            sq += gv * gv;
        }
        live.push_back({&e, &g});
    }
    rep.grad_norm = std::sqrt(sq);
    if (!rep.finite) return rep;  // caller decides how to abort

    double clip = 1.0;
    if (cfg.max_grad_norm > 0.0 && rep.grad_norm > cfg.max_grad_norm) {
        clip = cfg.max_grad_norm / (rep.grad_norm + 1e-12);
        rep.clipped = true;
    }

    ++step_;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (auto& [e, g] : live) {
        for (size_t i = 0; i < e->value.size(); ++i) {
            double gv = g->data[i] * clip;
            e->m.data[i] = cfg.beta1 * e->m.data[i] + (1.0 - cfg.beta1) * gv;
            e->v.data[i] = cfg.beta2 * e->v.data[i] + (1.0 - cfg.beta2) * gv * gv;
            double mhat = e->m.data[i] / bc1;
            double vhat = e->v.data[i] / bc2;
            e->value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

namespace {
Tensor xavier(int in, int out, Rng& rng) {
    double lim = std::sqrt(6.0 / (in + out));
    return Tensor::uniform(in, out, rng, -lim, lim);
}
}  // namespace

Linear Linear::create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
                      bool bias) {
    Linear l;
    l.in = in;
    l.out = out;
    l.has_bias = bias;
    l.w = prefix + ".w";
    ps.define(l.w, xavier(in, out, rng));
    if (bias) {
        l.b = prefix + ".b";
        ps.define(l.b, Tensor::zeros(1, out));
    }
    return l;
}

Linear Linear::create_zero(ParamStore& ps, const std::string& prefix, int in, int out, bool bias) {
    Linear l;
    l.in = in;
    l.out = out;
    l.has_bias = bias;
    l.w = prefix + ".w";
    ps.define(l.w, Tensor::zeros(in, out));
    if (bias) {
        l.b = prefix + ".b";
        ps.define(l.b, Tensor::zeros(1, out));
    }
    return l;
}

Var Linear::forward(ParamStore& ps, Var x) const {
    Tape& t = ps.tape();
    Var y = t.matmul(x, ps.p(w));
    if (has_bias) y = t.add_rowvec(y, ps.p(b));
    return y;
}

Mlp Mlp::create(ParamStore& ps, const std::string& prefix, int in, int hidden, int out, Rng& rng) {
    Mlp m;
    m.fc1 = Linear::create(ps, prefix + ".fc1", in, hidden, rng);
    m.fc2 = Linear::create(ps, prefix + ".fc2", hidden, out, rng);
    return m;
}

Var Mlp::forward(ParamStore& ps, Var x) const {
    Tape& t = ps.tape();
    return fc2.forward(ps, t.gelu(fc1.forward(ps, x)));
}

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& prefix, int dim) {
    LayerNorm ln;
    ln.dim = dim;
    ln.gamma = prefix + ".gamma";
    ln.beta = prefix + ".beta";
    ps.define(ln.gamma, Tensor::full(1, dim, 1.0));
    ps.define(ln.beta, Tensor::zeros(1, dim));
    return ln;
}

Var LayerNorm::forward(ParamStore& ps, Var x) const {
    Tape& t = ps.tape();
    return t.layer_norm_rows(x, ps.p(gamma), ps.p(beta));
}

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, const std::string& prefix, int dim,
                                              int heads, Rng& rng) {
    if (dim % heads != 0) throw std::runtime_error("MultiHeadAttention: dim % heads != 0");
    MultiHeadAttention a;
    a.dim = dim;
    a.heads = heads;
    a.q = Linear::create(ps, prefix + ".q", dim, dim, rng);
    a.k = Linear::create(ps, prefix + ".k", dim, dim, rng);
    a.v = Linear::create(ps, prefix + ".v", dim, dim, rng);
    a.o = Linear::create(ps, prefix + ".o", dim, dim, rng);
    return a;
}

Var MultiHeadAttention::forward(ParamStore& ps, Var query, Var memory) const {
    Tape& t = ps.tape();
    Var Q = q.forward(ps, query);
    Var K = k.forward(ps, memory);
    Var V = v.forward(ps, memory);
    int dh = dim / heads;
    double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    Var out;
    for (int h = 0; h < heads; ++h) {
        Var Qh = t.slice_cols(Q, h * dh, dh);
        Var Kh = t.slice_cols(K, h * dh, dh);
        Var Vh = t.slice_cols(V, h * dh, dh);
        Var att = t.softmax_rows(t.scale(t.matmul_nt(Qh, Kh), inv));
        Var Oh = t.matmul(att, Vh);
        out = (h == 0) ? Oh : t.concat_cols(out, Oh);
    }
    return o.forward(ps, out);
}

EncoderLayer EncoderLayer::create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                                  int ffn_hidden, Rng& rng) {
    EncoderLayer e;
    e.attn = MultiHeadAttention::create(ps, prefix + ".attn", dim, heads, rng);
    e.ffn = Mlp::create(ps, prefix + ".ffn", dim, ffn_hidden, dim, rng);
    e.ln1 = LayerNorm::create(ps, prefix + ".ln1", dim);
    e.ln2 = LayerNorm::create(ps, prefix + ".ln2", dim);
    return e;
}

Var EncoderLayer::forward(ParamStore& ps, Var x) const {
    Tape& t = ps.tape();
    x = ln1.forward(ps, t.add(x, attn.forward(ps, x, x)));
    x = ln2.forward(ps, t.add(x, ffn.forward(ps, x)));
    return x;
}

DecoderLayer DecoderLayer::create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                                  int ffn_hidden, Rng& rng) {
    DecoderLayer d;
    d.self_attn = MultiHeadAttention::create(ps, prefix + ".self", dim, heads, rng);
    d.cross_attn = MultiHeadAttention::create(ps, prefix + ".cross", dim, heads, rng);
    d.ffn = Mlp::create(ps, prefix + ".ffn", dim, ffn_hidden, dim, rng);
    d.ln1 = LayerNorm::create(ps, prefix + ".ln1", dim);
    d.ln2 = LayerNorm::create(ps, prefix + ".ln2", dim);
    d.ln3 = LayerNorm::create(ps, prefix + ".ln3", dim);
    return d;
}

Var DecoderLayer::forward(ParamStore& ps, Var x, Var memory) const {
    Tape& t = ps.tape();
    x = ln1.forward(ps, t.add(x, self_attn.forward(ps, x, x)));
    x = ln2.forward(ps, t.add(x, cross_attn.forward(ps, x, memory)));
    x = ln3.forward(ps, t.add(x, ffn.forward(ps, x)));
    return x;
}

Conv2d Conv2d::create(ParamStore& ps, const std::string& prefix, int in, int out, int k,
                      int stride, int pad, Rng& rng) {
    Conv2d c;
    c.in = in;
    c.out = out;
    c.k = k;
    c.stride = stride;
    c.pad = pad;
    c.w = prefix + ".w";
    c.b = prefix + ".b";
    ps.define(c.w, xavier(k * k * in, out, rng));
    ps.define(c.b, Tensor::zeros(1, out));
    return c;
}

Var Conv2d::forward(ParamStore& ps, Var x, int h, int w_) const {
    Tape& t = ps.tape();
    Var patches = t.extract_patches(x, h, w_, k, stride, pad);
    return t.add_rowvec(t.matmul(patches, ps.p(w)), ps.p(b));
}

Tensor sinusoidal_positions(int n, int dim) {
    Tensor pe(n, dim);
    for (int p = 0; p < n; ++p) {
        for (int i = 0; i < dim; i += 2) {
            double angle = p / std::pow(10000.0, static_cast<double>(i) / dim);
            pe.at(p, i) = std::sin(angle);
            if (i + 1 < dim) pe.at(p, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

}  // namespace hoikit
