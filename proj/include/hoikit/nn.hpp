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

#ifndef HOIKIT_NN_HPP_
#define HOIKIT_NN_HPP_

#include <map>
#include <string>
#include <vector>

#include "hoikit/rng.hpp"
#include "hoikit/tape.hpp"
#include "hoikit/tensor.hpp"

namespace hoikit {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double max_grad_norm = 0.1;  // 0 disables clipping
};

struct StepReport {
    double grad_norm = 0.0;  // global L2 norm before clipping
    bool clipped = false;
    bool finite = true;      // false: a grad was NaN/inf, update was skipped
};

struct ParamInfo {
    std::string name;
    int rows = 0;
    int cols = 0;
    bool trainable = true;
};

// Central registry of named parameters plus their Adam state.
//
// Life cycle per training step:
//   store.start_step(tape);            // fresh tape
//   ... modules call store.p("name") to place leaves ...
//   tape.backward(loss);
//   store.apply_adam(cfg);             // reads grads off the bound tape
//
// p() hands out one leaf per name per step, so a parameter reused by several
// modules accumulates all of its gradient contributions in one place.
class ParamStore {
  public:
    // Defines a parameter once; re-defining an existing name is an error
    // (it would silently reset trained weights).
    void define(const std::string& name, Tensor init, bool trainable = true);
    bool has(const std::string& name) const { return entries_.count(name) > 0; }

    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    bool trainable(const std::string& name) const;
    void set_trainable(const std::string& name, bool trainable);

    // Definition order; stable across runs, used for checkpoints and census.
    const std::vector<std::string>& names() const { return order_; }
    std::vector<ParamInfo> census() const;
    size_t scalar_count(bool trainable_only) const;

    void start_step(Tape& tape);
    Tape& tape();
    Var p(const std::string& name);

    // Global-norm clip + Adam with bias correction over all trainable
    // parameters bound this step.  Non-finite gradients skip the update.
    StepReport apply_adam(const AdamConfig& cfg);

    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }  // checkpoint restore

    // Adam moment access for checkpointing.
    const Tensor& adam_m(const std::string& name) const;
    const Tensor& adam_v(const std::string& name) const;
    Tensor& adam_m(const std::string& name);
    Tensor& adam_v(const std::string& name);

  private:
    struct Entry {
        Tensor value;
        Tensor m, v;
        bool trainable = true;
    };
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;

    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;
    Tape* tape_ = nullptr;
    std::map<std::string, Var> bound_;
    int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Layers.  Each is a bag of parameter names in a ParamStore; forward() places
// leaves on the store's current tape.

struct Linear {
    std::string w, b;
    int in = 0, out = 0;
    bool has_bias = true;

    // Xavier-uniform weight, zero bias.
    static Linear create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
                         bool bias = true);
    // Like create, but every weight is zero: the layer starts as the zero map.
    static Linear create_zero(ParamStore& ps, const std::string& prefix, int in, int out,
                              bool bias = true);
    Var forward(ParamStore& ps, Var x) const;
};

struct Mlp {
    Linear fc1, fc2;
    static Mlp create(ParamStore& ps, const std::string& prefix, int in, int hidden, int out,
                      Rng& rng);
    Var forward(ParamStore& ps, Var x) const;  // fc2(gelu(fc1(x)))
};

struct LayerNorm {
    std::string gamma, beta;
    int dim = 0;
    static LayerNorm create(ParamStore& ps, const std::string& prefix, int dim);
    Var forward(ParamStore& ps, Var x) const;
};

struct MultiHeadAttention {
    Linear q, k, v, o;
    int dim = 0, heads = 0;
    static MultiHeadAttention create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                                     Rng& rng);
    // query rows attend over memory rows.
    Var forward(ParamStore& ps, Var query, Var memory) const;
};

// Post-norm transformer encoder layer:
//   x = LN1(x + SelfAttn(x)); x = LN2(x + FFN(x))
struct EncoderLayer {
    MultiHeadAttention attn;
    Mlp ffn;
    LayerNorm ln1, ln2;
    static EncoderLayer create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                               int ffn_hidden, Rng& rng);
    Var forward(ParamStore& ps, Var x) const;
};

// Post-norm transformer decoder layer:
//   x = LN1(x + SelfAttn(x)); x = LN2(x + CrossAttn(x, mem)); x = LN3(x + FFN(x))
struct DecoderLayer {
    MultiHeadAttention self_attn, cross_attn;
    Mlp ffn;
    LayerNorm ln1, ln2, ln3;
    static DecoderLayer create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                               int ffn_hidden, Rng& rng);
    Var forward(ParamStore& ps, Var x, Var memory) const;
};

// kxk conv over an (h*w)xC row-major feature map, expressed as im2col+GEMM.
struct Conv2d {
    std::string w, b;  // w: (k*k*in) x out
    int in = 0, out = 0, k = 0, stride = 1, pad = 0;
    static Conv2d create(ParamStore& ps, const std::string& prefix, int in, int out, int k,
                         int stride, int pad, Rng& rng);
    Var forward(ParamStore& ps, Var x, int h, int w_) const;
    int out_h(int h) const { return (h + 2 * pad - k) / stride + 1; }
    int out_w(int w_) const { return (w_ + 2 * pad - k) / stride + 1; }
};

// Fixed sinusoidal position table: row p, even col 2i = sin(p/10000^(2i/dim)),
// odd col = cos of the same angle.
Tensor sinusoidal_positions(int n, int dim);

}  // namespace hoikit

#endif  // HOIKIT_NN_HPP_
