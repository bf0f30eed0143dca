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

#include "hoikit/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>

namespace hoikit {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

MapC emap(const Tensor& t) { return MapC(t.data.data(), t.rows, t.cols); }
MapM emap(Tensor& t) { return MapM(t.data.data(), t.rows, t.cols); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::runtime_error(std::string(op) + ": incompatible shapes (" + std::to_string(a.rows) +
                             "x" + std::to_string(a.cols) + ") vs (" + std::to_string(b.rows) +
                             "x" + std::to_string(b.cols) + ")");
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Var Tape::push(Tensor value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), false); }

Var Tape::leaf(Tensor value, bool requires_grad) { return push(std::move(value), requires_grad); }

void Tape::ensure_grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
        n.grad = Tensor(n.value.rows, n.value.cols);
}

void Tape::backward(Var out) {
    if (backward_done_) throw std::runtime_error("Tape::backward: called twice");
    backward_done_ = true;
    const Tensor& ov = value(out);
    if (ov.rows != 1 || ov.cols != 1)
        throw std::runtime_error("Tape::backward: output must be 1x1");
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
        if (nodes_[i].needs_grad) ensure_grad(Var{i});
    if (!nodes_[out.id].needs_grad) return;  // nothing trainable upstream
    nodes_[out.id].grad.data[0] = 1.0;
    for (int i = out.id; i >= 0; --i)
        if (nodes_[i].needs_grad && nodes_[i].back) nodes_[i].back();
}

// ---------------------------------------------------------------------------
// Elementwise

Var Tape::add(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (!av.same_shape(bv)) shape_error("add", av, bv);
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
        }
    };
    return o;
}

Var Tape::sub(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (!av.same_shape(bv)) shape_error("sub", av, bv);
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
        }
    };
    return o;
}

Var Tape::mul(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (!av.same_shape(bv)) shape_error("mul", av, bv);
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        const Tensor &av2 = value(a), &bv2 = value(b);
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av2.data[i];
        }
    };
    return o;
}

Var Tape::div(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (!av.same_shape(bv)) shape_error("div", av, bv);
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] /= bv.data[i];
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        const Tensor &bv2 = value(b), &ov = value(o);
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / bv2.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (size_t i = 0; i < g.size(); ++i)
                gb.data[i] -= g.data[i] * ov.data[i] / bv2.data[i];
        }
    };
    return o;
}

Var Tape::min_ew(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (!av.same_shape(bv)) shape_error("min_ew", av, bv);
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::min(av.data[i], bv.data[i]);
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        const Tensor &av2 = value(a), &bv2 = value(b);
        for (size_t i = 0; i < g.size(); ++i) {
            bool take_a = av2.data[i] <= bv2.data[i];  // ties route to a
            if (take_a && needs_grad(a)) grad_ref(a).data[i] += g.data[i];
            if (!take_a && needs_grad(b)) grad_ref(b).data[i] += g.data[i];
        }
    };
    return o;
}

Var Tape::max_ew(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (!av.same_shape(bv)) shape_error("max_ew", av, bv);
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(av.data[i], bv.data[i]);
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        const Tensor &av2 = value(a), &bv2 = value(b);
        for (size_t i = 0; i < g.size(); ++i) {
            bool take_a = av2.data[i] >= bv2.data[i];
            if (take_a && needs_grad(a)) grad_ref(a).data[i] += g.data[i];
            if (!take_a && needs_grad(b)) grad_ref(b).data[i] += g.data[i];
        }
    };
    return o;
}

Var Tape::add_rowvec(Var x, Var row) {
    const Tensor &xv = value(x), &rv = value(row);
    if (rv.rows != 1 || rv.cols != xv.cols) shape_error("add_rowvec", xv, rv);
    Tensor out = xv;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) += rv.at(0, c);
    bool ng = needs_grad(x) || needs_grad(row);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, x, row, o]() {
        const Tensor& g = grad(o);
        if (needs_grad(x)) {
            Tensor& gx = grad_ref(x);
            for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
        }
        if (needs_grad(row)) {
            Tensor& gr = grad_ref(row);
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) gr.at(0, c) += g.at(r, c);
        }
    };
    return o;
}

Var Tape::mul_rowvec(Var x, Var row) {
    const Tensor &xv = value(x), &rv = value(row);
    if (rv.rows != 1 || rv.cols != xv.cols) shape_error("mul_rowvec", xv, rv);
    Tensor out = xv;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) *= rv.at(0, c);
    bool ng = needs_grad(x) || needs_grad(row);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, x, row, o]() {
        const Tensor& g = grad(o);
        const Tensor &xv2 = value(x), &rv2 = value(row);
        if (needs_grad(x)) {
            Tensor& gx = grad_ref(x);
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) gx.at(r, c) += g.at(r, c) * rv2.at(0, c);
        }
        if (needs_grad(row)) {
            Tensor& gr = grad_ref(row);
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) gr.at(0, c) += g.at(r, c) * xv2.at(r, c);
        }
    };
    return o;
}

Var Tape::scale(Var x, double s) {
    Tensor out = value(x);
    for (auto& v : out.data) v *= s;
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, s, o]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += s * g.data[i];
    };
    return o;
}

Var Tape::add_scalar(Var x, double s) {
    Tensor out = value(x);
    for (auto& v : out.data) v += s;
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    };
    return o;
}

// ---------------------------------------------------------------------------
// Matrix products

Var Tape::matmul(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (av.cols != bv.rows) shape_error("matmul", av, bv);
    Tensor out(av.rows, bv.cols);
    emap(out) = emap(av) * emap(bv);
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        if (needs_grad(a)) emap(grad_ref(a)) += emap(g) * emap(value(b)).transpose();
        if (needs_grad(b)) emap(grad_ref(b)) += emap(value(a)).transpose() * emap(g);
    };
    return o;
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (av.cols != bv.cols) shape_error("matmul_nt", av, bv);
    Tensor out(av.rows, bv.rows);
    emap(out) = emap(av) * emap(bv).transpose();
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        if (needs_grad(a)) emap(grad_ref(a)) += emap(g) * emap(value(b));
        if (needs_grad(b)) emap(grad_ref(b)) += emap(g).transpose() * emap(value(a));
    };
    return o;
}

Var Tape::matmul_tn(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (av.rows != bv.rows) shape_error("matmul_tn", av, bv);
    Tensor out(av.cols, bv.cols);
    emap(out) = emap(av).transpose() * emap(bv);
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        if (needs_grad(a)) emap(grad_ref(a)) += emap(value(b)) * emap(g).transpose();
        if (needs_grad(b)) emap(grad_ref(b)) += emap(value(a)) * emap(g);
    };
    return o;
}

Var Tape::transpose(Var x) {
    const Tensor& xv = value(x);
    Tensor out(xv.cols, xv.rows);
    for (int r = 0; r < xv.rows; ++r)
        for (int c = 0; c < xv.cols; ++c) out.at(c, r) = xv.at(r, c);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gx.at(c, r) += g.at(r, c);
    };
    return o;
}

// ---------------------------------------------------------------------------
// Activations

Var Tape::tanh_(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = std::tanh(v);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &y = value(o);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i)
            gx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    };
    return o;
}

Var Tape::sigmoid(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &y = value(o);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i)
            gx.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    };
    return o;
}

Var Tape::gelu(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &xv = value(x);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) {
            double v = xv.data[i];
            double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            gx.data[i] += g.data[i] * (cdf + v * pdf);
        }
    };
    return o;
}

Var Tape::exp_(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = std::exp(v);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &y = value(o);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * y.data[i];
    };
    return o;
}

Var Tape::log_(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = std::log(v);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &xv = value(x);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] / xv.data[i];
    };
    return o;
}

Var Tape::relu(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = std::max(0.0, v);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &xv = value(x);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i)
            if (xv.data[i] > 0.0) gx.data[i] += g.data[i];
    };
    return o;
}

Var Tape::abs_(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = std::abs(v);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &xv = value(x);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) {
            double s = xv.data[i] > 0.0 ? 1.0 : (xv.data[i] < 0.0 ? -1.0 : 0.0);
            gx.data[i] += g.data[i] * s;
        }
    };
    return o;
}

Var Tape::square(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = v * v;
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &xv = value(x);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += 2.0 * g.data[i] * xv.data[i];
    };
    return o;
}

// ---------------------------------------------------------------------------
// Row-wise softmax family

Var Tape::softmax_rows(Var x) {
    const Tensor& xv = value(x);
    Tensor out = xv;
    for (int r = 0; r < out.rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < out.cols; ++c) mx = std::max(mx, out.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < out.cols; ++c) {
            out.at(r, c) = std::exp(out.at(r, c) - mx);
            sum += out.at(r, c);
        }
        for (int c = 0; c < out.cols; ++c) out.at(r, c) /= sum;
    }
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &y = value(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < g.rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * y.at(r, c);
            for (int c = 0; c < g.cols; ++c)
                gx.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
        }
    };
    return o;
}

Var Tape::log_softmax_rows(Var x) {
    const Tensor& xv = value(x);
    Tensor out = xv;
    for (int r = 0; r < out.rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < out.cols; ++c) mx = std::max(mx, out.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < out.cols; ++c) sum += std::exp(out.at(r, c) - mx);
        double lse = mx + std::log(sum);
        for (int c = 0; c < out.cols; ++c) out.at(r, c) -= lse;
    }
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &y = value(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < g.rows; ++r) {
            double gsum = 0.0;
            for (int c = 0; c < g.cols; ++c) gsum += g.at(r, c);
            for (int c = 0; c < g.cols; ++c)
                gx.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
        }
    };
    return o;
}

Var Tape::layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    const Tensor &xv = value(x), &gv = value(gamma), &bv = value(beta);
    if (gv.rows != 1 || gv.cols != xv.cols) shape_error("layer_norm_rows(gamma)", xv, gv);
    if (bv.rows != 1 || bv.cols != xv.cols) shape_error("layer_norm_rows(beta)", xv, bv);
    Tensor out(xv.rows, xv.cols);
    Tensor xhat(xv.rows, xv.cols);   // cached for backward
    Tensor inv_sd(xv.rows, 1);
    for (int r = 0; r < xv.rows; ++r) {
        double mean = 0.0;
        for (int c = 0; c < xv.cols; ++c) mean += xv.at(r, c);
        mean /= xv.cols;
        double var = 0.0;
        for (int c = 0; c < xv.cols; ++c) {
            double d = xv.at(r, c) - mean;
            var += d * d;
        }
        var /= xv.cols;
        double isd = 1.0 / std::sqrt(var + eps);
        inv_sd.at(r, 0) = isd;
        for (int c = 0; c < xv.cols; ++c) {
            double h = (xv.at(r, c) - mean) * isd;
            xhat.at(r, c) = h;
            out.at(r, c) = gv.at(0, c) * h + bv.at(0, c);
        }
    }
    bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto isd = std::make_shared<Tensor>(std::move(inv_sd));
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, x, gamma, beta, o, xh, isd]() {
        const Tensor& g = grad(o);
        const Tensor& gv2 = value(gamma);
        int C = g.cols;
        if (needs_grad(beta)) {
            Tensor& gb = grad_ref(beta);
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < C; ++c) gb.at(0, c) += g.at(r, c);
        }
        if (needs_grad(gamma)) {
            Tensor& gg = grad_ref(gamma);
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < C; ++c) gg.at(0, c) += g.at(r, c) * xh->at(r, c);
        }
        if (needs_grad(x)) {
            Tensor& gx = grad_ref(x);
            for (int r = 0; r < g.rows; ++r) {
                double m1 = 0.0, m2 = 0.0;
                for (int c = 0; c < C; ++c) {
                    double gy = g.at(r, c) * gv2.at(0, c);
                    m1 += gy;
                    m2 += gy * xh->at(r, c);
                }
                m1 /= C;
                m2 /= C;
                for (int c = 0; c < C; ++c) {
                    double gy = g.at(r, c) * gv2.at(0, c);
                    gx.at(r, c) += isd->at(r, 0) * (gy - m1 - xh->at(r, c) * m2);
                }
            }
        }
    };
    return o;
}

Var Tape::normalize_rows(Var x, double eps) {
    const Tensor& xv = value(x);
    Tensor out(xv.rows, xv.cols);
    Tensor norms(xv.rows, 1);
    for (int r = 0; r < xv.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < xv.cols; ++c) s += xv.at(r, c) * xv.at(r, c);
        double n = std::max(std::sqrt(s), eps);
        norms.at(r, 0) = n;
        for (int c = 0; c < xv.cols; ++c) out.at(r, c) = xv.at(r, c) / n;
    }
    auto nrm = std::make_shared<Tensor>(std::move(norms));
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, nrm, eps]() {
        if (!needs_grad(x)) return;
        const Tensor &g = grad(o), &y = value(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < g.rows; ++r) {
            double n = nrm->at(r, 0);
            bool floored = n <= eps;
            if (floored) {
                for (int c = 0; c < g.cols; ++c) gx.at(r, c) += g.at(r, c) / n;
            } else {
                double dot = 0.0;
                for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * y.at(r, c);
                for (int c = 0; c < g.cols; ++c)
                    gx.at(r, c) += (g.at(r, c) - y.at(r, c) * dot) / n;
            }
        }
    };
    return o;
}

// ---------------------------------------------------------------------------
// Reductions

Var Tape::sum_all(Var x) {
    const Tensor& xv = value(x);
    Tensor out(1, 1);
    for (double v : xv.data) out.data[0] += v;
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        double g = grad(o).data[0];
        Tensor& gx = grad_ref(x);
        for (auto& v : gx.data) v += g;
    };
    return o;
}

Var Tape::mean_all(Var x) {
    const Tensor& xv = value(x);
    Tensor out(1, 1);
    for (double v : xv.data) out.data[0] += v;
    double inv = 1.0 / static_cast<double>(xv.size());
    out.data[0] *= inv;
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, inv]() {
        if (!needs_grad(x)) return;
        double g = grad(o).data[0] * inv;
        Tensor& gx = grad_ref(x);
        for (auto& v : gx.data) v += g;
    };
    return o;
}

Var Tape::sum_rows(Var x) {
    const Tensor& xv = value(x);
    Tensor out(xv.rows, 1);
    for (int r = 0; r < xv.rows; ++r)
        for (int c = 0; c < xv.cols; ++c) out.at(r, 0) += xv.at(r, c);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < gx.rows; ++r)
            for (int c = 0; c < gx.cols; ++c) gx.at(r, c) += g.at(r, 0);
    };
    return o;
}

// ---------------------------------------------------------------------------
// Shape plumbing

Var Tape::concat_rows(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (av.cols != bv.cols) shape_error("concat_rows", av, bv);
    Tensor out(av.rows + bv.rows, av.cols);
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.size());
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        size_t na = value(a).size();
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (size_t i = 0; i < na; ++i) ga.data[i] += g.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (size_t i = 0; i < gb.size(); ++i) gb.data[i] += g.data[na + i];
        }
    };
    return o;
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor &av = value(a), &bv = value(b);
    if (av.rows != bv.rows) shape_error("concat_cols", av, bv);
    Tensor out(av.rows, av.cols + bv.cols);
    for (int r = 0; r < av.rows; ++r) {
        for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c);
        for (int c = 0; c < bv.cols; ++c) out.at(r, av.cols + c) = bv.at(r, c);
    }
    bool ng = needs_grad(a) || needs_grad(b);
    Var o = push(std::move(out), ng);
    nodes_[o.id].back = [this, a, b, o]() {
        const Tensor& g = grad(o);
        int ac = value(a).cols;
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (int r = 0; r < ga.rows; ++r)
                for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(r, c);
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (int r = 0; r < gb.rows; ++r)
                for (int c = 0; c < gb.cols; ++c) gb.at(r, c) += g.at(r, ac + c);
        }
    };
    return o;
}

Var Tape::slice_rows(Var x, int r0, int n) {
    const Tensor& xv = value(x);
    if (r0 < 0 || r0 + n > xv.rows) throw std::runtime_error("slice_rows: out of range");
    Tensor out(n, xv.cols);
    std::copy(xv.data.begin() + static_cast<size_t>(r0) * xv.cols,
              xv.data.begin() + static_cast<size_t>(r0 + n) * xv.cols, out.data.begin());
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, r0]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gx.at(r0 + r, c) += g.at(r, c);
    };
    return o;
}

Var Tape::slice_cols(Var x, int c0, int n) {
    const Tensor& xv = value(x);
    if (c0 < 0 || c0 + n > xv.cols) throw std::runtime_error("slice_cols: out of range");
    Tensor out(xv.rows, n);
    for (int r = 0; r < xv.rows; ++r)
        for (int c = 0; c < n; ++c) out.at(r, c) = xv.at(r, c0 + c);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, c0]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gx.at(r, c0 + c) += g.at(r, c);
    };
    return o;
}

Var Tape::reshape(Var x, int r, int c) {
    const Tensor& xv = value(x);
    if (r * c != xv.rows * xv.cols) throw std::runtime_error("reshape: element count mismatch");
    Tensor out(r, c);
    out.data = xv.data;
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    };
    return o;
}

Var Tape::gather_rows(Var x, std::vector<int> idx) {
    const Tensor& xv = value(x);
    Tensor out(static_cast<int>(idx.size()), xv.cols);
    for (int r = 0; r < out.rows; ++r) {
        if (idx[r] < 0 || idx[r] >= xv.rows) throw std::runtime_error("gather_rows: out of range");
        for (int c = 0; c < out.cols; ++c) out.at(r, c) = xv.at(idx[r], c);
    }
    auto ix = std::make_shared<std::vector<int>>(std::move(idx));
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, ix]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gx.at((*ix)[r], c) += g.at(r, c);
    };
    return o;
}

Var Tape::pick(Var x, int r, int c) {
    const Tensor& xv = value(x);
    if (r < 0 || r >= xv.rows || c < 0 || c >= xv.cols)
        throw std::runtime_error("pick: out of range");
    Tensor out(1, 1);
    out.data[0] = xv.at(r, c);
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, r, c]() {
        if (!needs_grad(x)) return;
        grad_ref(x).at(r, c) += grad(o).data[0];
    };
    return o;
}

// ---------------------------------------------------------------------------
// Spatial ops

Var Tape::extract_patches(Var x, int h, int w, int k, int stride, int pad) {
    const Tensor& xv = value(x);
    if (xv.rows != h * w) throw std::runtime_error("extract_patches: rows != h*w");
    int span = h + 2 * pad - k;
    if (span < 0 || span % stride != 0)
        throw std::runtime_error("extract_patches: geometry does not tile");
    int span_w = w + 2 * pad - k;
    if (span_w < 0 || span_w % stride != 0)
        throw std::runtime_error("extract_patches: geometry does not tile");
    int ho = span / stride + 1, wo = span_w / stride + 1;
    int C = xv.cols;
    Tensor out(ho * wo, k * k * C);
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            int orow = oy * wo + ox;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    int sy = oy * stride + ky - pad;
                    int sx = ox * stride + kx - pad;
                    if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;  // zero pad
                    int srow = sy * w + sx;
                    int obase = (ky * k + kx) * C;
                    for (int c = 0; c < C; ++c) out.at(orow, obase + c) = xv.at(srow, c);
                }
            }
        }
    }
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, h, w, k, stride, pad]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        int C = gx.cols;
        int wo = (w + 2 * pad - k) / stride + 1;
        int ho = (h + 2 * pad - k) / stride + 1;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                int orow = oy * wo + ox;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        int sy = oy * stride + ky - pad;
                        int sx = ox * stride + kx - pad;
                        if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                        int srow = sy * w + sx;
                        int obase = (ky * k + kx) * C;
                        for (int c = 0; c < C; ++c) gx.at(srow, c) += g.at(orow, obase + c);
                    }
                }
            }
        }
    };
    return o;
}

Var Tape::bilinear_resize(Var x, int h, int w, int h2, int w2) {
    const Tensor& xv = value(x);
    if (xv.rows != h * w) throw std::runtime_error("bilinear_resize: rows != h*w");
    int C = xv.cols;
    Tensor out(h2 * w2, C);
    // Precompute taps once; reused verbatim in the backward scatter.
    struct Tap {
        int r00, r01, r10, r11;
        double w00, w01, w10, w11;
    };
    auto taps = std::make_shared<std::vector<Tap>>(static_cast<size_t>(h2) * w2);
    for (int oy = 0; oy < h2; ++oy) {
        double sy = (oy + 0.5) * static_cast<double>(h) / h2 - 0.5;
        int iy = static_cast<int>(std::floor(sy));
        double fy = sy - iy;
        int y0 = std::clamp(iy, 0, h - 1), y1 = std::clamp(iy + 1, 0, h - 1);
        for (int ox = 0; ox < w2; ++ox) {
            double sx = (ox + 0.5) * static_cast<double>(w) / w2 - 0.5;
            int ix = static_cast<int>(std::floor(sx));
            double fx = sx - ix;
            int x0 = std::clamp(ix, 0, w - 1), x1 = std::clamp(ix + 1, 0, w - 1);
            Tap t;
            t.r00 = y0 * w + x0;
            t.r01 = y0 * w + x1;
            t.r10 = y1 * w + x0;
            t.r11 = y1 * w + x1;
            t.w00 = (1 - fy) * (1 - fx);
            t.w01 = (1 - fy) * fx;
            t.w10 = fy * (1 - fx);
            t.w11 = fy * fx;
            (*taps)[static_cast<size_t>(oy) * w2 + ox] = t;
            int orow = oy * w2 + ox;
            for (int c = 0; c < C; ++c) {
                out.at(orow, c) = t.w00 * xv.at(t.r00, c) + t.w01 * xv.at(t.r01, c) +
                                  t.w10 * xv.at(t.r10, c) + t.w11 * xv.at(t.r11, c);
            }
        }
    }
    Var o = push(std::move(out), needs_grad(x));
    nodes_[o.id].back = [this, x, o, taps]() {
        if (!needs_grad(x)) return;
        const Tensor& g = grad(o);
        Tensor& gx = grad_ref(x);
        for (int orow = 0; orow < g.rows; ++orow) {
            const auto& t = (*taps)[orow];
            for (int c = 0; c < g.cols; ++c) {
                double gv = g.at(orow, c);
                gx.at(t.r00, c) += t.w00 * gv;
                gx.at(t.r01, c) += t.w01 * gv;
                gx.at(t.r10, c) += t.w10 * gv;
                gx.at(t.r11, c) += t.w11 * gv;
            }
        }
    };
    return o;
}

}  // namespace hoikit
