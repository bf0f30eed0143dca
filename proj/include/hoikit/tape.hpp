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

#ifndef HOIKIT_TAPE_HPP_
#define HOIKIT_TAPE_HPP_

#include <functional>
#include <deque>
#include <vector>

#include "hoikit/tensor.hpp"

namespace hoikit {

// Handle to a node on a Tape.  Plain index; cheap to copy.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode autodiff over 2D double tensors.
//
// A Tape records every op as it executes.  backward() walks the recorded
// nodes in reverse and accumulates gradients into every node created with
// requires_grad (and everything downstream of one).  One Tape = one forward
// + one backward; build a fresh Tape per training step.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Node creation.
    Var constant(Tensor value);                       // never receives grad
    Var leaf(Tensor value, bool requires_grad);       // inputs / parameters

    // Accessors.  The references stay valid for the tape's whole lifetime
    // (node storage never relocates), so they may be taken before further
    // graph building.
    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
    size_t size() const { return nodes_.size(); }

    // Elementwise (same shape).
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var min_ew(Var a, Var b);   // subgradient: ties route to a
    Var max_ew(Var a, Var b);

    // Broadcast a 1xC row across all rows of x.
    Var add_rowvec(Var x, Var row);
    Var mul_rowvec(Var x, Var row);

    // Scalar (compile-time constant) variants.
    Var scale(Var x, double s);
    Var add_scalar(Var x, double s);

    // Matrix products (Eigen GEMM underneath).
    Var matmul(Var a, Var b);      // a (RxK) . b (KxC)
    Var matmul_nt(Var a, Var b);   // a (RxK) . b^T (CxK)
    Var matmul_tn(Var a, Var b);   // a^T (KxR) . b (KxC)
    Var transpose(Var x);

    // Activations.
    Var tanh_(Var x);
    Var sigmoid(Var x);
    Var gelu(Var x);               // exact erf form
    Var exp_(Var x);
    Var log_(Var x);
    Var relu(Var x);
    Var abs_(Var x);
    Var square(Var x);

    // Row-wise softmax family (row-max stabilized).
    Var softmax_rows(Var x);
    Var log_softmax_rows(Var x);

    // Per-row layer norm with 1xC gamma/beta.  Population variance.
    Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
    // Per-row L2 normalization; norm floored at eps.
    Var normalize_rows(Var x, double eps = 1e-12);

    // Reductions.
    Var sum_all(Var x);    // 1x1
    Var mean_all(Var x);   // 1x1
    Var sum_rows(Var x);   // RxC -> Rx1

    // Shape plumbing.
    Var concat_rows(Var a, Var b);
    Var concat_cols(Var a, Var b);
    Var slice_rows(Var x, int r0, int n);
    Var slice_cols(Var x, int c0, int n);
    Var reshape(Var x, int r, int c);              // row-major copy
    Var gather_rows(Var x, std::vector<int> idx);  // duplicates allowed
    Var pick(Var x, int r, int c);                 // 1x1 view of one entry

    // Spatial ops on (h*w)xC row-major feature maps.
    // im2col: output (ho*wo) x (k*k*C), zero padding.
    Var extract_patches(Var x, int h, int w, int k, int stride, int pad);
    // align_corners=false sampling, edge-clamped taps.
    Var bilinear_resize(Var x, int h, int w, int h2, int w2);

    // Seeds d(out)/d(out)=1 and accumulates grads.  out must be 1x1.
    // Callable once per tape.
    void backward(Var out);

  private:
    struct Node {
        Tensor value;
        Tensor grad;   // allocated lazily in backward()
        bool needs_grad = false;
        std::function<void()> back;
    };

    Var push(Tensor value, bool needs_grad);
    Tensor& grad_ref(Var v) { return nodes_[v.id].grad; }
    void ensure_grad(Var v);

    std::deque<Node> nodes_;  // deque: growth keeps value()/grad() refs alive
    bool backward_done_ = false;

    friend struct TapeTestPeer;
};

}  // namespace hoikit

#endif  // HOIKIT_TAPE_HPP_
