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

#ifndef HOIKIT_PYRAMID_HPP_
#define HOIKIT_PYRAMID_HPP_

#include <cstdint>
#include <vector>

#include "hoikit/tape.hpp"
#include "hoikit/tensor.hpp"

namespace hoikit {

struct PyramidScale {
    Var features;  // (h*w) x channels, on the caller's tape
    int h = 0, w = 0, channels = 0;
};

struct ConditionedPyramid {
    std::vector<PyramidScale> scales;  // strictly decreasing resolution
    int t = 0;
};

// Frozen, seeded multi-scale convolutional stack whose per-scale activations
// are modulated by a conditioning embedding (scale-and-shift computed by a
// frozen linear map of the condition).  Stands in for a text-conditioned
// denoiser queried for intermediate features: one forward pass, no iterative
// refinement.  The weights are constants on the tape, so nothing here trains,
// but gradients flow through the modulation back into the condition.
//
// t injects Gaussian noise into the input first, with linear variance
// schedule var(t) = t/1000 over 1000 nominal steps; the noise stream is
// derived from (seed, t, image checksum), keeping the whole call a pure
// function of (image, condition, t).
class ConditionedExtractor {
  public:
    ConditionedExtractor(uint64_t seed, int cond_dim, std::vector<int> allowed_t = {0, 100, 500});

    // image_rows: (h*w) x 3 values in [0,1]; cond: 1 x cond_dim Var.
    ConditionedPyramid forward(Tape& tape, const std::vector<double>& image_rows, int h, int w,
                               Var cond, int t, uint64_t image_checksum) const;

    static double noise_variance(int t);  // t/1000, valid for t >= 0
    uint64_t seed() const { return seed_; }
    int cond_dim() const { return cond_dim_; }
    const std::vector<int>& allowed_t() const { return allowed_t_; }
    uint64_t weights_checksum() const;

    // scale geometry: two stride-2 stages (4x4 kernels, pad 1)
    static constexpr int kC1 = 8;
    static constexpr int kC2 = 16;

  private:
    uint64_t seed_;
    int cond_dim_;
    std::vector<int> allowed_t_;
    Tensor conv1_w_, conv1_b_;  // (4*4*3) x kC1
    Tensor conv2_w_, conv2_b_;  // (4*4*kC1) x kC2
    Tensor cond1_w_;            // cond_dim x 2*kC1  (gamma | beta)
    Tensor cond2_w_;            // cond_dim x 2*kC2
};

}  // namespace hoikit

#endif  // HOIKIT_PYRAMID_HPP_
