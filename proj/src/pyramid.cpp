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

#include "hoikit/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hoikit/checksum.hpp"
#include "hoikit/rng.hpp"

namespace hoikit {

namespace {
Tensor frozen_randn(uint64_t seed, const char* tag, int rows, int cols, double stddev) {
    Rng rng(derive_seed(seed, fnv1a64(tag)));
    return Tensor::randn(rows, cols, rng, stddev);
}
}  // namespace

ConditionedExtractor::ConditionedExtractor(uint64_t seed, int cond_dim, std::vector<int> allowed_t)
    : seed_(seed), cond_dim_(cond_dim), allowed_t_(std::move(allowed_t)) {
    conv1_w_ = frozen_randn(seed, "conv1.w", 4 * 4 * 3, kC1, 1.0 / std::sqrt(4.0 * 4 * 3));
    conv1_b_ = Tensor::zeros(1, kC1);
    conv2_w_ = frozen_randn(seed, "conv2.w", 4 * 4 * kC1, kC2, 1.0 / std::sqrt(4.0 * 4 * kC1));
    conv2_b_ = Tensor::zeros(1, kC2);
    cond1_w_ = frozen_randn(seed, "cond1.w", cond_dim, 2 * kC1, 1.0 / std::sqrt(double(cond_dim)));
    cond2_w_ = frozen_randn(seed, "cond2.w", cond_dim, 2 * kC2, 1.0 / std::sqrt(double(cond_dim)));
}

double ConditionedExtractor::noise_variance(int t) {
    if (t < 0) throw std::runtime_error("noise_variance: t must be >= 0");
    return static_cast<double>(t) / 1000.0;
}

uint64_t ConditionedExtractor::weights_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor* t : {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_, &cond1_w_, &cond2_w_})
        h = fnv1a64_bytes(t->data.data(), t->data.size() * sizeof(double), h);
    return h;
}

ConditionedPyramid ConditionedExtractor::forward(Tape& tape, const std::vector<double>& image_rows,
                                                 int h, int w, Var cond, int t,
                                                 uint64_t image_checksum) const {
    if (std::find(allowed_t_.begin(), allowed_t_.end(), t) == allowed_t_.end())
        throw std::runtime_error("ConditionedExtractor: t=" + std::to_string(t) +
                                 " outside the configured schedule");
    if (static_cast<int>(image_rows.size()) != h * w * 3)
        throw std::runtime_error("ConditionedExtractor: image rows mismatch h*w*3");
    if (tape.value(cond).rows != 1 || tape.value(cond).cols != cond_dim_)
        throw std::runtime_error("ConditionedExtractor: condition must be 1 x cond_dim");

    Tensor x(h * w, 3);
    std::copy(image_rows.begin(), image_rows.end(), x.data.begin());
    if (t > 0) {
        double sd = std::sqrt(noise_variance(t));
        Rng noise(derive_seed(seed_, static_cast<uint64_t>(t), image_checksum));
        for (double& v : x.data) v += sd * noise.normal();
    }

    auto stage = [&](Var in, int hh, int ww, const Tensor& cw, const Tensor& cb,
                     const Tensor& condw, int channels) {
        Var patches = tape.extract_patches(in, hh, ww, 4, 2, 1);
        Var f = tape.add_rowvec(tape.matmul(patches, tape.constant(cw)), tape.constant(cb));
        Var a = tape.tanh_(f);
        Var gb = tape.matmul(cond, tape.constant(condw));  // 1 x 2*channels
        Var gamma = tape.slice_cols(gb, 0, channels);
        Var beta = tape.slice_cols(gb, channels, channels);
        return tape.add_rowvec(tape.mul_rowvec(a, tape.add_scalar(gamma, 1.0)), beta);
    };

    ConditionedPyramid pyr;
    pyr.t = t;
    Var in0 = tape.constant(std::move(x));
    Var s1 = stage(in0, h, w, conv1_w_, conv1_b_, cond1_w_, kC1);
    pyr.scales.push_back({s1, h / 2, w / 2, kC1});
    Var s2 = stage(s1, h / 2, w / 2, conv2_w_, conv2_b_, cond2_w_, kC2);
    pyr.scales.push_back({s2, h / 4, w / 4, kC2});
    return pyr;
}

}  // namespace hoikit
