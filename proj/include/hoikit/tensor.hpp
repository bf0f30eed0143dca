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

#ifndef HOIKIT_TENSOR_HPP_
#define HOIKIT_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

#include "hoikit/rng.hpp"

namespace hoikit {

// Dense row-major 2D double matrix.  Deliberately dumb: all math lives on
// the Tape so gradients can't be forgotten.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows*cols, row-major, zero-initialized

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::runtime_error("Tensor: negative shape");
    }
    Tensor(int r, int c, std::initializer_list<double> init) : Tensor(r, c) {
        if (init.size() != data.size()) throw std::runtime_error("Tensor: init size mismatch");
        std::copy(init.begin(), init.end(), data.begin());
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    static Tensor zeros(int r, int c) { return Tensor(r, c); }
    static Tensor full(int r, int c, double v) {
        Tensor t(r, c);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor randn(int r, int c, Rng& rng, double stddev = 1.0) {
        Tensor t(r, c);
        for (auto& v : t.data) v = rng.normal() * stddev;
        return t;
    }
    static Tensor uniform(int r, int c, Rng& rng, double lo, double hi) {
        Tensor t(r, c);
        for (auto& v : t.data) v = lo + (hi - lo) * rng.uniform();
        return t;
    }
};

}  // namespace hoikit

#endif  // HOIKIT_TENSOR_HPP_
