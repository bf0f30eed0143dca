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

#include "hoikit/geometry.hpp"

#include <algorithm>

namespace hoikit {

double iou(const Box& a, const Box& b) {
    if (a == b) return 1.0;  // exactly 1 for identical boxes, incl. zero-area
    auto [ax1, ay1, ax2, ay2] = a.corners();
    auto [bx1, by1, bx2, by2] = b.corners();
    double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
    double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
    double inter = iw * ih;
    double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return (a == b) ? 1.0 : 0.0;
    return inter / uni;
}

double giou(const Box& a, const Box& b) {
    if (a == b) return 1.0;
    auto [ax1, ay1, ax2, ay2] = a.corners();
    auto [bx1, by1, bx2, by2] = b.corners();
    double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
    double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
    double inter = iw * ih;
    double uni = a.area() + b.area() - inter;
    double hull = (std::max(ax2, bx2) - std::min(ax1, bx1)) *
                  (std::max(ay2, by2) - std::min(ay1, by1));
    if (uni <= 0.0) return (a == b) ? 1.0 : 0.0;
    if (hull <= 0.0) return inter / uni;
    return inter / uni - (hull - uni) / hull;
}

}  // namespace hoikit
