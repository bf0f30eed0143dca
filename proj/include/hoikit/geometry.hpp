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

#pragma once

#include <array>
#include <cmath>

namespace hoikit {

// Axis-aligned box in image-normalized units, stored center-format.
// Center must lie in [0,1]; width/height in (0,1]. Corners may extend past
// the unit square (a box centered at the image edge does).
struct Box {
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

    static Box from_corners(double x1, double y1, double x2, double y2) {
        return Box{0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
    }

    // (x1, y1, x2, y2)
    std::array<double, 4> corners() const {
        return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    }

    double area() const { return w * h; }

    bool valid() const {
        return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h) &&
               cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0 && w > 0.0 && w <= 1.0 &&
               h > 0.0 && h <= 1.0;
    }

    bool operator==(const Box& o) const {
        return cx == o.cx && cy == o.cy && w == o.w && h == o.h;
    }
};

// Ground-truth unit: one human-object interaction triplet.
struct TripletAnnotation {
    Box human;
    Box object;
    int object_class = -1;
    int verb_class = -1;
};

// Prediction unit for evaluation.
struct ScoredTriplet {
    Box human;
    Box object;
    int object_class = -1;
    int verb_class = -1;
    double score = 0.0;
};

// Intersection over union. Symmetric; 1 iff identical, 0 iff disjoint.
// A zero-area operand yields 0 unless both boxes are identical.
double iou(const Box& a, const Box& b);

// Generalized IoU in (-1, 1]: iou minus the enclosure penalty
// |hull \ union| / |hull|. Never exceeds iou.
double giou(const Box& a, const Box& b);

}  // namespace hoikit
