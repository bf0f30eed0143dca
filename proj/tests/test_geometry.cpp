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

#include <doctest.h>

#include <cmath>

#include "hoikit/geometry.hpp"
#include "hoikit/rng.hpp"
#include "oracles.hpp"

using hoikit::Box;

namespace {

// Random box with every corner coordinate a multiple of 1/cells, so the
// pixel-counting oracle is exact on it.
Box random_grid_box(hoikit::Rng& rng, int cells) {
    int w = 2 * (1 + rng.uniform_int(cells / 4));      // even, ≥ 2 cells
    int h = 2 * (1 + rng.uniform_int(cells / 4));
    int cx = w / 2 + rng.uniform_int(cells - w + 1);   // corners stay in [0,1]
    int cy = h / 2 + rng.uniform_int(cells - h + 1);
    return Box{static_cast<double>(cx) / cells, static_cast<double>(cy) / cells,
               static_cast<double>(w) / cells, static_cast<double>(h) / cells};
}

}  // namespace

TEST_CASE("iou identity and disjoint cases") {
    Box a{0.5, 0.5, 0.2, 0.4};
    CHECK(hoikit::iou(a, a) == 1.0);
    Box b{0.1, 0.1, 0.1, 0.1};
    Box c{0.9, 0.9, 0.1, 0.1};
    CHECK(hoikit::iou(b, c) == 0.0);
    // Shared edge only: zero-area intersection.
    Box d = Box::from_corners(0.0, 0.0, 0.5, 1.0);
    Box e = Box::from_corners(0.5, 0.0, 1.0, 1.0);
    CHECK(hoikit::iou(d, e) == 0.0);
}

TEST_CASE("iou zero-area operand rule") {
    Box degenerate{0.5, 0.5, 0.0, 0.3};
    Box normal{0.5, 0.5, 0.4, 0.4};
    CHECK(hoikit::iou(degenerate, normal) == 0.0);
    CHECK(hoikit::iou(normal, degenerate) == 0.0);
    CHECK(hoikit::iou(degenerate, degenerate) == 1.0);
}

TEST_CASE("iou of half-overlapping corner boxes equals one third") {
    // Corners (0,0,1,1) vs (0.5,0,1.5,1). The expected value 1/3 was frozen
    // from the pixel-counting oracle at 1000 cells per unit.
    Box a = Box::from_corners(0.0, 0.0, 1.0, 1.0);
    Box b = Box::from_corners(0.5, 0.0, 1.5, 1.0);
    auto ref = oracles::raster_overlap(a, b, 1000);
    CHECK(ref.iou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(hoikit::iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("giou identity and tiling cases") {
    Box a{0.3, 0.7, 0.25, 0.5};
    CHECK(hoikit::giou(a, a) == 1.0);
    // Two side-by-side squares tiling their hull exactly: iou 0, no enclosure
    // penalty, so giou is exactly 0.
    Box left = Box::from_corners(0.0, 0.0, 0.5, 0.5);
    Box right = Box::from_corners(0.5, 0.0, 1.0, 0.5);
    auto ref = oracles::raster_overlap(left, right, 1000);
    CHECK(ref.giou == 0.0);
    CHECK(ref.hull_equals_union);
    CHECK(hoikit::giou(left, right) == 0.0);
}

TEST_CASE("iou and giou match the pixel-counting oracle on random grid boxes") {
    hoikit::Rng rng(20260814);
    const int cells = 200;
    for (int trial = 0; trial < 100; ++trial) {
        Box a = random_grid_box(rng, cells);
        Box b = random_grid_box(rng, cells);
        auto ref = oracles::raster_overlap(a, b, cells);
        double i = hoikit::iou(a, b);
        double g = hoikit::giou(a, b);
        CAPTURE(trial);
        CHECK(i == doctest::Approx(ref.iou).epsilon(1e-6));
        CHECK(g == doctest::Approx(ref.giou).epsilon(1e-6));
        // Symmetry.
        CHECK(hoikit::iou(b, a) == i);
        CHECK(hoikit::giou(b, a) == g);
        // giou never exceeds iou; equal exactly when hull == union.
        CHECK(g <= i + 1e-12);
        if (ref.hull_equals_union)
            CHECK(g == doctest::Approx(i).epsilon(1e-9));
        else
            CHECK(g < i - 1e-9);
    }
}

TEST_CASE("giou stays within its range on random valid boxes") {
    hoikit::Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        Box a{rng.uniform(), rng.uniform(), rng.uniform(0.01, 1.0), rng.uniform(0.01, 1.0)};
        Box b{rng.uniform(), rng.uniform(), rng.uniform(0.01, 1.0), rng.uniform(0.01, 1.0)};
        double g = hoikit::giou(a, b);
        CHECK(g > -1.0);
        CHECK(g <= 1.0);
        CHECK(g <= hoikit::iou(a, b) + 1e-12);
    }
}

TEST_CASE("corner round-trip is exact on pixel-aligned boxes") {
    // Coordinates that are multiples of 1/64 (the raster pitch used by the
    // synthetic scenes) are dyadic, so every conversion step is exact.
    for (int x0 = 0; x0 < 64; x0 += 7) {
        for (int x1 = x0 + 2; x1 <= 64; x1 += 9) {
            double a = x0 / 64.0, b = x1 / 64.0;
            Box box = Box::from_corners(a, 0.25, b, 0.75);
            auto c = box.corners();
            CHECK(c[0] == a);
            CHECK(c[1] == 0.25);
            CHECK(c[2] == b);
            CHECK(c[3] == 0.75);
        }
    }
}

TEST_CASE("corner round-trip is ulp-close on arbitrary boxes") {
    hoikit::Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        double x1 = rng.uniform(0.0, 0.5), x2 = x1 + rng.uniform(0.01, 0.5);
        double y1 = rng.uniform(0.0, 0.5), y2 = y1 + rng.uniform(0.01, 0.5);
        auto c = Box::from_corners(x1, y1, x2, y2).corners();
        CHECK(std::abs(c[0] - x1) <= 4 * std::numeric_limits<double>::epsilon());
        CHECK(std::abs(c[1] - y1) <= 4 * std::numeric_limits<double>::epsilon());
        CHECK(std::abs(c[2] - x2) <= 4 * std::numeric_limits<double>::epsilon());
        CHECK(std::abs(c[3] - y2) <= 4 * std::numeric_limits<double>::epsilon());
    }
}

TEST_CASE("box validity") {
    CHECK(Box{0.5, 0.5, 0.5, 0.5}.valid());
    CHECK(Box{0.0, 1.0, 1.0, 1.0}.valid());       // corners outside unit square are fine
    CHECK_FALSE(Box{0.5, 0.5, 0.0, 0.5}.valid()); // zero width
    CHECK_FALSE(Box{1.1, 0.5, 0.2, 0.2}.valid()); // center out of range
    CHECK_FALSE(Box{0.5, 0.5, 1.2, 0.2}.valid()); // oversized
}
