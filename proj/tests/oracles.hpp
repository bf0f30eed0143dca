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
//
// Independent reference implementations used only by tests. Each oracle is
// deliberately naive (counting, enumeration, direct formulas) so it shares no
// code path with the library under test.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hoikit/geometry.hpp"

namespace oracles {

// Pixel-counting box overlap measures. Boxes are rasterized onto a grid with
// `cells_per_unit` cells per coordinate unit; a cell counts as inside a box
// when its center is. Exact whenever every corner coordinate is a multiple of
// the cell pitch.
struct RasterOverlap {
    double iou = 0.0;
    double giou = 0.0;
    bool hull_equals_union = false;
};

inline RasterOverlap raster_overlap(const hoikit::Box& a, const hoikit::Box& b,
                                    int cells_per_unit = 1000) {
    auto ca = a.corners(), cb = b.corners();
    double gx0 = std::floor(std::min(ca[0], cb[0]) * cells_per_unit) - 1;
    double gy0 = std::floor(std::min(ca[1], cb[1]) * cells_per_unit) - 1;
    double gx1 = std::ceil(std::max(ca[2], cb[2]) * cells_per_unit) + 1;
    double gy1 = std::ceil(std::max(ca[3], cb[3]) * cells_per_unit) + 1;
    long in_a = 0, in_b = 0, in_both = 0, in_hull = 0;
    for (long y = static_cast<long>(gy0); y < static_cast<long>(gy1); ++y) {
        double py = (y + 0.5) / cells_per_unit;
        for (long x = static_cast<long>(gx0); x < static_cast<long>(gx1); ++x) {
            double px = (x + 0.5) / cells_per_unit;
            bool ia = px > ca[0] && px < ca[2] && py > ca[1] && py < ca[3];
            bool ib = px > cb[0] && px < cb[2] && py > cb[1] && py < cb[3];
            in_a += ia;
            in_b += ib;
            in_both += ia && ib;
            bool ih = px > std::min(ca[0], cb[0]) && px < std::max(ca[2], cb[2]) &&
                      py > std::min(ca[1], cb[1]) && py < std::max(ca[3], cb[3]);
            in_hull += ih;
        }
    }
    long in_union = in_a + in_b - in_both;
    RasterOverlap r;
    r.iou = in_union > 0 ? static_cast<double>(in_both) / in_union : 0.0;
    r.giou = in_hull > 0
                 ? r.iou - static_cast<double>(in_hull - in_union) / in_hull
                 : r.iou;
    r.hull_equals_union = in_hull == in_union;
    return r;
}

// Exhaustive minimum-cost assignment by permutation enumeration. rows ≤ cols
// required; returns per-row column (rows! permutations of column subsets — use
// only for tiny instances). Ties resolved to the lexicographically smallest
// assignment vector among all optima.
inline std::vector<int> brute_force_assignment(const std::vector<std::vector<double>>& cost) {
    int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    int m = static_cast<int>(cost[0].size());
    std::vector<int> cols(m);
    for (int j = 0; j < m; ++j) cols[j] = j;
    std::vector<int> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<int> pick(n);
    std::vector<bool> used(m, false);
    std::function<void(int, double)> rec = [&](int row, double acc) {
        if (row == n) {
            if (acc < best_cost - 1e-15 ||
                (std::abs(acc - best_cost) <= 1e-15 && (best.empty() || pick < best))) {
                best_cost = std::min(best_cost, acc);
                best = pick;
            }
            return;
        }
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = true;
            pick[row] = j;
            rec(row + 1, acc + cost[row][j]);
            used[j] = false;
        }
    };
    rec(0, 0.0);
    return best;
}

// All-point interpolated average precision computed directly from a
// precision-recall staircase: walk the ranked detections, record (recall,
// precision) after each, then integrate precision-envelope over recall.
inline double ap_from_flags(const std::vector<bool>& tp_flags, int num_gt) {
    if (num_gt == 0) return 0.0;
    std::vector<double> recall, precision;
    int tp = 0, fp = 0;
    for (bool f : tp_flags) {
        if (f)
            ++tp;
        else
            ++fp;
        recall.push_back(static_cast<double>(tp) / num_gt);
        precision.push_back(static_cast<double>(tp) / (tp + fp));
    }
    double ap = 0.0;
    double prev_r = 0.0;
    for (size_t i = 0; i < recall.size(); ++i) {
        double max_p = 0.0;
        for (size_t j = i; j < precision.size(); ++j) max_p = std::max(max_p, precision[j]);
        ap += (recall[i] - prev_r) * max_p;
        prev_r = recall[i];
    }
    return ap;
}

// Naive detection-metric evaluator: flat tuples in, per-category AP out.
// Matching mirrors the documented protocol (rank by score, tie-break by
// image id then index, greedy best-unmatched min-IoU), while the AP integral
// uses the O(n²) forward-max form in ap_from_flags below.
struct FlatPrediction {
    std::string image;
    int index;  // position within its image's list
    hoikit::Box human, object;
    int category;
    double score;
};
struct FlatGroundTruth {
    std::string image;
    hoikit::Box human, object;
    int category;
};
struct OracleEval {
    std::map<int, double> ap;
    double map_full = 0.0;
};

inline double ap_from_flags(const std::vector<bool>& tp_flags, int num_gt);

inline OracleEval oracle_evaluate(std::vector<FlatPrediction> preds,
                                  const std::vector<FlatGroundTruth>& gts, double thr) {
    std::set<int> cats;
    for (const auto& g : gts) cats.insert(g.category);
    OracleEval out;
    for (int cat : cats) {
        std::vector<FlatPrediction> pc;
        for (const auto& p : preds)
            if (p.category == cat) pc.push_back(p);
        std::sort(pc.begin(), pc.end(), [](const FlatPrediction& a, const FlatPrediction& b) {
            return std::make_tuple(-a.score, a.image, a.index) <
                   std::make_tuple(-b.score, b.image, b.index);
        });
        std::map<std::string, std::vector<int>> gt_idx;  // image → indices into gts
        for (int i = 0; i < static_cast<int>(gts.size()); ++i)
            if (gts[i].category == cat) gt_idx[gts[i].image].push_back(i);
        std::set<int> matched;
        std::vector<bool> flags;
        int num_gt = 0;
        for (const auto& [img, idxs] : gt_idx) num_gt += static_cast<int>(idxs.size());
        for (const auto& p : pc) {
            int best_gt = -1;
            double best = -1.0;
            auto it = gt_idx.find(p.image);
            if (it != gt_idx.end()) {
                for (int gi : it->second) {
                    if (matched.count(gi)) continue;
                    double ov = std::min(hoikit::iou(p.human, gts[gi].human),
                                         hoikit::iou(p.object, gts[gi].object));
                    if (ov > best) {
                        best = ov;
                        best_gt = gi;
                    }
                }
            }
            if (best_gt >= 0 && best >= thr) {
                matched.insert(best_gt);
                flags.push_back(true);
            } else {
                flags.push_back(false);
            }
        }
        out.ap[cat] = ap_from_flags(flags, num_gt);
    }
    double s = 0.0;
    for (const auto& [c, a] : out.ap) s += a;
    out.map_full = out.ap.empty() ? 0.0 : s / static_cast<double>(out.ap.size());
    return out;
}

// Central finite differences of a scalar function of a parameter vector.
inline std::vector<double> finite_difference_grad(const std::function<double(const std::vector<double>&)>& f,
                                                  std::vector<double> x, double eps = 1e-5) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double orig = x[i];
        x[i] = orig + eps;
        double fp = f(x);
        x[i] = orig - eps;
        double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2 * eps);
    }
    return g;
}

}  // namespace oracles
