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

#include <map>
#include <string>
#include <vector>

#include "hoikit/geometry.hpp"
#include "hoikit/label_space.hpp"

namespace hoikit {

struct EvalReport {
    double map_full = 0.0;
    double map_rare = 0.0;
    double map_nonrare = 0.0;
    // AP per HOI id; only categories with ≥1 ground truth appear.
    std::map<int, double> per_category_ap;
};

// Detection-style mAP over human-object interaction triplets.
//
// Per category (an (action, object) pair of the label space), predictions are
// ranked by descending score — ties broken by (image id lexicographic, then
// prediction index within its image), which keeps the result independent of
// the order images are supplied in — and matched greedily: a prediction is a
// true positive when the best unmatched ground truth of the same category in
// the same image has min(iou(human), iou(object)) ≥ iou_threshold. Each
// ground truth matches at most once. AP uses all-point interpolation.
// map_full averages AP over categories with ≥1 ground truth; rare / non-rare
// means use the training-time rarity split.
//
// Throws when any prediction or ground truth references an (action, object)
// pair that is not part of the label space.
EvalReport evaluate_map(const std::map<std::string, std::vector<ScoredTriplet>>& predictions,
                        const std::map<std::string, std::vector<TripletAnnotation>>& ground_truth,
                        const UnifiedLabelSpace& space, const RarityStats& rarity,
                        double iou_threshold = 0.5);

}  // namespace hoikit
