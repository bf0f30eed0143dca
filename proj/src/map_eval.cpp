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

#include "hoikit/map_eval.hpp"

#include <algorithm>
#include <stdexcept>

namespace hoikit {

namespace {

struct RankedPrediction {
    const std::string* image;
    int index;  // position within its image's prediction list
    double score;
    const ScoredTriplet* triplet;
};

double average_precision(const std::vector<bool>& tp, int num_gt) {
    if (num_gt == 0 || tp.empty()) return 0.0;
    // Precision envelope from the right, integrated over recall steps.
    std::vector<double> precision(tp.size());
    int tps = 0;
    for (size_t i = 0; i < tp.size(); ++i) {
        tps += tp[i];
        precision[i] = static_cast<double>(tps) / static_cast<double>(i + 1);
    }
    for (size_t i = tp.size() - 1; i-- > 0;)
        precision[i] = std::max(precision[i], precision[i + 1]);
    double ap = 0.0;
    for (size_t i = 0; i < tp.size(); ++i)
        if (tp[i]) ap += precision[i];  // each TP advances recall by 1/num_gt
    return ap / num_gt;
}

}  // namespace

EvalReport evaluate_map(const std::map<std::string, std::vector<ScoredTriplet>>& predictions,
                        const std::map<std::string, std::vector<TripletAnnotation>>& ground_truth,
                        const UnifiedLabelSpace& space, const RarityStats& rarity,
                        double iou_threshold) {
    // Index ground truth per (category, image); validate category ids.
    struct GtEntry {
        const TripletAnnotation* ann;
        bool matched = false;
    };
    // Image keys point into the callers' maps; compare by value, the
    // prediction and ground-truth sides hold distinct string objects.
    struct DerefLess {
        bool operator()(const std::string* a, const std::string* b) const { return *a < *b; }
    };
    std::map<int, std::map<const std::string*, std::vector<GtEntry>, DerefLess>> gt_by_cat;
    std::map<int, int> gt_counts;
    for (const auto& [image, anns] : ground_truth) {
        for (const auto& a : anns) {
            int cat = space.hoi_id(a.verb_class, a.object_class);
            if (cat < 0) {
                throw std::runtime_error("evaluate_map: ground truth in image '" + image +
                                         "' references unknown category pair (" +
                                         std::to_string(a.verb_class) + "," +
                                         std::to_string(a.object_class) + ")");
            }
            gt_by_cat[cat][&image].push_back({&a});
            ++gt_counts[cat];
        }
    }

    std::map<int, std::vector<RankedPrediction>> preds_by_cat;
    for (const auto& [image, preds] : predictions) {
        for (int i = 0; i < static_cast<int>(preds.size()); ++i) {
            const auto& p = preds[i];
            int cat = space.hoi_id(p.verb_class, p.object_class);
            if (cat < 0) {
                throw std::runtime_error("evaluate_map: prediction in image '" + image +
                                         "' references unknown category pair (" +
                                         std::to_string(p.verb_class) + "," +
                                         std::to_string(p.object_class) + ")");
            }
            preds_by_cat[cat].push_back({&image, i, p.score, &p});
        }
    }

    EvalReport report;
    double full_sum = 0.0, rare_sum = 0.0, nonrare_sum = 0.0;
    int full_n = 0, rare_n = 0, nonrare_n = 0;

    for (auto& [cat, images] : gt_by_cat) {
        auto& ranked = preds_by_cat[cat];
        std::sort(ranked.begin(), ranked.end(),
                  [](const RankedPrediction& a, const RankedPrediction& b) {
                      if (a.score != b.score) return a.score > b.score;
                      if (*a.image != *b.image) return *a.image < *b.image;
                      return a.index < b.index;
                  });
        std::vector<bool> tp(ranked.size(), false);
        for (size_t r = 0; r < ranked.size(); ++r) {
            auto img_it = images.find(ranked[r].image);
            if (img_it == images.end()) continue;  // no GT of this category here → FP
            double best = -1.0;
            GtEntry* best_gt = nullptr;
            for (auto& g : img_it->second) {
                if (g.matched) continue;
                double overlap = std::min(iou(ranked[r].triplet->human, g.ann->human),
                                          iou(ranked[r].triplet->object, g.ann->object));
                if (overlap > best) {
                    best = overlap;
                    best_gt = &g;
                }
            }
            if (best_gt != nullptr && best >= iou_threshold) {
                best_gt->matched = true;
                tp[r] = true;
            }
        }
        double ap = average_precision(tp, gt_counts[cat]);
        report.per_category_ap[cat] = ap;
        full_sum += ap;
        ++full_n;
        if (rarity.rare_set.count(cat)) {
            rare_sum += ap;
            ++rare_n;
        } else if (rarity.nonrare_set.count(cat)) {
            nonrare_sum += ap;
            ++nonrare_n;
        }
    }

    report.map_full = full_n > 0 ? full_sum / full_n : 0.0;
    report.map_rare = rare_n > 0 ? rare_sum / rare_n : 0.0;
    report.map_nonrare = nonrare_n > 0 ? nonrare_sum / nonrare_n : 0.0;
    return report;
}

}  // namespace hoikit
