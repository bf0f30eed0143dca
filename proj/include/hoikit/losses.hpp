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

#ifndef HOIKIT_LOSSES_HPP_
#define HOIKIT_LOSSES_HPP_

#include <utility>
#include <vector>

#include "hoikit/detector.hpp"
#include "hoikit/geometry.hpp"
#include "hoikit/label_space.hpp"
#include "hoikit/prompts.hpp"
#include "hoikit/tape.hpp"
#include "hoikit/tensor.hpp"

namespace hoikit {

struct LossWeights {
    double box = 2.5;
    double giou = 1.0;
    double obj = 1.0;    // object contrastive term
    double inter = 1.0;  // interaction contrastive term
};

struct MatchResult {
    // (query row, ground-truth column), ascending by query; min(N, M) pairs.
    std::vector<std::pair<int, int>> pairs;
    double total_cost = 0.0;
};

// Minimum-cost rectangular assignment (O(n^2 m) potentials method).  All
// entries must be finite.  Among equal-cost optima the returned pair list is
// the lexicographically smallest, so ties resolve identically everywhere.
MatchResult hungarian_match(const Tensor& cost);

// Pairwise query-to-annotation matching cost:
//   w.box  * L1 over both boxes' center parameters
// + w.giou * ((1 - GIoU_human) + (1 - GIoU_object))
// - w.obj  * P_o[gt object]  -  w.inter * P_i[gt interaction]
// Throws when a ground-truth category is missing from a bank or the label
// space lacks the (verb, object) pair.
Tensor match_cost(const std::vector<Box>& human_boxes, const std::vector<Box>& object_boxes,
                  const Tensor& p_o, const Tensor& p_i,
                  const std::vector<TripletAnnotation>& gts, const PromptBank& object_bank,
                  const PromptBank& interaction_bank, const UnifiedLabelSpace& space,
                  const LossWeights& w = {});

// InfoNCE over a square similarity matrix whose diagonal holds the positives:
// mean over rows m of -log softmax(S[m] / tau)[m].  tau must be positive.
double contrastive_loss(const Tensor& sims, double tau);

// Mean over queries of -log p(target category) under the prompt classifier,
// with a trainable background row (the named parameter, re-normalized)
// appended after the bank.  targets[q] in [0, K] where K means background.
Var query_contrastive_term(ParamStore& ps, const PromptClassifier& clf, Var queries,
                           const Tensor& bank_rows, const char* background_param, Var tau,
                           const std::vector<int>& targets);

struct LossBreakdown {
    double l_b = 0.0;    // box L1
    double l_g = 0.0;    // GIoU
    double l_c_o = 0.0;  // object contrastive
    double l_c_i = 0.0;  // interaction contrastive
    double total = 0.0;
    double tau = 0.0;
};

struct LossGraph {
    Var total;  // 1x1, differentiable
    LossBreakdown values;
    MatchResult match;
};

// Assembles the full training objective on the forward pass's tape:
//   total = w.box*l_b + w.giou*l_g + w.obj*l_c_o + w.inter*l_c_i
// Box terms average over matched pairs (zero when the image has no
// annotations).  Contrastive terms average over all queries; unmatched
// queries target a learned background embedding appended to the bank.
LossGraph total_loss(MPHOIDetector& det, Tape& tape, const ForwardResult& fr,
                     const std::vector<TripletAnnotation>& gts, const PromptBank& object_bank,
                     const PromptBank& interaction_bank, const UnifiedLabelSpace& space,
                     const LossWeights& w = {});

}  // namespace hoikit

#endif  // HOIKIT_LOSSES_HPP_
