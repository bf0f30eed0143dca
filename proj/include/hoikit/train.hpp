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

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hoikit/detector.hpp"
#include "hoikit/label_space.hpp"
#include "hoikit/losses.hpp"
#include "hoikit/map_eval.hpp"
#include "hoikit/nn.hpp"
#include "hoikit/prompts.hpp"
#include "hoikit/raster.hpp"
#include "hoikit/rng.hpp"

namespace hoikit {

// One image with its ground truth, as produced by the dataset writers.
struct CorpusImage {
    std::string image_id;
    Raster image;
    std::vector<TripletAnnotation> annotations;
};

struct Corpus {
    std::vector<CorpusImage> images;  // ascending image_id
};

// Reads dir/records.txt and dir/images/<image_id>.ppm. Records sharing an
// image id group into one corpus image; a record without its image file is
// an error.
Corpus load_corpus(const std::string& dir);

enum class PromptModality { kText, kVisual };

PromptModality sample_prompt_modality(Rng& rng, double p_visual = 0.5);

// Category-set signature: the sorted unique (verb id, object id) pairs of an
// image. Two images share a signature iff they show exactly the same
// object + interaction set.
using Signature = std::vector<std::pair<int, int>>;
Signature image_signature(const CorpusImage& img);

struct SignatureIndex {
    std::vector<Signature> signatures;          // sorted, unique
    std::vector<std::vector<int>> image_lists;  // corpus indices per signature
    std::vector<int> paired;                    // signature indices with >= 2 images
};
SignatureIndex build_signature_index(const Corpus& corpus);

// Uniformly picks a signature with >= 2 images, then two distinct images of
// it: (visual prompt index, training target index). Throws when no signature
// qualifies, with a message instructing the textual fallback.
std::pair<int, int> sample_visual_prompt_pair(const SignatureIndex& index, Rng& rng);

// Exemplar spec over all of the image's annotations: object crops for the
// object bank, human-object pairs for the interaction bank.
VisualPromptSpec exemplar_spec_from(const CorpusImage& img, const UnifiedLabelSpace& space);

struct TrainConfig {
    LossWeights weights;
    AdamConfig adam;
    int epochs = 1;
    int steps_per_epoch = 0;  // 0: one pass over the corpus per epoch
    double visual_prob = 0.5;
    int eval_top_k = 8;
    double eval_iou = 0.5;
    uint64_t seed = 1;
};

struct StepRecord {
    int step = 0;
    std::string image_id;
    std::string modality;  // "text" | "visual"
    LossBreakdown loss;
};

struct EpochEval {
    int epoch = 0;
    EvalReport report;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpochEval> evals;
};

// Line-delimited JSON: one record per step and per epoch eval.
void save_train_log(const TrainLog& log, const std::string& path);
TrainLog load_train_log(const std::string& path);

// Optimization loop. Each step draws the prompt modality; a visual step
// samples an exemplar/target pair and classifies against banks built from
// the exemplar image (falling back to textual banks when the corpus has no
// signature pair). Frozen providers are checksummed every step and any drift
// aborts; a non-finite loss aborts with a diagnostic dump of the offending
// image. Runs per-epoch mAP on eval_corpus unless it is empty.
TrainLog train_detector(MPHOIDetector& det, const Corpus& train_corpus, const Corpus& eval_corpus,
                        const UnifiedLabelSpace& space, const RarityStats& rarity,
                        const TrainConfig& cfg);

// Inference over a corpus with fixed banks: per-image ranked triplets.
std::map<std::string, std::vector<ScoredTriplet>> predict_corpus(MPHOIDetector& det,
                                                                 const Corpus& corpus,
                                                                 const PromptBank& object_bank,
                                                                 const PromptBank& interaction_bank,
                                                                 const UnifiedLabelSpace& space,
                                                                 int top_k);

std::map<std::string, std::vector<TripletAnnotation>> corpus_ground_truth(const Corpus& corpus);

// Textual banks over the whole label space; mAP at the given IoU threshold.
EvalReport evaluate_detector(MPHOIDetector& det, const Corpus& corpus,
                             const UnifiedLabelSpace& space, const RarityStats& rarity,
                             int top_k = 8, double iou_threshold = 0.5);

// Textual banks covering every category of the space.
PromptBank full_textual_object_bank(const UnifiedLabelSpace& space, const SceneEmbedder& emb);
PromptBank full_textual_interaction_bank(const UnifiedLabelSpace& space, const SceneEmbedder& emb);

}  // namespace hoikit
