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

#ifndef HOIKIT_DETECTOR_HPP_
#define HOIKIT_DETECTOR_HPP_

#include <memory>
#include <string>
#include <vector>

#include "hoikit/embed.hpp"
#include "hoikit/label_space.hpp"
#include "hoikit/nn.hpp"
#include "hoikit/prompts.hpp"
#include "hoikit/pyramid.hpp"
#include "hoikit/raster.hpp"

namespace hoikit {

struct DetectorConfig {
    int num_queries = 32;   // N: candidate pairs per image
    int channels = 64;      // C: query/feature width
    int embed_dim = 32;     // D: prompt embedding width (must match provider)
    int heads = 4;
    int decoder_layers = 3;  // per decoder (instance and interaction)
    int encoder_layers = 1;
    int ffn_hidden = 128;
    int image_size = 64;  // square RGB input
    // ablation wiring; parameters always exist, toggles gate the graph only
    bool use_fsd = true;    // conditioned pyramid + gated fusion
    bool use_fclip = true;  // scene embedding feeds the adaptors
    bool use_alpha = true;  // condition adaptor for the pyramid
    bool use_beta = true;   // interaction-query offset adaptor
    int t_step = 0;
    uint64_t seed = 1;
};

// Three-layer box regression head; coordinates squashed to (0,1), center form.
struct BoxHead {
    Linear l1, l2, l3;
    static BoxHead create(ParamStore& ps, const std::string& prefix, int in, int hidden, Rng& rng);
    Var forward(ParamStore& ps, Var x) const;
};

// Everything one forward pass leaves on the tape.
struct ForwardResult {
    Var f;             // encoder tokens (HW x C), pre-fusion
    Var f_prime;       // tokens the interaction decoder consumed
    Var qh, qo;        // decoded instance streams (N x C each)
    Var qi;            // decoded interaction queries, offset applied (N x C)
    Var human_boxes;   // N x 4 center format in (0,1)
    Var object_boxes;  // N x 4
    Var p_o;           // N x |object bank| distributions
    Var p_i;           // N x |interaction bank| distributions
    Var tau;           // 1x1, the positive learned temperature
    uint64_t image_checksum = 0;
};

// Plain-value snapshot for inference consumers.
struct DetectionOutput {
    std::vector<Box> human_boxes, object_boxes;
    Tensor p_o, p_i;
    double tau = 0.0;
};

class MPHOIDetector {
  public:
    MPHOIDetector(DetectorConfig cfg, const SceneEmbedder* embedder);

    // Builds the full graph on `tape` (binds the parameter store to it).
    ForwardResult forward(Tape& tape, const Raster& image, const PromptBank& object_bank,
                          const PromptBank& interaction_bank);
    static DetectionOutput snapshot(const Tape& tape, const ForwardResult& fr);

    // Ranked triplets: per query, per interaction category, score
    // P_o[object of category] * P_i[category]; top_k kept across the image.
    std::vector<ScoredTriplet> predict(const Raster& image, const PromptBank& object_bank,
                                       const PromptBank& interaction_bank,
                                       const UnifiedLabelSpace& space, int top_k);

    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    const DetectorConfig& config() const { return cfg_; }
    const SceneEmbedder* embedder() const { return embedder_; }
    const ConditionedExtractor& extractor() const { return extractor_; }
    const PromptClassifier& object_classifier() const { return clf_o_; }
    const PromptClassifier& interaction_classifier() const { return clf_i_; }

    // Names of the trainable tensors the losses may touch beyond the modules.
    static constexpr const char* kLogTemperature = "log_temperature";
    static constexpr const char* kObjectBackground = "bg.object";
    static constexpr const char* kInteractionBackground = "bg.interaction";

    // Positive temperature as a tape node (exp of the stored log).
    Var temperature(Tape& tape);

    void save_checkpoint(const std::string& path, uint64_t label_space_fingerprint) const;
    // Rebuilds a detector from file; embedder must match the stored provider
    // fingerprint (checked).
    static MPHOIDetector load_checkpoint(const std::string& path, const SceneEmbedder* embedder,
                                         uint64_t* label_space_fingerprint = nullptr);

  private:
    DetectorConfig cfg_;
    const SceneEmbedder* embedder_;
    ConditionedExtractor extractor_;
    Conv2d conv1_, conv2_, conv3_;
    std::vector<EncoderLayer> encoder_;
    std::vector<DecoderLayer> instance_dec_, interaction_dec_;
    BoxHead head_h_, head_o_;
    PromptClassifier clf_o_, clf_i_;
    Mlp alpha_, beta_;
    Linear fuse1_, fuse2_;  // per-scale 1x1 projections into C
    Tensor positions_;      // fixed sinusoidal table for encoder tokens
    ParamStore store_;
};

}  // namespace hoikit

#endif  // HOIKIT_DETECTOR_HPP_
