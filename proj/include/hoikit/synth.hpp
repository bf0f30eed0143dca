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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hoikit/geometry.hpp"
#include "hoikit/label_space.hpp"
#include "hoikit/raster.hpp"
#include "hoikit/rng.hpp"

namespace hoikit {

class SceneEmbedder;

// Synthetic-corpus generator: prompt composition over phrase pools, a
// procedural scene renderer with exact labels, a consistency-score filter,
// and inverse-frequency category sampling aimed at the tail.

// Phrase pools for the free prompt slots. The verb/object slots always carry
// the triplet's canonical terms and are not pooled.
struct PhrasePools {
    std::vector<std::string> persons;
    std::vector<std::string> environments;
    std::vector<std::string> photo_infos;

    static PhrasePools defaults();
};

struct HOIPrompt {
    std::string person_desc;
    std::string verb;         // canonical action term
    std::string object_desc;  // canonical object term
    std::string environment;
    std::string photo_info;
    std::pair<int, int> triplet{-1, -1};  // (action id, object id)

    // All five slots joined into one caption, e.g.
    // "a woman holding a cup, in a park, studio lighting".
    std::string sentence() const;
};

// Slots are drawn uniformly from the pools in a fixed order (person,
// environment, photo), so equal rng states give equal prompts. Throws on an
// empty pool or a triplet outside the space.
HOIPrompt compose_hoiprompt(std::pair<int, int> triplet, const UnifiedLabelSpace& space, Rng& rng,
                            const PhrasePools& pools = PhrasePools::defaults());

// One figure on the canvas. The box is normalized; the glyph index selects
// the shape/color; category keeps the canonical object id for labeling
// (ignored for actors).
struct Placement {
    Box box;
    int archetype = 0;
    int category = -1;
};

struct InteractionLink {
    int actor = 0;
    int object = 0;
    int action = -1;  // canonical action id
};

struct SceneSpec {
    int canvas = 64;
    std::vector<Placement> actors;
    std::vector<Placement> objects;
    std::vector<InteractionLink> links;
    uint64_t render_seed = 0;
};

struct SynthSample {
    Raster image;
    std::vector<TripletAnnotation> annotations;
    HOIPrompt prompt;
    double quality_score = 0.0;
};

// Where the object sits relative to the actor.
enum class SpatialRelation {
    kContact,  // overlapping the actor's side (hold, carry, ...)
    kMount,    // actor on top of the object (ride, sit_on, ...)
    kBeside,   // next to the actor with a small gap (kick, push, ...)
    kApart,    // clearly separated, above head height (throw, watch, ...)
};

// Table lookup for common verbs; unknown verbs hash to one of the four
// relations so every action has a stable rule.
SpatialRelation relation_for_action(const std::string& verb);

// Object glyph vocabulary (shape + fill color per archetype). The same
// drawing routine backs the renderer and any template-matching check, so a
// glyph rendered alone is pixel-identical to its in-scene appearance.
int glyph_count();
void draw_object_glyph(Raster& img, int archetype, int x0, int y0, int x1, int y1);
void draw_person_glyph(Raster& img, int x0, int y0, int x1, int y1);

// Samples a single-actor / single-object scene whose placements follow the
// action's spatial relation. All box corners lie on the pixel grid. Requires
// canvas >= 64 so every relation fits with margins.
SceneSpec make_scene_spec(std::pair<int, int> triplet, const UnifiedLabelSpace& space, Rng& rng,
                          int canvas = 64);

// Draws the spec and emits annotations straight from the placements (bit
// exact). Returns nullopt when any placement pair overlaps by more than the
// budget (intersection area over the smaller box area).
std::optional<SynthSample> render_scene(const SceneSpec& spec, double occlusion_budget = 0.5);

struct FilterResult {
    std::vector<SynthSample> kept;  // quality_score filled in
    double mean_kept_score = 0.0;   // 0 when nothing is kept
};

FilterResult filter_samples(const std::vector<SynthSample>& samples,
                            const std::function<double(const SynthSample&)>& score_fn,
                            double threshold = 0.5);

// Image-vs-caption cosine under the given embedder, affinely mapped to [0,1].
std::function<double(const SynthSample&)> make_consistency_scorer(const SceneEmbedder& embedder);

struct SynthConfig {
    int canvas = 64;
    double occlusion_budget = 0.5;
    int max_attempts = 64;  // placement retries before giving up on a sample
    PhrasePools pools = PhrasePools::defaults();
};

// Weight 1/(count+1) per HOI category of the space; categories without a
// recorded count weigh 1 (the rarest possible).
std::vector<double> inverse_frequency_weights(const RarityStats& stats,
                                              const UnifiedLabelSpace& space);
int sample_hoi(const std::vector<double>& weights, Rng& rng);

struct SynthDataset {
    std::vector<SynthSample> samples;
    std::vector<int> hoi_ids;  // sampled HOI category per sample
};

// Sample `index` of the stream rooted at `seed`. Depends only on
// (seed, index), so generation restarts and parallelizes cleanly.
SynthSample generate_sample(int index, const RarityStats& stats, const UnifiedLabelSpace& space,
                            uint64_t seed, const SynthConfig& cfg = {});

SynthDataset generate_dataset(int n, const RarityStats& stats, const UnifiedLabelSpace& space,
                              uint64_t seed, const SynthConfig& cfg = {});

// Layout: dir/images/synth_NNNNNN.ppm, dir/records.txt (one annotation record
// per line, score = quality score), dir/manifest.json. The manifest pins the
// seed, config, pools, category counts and label-space fingerprint — enough
// to regenerate the directory byte-identically.
void write_dataset(const std::string& dir, const SynthDataset& ds, const RarityStats& stats,
                   const UnifiedLabelSpace& space, uint64_t seed, const SynthConfig& cfg);

struct GenerationManifest {
    int n = 0;
    uint64_t seed = 0;
    SynthConfig config;
    std::map<int, int> counts;  // HOI id → source count driving the weights
    uint64_t label_space_fingerprint = 0;
};

void write_generation_manifest(const std::string& path, const GenerationManifest& m);
GenerationManifest read_generation_manifest(const std::string& path);

}  // namespace hoikit
