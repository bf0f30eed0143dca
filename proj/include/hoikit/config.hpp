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
#include <stdexcept>
#include <string>
#include <vector>

#include "hoikit/detector.hpp"
#include "hoikit/geometry.hpp"
#include "hoikit/synth.hpp"
#include "hoikit/train.hpp"

namespace hoikit {

// Config files are strict JSON: every key must be recognized, so typos fail
// loudly before any work happens.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct ProviderConfig {
    std::string name = "random_projection";
    uint64_t seed = 21;
    int dim = 0;  // 0: follow the model's embed_dim (random_projection only)
    std::string weights;  // required for toy_dual
};

struct MergeCommandConfig {
    std::vector<std::string> manifests;
    std::string out_dir;
};

// Sources for the rarity counts that drive tail-targeted sampling and the
// rare/non-rare mAP split: an explicit id→count map, or a unified annotations
// file to count, or neither (uniform weights, empty split).
struct RarityConfig {
    std::map<int, int> counts;
    std::string annotations;
    int rare_threshold = 10;
};

struct FilterSpec {
    bool enabled = false;
    ProviderConfig provider;
    double threshold = 0.5;
};

struct SynthCommandConfig {
    std::string label_space;
    int n = 0;
    uint64_t seed = 1;
    std::string out_dir;
    RarityConfig rarity;
    SynthConfig synth;
    FilterSpec filter;
};

struct TrainCommandConfig {
    std::string label_space;
    std::string train_dir;
    std::string eval_dir;  // optional: no per-epoch eval when empty
    std::string out_dir;
    RarityConfig rarity;
    DetectorConfig model;
    TrainConfig train;
    ProviderConfig provider;
};

struct EvalCommandConfig {
    std::string label_space;
    std::string checkpoint;
    std::string corpus_dir;
    std::string out;
    RarityConfig rarity;
    ProviderConfig provider;
    int top_k = 8;
    double iou = 0.5;
};

struct TextualPromptSelection {
    bool all_objects = true;
    bool all_interactions = true;
    std::vector<int> objects;
    std::vector<int> interactions;
};

struct VisualPromptFile {
    std::string image;
    std::vector<std::pair<int, Box>> objects;
    std::vector<std::tuple<int, Box, Box>> interactions;
};

struct PredictCommandConfig {
    std::string label_space;
    std::string checkpoint;
    ProviderConfig provider;
    std::vector<std::string> images;
    std::string out_dir;
    int top_k = 5;
    std::string mode = "textual";  // "textual" | "visual"
    TextualPromptSelection textual;
    VisualPromptFile visual;
};

struct AblateCommandConfig {
    TrainCommandConfig base;
    std::vector<std::string> toggles;
    std::vector<uint64_t> seeds;  // defaults to {base.train.seed}
    std::string out_dir;
};

struct PlotCommandConfig {
    std::string kind;  // "loss" | "rarity"
    std::string input;
    std::string label_space;      // rarity only
    int rare_threshold = 10;      // rarity only
    std::string out;
};

// Parsers reject unknown keys at every nesting level (ConfigError names the
// offending key and context) and validate basic ranges.
MergeCommandConfig parse_merge_config(const std::string& json_text);
SynthCommandConfig parse_synth_config(const std::string& json_text);
TrainCommandConfig parse_train_config(const std::string& json_text);
EvalCommandConfig parse_eval_config(const std::string& json_text);
PredictCommandConfig parse_predict_config(const std::string& json_text);
AblateCommandConfig parse_ablate_config(const std::string& json_text);
PlotCommandConfig parse_plot_config(const std::string& json_text);

std::string read_text_file(const std::string& path);

}  // namespace hoikit
