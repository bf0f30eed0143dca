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

#include <ostream>
#include <string>
#include <vector>

#include "hoikit/config.hpp"
#include "hoikit/label_space.hpp"
#include "hoikit/train.hpp"

namespace hoikit {

// Relative paths resolve against the workspace root; absolute paths and empty
// (optional) paths pass through.
std::string resolve_path(const std::string& root, const std::string& path);
void resolve_config_paths(MergeCommandConfig& c, const std::string& root);
void resolve_config_paths(SynthCommandConfig& c, const std::string& root);
void resolve_config_paths(TrainCommandConfig& c, const std::string& root);
void resolve_config_paths(EvalCommandConfig& c, const std::string& root);
void resolve_config_paths(PredictCommandConfig& c, const std::string& root);
void resolve_config_paths(AblateCommandConfig& c, const std::string& root);
void resolve_config_paths(PlotCommandConfig& c, const std::string& root);

// Rarity basis for a run: explicit counts win, else an annotation file, else
// the fallback corpus' own ground truth.
RarityStats resolve_rarity(const RarityConfig& cfg, const UnifiedLabelSpace& space,
                           const Corpus* fallback = nullptr);

// Commands write their primary artifacts to disk and a human summary to
// `out`; warnings go to `err`. Failures throw: ConfigError/invalid_argument
// for validation problems, runtime_error for execution problems. Every
// command is a pure function of (config bytes, input bytes) — re-running
// reproduces the artifacts bit for bit.
void cmd_merge(const MergeCommandConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_synth(const SynthCommandConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_train(const TrainCommandConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_eval(const EvalCommandConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_predict(const PredictCommandConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_ablate(const AblateCommandConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_plot(const PlotCommandConfig& cfg, std::ostream& out, std::ostream& err);

// One ablation setting applied to a base run. Unknown toggle names throw
// before anything runs. Valid toggles: base, fsd_off, fclip_off, alpha_off,
// beta_off, t0, t100, t500, text_only, obj_contrast_off, inter_contrast_off,
// data_half.
struct AblationVariant {
    TrainCommandConfig cfg;
    double data_fraction = 1.0;  // leading fraction of the training corpus
};
AblationVariant apply_ablation_toggle(const TrainCommandConfig& base, const std::string& toggle);

struct AblationRow {
    std::string toggle;
    uint64_t seed = 0;
    EvalReport report;
};

// Figure emitters; output bytes depend only on the inputs.
void write_loss_curve_svg(const TrainLog& log, const std::string& path);
void write_rarity_histogram_svg(const RarityStats& stats, const UnifiedLabelSpace& space,
                                const std::string& path);

}  // namespace hoikit
