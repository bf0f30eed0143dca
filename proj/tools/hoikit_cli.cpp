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

#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hoikit/commands.hpp"
#include "hoikit/config.hpp"

namespace {

// Exit codes: 0 success, 1 validation failure, 2 runtime failure.
constexpr int kOk = 0, kInvalid = 1, kFailed = 2;

int run(const std::function<void()>& body) {
    try {
        body();
        return kOk;
    } catch (const std::invalid_argument& e) {  // covers ConfigError
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailed;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hoikit: multi-modal-prompt human-object-interaction toolkit"};
    app.require_subcommand(1);

    std::string workspace;
    if (const char* env = std::getenv("HOIKIT_WORKSPACE")) workspace = env;
    app.add_option("-w,--workspace", workspace,
                   "root for relative paths (default: $HOIKIT_WORKSPACE or cwd)");

    struct Sub {
        const char* name;
        const char* help;
        std::function<void(const std::string&)> go;  // (config json text)
    };
    const Sub subs[] = {
        {"merge", "unify dataset manifests into one label space",
         [&](const std::string& text) {
             hoikit::MergeCommandConfig c = hoikit::parse_merge_config(text);
             hoikit::resolve_config_paths(c, workspace);
             hoikit::cmd_merge(c, std::cout, std::cerr);
         }},
        {"synth", "generate an annotated synthetic dataset",
         [&](const std::string& text) {
             hoikit::SynthCommandConfig c = hoikit::parse_synth_config(text);
             hoikit::resolve_config_paths(c, workspace);
             hoikit::cmd_synth(c, std::cout, std::cerr);
         }},
        {"train", "train a detector on a corpus",
         [&](const std::string& text) {
             hoikit::TrainCommandConfig c = hoikit::parse_train_config(text);
             hoikit::resolve_config_paths(c, workspace);
             hoikit::cmd_train(c, std::cout, std::cerr);
         }},
        {"eval", "score a checkpoint on a corpus",
         [&](const std::string& text) {
             hoikit::EvalCommandConfig c = hoikit::parse_eval_config(text);
             hoikit::resolve_config_paths(c, workspace);
             hoikit::cmd_eval(c, std::cout, std::cerr);
         }},
        {"predict", "detect interactions with textual or visual prompts",
         [&](const std::string& text) {
             hoikit::PredictCommandConfig c = hoikit::parse_predict_config(text);
             hoikit::resolve_config_paths(c, workspace);
             hoikit::cmd_predict(c, std::cout, std::cerr);
         }},
        {"ablate", "train+eval a grid of config toggles",
         [&](const std::string& text) {
             hoikit::AblateCommandConfig c = hoikit::parse_ablate_config(text);
             hoikit::resolve_config_paths(c, workspace);
             hoikit::cmd_ablate(c, std::cout, std::cerr);
         }},
        {"plot", "emit loss-curve or rarity-histogram figures",
         [&](const std::string& text) {
             hoikit::PlotCommandConfig c = hoikit::parse_plot_config(text);
             hoikit::resolve_config_paths(c, workspace);
             hoikit::cmd_plot(c, std::cout, std::cerr);
         }},
    };

    std::string config_path;
    const Sub* chosen = nullptr;
    for (const Sub& sub : subs) {
        CLI::App* s = app.add_subcommand(sub.name, sub.help);
        s->add_option("-c,--config", config_path, "JSON config file")->required();
        s->callback([&chosen, &sub] { chosen = &sub; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    return run([&] {
        chosen->go(hoikit::read_text_file(hoikit::resolve_path(workspace, config_path)));
    });
}
