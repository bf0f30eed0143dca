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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoikit/commands.hpp"
#include "hoikit/records.hpp"
#include "hoikit/synth.hpp"

using namespace hoikit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("hoikit_cmd_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

UnifiedLabelSpace small_space() {
    UnifiedLabelSpace s;
    s.objects = {"ball", "cup", "dog"};
    s.actions = {"hold", "kick"};
    for (int a = 0; a < 2; ++a)
        for (int o = 0; o < 3; ++o) s.hois.emplace_back(a, o);
    return s;
}

// Synthesizes and writes a corpus with uniform category sampling.
void write_corpus(const std::string& dir, int n, uint64_t seed, const UnifiedLabelSpace& space) {
    RarityStats stats;  // no counts: every category weighs the same
    SynthConfig cfg;
    write_dataset(dir, generate_dataset(n, stats, space, seed, cfg), stats, space, seed, cfg);
}

DetectorConfig tiny_model() {
    DetectorConfig cfg;
    cfg.num_queries = 8;
    cfg.channels = 16;
    cfg.embed_dim = 8;
    cfg.heads = 2;
    cfg.decoder_layers = 1;
    cfg.encoder_layers = 1;
    cfg.ffn_hidden = 32;
    cfg.image_size = 64;
    cfg.seed = 5;
    return cfg;
}

TrainCommandConfig tiny_train_cfg(const TempDir& ws) {
    TrainCommandConfig cfg;
    cfg.label_space = ws.str("ls.json");
    cfg.train_dir = ws.str("train");
    cfg.eval_dir = ws.str("eval");
    cfg.out_dir = ws.str("run");
    cfg.model = tiny_model();
    cfg.train.epochs = 1;
    cfg.train.steps_per_epoch = 6;
    cfg.train.eval_top_k = 4;
    cfg.train.seed = 3;
    cfg.provider.seed = 21;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::map<std::string, std::string> dir_contents(const std::string& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out[fs::relative(e.path(), root).string()] = slurp(e.path().string());
    return out;
}

std::vector<json> jsonl_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::vector<json> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(json::parse(line));
    return lines;
}

Box px_box(int x0, int y0, int x1, int y1) {
    return Box::from_corners(x0 / 64.0, y0 / 64.0, x1 / 64.0, y1 / 64.0);
}

}  // namespace

TEST_CASE("merge command writes unified artifacts, reruns byte-identically") {
    TempDir ws("merge");

    DatasetManifest alpha;
    alpha.name = "alpha";
    alpha.object_vocab = {"ball", "cup"};
    alpha.action_vocab = {"hold"};
    alpha.annotations = {{"a_000", {px_box(4, 4, 20, 40), px_box(22, 20, 34, 32), 0, 0}},
                         {"a_001", {px_box(8, 6, 24, 44), px_box(26, 24, 38, 36), 1, 0}}};

    DatasetManifest beta;
    beta.name = "beta";
    beta.object_vocab = {"dog", "mug"};
    beta.action_vocab = {"hold", "kick"};
    beta.synonym_hints = {{"mug", "cup"}};
    beta.annotations = {{"b_000", {px_box(6, 4, 22, 42), px_box(30, 28, 44, 40), 0, 1}},
                        {"b_001", {px_box(10, 8, 26, 46), px_box(28, 26, 40, 38), 1, 0}},
                        {"b_002", {px_box(12, 8, 28, 46), px_box(32, 30, 44, 42), 0, 0}}};
    beta.heldout_image_ids = {"b_002"};

    save_manifest(alpha, ws.str("alpha.json"));
    save_manifest(beta, ws.str("beta.json"));
    std::string alpha_bytes = slurp(ws.str("alpha.json"));

    MergeCommandConfig cfg;
    cfg.manifests = {ws.str("alpha.json"), ws.str("beta.json")};
    cfg.out_dir = ws.str("merged");
    std::ostringstream out, err;
    cmd_merge(cfg, out, err);

    UnifiedLabelSpace space = load_label_space(ws.str("merged/label_space.json"));
    CHECK(space.objects == std::vector<std::string>{"ball", "cup", "dog"});
    CHECK(space.actions == std::vector<std::string>{"hold", "kick"});
    auto anns = load_unified_annotations(ws.str("merged/annotations.jsonl"));
    CHECK(anns.size() == 5);

    json report = json::parse(slurp(ws.str("merged/report.json")));
    CHECK(report.at("objects") == 3);
    CHECK(report.at("annotations") == 5);
    // the held-out image's (hold, dog) annotation leaks into training data
    std::vector<int> leakage = report.at("leakage_hois").get<std::vector<int>>();
    REQUIRE(leakage.size() == 1);
    CHECK(leakage[0] == space.hoi_id(space.action_id("hold"), space.object_id("dog")));
    CHECK(out.str().find("merged 2 datasets") != std::string::npos);

    // inputs untouched, second run bit-identical
    CHECK(slurp(ws.str("alpha.json")) == alpha_bytes);
    cfg.out_dir = ws.str("merged2");
    cmd_merge(cfg, out, err);
    CHECK(dir_contents(ws.str("merged")) == dir_contents(ws.str("merged2")));

    // conflicting hints: error names the term, nothing is written
    DatasetManifest bad = beta;
    bad.name = "gamma";
    bad.synonym_hints = {{"mug", "cup"}, {"mug", "ball"}};
    save_manifest(bad, ws.str("gamma.json"));
    MergeCommandConfig bad_cfg;
    bad_cfg.manifests = {ws.str("alpha.json"), ws.str("gamma.json")};
    bad_cfg.out_dir = ws.str("conflicted");
    try {
        cmd_merge(bad_cfg, out, err);
        FAIL_CHECK("conflicting hints must throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("mug") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(ws.str("conflicted")));
}

TEST_CASE("synth command is rerun-stable and shifts the tail") {
    TempDir ws("synth");
    UnifiedLabelSpace space = small_space();
    save_label_space(space, ws.str("ls.json"));

    SynthCommandConfig cfg;
    cfg.label_space = ws.str("ls.json");
    cfg.n = 30;
    cfg.seed = 5;
    cfg.out_dir = ws.str("gen");
    cfg.rarity.counts = {{0, 5}, {1, 5}, {2, 30}, {3, 30}, {4, 30}, {5, 30}};
    std::ostringstream out, err;
    cmd_synth(cfg, out, err);

    CHECK(fs::exists(ws.str("gen/manifest.json")));
    CHECK(fs::exists(ws.str("gen/records.txt")));
    CHECK(fs::exists(ws.str("gen/images/synth_000000.ppm")));
    CHECK_FALSE(fs::exists(ws.str("gen/.lock")));  // released on success

    json report = json::parse(slurp(ws.str("gen/report.json")));
    CHECK(report.at("n_written") == 30);
    double before = report.at("tail_fraction_before");
    double after = report.at("tail_fraction_after");
    CHECK(before == doctest::Approx(2.0 / 6.0));
    CHECK(after < before);  // inverse-frequency sampling pushed rare ids over the threshold

    cfg.out_dir = ws.str("gen2");
    cmd_synth(cfg, out, err);
    CHECK(dir_contents(ws.str("gen")) == dir_contents(ws.str("gen2")));

    // an unreachable quality bar empties the dataset but is not an error
    SynthCommandConfig strict = cfg;
    strict.n = 6;
    strict.out_dir = ws.str("strict");
    strict.filter.enabled = true;
    strict.filter.provider.name = "random_projection";
    strict.filter.provider.seed = 3;
    strict.filter.provider.dim = 16;
    strict.filter.threshold = 1.0;
    std::ostringstream err2;
    cmd_synth(strict, out, err2);
    CHECK(err2.str().find("kept 0 of 6") != std::string::npos);
    json strict_report = json::parse(slurp(ws.str("strict/report.json")));
    CHECK(strict_report.at("n_written") == 0);
    CHECK(slurp(ws.str("strict/records.txt")).empty());
}

TEST_CASE("train, eval and predict commands round-trip a checkpoint") {
    TempDir ws("pipeline");
    UnifiedLabelSpace space = small_space();
    save_label_space(space, ws.str("ls.json"));
    write_corpus(ws.str("train"), 12, 2, space);
    write_corpus(ws.str("eval"), 6, 3, space);

    TrainCommandConfig train_cfg = tiny_train_cfg(ws);
    std::ostringstream out, err;
    cmd_train(train_cfg, out, err);
    CHECK(fs::exists(ws.str("run/checkpoint.bin")));
    CHECK(out.str().find("final eval") != std::string::npos);

    TrainLog log = load_train_log(ws.str("run/metrics.jsonl"));
    CHECK(log.steps.size() == 6);
    REQUIRE(log.evals.size() == 1);
    for (const StepRecord& s : log.steps) CHECK(std::isfinite(s.loss.total));

    train_cfg.out_dir = ws.str("run2");
    cmd_train(train_cfg, out, err);
    CHECK(slurp(ws.str("run/checkpoint.bin")) == slurp(ws.str("run2/checkpoint.bin")));
    CHECK(slurp(ws.str("run/metrics.jsonl")) == slurp(ws.str("run2/metrics.jsonl")));

    EvalCommandConfig eval_cfg;
    eval_cfg.label_space = ws.str("ls.json");
    eval_cfg.checkpoint = ws.str("run/checkpoint.bin");
    eval_cfg.corpus_dir = ws.str("eval");
    eval_cfg.out = ws.str("eval_report.json");
    eval_cfg.provider.seed = 21;
    eval_cfg.top_k = 4;
    cmd_eval(eval_cfg, out, err);
    json eval_report = json::parse(slurp(ws.str("eval_report.json")));
    CHECK(eval_report.at("images") == 6);
    double map_full = eval_report.at("map_full");
    CHECK(map_full >= 0.0);
    CHECK(map_full <= 1.0);
    CHECK(eval_report.at("per_category_ap").is_array());
    // the in-loop eval of the last epoch used the same corpus, banks and model
    CHECK(map_full == log.evals.back().report.map_full);

    eval_cfg.out = ws.str("eval_report2.json");
    cmd_eval(eval_cfg, out, err);
    CHECK(slurp(ws.str("eval_report.json")) == slurp(ws.str("eval_report2.json")));

    // a different label space or provider must be rejected
    UnifiedLabelSpace other = space;
    other.objects.push_back("kite");
    save_label_space(other, ws.str("ls_other.json"));
    EvalCommandConfig wrong_space = eval_cfg;
    wrong_space.label_space = ws.str("ls_other.json");
    CHECK_THROWS_AS(cmd_eval(wrong_space, out, err), std::invalid_argument);
    EvalCommandConfig wrong_provider = eval_cfg;
    wrong_provider.provider.seed = 99;
    CHECK_THROWS_AS(cmd_eval(wrong_provider, out, err), std::runtime_error);

    PredictCommandConfig pred;
    pred.label_space = ws.str("ls.json");
    pred.checkpoint = ws.str("run/checkpoint.bin");
    pred.provider.seed = 21;
    pred.images = {ws.str("eval/images/synth_000000.ppm"), ws.str("eval/images/synth_000001.ppm")};
    pred.out_dir = ws.str("pred");
    pred.top_k = 4;
    cmd_predict(pred, out, err);

    std::vector<json> dets = jsonl_lines(ws.str("pred/detections.jsonl"));
    CHECK(dets.size() == 8);  // top_k lines per image
    for (const json& d : dets) {
        int object_class = d.at("object_class");
        CHECK(d.at("object_term") == space.objects.at(object_class));
        CHECK(d.at("human").size() == 4);
        double score = d.at("score");
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
    }
    Raster overlay = read_ppm(ws.str("pred/overlay_000_synth_000000.ppm"));
    CHECK(overlay.width == 256);  // 4x upscale of the 64-pixel corpus canvas
    CHECK(overlay.height == 256);

    pred.out_dir = ws.str("pred2");
    cmd_predict(pred, out, err);
    CHECK(dir_contents(ws.str("pred")) == dir_contents(ws.str("pred2")));

    // visual prompting from an exemplar image of the training corpus
    Corpus train_corpus = load_corpus(ws.str("train"));
    const CorpusImage& exemplar = train_corpus.images.front();
    const TripletAnnotation& ann = exemplar.annotations.front();
    PredictCommandConfig vis = pred;
    vis.out_dir = ws.str("pred_vis");
    vis.mode = "visual";
    vis.visual.image = ws.str("train/images/" + exemplar.image_id + ".ppm");
    vis.visual.objects = {{ann.object_class, ann.object}};
    vis.visual.interactions = {
        {space.hoi_id(ann.verb_class, ann.object_class), ann.human, ann.object}};
    cmd_predict(vis, out, err);
    std::vector<json> vis_dets = jsonl_lines(ws.str("pred_vis/detections.jsonl"));
    CHECK(vis_dets.size() == 8);
    // a single-category interaction bank can only predict that category
    for (const json& d : vis_dets) {
        CHECK(d.at("object_class") == ann.object_class);
        CHECK(d.at("verb_class") == ann.verb_class);
    }

    PredictCommandConfig no_exemplars = vis;
    no_exemplars.out_dir = ws.str("pred_bad");
    no_exemplars.visual.interactions.clear();
    CHECK_THROWS_AS(cmd_predict(no_exemplars, out, err), std::invalid_argument);
}

TEST_CASE("ablation toggles map onto the config and unknown names fail early") {
    TrainCommandConfig base;
    base.model = tiny_model();
    CHECK_FALSE(apply_ablation_toggle(base, "fsd_off").cfg.model.use_fsd);
    CHECK_FALSE(apply_ablation_toggle(base, "fclip_off").cfg.model.use_fclip);
    CHECK_FALSE(apply_ablation_toggle(base, "alpha_off").cfg.model.use_alpha);
    CHECK_FALSE(apply_ablation_toggle(base, "beta_off").cfg.model.use_beta);
    CHECK(apply_ablation_toggle(base, "t500").cfg.model.t_step == 500);
    CHECK(apply_ablation_toggle(base, "t100").cfg.model.t_step == 100);
    CHECK(apply_ablation_toggle(base, "text_only").cfg.train.visual_prob == 0.0);
    CHECK(apply_ablation_toggle(base, "obj_contrast_off").cfg.train.weights.obj == 0.0);
    CHECK(apply_ablation_toggle(base, "inter_contrast_off").cfg.train.weights.inter == 0.0);
    CHECK(apply_ablation_toggle(base, "data_half").data_fraction == 0.5);
    CHECK(apply_ablation_toggle(base, "base").cfg.model.use_fsd);
    CHECK_THROWS_AS(apply_ablation_toggle(base, "fsd_of"), ConfigError);
}

TEST_CASE("ablate command emits one scored row per setting and seed") {
    TempDir ws("ablate");
    UnifiedLabelSpace space = small_space();
    save_label_space(space, ws.str("ls.json"));
    write_corpus(ws.str("train"), 8, 2, space);
    write_corpus(ws.str("eval"), 4, 3, space);

    AblateCommandConfig cfg;
    cfg.base = tiny_train_cfg(ws);
    cfg.base.train.steps_per_epoch = 2;
    cfg.toggles = {"beta_off", "data_half"};
    cfg.seeds = {1, 2};
    cfg.out_dir = ws.str("ablation");

    std::ostringstream out, err;
    AblateCommandConfig bad = cfg;
    bad.toggles.push_back("warp_drive");
    CHECK_THROWS_AS(cmd_ablate(bad, out, err), ConfigError);
    CHECK_FALSE(fs::exists(ws.str("ablation")));  // rejected before any run

    cmd_ablate(cfg, out, err);
    std::vector<json> rows = jsonl_lines(ws.str("ablation/table.jsonl"));
    REQUIRE(rows.size() == 6);  // (base + 2 toggles) x 2 seeds
    CHECK(rows[0].at("toggle") == "base");
    CHECK(rows[0].at("seed") == 1);
    CHECK(rows[1].at("seed") == 2);
    CHECK(rows[2].at("toggle") == "beta_off");
    for (const json& r : rows) {
        double v = r.at("map_full");
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    std::string table = slurp(ws.str("ablation/table.txt"));
    CHECK(table.find("setting") != std::string::npos);
    CHECK(table.find("base") != std::string::npos);
    CHECK(table.find("data_half") != std::string::npos);

    cfg.out_dir = ws.str("ablation2");
    cmd_ablate(cfg, out, err);
    CHECK(slurp(ws.str("ablation/table.jsonl")) == slurp(ws.str("ablation2/table.jsonl")));
    CHECK(slurp(ws.str("ablation/table.txt")) == slurp(ws.str("ablation2/table.txt")));
}

TEST_CASE("plot command renders loss curves and rarity histograms") {
    TempDir ws("plot");

    TrainLog log;
    for (int i = 0; i < 8; ++i) {
        StepRecord s;
        s.step = i;
        s.image_id = "synth_00000" + std::to_string(i);
        s.modality = i % 2 ? "visual" : "text";
        s.loss = {1.0 / (i + 1), 0.5 / (i + 1), 2.0 / (i + 1), 1.5 / (i + 1), 5.0 / (i + 1), 0.07};
        log.steps.push_back(s);
    }
    save_train_log(log, ws.str("metrics.jsonl"));

    PlotCommandConfig loss_cfg;
    loss_cfg.kind = "loss";
    loss_cfg.input = ws.str("metrics.jsonl");
    loss_cfg.out = ws.str("loss.svg");
    std::ostringstream out, err;
    cmd_plot(loss_cfg, out, err);
    std::string svg = slurp(ws.str("loss.svg"));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("inter contrast") != std::string::npos);

    loss_cfg.out = ws.str("loss2.svg");
    cmd_plot(loss_cfg, out, err);
    CHECK(slurp(ws.str("loss2.svg")) == svg);

    { std::ofstream(ws.str("empty.jsonl")); }
    PlotCommandConfig empty_cfg = loss_cfg;
    empty_cfg.input = ws.str("empty.jsonl");
    empty_cfg.out = ws.str("never.svg");
    CHECK_THROWS_AS(cmd_plot(empty_cfg, out, err), std::invalid_argument);
    CHECK_FALSE(fs::exists(ws.str("never.svg")));

    UnifiedLabelSpace space = small_space();
    save_label_space(space, ws.str("ls.json"));
    std::vector<UnifiedAnnotation> anns;
    auto push_n = [&](int hoi, int n) {
        auto [verb, object] = space.hois[hoi];
        for (int i = 0; i < n; ++i)
            anns.push_back({"d", "img_" + std::to_string(anns.size()),
                            {px_box(4, 4, 20, 40), px_box(22, 20, 34, 32), object, verb},
                            object, verb});
    };
    push_n(0, 12);
    push_n(1, 3);
    push_n(2, 1);
    save_unified_annotations(anns, ws.str("anns.jsonl"));

    PlotCommandConfig rarity_cfg;
    rarity_cfg.kind = "rarity";
    rarity_cfg.input = ws.str("anns.jsonl");
    rarity_cfg.label_space = ws.str("ls.json");
    rarity_cfg.out = ws.str("hist.svg");
    cmd_plot(rarity_cfg, out, err);
    std::string hist = slurp(ws.str("hist.svg"));
    CHECK(hist.rfind("<svg", 0) == 0);
    CHECK(hist.find("<rect") != std::string::npos);
    CHECK(hist.find("tail fraction 0.667") != std::string::npos);  // 2 of 3 seen ids are rare

    rarity_cfg.out = ws.str("hist2.svg");
    cmd_plot(rarity_cfg, out, err);
    CHECK(slurp(ws.str("hist2.svg")) == hist);
}

TEST_CASE("relative paths resolve against the workspace root") {
    CHECK(resolve_path("/ws", "data/x.json") == "/ws/data/x.json");
    CHECK(resolve_path("/ws", "/abs/x.json") == "/abs/x.json");
    CHECK(resolve_path("/ws", "") == "");  // optional paths stay disabled
    CHECK(resolve_path("", "data/x.json") == "data/x.json");

    TrainCommandConfig cfg;
    cfg.label_space = "ls.json";
    cfg.train_dir = "corpora/train";
    cfg.eval_dir = "";
    cfg.out_dir = "/abs/run";
    cfg.provider.weights = "weights/dual.bin";
    resolve_config_paths(cfg, "/ws");
    CHECK(cfg.label_space == "/ws/ls.json");
    CHECK(cfg.train_dir == "/ws/corpora/train");
    CHECK(cfg.eval_dir == "");
    CHECK(cfg.out_dir == "/abs/run");
    CHECK(cfg.provider.weights == "/ws/weights/dual.bin");

    PredictCommandConfig pred;
    pred.label_space = "ls.json";
    pred.checkpoint = "run/checkpoint.bin";
    pred.images = {"a.ppm", "/abs/b.ppm"};
    pred.out_dir = "pred";
    pred.visual.image = "exemplar.ppm";
    resolve_config_paths(pred, "/ws");
    CHECK(pred.images[0] == "/ws/a.ppm");
    CHECK(pred.images[1] == "/abs/b.ppm");
    CHECK(pred.visual.image == "/ws/exemplar.ppm");
}
