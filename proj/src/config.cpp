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

#include "hoikit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hoikit {
namespace {

using nlohmann::json;

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

// Tracks which keys a schema consumed; leftovers are config errors.
class StrictObject {
  public:
    StrictObject(const json& j, std::string context) : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) throw ConfigError(context_ + " must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& require(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(context_ + ": missing required key '" + key + "'");
        consumed_.insert(key);
        return j_.at(key);
    }

    const json* optional(const std::string& key) {
        if (!j_.contains(key)) return nullptr;
        consumed_.insert(key);
        return &j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!consumed_.count(key))
                throw ConfigError(context_ + ": unknown key '" + key + "'");
    }

    const std::string& context() const { return context_; }

  private:
    const json& j_;
    std::string context_;
    std::set<std::string> consumed_;
};

template <typename T>
T as(const json& j, const std::string& what) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(what + " has the wrong type");
    }
}

std::string opt_string(StrictObject& o, const std::string& key, const std::string& fallback) {
    const json* j = o.optional(key);
    return j ? as<std::string>(*j, o.context() + "." + key) : fallback;
}

int opt_int(StrictObject& o, const std::string& key, int fallback) {
    const json* j = o.optional(key);
    return j ? as<int>(*j, o.context() + "." + key) : fallback;
}

double opt_double(StrictObject& o, const std::string& key, double fallback) {
    const json* j = o.optional(key);
    return j ? as<double>(*j, o.context() + "." + key) : fallback;
}

bool opt_bool(StrictObject& o, const std::string& key, bool fallback) {
    const json* j = o.optional(key);
    return j ? as<bool>(*j, o.context() + "." + key) : fallback;
}

uint64_t opt_u64(StrictObject& o, const std::string& key, uint64_t fallback) {
    const json* j = o.optional(key);
    return j ? as<uint64_t>(*j, o.context() + "." + key) : fallback;
}

std::vector<std::string> string_list(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) out.push_back(as<std::string>(e, what + " entry"));
    return out;
}

std::vector<int> int_list(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + " must be an array of integers");
    std::vector<int> out;
    for (const auto& e : j) out.push_back(as<int>(e, what + " entry"));
    return out;
}

Box parse_box(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 4)
        throw ConfigError(what + " must be a [cx, cy, w, h] array");
    return Box{as<double>(j[0], what), as<double>(j[1], what), as<double>(j[2], what),
               as<double>(j[3], what)};
}

ProviderConfig parse_provider(const json& j, const std::string& context) {
    StrictObject o(j, context);
    ProviderConfig p;
    p.name = opt_string(o, "name", p.name);
    p.seed = opt_u64(o, "seed", p.seed);
    p.dim = opt_int(o, "dim", p.dim);
    p.weights = opt_string(o, "weights", p.weights);
    o.finish();
    if (p.name != "random_projection" && p.name != "toy_dual")
        throw ConfigError(context + ".name: unknown provider '" + p.name + "'");
    if (p.name == "toy_dual" && p.weights.empty())
        throw ConfigError(context + ": toy_dual requires a weights path");
    return p;
}

RarityConfig parse_rarity_fields(StrictObject& o) {
    RarityConfig r;
    if (const json* counts = o.optional("counts")) {
        if (!counts->is_object())
            throw ConfigError(o.context() + ".counts must map category ids to counts");
        for (const auto& [key, value] : counts->items()) {
            int id = 0;
            try {
                id = std::stoi(key);
            } catch (const std::logic_error&) {
                throw ConfigError(o.context() + ".counts: non-integer key '" + key + "'");
            }
            r.counts[id] = as<int>(value, o.context() + ".counts");
        }
    }
    r.annotations = opt_string(o, "annotations", "");
    r.rare_threshold = opt_int(o, "rare_threshold", r.rare_threshold);
    if (!r.counts.empty() && !r.annotations.empty())
        throw ConfigError(o.context() + ": give either counts or annotations, not both");
    return r;
}

PhrasePools parse_pools(const json& j, const std::string& context) {
    StrictObject o(j, context);
    PhrasePools pools = PhrasePools::defaults();
    if (const json* v = o.optional("persons")) pools.persons = string_list(*v, context + ".persons");
    if (const json* v = o.optional("environments"))
        pools.environments = string_list(*v, context + ".environments");
    if (const json* v = o.optional("photo_infos"))
        pools.photo_infos = string_list(*v, context + ".photo_infos");
    o.finish();
    return pools;
}

DetectorConfig parse_model(const json& j, const std::string& context) {
    StrictObject o(j, context);
    DetectorConfig m;
    m.num_queries = opt_int(o, "num_queries", m.num_queries);
    m.channels = opt_int(o, "channels", m.channels);
    m.embed_dim = opt_int(o, "embed_dim", m.embed_dim);
    m.heads = opt_int(o, "heads", m.heads);
    m.decoder_layers = opt_int(o, "decoder_layers", m.decoder_layers);
    m.encoder_layers = opt_int(o, "encoder_layers", m.encoder_layers);
    m.ffn_hidden = opt_int(o, "ffn_hidden", m.ffn_hidden);
    m.image_size = opt_int(o, "image_size", m.image_size);
    m.use_fsd = opt_bool(o, "use_fsd", m.use_fsd);
    m.use_fclip = opt_bool(o, "use_fclip", m.use_fclip);
    m.use_alpha = opt_bool(o, "use_alpha", m.use_alpha);
    m.use_beta = opt_bool(o, "use_beta", m.use_beta);
    m.t_step = opt_int(o, "t_step", m.t_step);
    m.seed = opt_u64(o, "seed", m.seed);
    o.finish();
    return m;
}

LossWeights parse_weights(const json& j, const std::string& context) {
    StrictObject o(j, context);
    LossWeights w;
    w.box = opt_double(o, "box", w.box);
    w.giou = opt_double(o, "giou", w.giou);
    w.obj = opt_double(o, "obj", w.obj);
    w.inter = opt_double(o, "inter", w.inter);
    o.finish();
    if (w.box < 0 || w.giou < 0 || w.obj < 0 || w.inter < 0)
        throw ConfigError(context + ": loss weights must be non-negative");
    return w;
}

AdamConfig parse_optim(const json& j, const std::string& context) {
    StrictObject o(j, context);
    AdamConfig a;
    a.lr = opt_double(o, "lr", a.lr);
    a.beta1 = opt_double(o, "beta1", a.beta1);
    a.beta2 = opt_double(o, "beta2", a.beta2);
    a.eps = opt_double(o, "eps", a.eps);
    a.max_grad_norm = opt_double(o, "max_grad_norm", a.max_grad_norm);
    o.finish();
    return a;
}

TrainCommandConfig parse_train_object(const json& j, const std::string& context) {
    StrictObject o(j, context);
    TrainCommandConfig c;
    c.label_space = as<std::string>(o.require("label_space"), context + ".label_space");
    c.train_dir = as<std::string>(o.require("train_dir"), context + ".train_dir");
    c.eval_dir = opt_string(o, "eval_dir", "");
    c.out_dir = as<std::string>(o.require("out_dir"), context + ".out_dir");
    c.rarity = parse_rarity_fields(o);
    if (const json* m = o.optional("model")) c.model = parse_model(*m, context + ".model");
    if (const json* w = o.optional("weights"))
        c.train.weights = parse_weights(*w, context + ".weights");
    if (const json* a = o.optional("optim")) c.train.adam = parse_optim(*a, context + ".optim");
    c.train.epochs = opt_int(o, "epochs", c.train.epochs);
    c.train.steps_per_epoch = opt_int(o, "steps_per_epoch", c.train.steps_per_epoch);
    c.train.visual_prob = opt_double(o, "visual_prob", c.train.visual_prob);
    c.train.eval_top_k = opt_int(o, "eval_top_k", c.train.eval_top_k);
    c.train.eval_iou = opt_double(o, "eval_iou", c.train.eval_iou);
    c.train.seed = opt_u64(o, "seed", c.train.seed);
    if (const json* p = o.optional("provider"))
        c.provider = parse_provider(*p, context + ".provider");
    o.finish();
    if (c.train.epochs <= 0) throw ConfigError(context + ".epochs must be positive");
    if (c.train.visual_prob < 0.0 || c.train.visual_prob > 1.0)
        throw ConfigError(context + ".visual_prob must lie in [0, 1]");
    return c;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

MergeCommandConfig parse_merge_config(const std::string& json_text) {
    json j = parse_json(json_text);
    StrictObject o(j, "merge config");
    MergeCommandConfig c;
    c.manifests = string_list(o.require("manifests"), "merge config.manifests");
    c.out_dir = as<std::string>(o.require("out_dir"), "merge config.out_dir");
    o.finish();
    if (c.manifests.empty()) throw ConfigError("merge config.manifests is empty");
    return c;
}

SynthCommandConfig parse_synth_config(const std::string& json_text) {
    json j = parse_json(json_text);
    StrictObject o(j, "synth config");
    SynthCommandConfig c;
    c.label_space = as<std::string>(o.require("label_space"), "synth config.label_space");
    c.n = as<int>(o.require("n"), "synth config.n");
    c.seed = opt_u64(o, "seed", c.seed);
    c.out_dir = as<std::string>(o.require("out_dir"), "synth config.out_dir");
    c.rarity = parse_rarity_fields(o);
    c.synth.canvas = opt_int(o, "canvas", c.synth.canvas);
    c.synth.occlusion_budget = opt_double(o, "occlusion_budget", c.synth.occlusion_budget);
    c.synth.max_attempts = opt_int(o, "max_attempts", c.synth.max_attempts);
    if (const json* pools = o.optional("pools"))
        c.synth.pools = parse_pools(*pools, "synth config.pools");
    if (const json* f = o.optional("filter")) {
        StrictObject fo(*f, "synth config.filter");
        c.filter.enabled = true;
        if (const json* p = fo.optional("provider"))
            c.filter.provider = parse_provider(*p, "synth config.filter.provider");
        c.filter.threshold = opt_double(fo, "threshold", c.filter.threshold);
        fo.finish();
    }
    o.finish();
    if (c.n <= 0) throw ConfigError("synth config.n must be positive");
    return c;
}

TrainCommandConfig parse_train_config(const std::string& json_text) {
    return parse_train_object(parse_json(json_text), "train config");
}

EvalCommandConfig parse_eval_config(const std::string& json_text) {
    json j = parse_json(json_text);
    StrictObject o(j, "eval config");
    EvalCommandConfig c;
    c.label_space = as<std::string>(o.require("label_space"), "eval config.label_space");
    c.checkpoint = as<std::string>(o.require("checkpoint"), "eval config.checkpoint");
    c.corpus_dir = as<std::string>(o.require("corpus_dir"), "eval config.corpus_dir");
    c.out = as<std::string>(o.require("out"), "eval config.out");
    c.rarity = parse_rarity_fields(o);
    if (const json* p = o.optional("provider"))
        c.provider = parse_provider(*p, "eval config.provider");
    c.top_k = opt_int(o, "top_k", c.top_k);
    c.iou = opt_double(o, "iou", c.iou);
    o.finish();
    if (c.top_k <= 0) throw ConfigError("eval config.top_k must be positive");
    return c;
}

PredictCommandConfig parse_predict_config(const std::string& json_text) {
    json j = parse_json(json_text);
    StrictObject o(j, "predict config");
    PredictCommandConfig c;
    c.label_space = as<std::string>(o.require("label_space"), "predict config.label_space");
    c.checkpoint = as<std::string>(o.require("checkpoint"), "predict config.checkpoint");
    if (const json* p = o.optional("provider"))
        c.provider = parse_provider(*p, "predict config.provider");
    c.images = string_list(o.require("images"), "predict config.images");
    c.out_dir = as<std::string>(o.require("out_dir"), "predict config.out_dir");
    c.top_k = opt_int(o, "top_k", c.top_k);
    const json& prompts = o.require("prompts");
    StrictObject po(prompts, "predict config.prompts");
    c.mode = as<std::string>(po.require("mode"), "predict config.prompts.mode");
    if (c.mode == "textual") {
        if (const json* ids = po.optional("objects")) {
            c.textual.all_objects = ids->is_string() && ids->get<std::string>() == "all";
            if (!c.textual.all_objects)
                c.textual.objects = int_list(*ids, "predict config.prompts.objects");
        }
        if (const json* ids = po.optional("interactions")) {
            c.textual.all_interactions = ids->is_string() && ids->get<std::string>() == "all";
            if (!c.textual.all_interactions)
                c.textual.interactions = int_list(*ids, "predict config.prompts.interactions");
        }
    } else if (c.mode == "visual") {
        c.visual.image =
            as<std::string>(po.require("image"), "predict config.prompts.image");
        if (const json* objs = po.optional("objects")) {
            for (const auto& e : *objs) {
                if (!e.is_array() || e.size() != 2)
                    throw ConfigError("predict config.prompts.objects: want [id, box] entries");
                c.visual.objects.emplace_back(
                    as<int>(e[0], "exemplar object id"),
                    parse_box(e[1], "predict config.prompts.objects box"));
            }
        }
        if (const json* ints = po.optional("interactions")) {
            for (const auto& e : *ints) {
                if (!e.is_array() || e.size() != 3)
                    throw ConfigError(
                        "predict config.prompts.interactions: want [id, human, object] entries");
                c.visual.interactions.emplace_back(
                    as<int>(e[0], "exemplar interaction id"),
                    parse_box(e[1], "predict config.prompts.interactions human box"),
                    parse_box(e[2], "predict config.prompts.interactions object box"));
            }
        }
    } else {
        throw ConfigError("predict config.prompts.mode must be 'textual' or 'visual'");
    }
    po.finish();
    o.finish();
    if (c.images.empty()) throw ConfigError("predict config.images is empty");
    if (c.top_k <= 0) throw ConfigError("predict config.top_k must be positive");
    return c;
}

AblateCommandConfig parse_ablate_config(const std::string& json_text) {
    json j = parse_json(json_text);
    StrictObject o(j, "ablate config");
    AblateCommandConfig c;
    c.base = parse_train_object(o.require("base"), "ablate config.base");
    c.toggles = string_list(o.require("toggles"), "ablate config.toggles");
    if (const json* seeds = o.optional("seeds")) {
        if (!seeds->is_array()) throw ConfigError("ablate config.seeds must be an array");
        for (const auto& s : *seeds) c.seeds.push_back(as<uint64_t>(s, "ablate config.seeds"));
    }
    c.out_dir = as<std::string>(o.require("out_dir"), "ablate config.out_dir");
    o.finish();
    if (c.seeds.empty()) c.seeds.push_back(c.base.train.seed);
    return c;
}

PlotCommandConfig parse_plot_config(const std::string& json_text) {
    json j = parse_json(json_text);
    StrictObject o(j, "plot config");
    PlotCommandConfig c;
    c.kind = as<std::string>(o.require("kind"), "plot config.kind");
    c.input = as<std::string>(o.require("input"), "plot config.input");
    c.label_space = opt_string(o, "label_space", "");
    c.rare_threshold = opt_int(o, "rare_threshold", c.rare_threshold);
    c.out = as<std::string>(o.require("out"), "plot config.out");
    o.finish();
    if (c.kind != "loss" && c.kind != "rarity")
        throw ConfigError("plot config.kind must be 'loss' or 'rarity'");
    if (c.kind == "rarity" && c.label_space.empty())
        throw ConfigError("plot config: rarity plots need a label_space");
    return c;
}

}  // namespace hoikit
