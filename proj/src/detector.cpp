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

#include "hoikit/detector.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hoikit/checksum.hpp"

namespace hoikit {

namespace {

using nlohmann::json;

Rng module_rng(uint64_t seed, const std::string& tag) {
    return Rng(derive_seed(seed, fnv1a64(tag)));
}

Tensor row_tensor(const std::vector<double>& v) {
    Tensor t(1, static_cast<int>(v.size()));
    t.data = v;
    return t;
}

void check_bank(const PromptBank& bank, const char* what, int dim, uint64_t provider_fp) {
    if (bank.size() == 0) throw std::invalid_argument(std::string(what) + " bank is empty");
    if (bank.dim() != dim)
        throw std::invalid_argument(std::string(what) + " bank dim " + std::to_string(bank.dim()) +
                                    " != provider dim " + std::to_string(dim));
    if (bank.provider_fingerprint != 0 && bank.provider_fingerprint != provider_fp)
        throw std::invalid_argument(std::string(what) +
                                    " bank was encoded by a different provider");
}

}  // namespace

BoxHead BoxHead::create(ParamStore& ps, const std::string& prefix, int in, int hidden, Rng& rng) {
    BoxHead h;
    h.l1 = Linear::create(ps, prefix + ".l1", in, hidden, rng);
    h.l2 = Linear::create(ps, prefix + ".l2", hidden, hidden, rng);
    h.l3 = Linear::create(ps, prefix + ".l3", hidden, 4, rng);
    return h;
}

Var BoxHead::forward(ParamStore& ps, Var x) const {
    Tape& t = ps.tape();
    x = t.gelu(l1.forward(ps, x));
    x = t.gelu(l2.forward(ps, x));
    return t.sigmoid(l3.forward(ps, x));
}

MPHOIDetector::MPHOIDetector(DetectorConfig cfg, const SceneEmbedder* embedder)
    : cfg_(cfg),
      embedder_(embedder),
      extractor_(derive_seed(cfg.seed, fnv1a64("extractor")), cfg.embed_dim) {
    if (embedder_ == nullptr) throw std::invalid_argument("detector: null scene embedder");
    if (embedder_->dim() != cfg_.embed_dim)
        throw std::invalid_argument("detector: embed_dim " + std::to_string(cfg_.embed_dim) +
                                    " != provider dim " + std::to_string(embedder_->dim()));
    if (cfg_.num_queries < 1 || cfg_.channels < 1 || cfg_.embed_dim < 1)
        throw std::invalid_argument("detector: sizes must be positive");
    if (cfg_.channels % cfg_.heads != 0)
        throw std::invalid_argument("detector: channels must divide into heads");
    if (cfg_.image_size < 8 || cfg_.image_size % 8 != 0)
        throw std::invalid_argument("detector: image_size must be a positive multiple of 8");
    const int C = cfg_.channels, D = cfg_.embed_dim, N = cfg_.num_queries;

    // Every module draws from its own seed stream so toggling one off never
    // shifts another's initialization.
    Rng r = module_rng(cfg_.seed, "backbone.conv1");
    conv1_ = Conv2d::create(store_, "backbone.conv1", 3, 16, 4, 2, 1, r);
    r = module_rng(cfg_.seed, "backbone.conv2");
    conv2_ = Conv2d::create(store_, "backbone.conv2", 16, 32, 4, 2, 1, r);
    r = module_rng(cfg_.seed, "backbone.conv3");
    conv3_ = Conv2d::create(store_, "backbone.conv3", 32, C, 4, 2, 1, r);
    for (int i = 0; i < cfg_.encoder_layers; ++i) {
        std::string name = "encoder." + std::to_string(i);
        r = module_rng(cfg_.seed, name);
        encoder_.push_back(EncoderLayer::create(store_, name, C, cfg_.heads, cfg_.ffn_hidden, r));
    }
    r = module_rng(cfg_.seed, "queries.human");
    store_.define("queries.human", Tensor::randn(N, C, r, 0.02));
    r = module_rng(cfg_.seed, "queries.object");
    store_.define("queries.object", Tensor::randn(N, C, r, 0.02));
    for (int i = 0; i < cfg_.decoder_layers; ++i) {
        std::string name = "instance_dec." + std::to_string(i);
        r = module_rng(cfg_.seed, name);
        instance_dec_.push_back(DecoderLayer::create(store_, name, C, cfg_.heads, cfg_.ffn_hidden, r));
    }
    for (int i = 0; i < cfg_.decoder_layers; ++i) {
        std::string name = "interaction_dec." + std::to_string(i);
        r = module_rng(cfg_.seed, name);
        interaction_dec_.push_back(
            DecoderLayer::create(store_, name, C, cfg_.heads, cfg_.ffn_hidden, r));
    }
    r = module_rng(cfg_.seed, "box_head.human");
    head_h_ = BoxHead::create(store_, "box_head.human", C, C, r);
    r = module_rng(cfg_.seed, "box_head.object");
    head_o_ = BoxHead::create(store_, "box_head.object", C, C, r);
    r = module_rng(cfg_.seed, "classifier.object");
    clf_o_ = PromptClassifier::create(store_, "classifier.object", C, D, r);
    r = module_rng(cfg_.seed, "classifier.interaction");
    clf_i_ = PromptClassifier::create(store_, "classifier.interaction", C, D, r);
    r = module_rng(cfg_.seed, "adaptor.alpha");
    alpha_ = Mlp::create(store_, "adaptor.alpha", D, 2 * D, D, r);
    r = module_rng(cfg_.seed, "adaptor.beta");
    beta_ = Mlp::create(store_, "adaptor.beta", D, 2 * D, C, r);
    r = module_rng(cfg_.seed, "fusion.scale1");
    fuse1_ = Linear::create(store_, "fusion.scale1", ConditionedExtractor::kC1, C, r);
    r = module_rng(cfg_.seed, "fusion.scale2");
    fuse2_ = Linear::create(store_, "fusion.scale2", ConditionedExtractor::kC2, C, r);
    // Zero gate: at initialization fusion is the identity on the encoder map.
    store_.define("fusion.gate", Tensor::zeros(1, C));
    store_.define(kLogTemperature, Tensor::full(1, 1, std::log(0.07)));
    r = module_rng(cfg_.seed, kObjectBackground);
    store_.define(kObjectBackground, Tensor::randn(1, D, r));
    r = module_rng(cfg_.seed, kInteractionBackground);
    store_.define(kInteractionBackground, Tensor::randn(1, D, r));

    const int side = cfg_.image_size / 8;
    positions_ = sinusoidal_positions(side * side, C);
}

Var MPHOIDetector::temperature(Tape& tape) {
    if (&store_.tape() != &tape)
        throw std::logic_error("temperature: parameter store bound to a different tape");
    return tape.exp_(store_.p(kLogTemperature));
}

ForwardResult MPHOIDetector::forward(Tape& tape, const Raster& image,
                                     const PromptBank& object_bank,
                                     const PromptBank& interaction_bank) {
    if (image.width != cfg_.image_size || image.height != cfg_.image_size)
        throw std::invalid_argument("forward: image must be " + std::to_string(cfg_.image_size) +
                                    "x" + std::to_string(cfg_.image_size));
    const uint64_t provider_fp = embedder_->fingerprint();
    check_bank(object_bank, "object", cfg_.embed_dim, provider_fp);
    check_bank(interaction_bank, "interaction", cfg_.embed_dim, provider_fp);

    store_.start_step(tape);
    const int S = cfg_.image_size;
    const int N = cfg_.num_queries, D = cfg_.embed_dim;

    ForwardResult fr;
    fr.image_checksum = fnv1a64_bytes(image.data.data(), image.data.size());
    const std::vector<double> rows = raster_to_rows(image);

    std::vector<double> scene(static_cast<size_t>(D), 0.0);
    if (cfg_.use_fclip) scene = embedder_->embed_image(image);
    Var scene_v = tape.constant(row_tensor(scene));

    // Backbone: three stride-2 stages down to (S/8)^2 tokens, then encoder.
    Tensor img_t(S * S, 3);
    img_t.data = rows;
    Var x = tape.constant(std::move(img_t));
    x = tape.gelu(conv1_.forward(store_, x, S, S));
    x = tape.gelu(conv2_.forward(store_, x, S / 2, S / 2));
    x = tape.gelu(conv3_.forward(store_, x, S / 4, S / 4));
    x = tape.add(x, tape.constant(positions_));
    for (const auto& layer : encoder_) x = layer.forward(store_, x);
    fr.f = x;

    Var fp = x;
    if (cfg_.use_fsd) {
        Var cond;
        if (cfg_.use_fclip && cfg_.use_alpha) {
            cond = tape.normalize_rows(alpha_.forward(store_, scene_v));
        } else {
            cond = tape.constant(Tensor::zeros(1, D));
        }
        ConditionedPyramid pyr =
            extractor_.forward(tape, rows, S, S, cond, cfg_.t_step, fr.image_checksum);
        const int gh = S / 8, gw = S / 8;
        const Linear* proj[] = {&fuse1_, &fuse2_};
        Var sum;
        for (size_t i = 0; i < pyr.scales.size(); ++i) {
            const PyramidScale& sc = pyr.scales[i];
            Var rs = tape.bilinear_resize(sc.features, sc.h, sc.w, gh, gw);
            Var pj = proj[i]->forward(store_, rs);
            sum = sum.valid() ? tape.add(sum, pj) : pj;
        }
        Var gate = tape.tanh_(store_.p("fusion.gate"));
        fp = tape.add(x, tape.mul_rowvec(sum, gate));
    }
    fr.f_prime = fp;

    // Paired queries decode as one 2N sequence so the streams attend to each
    // other; the halves are re-split afterwards.
    Var q = tape.concat_rows(store_.p("queries.human"), store_.p("queries.object"));
    for (const auto& layer : instance_dec_) q = layer.forward(store_, q, fr.f);
    fr.qh = tape.slice_rows(q, 0, N);
    fr.qo = tape.slice_rows(q, N, N);

    Var qi = tape.scale(tape.add(fr.qh, fr.qo), 0.5);
    for (const auto& layer : interaction_dec_) qi = layer.forward(store_, qi, fp);
    if (cfg_.use_fclip && cfg_.use_beta) qi = tape.add_rowvec(qi, beta_.forward(store_, scene_v));
    fr.qi = qi;

    fr.human_boxes = head_h_.forward(store_, fr.qh);
    fr.object_boxes = head_o_.forward(store_, fr.qo);

    fr.tau = temperature(tape);
    fr.p_o = clf_o_.distributions(store_, fr.qo, tape.constant(object_bank.embeddings), fr.tau);
    fr.p_i =
        clf_i_.distributions(store_, fr.qi, tape.constant(interaction_bank.embeddings), fr.tau);
    return fr;
}

DetectionOutput MPHOIDetector::snapshot(const Tape& tape, const ForwardResult& fr) {
    DetectionOutput out;
    const Tensor& hb = tape.value(fr.human_boxes);
    const Tensor& ob = tape.value(fr.object_boxes);
    for (int i = 0; i < hb.rows; ++i) {
        out.human_boxes.push_back({hb.at(i, 0), hb.at(i, 1), hb.at(i, 2), hb.at(i, 3)});
        out.object_boxes.push_back({ob.at(i, 0), ob.at(i, 1), ob.at(i, 2), ob.at(i, 3)});
    }
    out.p_o = tape.value(fr.p_o);
    out.p_i = tape.value(fr.p_i);
    out.tau = tape.value(fr.tau).at(0, 0);
    return out;
}

std::vector<ScoredTriplet> MPHOIDetector::predict(const Raster& image,
                                                  const PromptBank& object_bank,
                                                  const PromptBank& interaction_bank,
                                                  const UnifiedLabelSpace& space, int top_k) {
    if (top_k < 1) throw std::invalid_argument("predict: top_k must be positive");
    Tape tape;
    ForwardResult fr = forward(tape, image, object_bank, interaction_bank);
    DetectionOutput out = snapshot(tape, fr);

    std::vector<ScoredTriplet> cands;
    cands.reserve(static_cast<size_t>(cfg_.num_queries) * interaction_bank.size());
    for (int qi = 0; qi < cfg_.num_queries; ++qi) {
        for (int ii = 0; ii < interaction_bank.size(); ++ii) {
            int hoi = interaction_bank.category_ids[ii];
            if (hoi < 0 || hoi >= static_cast<int>(space.hois.size()))
                throw std::out_of_range("predict: interaction bank id outside the label space");
            auto [action, object] = space.hois[hoi];
            int oi = object_bank.index_of(object);
            if (oi < 0)
                throw std::invalid_argument(
                    "predict: object bank lacks a category the interaction bank needs");
            ScoredTriplet t;
            t.human = out.human_boxes[qi];
            t.object = out.object_boxes[qi];
            t.object_class = object;
            t.verb_class = action;
            t.score = out.p_o.at(qi, oi) * out.p_i.at(qi, ii);
            cands.push_back(t);
        }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const ScoredTriplet& a, const ScoredTriplet& b) { return a.score > b.score; });
    if (static_cast<int>(cands.size()) > top_k) cands.resize(static_cast<size_t>(top_k));
    return cands;
}

// --- checkpoint io ----------------------------------------------------------
//
// Layout: magic line, one-line JSON header, then for each parameter in
// definition order the raw doubles of value, Adam m, Adam v (host-endian;
// the toolchain targets little-endian only).

namespace {
constexpr const char* kMagic = "hoikit-checkpoint-v1";

void write_blob(std::ofstream& f, const Tensor& t) {
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

void read_blob(std::ifstream& f, Tensor& t) {
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: truncated parameter blob");
}

json config_to_json(const DetectorConfig& c) {
    return json{{"num_queries", c.num_queries},
                {"channels", c.channels},
                {"embed_dim", c.embed_dim},
                {"heads", c.heads},
                {"decoder_layers", c.decoder_layers},
                {"encoder_layers", c.encoder_layers},
                {"ffn_hidden", c.ffn_hidden},
                {"image_size", c.image_size},
                {"use_fsd", c.use_fsd},
                {"use_fclip", c.use_fclip},
                {"use_alpha", c.use_alpha},
                {"use_beta", c.use_beta},
                {"t_step", c.t_step},
                {"seed", c.seed}};
}

DetectorConfig config_from_json(const json& j) {
    DetectorConfig c;
    c.num_queries = j.at("num_queries").get<int>();
    c.channels = j.at("channels").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.decoder_layers = j.at("decoder_layers").get<int>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.ffn_hidden = j.at("ffn_hidden").get<int>();
    c.image_size = j.at("image_size").get<int>();
    c.use_fsd = j.at("use_fsd").get<bool>();
    c.use_fclip = j.at("use_fclip").get<bool>();
    c.use_alpha = j.at("use_alpha").get<bool>();
    c.use_beta = j.at("use_beta").get<bool>();
    c.t_step = j.at("t_step").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}
}  // namespace

void MPHOIDetector::save_checkpoint(const std::string& path,
                                    uint64_t label_space_fingerprint) const {
    json header;
    header["config"] = config_to_json(cfg_);
    header["provider"] = {{"name", embedder_->name()},
                          {"seed", embedder_->seed()},
                          {"fingerprint", embedder_->fingerprint()}};
    header["label_space_fingerprint"] = label_space_fingerprint;
    header["adam_step"] = store_.step_count();
    json params = json::array();
    for (const ParamInfo& info : store_.census())
        params.push_back({{"name", info.name},
                          {"rows", info.rows},
                          {"cols", info.cols},
                          {"trainable", info.trainable}});
    header["params"] = params;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    f << kMagic << "\n" << header.dump() << "\n";
    for (const std::string& name : store_.names()) {
        write_blob(f, store_.value(name));
        write_blob(f, store_.adam_m(name));
        write_blob(f, store_.adam_v(name));
    }
    if (!f) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

MPHOIDetector MPHOIDetector::load_checkpoint(const std::string& path,
                                             const SceneEmbedder* embedder,
                                             uint64_t* label_space_fingerprint) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string magic, header_line;
    if (!std::getline(f, magic) || magic != kMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (!std::getline(f, header_line)) throw std::runtime_error("checkpoint: missing header");
    json header = json::parse(header_line);

    MPHOIDetector det(config_from_json(header.at("config")), embedder);
    const json& prov = header.at("provider");
    if (prov.at("name").get<std::string>() != embedder->name() ||
        prov.at("seed").get<uint64_t>() != embedder->seed() ||
        prov.at("fingerprint").get<uint64_t>() != embedder->fingerprint())
        throw std::runtime_error("checkpoint: scene-embedding provider mismatch");

    const json& params = header.at("params");
    auto census = det.store_.census();
    if (params.size() != census.size())
        throw std::runtime_error("checkpoint: parameter census mismatch");
    for (size_t i = 0; i < census.size(); ++i) {
        const json& p = params[i];
        if (p.at("name").get<std::string>() != census[i].name ||
            p.at("rows").get<int>() != census[i].rows ||
            p.at("cols").get<int>() != census[i].cols ||
            p.at("trainable").get<bool>() != census[i].trainable)
            throw std::runtime_error("checkpoint: parameter census mismatch at " + census[i].name);
    }
    for (const std::string& name : det.store_.names()) {
        read_blob(f, det.store_.value(name));
        read_blob(f, det.store_.adam_m(name));
        read_blob(f, det.store_.adam_v(name));
    }
    det.store_.set_step_count(header.at("adam_step").get<int64_t>());
    if (label_space_fingerprint)
        *label_space_fingerprint = header.at("label_space_fingerprint").get<uint64_t>();
    return det;
}

}  // namespace hoikit
