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

#include "hoikit/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hoikit/checksum.hpp"
#include "hoikit/embed.hpp"
#include "hoikit/records.hpp"

namespace hoikit {
namespace {

using nlohmann::json;

}  // namespace

Corpus load_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<TripletRecord> recs = read_records((fs::path(dir) / "records.txt").string());
    std::map<std::string, std::vector<TripletAnnotation>> grouped;
    for (const auto& r : recs) grouped[r.image_id].push_back(r.ann);

    Corpus corpus;
    for (auto& [id, anns] : grouped) {
        fs::path img_path = fs::path(dir) / "images" / (id + ".ppm");
        if (!fs::exists(img_path))
            throw std::runtime_error("load_corpus: missing image file for record " + id);
        corpus.images.push_back({id, read_ppm(img_path.string()), std::move(anns)});
    }
    return corpus;  // std::map iteration: already ascending by image_id
}

PromptModality sample_prompt_modality(Rng& rng, double p_visual) {
    return rng.bernoulli(p_visual) ? PromptModality::kVisual : PromptModality::kText;
}

Signature image_signature(const CorpusImage& img) {
    std::set<std::pair<int, int>> uniq;
    for (const auto& ann : img.annotations) uniq.insert({ann.verb_class, ann.object_class});
    return Signature(uniq.begin(), uniq.end());
}

SignatureIndex build_signature_index(const Corpus& corpus) {
    std::map<Signature, std::vector<int>> groups;
    for (size_t i = 0; i < corpus.images.size(); ++i)
        groups[image_signature(corpus.images[i])].push_back(static_cast<int>(i));

    SignatureIndex index;
    for (auto& [sig, list] : groups) {
        if (sig.empty()) continue;  // images without annotations carry no signature
        if (list.size() >= 2) index.paired.push_back(static_cast<int>(index.signatures.size()));
        index.signatures.push_back(sig);
        index.image_lists.push_back(std::move(list));
    }
    return index;
}

std::pair<int, int> sample_visual_prompt_pair(const SignatureIndex& index, Rng& rng) {
    if (index.paired.empty())
        throw std::runtime_error(
            "sample_visual_prompt_pair: no signature has two images; "
            "fall back to the textual modality");
    int sig = index.paired[rng.uniform_int(static_cast<int>(index.paired.size()))];
    const std::vector<int>& list = index.image_lists[sig];
    int a = rng.uniform_int(static_cast<int>(list.size()));
    int b = rng.uniform_int(static_cast<int>(list.size()) - 1);
    if (b >= a) ++b;  // two distinct images
    return {list[a], list[b]};
}

VisualPromptSpec exemplar_spec_from(const CorpusImage& img, const UnifiedLabelSpace& space) {
    VisualPromptSpec spec;
    spec.image = img.image;
    for (const auto& ann : img.annotations) {
        int hoi = space.hoi_id(ann.verb_class, ann.object_class);
        if (hoi < 0)
            throw std::invalid_argument("exemplar_spec_from: annotation outside the label space");
        spec.objects.emplace_back(ann.object_class, ann.object);
        spec.interactions.emplace_back(hoi, ann.human, ann.object);
    }
    return spec;
}

PromptBank full_textual_object_bank(const UnifiedLabelSpace& space, const SceneEmbedder& emb) {
    std::vector<int> ids(space.objects.size());
    std::iota(ids.begin(), ids.end(), 0);
    return encode_textual_object_bank(space, ids, emb);
}

PromptBank full_textual_interaction_bank(const UnifiedLabelSpace& space,
                                         const SceneEmbedder& emb) {
    std::vector<int> ids(space.hois.size());
    std::iota(ids.begin(), ids.end(), 0);
    return encode_textual_interaction_bank(space, ids, emb);
}

std::map<std::string, std::vector<ScoredTriplet>> predict_corpus(
    MPHOIDetector& det, const Corpus& corpus, const PromptBank& object_bank,
    const PromptBank& interaction_bank, const UnifiedLabelSpace& space, int top_k) {
    std::map<std::string, std::vector<ScoredTriplet>> out;
    for (const auto& img : corpus.images)
        out[img.image_id] = det.predict(img.image, object_bank, interaction_bank, space, top_k);
    return out;
}

std::map<std::string, std::vector<TripletAnnotation>> corpus_ground_truth(const Corpus& corpus) {
    std::map<std::string, std::vector<TripletAnnotation>> out;
    for (const auto& img : corpus.images) out[img.image_id] = img.annotations;
    return out;
}

EvalReport evaluate_detector(MPHOIDetector& det, const Corpus& corpus,
                             const UnifiedLabelSpace& space, const RarityStats& rarity, int top_k,
                             double iou_threshold) {
    const SceneEmbedder& emb = *det.embedder();
    PromptBank ob = full_textual_object_bank(space, emb);
    PromptBank ib = full_textual_interaction_bank(space, emb);
    auto preds = predict_corpus(det, corpus, ob, ib, space, top_k);
    return evaluate_map(preds, corpus_ground_truth(corpus), space, rarity, iou_threshold);
}

namespace {

std::string nan_dump(int step, const CorpusImage& img, const std::string& modality,
                     const LossBreakdown& values) {
    std::ostringstream os;
    os << "train_detector: non-finite loss at step " << step << " on image " << img.image_id
       << " (modality " << modality << ", " << img.annotations.size() << " ground truths)\n"
       << "  l_b=" << values.l_b << " l_g=" << values.l_g << " l_c_o=" << values.l_c_o
       << " l_c_i=" << values.l_c_i << " tau=" << values.tau << " total=" << values.total;
    for (const auto& ann : img.annotations) {
        os << "\n  gt: verb=" << ann.verb_class << " object=" << ann.object_class << " human=("
           << ann.human.cx << "," << ann.human.cy << "," << ann.human.w << "," << ann.human.h
           << ")";
    }
    return os.str();
}

}  // namespace

TrainLog train_detector(MPHOIDetector& det, const Corpus& train_corpus, const Corpus& eval_corpus,
                        const UnifiedLabelSpace& space, const RarityStats& rarity,
                        const TrainConfig& cfg) {
    if (train_corpus.images.empty())
        throw std::invalid_argument("train_detector: empty train corpus");
    if (cfg.epochs <= 0) throw std::invalid_argument("train_detector: epochs must be positive");

    const SceneEmbedder& emb = *det.embedder();
    const uint64_t emb_sum = emb.weights_checksum();
    const uint64_t ext_sum = det.extractor().weights_checksum();

    PromptBank text_obj = full_textual_object_bank(space, emb);
    PromptBank text_int = full_textual_interaction_bank(space, emb);
    SignatureIndex index = build_signature_index(train_corpus);
    const bool pairs_available = !index.paired.empty();

    Rng order_rng(derive_seed(cfg.seed, fnv1a64("train.order")));
    Rng modality_rng(derive_seed(cfg.seed, fnv1a64("train.modality")));
    Rng pair_rng(derive_seed(cfg.seed, fnv1a64("train.pairs")));

    std::vector<int> order(train_corpus.images.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // forces a shuffle on first use

    const int per_epoch = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch
                                                  : static_cast<int>(train_corpus.images.size());
    TrainLog log;
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int s = 0; s < per_epoch; ++s, ++step) {
            PromptModality modality = sample_prompt_modality(modality_rng, cfg.visual_prob);
            const PromptBank* ob = &text_obj;
            const PromptBank* ib = &text_int;
            PromptBank vis_obj, vis_int;
            const CorpusImage* target = nullptr;
            std::string mod_name = "text";
            if (modality == PromptModality::kVisual && pairs_available) {
                auto [prompt_idx, target_idx] = sample_visual_prompt_pair(index, pair_rng);
                VisualPromptSpec spec =
                    exemplar_spec_from(train_corpus.images[prompt_idx], space);
                vis_obj = encode_visual_object_bank(spec, space, emb);
                vis_int = encode_visual_interaction_bank(spec, space, emb);
                ob = &vis_obj;
                ib = &vis_int;
                target = &train_corpus.images[target_idx];
                mod_name = "visual";
            } else {
                if (cursor >= order.size()) {
                    order_rng.shuffle(order);
                    cursor = 0;
                }
                target = &train_corpus.images[order[cursor++]];
            }

            Tape tape;
            det.store().start_step(tape);
            LossBreakdown values;  // zeros in the dump when the loss never completed
            bool finite = false;
            try {
                ForwardResult fr = det.forward(tape, target->image, *ob, *ib);
                LossGraph lg =
                    total_loss(det, tape, fr, target->annotations, *ob, *ib, space, cfg.weights);
                values = lg.values;
                if (std::isfinite(values.total)) {
                    tape.backward(lg.total);
                    det.store().apply_adam(cfg.adam);
                    finite = true;
                }
            } catch (const std::invalid_argument& e) {
                // the loss stack guards non-finite intermediates (e.g. match
                // costs); surface those as the offending-batch dump
                if (std::string(e.what()).find("non-finite") == std::string::npos) throw;
                throw std::runtime_error(nan_dump(step, *target, mod_name, values) +
                                         "\n  cause: " + e.what());
            }
            if (!finite) throw std::runtime_error(nan_dump(step, *target, mod_name, values));

            if (emb.weights_checksum() != emb_sum)
                throw std::logic_error("train_detector: scene embedder changed during training");
            if (det.extractor().weights_checksum() != ext_sum)
                throw std::logic_error(
                    "train_detector: conditioned extractor changed during training");

            log.steps.push_back({step, target->image_id, mod_name, values});
        }
        if (!eval_corpus.images.empty()) {
            EpochEval ev;
            ev.epoch = epoch;
            ev.report =
                evaluate_detector(det, eval_corpus, space, rarity, cfg.eval_top_k, cfg.eval_iou);
            log.evals.push_back(ev);
        }
    }
    return log;
}

void save_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_train_log: cannot open " + path);
    for (const auto& s : log.steps) {
        json j;
        j["kind"] = "step";
        j["step"] = s.step;
        j["image_id"] = s.image_id;
        j["modality"] = s.modality;
        j["l_b"] = s.loss.l_b;
        j["l_g"] = s.loss.l_g;
        j["l_c_o"] = s.loss.l_c_o;
        j["l_c_i"] = s.loss.l_c_i;
        j["tau"] = s.loss.tau;
        j["total"] = s.loss.total;
        out << j.dump() << "\n";
    }
    for (const auto& e : log.evals) {
        json j;
        j["kind"] = "eval";
        j["epoch"] = e.epoch;
        j["map_full"] = e.report.map_full;
        j["map_rare"] = e.report.map_rare;
        j["map_nonrare"] = e.report.map_nonrare;
        out << j.dump() << "\n";
    }
}

TrainLog load_train_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_train_log: cannot open " + path);
    TrainLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "step") {
            StepRecord s;
            s.step = j.at("step").get<int>();
            s.image_id = j.at("image_id").get<std::string>();
            s.modality = j.at("modality").get<std::string>();
            s.loss.l_b = j.at("l_b").get<double>();
            s.loss.l_g = j.at("l_g").get<double>();
            s.loss.l_c_o = j.at("l_c_o").get<double>();
            s.loss.l_c_i = j.at("l_c_i").get<double>();
            s.loss.tau = j.at("tau").get<double>();
            s.loss.total = j.at("total").get<double>();
            log.steps.push_back(std::move(s));
        } else if (kind == "eval") {
            EpochEval e;
            e.epoch = j.at("epoch").get<int>();
            e.report.map_full = j.at("map_full").get<double>();
            e.report.map_rare = j.at("map_rare").get<double>();
            e.report.map_nonrare = j.at("map_nonrare").get<double>();
            log.evals.push_back(std::move(e));
        } else {
            throw std::runtime_error("load_train_log: unknown record kind '" + kind + "'");
        }
    }
    return log;
}

}  // namespace hoikit
