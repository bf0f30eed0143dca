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

#include "hoikit/prompts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "hoikit/records.hpp"

namespace hoikit {

namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// Vocabulary terms may join words with underscores; prompts use spaces.
std::string spaced(const std::string& term) {
    std::string out = term;
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

void validate_unit_rows(const Tensor& t) {
    for (int r = 0; r < t.rows; ++r) {
        double s = 0;
        for (int c = 0; c < t.cols; ++c) s += t.at(r, c) * t.at(r, c);
        if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
            throw std::runtime_error("PromptBank: embedding row not unit-norm");
    }
}

PromptBank build_bank(std::string kind, std::map<int, std::vector<std::vector<double>>> by_cat,
                      const std::string& modality, const SceneEmbedder& emb) {
    PromptBank bank;
    bank.kind = std::move(kind);
    bank.provider_fingerprint = emb.fingerprint();
    bank.embeddings = Tensor(static_cast<int>(by_cat.size()), emb.dim());
    int row = 0;
    for (auto& [cat, vecs] : by_cat) {  // std::map: ascending category id
        bank.category_ids.push_back(cat);
        bank.modalities.push_back(modality);
        std::vector<double> mean(emb.dim(), 0.0);
        for (const auto& v : vecs)
            for (int i = 0; i < emb.dim(); ++i) mean[i] += v[i];
        double s = 0;
        for (double& m : mean) {
            m /= static_cast<double>(vecs.size());
            s += m * m;
        }
        double n = std::max(std::sqrt(s), 1e-12);
        for (int i = 0; i < emb.dim(); ++i) bank.embeddings.at(row, i) = mean[i] / n;
        ++row;
    }
    validate_unit_rows(bank.embeddings);
    return bank;
}

}  // namespace

int PromptBank::index_of(int category_id) const {
    auto it = std::lower_bound(category_ids.begin(), category_ids.end(), category_id);
    if (it == category_ids.end() || *it != category_id) return -1;
    return static_cast<int>(it - category_ids.begin());
}

std::string ing_form(const std::string& verb) {
    std::string head = verb, tail;
    size_t cut = verb.find_first_of("_ ");
    if (cut != std::string::npos) {
        head = verb.substr(0, cut);
        tail = " " + spaced(verb.substr(cut + 1));
    }
    if (head.empty()) throw std::runtime_error("ing_form: empty verb");
    size_t n = head.size();
    if (n >= 2 && head.compare(n - 2, 2, "ie") == 0)
        head = head.substr(0, n - 2) + "ying";
    else if (n >= 2 && head[n - 1] == 'e' && head[n - 2] != 'e')
        head = head.substr(0, n - 1) + "ing";
    else if (n >= 3 && !is_vowel(head[n - 1]) && head[n - 1] != 'w' && head[n - 1] != 'x' &&
             head[n - 1] != 'y' && is_vowel(head[n - 2]) && !is_vowel(head[n - 3]))
        head = head + head[n - 1] + "ing";
    else
        head += "ing";
    return head + tail;
}

std::string object_prompt_sentence(const std::string& object_term) {
    return "A photo of a " + spaced(object_term);
}

std::string interaction_prompt_sentence(const std::string& verb_term,
                                        const std::string& object_term,
                                        const std::string& person_slot) {
    return "A photo of a " + person_slot + " " + ing_form(verb_term) + " a " + spaced(object_term);
}

PromptBank encode_textual_object_bank(const UnifiedLabelSpace& space,
                                      const std::vector<int>& object_ids,
                                      const SceneEmbedder& emb) {
    std::map<int, std::vector<std::vector<double>>> by_cat;
    for (int id : object_ids) {
        if (id < 0 || id >= static_cast<int>(space.objects.size()))
            throw std::runtime_error("encode_textual_object_bank: unknown object id " +
                                     std::to_string(id));
        by_cat[id].push_back(emb.embed_text(object_prompt_sentence(space.objects[id])));
    }
    return build_bank("object", std::move(by_cat), "text", emb);
}

PromptBank encode_textual_interaction_bank(const UnifiedLabelSpace& space,
                                           const std::vector<int>& hoi_ids,
                                           const SceneEmbedder& emb,
                                           const std::string& person_slot) {
    std::map<int, std::vector<std::vector<double>>> by_cat;
    for (int id : hoi_ids) {
        if (id < 0 || id >= static_cast<int>(space.hois.size()))
            throw std::runtime_error("encode_textual_interaction_bank: unknown hoi id " +
                                     std::to_string(id));
        const auto& [action, object] = space.hois[id];
        by_cat[id].push_back(emb.embed_text(
            interaction_prompt_sentence(space.actions[action], space.objects[object], person_slot)));
    }
    return build_bank("interaction", std::move(by_cat), "text", emb);
}

Box union_box(const Box& a, const Box& b) {
    auto [ax1, ay1, ax2, ay2] = a.corners();
    auto [bx1, by1, bx2, by2] = b.corners();
    return Box::from_corners(std::min(ax1, bx1), std::min(ay1, by1), std::max(ax2, bx2),
                             std::max(ay2, by2));
}

PromptBank encode_visual_object_bank(const VisualPromptSpec& spec, const UnifiedLabelSpace& space,
                                     const SceneEmbedder& emb) {
    std::map<int, std::vector<std::vector<double>>> by_cat;
    for (const auto& [id, box] : spec.objects) {
        if (id < 0 || id >= static_cast<int>(space.objects.size()))
            throw std::runtime_error("encode_visual_object_bank: unknown object id " +
                                     std::to_string(id));
        by_cat[id].push_back(emb.embed_region(spec.image, box));
    }
    if (by_cat.empty()) throw std::runtime_error("encode_visual_object_bank: no exemplars");
    return build_bank("object", std::move(by_cat), "visual", emb);
}

PromptBank encode_visual_interaction_bank(const VisualPromptSpec& spec,
                                          const UnifiedLabelSpace& space,
                                          const SceneEmbedder& emb) {
    std::map<int, std::vector<std::vector<double>>> by_cat;
    for (const auto& [id, human, object] : spec.interactions) {
        if (id < 0 || id >= static_cast<int>(space.hois.size()))
            throw std::runtime_error("encode_visual_interaction_bank: unknown hoi id " +
                                     std::to_string(id));
        by_cat[id].push_back(emb.embed_region(spec.image, union_box(human, object)));
    }
    if (by_cat.empty()) throw std::runtime_error("encode_visual_interaction_bank: no exemplars");
    return build_bank("interaction", std::move(by_cat), "visual", emb);
}

// ---------------------------------------------------------------------------

PromptClassifier PromptClassifier::create(ParamStore& ps, const std::string& prefix, int query_dim,
                                          int embed_dim, Rng& rng) {
    PromptClassifier c;
    c.proj = Linear::create(ps, prefix + ".proj", query_dim, embed_dim, rng);
    return c;
}

Var PromptClassifier::logits(ParamStore& ps, Var queries, Var bank_rows, Var tau) const {
    Tape& t = ps.tape();
    const Tensor& tv = t.value(tau);
    if (tv.rows != 1 || tv.cols != 1) throw std::runtime_error("PromptClassifier: tau must be 1x1");
    if (tv.data[0] <= 0.0)
        throw std::runtime_error("PromptClassifier: temperature must be positive");
    Var qn = t.normalize_rows(proj.forward(ps, queries));
    Var sims = t.matmul_nt(qn, bank_rows);  // N x K cosine scores
    // divide by the learned temperature: broadcast 1/tau across all columns
    int K = t.value(bank_rows).rows;
    Var inv = t.div(t.constant(Tensor::full(1, 1, 1.0)), tau);
    Var inv_row = t.matmul(inv, t.constant(Tensor::full(1, K, 1.0)));
    return t.mul_rowvec(sims, inv_row);
}

Var PromptClassifier::distributions(ParamStore& ps, Var queries, Var bank_rows, Var tau) const {
    return ps.tape().softmax_rows(logits(ps, queries, bank_rows, tau));
}

// ---------------------------------------------------------------------------

void save_bank(const std::string& path, const PromptBank& bank) {
    nlohmann::json j;
    j["kind"] = bank.kind;
    j["dim"] = bank.dim();
    j["provider_fingerprint"] = bank.provider_fingerprint;
    j["category_ids"] = bank.category_ids;
    j["modalities"] = bank.modalities;
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < bank.embeddings.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < bank.embeddings.cols; ++c)
            row.push_back(format_double(bank.embeddings.at(r, c)));
        rows.push_back(std::move(row));
    }
    j["embeddings"] = std::move(rows);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_bank: cannot open " + path);
    out << j.dump(1) << "\n";
}

PromptBank load_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_bank: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    PromptBank bank;
    bank.kind = j.at("kind").get<std::string>();
    bank.provider_fingerprint = j.at("provider_fingerprint").get<uint64_t>();
    bank.category_ids = j.at("category_ids").get<std::vector<int>>();
    bank.modalities = j.at("modalities").get<std::vector<std::string>>();
    const auto& rows = j.at("embeddings");
    int dim = j.at("dim").get<int>();
    bank.embeddings = Tensor(static_cast<int>(rows.size()), dim);
    for (size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<int>(rows[r].size()) != dim)
            throw std::runtime_error("load_bank: ragged embedding row");
        for (int c = 0; c < dim; ++c)
            bank.embeddings.at(static_cast<int>(r), c) = std::stod(rows[r][c].get<std::string>());
    }
    if (bank.category_ids.size() != rows.size() || bank.modalities.size() != rows.size())
        throw std::runtime_error("load_bank: field lengths disagree");
    if (!std::is_sorted(bank.category_ids.begin(), bank.category_ids.end()))
        throw std::runtime_error("load_bank: category ids not ascending");
    return bank;
}

}  // namespace hoikit
