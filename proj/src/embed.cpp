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

#include "hoikit/embed.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hoikit/checksum.hpp"
#include "hoikit/nn.hpp"
#include "hoikit/records.hpp"
#include "hoikit/rng.hpp"
#include "hoikit/tape.hpp"

namespace hoikit {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double gelu_scalar(double v) { return 0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440)); }

std::vector<double> affine(const std::vector<double>& x, const Tensor& w, const Tensor* b) {
    if (static_cast<int>(x.size()) != w.rows)
        throw std::runtime_error("embed: feature dimension mismatch");
    Eigen::Map<const Eigen::RowVectorXd> xv(x.data(), x.size());
    Eigen::Map<const EMat> wv(w.data.data(), w.rows, w.cols);
    Eigen::RowVectorXd y = xv * wv;
    std::vector<double> out(w.cols);
    for (int i = 0; i < w.cols; ++i) out[i] = y[i] + (b ? b->data[i] : 0.0);
    return out;
}

void l2_normalize(std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    double n = std::max(std::sqrt(s), 1e-12);
    for (double& x : v) x /= n;
}

uint64_t tensor_checksum(uint64_t h, const Tensor& t) {
    return fnv1a64_bytes(t.data.data(), t.data.size() * sizeof(double), h);
}

nlohmann::json tensor_to_json(const Tensor& t) {
    nlohmann::json j;
    j["rows"] = t.rows;
    j["cols"] = t.cols;
    nlohmann::json arr = nlohmann::json::array();
    for (double v : t.data) arr.push_back(format_double(v));
    j["data"] = std::move(arr);
    return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
    Tensor t(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto& arr = j.at("data");
    if (arr.size() != t.size()) throw std::runtime_error("embed: tensor payload size mismatch");
    for (size_t i = 0; i < t.size(); ++i) t.data[i] = std::stod(arr[i].get<std::string>());
    return t;
}

}  // namespace

std::vector<double> image_region_features(const Raster& img, double x0, double y0, double x1,
                                          double y1) {
    return crop_resize_rows(img, x0, y0, x1, y1, kEmbedRes, kEmbedRes);
}

std::vector<double> image_features(const Raster& img) {
    return image_region_features(img, 0, 0, img.width, img.height);
}

std::vector<double> image_box_features(const Raster& img, const Box& box) {
    auto [x0, y0, x1, y1] = box.corners();
    return image_region_features(img, x0 * img.width, y0 * img.height, x1 * img.width,
                                 y1 * img.height);
}

std::vector<double> text_features(const std::string& text) {
    std::vector<double> feat(kTextBuckets, 0.0);
    std::string token;
    double total = 0;
    auto flush = [&]() {
        if (token.empty()) return;
        feat[fnv1a64(token) % kTextBuckets] += 1.0;
        total += 1.0;
        token.clear();
    };
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch)))
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        else
            flush();
    }
    flush();
    if (total > 0)
        for (double& v : feat) v /= total;
    return feat;
}

std::vector<double> SceneEmbedder::embed_image(const Raster& img) const {
    return embed_image_features(image_features(img));
}

std::vector<double> SceneEmbedder::embed_region(const Raster& img, const Box& box) const {
    return embed_image_features(image_box_features(img, box));
}

uint64_t SceneEmbedder::fingerprint() const {
    uint64_t h = fnv1a64(name());
    uint64_t s = seed();
    h = fnv1a64_bytes(&s, sizeof(s), h);
    uint64_t w = weights_checksum();
    return fnv1a64_bytes(&w, sizeof(w), h);
}

// ---------------------------------------------------------------------------

RandomProjectionEmbedder::RandomProjectionEmbedder(uint64_t seed, int dim)
    : seed_(seed), dim_(dim) {
    Rng ri(derive_seed(seed, fnv1a64("image_projection")));
    img_proj_ = Tensor::randn(kImageFeatDim, dim, ri, 1.0 / std::sqrt(double(kImageFeatDim)));
    Rng rt(derive_seed(seed, fnv1a64("text_projection")));
    txt_proj_ = Tensor::randn(kTextBuckets, dim, rt, 1.0 / std::sqrt(double(kTextBuckets)));
}

std::vector<double> RandomProjectionEmbedder::embed_image_features(
    const std::vector<double>& feat) const {
    auto e = affine(feat, img_proj_, nullptr);
    l2_normalize(e);
    return e;
}

std::vector<double> RandomProjectionEmbedder::embed_text(const std::string& text) const {
    auto e = affine(text_features(text), txt_proj_, nullptr);
    l2_normalize(e);
    return e;
}

uint64_t RandomProjectionEmbedder::weights_checksum() const {
    return tensor_checksum(tensor_checksum(0xcbf29ce484222325ULL, img_proj_), txt_proj_);
}

// ---------------------------------------------------------------------------

std::vector<double> ToyDualEncoder::embed_image_features(const std::vector<double>& feat) const {
    auto h = affine(feat, iw1_, &ib1_);
    for (double& v : h) v = gelu_scalar(v);
    auto e = affine(h, iw2_, &ib2_);
    l2_normalize(e);
    return e;
}

std::vector<double> ToyDualEncoder::embed_text(const std::string& text) const {
    auto h = affine(text_features(text), tw1_, &tb1_);
    for (double& v : h) v = gelu_scalar(v);
    auto e = affine(h, tw2_, &tb2_);
    l2_normalize(e);
    return e;
}

uint64_t ToyDualEncoder::weights_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor* t : {&iw1_, &ib1_, &iw2_, &ib2_, &tw1_, &tb1_, &tw2_, &tb2_})
        h = tensor_checksum(h, *t);
    return h;
}

void ToyDualEncoder::save(const std::string& path) const {
    nlohmann::json j;
    j["kind"] = "toy_dual";
    j["seed"] = seed_;
    j["dim"] = dim_;
    j["hidden"] = hidden_;
    j["tensors"]["iw1"] = tensor_to_json(iw1_);
    j["tensors"]["ib1"] = tensor_to_json(ib1_);
    j["tensors"]["iw2"] = tensor_to_json(iw2_);
    j["tensors"]["ib2"] = tensor_to_json(ib2_);
    j["tensors"]["tw1"] = tensor_to_json(tw1_);
    j["tensors"]["tb1"] = tensor_to_json(tb1_);
    j["tensors"]["tw2"] = tensor_to_json(tw2_);
    j["tensors"]["tb2"] = tensor_to_json(tb2_);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("ToyDualEncoder::save: cannot open " + path);
    out << j.dump(1) << "\n";
}

ToyDualEncoder ToyDualEncoder::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ToyDualEncoder::load: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("kind").get<std::string>() != "toy_dual")
        throw std::runtime_error("ToyDualEncoder::load: wrong provider kind");
    ToyDualEncoder e;
    e.seed_ = j.at("seed").get<uint64_t>();
    e.dim_ = j.at("dim").get<int>();
    e.hidden_ = j.at("hidden").get<int>();
    const auto& t = j.at("tensors");
    e.iw1_ = tensor_from_json(t.at("iw1"));
    e.ib1_ = tensor_from_json(t.at("ib1"));
    e.iw2_ = tensor_from_json(t.at("iw2"));
    e.ib2_ = tensor_from_json(t.at("ib2"));
    e.tw1_ = tensor_from_json(t.at("tw1"));
    e.tb1_ = tensor_from_json(t.at("tb1"));
    e.tw2_ = tensor_from_json(t.at("tw2"));
    e.tb2_ = tensor_from_json(t.at("tb2"));
    return e;
}

ToyDualEncoder pretrain_toy_dual(
    const std::vector<std::pair<std::vector<double>, std::string>>& pairs, uint64_t seed,
    const ToyDualTrainConfig& cfg) {
    if (pairs.size() < 2) throw std::runtime_error("pretrain_toy_dual: need at least 2 pairs");
    ParamStore ps;
    Rng rinit(derive_seed(seed, fnv1a64("toy_dual_init")));
    Mlp img = Mlp::create(ps, "img", kImageFeatDim, cfg.hidden, cfg.dim, rinit);
    Mlp txt = Mlp::create(ps, "txt", kTextBuckets, cfg.hidden, cfg.dim, rinit);

    // text features are reused across steps; cache them once
    std::vector<std::vector<double>> tfeat;
    tfeat.reserve(pairs.size());
    for (const auto& [img_feat, caption] : pairs) {
        (void)img_feat;
        tfeat.push_back(text_features(caption));
    }

    Rng rbatch(derive_seed(seed, fnv1a64("toy_dual_batches")));
    AdamConfig adam;
    adam.lr = cfg.lr;
    adam.max_grad_norm = 1.0;
    int B = std::min<int>(cfg.batch, static_cast<int>(pairs.size()));
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor fi(B, kImageFeatDim), ft(B, kTextBuckets);
        for (int b = 0; b < B; ++b) {
            int idx = rbatch.uniform_int(static_cast<int>(pairs.size()));
            std::copy(pairs[idx].first.begin(), pairs[idx].first.end(), &fi.at(b, 0));
            std::copy(tfeat[idx].begin(), tfeat[idx].end(), &ft.at(b, 0));
        }
        Tape tape;
        ps.start_step(tape);
        Var ei = tape.normalize_rows(img.forward(ps, tape.constant(std::move(fi))));
        Var et = tape.normalize_rows(txt.forward(ps, tape.constant(std::move(ft))));
        Var sims = tape.scale(tape.matmul_nt(ei, et), 1.0 / cfg.tau);
        // symmetric InfoNCE: image->text rows plus text->image rows
        Var lsm_i = tape.log_softmax_rows(sims);
        Var lsm_t = tape.log_softmax_rows(tape.transpose(sims));
        Var diag_sum = tape.constant(Tensor::zeros(1, 1));
        for (int b = 0; b < B; ++b) {
            diag_sum = tape.add(diag_sum, tape.pick(lsm_i, b, b));
            diag_sum = tape.add(diag_sum, tape.pick(lsm_t, b, b));
        }
        Var loss = tape.scale(diag_sum, -0.5 / B);
        tape.backward(loss);
        StepReport rep = ps.apply_adam(adam);
        if (!rep.finite)
            throw std::runtime_error("pretrain_toy_dual: non-finite gradient at step " +
                                     std::to_string(step));
    }

    ToyDualEncoder enc;
    enc.seed_ = seed;
    enc.dim_ = cfg.dim;
    enc.hidden_ = cfg.hidden;
    enc.iw1_ = ps.value("img.fc1.w");
    enc.ib1_ = ps.value("img.fc1.b");
    enc.iw2_ = ps.value("img.fc2.w");
    enc.ib2_ = ps.value("img.fc2.b");
    enc.tw1_ = ps.value("txt.fc1.w");
    enc.tb1_ = ps.value("txt.fc1.b");
    enc.tw2_ = ps.value("txt.fc2.w");
    enc.tb2_ = ps.value("txt.fc2.b");
    return enc;
}

std::unique_ptr<SceneEmbedder> make_embedder(const std::string& name, uint64_t seed,
                                             const std::string& weights_path, int dim) {
    if (name == "random_projection") return std::make_unique<RandomProjectionEmbedder>(seed, dim);
    if (name == "toy_dual") {
        if (weights_path.empty())
            throw std::runtime_error(
                "make_embedder: toy_dual provider not initialized (no weights file; pre-train it "
                "first)");
        return std::make_unique<ToyDualEncoder>(ToyDualEncoder::load(weights_path));
    }
    throw std::runtime_error("make_embedder: unknown provider '" + name + "'");
}

}  // namespace hoikit
