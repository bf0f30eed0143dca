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

#ifndef HOIKIT_EMBED_HPP_
#define HOIKIT_EMBED_HPP_

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hoikit/geometry.hpp"
#include "hoikit/raster.hpp"
#include "hoikit/tensor.hpp"

namespace hoikit {

// Canonical image-side input: any raster region is bilinearly resized to
// kEmbedRes x kEmbedRes RGB and flattened.  Full-image and crop embeddings of
// the same pixels share this one code path, so a crop covering the whole
// image embeds bitwise-identically to the image itself.
constexpr int kEmbedRes = 16;
constexpr int kImageFeatDim = kEmbedRes * kEmbedRes * 3;  // 768
constexpr int kTextBuckets = 256;

// Region corners in pixel units; clamped by the resampler.
std::vector<double> image_region_features(const Raster& img, double x0, double y0, double x1,
                                          double y1);
std::vector<double> image_features(const Raster& img);
// Region given as a Box in normalized [0,1] coordinates.
std::vector<double> image_box_features(const Raster& img, const Box& box);

// Hashed bag-of-words: lowercase, split on non-alphanumeric runs, FNV-1a
// bucket per token, L1-normalized counts.
std::vector<double> text_features(const std::string& text);

// Frozen scene-embedding provider: deterministic unit-norm embeddings for the
// image side (raster regions) and the text side (prompt strings).
class SceneEmbedder {
  public:
    virtual ~SceneEmbedder() = default;
    virtual std::string name() const = 0;
    virtual uint64_t seed() const = 0;
    virtual int dim() const = 0;
    virtual std::vector<double> embed_image_features(const std::vector<double>& feat) const = 0;
    virtual std::vector<double> embed_text(const std::string& text) const = 0;
    virtual uint64_t weights_checksum() const = 0;

    std::vector<double> embed_image(const Raster& img) const;
    std::vector<double> embed_region(const Raster& img, const Box& box) const;
    // Stable identity: name + seed + weight bytes.
    uint64_t fingerprint() const;
};

// Fallback provider: frozen seeded Gaussian projections of the raw features.
class RandomProjectionEmbedder : public SceneEmbedder {
  public:
    RandomProjectionEmbedder(uint64_t seed, int dim = 32);
    std::string name() const override { return "random_projection"; }
    uint64_t seed() const override { return seed_; }
    int dim() const override { return dim_; }
    std::vector<double> embed_image_features(const std::vector<double>& feat) const override;
    std::vector<double> embed_text(const std::string& text) const override;
    uint64_t weights_checksum() const override;

  private:
    uint64_t seed_;
    int dim_;
    Tensor img_proj_;  // kImageFeatDim x dim
    Tensor txt_proj_;  // kTextBuckets x dim
};

// Default provider: two small MLP towers pre-trained contrastively on
// (scene, caption) pairs from the synthetic corpus, then frozen.
class ToyDualEncoder : public SceneEmbedder {
  public:
    std::string name() const override { return "toy_dual"; }
    uint64_t seed() const override { return seed_; }
    int dim() const override { return dim_; }
    std::vector<double> embed_image_features(const std::vector<double>& feat) const override;
    std::vector<double> embed_text(const std::string& text) const override;
    uint64_t weights_checksum() const override;

    void save(const std::string& path) const;
    static ToyDualEncoder load(const std::string& path);

    friend ToyDualEncoder pretrain_toy_dual(
        const std::vector<std::pair<std::vector<double>, std::string>>& pairs, uint64_t seed,
        const struct ToyDualTrainConfig& cfg);

  private:
    uint64_t seed_ = 0;
    int dim_ = 32;
    int hidden_ = 64;
    // image tower: feat -> gelu(fc1) -> fc2 -> normalize; text tower likewise
    Tensor iw1_, ib1_, iw2_, ib2_;
    Tensor tw1_, tb1_, tw2_, tb2_;
};

struct ToyDualTrainConfig {
    int steps = 600;
    int batch = 16;
    double lr = 3e-3;
    double tau = 0.07;
    int hidden = 64;
    int dim = 32;
};

// Symmetric InfoNCE over (image-feature, caption) pairs; deterministic in
// (pairs order, seed, cfg).
ToyDualEncoder pretrain_toy_dual(
    const std::vector<std::pair<std::vector<double>, std::string>>& pairs, uint64_t seed,
    const ToyDualTrainConfig& cfg = {});

// Registry keyed by provider name.  "toy_dual" requires weights_path (its
// weights come from pre-training, not from the seed alone, and carry their
// own dimension); `dim` applies to "random_projection".
std::unique_ptr<SceneEmbedder> make_embedder(const std::string& name, uint64_t seed,
                                             const std::string& weights_path = "", int dim = 32);

}  // namespace hoikit

#endif  // HOIKIT_EMBED_HPP_
