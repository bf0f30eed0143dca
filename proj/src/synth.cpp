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

#include "hoikit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "hoikit/checksum.hpp"
#include "hoikit/embed.hpp"
#include "hoikit/prompts.hpp"
#include "hoikit/records.hpp"

namespace hoikit {
namespace {

using nlohmann::json;

std::string spaced(const std::string& term) {
    std::string out = term;
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

constexpr Rgb kPersonColor{40, 80, 170};

constexpr int kGlyphCount = 8;
constexpr Rgb kGlyphColors[kGlyphCount] = {
    {200, 60, 50},  {60, 160, 70},  {230, 150, 40}, {140, 70, 180},
    {180, 40, 120}, {70, 150, 200}, {120, 120, 40}, {100, 60, 30},
};

// Pixel rect of a normalized box on a canvas whose corners sit on the pixel
// grid: [X0, X1) half-open, drawn as inclusive [X0, X1-1].
struct PixelRect {
    int x0, y0, x1, y1;  // inclusive
    int w() const { return x1 - x0 + 1; }
    int h() const { return y1 - y0 + 1; }
};

PixelRect to_pixels(const Box& b, int canvas) {
    auto [cx0, cy0, cx1, cy1] = b.corners();
    return {static_cast<int>(std::lround(cx0 * canvas)), static_cast<int>(std::lround(cy0 * canvas)),
            static_cast<int>(std::lround(cx1 * canvas)) - 1,
            static_cast<int>(std::lround(cy1 * canvas)) - 1};
}

// Intersection area over the smaller box area; 0 for disjoint boxes.
double overlap_fraction(const Box& a, const Box& b) {
    auto [ax0, ay0, ax1, ay1] = a.corners();
    auto [bx0, by0, bx1, by1] = b.corners();
    double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
    double ih = std::min(ay1, by1) - std::max(ay0, by0);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    double small = std::min(a.w * a.h, b.w * b.h);
    if (small <= 0.0) return 0.0;
    return iw * ih / small;
}

void check_placement(const Placement& p, const char* kind) {
    auto [x0, y0, x1, y1] = p.box.corners();
    if (!p.box.valid() || x0 < 0.0 || y0 < 0.0 || x1 > 1.0 || y1 > 1.0)
        throw std::invalid_argument(std::string(kind) + " placement outside the canvas");
}

}  // namespace

PhrasePools PhrasePools::defaults() {
    PhrasePools p;
    p.persons = {"a man", "a woman", "an elderly person", "a teenager", "a child"};
    p.environments = {"in a park", "on a city street", "at the beach", "in a living room",
                      "on a country road"};
    p.photo_infos = {"DSLR photo", "wide-angle shot", "close-up", "grainy film photo",
                     "studio lighting"};
    return p;
}

std::string HOIPrompt::sentence() const {
    return person_desc + " " + ing_form(verb) + " a " + spaced(object_desc) + ", " + environment +
           ", " + photo_info;
}

HOIPrompt compose_hoiprompt(std::pair<int, int> triplet, const UnifiedLabelSpace& space, Rng& rng,
                            const PhrasePools& pools) {
    auto [action, object] = triplet;
    if (action < 0 || action >= static_cast<int>(space.actions.size()) || object < 0 ||
        object >= static_cast<int>(space.objects.size()))
        throw std::invalid_argument("compose_hoiprompt: triplet outside the label space");
    if (pools.persons.empty() || pools.environments.empty() || pools.photo_infos.empty())
        throw std::invalid_argument("compose_hoiprompt: empty phrase pool");

    HOIPrompt p;
    p.person_desc = pools.persons[rng.uniform_int(static_cast<int>(pools.persons.size()))];
    p.environment = pools.environments[rng.uniform_int(static_cast<int>(pools.environments.size()))];
    p.photo_info = pools.photo_infos[rng.uniform_int(static_cast<int>(pools.photo_infos.size()))];
    p.verb = space.actions[action];
    p.object_desc = space.objects[object];
    p.triplet = triplet;
    return p;
}

SpatialRelation relation_for_action(const std::string& verb) {
    static const std::map<std::string, SpatialRelation> kTable = {
        {"hold", SpatialRelation::kContact},   {"carry", SpatialRelation::kContact},
        {"pet", SpatialRelation::kContact},    {"feed", SpatialRelation::kContact},
        {"eat", SpatialRelation::kContact},    {"wield", SpatialRelation::kContact},
        {"ride", SpatialRelation::kMount},     {"sit_on", SpatialRelation::kMount},
        {"straddle", SpatialRelation::kMount}, {"stand_on", SpatialRelation::kMount},
        {"mount", SpatialRelation::kMount},    {"kick", SpatialRelation::kBeside},
        {"push", SpatialRelation::kBeside},    {"hit", SpatialRelation::kBeside},
        {"chase", SpatialRelation::kBeside},   {"walk", SpatialRelation::kBeside},
        {"wash", SpatialRelation::kBeside},    {"throw", SpatialRelation::kApart},
        {"fly", SpatialRelation::kApart},      {"watch", SpatialRelation::kApart},
        {"point_at", SpatialRelation::kApart}, {"launch", SpatialRelation::kApart},
    };
    auto it = kTable.find(verb);
    if (it != kTable.end()) return it->second;
    return static_cast<SpatialRelation>(fnv1a64(verb) % 4);
}

int glyph_count() { return kGlyphCount; }

void draw_object_glyph(Raster& img, int archetype, int x0, int y0, int x1, int y1) {
    if (archetype < 0 || archetype >= kGlyphCount)
        throw std::invalid_argument("draw_object_glyph: unknown archetype");
    Rgb c = kGlyphColors[archetype];
    int w = x1 - x0 + 1, h = y1 - y0 + 1;
    int cx = x0 + (w - 1) / 2, cy = y0 + (h - 1) / 2;
    int r = (std::min(w, h) - 1) / 2;
    switch (archetype) {
        case 0: fill_disk(img, cx, cy, r, c); break;
        case 1: fill_ring(img, cx, cy, r, std::max(1, (2 * r) / 3), c); break;
        case 2: fill_triangle_up(img, x0, y0, x1, y1, c); break;
        case 3: fill_diamond(img, x0, y0, x1, y1, c); break;
        case 4: fill_cross(img, x0, y0, x1, y1, c); break;
        case 5: fill_rect(img, x0, y0, x1, y1, c); break;
        case 6: draw_rect_outline(img, x0, y0, x1, y1, c, 2); break;
        default:  // bullseye
            fill_ring(img, cx, cy, r, std::max(2, (2 * r) / 3), c);
            fill_disk(img, cx, cy, std::max(1, r / 3), c);
            break;
    }
}

void draw_person_glyph(Raster& img, int x0, int y0, int x1, int y1) {
    int w = x1 - x0 + 1, h = y1 - y0 + 1;
    int cx = x0 + w / 2;
    int head_r = std::max(2, std::min(w / 3, h / 6));
    int neck_y = y0 + 2 * head_r;
    int hip_y = y0 + (2 * h) / 3;
    fill_disk(img, cx, y0 + head_r, head_r, kPersonColor);
    fill_rect(img, cx - std::max(1, w / 5), neck_y, cx + std::max(1, w / 5), hip_y, kPersonColor);
    draw_line(img, x0, neck_y + 2, x1, neck_y + 2, kPersonColor);           // arms
    draw_line(img, cx - 1, hip_y, x0 + w / 6, y1, kPersonColor);            // legs
    draw_line(img, cx + 1, hip_y, x1 - w / 6, y1, kPersonColor);
}

SceneSpec make_scene_spec(std::pair<int, int> triplet, const UnifiedLabelSpace& space, Rng& rng,
                          int canvas) {
    auto [action, object] = triplet;
    if (action < 0 || action >= static_cast<int>(space.actions.size()) || object < 0 ||
        object >= static_cast<int>(space.objects.size()))
        throw std::invalid_argument("make_scene_spec: triplet outside the label space");
    if (canvas < 64) throw std::invalid_argument("make_scene_spec: canvas must be at least 64");

    const double c = canvas;
    SpatialRelation rel = relation_for_action(space.actions[action]);
    for (int attempt = 0; attempt < 64; ++attempt) {
        int pw = 14 + rng.uniform_int(8), ph = 26 + rng.uniform_int(12);
        int ow = 10 + rng.uniform_int(8), oh = 10 + rng.uniform_int(8);
        // Object offset (dx, dy) relative to the person's top-left corner.
        int dx = 0, dy = 0;
        switch (rel) {
            case SpatialRelation::kContact:  // sticking out of the actor's side
                dx = pw - ow / 3 + rng.uniform_int(3);
                dy = ph / 4 - oh / 2 + rng.uniform_int(4);
                break;
            case SpatialRelation::kMount:  // actor on top, slight overlap
                dx = (pw - ow) / 2 + rng.uniform_int(5) - 2;
                dy = ph - 2;
                break;
            case SpatialRelation::kBeside:  // gap at waist height
                dx = pw + 2 + rng.uniform_int(4);
                dy = ph / 2 + rng.uniform_int(std::max(1, ph / 4));
                break;
            case SpatialRelation::kApart:  // airborne, above head height
                dx = pw + 4 + rng.uniform_int(5);
                dy = -(oh + 3 + rng.uniform_int(5));
                break;
        }
        int ux0 = std::min(0, dx), uy0 = std::min(0, dy);
        int ux1 = std::max(pw, dx + ow), uy1 = std::max(ph, dy + oh);
        int uw = ux1 - ux0, uh = uy1 - uy0;
        if (uw > canvas - 2 || uh > canvas - 2) continue;
        int px0 = 1 - ux0 + rng.uniform_int(canvas - 1 - uw);
        int py0 = 1 - uy0 + rng.uniform_int(canvas - 1 - uh);
        int ox0 = px0 + dx, oy0 = py0 + dy;

        SceneSpec spec;
        spec.canvas = canvas;
        spec.actors.push_back(
            {Box::from_corners(px0 / c, py0 / c, (px0 + pw) / c, (py0 + ph) / c), 0, -1});
        spec.objects.push_back({Box::from_corners(ox0 / c, oy0 / c, (ox0 + ow) / c, (oy0 + oh) / c),
                                object % kGlyphCount, object});
        spec.links.push_back({0, 0, action});
        return spec;
    }
    throw std::runtime_error("make_scene_spec: no placement fits the canvas");
}

std::optional<SynthSample> render_scene(const SceneSpec& spec, double occlusion_budget) {
    if (spec.canvas <= 0) throw std::invalid_argument("render_scene: canvas must be positive");
    for (const auto& a : spec.actors) check_placement(a, "actor");
    for (const auto& o : spec.objects) {
        check_placement(o, "object");
        if (o.archetype < 0 || o.archetype >= kGlyphCount)
            throw std::invalid_argument("render_scene: unknown object archetype");
    }
    for (const auto& l : spec.links) {
        if (l.actor < 0 || l.actor >= static_cast<int>(spec.actors.size()) || l.object < 0 ||
            l.object >= static_cast<int>(spec.objects.size()))
            throw std::invalid_argument("render_scene: link references a missing placement");
    }

    std::vector<Box> all;
    for (const auto& a : spec.actors) all.push_back(a.box);
    for (const auto& o : spec.objects) all.push_back(o.box);
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = i + 1; j < all.size(); ++j)
            if (overlap_fraction(all[i], all[j]) > occlusion_budget) return std::nullopt;

    SynthSample s;
    s.image = Raster(spec.canvas, spec.canvas);
    for (const auto& a : spec.actors) {
        PixelRect r = to_pixels(a.box, spec.canvas);
        draw_person_glyph(s.image, r.x0, r.y0, r.x1, r.y1);
    }
    for (const auto& o : spec.objects) {
        PixelRect r = to_pixels(o.box, spec.canvas);
        draw_object_glyph(s.image, o.archetype, r.x0, r.y0, r.x1, r.y1);
    }
    for (const auto& l : spec.links) {
        TripletAnnotation ann;
        ann.human = spec.actors[l.actor].box;
        ann.object = spec.objects[l.object].box;
        ann.object_class = spec.objects[l.object].category;
        ann.verb_class = l.action;
        s.annotations.push_back(ann);
    }
    return s;
}

FilterResult filter_samples(const std::vector<SynthSample>& samples,
                            const std::function<double(const SynthSample&)>& score_fn,
                            double threshold) {
    FilterResult out;
    double sum = 0.0;
    for (const auto& s : samples) {
        double score = score_fn(s);
        if (score >= threshold) {
            out.kept.push_back(s);
            out.kept.back().quality_score = score;
            sum += score;
        }
    }
    if (!out.kept.empty()) out.mean_kept_score = sum / static_cast<double>(out.kept.size());
    return out;
}

std::function<double(const SynthSample&)> make_consistency_scorer(const SceneEmbedder& embedder) {
    return [&embedder](const SynthSample& s) {
        std::vector<double> img = embedder.embed_image(s.image);
        std::vector<double> txt = embedder.embed_text(s.prompt.sentence());
        double dot = std::inner_product(img.begin(), img.end(), txt.begin(), 0.0);
        return std::clamp(0.5 * (dot + 1.0), 0.0, 1.0);
    };
}

std::vector<double> inverse_frequency_weights(const RarityStats& stats,
                                              const UnifiedLabelSpace& space) {
    std::vector<double> w(space.hois.size(), 1.0);
    for (size_t k = 0; k < space.hois.size(); ++k) {
        auto it = stats.counts.find(static_cast<int>(k));
        int count = it == stats.counts.end() ? 0 : it->second;
        w[k] = 1.0 / (1.0 + count);
    }
    return w;
}

int sample_hoi(const std::vector<double>& weights, Rng& rng) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (weights.empty() || total <= 0.0)
        throw std::invalid_argument("sample_hoi: no categories to sample");
    double u = rng.uniform() * total;
    double acc = 0.0;
    for (size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(weights.size()) - 1;
}

namespace {

std::pair<SynthSample, int> generate_one(int index, const RarityStats& stats,
                                         const UnifiedLabelSpace& space, uint64_t seed,
                                         const SynthConfig& cfg) {
    if (space.hois.empty())
        throw std::invalid_argument("generate_sample: label space has no interactions");
    Rng rng(derive_seed(seed, static_cast<uint64_t>(index)));
    std::vector<double> weights = inverse_frequency_weights(stats, space);
    int k = sample_hoi(weights, rng);
    HOIPrompt prompt = compose_hoiprompt(space.hois[k], space, rng, cfg.pools);
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        SceneSpec spec = make_scene_spec(space.hois[k], space, rng, cfg.canvas);
        spec.render_seed = derive_seed(seed, static_cast<uint64_t>(index));
        if (auto sample = render_scene(spec, cfg.occlusion_budget)) {
            sample->prompt = prompt;
            return {std::move(*sample), k};
        }
    }
    throw std::runtime_error("generate_sample: placements kept exceeding the occlusion budget");
}

}  // namespace

SynthSample generate_sample(int index, const RarityStats& stats, const UnifiedLabelSpace& space,
                            uint64_t seed, const SynthConfig& cfg) {
    if (index < 0) throw std::invalid_argument("generate_sample: index must be non-negative");
    return generate_one(index, stats, space, seed, cfg).first;
}

SynthDataset generate_dataset(int n, const RarityStats& stats, const UnifiedLabelSpace& space,
                              uint64_t seed, const SynthConfig& cfg) {
    if (n <= 0) throw std::invalid_argument("generate_dataset: n must be positive");
    SynthDataset ds;
    ds.samples.reserve(n);
    ds.hoi_ids.reserve(n);
    for (int i = 0; i < n; ++i) {
        auto [sample, k] = generate_one(i, stats, space, seed, cfg);
        ds.samples.push_back(std::move(sample));
        ds.hoi_ids.push_back(k);
    }
    return ds;
}

namespace {

std::string sample_image_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%06d", index);
    return buf;
}

}  // namespace

void write_generation_manifest(const std::string& path, const GenerationManifest& m) {
    json j;
    j["canvas"] = m.config.canvas;
    j["counts"] = json::object();
    for (const auto& [id, count] : m.counts) j["counts"][std::to_string(id)] = count;
    j["label_space_fingerprint"] = m.label_space_fingerprint;
    j["max_attempts"] = m.config.max_attempts;
    j["n"] = m.n;
    j["occlusion_budget"] = m.config.occlusion_budget;
    j["pools"] = {{"environments", m.config.pools.environments},
                  {"persons", m.config.pools.persons},
                  {"photo_infos", m.config.pools.photo_infos}};
    j["seed"] = m.seed;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_generation_manifest: cannot open " + path);
    out << j.dump(1) << "\n";
}

GenerationManifest read_generation_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_generation_manifest: cannot open " + path);
    json j = json::parse(in);
    GenerationManifest m;
    m.n = j.at("n").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.config.canvas = j.at("canvas").get<int>();
    m.config.max_attempts = j.at("max_attempts").get<int>();
    m.config.occlusion_budget = j.at("occlusion_budget").get<double>();
    m.config.pools.environments = j.at("pools").at("environments").get<std::vector<std::string>>();
    m.config.pools.persons = j.at("pools").at("persons").get<std::vector<std::string>>();
    m.config.pools.photo_infos = j.at("pools").at("photo_infos").get<std::vector<std::string>>();
    for (const auto& [key, value] : j.at("counts").items())
        m.counts[std::stoi(key)] = value.get<int>();
    m.label_space_fingerprint = j.at("label_space_fingerprint").get<uint64_t>();
    return m;
}

void write_dataset(const std::string& dir, const SynthDataset& ds, const RarityStats& stats,
                   const UnifiedLabelSpace& space, uint64_t seed, const SynthConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");

    std::vector<TripletRecord> recs;
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const SynthSample& s = ds.samples[i];
        std::string id = sample_image_id(static_cast<int>(i));
        write_ppm(s.image, (fs::path(dir) / "images" / (id + ".ppm")).string());
        for (const auto& ann : s.annotations)
            recs.push_back({id, ann, true, s.quality_score});
    }
    write_records((fs::path(dir) / "records.txt").string(), recs);

    GenerationManifest m;
    m.n = static_cast<int>(ds.samples.size());
    m.seed = seed;
    m.config = cfg;
    m.counts = stats.counts;
    m.label_space_fingerprint = space.fingerprint();
    write_generation_manifest((fs::path(dir) / "manifest.json").string(), m);
}

}  // namespace hoikit
