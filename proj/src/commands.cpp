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

#include "hoikit/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hoikit/embed.hpp"
#include "hoikit/records.hpp"
#include "hoikit/synth.hpp"

namespace hoikit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Held while a command populates its output directory; a second writer on the
// same directory fails instead of interleaving.
class DirLock {
  public:
    explicit DirLock(const std::string& dir) : path_((fs::path(dir) / ".lock").string()) {
        fs::create_directories(dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST)
                throw std::runtime_error("output directory is locked: " + path_ +
                                         " exists (crashed run? remove it)");
            throw std::runtime_error("cannot create lock " + path_ + ": " + std::strerror(errno));
        }
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    std::string path_;
    int fd_ = -1;
};

void write_text(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << content;
    if (!f) throw std::runtime_error("write to " + path + " failed");
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::unique_ptr<SceneEmbedder> build_provider(const ProviderConfig& p, int fallback_dim) {
    return make_embedder(p.name, p.seed, p.weights, p.dim > 0 ? p.dim : fallback_dim);
}

void check_provider_dim(const SceneEmbedder& emb, const DetectorConfig& model) {
    if (emb.dim() != model.embed_dim)
        throw ConfigError("provider dimension " + std::to_string(emb.dim()) +
                          " does not match the model embed_dim " +
                          std::to_string(model.embed_dim));
}

// The binary checkpoint starts with a magic line and a one-line JSON header;
// the embedding width lives there, needed before an embedder can be built.
int checkpoint_embed_dim(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + path);
    std::string magic, header_line;
    if (!std::getline(f, magic) || !std::getline(f, header_line))
        throw std::runtime_error("checkpoint " + path + " has no readable header");
    try {
        return json::parse(header_line).at("config").at("embed_dim").get<int>();
    } catch (const json::exception&) {
        throw std::runtime_error("checkpoint " + path + " has a malformed header");
    }
}

MPHOIDetector load_checked(const std::string& checkpoint, const SceneEmbedder* emb,
                           const UnifiedLabelSpace& space) {
    uint64_t fp = 0;
    MPHOIDetector det = MPHOIDetector::load_checkpoint(checkpoint, emb, &fp);
    if (fp != space.fingerprint())
        throw std::invalid_argument("checkpoint " + checkpoint +
                                    " was trained against a different label space");
    return det;
}

std::map<int, int> corpus_counts(const Corpus& corpus, const UnifiedLabelSpace& space) {
    std::map<int, int> counts;
    for (const CorpusImage& img : corpus.images)
        for (const TripletAnnotation& a : img.annotations) {
            int id = space.hoi_id(a.verb_class, a.object_class);
            if (id < 0)
                throw std::invalid_argument("corpus annotation on " + img.image_id +
                                            " is outside the label space");
            ++counts[id];
        }
    return counts;
}

int hoi_of(const SynthSample& s, const UnifiedLabelSpace& space) {
    return space.hoi_id(s.prompt.triplet.first, s.prompt.triplet.second);
}

std::string sanitize_label(std::string s) {
    for (char& c : s) {
        if (c == '_') c = ' ';
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return s;
}

Raster upscale(const Raster& src, int k) {
    Raster dst(src.width * k, src.height * k);
    for (int y = 0; y < dst.height; ++y)
        for (int x = 0; x < dst.width; ++x) dst.set(x, y, src.get(x / k, y / k));
    return dst;
}

void draw_box(Raster& img, const Box& b, Rgb color, int thickness) {
    auto [x1, y1, x2, y2] = b.corners();
    draw_rect_outline(img, static_cast<int>(std::lround(x1 * img.width)),
                      static_cast<int>(std::lround(y1 * img.height)),
                      static_cast<int>(std::lround(x2 * img.width)) - 1,
                      static_cast<int>(std::lround(y2 * img.height)) - 1, color, thickness);
}

Raster render_overlay(const Raster& image, const std::vector<ScoredTriplet>& dets,
                      const UnifiedLabelSpace& space) {
    constexpr int kScale = 4;
    Raster canvas = upscale(image, kScale);
    for (size_t i = dets.size(); i-- > 0;) {
        int thickness = i == 0 ? 2 : 1;
        draw_box(canvas, dets[i].human, {40, 80, 170}, thickness);
        draw_box(canvas, dets[i].object, {200, 60, 50}, thickness);
    }
    if (!dets.empty()) {
        const ScoredTriplet& top = dets.front();
        std::string label = sanitize_label(space.actions.at(top.verb_class)) + " " +
                            sanitize_label(space.objects.at(top.object_class)) + " " +
                            fmt("%.2f", top.score);
        draw_text(canvas, 2, 2, label, {0, 0, 0});
    }
    return canvas;
}

struct ToggleGroup {
    std::string name;
    std::vector<AblationRow> rows;
};

std::string ablation_table_text(const std::vector<ToggleGroup>& groups) {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof(line), "%-20s %5s %9s %9s %9s\n", "setting", "seeds", "full",
                  "rare", "nonrare");
    os << line;
    for (const ToggleGroup& g : groups) {
        double full = 0, rare = 0, nonrare = 0;
        for (const AblationRow& r : g.rows) {
            full += r.report.map_full;
            rare += r.report.map_rare;
            nonrare += r.report.map_nonrare;
        }
        double n = static_cast<double>(g.rows.size());
        std::snprintf(line, sizeof(line), "%-20s %5zu %9.4f %9.4f %9.4f\n", g.name.c_str(),
                      g.rows.size(), full / n, rare / n, nonrare / n);
        os << line;
    }
    return os.str();
}

// --- SVG helpers ------------------------------------------------------------

constexpr int kSvgW = 720, kSvgH = 420;
constexpr int kMarginL = 64, kMarginR = 160, kMarginT = 20, kMarginB = 48;

std::string svg_open() {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgW << "\" height=\"" << kSvgH
       << "\" viewBox=\"0 0 " << kSvgW << " " << kSvgH << "\">\n"
       << "<rect width=\"" << kSvgW << "\" height=\"" << kSvgH << "\" fill=\"white\"/>\n";
    return os.str();
}

std::string svg_text(double x, double y, const std::string& s, const std::string& extra = "") {
    std::ostringstream os;
    os << "<text x=\"" << fmt("%.1f", x) << "\" y=\"" << fmt("%.1f", y)
       << "\" font-family=\"monospace\" font-size=\"12\"" << (extra.empty() ? "" : " ") << extra
       << ">" << s << "</text>\n";
    return os.str();
}

std::string svg_line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     const std::string& extra = "") {
    std::ostringstream os;
    os << "<line x1=\"" << fmt("%.1f", x1) << "\" y1=\"" << fmt("%.1f", y1) << "\" x2=\""
       << fmt("%.1f", x2) << "\" y2=\"" << fmt("%.1f", y2) << "\" stroke=\"" << stroke << "\""
       << (extra.empty() ? "" : " ") << extra << "/>\n";
    return os.str();
}

void svg_axes(std::ostringstream& os, double ymax, int n_x, const std::string& x_label,
              const std::string& y_label) {
    double x0 = kMarginL, x1 = kSvgW - kMarginR;
    double y0 = kSvgH - kMarginB, y1 = kMarginT;
    os << svg_line(x0, y0, x1, y0, "black");
    os << svg_line(x0, y0, x0, y1, "black");
    for (int i = 0; i <= 4; ++i) {
        double v = ymax * i / 4.0;
        double y = y0 - (y0 - y1) * i / 4.0;
        os << svg_line(x0 - 4, y, x0, y, "black");
        os << svg_text(4, y + 4, fmt("%.3g", v));
    }
    for (int i = 0; i <= 4; ++i) {
        int v = n_x <= 1 ? 0 : static_cast<int>(std::lround((n_x - 1) * i / 4.0));
        double x = n_x <= 1 ? x0 : x0 + (x1 - x0) * i / 4.0;
        os << svg_line(x, y0, x, y0 + 4, "black");
        os << svg_text(x - 8, y0 + 18, std::to_string(v));
    }
    os << svg_text(0.5 * (x0 + x1) - 4.0 * x_label.size(), kSvgH - 8, x_label);
    os << svg_text(4, 14, y_label);
}

}  // namespace

// --- Path resolution ---------------------------------------------------------

std::string resolve_path(const std::string& root, const std::string& path) {
    if (path.empty() || root.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(root) / p).string();
}

void resolve_config_paths(MergeCommandConfig& c, const std::string& root) {
    for (std::string& m : c.manifests) m = resolve_path(root, m);
    c.out_dir = resolve_path(root, c.out_dir);
}

void resolve_config_paths(SynthCommandConfig& c, const std::string& root) {
    c.label_space = resolve_path(root, c.label_space);
    c.out_dir = resolve_path(root, c.out_dir);
    c.rarity.annotations = resolve_path(root, c.rarity.annotations);
    c.filter.provider.weights = resolve_path(root, c.filter.provider.weights);
}

void resolve_config_paths(TrainCommandConfig& c, const std::string& root) {
    c.label_space = resolve_path(root, c.label_space);
    c.train_dir = resolve_path(root, c.train_dir);
    c.eval_dir = resolve_path(root, c.eval_dir);
    c.out_dir = resolve_path(root, c.out_dir);
    c.rarity.annotations = resolve_path(root, c.rarity.annotations);
    c.provider.weights = resolve_path(root, c.provider.weights);
}

void resolve_config_paths(EvalCommandConfig& c, const std::string& root) {
    c.label_space = resolve_path(root, c.label_space);
    c.checkpoint = resolve_path(root, c.checkpoint);
    c.corpus_dir = resolve_path(root, c.corpus_dir);
    c.out = resolve_path(root, c.out);
    c.rarity.annotations = resolve_path(root, c.rarity.annotations);
    c.provider.weights = resolve_path(root, c.provider.weights);
}

void resolve_config_paths(PredictCommandConfig& c, const std::string& root) {
    c.label_space = resolve_path(root, c.label_space);
    c.checkpoint = resolve_path(root, c.checkpoint);
    c.provider.weights = resolve_path(root, c.provider.weights);
    for (std::string& p : c.images) p = resolve_path(root, p);
    c.out_dir = resolve_path(root, c.out_dir);
    c.visual.image = resolve_path(root, c.visual.image);
}

void resolve_config_paths(AblateCommandConfig& c, const std::string& root) {
    resolve_config_paths(c.base, root);
    c.out_dir = resolve_path(root, c.out_dir);
}

void resolve_config_paths(PlotCommandConfig& c, const std::string& root) {
    c.input = resolve_path(root, c.input);
    c.label_space = resolve_path(root, c.label_space);
    c.out = resolve_path(root, c.out);
}

// --- Rarity ------------------------------------------------------------------

RarityStats resolve_rarity(const RarityConfig& cfg, const UnifiedLabelSpace& space,
                           const Corpus* fallback) {
    if (!cfg.counts.empty()) return rarity_split_from_counts(cfg.counts, cfg.rare_threshold);
    if (!cfg.annotations.empty())
        return rarity_split(load_unified_annotations(cfg.annotations), space, cfg.rare_threshold);
    if (fallback) return rarity_split_from_counts(corpus_counts(*fallback, space),
                                                  cfg.rare_threshold);
    return rarity_split_from_counts({}, cfg.rare_threshold);
}

// --- merge -------------------------------------------------------------------

void cmd_merge(const MergeCommandConfig& cfg, std::ostream& out, std::ostream&) {
    std::vector<DatasetManifest> manifests;
    for (const std::string& path : cfg.manifests) manifests.push_back(load_manifest(path));
    MergeResult merged = merge_datasets(manifests);

    DirLock lock(cfg.out_dir);
    fs::path dir(cfg.out_dir);
    save_label_space(merged.space, (dir / "label_space.json").string());
    save_unified_annotations(merged.annotations, (dir / "annotations.jsonl").string());

    json report;
    report["datasets"] = json::array();
    for (const DatasetManifest& m : manifests) report["datasets"].push_back(m.name);
    report["objects"] = merged.space.objects.size();
    report["actions"] = merged.space.actions.size();
    report["hois"] = merged.space.hois.size();
    report["annotations"] = merged.annotations.size();
    report["leakage_hois"] = merged.leakage_hois;
    report["label_space_fingerprint"] = merged.space.fingerprint();
    write_text((dir / "report.json").string(), report.dump(1) + "\n");

    out << "merged " << manifests.size() << " datasets: " << merged.space.objects.size()
        << " objects, " << merged.space.actions.size() << " actions, "
        << merged.space.hois.size() << " hois, " << merged.annotations.size() << " annotations, "
        << merged.leakage_hois.size() << " leaked hois\n"
        << "wrote " << cfg.out_dir << "/{label_space.json, annotations.jsonl, report.json}\n";
}

// --- synth -------------------------------------------------------------------

void cmd_synth(const SynthCommandConfig& cfg, std::ostream& out, std::ostream& err) {
    UnifiedLabelSpace space = load_label_space(cfg.label_space);
    RarityStats stats = resolve_rarity(cfg.rarity, space);
    std::unique_ptr<SceneEmbedder> emb;
    if (cfg.filter.enabled) emb = build_provider(cfg.filter.provider, 32);

    DirLock lock(cfg.out_dir);
    SynthDataset ds = generate_dataset(cfg.n, stats, space, cfg.seed, cfg.synth);
    double mean_kept_score = 0.0;
    if (cfg.filter.enabled) {
        FilterResult fr =
            filter_samples(ds.samples, make_consistency_scorer(*emb), cfg.filter.threshold);
        mean_kept_score = fr.mean_kept_score;
        if (fr.kept.empty())
            err << "warning: consistency filter (threshold " << cfg.filter.threshold
                << ") kept 0 of " << ds.samples.size() << " samples\n";
        SynthDataset filtered;
        filtered.samples = std::move(fr.kept);
        for (const SynthSample& s : filtered.samples) filtered.hoi_ids.push_back(hoi_of(s, space));
        ds = std::move(filtered);
    }

    write_dataset(cfg.out_dir, ds, stats, space, cfg.seed, cfg.synth);

    std::map<int, int> counts_after = stats.counts;
    for (int id : ds.hoi_ids) ++counts_after[id];
    RarityStats after = rarity_split_from_counts(counts_after, cfg.rarity.rare_threshold);

    json report;
    report["n_requested"] = cfg.n;
    report["n_written"] = ds.samples.size();
    report["filtered"] = cfg.filter.enabled;
    if (cfg.filter.enabled) report["mean_kept_score"] = mean_kept_score;
    report["tail_fraction_before"] = stats.tail_fraction;
    report["tail_fraction_after"] = after.tail_fraction;
    write_text((fs::path(cfg.out_dir) / "report.json").string(), report.dump(1) + "\n");

    out << "generated " << ds.samples.size() << " of " << cfg.n << " samples into " << cfg.out_dir
        << "\n"
        << "tail fraction " << fmt("%.4f", stats.tail_fraction) << " -> "
        << fmt("%.4f", after.tail_fraction) << "\n";
}

// --- train -------------------------------------------------------------------

void cmd_train(const TrainCommandConfig& cfg, std::ostream& out, std::ostream&) {
    UnifiedLabelSpace space = load_label_space(cfg.label_space);
    std::unique_ptr<SceneEmbedder> emb = build_provider(cfg.provider, cfg.model.embed_dim);
    check_provider_dim(*emb, cfg.model);

    Corpus train_corpus = load_corpus(cfg.train_dir);
    Corpus eval_corpus;
    if (!cfg.eval_dir.empty()) eval_corpus = load_corpus(cfg.eval_dir);
    RarityStats rarity = resolve_rarity(cfg.rarity, space, &train_corpus);

    DirLock lock(cfg.out_dir);
    MPHOIDetector det(cfg.model, emb.get());
    TrainLog log = train_detector(det, train_corpus, eval_corpus, space, rarity, cfg.train);

    fs::path dir(cfg.out_dir);
    std::string ckpt = (dir / "checkpoint.bin").string();
    std::string metrics = (dir / "metrics.jsonl").string();
    det.save_checkpoint(ckpt, space.fingerprint());
    save_train_log(log, metrics);

    out << "trained " << log.steps.size() << " steps on " << train_corpus.images.size()
        << " images\n";
    if (!log.evals.empty()) {
        const EvalReport& r = log.evals.back().report;
        out << "final eval: full=" << fmt("%.4f", r.map_full) << " rare="
            << fmt("%.4f", r.map_rare) << " nonrare=" << fmt("%.4f", r.map_nonrare) << "\n";
    }
    out << "wrote " << ckpt << " and " << metrics << "\n";
}

// --- eval --------------------------------------------------------------------

void cmd_eval(const EvalCommandConfig& cfg, std::ostream& out, std::ostream&) {
    UnifiedLabelSpace space = load_label_space(cfg.label_space);
    std::unique_ptr<SceneEmbedder> emb =
        build_provider(cfg.provider, checkpoint_embed_dim(cfg.checkpoint));
    MPHOIDetector det = load_checked(cfg.checkpoint, emb.get(), space);

    Corpus corpus = load_corpus(cfg.corpus_dir);
    RarityStats rarity = resolve_rarity(cfg.rarity, space, &corpus);
    EvalReport report = evaluate_detector(det, corpus, space, rarity, cfg.top_k, cfg.iou);

    json j;
    j["corpus"] = cfg.corpus_dir;
    j["images"] = corpus.images.size();
    j["iou_threshold"] = cfg.iou;
    j["top_k"] = cfg.top_k;
    j["map_full"] = report.map_full;
    j["map_rare"] = report.map_rare;
    j["map_nonrare"] = report.map_nonrare;
    json ap = json::array();
    for (const auto& [id, v] : report.per_category_ap) ap.push_back(json::array({id, v}));
    j["per_category_ap"] = ap;
    write_text(cfg.out, j.dump(1) + "\n");

    out << "eval on " << corpus.images.size() << " images: full=" << fmt("%.4f", report.map_full)
        << " rare=" << fmt("%.4f", report.map_rare)
        << " nonrare=" << fmt("%.4f", report.map_nonrare) << "\n"
        << "wrote " << cfg.out << "\n";
}

// --- predict -----------------------------------------------------------------

void cmd_predict(const PredictCommandConfig& cfg, std::ostream& out, std::ostream&) {
    UnifiedLabelSpace space = load_label_space(cfg.label_space);
    std::unique_ptr<SceneEmbedder> emb =
        build_provider(cfg.provider, checkpoint_embed_dim(cfg.checkpoint));
    MPHOIDetector det = load_checked(cfg.checkpoint, emb.get(), space);

    PromptBank object_bank, interaction_bank;
    if (cfg.mode == "textual") {
        std::vector<int> object_ids = cfg.textual.objects;
        if (cfg.textual.all_objects) {
            object_ids.resize(space.objects.size());
            std::iota(object_ids.begin(), object_ids.end(), 0);
        }
        std::vector<int> hoi_ids = cfg.textual.interactions;
        if (cfg.textual.all_interactions) {
            hoi_ids.resize(space.hois.size());
            std::iota(hoi_ids.begin(), hoi_ids.end(), 0);
        }
        if (object_ids.empty() || hoi_ids.empty())
            throw std::invalid_argument("textual prompts need at least one object and one "
                                        "interaction category");
        object_bank = encode_textual_object_bank(space, object_ids, *emb);
        interaction_bank = encode_textual_interaction_bank(space, hoi_ids, *emb);
    } else {
        if (cfg.visual.objects.empty() || cfg.visual.interactions.empty())
            throw std::invalid_argument("visual prompts need at least one object exemplar and "
                                        "one interaction exemplar");
        VisualPromptSpec spec{read_ppm(cfg.visual.image), cfg.visual.objects,
                              cfg.visual.interactions};
        object_bank = encode_visual_object_bank(spec, space, *emb);
        interaction_bank = encode_visual_interaction_bank(spec, space, *emb);
    }

    DirLock lock(cfg.out_dir);
    fs::path dir(cfg.out_dir);
    std::ofstream dets_file((dir / "detections.jsonl").string(), std::ios::binary);
    if (!dets_file) throw std::runtime_error("cannot open detections.jsonl for writing");

    for (size_t i = 0; i < cfg.images.size(); ++i) {
        Raster image = read_ppm(cfg.images[i]);
        std::vector<ScoredTriplet> dets =
            det.predict(image, object_bank, interaction_bank, space, cfg.top_k);
        for (size_t r = 0; r < dets.size(); ++r) {
            const ScoredTriplet& d = dets[r];
            json line;
            line["image"] = cfg.images[i];
            line["rank"] = r;
            line["human"] = {d.human.cx, d.human.cy, d.human.w, d.human.h};
            line["object"] = {d.object.cx, d.object.cy, d.object.w, d.object.h};
            line["object_class"] = d.object_class;
            line["object_term"] = space.objects.at(d.object_class);
            line["verb_class"] = d.verb_class;
            line["verb_term"] = space.actions.at(d.verb_class);
            line["score"] = d.score;
            dets_file << line.dump() << "\n";
        }
        char name[64];
        std::snprintf(name, sizeof(name), "overlay_%03zu_%s.ppm", i,
                      fs::path(cfg.images[i]).stem().string().c_str());
        write_ppm(render_overlay(image, dets, space), (dir / name).string());
    }
    if (!dets_file) throw std::runtime_error("write to detections.jsonl failed");

    out << "predicted " << cfg.images.size() << " images (" << cfg.mode << " prompts, bank "
        << object_bank.size() << "+" << interaction_bank.size() << ") into " << cfg.out_dir
        << "\n";
}

// --- ablate ------------------------------------------------------------------

AblationVariant apply_ablation_toggle(const TrainCommandConfig& base, const std::string& toggle) {
    AblationVariant v{base, 1.0};
    if (toggle == "base") return v;
    if (toggle == "fsd_off") v.cfg.model.use_fsd = false;
    else if (toggle == "fclip_off") v.cfg.model.use_fclip = false;
    else if (toggle == "alpha_off") v.cfg.model.use_alpha = false;
    else if (toggle == "beta_off") v.cfg.model.use_beta = false;
    else if (toggle == "t0") v.cfg.model.t_step = 0;
    else if (toggle == "t100") v.cfg.model.t_step = 100;
    else if (toggle == "t500") v.cfg.model.t_step = 500;
    else if (toggle == "text_only") v.cfg.train.visual_prob = 0.0;
    else if (toggle == "obj_contrast_off") v.cfg.train.weights.obj = 0.0;
    else if (toggle == "inter_contrast_off") v.cfg.train.weights.inter = 0.0;
    else if (toggle == "data_half") v.data_fraction = 0.5;
    else throw ConfigError("ablate: unknown toggle '" + toggle + "'");
    return v;
}

void cmd_ablate(const AblateCommandConfig& cfg, std::ostream& out, std::ostream&) {
    for (const std::string& toggle : cfg.toggles) apply_ablation_toggle(cfg.base, toggle);
    if (cfg.base.eval_dir.empty())
        throw ConfigError("ablate: base.eval_dir is required (rows are scored on it)");

    UnifiedLabelSpace space = load_label_space(cfg.base.label_space);
    std::unique_ptr<SceneEmbedder> emb =
        build_provider(cfg.base.provider, cfg.base.model.embed_dim);
    check_provider_dim(*emb, cfg.base.model);
    Corpus train_corpus = load_corpus(cfg.base.train_dir);
    Corpus eval_corpus = load_corpus(cfg.base.eval_dir);
    RarityStats rarity = resolve_rarity(cfg.base.rarity, space, &train_corpus);

    std::vector<std::string> settings{"base"};
    settings.insert(settings.end(), cfg.toggles.begin(), cfg.toggles.end());

    DirLock lock(cfg.out_dir);
    std::ofstream table((fs::path(cfg.out_dir) / "table.jsonl").string(), std::ios::binary);
    if (!table) throw std::runtime_error("cannot open table.jsonl for writing");

    std::vector<ToggleGroup> groups;
    for (const std::string& setting : settings) {
        ToggleGroup group{setting, {}};
        for (uint64_t seed : cfg.seeds) {
            AblationVariant v = apply_ablation_toggle(cfg.base, setting);
            v.cfg.model.seed = seed;
            v.cfg.train.seed = seed;

            Corpus slice;
            size_t keep = std::max<size_t>(
                1, static_cast<size_t>(train_corpus.images.size() * v.data_fraction));
            slice.images.assign(train_corpus.images.begin(), train_corpus.images.begin() + keep);

            MPHOIDetector det(v.cfg.model, emb.get());
            train_detector(det, slice, Corpus{}, space, rarity, v.cfg.train);
            EvalReport report = evaluate_detector(det, eval_corpus, space, rarity,
                                                  v.cfg.train.eval_top_k, v.cfg.train.eval_iou);

            json row;
            row["toggle"] = setting;
            row["seed"] = seed;
            row["map_full"] = report.map_full;
            row["map_rare"] = report.map_rare;
            row["map_nonrare"] = report.map_nonrare;
            table << row.dump() << "\n";
            out << setting << " seed " << seed << ": full=" << fmt("%.4f", report.map_full)
                << " rare=" << fmt("%.4f", report.map_rare)
                << " nonrare=" << fmt("%.4f", report.map_nonrare) << "\n";
            group.rows.push_back({setting, seed, report});
        }
        groups.push_back(std::move(group));
    }
    if (!table) throw std::runtime_error("write to table.jsonl failed");
    table.close();

    write_text((fs::path(cfg.out_dir) / "table.txt").string(), ablation_table_text(groups));
    out << "wrote " << cfg.out_dir << "/{table.jsonl, table.txt}\n";
}

// --- plot --------------------------------------------------------------------

void write_loss_curve_svg(const TrainLog& log, const std::string& path) {
    if (log.steps.empty()) throw std::invalid_argument("training log has no step records");
    struct Series {
        const char* label;
        const char* color;
        double (*get)(const LossBreakdown&);
    };
    static const Series series[] = {
        {"total", "#000000", [](const LossBreakdown& l) { return l.total; }},
        {"box", "#1f77b4", [](const LossBreakdown& l) { return l.l_b; }},
        {"giou", "#2ca02c", [](const LossBreakdown& l) { return l.l_g; }},
        {"obj contrast", "#ff7f0e", [](const LossBreakdown& l) { return l.l_c_o; }},
        {"inter contrast", "#9467bd", [](const LossBreakdown& l) { return l.l_c_i; }},
    };

    double ymax = 0.0;
    for (const StepRecord& s : log.steps)
        for (const Series& sr : series) ymax = std::max(ymax, sr.get(s.loss));
    if (ymax <= 0.0) ymax = 1.0;
    ymax *= 1.05;

    size_t n = log.steps.size();
    double x0 = kMarginL, x1 = kSvgW - kMarginR;
    double y0 = kSvgH - kMarginB, y1 = kMarginT;

    std::ostringstream os;
    os << svg_open();
    svg_axes(os, ymax, static_cast<int>(n), "step", "loss");
    for (size_t si = 0; si < std::size(series); ++si) {
        const Series& sr = series[si];
        os << "<polyline fill=\"none\" stroke=\"" << sr.color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < n; ++i) {
            double x = n == 1 ? x0 : x0 + (x1 - x0) * i / (n - 1);
            double y = y0 - (y0 - y1) * std::clamp(sr.get(log.steps[i].loss) / ymax, 0.0, 1.0);
            os << fmt("%.2f", x) << "," << fmt("%.2f", y) << " ";
        }
        os << "\"/>\n";
        double ly = kMarginT + 16.0 * si + 8.0;
        os << svg_line(x1 + 10, ly - 4, x1 + 30, ly - 4, sr.color, "stroke-width=\"2\"");
        os << svg_text(x1 + 36, ly, sr.label);
    }
    os << "</svg>\n";
    write_text(path, os.str());
}

void write_rarity_histogram_svg(const RarityStats& stats, const UnifiedLabelSpace& space,
                                const std::string& path) {
    if (stats.counts.empty()) throw std::invalid_argument("rarity stats have no categories");
    std::vector<std::pair<int, int>> bars(stats.counts.begin(), stats.counts.end());
    std::sort(bars.begin(), bars.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    int cmax = bars.front().second;

    double x0 = kMarginL, x1 = kSvgW - 24;
    double y0 = kSvgH - kMarginB, y1 = kMarginT + 20;
    double bw = (x1 - x0) / static_cast<double>(bars.size());

    std::ostringstream os;
    os << svg_open();
    os << svg_line(x0, y0, x1, y0, "black");
    os << svg_line(x0, y0, x0, y1, "black");
    for (int i = 0; i <= 4; ++i) {
        double v = cmax * i / 4.0;
        double y = y0 - (y0 - y1) * i / 4.0;
        os << svg_line(x0 - 4, y, x0, y, "black");
        os << svg_text(4, y + 4, fmt("%.3g", v));
    }
    for (size_t i = 0; i < bars.size(); ++i) {
        bool rare = stats.rare_set.count(bars[i].first) > 0;
        double h = (y0 - y1) * bars[i].second / cmax;
        os << "<rect x=\"" << fmt("%.2f", x0 + bw * i) << "\" y=\"" << fmt("%.2f", y0 - h)
           << "\" width=\"" << fmt("%.2f", std::max(bw - 1.0, 1.0)) << "\" height=\""
           << fmt("%.2f", h) << "\" fill=\"" << (rare ? "#d62728" : "#1f77b4") << "\"/>\n";
    }
    size_t total = stats.counts.size();
    os << svg_text(x0, kMarginT + 8,
                   "hoi instance counts: " + std::to_string(total) + " categories, tail fraction " +
                       fmt("%.3f", stats.tail_fraction) + " (" +
                       std::to_string(stats.rare_set.size()) + " rare of " +
                       std::to_string(total) + ", " + std::to_string(space.hois.size()) +
                       " in the space)");
    os << svg_text(0.5 * (x0 + x1) - 60, kSvgH - 8, "categories sorted by count");
    os << "</svg>\n";
    write_text(path, os.str());
}

void cmd_plot(const PlotCommandConfig& cfg, std::ostream& out, std::ostream&) {
    if (cfg.kind == "loss") {
        write_loss_curve_svg(load_train_log(cfg.input), cfg.out);
    } else {
        UnifiedLabelSpace space = load_label_space(cfg.label_space);
        std::vector<UnifiedAnnotation> anns = load_unified_annotations(cfg.input);
        if (anns.empty()) throw std::invalid_argument("no annotations in " + cfg.input);
        write_rarity_histogram_svg(rarity_split(anns, space, cfg.rare_threshold), space, cfg.out);
    }
    out << "wrote " << cfg.out << "\n";
}

}  // namespace hoikit
