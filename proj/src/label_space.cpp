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

#include "hoikit/label_space.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hoikit/checksum.hpp"
#include "hoikit/records.hpp"

namespace hoikit {

using nlohmann::json;

int UnifiedLabelSpace::object_id(const std::string& term) const {
    auto it = std::lower_bound(objects.begin(), objects.end(), term);
    if (it == objects.end() || *it != term) return -1;
    return static_cast<int>(it - objects.begin());
}

int UnifiedLabelSpace::action_id(const std::string& term) const {
    auto it = std::lower_bound(actions.begin(), actions.end(), term);
    if (it == actions.end() || *it != term) return -1;
    return static_cast<int>(it - actions.begin());
}

int UnifiedLabelSpace::hoi_id(int action, int object) const {
    std::pair<int, int> key{action, object};
    auto it = std::lower_bound(hois.begin(), hois.end(), key);
    if (it == hois.end() || *it != key) return -1;
    return static_cast<int>(it - hois.begin());
}

uint64_t UnifiedLabelSpace::fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : objects) h = fnv1a64(t + "\x1f", h);
    h = fnv1a64("|", h);
    for (const auto& t : actions) h = fnv1a64(t + "\x1f", h);
    h = fnv1a64("|", h);
    for (const auto& [a, o] : hois)
        h = fnv1a64(std::to_string(a) + "," + std::to_string(o) + ";", h);
    return h;
}

namespace {

// Union-find over term indices.
struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Collapses one vocabulary (the union of source terms) under synonym hints.
// Returns canonical terms (sorted) and a source-term → canonical-term map.
struct CollapsedVocab {
    std::vector<std::string> canonical;              // sorted
    std::map<std::string, std::string> to_canonical; // every source term
    std::map<std::string, std::set<std::string>> classes;  // canonical → members
};

CollapsedVocab collapse_vocab(const std::set<std::string>& terms,
                              const std::vector<std::pair<std::string, std::string>>& hints,
                              const std::string& vocab_name) {
    std::vector<std::string> list(terms.begin(), terms.end());
    std::map<std::string, int> index;
    for (int i = 0; i < static_cast<int>(list.size()); ++i) index[list[i]] = i;

    // A term may be hinted to one canonical only.
    std::map<std::string, std::string> hinted_to;
    DisjointSets ds(static_cast<int>(list.size()));
    std::set<std::string> named_canonicals;
    for (const auto& [src, canon] : hints) {
        auto is = index.find(src), ic = index.find(canon);
        if (is == index.end() || ic == index.end()) {
            throw std::runtime_error("synonym hint references unknown " + vocab_name + " term: '" +
                                     src + "' -> '" + canon + "'");
        }
        auto prev = hinted_to.find(src);
        if (prev != hinted_to.end() && prev->second != canon) {
            throw std::runtime_error("conflicting synonym hints: '" + src + "' mapped to both '" +
                                     prev->second + "' and '" + canon + "'");
        }
        hinted_to[src] = canon;
        named_canonicals.insert(canon);
        ds.unite(is->second, ic->second);
    }

    // Each class may contain at most one hinted canonical (chains like
    // a→b, b→c leave the class's canonical ambiguous).
    std::map<int, std::set<std::string>> class_canonicals;
    for (const auto& c : named_canonicals) class_canonicals[ds.find(index[c])].insert(c);
    for (const auto& [root, canons] : class_canonicals) {
        if (canons.size() > 1) {
            std::string msg = "conflicting synonym hints: one class names canonicals {";
            for (const auto& c : canons) msg += " '" + c + "'";
            throw std::runtime_error(msg + " }");
        }
    }

    std::map<int, std::set<std::string>> members;
    for (int i = 0; i < static_cast<int>(list.size()); ++i) members[ds.find(i)].insert(list[i]);

    CollapsedVocab out;
    for (const auto& [root, mset] : members) {
        auto cit = class_canonicals.find(root);
        std::string canon = cit != class_canonicals.end() ? *cit->second.begin() : *mset.begin();
        out.classes[canon] = mset;
        for (const auto& m : mset) out.to_canonical[m] = canon;
    }
    for (const auto& [canon, mset] : out.classes) out.canonical.push_back(canon);
    std::sort(out.canonical.begin(), out.canonical.end());
    return out;
}

}  // namespace

MergeResult merge_datasets(const std::vector<DatasetManifest>& manifests) {
    if (manifests.empty()) throw std::runtime_error("merge_datasets: no manifests");

    std::set<std::string> names;
    for (const auto& m : manifests) {
        if (m.name.empty() || !names.insert(m.name).second) {
            throw std::runtime_error("merge_datasets: manifest names must be unique and non-empty");
        }
    }

    std::set<std::string> object_terms, action_terms;
    for (const auto& m : manifests) {
        for (const auto& t : m.object_vocab) object_terms.insert(t);
        for (const auto& t : m.action_vocab) action_terms.insert(t);
        for (const auto& a : m.annotations) {
            if (a.ann.object_class < 0 || a.ann.object_class >= static_cast<int>(m.object_vocab.size()) ||
                a.ann.verb_class < 0 || a.ann.verb_class >= static_cast<int>(m.action_vocab.size())) {
                throw std::runtime_error("manifest '" + m.name + "': annotation in image '" +
                                         a.image_id + "' has out-of-range local ids");
            }
        }
    }

    // Route hints to whichever vocabulary holds both terms (possibly both).
    std::vector<std::pair<std::string, std::string>> obj_hints, act_hints;
    for (const auto& m : manifests) {
        for (const auto& h : m.synonym_hints) {
            bool in_obj = object_terms.count(h.first) && object_terms.count(h.second);
            bool in_act = action_terms.count(h.first) && action_terms.count(h.second);
            if (!in_obj && !in_act) {
                throw std::runtime_error("synonym hint ('" + h.first + "', '" + h.second +
                                         "') matches no vocabulary in manifest '" + m.name + "'");
            }
            if (in_obj) obj_hints.push_back(h);
            if (in_act) act_hints.push_back(h);
        }
    }

    CollapsedVocab obj = collapse_vocab(object_terms, obj_hints, "object");
    CollapsedVocab act = collapse_vocab(action_terms, act_hints, "action");

    MergeResult out;
    out.space.objects = obj.canonical;
    out.space.actions = act.canonical;
    out.space.synonyms = obj.classes;
    for (const auto& [k, v] : act.classes) {
        auto [it, fresh] = out.space.synonyms.emplace(k, v);
        if (!fresh) it->second.insert(v.begin(), v.end());
    }

    auto canon_object_id = [&](const std::string& term) {
        return out.space.object_id(obj.to_canonical.at(term));
    };
    auto canon_action_id = [&](const std::string& term) {
        return out.space.action_id(act.to_canonical.at(term));
    };

    for (const auto& m : manifests) {
        for (int i = 0; i < static_cast<int>(m.object_vocab.size()); ++i)
            out.space.object_provenance[canon_object_id(m.object_vocab[i])].insert({m.name, i});
        for (int i = 0; i < static_cast<int>(m.action_vocab.size()); ++i)
            out.space.action_provenance[canon_action_id(m.action_vocab[i])].insert({m.name, i});
    }

    std::set<std::pair<int, int>> hoi_pairs;
    for (const auto& m : manifests) {
        for (const auto& a : m.annotations) {
            UnifiedAnnotation u;
            u.dataset = m.name;
            u.image_id = a.image_id;
            u.ann = a.ann;
            u.source_object_id = a.ann.object_class;
            u.source_verb_id = a.ann.verb_class;
            u.ann.object_class = canon_object_id(m.object_vocab[a.ann.object_class]);
            u.ann.verb_class = canon_action_id(m.action_vocab[a.ann.verb_class]);
            hoi_pairs.insert({u.ann.verb_class, u.ann.object_class});
            out.annotations.push_back(std::move(u));
        }
    }
    out.space.hois.assign(hoi_pairs.begin(), hoi_pairs.end());

    // Annotations sorted by (dataset, image, source order preserved) — the
    // loop above already visits manifests in the given order; sort by name so
    // manifest order doesn't leak into the output.
    std::stable_sort(out.annotations.begin(), out.annotations.end(),
                     [](const UnifiedAnnotation& x, const UnifiedAnnotation& y) {
                         return x.dataset < y.dataset;
                     });

    std::set<int> leakage;
    for (const auto& m : manifests) {
        std::set<std::string> held(m.heldout_image_ids.begin(), m.heldout_image_ids.end());
        if (held.empty()) continue;
        for (const auto& a : m.annotations) {
            if (!held.count(a.image_id)) continue;
            int oid = canon_object_id(m.object_vocab[a.ann.object_class]);
            int aid = canon_action_id(m.action_vocab[a.ann.verb_class]);
            leakage.insert(out.space.hoi_id(aid, oid));
        }
    }
    out.leakage_hois.assign(leakage.begin(), leakage.end());
    return out;
}

RarityStats rarity_split_from_counts(const std::map<int, int>& counts, int threshold) {
    RarityStats s;
    int populated = 0;
    for (const auto& [id, c] : counts) {
        if (c <= 0) continue;
        s.counts[id] = c;
        ++populated;
        if (c < threshold)
            s.rare_set.insert(id);
        else
            s.nonrare_set.insert(id);
    }
    s.tail_fraction = populated > 0 ? static_cast<double>(s.rare_set.size()) / populated : 0.0;
    return s;
}

RarityStats rarity_split(const std::vector<UnifiedAnnotation>& annotations,
                         const UnifiedLabelSpace& space, int threshold) {
    std::map<int, int> counts;
    for (const auto& a : annotations) {
        int id = space.hoi_id(a.ann.verb_class, a.ann.object_class);
        if (id < 0) {
            throw std::runtime_error("rarity_split: annotation references pair (" +
                                     std::to_string(a.ann.verb_class) + "," +
                                     std::to_string(a.ann.object_class) + ") outside the label space");
        }
        ++counts[id];
    }
    return rarity_split_from_counts(counts, threshold);
}

// ---------------------------------------------------------------------------
// Serialization. nlohmann::json keeps object keys sorted, and we always dump
// with indent 1, so writes are byte-stable.

namespace {

json space_to_json_obj(const UnifiedLabelSpace& s) {
    json j;
    j["objects"] = s.objects;
    j["actions"] = s.actions;
    j["hois"] = json::array();
    for (const auto& [a, o] : s.hois) j["hois"].push_back(json::array({a, o}));
    j["synonyms"] = json::object();
    for (const auto& [canon, members] : s.synonyms)
        j["synonyms"][canon] = std::vector<std::string>(members.begin(), members.end());
    auto prov = [](const std::map<int, std::set<std::pair<std::string, int>>>& p) {
        json out = json::object();
        for (const auto& [id, entries] : p) {
            json arr = json::array();
            for (const auto& [ds, local] : entries) arr.push_back(json::array({ds, local}));
            out[std::to_string(id)] = arr;
        }
        return out;
    };
    j["object_provenance"] = prov(s.object_provenance);
    j["action_provenance"] = prov(s.action_provenance);
    return j;
}

UnifiedLabelSpace space_from_json_obj(const json& j) {
    UnifiedLabelSpace s;
    s.objects = j.at("objects").get<std::vector<std::string>>();
    s.actions = j.at("actions").get<std::vector<std::string>>();
    for (const auto& p : j.at("hois")) s.hois.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    for (auto it = j.at("synonyms").begin(); it != j.at("synonyms").end(); ++it) {
        auto v = it.value().get<std::vector<std::string>>();
        s.synonyms[it.key()] = std::set<std::string>(v.begin(), v.end());
    }
    auto prov = [](const json& p) {
        std::map<int, std::set<std::pair<std::string, int>>> out;
        for (auto it = p.begin(); it != p.end(); ++it) {
            auto& dst = out[std::stoi(it.key())];
            for (const auto& e : it.value()) dst.insert({e.at(0).get<std::string>(), e.at(1).get<int>()});
        }
        return out;
    };
    s.object_provenance = prov(j.at("object_provenance"));
    s.action_provenance = prov(j.at("action_provenance"));
    return s;
}

}  // namespace

std::string label_space_to_json(const UnifiedLabelSpace& space) {
    return space_to_json_obj(space).dump(1) + "\n";
}

UnifiedLabelSpace label_space_from_json(const std::string& text) {
    return space_from_json_obj(json::parse(text));
}

void save_label_space(const UnifiedLabelSpace& space, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_label_space: cannot open " + path);
    out << label_space_to_json(space);
}

UnifiedLabelSpace load_label_space(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_label_space: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return label_space_from_json(ss.str());
}

void save_unified_annotations(const std::vector<UnifiedAnnotation>& anns, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_unified_annotations: cannot open " + path);
    for (const auto& a : anns) {
        json j;
        j["dataset"] = a.dataset;
        j["image_id"] = a.image_id;
        auto hc = a.ann.human.corners(), oc = a.ann.object.corners();
        j["human"] = json::array();
        j["object"] = json::array();
        for (int k = 0; k < 4; ++k) {
            j["human"].push_back(format_double(hc[k]));
            j["object"].push_back(format_double(oc[k]));
        }
        j["object_class"] = a.ann.object_class;
        j["verb_class"] = a.ann.verb_class;
        j["source_object_id"] = a.source_object_id;
        j["source_verb_id"] = a.source_verb_id;
        out << j.dump() << "\n";
    }
}

std::vector<UnifiedAnnotation> load_unified_annotations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_unified_annotations: cannot open " + path);
    std::vector<UnifiedAnnotation> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        UnifiedAnnotation a;
        a.dataset = j.at("dataset").get<std::string>();
        a.image_id = j.at("image_id").get<std::string>();
        auto box = [&](const char* key) {
            const auto& arr = j.at(key);
            return Box::from_corners(
                std::stod(arr.at(0).get<std::string>()), std::stod(arr.at(1).get<std::string>()),
                std::stod(arr.at(2).get<std::string>()), std::stod(arr.at(3).get<std::string>()));
        };
        a.ann.human = box("human");
        a.ann.object = box("object");
        a.ann.object_class = j.at("object_class").get<int>();
        a.ann.verb_class = j.at("verb_class").get<int>();
        a.source_object_id = j.at("source_object_id").get<int>();
        a.source_verb_id = j.at("source_verb_id").get<int>();
        out.push_back(std::move(a));
    }
    return out;
}

std::string manifest_to_json(const DatasetManifest& m) {
    json j;
    j["name"] = m.name;
    j["object_vocab"] = m.object_vocab;
    j["action_vocab"] = m.action_vocab;
    j["synonym_hints"] = json::array();
    for (const auto& [a, b] : m.synonym_hints) j["synonym_hints"].push_back(json::array({a, b}));
    j["heldout_image_ids"] = m.heldout_image_ids;
    j["annotations"] = json::array();
    for (const auto& a : m.annotations) {
        json ja;
        ja["image_id"] = a.image_id;
        auto hc = a.ann.human.corners(), oc = a.ann.object.corners();
        ja["human"] = json::array();
        ja["object"] = json::array();
        for (int k = 0; k < 4; ++k) {
            ja["human"].push_back(format_double(hc[k]));
            ja["object"].push_back(format_double(oc[k]));
        }
        ja["object_class"] = a.ann.object_class;
        ja["verb_class"] = a.ann.verb_class;
        j["annotations"].push_back(ja);
    }
    return j.dump(1) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
    json j = json::parse(text);
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.object_vocab = j.at("object_vocab").get<std::vector<std::string>>();
    m.action_vocab = j.at("action_vocab").get<std::vector<std::string>>();
    for (const auto& h : j.at("synonym_hints"))
        m.synonym_hints.emplace_back(h.at(0).get<std::string>(), h.at(1).get<std::string>());
    m.heldout_image_ids = j.at("heldout_image_ids").get<std::vector<std::string>>();
    for (const auto& ja : j.at("annotations")) {
        ManifestAnnotation a;
        a.image_id = ja.at("image_id").get<std::string>();
        auto box = [&](const char* key) {
            const auto& arr = ja.at(key);
            return Box::from_corners(
                std::stod(arr.at(0).get<std::string>()), std::stod(arr.at(1).get<std::string>()),
                std::stod(arr.at(2).get<std::string>()), std::stod(arr.at(3).get<std::string>()));
        };
        a.ann.human = box("human");
        a.ann.object = box("object");
        a.ann.object_class = ja.at("object_class").get<int>();
        a.ann.verb_class = ja.at("verb_class").get<int>();
        m.annotations.push_back(std::move(a));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
    out << manifest_to_json(m);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

}  // namespace hoikit
