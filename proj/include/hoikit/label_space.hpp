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

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hoikit/geometry.hpp"

namespace hoikit {

// One source dataset: its own vocabularies, annotations in local ids, and
// optional curation hints. Held-out image ids feed the leakage audit.
struct ManifestAnnotation {
    std::string image_id;
    TripletAnnotation ann;  // object_class / verb_class are local vocab indices
};

struct DatasetManifest {
    std::string name;
    std::vector<std::string> object_vocab;
    std::vector<std::string> action_vocab;
    std::vector<ManifestAnnotation> annotations;
    // (source term, canonical term): both must exist in the same vocabulary
    // of the merged term universe. A term may be hinted to only one canonical.
    std::vector<std::pair<std::string, std::string>> synonym_hints;
    std::vector<std::string> heldout_image_ids;
};

// Merged label space. Canonical ids follow lexicographic term order, so the
// result is independent of manifest order; a manifest whose vocabulary is
// already sorted and synonym-free maps with identity remapping.
struct UnifiedLabelSpace {
    std::vector<std::string> objects;               // canonical terms, sorted
    std::vector<std::string> actions;               // canonical terms, sorted
    std::vector<std::pair<int, int>> hois;          // (action id, object id), sorted
    std::map<std::string, std::set<std::string>> synonyms;  // canonical → class members
    std::map<int, std::set<std::pair<std::string, int>>> object_provenance;
    std::map<int, std::set<std::pair<std::string, int>>> action_provenance;

    int object_id(const std::string& term) const;
    int action_id(const std::string& term) const;
    // HOI id for a canonical (action, object) pair, -1 when the pair is not
    // part of the space.
    int hoi_id(int action, int object) const;

    // Stable digest of the canonical content; stored in checkpoints so a
    // model is never evaluated against a different space.
    uint64_t fingerprint() const;
};

struct UnifiedAnnotation {
    std::string dataset;
    std::string image_id;
    TripletAnnotation ann;       // canonical ids
    int source_object_id = -1;   // local ids kept so the merge inverts exactly
    int source_verb_id = -1;
};

struct MergeResult {
    UnifiedLabelSpace space;
    std::vector<UnifiedAnnotation> annotations;
    // Canonical HOI ids seen in any annotation of a declared held-out image.
    std::vector<int> leakage_hois;
};

// Union of vocabularies with synonym-class collapse. Canonical term of a
// class is the hinted canonical when a hint names one, otherwise the
// lexicographically smallest member. Throws on hints that reference unknown
// terms or map one term to two different canonicals (directly or through a
// chain — every class must name at most one canonical).
MergeResult merge_datasets(const std::vector<DatasetManifest>& manifests);

struct RarityStats {
    std::map<int, int> counts;  // HOI id → instance count (ids with ≥1 only)
    std::set<int> rare_set;     // count < threshold
    std::set<int> nonrare_set;  // count ≥ threshold
    double tail_fraction = 0.0; // |rare| / |ids with ≥1 instance|
};

RarityStats rarity_split(const std::vector<UnifiedAnnotation>& annotations,
                         const UnifiedLabelSpace& space, int threshold = 10);
RarityStats rarity_split_from_counts(const std::map<int, int>& counts, int threshold = 10);

// JSON (de)serialization; writing is byte-stable (sorted keys, fixed indent),
// so save(load(f)) reproduces f exactly.
std::string label_space_to_json(const UnifiedLabelSpace& space);
UnifiedLabelSpace label_space_from_json(const std::string& text);
void save_label_space(const UnifiedLabelSpace& space, const std::string& path);
UnifiedLabelSpace load_label_space(const std::string& path);

// Unified annotations as JSON-lines, one object per line, byte-stable.
void save_unified_annotations(const std::vector<UnifiedAnnotation>& anns, const std::string& path);
std::vector<UnifiedAnnotation> load_unified_annotations(const std::string& path);

// Manifest files are JSON documents with the same stability guarantee.
std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

}  // namespace hoikit
