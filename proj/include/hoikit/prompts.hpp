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

#ifndef HOIKIT_PROMPTS_HPP_
#define HOIKIT_PROMPTS_HPP_

#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hoikit/embed.hpp"
#include "hoikit/geometry.hpp"
#include "hoikit/label_space.hpp"
#include "hoikit/nn.hpp"
#include "hoikit/raster.hpp"

namespace hoikit {

// Ordered set of category embeddings a query is classified against.
// Entries are sorted by ascending category id and ids are unique per bank.
struct PromptBank {
    std::string kind;                     // "object" | "interaction"
    std::vector<int> category_ids;        // object ids or hoi ids
    std::vector<std::string> modalities;  // "text" | "visual" per entry
    Tensor embeddings;                    // |entries| x D, unit-norm rows
    uint64_t provider_fingerprint = 0;

    int size() const { return embeddings.rows; }
    int dim() const { return embeddings.cols; }
    int index_of(int category_id) const;  // -1 when absent
};

void save_bank(const std::string& path, const PromptBank& bank);
PromptBank load_bank(const std::string& path);

// Present-participle form used by the interaction template.  Ruleset
// (applied to the first word of a multi-word verb, remainder kept):
//   ends in "ie"            -> drop "ie", add "ying"   (tie -> tying)
//   ends in "e" (not "ee")  -> drop "e", add "ing"     (ride -> riding)
//   consonant-vowel-consonant ending (final consonant not w/x/y)
//                           -> double final, add "ing" (sit -> sitting)
//   otherwise               -> add "ing"               (hold -> holding)
std::string ing_form(const std::string& verb);

std::string object_prompt_sentence(const std::string& object_term);
std::string interaction_prompt_sentence(const std::string& verb_term,
                                        const std::string& object_term,
                                        const std::string& person_slot = "person");

PromptBank encode_textual_object_bank(const UnifiedLabelSpace& space,
                                      const std::vector<int>& object_ids,
                                      const SceneEmbedder& emb);
PromptBank encode_textual_interaction_bank(const UnifiedLabelSpace& space,
                                           const std::vector<int>& hoi_ids,
                                           const SceneEmbedder& emb,
                                           const std::string& person_slot = "person");

// Exemplar regions defining categories visually.  Boxes are normalized
// center-format within `image`.
struct VisualPromptSpec {
    Raster image;
    std::vector<std::pair<int, Box>> objects;             // (object id, box)
    std::vector<std::tuple<int, Box, Box>> interactions;  // (hoi id, human, object)
};

// Object entries embed the object crops; interaction entries embed the union
// box of the human and object crops.  Multiple exemplars of one category are
// averaged, then re-normalized.
PromptBank encode_visual_object_bank(const VisualPromptSpec& spec, const UnifiedLabelSpace& space,
                                     const SceneEmbedder& emb);
PromptBank encode_visual_interaction_bank(const VisualPromptSpec& spec,
                                          const UnifiedLabelSpace& space,
                                          const SceneEmbedder& emb);

// The prompt-based classifier head: project queries from C to the bank's D,
// L2-normalize, score against every bank row, softmax row-wise.  The learned
// temperature divides the cosine logits.
struct PromptClassifier {
    Linear proj;  // C -> D
    static PromptClassifier create(ParamStore& ps, const std::string& prefix, int query_dim,
                                   int embed_dim, Rng& rng);
    // bank_rows: K x D rows on the tape (constant bank, possibly with a
    // trainable background row appended by the loss).
    Var logits(ParamStore& ps, Var queries, Var bank_rows, Var tau) const;
    Var distributions(ParamStore& ps, Var queries, Var bank_rows, Var tau) const;
};

// Bounding union of two boxes.
Box union_box(const Box& a, const Box& b);

}  // namespace hoikit

#endif  // HOIKIT_PROMPTS_HPP_
