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

#include <string>
#include <vector>

#include "hoikit/geometry.hpp"

namespace hoikit {

// Line-delimited triplet record. One record per line, space separated:
//
//   image_id hx1 hy1 hx2 hy2 ox1 oy1 ox2 oy2 object_id verb_id [score]
//
// Boxes are corner-format at this boundary (converted to center-format in
// memory). Ground-truth records have 11 fields, predictions 12. Lines
// starting with '#' are comments. Floats are written with %.17g so
// serialization round-trips bit-exactly.
struct TripletRecord {
    std::string image_id;
    TripletAnnotation ann;
    bool has_score = false;
    double score = 0.0;
};

std::string format_record(const TripletRecord& rec);
TripletRecord parse_record(const std::string& line);

void write_records(const std::string& path, const std::vector<TripletRecord>& recs);
std::vector<TripletRecord> read_records(const std::string& path);

// Exact round-trip double formatting used across all text artifacts.
std::string format_double(double v);

}  // namespace hoikit
