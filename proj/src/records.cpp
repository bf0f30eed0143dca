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

#include "hoikit/records.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hoikit {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_record(const TripletRecord& rec) {
    auto h = rec.ann.human.corners();
    auto o = rec.ann.object.corners();
    std::string s = rec.image_id;
    for (double v : h) s += " " + format_double(v);
    for (double v : o) s += " " + format_double(v);
    s += " " + std::to_string(rec.ann.object_class);
    s += " " + std::to_string(rec.ann.verb_class);
    if (rec.has_score) s += " " + format_double(rec.score);
    return s;
}

TripletRecord parse_record(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> tok;
    std::string t;
    while (ss >> t) tok.push_back(t);
    if (tok.size() != 11 && tok.size() != 12) {
        throw std::runtime_error("triplet record: expected 11 or 12 fields, got " +
                                 std::to_string(tok.size()) + " in: " + line);
    }
    auto num = [&](size_t i) {
        size_t pos = 0;
        double v = std::stod(tok[i], &pos);
        if (pos != tok[i].size()) throw std::runtime_error("triplet record: bad number " + tok[i]);
        return v;
    };
    TripletRecord rec;
    rec.image_id = tok[0];
    rec.ann.human = Box::from_corners(num(1), num(2), num(3), num(4));
    rec.ann.object = Box::from_corners(num(5), num(6), num(7), num(8));
    rec.ann.object_class = static_cast<int>(num(9));
    rec.ann.verb_class = static_cast<int>(num(10));
    if (tok.size() == 12) {
        rec.has_score = true;
        rec.score = num(11);
    }
    return rec;
}

void write_records(const std::string& path, const std::vector<TripletRecord>& recs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_records: cannot open " + path);
    for (const auto& r : recs) out << format_record(r) << "\n";
}

std::vector<TripletRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_records: cannot open " + path);
    std::vector<TripletRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_record(line));
    }
    return out;
}

}  // namespace hoikit
