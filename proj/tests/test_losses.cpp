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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "hoikit/losses.hpp"
#include "hoikit/rng.hpp"

using namespace hoikit;

namespace {

// Exhaustive assignment oracle: smallest total, ties resolved towards the
// lexicographically smallest (row, col) pair list.
struct BruteBest {
    std::vector<std::pair<int, int>> pairs;
    double cost = std::numeric_limits<double>::infinity();
    bool found = false;
};

void brute_rec(const Tensor& c, int row, int left, std::vector<char>& used,
               std::vector<std::pair<int, int>>& cur, double cost, BruteBest& best) {
    if (left == 0) {
        if (!best.found || cost < best.cost - 1e-12 ||
            (std::abs(cost - best.cost) <= 1e-12 && cur < best.pairs)) {
            best.pairs = cur;
            best.cost = cost;
            best.found = true;
        }
        return;
    }
    if (row >= c.rows || c.rows - row < left) return;
    for (int g = 0; g < c.cols; ++g) {
        if (used[g]) continue;
        used[g] = 1;
        cur.emplace_back(row, g);
        brute_rec(c, row + 1, left - 1, used, cur, cost + c.at(row, g), best);
        cur.pop_back();
        used[g] = 0;
    }
    brute_rec(c, row + 1, left, used, cur, cost, best);  // leave this row unmatched
}

BruteBest brute_match(const Tensor& c) {
    BruteBest best;
    std::vector<char> used(static_cast<size_t>(c.cols), 0);
    std::vector<std::pair<int, int>> cur;
    brute_rec(c, 0, std::min(c.rows, c.cols), used, cur, 0.0, best);
    return best;
}

UnifiedLabelSpace tiny_space() {
    UnifiedLabelSpace s;
    s.objects = {"bicycle", "chair", "dog", "kite"};
    s.actions = {"hold", "ride", "sit_on", "tie"};
    s.hois = {{0, 2}, {0, 3}, {1, 0}, {2, 1}, {3, 3}};
    return s;
}

Raster noise_raster(int side, uint64_t seed) {
    Raster img(side, side);
    Rng rng(seed);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            img.set(x, y,
                    {static_cast<uint8_t>(rng.uniform_int(256)),
                     static_cast<uint8_t>(rng.uniform_int(256)),
                     static_cast<uint8_t>(rng.uniform_int(256))});
    return img;
}

struct TinyWorld {
    UnifiedLabelSpace space = tiny_space();
    RandomProjectionEmbedder emb{21, 8};
    DetectorConfig cfg;
    Raster img = noise_raster(16, 4);
    PromptBank object_bank, interaction_bank;
    std::vector<TripletAnnotation> gts;

    TinyWorld() {
        cfg.num_queries = 4;
        cfg.channels = 16;
        cfg.embed_dim = 8;
        cfg.heads = 2;
        cfg.decoder_layers = 1;
        cfg.encoder_layers = 1;
        cfg.ffn_hidden = 32;
        cfg.image_size = 16;
        cfg.seed = 5;
        object_bank = encode_textual_object_bank(space, {0, 1, 2, 3}, emb);
        interaction_bank = encode_textual_interaction_bank(space, {0, 1, 2, 3, 4}, emb);
        gts.push_back({Box::from_corners(0.1, 0.1, 0.45, 0.8),
                       Box::from_corners(0.3, 0.4, 0.7, 0.75), 2, 0});
        gts.push_back({Box::from_corners(0.5, 0.15, 0.9, 0.9),
                       Box::from_corners(0.6, 0.05, 0.95, 0.4), 0, 1});
    }
};

}  // namespace

TEST_CASE("assignment matches an exhaustive oracle, ties included") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + rng.uniform_int(6);
        int m = 1 + rng.uniform_int(6);
        Tensor c(n, m);
        for (double& v : c.data) v = rng.uniform(-5.0, 5.0);
        // a third of the trials quantize to force plenty of exact ties
        if (trial % 3 == 0)
            for (double& v : c.data) v = std::floor(v);
        MatchResult got = hungarian_match(c);
        BruteBest want = brute_match(c);
        REQUIRE(got.pairs.size() == want.pairs.size());
        CHECK(got.pairs == want.pairs);
        CHECK(std::abs(got.total_cost - want.cost) <= 1e-9 * (1.0 + std::abs(want.cost)));
    }
}

TEST_CASE("assignment basics and contracts") {
    // all-equal costs: identity is the lexicographically smallest optimum
    Tensor zeros3(3, 3);
    MatchResult r = hungarian_match(zeros3);
    CHECK(r.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}, {2, 2}});
    CHECK(r.total_cost == 0.0);

    // a constructed tie: both diagonals cost 2
    Tensor tie(2, 2);
    tie.at(0, 0) = 1;
    tie.at(0, 1) = 1;
    tie.at(1, 0) = 1;
    tie.at(1, 1) = 1;
    CHECK(hungarian_match(tie).pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});

    // rectangular: more queries than targets leaves queries unmatched
    Tensor wide(3, 1);
    wide.at(0, 0) = 5;
    wide.at(1, 0) = 2;
    wide.at(2, 0) = 9;
    CHECK(hungarian_match(wide).pairs == std::vector<std::pair<int, int>>{{1, 0}});

    // more targets than queries matches every query
    Tensor tall(1, 3);
    tall.at(0, 0) = 4;
    tall.at(0, 1) = -1;
    tall.at(0, 2) = 0;
    CHECK(hungarian_match(tall).pairs == std::vector<std::pair<int, int>>{{0, 1}});

    CHECK(hungarian_match(Tensor(0, 4)).pairs.empty());
    CHECK(hungarian_match(Tensor(4, 0)).pairs.empty());

    Tensor bad(1, 1);
    bad.at(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(hungarian_match(bad), doctest::Contains("non-finite"),
                         std::invalid_argument);
}

TEST_CASE("matching cost follows the weighted formula") {
    TinyWorld w;
    // two queries: the first reproduces ground truth 0 exactly and is fully
    // confident in its categories, the second is deliberately off
    std::vector<Box> human = {w.gts[0].human, Box::from_corners(0.2, 0.2, 0.6, 0.6)};
    std::vector<Box> object = {w.gts[0].object, Box::from_corners(0.5, 0.5, 0.8, 0.9)};
    Tensor p_o = Tensor::zeros(2, w.object_bank.size());
    Tensor p_i = Tensor::zeros(2, w.interaction_bank.size());
    p_o.at(0, w.object_bank.index_of(2)) = 1.0;  // gt 0 object class = 2
    int hoi0 = w.space.hoi_id(0, 2);
    p_i.at(0, w.interaction_bank.index_of(hoi0)) = 1.0;
    p_o.at(1, 0) = 0.25;
    p_i.at(1, 0) = 0.5;

    LossWeights lw;  // 2.5 / 1 / 1 / 1
    Tensor cost = match_cost(human, object, p_o, p_i, {w.gts[0]}, w.object_bank,
                             w.interaction_bank, w.space, lw);
    REQUIRE(cost.rows == 2);
    REQUIRE(cost.cols == 1);
    // perfect query: zero box terms, probability terms saturate at -1 each
    CHECK(cost.at(0, 0) == doctest::Approx(-2.0).epsilon(1e-12));

    const Box& h = human[1];
    const Box& o = object[1];
    const Box& gh = w.gts[0].human;
    const Box& go = w.gts[0].object;
    double l1 = std::abs(h.cx - gh.cx) + std::abs(h.cy - gh.cy) + std::abs(h.w - gh.w) +
                std::abs(h.h - gh.h) + std::abs(o.cx - go.cx) + std::abs(o.cy - go.cy) +
                std::abs(o.w - go.w) + std::abs(o.h - go.h);
    double expected = 2.5 * l1 + (1.0 - giou(h, gh)) + (1.0 - giou(o, go)) -
                      1.0 * p_o.at(1, w.object_bank.index_of(2)) -
                      1.0 * p_i.at(1, w.interaction_bank.index_of(hoi0));
    CHECK(cost.at(1, 0) == doctest::Approx(expected).epsilon(1e-12));

    // non-default weights rescale each component
    LossWeights lw2{1.0, 2.0, 3.0, 0.5};
    Tensor cost2 = match_cost(human, object, p_o, p_i, {w.gts[0]}, w.object_bank,
                              w.interaction_bank, w.space, lw2);
    double expected2 = 1.0 * l1 + 2.0 * ((1.0 - giou(h, gh)) + (1.0 - giou(o, go))) -
                       3.0 * p_o.at(1, w.object_bank.index_of(2)) -
                       0.5 * p_i.at(1, w.interaction_bank.index_of(hoi0));
    CHECK(cost2.at(1, 0) == doctest::Approx(expected2).epsilon(1e-12));

    // category bookkeeping errors surface loudly
    TripletAnnotation missing_pair = w.gts[0];
    missing_pair.verb_class = 3;  // (tie, dog) not in the label space
    CHECK_THROWS_WITH_AS(match_cost(human, object, p_o, p_i, {missing_pair}, w.object_bank,
                                    w.interaction_bank, w.space, lw),
                         doctest::Contains("not in the label space"), std::invalid_argument);
    PromptBank narrow = encode_textual_object_bank(w.space, {0, 1}, w.emb);
    Tensor p_o2 = Tensor::zeros(2, narrow.size());
    CHECK_THROWS_WITH_AS(match_cost(human, object, p_o2, p_i, {w.gts[0]}, narrow,
                                    w.interaction_bank, w.space, lw),
                         doctest::Contains("missing from the object bank"), std::invalid_argument);
}

TEST_CASE("paired InfoNCE over a similarity matrix") {
    Tensor one(1, 1);
    one.at(0, 0) = 3.7;
    CHECK(contrastive_loss(one, 0.07) == 0.0);  // single pair: certain positive

    Tensor flat = Tensor::full(3, 3, 0.42);
    CHECK(contrastive_loss(flat, 0.5) == doctest::Approx(std::log(3.0)).epsilon(1e-15));

    // strongly diagonal similarities drive the loss to zero
    Tensor diag = Tensor::zeros(4, 4);
    for (int i = 0; i < 4; ++i) diag.at(i, i) = 50.0;
    CHECK(contrastive_loss(diag, 0.07) < 1e-12);

    // random case against a direct long-double evaluation
    Rng rng(4);
    Tensor s(5, 5);
    for (double& v : s.data) v = rng.uniform(-1.0, 1.0);
    double tau = 0.07;
    long double want = 0;
    for (int m = 0; m < 5; ++m) {
        long double denom = 0;
        for (int n = 0; n < 5; ++n) denom += std::exp(static_cast<long double>(s.at(m, n)) / tau);
        want -= static_cast<long double>(s.at(m, m)) / tau - std::log(denom);
    }
    want /= 5;
    CHECK(contrastive_loss(s, tau) == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(contrastive_loss(Tensor(2, 3), 0.07), doctest::Contains("square"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(contrastive_loss(s, 0.0), doctest::Contains("positive"),
                         std::invalid_argument);
    CHECK(contrastive_loss(Tensor(0, 0), 0.07) == 0.0);
}

TEST_CASE("uniform similarities cost log of the category count") {
    Tape tape;
    ParamStore ps;
    Rng rng(3);
    PromptClassifier clf = PromptClassifier::create(ps, "clf", 6, 4, rng);
    ps.define("bg", Tensor::randn(1, 4, rng));
    ps.start_step(tape);
    Var tau = tape.constant(Tensor::full(1, 1, 0.07));

    // zero queries project to the zero vector, so every similarity ties and
    // each row is uniform over the K bank entries plus the background
    Tensor bank = Tensor::zeros(4, 4);
    for (int r = 0; r < 4; ++r) bank.at(r, r) = 1.0;
    Var q = tape.constant(Tensor::zeros(2, 6));
    std::vector<int> targets = {4, 1};  // one background, one real category
    Var term = query_contrastive_term(ps, clf, q, bank, "bg", tau, targets);
    CHECK(tape.value(term).at(0, 0) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(query_contrastive_term(ps, clf, q, bank, "bg", tau, {4}),
                         doctest::Contains("one target per query"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(query_contrastive_term(ps, clf, q, bank, "bg", tau, {5, 0}),
                         doctest::Contains("target outside"), std::invalid_argument);
}

TEST_CASE("total loss recombines exactly from its reported parts") {
    TinyWorld w;
    MPHOIDetector det(w.cfg, &w.emb);
    for (const LossWeights& lw : {LossWeights{}, LossWeights{1.0, 2.0, 3.0, 0.5}}) {
        Tape tape;
        ForwardResult fr = det.forward(tape, w.img, w.object_bank, w.interaction_bank);
        LossGraph lg = total_loss(det, tape, fr, w.gts, w.object_bank, w.interaction_bank,
                                  w.space, lw);
        CHECK(lg.match.pairs.size() == 2);
        CHECK(lg.values.l_b > 0.0);
        CHECK(lg.values.l_g > 0.0);
        CHECK(lg.values.l_c_o > 0.0);
        CHECK(lg.values.l_c_i > 0.0);
        CHECK(lg.values.tau == doctest::Approx(0.07).epsilon(1e-12));
        double recomposed = (lw.box * lg.values.l_b + lw.giou * lg.values.l_g) +
                            (lw.obj * lg.values.l_c_o + lw.inter * lg.values.l_c_i);
        CHECK(lg.values.total == recomposed);  // identical operation order
        CHECK(tape.value(lg.total).at(0, 0) == lg.values.total);
    }
}

TEST_CASE("box terms agree with the scalar geometry implementation") {
    TinyWorld w;
    MPHOIDetector det(w.cfg, &w.emb);
    // include a tiny corner box so a disjoint (negative GIoU) pair shows up
    w.gts.push_back({Box::from_corners(0.01, 0.01, 0.07, 0.08),
                     Box::from_corners(0.9, 0.91, 0.99, 0.99), 3, 0});
    Tape tape;
    ForwardResult fr = det.forward(tape, w.img, w.object_bank, w.interaction_bank);
    LossGraph lg = total_loss(det, tape, fr, w.gts, w.object_bank, w.interaction_bank, w.space,
                              LossWeights{});
    DetectionOutput out = MPHOIDetector::snapshot(tape, fr);

    double l1 = 0, g = 0;
    for (const auto& [q, t] : lg.match.pairs) {
        const Box& ph = out.human_boxes[static_cast<size_t>(q)];
        const Box& po = out.object_boxes[static_cast<size_t>(q)];
        const Box& gh = w.gts[static_cast<size_t>(t)].human;
        const Box& go = w.gts[static_cast<size_t>(t)].object;
        l1 += std::abs(ph.cx - gh.cx) + std::abs(ph.cy - gh.cy) + std::abs(ph.w - gh.w) +
              std::abs(ph.h - gh.h) + std::abs(po.cx - go.cx) + std::abs(po.cy - go.cy) +
              std::abs(po.w - go.w) + std::abs(po.h - go.h);
        g += (1.0 - giou(ph, gh)) + (1.0 - giou(po, go));
    }
    const double m = static_cast<double>(lg.match.pairs.size());
    CHECK(lg.values.l_b == doctest::Approx(l1 / m).epsilon(1e-12));
    CHECK(lg.values.l_g == doctest::Approx(g / m).epsilon(1e-12));

    // matched pairs are one-to-one
    std::set<int> qs, ts;
    for (const auto& [q, t] : lg.match.pairs) {
        CHECK(qs.insert(q).second);
        CHECK(ts.insert(t).second);
    }
}

TEST_CASE("an image without annotations trains only the classifiers") {
    TinyWorld w;
    MPHOIDetector det(w.cfg, &w.emb);
    Tape tape;
    ForwardResult fr = det.forward(tape, w.img, w.object_bank, w.interaction_bank);
    LossGraph lg =
        total_loss(det, tape, fr, {}, w.object_bank, w.interaction_bank, w.space, LossWeights{});
    CHECK(lg.match.pairs.empty());
    CHECK(lg.values.l_b == 0.0);
    CHECK(lg.values.l_g == 0.0);
    CHECK(lg.values.l_c_o > 0.0);
    CHECK(lg.values.l_c_i > 0.0);
    // gradients still flow end to end
    tape.backward(lg.total);
    double gn = 0;
    for (double v : tape.grad(det.store().p("queries.human")).data) gn += v * v;
    CHECK(gn > 0.0);

    TripletAnnotation bad;
    bad.object_class = 2;
    bad.verb_class = 0;  // default boxes are zero-sized -> invalid
    Tape t2;
    ForwardResult fr2 = det.forward(t2, w.img, w.object_bank, w.interaction_bank);
    CHECK_THROWS_WITH_AS(total_loss(det, t2, fr2, {bad}, w.object_bank, w.interaction_bank,
                                    w.space, LossWeights{}),
                         doctest::Contains("malformed"), std::invalid_argument);
}

TEST_CASE("analytic gradients of the full objective match finite differences") {
    TinyWorld w;
    MPHOIDetector det(w.cfg, &w.emb);
    LossWeights lw;

    auto eval = [&]() {
        Tape tape;
        ForwardResult fr = det.forward(tape, w.img, w.object_bank, w.interaction_bank);
        return total_loss(det, tape, fr, w.gts, w.object_bank, w.interaction_bank, w.space, lw)
            .values.total;
    };

    Tape tape;
    ForwardResult fr = det.forward(tape, w.img, w.object_bank, w.interaction_bank);
    LossGraph lg =
        total_loss(det, tape, fr, w.gts, w.object_bank, w.interaction_bank, w.space, lw);
    tape.backward(lg.total);

    const std::vector<std::pair<const char*, int>> coords = {
        {"queries.human", 0},
        {"queries.object", 5},
        {"backbone.conv1.w", 3},
        {"backbone.conv3.b", 2},
        {"encoder.0.attn.q.w", 7},
        {"instance_dec.0.cross.v.w", 11},
        {"instance_dec.0.ln2.gamma", 4},
        {"interaction_dec.0.ffn.fc1.w", 2},
        {"box_head.human.l3.w", 1},
        {"box_head.object.l1.b", 0},
        {"classifier.object.proj.w", 4},
        {"classifier.interaction.proj.w", 9},
        {"adaptor.alpha.fc1.w", 6},
        {"adaptor.beta.fc2.w", 8},
        {"fusion.gate", 0},
        {"fusion.scale1.w", 5},
        {"log_temperature", 0},
        {"bg.object", 2},
        {"bg.interaction", 3},
    };
    const double eps = 1e-5;
    for (const auto& [name, idx] : coords) {
        REQUIRE(det.store().has(name));
        REQUIRE(idx < static_cast<int>(det.store().value(name).data.size()));
        double analytic = tape.grad(det.store().p(name)).data[static_cast<size_t>(idx)];
        double& slot = det.store().value(name).data[static_cast<size_t>(idx)];
        const double saved = slot;
        slot = saved + eps;
        double up = eval();
        slot = saved - eps;
        double down = eval();
        slot = saved;
        double fd = (up - down) / (2 * eps);
        double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
        INFO(name, "[", idx, "]: analytic ", analytic, " fd ", fd);
        CHECK(std::abs(analytic - fd) / scale < 1e-4);
    }
}
