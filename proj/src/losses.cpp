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

#include "hoikit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hoikit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Potentials assignment over an oriented matrix (rows <= cols); returns the
// matched column per row.
std::vector<int> solve_oriented(const Tensor& a) {
    const int n = a.rows, m = a.cols;
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

// Optimal total over the submatrix cost[rows x cols], matching min(|rows|,
// |cols|) pairs.  Totals always come from summing the chosen entries so equal
// assignments produce identical doubles.
double optimal_subcost(const Tensor& cost, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
    if (rows.empty() || cols.empty()) return 0.0;
    const bool flip = rows.size() > cols.size();
    const std::vector<int>& rr = flip ? cols : rows;
    const std::vector<int>& cc = flip ? rows : cols;
    Tensor sub(static_cast<int>(rr.size()), static_cast<int>(cc.size()));
    for (size_t i = 0; i < rr.size(); ++i)
        for (size_t j = 0; j < cc.size(); ++j)
            sub.at(static_cast<int>(i), static_cast<int>(j)) =
                flip ? cost.at(cc[j], rr[i]) : cost.at(rr[i], cc[j]);
    std::vector<int> match = solve_oriented(sub);
    double total = 0.0;
    for (size_t i = 0; i < match.size(); ++i) total += sub.at(static_cast<int>(i), match[i]);
    return total;
}

}  // namespace

MatchResult hungarian_match(const Tensor& cost) {
    MatchResult res;
    if (cost.rows == 0 || cost.cols == 0) return res;
    for (double x : cost.data)
        if (!std::isfinite(x)) throw std::invalid_argument("hungarian_match: non-finite cost");

    const int n = cost.rows, m = cost.cols;
    const int k = std::min(n, m);
    std::vector<int> all_rows(n), all_cols(m);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::iota(all_cols.begin(), all_cols.end(), 0);
    const double best = optimal_subcost(cost, all_rows, all_cols);
    const double tol = 1e-9 * (1.0 + std::abs(best));

    // Rebuild the optimum row by row, taking the smallest column that still
    // completes to an optimal total; a row is skipped only when nothing fits
    // (possible only with more rows than columns).
    std::vector<char> used(m, 0);
    double fixed_cost = 0.0;
    for (int q = 0; q < n && static_cast<int>(res.pairs.size()) < k; ++q) {
        const int need = k - static_cast<int>(res.pairs.size()) - 1;
        std::vector<int> rows_after;
        for (int r = q + 1; r < n; ++r) rows_after.push_back(r);
        for (int g = 0; g < m; ++g) {
            if (used[g]) continue;
            std::vector<int> cols_left;
            for (int c = 0; c < m; ++c)
                if (!used[c] && c != g) cols_left.push_back(c);
            if (static_cast<int>(rows_after.size()) < need ||
                static_cast<int>(cols_left.size()) < need)
                continue;
            const double total =
                fixed_cost + cost.at(q, g) + optimal_subcost(cost, rows_after, cols_left);
            if (total <= best + tol) {
                res.pairs.emplace_back(q, g);
                used[g] = 1;
                fixed_cost += cost.at(q, g);
                break;
            }
        }
    }
    if (static_cast<int>(res.pairs.size()) != k)
        throw std::logic_error("hungarian_match: tie-break reconstruction failed");
    res.total_cost = 0.0;
    for (const auto& [q, g] : res.pairs) res.total_cost += cost.at(q, g);
    return res;
}

Tensor match_cost(const std::vector<Box>& human_boxes, const std::vector<Box>& object_boxes,
                  const Tensor& p_o, const Tensor& p_i,
                  const std::vector<TripletAnnotation>& gts, const PromptBank& object_bank,
                  const PromptBank& interaction_bank, const UnifiedLabelSpace& space,
                  const LossWeights& w) {
    const int nq = static_cast<int>(human_boxes.size());
    if (static_cast<int>(object_boxes.size()) != nq)
        throw std::invalid_argument("match_cost: box list sizes differ");
    if (p_o.rows != nq || p_i.rows != nq)
        throw std::invalid_argument("match_cost: distribution rows != query count");
    if (p_o.cols != object_bank.size() || p_i.cols != interaction_bank.size())
        throw std::invalid_argument("match_cost: distribution width != bank size");

    Tensor cost(nq, static_cast<int>(gts.size()));
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
        const TripletAnnotation& gt = gts[g];
        const int oi = object_bank.index_of(gt.object_class);
        if (oi < 0)
            throw std::invalid_argument("match_cost: ground-truth object category " +
                                        std::to_string(gt.object_class) +
                                        " missing from the object bank");
        const int hoi = space.hoi_id(gt.verb_class, gt.object_class);
        if (hoi < 0)
            throw std::invalid_argument("match_cost: (verb " + std::to_string(gt.verb_class) +
                                        ", object " + std::to_string(gt.object_class) +
                                        ") is not in the label space");
        const int ii = interaction_bank.index_of(hoi);
        if (ii < 0)
            throw std::invalid_argument("match_cost: interaction category " + std::to_string(hoi) +
                                        " missing from the interaction bank");
        for (int q = 0; q < nq; ++q) {
            const Box& hq = human_boxes[q];
            const Box& oq = object_boxes[q];
            const double l1 = std::abs(hq.cx - gt.human.cx) + std::abs(hq.cy - gt.human.cy) +
                              std::abs(hq.w - gt.human.w) + std::abs(hq.h - gt.human.h) +
                              std::abs(oq.cx - gt.object.cx) + std::abs(oq.cy - gt.object.cy) +
                              std::abs(oq.w - gt.object.w) + std::abs(oq.h - gt.object.h);
            const double g_term = (1.0 - giou(hq, gt.human)) + (1.0 - giou(oq, gt.object));
            cost.at(q, g) = w.box * l1 + w.giou * g_term - w.obj * p_o.at(q, oi) -
                            w.inter * p_i.at(q, ii);
        }
    }
    return cost;
}

double contrastive_loss(const Tensor& sims, double tau) {
    if (sims.rows != sims.cols)
        throw std::invalid_argument("contrastive_loss: similarity matrix must be square");
    if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be positive");
    const int b = sims.rows;
    if (b == 0) return 0.0;
    double loss = 0.0;
    for (int m = 0; m < b; ++m) {
        double mx = -kInf;
        for (int n = 0; n < b; ++n) mx = std::max(mx, sims.at(m, n) / tau);
        double denom = 0.0;
        for (int n = 0; n < b; ++n) denom += std::exp(sims.at(m, n) / tau - mx);
        loss -= sims.at(m, m) / tau - mx - std::log(denom);
    }
    return loss / b;
}

namespace {

// Sum of GIoU over matched pairs, on the tape.  pred: M x 4 center-format
// rows; gt boxes become constant corner columns.
Var giou_sum_on_tape(Tape& t, Var pred, const std::vector<Box>& gt) {
    const int m = static_cast<int>(gt.size());
    Tensor gx1(m, 1), gy1(m, 1), gx2(m, 1), gy2(m, 1), garea(m, 1);
    for (int i = 0; i < m; ++i) {
        auto c = gt[i].corners();
        gx1.at(i, 0) = c[0];
        gy1.at(i, 0) = c[1];
        gx2.at(i, 0) = c[2];
        gy2.at(i, 0) = c[3];
        garea.at(i, 0) = gt[i].area();
    }
    Var cx = t.slice_cols(pred, 0, 1), cy = t.slice_cols(pred, 1, 1);
    Var w = t.slice_cols(pred, 2, 1), h = t.slice_cols(pred, 3, 1);
    Var px1 = t.sub(cx, t.scale(w, 0.5)), px2 = t.add(cx, t.scale(w, 0.5));
    Var py1 = t.sub(cy, t.scale(h, 0.5)), py2 = t.add(cy, t.scale(h, 0.5));
    Var vgx1 = t.constant(std::move(gx1)), vgy1 = t.constant(std::move(gy1));
    Var vgx2 = t.constant(std::move(gx2)), vgy2 = t.constant(std::move(gy2));
    Var zero = t.constant(Tensor::zeros(m, 1));

    Var iw = t.max_ew(t.sub(t.min_ew(px2, vgx2), t.max_ew(px1, vgx1)), zero);
    Var ih = t.max_ew(t.sub(t.min_ew(py2, vgy2), t.max_ew(py1, vgy1)), zero);
    Var inter = t.mul(iw, ih);
    Var uni = t.sub(t.add(t.mul(w, h), t.constant(std::move(garea))), inter);
    Var hull = t.mul(t.sub(t.max_ew(px2, vgx2), t.min_ew(px1, vgx1)),
                     t.sub(t.max_ew(py2, vgy2), t.min_ew(py1, vgy1)));
    Var g = t.sub(t.div(inter, uni), t.div(t.sub(hull, uni), hull));
    return t.sum_all(g);
}

Tensor boxes_to_tensor(const std::vector<Box>& boxes) {
    Tensor t(static_cast<int>(boxes.size()), 4);
    for (size_t i = 0; i < boxes.size(); ++i) {
        t.at(static_cast<int>(i), 0) = boxes[i].cx;
        t.at(static_cast<int>(i), 1) = boxes[i].cy;
        t.at(static_cast<int>(i), 2) = boxes[i].w;
        t.at(static_cast<int>(i), 3) = boxes[i].h;
    }
    return t;
}

std::vector<Box> tensor_to_boxes(const Tensor& t) {
    std::vector<Box> out;
    out.reserve(static_cast<size_t>(t.rows));
    for (int i = 0; i < t.rows; ++i)
        out.push_back({t.at(i, 0), t.at(i, 1), t.at(i, 2), t.at(i, 3)});
    return out;
}

}  // namespace

Var query_contrastive_term(ParamStore& ps, const PromptClassifier& clf, Var queries,
                           const Tensor& bank_rows, const char* background_param, Var tau,
                           const std::vector<int>& targets) {
    Tape& t = ps.tape();
    if (static_cast<int>(targets.size()) != t.value(queries).rows)
        throw std::invalid_argument("query_contrastive_term: one target per query required");
    for (int tgt : targets)
        if (tgt < 0 || tgt > bank_rows.rows)
            throw std::invalid_argument("query_contrastive_term: target outside bank+background");
    Var rows = t.concat_rows(t.constant(bank_rows), t.normalize_rows(ps.p(background_param)));
    Var lsm = t.log_softmax_rows(clf.logits(ps, queries, rows, tau));
    Var acc;
    for (size_t q = 0; q < targets.size(); ++q) {
        Var p = t.pick(lsm, static_cast<int>(q), targets[q]);
        acc = acc.valid() ? t.add(acc, p) : p;
    }
    return t.scale(acc, -1.0 / static_cast<double>(targets.size()));
}

LossGraph total_loss(MPHOIDetector& det, Tape& tape, const ForwardResult& fr,
                     const std::vector<TripletAnnotation>& gts, const PromptBank& object_bank,
                     const PromptBank& interaction_bank, const UnifiedLabelSpace& space,
                     const LossWeights& w) {
    ParamStore& ps = det.store();
    if (&ps.tape() != &tape)
        throw std::logic_error("total_loss: parameter store bound to a different tape");
    for (const TripletAnnotation& gt : gts)
        if (!gt.human.valid() || !gt.object.valid())
            throw std::invalid_argument("total_loss: malformed ground-truth box");

    const int n = tape.value(fr.human_boxes).rows;
    LossGraph out;

    const std::vector<Box> pred_h = tensor_to_boxes(tape.value(fr.human_boxes));
    const std::vector<Box> pred_o = tensor_to_boxes(tape.value(fr.object_boxes));
    const Tensor cost = match_cost(pred_h, pred_o, tape.value(fr.p_o), tape.value(fr.p_i), gts,
                                   object_bank, interaction_bank, space, w);
    out.match = hungarian_match(cost);
    const int m = static_cast<int>(out.match.pairs.size());

    Var l_b, l_g;
    if (m == 0) {
        l_b = tape.constant(Tensor::zeros(1, 1));
        l_g = tape.constant(Tensor::zeros(1, 1));
    } else {
        std::vector<int> qidx;
        std::vector<Box> gt_h, gt_o;
        for (const auto& [q, g] : out.match.pairs) {
            qidx.push_back(q);
            gt_h.push_back(gts[g].human);
            gt_o.push_back(gts[g].object);
        }
        Var ph = tape.gather_rows(fr.human_boxes, qidx);
        Var po = tape.gather_rows(fr.object_boxes, qidx);
        Var l1 = tape.add(tape.sum_all(tape.abs_(tape.sub(ph, tape.constant(boxes_to_tensor(gt_h))))),
                          tape.sum_all(tape.abs_(tape.sub(po, tape.constant(boxes_to_tensor(gt_o))))));
        l_b = tape.scale(l1, 1.0 / m);
        Var gsum = tape.add(giou_sum_on_tape(tape, ph, gt_h), giou_sum_on_tape(tape, po, gt_o));
        l_g = tape.scale(tape.add_scalar(tape.scale(gsum, -1.0), 2.0 * m), 1.0 / m);
    }

    std::vector<int> tgt_o(static_cast<size_t>(n), object_bank.size());
    std::vector<int> tgt_i(static_cast<size_t>(n), interaction_bank.size());
    for (const auto& [q, g] : out.match.pairs) {
        tgt_o[static_cast<size_t>(q)] = object_bank.index_of(gts[g].object_class);
        tgt_i[static_cast<size_t>(q)] =
            interaction_bank.index_of(space.hoi_id(gts[g].verb_class, gts[g].object_class));
    }
    Var l_c_o = query_contrastive_term(ps, det.object_classifier(), fr.qo, object_bank.embeddings,
                                       MPHOIDetector::kObjectBackground, fr.tau, tgt_o);
    Var l_c_i = query_contrastive_term(ps, det.interaction_classifier(), fr.qi,
                                       interaction_bank.embeddings,
                                       MPHOIDetector::kInteractionBackground, fr.tau, tgt_i);

    // Fixed composition order; the reported breakdown recombines to the exact
    // total under the same expression.
    Var total = tape.add(tape.add(tape.scale(l_b, w.box), tape.scale(l_g, w.giou)),
                         tape.add(tape.scale(l_c_o, w.obj), tape.scale(l_c_i, w.inter)));
    out.total = total;
    out.values.l_b = tape.value(l_b).at(0, 0);
    out.values.l_g = tape.value(l_g).at(0, 0);
    out.values.l_c_o = tape.value(l_c_o).at(0, 0);
    out.values.l_c_i = tape.value(l_c_i).at(0, 0);
    out.values.total = tape.value(total).at(0, 0);
    out.values.tau = tape.value(fr.tau).at(0, 0);
    return out;
}

}  // namespace hoikit
