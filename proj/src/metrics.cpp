#include "parse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <tuple>

#include "json.hpp"

namespace parse {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void fill_rates(HgebdScore& s) {
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    s.miou = ratio(s.tp, s.tp + s.fp + s.fn);
    s.f1 = harmonic(s.precision, s.recall);
}

const char* mode_name(MatchMode m) {
    return m == MatchMode::literal ? "literal" : "one-to-one";
}

MatchMode mode_from(const std::string& s) {
    if (s == "literal") return MatchMode::literal;
    if (s == "one-to-one") return MatchMode::one_to_one;
    throw config_error("unknown match mode: " + s);
}

}  // namespace

HgebdScore hgebd(const BoundarySet& pred, const BoundarySet& gt, int w, MatchMode mode) {
    if (w < 0) throw config_error("tolerance must be >= 0");
    HgebdScore s;
    s.w = w;
    s.mode = mode;
    int Mp = static_cast<int>(pred.frames.size());
    int Mg = static_cast<int>(gt.frames.size());
    if (mode == MatchMode::literal) {
        for (int b : pred.frames)
            for (int g : gt.frames)
                if (std::abs(b - g) <= w) {
                    s.tp += 1;
                    break;
                }
        s.fp = Mp - s.tp;
        s.fn = std::max(0, Mg - s.tp);
    } else {
        // Greedy one-to-one: closest pairs first, deterministic tie order.
        std::vector<std::tuple<int, int, int>> cand;  // (distance, pred idx, gt idx)
        for (int i = 0; i < Mp; ++i)
            for (int j = 0; j < Mg; ++j) {
                int d = std::abs(pred.frames[i] - gt.frames[j]);
                if (d <= w) cand.emplace_back(d, i, j);
            }
        std::sort(cand.begin(), cand.end());
        std::vector<char> pred_used(Mp, 0), gt_used(Mg, 0);
        for (const auto& [d, i, j] : cand) {
            (void)d;
            if (pred_used[i] || gt_used[j]) continue;
            pred_used[i] = gt_used[j] = 1;
            s.tp += 1;
        }
        s.fp = Mp - s.tp;
        s.fn = Mg - s.tp;
    }
    fill_rates(s);
    return s;
}

BoundarySet boundary_set_of(const Level& level, int level_index) {
    BoundarySet bs;
    bs.level = level_index;
    bs.frames = boundaries_of(level);
    return bs;
}

OrderedTree tree_of(const Partonomy& p) {
    if (p.levels.empty()) throw config_error("empty partonomy has no tree");
    for (const Level& lv : p.levels)
        if (lv.segments.empty()) throw config_error("empty partonomy level has no tree");
    int N = static_cast<int>(p.levels.size());
    // children_of[i][c] = indices of level i-1 segments inside segment c of level i.
    std::vector<std::vector<std::vector<int>>> kids(N);
    for (int i = 1; i < N; ++i) {
        kids[i].assign(p.levels[i].segments.size(), {});
        bool have_links = p.parents.size() == static_cast<size_t>(N) - 1 &&
                          p.parents[i - 1].size() == p.levels[i - 1].segments.size();
        for (size_t j = 0; j < p.levels[i - 1].segments.size(); ++j) {
            int par = -1;
            if (have_links) {
                par = p.parents[i - 1][j];
            } else {
                const Segment& s = p.levels[i - 1].segments[j];
                for (size_t c = 0; c < p.levels[i].segments.size(); ++c)
                    if (p.levels[i].segments[c].start <= s.start &&
                        s.end <= p.levels[i].segments[c].end) {
                        par = static_cast<int>(c);
                        break;
                    }
            }
            if (par < 0 || par >= static_cast<int>(kids[i].size()))
                throw config_error("segment without parent; partonomy does not validate");
            kids[i][par].push_back(static_cast<int>(j));
        }
    }
    OrderedTree t;
    t.nodes.push_back({"", {}});
    // Depth-first from the coarsest level so children stay in temporal order.
    struct Item {
        int level, idx, node;
    };
    std::vector<Item> stack;
    for (int c = static_cast<int>(p.levels[N - 1].segments.size()) - 1; c >= 0; --c)
        stack.push_back({N - 1, c, 0});
    while (!stack.empty()) {
        Item it = stack.back();
        stack.pop_back();
        int id = t.size();
        t.nodes.push_back({p.levels[it.level].segments[it.idx].label, {}});
        t.nodes[it.node].children.push_back(id);
        if (it.level > 0) {
            const std::vector<int>& ch = kids[it.level][it.idx];
            for (int j = static_cast<int>(ch.size()) - 1; j >= 0; --j)
                stack.push_back({it.level - 1, ch[j], id});
        }
    }
    return t;
}

namespace {

// Postorder flattening with leftmost-leaf indices, the Zhang-Shasha shape.
struct Flat {
    std::vector<std::string> label;  // 1-based
    std::vector<int> lml;            // 1-based
    std::vector<int> keyroots;
    int n = 0;
};

Flat flatten(const OrderedTree& t) {
    Flat f;
    f.label.push_back("");
    f.lml.push_back(0);
    // Iterative postorder of node 0.
    struct Item {
        int node;
        size_t next_child = 0;
    };
    std::vector<Item> stack{{0}};
    std::vector<int> post_of_leftmost(t.size(), 0);
    while (!stack.empty()) {
        Item& it = stack.back();
        const OrderedTree::Node& node = t.nodes[it.node];
        if (it.next_child < node.children.size()) {
            int c = node.children[it.next_child++];
            stack.push_back({c});
        } else {
            int my_index = static_cast<int>(f.label.size());
            int leftmost = my_index;
            if (!node.children.empty()) leftmost = post_of_leftmost[node.children.front()];
            post_of_leftmost[it.node] = leftmost;
            f.label.push_back(node.label);
            f.lml.push_back(leftmost);
            stack.pop_back();
        }
    }
    f.n = static_cast<int>(f.label.size()) - 1;
    // Keyroots: nodes with no ancestor sharing their leftmost leaf; for each
    // distinct lml value, the highest postorder index wins.
    std::vector<int> last(f.n + 1, 0);
    for (int i = 1; i <= f.n; ++i) last[f.lml[i]] = i;
    for (int i = 1; i <= f.n; ++i)
        if (last[f.lml[i]] == i) f.keyroots.push_back(i);
    return f;
}

}  // namespace

double tree_edit_distance(const OrderedTree& a, const OrderedTree& b,
                          double alpha, double beta) {
    if (!(alpha > 0.0)) throw config_error("alpha must be positive");
    if (beta < 0.0) throw config_error("beta must be >= 0");
    Flat fa = flatten(a), fb = flatten(b);
    std::vector<std::vector<double>> td(fa.n + 1, std::vector<double>(fb.n + 1, 0.0));
    std::vector<std::vector<double>> fd(fa.n + 2, std::vector<double>(fb.n + 2, 0.0));
    auto rel = [&](int i, int j) { return fa.label[i] == fb.label[j] ? 0.0 : beta; };
    for (int k1 : fa.keyroots) {
        for (int k2 : fb.keyroots) {
            int l1 = fa.lml[k1], l2 = fb.lml[k2];
            fd[l1 - 1][l2 - 1] = 0.0;
            for (int i = l1; i <= k1; ++i) fd[i][l2 - 1] = fd[i - 1][l2 - 1] + alpha;
            for (int j = l2; j <= k2; ++j) fd[l1 - 1][j] = fd[l1 - 1][j - 1] + alpha;
            for (int i = l1; i <= k1; ++i) {
                for (int j = l2; j <= k2; ++j) {
                    double del = fd[i - 1][j] + alpha;
                    double ins = fd[i][j - 1] + alpha;
                    if (fa.lml[i] == l1 && fb.lml[j] == l2) {
                        double sub = fd[i - 1][j - 1] + rel(i, j);
                        fd[i][j] = std::min({del, ins, sub});
                        td[i][j] = fd[i][j];
                    } else {
                        double sub = fd[fa.lml[i] - 1][fb.lml[j] - 1] + td[i][j];
                        fd[i][j] = std::min({del, ins, sub});
                    }
                }
            }
        }
    }
    return td[fa.n][fb.n];
}

TedResult ted(const Partonomy& pred, const Partonomy& gt, double alpha, double beta) {
    OrderedTree ta = tree_of(pred), tb = tree_of(gt);
    TedResult r;
    r.alpha = alpha;
    r.beta = beta;
    r.raw_cost = tree_edit_distance(ta, tb, alpha, beta);
    r.ted_sim = 1.0 - r.raw_cost / (alpha * (ta.size() + tb.size()));
    return r;
}

Assignment hungarian_max(const std::vector<std::vector<double>>& value) {
    Assignment out;
    int R = static_cast<int>(value.size());
    int C = R > 0 ? static_cast<int>(value[0].size()) : 0;
    out.row_to_col.assign(R, -1);
    if (R == 0 || C == 0) return out;
    for (const auto& row : value) {
        if (static_cast<int>(row.size()) != C) throw shape_error("ragged value matrix");
        if (!all_finite(row)) throw config_error("non-finite assignment value");
    }
    // Potentials-based min-cost assignment over cost = -value, transposed if
    // needed so rows <= cols.
    bool flip = R > C;
    int n = flip ? C : R, m = flip ? R : C;
    auto cost = [&](int i, int j) { return flip ? -value[j][i] : -value[i][j]; };
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, INF);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = INF;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    for (int j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        int row = flip ? j - 1 : p[j] - 1;
        int col = flip ? p[j] - 1 : j - 1;
        out.row_to_col[row] = col;
        out.total += value[row][col];
    }
    return out;
}

int best_level_match(const Partonomy& pred, const Level& gt_level, int w) {
    BoundarySet gt_bs = boundary_set_of(gt_level, 0);
    int best = 1;
    double best_f1 = -1.0;
    for (size_t i = 0; i < pred.levels.size(); ++i) {
        HgebdScore s = hgebd(boundary_set_of(pred.levels[i], static_cast<int>(i) + 1),
                             gt_bs, w, MatchMode::literal);
        if (s.f1 > best_f1) {
            best_f1 = s.f1;
            best = static_cast<int>(i) + 1;
        }
    }
    return best;
}

namespace {

double segment_iou(const Segment& a, const Segment& b) {
    int inter = std::min(a.end, b.end) - std::max(a.start, b.start);
    if (inter <= 0) return 0.0;
    int uni = std::max(a.end, b.end) - std::min(a.start, b.start);
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

Hf1Result hf1(const Partonomy& pred, const Partonomy& gt, double tau, int w) {
    if (!(tau > 0.0) || tau > 1.0) throw config_error("tau must be in (0, 1]");
    if (pred.levels.empty() || gt.levels.empty())
        throw config_error("hf1 needs non-empty partonomies");
    Hf1Result res;
    res.tau = tau;
    bool same_counts = pred.levels.size() == gt.levels.size();
    for (size_t gi = 0; gi < gt.levels.size(); ++gi) {
        int pi = same_counts ? static_cast<int>(gi) + 1
                             : best_level_match(pred, gt.levels[gi], w);
        const Level& gl = gt.levels[gi];
        const Level& pl = pred.levels[pi - 1];
        int M = static_cast<int>(gl.segments.size());
        int Mp = static_cast<int>(pl.segments.size());
        std::vector<std::vector<double>> iou(M, std::vector<double>(Mp, 0.0));
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < Mp; ++j)
                iou[i][j] = segment_iou(gl.segments[i], pl.segments[j]);
        Assignment asg = hungarian_max(iou);
        int tp = 0;
        for (int i = 0; i < M; ++i)
            if (asg.row_to_col[i] >= 0 && iou[i][asg.row_to_col[i]] >= tau) tp += 1;
        double p = ratio(tp, Mp), r = ratio(tp, M);
        res.precision.push_back(p);
        res.recall.push_back(r);
        res.f1.push_back(harmonic(p, r));
        res.matched_pred_level.push_back(pi);
    }
    double sum = 0.0;
    for (double f : res.f1) sum += f;
    res.hf1 = sum / static_cast<double>(res.f1.size());
    return res;
}

void write_report(const std::string& path, const MetricReport& r) {
    nlohmann::json j;
    j["video"] = r.video;
    j["ted_raw"] = r.ted_raw;
    j["ted_sim"] = r.ted_sim;
    j["alpha"] = r.alpha;
    j["beta"] = r.beta;
    j["tau"] = r.tau;
    j["tolerance"] = r.tolerance;
    j["match"] = mode_name(r.mode);
    j["hf1"] = r.hf1_mean;
    j["levels"] = nlohmann::json::array();
    for (size_t i = 0; i < r.boundary.size(); ++i) {
        nlohmann::json lv;
        lv["gt_level"] = static_cast<int>(i) + 1;
        lv["matched_pred_level"] = r.matched_pred_level[i];
        lv["tp"] = r.boundary[i].tp;
        lv["fp"] = r.boundary[i].fp;
        lv["fn"] = r.boundary[i].fn;
        lv["precision"] = r.boundary[i].precision;
        lv["recall"] = r.boundary[i].recall;
        lv["miou"] = r.boundary[i].miou;
        lv["f1"] = r.boundary[i].f1;
        lv["seg_precision"] = r.seg_precision[i];
        lv["seg_recall"] = r.seg_recall[i];
        lv["seg_f1"] = r.seg_f1[i];
        j["levels"].push_back(std::move(lv));
    }
    std::ofstream out(path);
    if (!out) throw format_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw format_error("write failed: " + path);
}

MetricReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("json parse error in " + path + ": " + e.what(),
                           static_cast<long long>(e.byte));
    }
    MetricReport r;
    try {
        r.video = j.at("video").get<std::string>();
        r.ted_raw = j.at("ted_raw").get<double>();
        r.ted_sim = j.at("ted_sim").get<double>();
        r.alpha = j.at("alpha").get<double>();
        r.beta = j.at("beta").get<double>();
        r.tau = j.at("tau").get<double>();
        r.tolerance = j.at("tolerance").get<int>();
        r.mode = mode_from(j.at("match").get<std::string>());
        r.hf1_mean = j.at("hf1").get<double>();
        for (const auto& lv : j.at("levels")) {
            HgebdScore s;
            s.w = r.tolerance;
            s.mode = r.mode;
            s.tp = lv.at("tp").get<int>();
            s.fp = lv.at("fp").get<int>();
            s.fn = lv.at("fn").get<int>();
            s.precision = lv.at("precision").get<double>();
            s.recall = lv.at("recall").get<double>();
            s.miou = lv.at("miou").get<double>();
            s.f1 = lv.at("f1").get<double>();
            r.boundary.push_back(s);
            r.matched_pred_level.push_back(lv.at("matched_pred_level").get<int>());
            r.seg_precision.push_back(lv.at("seg_precision").get<double>());
            r.seg_recall.push_back(lv.at("seg_recall").get<double>());
            r.seg_f1.push_back(lv.at("seg_f1").get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error("bad report schema in " + path + ": " + e.what());
    }
    return r;
}

MetricReport aggregate_reports(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw config_error("no reports to aggregate");
    const MetricReport& first = reports.front();
    size_t L = first.boundary.size();
    for (const MetricReport& r : reports) {
        if (r.boundary.size() != L)
            throw config_error("reports disagree on level count");
        if (r.alpha != first.alpha || r.beta != first.beta || r.tau != first.tau ||
            r.tolerance != first.tolerance || r.mode != first.mode)
            throw config_error("reports disagree on thresholds");
    }
    MetricReport agg;
    agg.video = "mean over " + std::to_string(reports.size()) + " videos";
    agg.alpha = first.alpha;
    agg.beta = first.beta;
    agg.tau = first.tau;
    agg.tolerance = first.tolerance;
    agg.mode = first.mode;
    agg.boundary.resize(L);
    agg.matched_pred_level.assign(L, -1);
    agg.seg_precision.assign(L, 0.0);
    agg.seg_recall.assign(L, 0.0);
    agg.seg_f1.assign(L, 0.0);
    double inv = 1.0 / static_cast<double>(reports.size());
    for (size_t i = 0; i < L; ++i) {
        bool unanimous = true;
        for (const MetricReport& r : reports) {
            // Counts are summed; rate metrics are unweighted per-video means.
            agg.boundary[i].tp += r.boundary[i].tp;
            agg.boundary[i].fp += r.boundary[i].fp;
            agg.boundary[i].fn += r.boundary[i].fn;
            agg.boundary[i].precision += r.boundary[i].precision * inv;
            agg.boundary[i].recall += r.boundary[i].recall * inv;
            agg.boundary[i].miou += r.boundary[i].miou * inv;
            agg.boundary[i].f1 += r.boundary[i].f1 * inv;
            agg.seg_precision[i] += r.seg_precision[i] * inv;
            agg.seg_recall[i] += r.seg_recall[i] * inv;
            agg.seg_f1[i] += r.seg_f1[i] * inv;
            if (r.matched_pred_level[i] != first.matched_pred_level[i]) unanimous = false;
        }
        agg.boundary[i].w = first.tolerance;
        agg.boundary[i].mode = first.mode;
        if (unanimous) agg.matched_pred_level[i] = first.matched_pred_level[i];
    }
    for (const MetricReport& r : reports) {
        agg.ted_raw += r.ted_raw * inv;
        agg.ted_sim += r.ted_sim * inv;
        agg.hf1_mean += r.hf1_mean * inv;
    }
    return agg;
}

std::string format_report_table(const MetricReport& r) {
    char buf[256];
    std::string out;
    out += r.video + "\n";
    std::snprintf(buf, sizeof(buf), "  TED-Sim %.4f  (raw %.4f, alpha=%g, beta=%g)\n",
                  r.ted_sim, r.ted_raw, r.alpha, r.beta);
    out += buf;
    std::snprintf(buf, sizeof(buf), "  hF1 %.4f  (tau=%.2f)\n", r.hf1_mean, r.tau);
    out += buf;
    std::snprintf(buf, sizeof(buf), "  boundary match: %s, tolerance +-%d frames\n",
                  mode_name(r.mode), r.tolerance);
    out += buf;
    out += "  level  pred      TP      FP      FN       P       R    mIoU      F1"
           "    segP    segR   segF1\n";
    for (size_t i = 0; i < r.boundary.size(); ++i) {
        const HgebdScore& s = r.boundary[i];
        char pred[16];
        if (r.matched_pred_level[i] > 0)
            std::snprintf(pred, sizeof(pred), "%d", r.matched_pred_level[i]);
        else
            std::snprintf(pred, sizeof(pred), "-");
        std::snprintf(buf, sizeof(buf),
                      "  %5zu  %4s  %6d  %6d  %6d  %6.4f  %6.4f  %6.4f  %6.4f"
                      "  %6.4f  %6.4f  %6.4f\n",
                      i + 1, pred, s.tp, s.fp, s.fn, s.precision, s.recall, s.miou,
                      s.f1, r.seg_precision[i], r.seg_recall[i], r.seg_f1[i]);
        out += buf;
    }
    return out;
}

}  // namespace parse
