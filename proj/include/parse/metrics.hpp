#pragma once

#include <string>
#include <vector>

#include "parse/boundary.hpp"
#include "parse/partonomy.hpp"

namespace parse {

// How predicted boundaries are counted against ground truth. literal counts
// every prediction within the window (many-to-one allowed, FN clamped at 0);
// one_to_one greedily matches each ground-truth boundary at most once.
enum class MatchMode { literal, one_to_one };

struct HgebdScore {
    int tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, miou = 0.0, f1 = 0.0;
    int w = 0;
    MatchMode mode = MatchMode::literal;
};

// Boundary detection score within a +-w frame tolerance.
HgebdScore hgebd(const BoundarySet& pred, const BoundarySet& gt, int w, MatchMode mode);

// Interior boundaries of a level packaged for hgebd.
BoundarySet boundary_set_of(const Level& level, int level_index);

// Ordered rooted tree with string labels; node 0 is the root.
struct OrderedTree {
    struct Node {
        std::string label;
        std::vector<int> children;  // in order
    };
    std::vector<Node> nodes;

    int size() const { return static_cast<int>(nodes.size()); }
};

// Partonomy as an ordered tree: a virtual root holds the coarsest segments,
// every segment's children are its next-finer parts, all in temporal order.
OrderedTree tree_of(const Partonomy& p);

// Exact ordered-tree edit distance (insert/delete cost alpha, relabel cost
// beta per differing label), computed with the Zhang-Shasha recurrence.
double tree_edit_distance(const OrderedTree& a, const OrderedTree& b,
                          double alpha, double beta);

struct TedResult {
    double raw_cost = 0.0;
    double ted_sim = 0.0;
    double alpha = 1.0, beta = 0.0;
};

// Edit distance between partonomy trees plus the node-count normalization
// ted_sim = 1 - raw / (alpha * (|pred| + |gt|)), virtual roots counted.
TedResult ted(const Partonomy& pred, const Partonomy& gt, double alpha, double beta);

// Optimal assignment maximizing total value; assigns min(rows, cols) pairs.
struct Assignment {
    std::vector<int> row_to_col;  // -1 where unassigned
    double total = 0.0;
};
Assignment hungarian_max(const std::vector<std::vector<double>>& value);

// Predicted level (1-based) whose boundaries best match gt_level by literal
// F1 at tolerance w; ties go to the finer level.
int best_level_match(const Partonomy& pred, const Level& gt_level, int w);

struct Hf1Result {
    std::vector<double> precision, recall, f1;  // per ground-truth level
    std::vector<int> matched_pred_level;        // 1-based
    double hf1 = 0.0;
    double tau = 0.5;
};

// Segment-level score: per ground-truth level, Hungarian-match segments by
// IoU, count matches with IoU >= tau, then average the per-level F1. When
// level counts differ, each ground-truth level is compared against its
// best-matching predicted level (tolerance w).
Hf1Result hf1(const Partonomy& pred, const Partonomy& gt, double tau, int w);

// Everything the evaluation pipeline reports for one video.
struct MetricReport {
    std::string video;
    double ted_raw = 0.0, ted_sim = 0.0;
    double alpha = 1.0, beta = 0.0, tau = 0.5;
    int tolerance = 1;
    MatchMode mode = MatchMode::literal;
    double hf1_mean = 0.0;
    // Per ground-truth level, index-aligned.
    std::vector<int> matched_pred_level;
    std::vector<HgebdScore> boundary;
    std::vector<double> seg_precision, seg_recall, seg_f1;
};

void write_report(const std::string& path, const MetricReport& r);
MetricReport read_report(const std::string& path);

// Unweighted per-metric mean across videos; all reports must share level
// count and thresholds. The result's video field names the aggregate.
MetricReport aggregate_reports(const std::vector<MetricReport>& reports);

// Aligned-column rendering for terminals.
std::string format_report_table(const MetricReport& r);

}  // namespace parse
