#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mvs/error.hpp"
#include "mvs/geom.hpp"

namespace mvs::metrics {

struct EmptyCloud : Error {
    using Error::Error;
};
struct SizeMismatch : Error {
    using Error::Error;
};
struct BadK : Error {
    using Error::Error;
};

// Optimal transport between equal-sized sets under squared Euclidean cost.
struct Matching {
    std::vector<int> assignment;  // assignment[i] = index in S2 matched to S1[i]
    double cost = 0.0;
    bool exact = true;
    double duality_gap = 0.0;  // upper bound, 0 when exact
};

struct MetricReport {
    double gt_to_pred = 0.0;
    double pred_to_gt = 0.0;
    double cd = 0.0;       // gt_to_pred + pred_to_gt, unscaled
    // per-point average in each direction; comparable across cloud sizes
    double norm_cd = 0.0;
    double fps_cd = 0.0;   // unscaled
};

// First-order Chamfer distance terms: (sum_x min_y ||x-y||, sum_y min_x ||x-y||).
std::pair<double, double> chamfer(const geom::PointCloud& s1, const geom::PointCloud& s2);

// Exact Hungarian assignment for n <= exact_threshold, eps-scaling auction above.
Matching emd(const geom::PointCloud& s1, const geom::PointCloud& s2,
             std::size_t exact_threshold = 512);

// Greedy farthest point sampling. Ties on distance break toward the lower index.
std::vector<int> fps(const geom::PointCloud& s, std::size_t k, std::size_t start);

// Default start rule: lowest index among points farthest from the centroid.
std::size_t fps_default_start(const geom::PointCloud& s);

// Chamfer after FPS-downsampling the larger cloud to the smaller count.
double fps_cd(const geom::PointCloud& pred, const geom::PointCloud& gt);

MetricReport make_report(const geom::PointCloud& pred, const geom::PointCloud& gt);

// CSV row: shape_id, gt_to_pred, pred_to_gt, cd_x100, norm_cd_x100, fps_cd_x100
std::string report_csv_header();
std::string report_csv_row(const std::string& shape_id, const MetricReport& r);

// Minimum-cost assignment on a dense n x n matrix (row-major). Exposed for tests.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

}  // namespace mvs::metrics
