#include "mvs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mvs::metrics {

namespace {

double sqdist(const geom::Point3& a, const geom::Point3& b) {
    return (a - b).squared_norm();
}

double one_sided_chamfer(const geom::PointCloud& from, const geom::PointCloud& to) {
    double total = 0.0;
    for (const auto& x : from.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& y : to.points) best = std::min(best, sqdist(x, y));
        total += std::sqrt(best);
    }
    return total;
}

// forward auction with eps-scaling on benefit = -cost; returns row -> col
std::vector<int> auction_assignment(const std::vector<double>& cost, int n,
                                    double eps_final) {
    double cmax = 0.0;
    for (double c : cost) cmax = std::max(cmax, std::abs(c));
    double eps = std::max(cmax / 2.0, eps_final);

    std::vector<double> price(n, 0.0);
    std::vector<int> owner(n, -1), assigned(n, -1);
    while (true) {
        std::fill(owner.begin(), owner.end(), -1);
        std::fill(assigned.begin(), assigned.end(), -1);
        std::vector<int> queue(n);
        for (int i = 0; i < n; ++i) queue[i] = i;
        while (!queue.empty()) {
            int i = queue.back();
            queue.pop_back();
            double best = -std::numeric_limits<double>::infinity();
            double second = best;
            int bj = 0;
            for (int j = 0; j < n; ++j) {
                double val = -cost[i * n + j] - price[j];
                if (val > best) {
                    second = best;
                    best = val;
                    bj = j;
                } else if (val > second) {
                    second = val;
                }
            }
            double bid = best - second + eps;
            price[bj] += bid;
            if (owner[bj] >= 0) {
                assigned[owner[bj]] = -1;
                queue.push_back(owner[bj]);
            }
            owner[bj] = i;
            assigned[i] = bj;
        }
        if (eps <= eps_final) break;
        eps = std::max(eps / 4.0, eps_final);
    }
    return assigned;
}

}  // namespace

std::pair<double, double> chamfer(const geom::PointCloud& s1, const geom::PointCloud& s2) {
    if (s1.empty() || s2.empty()) throw EmptyCloud("chamfer: empty cloud");
    return {one_sided_chamfer(s1, s2), one_sided_chamfer(s2, s1)};
}

std::vector<int> solve_assignment(const std::vector<double>& a, int n) {
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), INF);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            double delta = INF;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
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
    std::vector<int> ans(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) ans[p[j] - 1] = j - 1;
    return ans;
}

Matching emd(const geom::PointCloud& s1, const geom::PointCloud& s2,
             std::size_t exact_threshold) {
    if (s1.size() != s2.size())
        throw SizeMismatch("emd: clouds must have equal size");
    if (s1.empty()) throw EmptyCloud("emd: empty cloud");
    int n = static_cast<int>(s1.size());
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost[i * n + j] = sqdist(s1[i], s2[j]);

    Matching m;
    if (s1.size() <= exact_threshold) {
        m.assignment = solve_assignment(cost, n);
        m.exact = true;
    } else {
        double eps_final = 1e-9 / n;
        m.assignment = auction_assignment(cost, n, eps_final);
        m.exact = false;
        m.duality_gap = n * eps_final;
    }
    for (int i = 0; i < n; ++i) m.cost += cost[i * n + m.assignment[i]];
    return m;
}

std::vector<int> fps(const geom::PointCloud& s, std::size_t k, std::size_t start) {
    if (k < 1 || k > s.size()) throw BadK("fps: k out of range");
    if (start >= s.size()) throw BadK("fps: start out of range");
    std::vector<int> picked;
    picked.reserve(k);
    picked.push_back(static_cast<int>(start));
    std::vector<double> mind(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) mind[i] = sqdist(s[i], s[start]);
    while (picked.size() < k) {
        std::size_t best = 0;
        double bestd = -1.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (mind[i] > bestd) {  // strict: ties keep the lowest index
                bestd = mind[i];
                best = i;
            }
        }
        picked.push_back(static_cast<int>(best));
        for (std::size_t i = 0; i < s.size(); ++i)
            mind[i] = std::min(mind[i], sqdist(s[i], s[best]));
    }
    return picked;
}

std::size_t fps_default_start(const geom::PointCloud& s) {
    if (s.empty()) throw EmptyCloud("fps_default_start: empty cloud");
    geom::Point3 c = s.centroid();
    std::size_t best = 0;
    double bestd = -1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double d = sqdist(s[i], c);
        if (d > bestd) {
            bestd = d;
            best = i;
        }
    }
    return best;
}

double fps_cd(const geom::PointCloud& pred, const geom::PointCloud& gt) {
    if (pred.empty() || gt.empty()) throw EmptyCloud("fps_cd: empty cloud");
    const geom::PointCloud* a = &pred;
    const geom::PointCloud* b = &gt;
    geom::PointCloud down;
    if (pred.size() > gt.size()) {
        auto idx = fps(pred, gt.size(), fps_default_start(pred));
        for (int i : idx) down.points.push_back(pred[i]);
        a = &down;
    } else if (gt.size() > pred.size()) {
        auto idx = fps(gt, pred.size(), fps_default_start(gt));
        for (int i : idx) down.points.push_back(gt[i]);
        b = &down;
    }
    auto [d12, d21] = chamfer(*a, *b);
    return d12 + d21;
}

MetricReport make_report(const geom::PointCloud& pred, const geom::PointCloud& gt) {
    MetricReport r;
    auto [g2p, p2g] = chamfer(gt, pred);
    r.gt_to_pred = g2p;
    r.pred_to_gt = p2g;
    r.cd = g2p + p2g;
    r.norm_cd = g2p / static_cast<double>(gt.size()) + p2g / static_cast<double>(pred.size());
    r.fps_cd = fps_cd(pred, gt);
    return r;
}

std::string report_csv_header() {
    return "shape_id,gt_to_pred,pred_to_gt,cd_x100,norm_cd_x100,fps_cd_x100";
}

std::string report_csv_row(const std::string& shape_id, const MetricReport& r) {
    std::ostringstream ss;
    ss.precision(17);
    ss << shape_id << "," << r.gt_to_pred << "," << r.pred_to_gt << ","
       << r.cd * 100.0 << "," << r.norm_cd * 100.0 << "," << r.fps_cd * 100.0;
    return ss.str();
}

}  // namespace mvs::metrics
