#pragma once

#include <string>
#include <vector>

#include "mvs/geom.hpp"

namespace mvs::render {

// Z-buffered point splat. Pixels without a contributor hold NONE/EMPTY.
struct DepthMap {
    static constexpr int kNone = -1;

    int width = 0, height = 0;
    std::vector<double> depth;     // camera-space z, valid iff contributor set
    std::vector<int> contributor;  // point index or kNone

    DepthMap() = default;
    DepthMap(int w, int h)
        : width(w), height(h),
          depth(static_cast<std::size_t>(w) * h, 0.0),
          contributor(static_cast<std::size_t>(w) * h, kNone) {}

    bool occupied(int x, int y) const { return contributor[idx(x, y)] != kNone; }
    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
    bool operator==(const DepthMap& o) const = default;
};

// Indices of points that win a pixel depth test (the front part) and the rest.
struct ViewSampleResult {
    std::vector<int> front_indices;  // ascending
    std::vector<int> back_indices;   // ascending complement
};

// Splat each point to its containing pixel; minimum depth wins, ties break to
// the lower point index. Points behind the camera or outside the frustum are
// ignored.
DepthMap render_depth(const geom::PointCloud& pc, const geom::Camera& cam);

ViewSampleResult view_based_sample(const geom::PointCloud& pc, const geom::Camera& cam);

// One world-space point per occupied pixel, through the pixel center.
geom::PointCloud inverse_project(const DepthMap& dm, const geom::Camera& cam);

// 16-bit PGM, linear depth over [z_min, z_max] mapped to [1, 65535], EMPTY = 0.
// The z-range is recorded in a header comment.
void save_pgm(const DepthMap& dm, const std::string& path, double z_min, double z_max);
DepthMap load_pgm(const std::string& path, double* z_min = nullptr, double* z_max = nullptr);

}  // namespace mvs::render
