#include "mvs/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mvs::render {

DepthMap render_depth(const geom::PointCloud& pc, const geom::Camera& cam) {
    DepthMap dm(cam.width, cam.height);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        geom::Point3 pcam = cam.to_camera(pc[i]);
        if (pcam.z <= 1e-12) continue;  // behind or on the camera plane
        double u = cam.fx * pcam.x / pcam.z + cam.cx;
        double v = cam.fy * pcam.y / pcam.z + cam.cy;
        int px = static_cast<int>(std::floor(u));
        int py = static_cast<int>(std::floor(v));
        if (px < 0 || px >= dm.width || py < 0 || py >= dm.height) continue;
        std::size_t at = dm.idx(px, py);
        if (dm.contributor[at] == DepthMap::kNone || pcam.z < dm.depth[at]) {
            dm.depth[at] = pcam.z;
            dm.contributor[at] = static_cast<int>(i);
        }
        // equal depth keeps the earlier (lower) index
    }
    return dm;
}

ViewSampleResult view_based_sample(const geom::PointCloud& pc, const geom::Camera& cam) {
    DepthMap dm = render_depth(pc, cam);
    std::vector<char> in_front(pc.size(), 0);
    for (int c : dm.contributor)
        if (c != DepthMap::kNone) in_front[c] = 1;
    ViewSampleResult res;
    for (std::size_t i = 0; i < pc.size(); ++i) {
        if (in_front[i])
            res.front_indices.push_back(static_cast<int>(i));
        else
            res.back_indices.push_back(static_cast<int>(i));
    }
    return res;
}

geom::PointCloud inverse_project(const DepthMap& dm, const geom::Camera& cam) {
    geom::PointCloud pc;
    for (int y = 0; y < dm.height; ++y) {
        for (int x = 0; x < dm.width; ++x) {
            if (!dm.occupied(x, y)) continue;
            double z = dm.depth[dm.idx(x, y)];
            double u = x + 0.5, v = y + 0.5;  // pixel center
            geom::Point3 pcam{(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z};
            pc.points.push_back(cam.to_world(pcam));
        }
    }
    return pc;
}

void save_pgm(const DepthMap& dm, const std::string& path, double z_min, double z_max) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_pgm: cannot open " + path);
    f << "P5\n# zrange " << z_min << " " << z_max << "\n"
      << dm.width << " " << dm.height << "\n65535\n";
    double span = std::max(z_max - z_min, 1e-12);
    for (std::size_t i = 0; i < dm.depth.size(); ++i) {
        unsigned val = 0;
        if (dm.contributor[i] != DepthMap::kNone) {
            double t = std::clamp((dm.depth[i] - z_min) / span, 0.0, 1.0);
            val = 1 + static_cast<unsigned>(std::lround(t * 65534.0));
        }
        unsigned char hi = static_cast<unsigned char>(val >> 8);
        unsigned char lo = static_cast<unsigned char>(val & 0xff);
        f.put(static_cast<char>(hi));
        f.put(static_cast<char>(lo));
    }
    if (!f) throw IoError("save_pgm: write failed for " + path);
}

DepthMap load_pgm(const std::string& path, double* z_min, double* z_max) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_pgm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw IoError("load_pgm: not a P5 PGM: " + path);
    double zmin = 0.0, zmax = 1.0;
    // optional "# zrange a b" comments between header tokens
    auto skip_comments = [&]() {
        f >> std::ws;
        while (f.peek() == '#') {
            std::string word;
            f >> word;  // '#'... read marker then inspect
            if (word == "#") f >> word;
            else word = word.substr(1);
            if (word == "zrange") {
                f >> zmin >> zmax;
            }
            std::string rest;
            std::getline(f, rest);
            f >> std::ws;
        }
    };
    skip_comments();
    int w, h, maxval;
    f >> w;
    skip_comments();
    f >> h;
    skip_comments();
    f >> maxval;
    if (maxval != 65535) throw IoError("load_pgm: expected 16-bit PGM: " + path);
    f.get();  // single whitespace before raster
    DepthMap dm(w, h);
    double span = zmax - zmin;
    for (std::size_t i = 0; i < dm.depth.size(); ++i) {
        int hi = f.get(), lo = f.get();
        if (hi < 0 || lo < 0) throw IoError("load_pgm: truncated raster: " + path);
        unsigned val = (static_cast<unsigned>(hi) << 8) | static_cast<unsigned>(lo);
        if (val > 0) {
            dm.depth[i] = zmin + (val - 1) / 65534.0 * span;
            dm.contributor[i] = 0;  // contributor identity is not persisted
        }
    }
    if (z_min) *z_min = zmin;
    if (z_max) *z_max = zmax;
    return dm;
}

}  // namespace mvs::render
