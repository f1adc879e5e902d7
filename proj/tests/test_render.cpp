#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mvs/render.hpp"

using namespace mvs;

namespace {

geom::PointCloud random_cloud(std::size_t n, Rng& rng, double scale = 0.5) {
    geom::PointCloud pc;
    for (std::size_t i = 0; i < n; ++i)
        pc.points.emplace_back(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                               rng.uniform(-scale, scale));
    return pc;
}

// independent per-pixel min-depth oracle
render::DepthMap depth_oracle(const geom::PointCloud& pc, const geom::Camera& cam) {
    render::DepthMap dm(cam.width, cam.height);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        auto pcam = cam.to_camera(pc[i]);
        if (pcam.z <= 1e-12) continue;
        double u = cam.fx * pcam.x / pcam.z + cam.cx;
        double v = cam.fy * pcam.y / pcam.z + cam.cy;
        int px = static_cast<int>(std::floor(u));
        int py = static_cast<int>(std::floor(v));
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
        auto k = dm.idx(px, py);
        if (dm.contributor[k] == render::DepthMap::kNone || pcam.z < dm.depth[k]) {
            dm.contributor[k] = static_cast<int>(i);
            dm.depth[k] = pcam.z;
        }
    }
    return dm;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("single point lands in one pixel") {
    geom::Camera cam = geom::look_at_origin(2.2, 0.0, 0.0);
    geom::PointCloud pc({{0, 0, 0}});
    auto dm = render::render_depth(pc, cam);
    int occupied = 0;
    for (int c : dm.contributor)
        if (c != render::DepthMap::kNone) ++occupied;
    CHECK(occupied == 1);
    CHECK(dm.occupied(32, 32));
    CHECK(dm.depth[dm.idx(32, 32)] == doctest::Approx(2.2));
}

TEST_CASE("points behind the camera are skipped") {
    geom::Camera cam;  // identity: points with z<=0 are behind
    geom::PointCloud pc({{0, 0, -1.0}, {0, 0, 0.0}});
    auto dm = render::render_depth(pc, cam);
    for (int c : dm.contributor) CHECK(c == render::DepthMap::kNone);
}

TEST_CASE("depth tie breaks to the lower point index") {
    geom::Camera cam;
    geom::PointCloud pc({{0.001, 0.001, 2.0}, {0.002, 0.002, 2.0}});
    auto dm = render::render_depth(pc, cam);
    auto vs = render::view_based_sample(pc, cam);
    CHECK(vs.front_indices == std::vector<int>{0});
    CHECK(vs.back_indices == std::vector<int>{1});
    (void)dm;
}

TEST_CASE("contributors equal brute-force oracle on 100 random scenes") {
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        auto cam = geom::look_at_origin(2.2, rng.uniform(0, 2 * M_PI),
                                        rng.uniform(-0.6, 0.6));
        auto pc = random_cloud(1 + rng.uniform_int(0, 199), rng);
        auto got = render::render_depth(pc, cam);
        auto want = depth_oracle(pc, cam);
        CHECK(got == want);
    }
}

TEST_CASE("front and back indices partition the visible cloud") {
    Rng rng(405);
    auto cam = geom::look_at_origin(2.2, 0.3, 0.1);
    auto pc = random_cloud(120, rng);
    auto vs = render::view_based_sample(pc, cam);
    std::vector<bool> seen(pc.size(), false);
    for (int i : vs.front_indices) seen[i] = true;
    for (int i : vs.back_indices) {
        CHECK_FALSE(seen[i]);
        seen[i] = true;
    }
    for (bool b : seen) CHECK(b);
    CHECK(std::is_sorted(vs.front_indices.begin(), vs.front_indices.end()));
    CHECK(std::is_sorted(vs.back_indices.begin(), vs.back_indices.end()));
}

TEST_CASE("re-rendering only the front part reproduces the depth map") {
    Rng rng(406);
    for (int trial = 0; trial < 20; ++trial) {
        auto cam = geom::look_at_origin(2.2, rng.uniform(0, 2 * M_PI),
                                        rng.uniform(-0.3, 0.6));
        auto pc = random_cloud(150, rng);
        auto dm = render::render_depth(pc, cam);
        auto vs = render::view_based_sample(pc, cam);
        geom::PointCloud front;
        for (int i : vs.front_indices) front.points.push_back(pc[i]);
        auto dm2 = render::render_depth(front, cam);
        REQUIRE(dm.depth.size() == dm2.depth.size());
        for (std::size_t k = 0; k < dm.depth.size(); ++k) {
            CHECK((dm.contributor[k] == render::DepthMap::kNone) ==
                  (dm2.contributor[k] == render::DepthMap::kNone));
            if (dm.contributor[k] != render::DepthMap::kNone)
                CHECK(dm.depth[k] == doctest::Approx(dm2.depth[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("inverse projection re-renders to the same occupancy and depth") {
    Rng rng(407);
    auto cam = geom::look_at_origin(2.2, 1.0, 0.2);
    auto pc = random_cloud(80, rng);
    auto dm = render::render_depth(pc, cam);
    auto world = render::inverse_project(dm, cam);
    auto dm2 = render::render_depth(world, cam);
    int occ = 0;
    for (std::size_t k = 0; k < dm.depth.size(); ++k) {
        if (dm.contributor[k] == render::DepthMap::kNone) continue;
        ++occ;
        REQUIRE(dm2.contributor[k] != render::DepthMap::kNone);
        CHECK(dm2.depth[k] == doctest::Approx(dm.depth[k]).epsilon(1e-9));
    }
    CHECK(static_cast<int>(world.size()) == occ);
}

TEST_CASE("pgm round-trip preserves occupancy and quantized depth") {
    Rng rng(408);
    auto cam = geom::look_at_origin(2.2, 0.5, 0.1);
    auto pc = random_cloud(100, rng);
    auto dm = render::render_depth(pc, cam);
    double zn = 1.3, zf = 3.1;
    auto path = tmp_path("t_render.pgm");
    render::save_pgm(dm, path, zn, zf);
    double rn = 0, rf = 0;
    auto back = render::load_pgm(path, &rn, &rf);
    CHECK(rn == doctest::Approx(zn));
    CHECK(rf == doctest::Approx(zf));
    REQUIRE(back.width == dm.width);
    REQUIRE(back.height == dm.height);
    double step = (zf - zn) / 65534.0;
    for (std::size_t k = 0; k < dm.depth.size(); ++k) {
        CHECK((back.contributor[k] == render::DepthMap::kNone) ==
              (dm.contributor[k] == render::DepthMap::kNone));
        if (dm.contributor[k] != render::DepthMap::kNone)
            CHECK(std::abs(back.depth[k] - dm.depth[k]) <= step);
    }
    // quantization is idempotent: saving the loaded map reproduces the bytes
    auto path2 = tmp_path("t_render2.pgm");
    render::save_pgm(back, path2, zn, zf);
    auto again = render::load_pgm(path2);
    CHECK(again.depth == back.depth);
    CHECK(again.contributor == back.contributor);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("empty cloud renders an empty map") {
    geom::Camera cam;
    auto dm = render::render_depth(geom::PointCloud{}, cam);
    for (int c : dm.contributor) CHECK(c == render::DepthMap::kNone);
}
