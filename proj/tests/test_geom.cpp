#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mvs/geom.hpp"

using namespace mvs;

namespace {

geom::PointCloud random_cloud(std::size_t n, Rng& rng) {
    geom::PointCloud pc;
    for (std::size_t i = 0; i < n; ++i)
        pc.points.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                               rng.uniform(-0.5, 0.5));
    return pc;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("point algebra") {
    geom::Point3 a(1, 2, 3), b(4, 5, 6);
    CHECK((a + b).x == 5);
    CHECK((b - a).z == 3);
    CHECK((a * 2).y == 4);
    CHECK(a.dot(b) == doctest::Approx(32));
    auto c = geom::Point3(1, 0, 0).cross({0, 1, 0});
    CHECK(c.x == 0);
    CHECK(c.y == 0);
    CHECK(c.z == 1);
    CHECK(geom::Point3(3, 4, 0).norm() == doctest::Approx(5));
    CHECK(geom::Point3(0, 0, 9).normalized().z == doctest::Approx(1));
}

TEST_CASE("centroid") {
    geom::PointCloud pc({{0, 0, 0}, {2, 4, 6}});
    auto c = pc.centroid();
    CHECK(c.x == 1);
    CHECK(c.y == 2);
    CHECK(c.z == 3);
}

TEST_CASE("look_at_origin produces a valid camera seeing the origin") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        double az = rng.uniform(0, 2 * M_PI);
        double el = rng.uniform(-M_PI / 3, M_PI / 3);
        auto cam = geom::look_at_origin(2.2, az, el);
        CHECK(cam.valid());
        auto o = cam.to_camera({0, 0, 0});
        CHECK(o.x == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(o.y == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(o.z == doctest::Approx(2.2));
        // projection of the origin hits the principal point
        auto pr = geom::project({0, 0, 0}, cam);
        CHECK(pr.u == doctest::Approx(cam.cx));
        CHECK(pr.v == doctest::Approx(cam.cy));
    }
}

TEST_CASE("to_camera and to_world are inverse") {
    Rng rng(13);
    auto cam = geom::look_at_origin(2.2, 0.7, 0.2);
    for (int i = 0; i < 20; ++i) {
        geom::Point3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        auto q = cam.to_world(cam.to_camera(p));
        CHECK(q.x == doctest::Approx(p.x).epsilon(1e-12));
        CHECK(q.y == doctest::Approx(p.y).epsilon(1e-12));
        CHECK(q.z == doctest::Approx(p.z).epsilon(1e-12));
    }
}

TEST_CASE("camera validity rejects bad rotations") {
    geom::Camera cam;
    CHECK(cam.valid());
    cam.rotation[0] = 2.0;  // not orthonormal
    CHECK_FALSE(cam.valid());
    geom::Camera refl;
    refl.rotation = {-1, 0, 0, 0, 1, 0, 0, 0, 1};  // det -1
    CHECK_FALSE(refl.valid());
    geom::Camera tiny = geom::look_at_origin(2.2, 0.1, 0.1);
    tiny.width = 0;
    CHECK_FALSE(tiny.valid());
}

TEST_CASE("project known point and degenerate depth") {
    geom::Camera cam;  // identity pose, fx=fy=64, cx=cy=32
    auto pr = geom::project({0.5, 0.25, 2.0}, cam);
    CHECK(pr.u == doctest::Approx(32 + 64 * 0.25));
    CHECK(pr.v == doctest::Approx(32 + 64 * 0.125));
    CHECK(pr.depth == doctest::Approx(2.0));
    CHECK_THROWS_AS(geom::project({0, 0, 0}, cam), geom::DegenerateDepth);
}

TEST_CASE("sample_view_ring structure") {
    geom::ViewRing ring;
    ring.seed = 99;
    Rng rng(ring.seed);
    auto cams = geom::sample_view_ring(ring, rng);
    REQUIRE(cams.size() == 8);
    double el_min = ring.longitudinal_min_deg * M_PI / 180.0;
    double el_max = ring.longitudinal_max_deg * M_PI / 180.0;
    std::vector<double> azimuths;
    for (const auto& cam : cams) {
        CHECK(cam.valid());
        geom::Point3 eye = cam.to_world({0, 0, 0});
        CHECK(eye.norm() == doctest::Approx(ring.radius));
        double el = std::asin(eye.y / eye.norm());
        CHECK(el >= el_min - 1e-9);
        CHECK(el <= el_max + 1e-9);
        azimuths.push_back(std::atan2(eye.x, eye.z));
    }
    // azimuths uniformly spaced by 2*pi/8 up to the shared random phase
    for (std::size_t i = 1; i < azimuths.size(); ++i) {
        double d = azimuths[i] - azimuths[i - 1];
        while (d < 0) d += 2 * M_PI;
        CHECK(d == doctest::Approx(2 * M_PI / 8).epsilon(1e-9));
    }

    Rng rng2(ring.seed);
    auto again = geom::sample_view_ring(ring, rng2);
    for (std::size_t i = 0; i < cams.size(); ++i) {
        CHECK(cams[i].rotation == again[i].rotation);
        CHECK(cams[i].translation == again[i].translation);
    }
}

TEST_CASE("transform_to_camera matches per-point transform") {
    Rng rng(21);
    auto cam = geom::look_at_origin(2.2, 1.1, -0.2);
    auto pc = random_cloud(10, rng);
    auto tc = geom::transform_to_camera(pc, cam);
    REQUIRE(tc.size() == pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) {
        auto want = cam.to_camera(pc[i]);
        CHECK(tc[i].x == doctest::Approx(want.x));
        CHECK(tc[i].y == doctest::Approx(want.y));
        CHECK(tc[i].z == doctest::Approx(want.z));
    }
}

TEST_CASE("ply round-trip ascii and binary") {
    Rng rng(31);
    auto pc = random_cloud(17, rng);
    for (bool binary : {false, true}) {
        auto path = tmp_path(binary ? "t_geom_b.ply" : "t_geom_a.ply");
        geom::save_ply(pc, path, binary);
        auto back = geom::load_ply(path);
        REQUIRE(back.size() == pc.size());
        for (std::size_t i = 0; i < pc.size(); ++i) {
            CHECK(back[i].x == doctest::Approx(pc[i].x).epsilon(1e-15));
            CHECK(back[i].y == doctest::Approx(pc[i].y).epsilon(1e-15));
            CHECK(back[i].z == doctest::Approx(pc[i].z).epsilon(1e-15));
        }
        std::remove(path.c_str());
    }
    CHECK_THROWS_AS(geom::load_ply("/nonexistent/x.ply"), IoError);
}

TEST_CASE("camera file round-trip") {
    auto cam = geom::look_at_origin(2.2, 0.4, 0.3);
    auto path = tmp_path("t_geom.cam");
    geom::save_camera(cam, path);
    auto back = geom::load_camera(path);
    for (int i = 0; i < 9; ++i)
        CHECK(back.rotation[i] == doctest::Approx(cam.rotation[i]).epsilon(1e-15));
    for (int i = 0; i < 3; ++i)
        CHECK(back.translation[i] == doctest::Approx(cam.translation[i]).epsilon(1e-15));
    CHECK(back.fx == cam.fx);
    CHECK(back.width == cam.width);
    CHECK(back.valid());
    std::remove(path.c_str());
}
