#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvs/error.hpp"
#include "mvs/rng.hpp"

namespace mvs::geom {

struct DegenerateDepth : Error {
    using Error::Error;
};

struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Point3() = default;
    Point3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Point3 operator*(double s) const { return {x * s, y * s, z * s}; }

    double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
    Point3 cross(const Point3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double squared_norm() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(squared_norm()); }
    Point3 normalized() const {
        double n = norm();
        return {x / n, y / n, z / n};
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

// Ordered point set in canonical object coordinates. Order matters only for
// indexing and EMD matchings.
struct PointCloud {
    std::vector<Point3> points;

    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const Point3& operator[](std::size_t i) const { return points[i]; }
    Point3& operator[](std::size_t i) { return points[i]; }

    Point3 centroid() const;
};

// Pinhole camera, world -> camera convention: p_cam = R * p_world + t.
// Image x right, y down, z forward.
struct Camera {
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
    std::array<double, 3> translation{0, 0, 0};
    double fx = 64.0, fy = 64.0;
    double cx = 32.0, cy = 32.0;
    int width = 64, height = 64;

    Point3 to_camera(const Point3& p) const {
        const auto& R = rotation;
        return {R[0] * p.x + R[1] * p.y + R[2] * p.z + translation[0],
                R[3] * p.x + R[4] * p.y + R[5] * p.z + translation[1],
                R[6] * p.x + R[7] * p.y + R[8] * p.z + translation[2]};
    }
    Point3 to_world(const Point3& pc) const {
        const auto& R = rotation;
        double x = pc.x - translation[0];
        double y = pc.y - translation[1];
        double z = pc.z - translation[2];
        return {R[0] * x + R[3] * y + R[6] * z,
                R[1] * x + R[4] * y + R[7] * z,
                R[2] * x + R[5] * y + R[8] * z};
    }

    // rotation orthonormal within tol, det +1, sane image size
    bool valid(double tol = 1e-9) const;
};

struct Projection {
    double u, v, depth;
};

// Camera ring configuration: uniform azimuths with a random global phase,
// per-view elevation drawn from longitudinal_range (degrees).
struct ViewRing {
    int view_count = 8;
    double longitudinal_min_deg = -20.0;
    double longitudinal_max_deg = 40.0;
    double radius = 2.2;
    std::uint64_t seed = 0;
};

struct Intrinsics {
    double fx = 64.0, fy = 64.0;
    int width = 64, height = 64;
};

Projection project(const Point3& p, const Camera& cam);

// Camera at spherical position (radius, azimuth, elevation) looking at the
// origin, world +y up.
Camera look_at_origin(double radius, double azimuth_rad, double elevation_rad,
                      const Intrinsics& intr = {});

std::vector<Camera> sample_view_ring(const ViewRing& ring, Rng& rng,
                                     const Intrinsics& intr = {});

PointCloud transform_to_camera(const PointCloud& pc, const Camera& cam);

// ASCII or binary (little-endian doubles) PLY persistence
void save_ply(const PointCloud& pc, const std::string& path, bool binary = false);
PointCloud load_ply(const std::string& path);

// plain-text key-value camera block
void save_camera(const Camera& cam, const std::string& path);
Camera load_camera(const std::string& path);

}  // namespace mvs::geom
