#include "mvs/geom.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace mvs::geom {

Point3 PointCloud::centroid() const {
    Point3 c;
    for (const auto& p : points) c = c + p;
    double n = points.empty() ? 1.0 : static_cast<double>(points.size());
    return c * (1.0 / n);
}

bool Camera::valid(double tol) const {
    if (width < 1 || height < 1) return false;
    const auto& R = rotation;
    // R * R^T == I
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += R[i * 3 + k] * R[j * 3 + k];
            double want = (i == j) ? 1.0 : 0.0;
            if (std::abs(s - want) > tol) return false;
        }
    }
    double det = R[0] * (R[4] * R[8] - R[5] * R[7]) -
                 R[1] * (R[3] * R[8] - R[5] * R[6]) +
                 R[2] * (R[3] * R[7] - R[4] * R[6]);
    return std::abs(det - 1.0) <= 1e-6;
}

Projection project(const Point3& p, const Camera& cam) {
    Point3 pc = cam.to_camera(p);
    if (std::abs(pc.z) < 1e-12)
        throw DegenerateDepth("project: camera-space depth is degenerate");
    return {cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy, pc.z};
}

Camera look_at_origin(double radius, double azimuth_rad, double elevation_rad,
                      const Intrinsics& intr) {
    double ce = std::cos(elevation_rad), se = std::sin(elevation_rad);
    double ca = std::cos(azimuth_rad), sa = std::sin(azimuth_rad);
    Point3 pos{radius * sa * ce, radius * se, radius * ca * ce};

    Point3 zc = (Point3{0, 0, 0} - pos).normalized();  // forward, toward origin
    Point3 up{0, 1, 0};
    Point3 xc = zc.cross(up);
    if (xc.norm() < 1e-9) xc = Point3{1, 0, 0};  // looking straight up/down
    xc = xc.normalized();
    Point3 yc = zc.cross(xc);  // image y points down in world

    Camera cam;
    cam.rotation = {xc.x, xc.y, xc.z, yc.x, yc.y, yc.z, zc.x, zc.y, zc.z};
    cam.translation = {-(xc.dot(pos)), -(yc.dot(pos)), -(zc.dot(pos))};
    cam.fx = intr.fx;
    cam.fy = intr.fy;
    cam.width = intr.width;
    cam.height = intr.height;
    cam.cx = intr.width / 2.0;
    cam.cy = intr.height / 2.0;
    return cam;
}

std::vector<Camera> sample_view_ring(const ViewRing& ring, Rng& rng,
                                     const Intrinsics& intr) {
    if (ring.view_count < 1) throw Error("sample_view_ring: view_count < 1");
    if (ring.longitudinal_min_deg > ring.longitudinal_max_deg)
        throw Error("sample_view_ring: bad longitudinal range");

    const double deg = M_PI / 180.0;
    // random global phase keeps azimuths uniformly spaced while avoiding
    // axis-aligned degeneracy across shapes
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    std::vector<Camera> cams;
    cams.reserve(ring.view_count);
    for (int k = 0; k < ring.view_count; ++k) {
        double az = phase + 2.0 * M_PI * k / ring.view_count;
        double el = rng.uniform(ring.longitudinal_min_deg, ring.longitudinal_max_deg) * deg;
        cams.push_back(look_at_origin(ring.radius, az, el, intr));
    }
    return cams;
}

PointCloud transform_to_camera(const PointCloud& pc, const Camera& cam) {
    PointCloud out;
    out.points.reserve(pc.size());
    for (const auto& p : pc.points) out.points.push_back(cam.to_camera(p));
    return out;
}

void save_ply(const PointCloud& pc, const std::string& path, bool binary) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError("save_ply: cannot open " + path);
    f << "ply\n"
      << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n")
      << "element vertex " << pc.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "end_header\n";
    if (binary) {
        for (const auto& p : pc.points) {
            double v[3] = {p.x, p.y, p.z};
            f.write(reinterpret_cast<const char*>(v), sizeof(v));
        }
    } else {
        f.precision(17);
        for (const auto& p : pc.points)
            f << p.x << " " << p.y << " " << p.z << "\n";
    }
    if (!f) throw IoError("save_ply: write failed for " + path);
}

PointCloud load_ply(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_ply: cannot open " + path);
    std::string line;
    bool binary = false;
    std::size_t count = 0;
    if (!std::getline(f, line) || line != "ply")
        throw IoError("load_ply: not a PLY file: " + path);
    while (std::getline(f, line)) {
        if (line == "end_header") break;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "format") {
            std::string fmt;
            ss >> fmt;
            binary = (fmt == "binary_little_endian");
        } else if (tok == "element") {
            std::string name;
            ss >> name >> count;
            if (name != "vertex") throw IoError("load_ply: unsupported element " + name);
        }
    }
    PointCloud pc;
    pc.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Point3 p;
        if (binary) {
            double v[3];
            f.read(reinterpret_cast<char*>(v), sizeof(v));
            p = {v[0], v[1], v[2]};
        } else {
            f >> p.x >> p.y >> p.z;
        }
        if (!f) throw IoError("load_ply: truncated file " + path);
        pc.points.push_back(p);
    }
    return pc;
}

void save_camera(const Camera& cam, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("save_camera: cannot open " + path);
    f.precision(17);
    f << "rotation";
    for (double r : cam.rotation) f << " " << r;
    f << "\ntranslation";
    for (double t : cam.translation) f << " " << t;
    f << "\nfx " << cam.fx << "\nfy " << cam.fy
      << "\ncx " << cam.cx << "\ncy " << cam.cy
      << "\nwidth " << cam.width << "\nheight " << cam.height << "\n";
    if (!f) throw IoError("save_camera: write failed for " + path);
}

Camera load_camera(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("load_camera: cannot open " + path);
    Camera cam;
    std::string key;
    while (f >> key) {
        if (key == "rotation") {
            for (double& r : cam.rotation) f >> r;
        } else if (key == "translation") {
            for (double& t : cam.translation) f >> t;
        } else if (key == "fx") f >> cam.fx;
        else if (key == "fy") f >> cam.fy;
        else if (key == "cx") f >> cam.cx;
        else if (key == "cy") f >> cam.cy;
        else if (key == "width") f >> cam.width;
        else if (key == "height") f >> cam.height;
        else throw IoError("load_camera: unknown key " + key + " in " + path);
    }
    return cam;
}

}  // namespace mvs::geom
