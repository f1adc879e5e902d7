#include "mvs/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvs/metrics.hpp"
#include "mvs/model.hpp"

namespace mvs::synthdata {

namespace fs = std::filesystem;

std::string family_name(Family f) {
    switch (f) {
        case Family::Chairlike: return "chairlike";
        case Family::Boxcar: return "boxcar";
        case Family::Tee: return "tee";
    }
    throw BadSpec("unknown family");
}

Family family_from_name(const std::string& name) {
    if (name == "chairlike") return Family::Chairlike;
    if (name == "boxcar") return Family::Boxcar;
    if (name == "tee") return Family::Tee;
    throw BadSpec("unknown family name: " + name);
}

geom::Camera canonical_camera(double radius) {
    geom::Intrinsics intr;
    intr.fx = intr.fy = 16.0;
    intr.width = intr.height = 16;
    return geom::look_at_origin(radius, 0.0, 0.0, intr);
}

std::pair<double, double> depth_range(double radius) {
    return {radius - 0.9, radius + 0.9};
}

namespace {

struct Box {
    geom::Point3 lo, hi;
};

// rectangle at z = z0, the face whose stratified samples occlude the
// family's variable part
struct OccluderFace {
    double z0;
    double xmin, xmax, ymin, ymax;
};

struct FamilyGeometry {
    OccluderFace occluder;
    std::vector<Box> shared;  // identical across an ambiguity pair
    std::vector<Box> hidden;  // depends on the occluded latent
    int hidden_budget = 12;
};

geom::Point3 sample_box_surface(const Box& b, Rng& rng) {
    double dx = b.hi.x - b.lo.x, dy = b.hi.y - b.lo.y, dz = b.hi.z - b.lo.z;
    double axy = dx * dy, axz = dx * dz, ayz = dy * dz;
    double total = 2.0 * (axy + axz + ayz);
    double t = rng.uniform(0.0, total);
    double u = rng.uniform(), v = rng.uniform();
    if (t < axy) return {b.lo.x + u * dx, b.lo.y + v * dy, b.lo.z};
    t -= axy;
    if (t < axy) return {b.lo.x + u * dx, b.lo.y + v * dy, b.hi.z};
    t -= axy;
    if (t < axz) return {b.lo.x + u * dx, b.lo.y, b.lo.z + v * dz};
    t -= axz;
    if (t < axz) return {b.lo.x + u * dx, b.hi.y, b.lo.z + v * dz};
    t -= axz;
    if (t < ayz) return {b.lo.x, b.lo.y + u * dy, b.lo.z + v * dz};
    return {b.hi.x, b.lo.y + u * dy, b.lo.z + v * dz};
}

double box_area(const Box& b) {
    double dx = b.hi.x - b.lo.x, dy = b.hi.y - b.lo.y, dz = b.hi.z - b.lo.z;
    return 2.0 * (dx * dy + dx * dz + dy * dz);
}

FamilyGeometry family_geometry(const ShapeSpec& spec) {
    FamilyGeometry g;
    switch (spec.family) {
        case Family::Boxcar: {
            if (spec.body_length < 0.2 || spec.body_length > 0.7)
                throw BadSpec("boxcar: body_length out of range [0.2, 0.7]");
            Box plate{{-0.35, -0.20, 0.30}, {0.35, 0.20, 0.38}};
            Box body{{-0.22, -0.10, 0.29 - spec.body_length}, {0.22, 0.10, 0.29}};
            g.occluder = {0.38, -0.35, 0.35, -0.20, 0.20};
            g.shared = {plate};
            g.hidden = {body};
            break;
        }
        case Family::Chairlike: {
            if (spec.back_height < 0.4 || spec.back_height > 0.6)
                throw BadSpec("chairlike: back_height out of range [0.4, 0.6]");
            Box slab{{-0.34, -0.10, 0.10}, {0.34, spec.back_height, 0.20}};
            Box seat{{-0.30, -0.15, -0.25}, {0.30, -0.05, 0.10}};
            g.occluder = {0.20, -0.34, 0.34, -0.10, spec.back_height};
            g.shared = {slab, seat};
            for (double sx : {-0.24, 0.24})
                for (double sz : {-0.20, 0.02})
                    g.shared.push_back(Box{{sx - 0.03, -0.45, sz - 0.03},
                                           {sx + 0.03, -0.15, sz + 0.03}});
            if (spec.arm_present) {
                g.hidden.push_back(Box{{0.18, 0.0, -0.20}, {0.28, 0.30, 0.05}});
                g.hidden.push_back(Box{{-0.28, 0.0, -0.20}, {-0.18, 0.30, 0.05}});
            } else {
                g.hidden.push_back(Box{{-0.28, 0.0, -0.05}, {0.28, 0.30, 0.05}});
            }
            break;
        }
        case Family::Tee: {
            if (spec.body_length < 0.2 || spec.body_length > 0.6)
                throw BadSpec("tee: body_length out of range [0.2, 0.6]");
            Box bar{{-0.40, -0.18, 0.27}, {0.40, 0.18, 0.35}};
            Box stem{{-0.12, -0.10, 0.26 - spec.body_length}, {0.12, 0.10, 0.26}};
            g.occluder = {0.35, -0.40, 0.40, -0.18, 0.18};
            g.shared = {bar};
            g.hidden = {stem};
            break;
        }
    }
    return g;
}

// one sample per canonical pixel whose center ray hits the occluder face;
// these points win the depth test against anything hidden behind the face
std::vector<geom::Point3> stratified_occluder_samples(const OccluderFace& face) {
    geom::Camera cam = canonical_camera();
    double d = 2.2 - face.z0;  // constant-depth plane for the axis-aligned camera
    std::vector<geom::Point3> pts;
    for (int py = 0; py < cam.height; ++py) {
        for (int px = 0; px < cam.width; ++px) {
            double u = px + 0.5, v = py + 0.5;
            geom::Point3 w = cam.to_world(
                {(u - cam.cx) / cam.fx * d, (v - cam.cy) / cam.fy * d, d});
            const double inset = 1e-6;
            if (w.x < face.xmin + inset || w.x > face.xmax - inset) continue;
            if (w.y < face.ymin + inset || w.y > face.ymax - inset) continue;
            pts.push_back({w.x, w.y, face.z0});
        }
    }
    return pts;
}

void sample_weighted(const std::vector<Box>& boxes, int count, Rng& rng,
                     std::vector<geom::Point3>& out) {
    std::vector<double> cum;
    double total = 0.0;
    for (const auto& b : boxes) {
        total += box_area(b);
        cum.push_back(total);
    }
    for (int i = 0; i < count; ++i) {
        double t = rng.uniform(0.0, total);
        std::size_t pick = std::lower_bound(cum.begin(), cum.end(), t) - cum.begin();
        if (pick >= boxes.size()) pick = boxes.size() - 1;
        out.push_back(sample_box_surface(boxes[pick], rng));
    }
}

}  // namespace

geom::PointCloud make_shape(const ShapeSpec& spec) {
    if (!spec.symmetric)
        throw BadSpec("make_shape: all families are x-mirror symmetric; "
                      "asymmetric variants are not modeled");
    FamilyGeometry g = family_geometry(spec);
    auto strat = stratified_occluder_samples(g.occluder);
    int n = spec.sample_count;
    int n_strat = static_cast<int>(strat.size());
    int n_hidden = g.hidden_budget;
    int n_shared = n - n_strat - n_hidden;
    if (n_shared < 4)
        throw BadSpec("make_shape: sample_count too small for family budget");

    Rng root(spec.seed);
    Rng shared_rng = root.fork(1);
    Rng hidden_rng = root.fork(2);

    geom::PointCloud pc;
    pc.points = std::move(strat);  // lowest indices: win depth-test ties
    sample_weighted(g.shared, n_shared, shared_rng, pc.points);
    sample_weighted(g.hidden, n_hidden, hidden_rng, pc.points);
    return pc;
}

ShapeSpec random_spec(Family family, Rng& rng, int sample_count) {
    ShapeSpec s;
    s.family = family;
    s.sample_count = sample_count;
    s.seed = rng.next_u64();
    s.back_height = rng.uniform(0.45, 0.55);
    switch (family) {
        case Family::Boxcar: s.body_length = rng.uniform(0.25, 0.65); break;
        case Family::Tee: s.body_length = rng.uniform(0.25, 0.6); break;
        case Family::Chairlike: s.arm_present = rng.uniform() < 0.5; break;
    }
    return s;
}

std::pair<ShapeSpec, ShapeSpec> ambiguity_pair(Family family, Rng& rng,
                                               int sample_count) {
    ShapeSpec a = random_spec(family, rng, sample_count);
    ShapeSpec b = a;
    switch (family) {
        case Family::Boxcar:
            a.body_length = rng.uniform(0.25, 0.4);
            b.body_length = a.body_length + 0.25;
            break;
        case Family::Tee:
            a.body_length = rng.uniform(0.25, 0.35);
            b.body_length = a.body_length + 0.22;
            break;
        case Family::Chairlike:
            a.arm_present = true;
            b.arm_present = false;
            break;
    }
    return {a, b};
}

double ambiguity_cd_floor_x100(Family family) {
    switch (family) {
        case Family::Boxcar: return 20.0;
        case Family::Chairlike: return 5.0;
        case Family::Tee: return 10.0;
    }
    return 0.0;
}

void verify_ambiguity_pair(const ShapeSpec& a, const ShapeSpec& b,
                           double min_cd_x100) {
    geom::PointCloud ca = make_shape(a), cb = make_shape(b);
    geom::Camera cam = canonical_camera();
    render::DepthMap da = render::render_depth(ca, cam);
    render::DepthMap db = render::render_depth(cb, cam);
    if (!(da == db))
        throw BadSpec("ambiguity pair: canonical renders differ");
    auto [d12, d21] = metrics::chamfer(ca, cb);
    if ((d12 + d21) * 100.0 < min_cd_x100)
        throw BadSpec("ambiguity pair: clouds too close, CDx100 = " +
                      std::to_string((d12 + d21) * 100.0));
}

std::vector<const DatasetRecord*> Dataset::split(bool train) const {
    std::vector<const DatasetRecord*> out;
    for (const auto& r : records)
        if (r.train_split == train) out.push_back(&r);
    return out;
}

void build_dataset(int n_shapes, const std::vector<Family>& families,
                   const geom::ViewRing& ring, const std::string& out_dir) {
    if (n_shapes < 1) throw BadSpec("build_dataset: n_shapes < 1");
    if (families.empty()) throw BadSpec("build_dataset: no families");
    fs::create_directories(out_dir);

    Rng rng(ring.seed);
    Rng spec_rng = rng.fork(1);
    Rng view_rng = rng.fork(2);
    Rng split_rng = rng.fork(3);

    // leading shapes come in verified ambiguity pairs, one pair per family
    std::vector<ShapeSpec> specs;
    std::size_t fam_i = 0;
    if (n_shapes >= 2 * static_cast<int>(families.size())) {
        for (Family f : families) {
            auto [a, b] = ambiguity_pair(f, spec_rng);
            verify_ambiguity_pair(a, b, ambiguity_cd_floor_x100(f));
            specs.push_back(a);
            specs.push_back(b);
        }
    }
    while (static_cast<int>(specs.size()) < n_shapes) {
        specs.push_back(random_spec(families[fam_i % families.size()], spec_rng));
        ++fam_i;
    }
    specs.resize(n_shapes);

    // 80/20 split by seeded shuffle (test count floors, may be empty)
    std::vector<int> order(n_shapes);
    for (int i = 0; i < n_shapes; ++i) order[i] = i;
    for (int i = n_shapes - 1; i > 0; --i)
        std::swap(order[i], order[split_rng.uniform_int(0, i)]);
    int n_test = n_shapes / 5;
    std::vector<char> is_test(n_shapes, 0);
    for (int i = 0; i < n_test; ++i) is_test[order[i]] = 1;

    geom::Intrinsics intr;  // dataset render resolution
    auto [z_near, z_far] = depth_range(ring.radius);

    std::ofstream manifest(fs::path(out_dir) / "manifest.txt");
    if (!manifest) throw IoError("build_dataset: cannot write manifest");
    for (int i = 0; i < n_shapes; ++i) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "shape_%04d", i);
        std::string id = idbuf;
        geom::PointCloud gt = make_shape(specs[i]);

        std::string ply = id + ".ply";
        geom::save_ply(gt, (fs::path(out_dir) / ply).string());

        Rng shape_views = view_rng.fork(static_cast<std::uint64_t>(i) + 1);
        auto cams = geom::sample_view_ring(ring, shape_views, intr);

        std::vector<std::string> files = {ply};
        for (std::size_t v = 0; v < cams.size(); ++v) {
            std::string stem = id + "_view_" + std::to_string(v);
            render::DepthMap dm = render::render_depth(gt, cams[v]);
            render::save_pgm(dm, (fs::path(out_dir) / (stem + ".pgm")).string(),
                             z_near, z_far);
            geom::save_camera(cams[v], (fs::path(out_dir) / (stem + ".cam")).string());
            auto front = render::view_based_sample(gt, cams[v]).front_indices;
            std::ofstream idx(fs::path(out_dir) / (stem + ".idx"));
            for (std::size_t k = 0; k < front.size(); ++k)
                idx << (k ? " " : "") << front[k];
            idx << "\n";
            files.push_back(stem + ".pgm");
            files.push_back(stem + ".cam");
            files.push_back(stem + ".idx");
        }
        manifest << id << "\t" << family_name(specs[i].family) << "\t"
                 << (is_test[i] ? "test" : "train") << "\t";
        for (std::size_t k = 0; k < files.size(); ++k)
            manifest << (k ? ";" : "") << files[k];
        manifest << "\n";
    }
    if (!manifest) throw IoError("build_dataset: manifest write failed");
}

Dataset load_dataset(const std::string& dir, int img_w, int img_h) {
    std::ifstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw IoError("load_dataset: cannot open manifest in " + dir);
    Dataset ds;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        DatasetRecord rec;
        std::string family, split, files;
        if (!std::getline(ss, rec.shape_id, '\t') || !std::getline(ss, family, '\t') ||
            !std::getline(ss, split, '\t') || !std::getline(ss, files))
            throw IoError("load_dataset: malformed manifest line: " + line);
        rec.family = family_from_name(family);
        rec.train_split = (split == "train");

        std::vector<std::string> parts;
        std::istringstream fss(files);
        std::string part;
        while (std::getline(fss, part, ';')) parts.push_back(part);
        if (parts.empty() || (parts.size() - 1) % 3 != 0)
            throw IoError("load_dataset: bad file list for " + rec.shape_id);

        rec.ply_file = parts[0];
        rec.gt = geom::load_ply((fs::path(dir) / parts[0]).string());
        for (std::size_t k = 1; k + 2 < parts.size() + 1; k += 3) {
            ViewRecord vr;
            vr.pgm_file = parts[k];
            vr.cam_file = parts[k + 1];
            vr.idx_file = parts[k + 2];
            double zn = 0.0, zf = 1.0;
            render::DepthMap dm =
                render::load_pgm((fs::path(dir) / vr.pgm_file).string(), &zn, &zf);
            vr.cam = geom::load_camera((fs::path(dir) / vr.cam_file).string());
            vr.image = model::image_from_depth(dm, img_w, img_h, zn, zf);
            std::ifstream idx(fs::path(dir) / vr.idx_file);
            int v;
            while (idx >> v) vr.front_indices.push_back(v);
            rec.views.push_back(std::move(vr));
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace mvs::synthdata
