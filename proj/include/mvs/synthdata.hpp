#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvs/autodiff.hpp"
#include "mvs/geom.hpp"
#include "mvs/render.hpp"

namespace mvs::synthdata {

struct BadSpec : Error {
    using Error::Error;
};

enum class Family { Chairlike, Boxcar, Tee };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Procedural shape recipe. The occluded latent (arm_present for chairlike,
// body_length for boxcar/tee) is invisible from the canonical camera, which
// is what makes single-view reconstruction ambiguous on this corpus.
struct ShapeSpec {
    Family family = Family::Boxcar;
    bool symmetric = true;      // all families are x-mirror symmetric;
                                // make_shape rejects false
    bool arm_present = true;    // chairlike: arm boxes vs a hidden crossbar
    double back_height = 0.5;   // chairlike back slab top
    double body_length = 0.4;   // boxcar body / tee stem depth
    int sample_count = 64;
    std::uint64_t seed = 0;
};

// The front-ambiguity verification camera: on the view ring at azimuth 0,
// elevation 0, coarse enough that stratified occluder samples cover every
// pixel the hidden part can reach.
geom::Camera canonical_camera(double radius = 2.2);

geom::PointCloud make_shape(const ShapeSpec& spec);

ShapeSpec random_spec(Family family, Rng& rng, int sample_count = 64);

// Two specs equal in everything except the occluded latent. Their canonical
// renders are bit-identical while the full clouds differ.
std::pair<ShapeSpec, ShapeSpec> ambiguity_pair(Family family, Rng& rng,
                                               int sample_count = 64);

// generation-time check for the pair above; throws BadSpec on violation
void verify_ambiguity_pair(const ShapeSpec& a, const ShapeSpec& b,
                           double min_cd_x100);

double ambiguity_cd_floor_x100(Family family);

struct ViewRecord {
    geom::Camera cam;
    ad::Tensor image;  // (1, img_w*img_h) normalized nearness, from the PGM
    std::vector<int> front_indices;
    std::string pgm_file, cam_file, idx_file;
};

struct DatasetRecord {
    std::string shape_id;
    Family family = Family::Boxcar;
    bool train_split = true;
    geom::PointCloud gt;
    std::vector<ViewRecord> views;
    std::string ply_file;
};

struct Dataset {
    std::vector<DatasetRecord> records;
    std::vector<const DatasetRecord*> split(bool train) const;
};

// Writes per-shape PLY + per-view PGM/camera/front-index files plus
// manifest.txt (tab-separated: shape_id, family, split, files). 80/20
// train/test split by seeded shuffle. Each family contributes verified
// ambiguity pairs.
void build_dataset(int n_shapes, const std::vector<Family>& families,
                   const geom::ViewRing& ring, const std::string& out_dir);

Dataset load_dataset(const std::string& dir, int img_w = 16, int img_h = 16);

// PGM depth normalization range used for all dataset renders
std::pair<double, double> depth_range(double radius);

}  // namespace mvs::synthdata
