#pragma once

#include <map>
#include <string>

#include "mvs/autodiff.hpp"
#include "mvs/checkpoint.hpp"
#include "mvs/geom.hpp"
#include "mvs/render.hpp"
#include "mvs/rng.hpp"

namespace mvs::model {

// Desk-scale dimensions. The GAN latent space is the generator's pre-decoder
// concat, so latent_dim() must match the shape-autoencoder bottleneck.
struct ModelConfig {
    int img_w = 16, img_h = 16;
    int n_points = 64;
    int r_dim = 16;   // Gaussian conditioning input
    int zi_dim = 16;  // image code
    int zr_dim = 16;  // noise embedding
    int enc_hidden = 64;
    int dec_hidden = 64;
    int ae_hidden = 32;
    int critic_hidden = 16;

    int img_pixels() const { return img_w * img_h; }
    int latent_dim() const { return zi_dim + zr_dim; }
};

// Node ids of a generator forward pass.
struct GeneratorForward {
    int cloud;   // (N, 3)
    int latent;  // (1, zi+zr), the z fed to the latent-space critic
};

// Parameter leaves registered on a tape. Trainable params get requires_grad
// unless listed in the store's frozen set.
struct TapeParams {
    std::map<std::string, int> ids;
    int at(const std::string& name) const { return ids.at(name); }
};

ckpt::ParamStore init_generator(const ModelConfig& cfg, Rng& rng);
ckpt::ParamStore init_deterministic(const ModelConfig& cfg, Rng& rng);
ckpt::ParamStore init_autoencoder(const ModelConfig& cfg, Rng& rng);
ckpt::ParamStore init_critic(const ModelConfig& cfg, Rng& rng);

TapeParams load_params(ad::Tape& tape, const ckpt::ParamStore& ps, bool trainable);

GeneratorForward generate_on_tape(ad::Tape& tape, const TapeParams& p,
                                  int image_node, int r_node, const ModelConfig& cfg);
int deterministic_on_tape(ad::Tape& tape, const TapeParams& p, int image_node,
                          const ModelConfig& cfg);
int encode_shape_on_tape(ad::Tape& tape, const TapeParams& p, int cloud_node,
                         const ModelConfig& cfg);
int decode_shape_on_tape(ad::Tape& tape, const TapeParams& p, int latent_node,
                         const ModelConfig& cfg);
int critic_on_tape(ad::Tape& tape, const TapeParams& p, int z_node);

// value-level conveniences (fresh private tape per call)
geom::PointCloud generate(const ckpt::ParamStore& ps, const ad::Tensor& image,
                          const ad::Tensor& r, const ModelConfig& cfg);
geom::PointCloud generate_deterministic(const ckpt::ParamStore& ps,
                                        const ad::Tensor& image, const ModelConfig& cfg);
ad::Tensor encode_shape(const ckpt::ParamStore& ps, const geom::PointCloud& s,
                        const ModelConfig& cfg);
geom::PointCloud decode_shape(const ckpt::ParamStore& ps, const ad::Tensor& latent,
                              const ModelConfig& cfg);
double critic_score(const ckpt::ParamStore& critic, const ad::Tensor& z);
// grad of D w.r.t. its input, parameters treated as constants
ad::Tensor critic_input_gradient(const ckpt::ParamStore& critic, const ad::Tensor& z);

ad::Tensor cloud_to_tensor(const geom::PointCloud& pc);
geom::PointCloud tensor_to_cloud(const ad::Tensor& t);
ad::Tensor gaussian_latent(int dim, Rng& rng);

// Generator input image: normalized nearness in [0,1] (0 = empty pixel),
// average-pooled from the rendered depth map down to (out_w, out_h).
ad::Tensor image_from_depth(const render::DepthMap& dm, int out_w, int out_h,
                            double z_near, double z_far);

}  // namespace mvs::model
