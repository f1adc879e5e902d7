#pragma once

#include <string>
#include <vector>

#include "mvs/autodiff.hpp"
#include "mvs/checkpoint.hpp"
#include "mvs/geom.hpp"
#include "mvs/model.hpp"

namespace mvs::losses {

struct EmptyFront : Error {
    using Error::Error;
};
struct TooFewViews : Error {
    using Error::Error;
};

enum class FrontMetric { CD, EMD };

struct LossWeights {
    double alpha = 0.2;   // diversity margin scale
    double beta = 10.0;   // diversity weight
    double gamma = 0.1;   // gan weight
    double lambda = 10.0; // gradient penalty weight
};

// stage defaults from the published training setup
LossWeights stage1_weights();         // alpha 0.2, beta 10.0
LossWeights stage2_weights();         // alpha 0.1, beta 1.0
LossWeights highly_diverse_weights(); // alpha 15.0, beta 0.5

struct LossReport {
    double front = 0.0, div = 0.0, gan = 0.0, consis = 0.0, total = 0.0;
};

// First-order Chamfer distance between two (N,3) nodes, both directions summed.
int chamfer_on_tape(ad::Tape& tape, int s1, int s2);

// EMD cost with the optimal matching frozen from current values; gradients
// flow through the squared distances of matched pairs.
int emd_cost_on_tape(ad::Tape& tape, int s1, int s2);

// View-sample the predicted cloud, compare against the groundtruth front part.
// Selection indices are constants of the forward pass. The EMD variant
// FPS-downsamples the larger front part to equalize counts.
int front_loss_on_tape(ad::Tape& tape, int pred_cloud, const geom::PointCloud& gt,
                       const geom::Camera& cam, FrontMetric metric = FrontMetric::CD);

// max(0, ||r1 - r2|| - alpha * EMD(S1, S2))
int diversity_loss_on_tape(ad::Tape& tape, int r1, int r2, int s1, int s2, double alpha);

// mean pairwise Chamfer distance over all unordered view pairs
int consistency_loss_on_tape(ad::Tape& tape, const std::vector<int>& clouds);

// -mean D(z_fake), critic parameters constant on this tape
int generator_gan_term_on_tape(ad::Tape& tape, const model::TapeParams& critic,
                               const std::vector<int>& z_fake_nodes);

// value-level conveniences
double chamfer_loss(const geom::PointCloud& s1, const geom::PointCloud& s2);
double front_loss(const geom::PointCloud& pred, const geom::PointCloud& gt,
                  const geom::Camera& cam, FrontMetric metric = FrontMetric::CD);
double diversity_loss(const ad::Tensor& r1, const ad::Tensor& r2,
                      const geom::PointCloud& s1, const geom::PointCloud& s2, double alpha);
double consistency_loss(const std::vector<geom::PointCloud>& shapes);

// mean over interpolates of (||grad_z D(z)|| - 1)^2
double gradient_penalty(const ckpt::ParamStore& critic, const std::vector<ad::Tensor>& z_hat);

// critic objective (ascended by the critic):
//   -mean D(z_fake) + mean D(z_real) - lambda * penalty
double critic_objective(const ckpt::ParamStore& critic,
                        const std::vector<ad::Tensor>& z_real,
                        const std::vector<ad::Tensor>& z_fake,
                        const std::vector<ad::Tensor>& z_hat, double lambda);

// (generator_term, critic_term) as plain values
std::pair<double, double> gan_terms(const ckpt::ParamStore& critic,
                                    const std::vector<ad::Tensor>& z_real,
                                    const std::vector<ad::Tensor>& z_fake,
                                    const std::vector<ad::Tensor>& z_hat, double lambda);

// Gradient of the critic objective w.r.t. critic parameters. The two
// expectation terms use exact reverse-mode; the gradient-penalty term uses
// central finite differences over the (small) critic parameter set.
std::map<std::string, ad::Tensor> critic_gradient(const ckpt::ParamStore& critic,
                                                  const std::vector<ad::Tensor>& z_real,
                                                  const std::vector<ad::Tensor>& z_fake,
                                                  const std::vector<ad::Tensor>& z_hat,
                                                  double lambda, double fd_step = 1e-5);

LossReport combined_loss(double front, double div, double gan, const LossWeights& w);

std::string loss_csv_header();
std::string loss_csv_row(int iter, const LossReport& r, double wall_ms);

}  // namespace mvs::losses
