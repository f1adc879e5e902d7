#pragma once

#include <vector>

#include "mvs/checkpoint.hpp"
#include "mvs/losses.hpp"
#include "mvs/model.hpp"

namespace mvs::infer {

struct InferenceConfig {
    int init_groups = 5;       // random latent groups scored at init
    int opt_steps = 300;       // hard cap on descent steps
    double opt_lr = 0.05;      // initial step size; halved on overshoot
    int max_halvings = 10;     // backtracking depth per step
    double tol = 1e-4;         // relative decrease threshold
    int tol_window = 10;       // steps the threshold must hold over
    std::uint64_t seed = 0;
};

struct InferenceTrace {
    std::vector<double> consistency;   // per accepted step, index 0 = init
    int chosen_group = 0;
    int steps_taken = 0;
    bool converged = false;            // tolerance hit before the cap
};

// Best-of-K heuristic: K independent random latent groups, keep the group
// whose per-view predictions agree most (lowest mean pairwise CD).
std::vector<ad::Tensor> heuristic_init(const ckpt::ParamStore& params,
                                       const std::vector<ad::Tensor>& images,
                                       const model::ModelConfig& mc,
                                       const InferenceConfig& cfg,
                                       InferenceTrace* trace = nullptr);

// Online minimization of the cross-view consistency loss over the latents
// {r_i}; model parameters stay fixed (checksum-asserted). Steps that would
// increase the loss are backtracked by halving, then rejected.
std::vector<ad::Tensor> optimize_latents(const ckpt::ParamStore& params,
                                         const std::vector<ad::Tensor>& images,
                                         std::vector<ad::Tensor> r_init,
                                         const model::ModelConfig& mc,
                                         const InferenceConfig& cfg,
                                         InferenceTrace* trace = nullptr);

// Full pipeline: heuristic init, latent optimization, concatenated cloud.
// Cameras are never an input here.
geom::PointCloud reconstruct(const ckpt::ParamStore& params,
                             const std::vector<ad::Tensor>& images,
                             const model::ModelConfig& mc, const InferenceConfig& cfg,
                             InferenceTrace* trace = nullptr);

// per-view predictions for a fixed latent group
std::vector<geom::PointCloud> predict_views(const ckpt::ParamStore& params,
                                            const std::vector<ad::Tensor>& images,
                                            const std::vector<ad::Tensor>& latents,
                                            const model::ModelConfig& mc);

double group_consistency(const ckpt::ParamStore& params,
                         const std::vector<ad::Tensor>& images,
                         const std::vector<ad::Tensor>& latents,
                         const model::ModelConfig& mc);

}  // namespace mvs::infer
