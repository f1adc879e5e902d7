#include "mvs/infer.hpp"

#include <cmath>

#include "mvs/rng.hpp"

namespace mvs::infer {

namespace {

// consistency of one group plus per-latent gradients, on a fresh tape
double consistency_and_grads(const ckpt::ParamStore& params,
                             const std::vector<ad::Tensor>& images,
                             const std::vector<ad::Tensor>& latents,
                             const model::ModelConfig& mc,
                             std::vector<ad::Tensor>* grads) {
    ad::Tape tape;
    model::TapeParams p = model::load_params(tape, params, false);
    std::vector<int> r_nodes, clouds;
    for (std::size_t i = 0; i < images.size(); ++i) {
        int img = tape.constant(images[i]);
        int r = tape.leaf(latents[i], grads != nullptr);
        r_nodes.push_back(r);
        clouds.push_back(model::generate_on_tape(tape, p, img, r, mc).cloud);
    }
    int loss = losses::consistency_loss_on_tape(tape, clouds);
    double value = tape.value(loss).v[0];
    if (grads) {
        tape.backward(loss);
        grads->clear();
        for (std::size_t i = 0; i < r_nodes.size(); ++i)
            grads->push_back(tape.has_grad(r_nodes[i]) ? tape.grad(r_nodes[i])
                                                       : ad::Tensor(1, mc.r_dim));
    }
    return value;
}

}  // namespace

std::vector<geom::PointCloud> predict_views(const ckpt::ParamStore& params,
                                            const std::vector<ad::Tensor>& images,
                                            const std::vector<ad::Tensor>& latents,
                                            const model::ModelConfig& mc) {
    std::vector<geom::PointCloud> out;
    for (std::size_t i = 0; i < images.size(); ++i)
        out.push_back(model::generate(params, images[i], latents[i], mc));
    return out;
}

double group_consistency(const ckpt::ParamStore& params,
                         const std::vector<ad::Tensor>& images,
                         const std::vector<ad::Tensor>& latents,
                         const model::ModelConfig& mc) {
    return consistency_and_grads(params, images, latents, mc, nullptr);
}

std::vector<ad::Tensor> heuristic_init(const ckpt::ParamStore& params,
                                       const std::vector<ad::Tensor>& images,
                                       const model::ModelConfig& mc,
                                       const InferenceConfig& cfg,
                                       InferenceTrace* trace) {
    if (images.size() < 2) throw losses::TooFewViews("heuristic_init: need >= 2 views");
    Rng rng(cfg.seed);
    std::vector<ad::Tensor> best;
    double best_loss = 0.0;
    int best_k = 0;
    for (int k = 0; k < cfg.init_groups; ++k) {
        std::vector<ad::Tensor> group;
        for (std::size_t i = 0; i < images.size(); ++i)
            group.push_back(model::gaussian_latent(mc.r_dim, rng));
        double loss = group_consistency(params, images, group, mc);
        if (k == 0 || loss < best_loss) {
            best_loss = loss;
            best = std::move(group);
            best_k = k;
        }
    }
    if (trace) trace->chosen_group = best_k;
    return best;
}

std::vector<ad::Tensor> optimize_latents(const ckpt::ParamStore& params,
                                         const std::vector<ad::Tensor>& images,
                                         std::vector<ad::Tensor> r_init,
                                         const model::ModelConfig& mc,
                                         const InferenceConfig& cfg,
                                         InferenceTrace* trace) {
    if (images.size() != r_init.size())
        throw Error("optimize_latents: one latent per view required");
    if (images.size() < 2) throw losses::TooFewViews("optimize_latents: need >= 2 views");

    std::uint64_t theta_before = ckpt::store_checksum(params);
    std::vector<ad::Tensor> r = std::move(r_init);
    std::vector<ad::Tensor> grads;
    double loss = consistency_and_grads(params, images, r, mc, &grads);
    if (trace) {
        trace->consistency.clear();
        trace->consistency.push_back(loss);
        trace->steps_taken = 0;
        trace->converged = false;
    }

    int stall = 0;
    for (int step = 0; step < cfg.opt_steps; ++step) {
        double lr = cfg.opt_lr;
        std::vector<ad::Tensor> cand = r;
        double cand_loss = loss;
        bool accepted = false;
        for (int h = 0; h <= cfg.max_halvings; ++h) {
            for (std::size_t i = 0; i < r.size(); ++i)
                for (std::size_t j = 0; j < r[i].v.size(); ++j)
                    cand[i].v[j] = r[i].v[j] - lr * grads[i].v[j];
            cand_loss = group_consistency(params, images, cand, mc);
            if (std::isfinite(cand_loss) && cand_loss < loss) {
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) break;

        double rel = (loss - cand_loss) / std::max(std::abs(loss), 1e-12);
        stall = (rel < cfg.tol) ? stall + 1 : 0;
        r = std::move(cand);
        loss = consistency_and_grads(params, images, r, mc, &grads);
        if (trace) {
            trace->consistency.push_back(loss);
            trace->steps_taken = step + 1;
        }
        if (stall >= cfg.tol_window) {
            if (trace) trace->converged = true;
            break;
        }
    }

    if (ckpt::store_checksum(params) != theta_before)
        throw Error("optimize_latents: model parameters changed during inference");
    return r;
}

geom::PointCloud reconstruct(const ckpt::ParamStore& params,
                             const std::vector<ad::Tensor>& images,
                             const model::ModelConfig& mc, const InferenceConfig& cfg,
                             InferenceTrace* trace) {
    auto r = heuristic_init(params, images, mc, cfg, trace);
    r = optimize_latents(params, images, std::move(r), mc, cfg, trace);
    geom::PointCloud out;
    for (const auto& c : predict_views(params, images, r, mc))
        out.points.insert(out.points.end(), c.points.begin(), c.points.end());
    return out;
}

}  // namespace mvs::infer
