#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mvs/checkpoint.hpp"
#include "mvs/losses.hpp"
#include "mvs/model.hpp"
#include "mvs/synthdata.hpp"

namespace mvs::train {

struct Diverged : Error {
    using Error::Error;
};

// Adam as published (Kingma & Ba): bias-corrected first/second moments.
class Adam {
public:
    explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // descends the objective; frozen names in the store are skipped
    void step(ckpt::ParamStore& params, const std::map<std::string, ad::Tensor>& grads);
    // ascends instead (critic max-step)
    void step_ascend(ckpt::ParamStore& params, const std::map<std::string, ad::Tensor>& grads);

    int iterations() const { return t_; }

private:
    void apply(ckpt::ParamStore& params, const std::map<std::string, ad::Tensor>& grads,
               double sign);
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::map<std::string, ad::Tensor> m_, v_;
};

enum class Stage { Autoencoder, SingleView, MultiView };

struct TrainConfig {
    Stage stage = Stage::SingleView;
    int iterations = 2000;
    int batch_shapes = 4;
    int views_per_shape = 8;  // multi-view stage
    int noises_per_view = 5;
    losses::LossWeights weights = losses::stage1_weights();
    losses::FrontMetric front_metric = losses::FrontMetric::CD;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    bool deterministic_model = false;  // ablation: no noise branch
    bool diversity_on_concat = false;  // highly diverse variant (stage 2)
    int critic_steps = 1;              // critic max-steps per generator step
    std::string log_path;              // per-iteration CSV when non-empty
    std::string log_provenance;        // comment line prepended to the log
};

// published two-stage schedule
TrainConfig paper_stage1();
TrainConfig paper_stage2();
// desk-scale presets sized to run in minutes on one core
TrainConfig desk_autoencoder();
TrainConfig desk_stage1();
TrainConfig desk_stage2();

struct TrainResult {
    ckpt::ParamStore params;           // model under training
    ckpt::ParamStore critic;           // latent-space critic (when gamma > 0)
    ckpt::ParamStore autoencoder;      // E_S / decoder pair used for the GAN
    std::vector<losses::LossReport> log;
};

// Point-cloud autoencoder pretraining; whenever a pretrained store is handed to
// the trainers below, its decoder half is transferred to the model (conditional
// or deterministic alike) and kept frozen, so ablations share one decoder.
ckpt::ParamStore pretrain_autoencoder(const std::vector<geom::PointCloud>& corpus,
                                      const TrainConfig& cfg, const model::ModelConfig& mc);

// Single-view conditional training: front constraint + diversity + latent GAN,
// iterative min-max. An empty autoencoder store means no transfer (the decoder
// trains freely); gamma > 0 requires a pretrained store.
TrainResult train_single_view(const synthdata::Dataset& ds, const TrainConfig& cfg,
                              const model::ModelConfig& mc,
                              const ckpt::ParamStore& autoencoder);

// Multi-view finetuning by concatenation: per-view predictions concatenated,
// front loss evaluated against every view's groundtruth front part.
TrainResult train_multi_view(const synthdata::Dataset& ds, const TrainConfig& cfg,
                             const model::ModelConfig& mc, const TrainResult& stage1);

// mean held-out reconstruction CD of the autoencoder (unscaled)
double autoencoder_eval_cd(const ckpt::ParamStore& ae,
                           const std::vector<geom::PointCloud>& shapes,
                           const model::ModelConfig& mc);

}  // namespace mvs::train
