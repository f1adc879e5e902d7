#pragma once

#include <string>
#include <vector>

#include "mvs/infer.hpp"
#include "mvs/metrics.hpp"
#include "mvs/synthdata.hpp"

namespace mvs::eval {

// how the per-view latents are produced for an episode
enum class InitMode { Random, Heuristic, HeuristicOpt };

std::string init_mode_name(InitMode m);

struct Episode {
    std::string shape_id;
    int n_views = 0;
    double init_consistency = 0.0;
    double final_consistency = 0.0;
    double cd_x100 = 0.0;
    double norm_cd_x100 = 0.0;
    double fps_cd_x100 = 0.0;
};

// One reconstruction episode on a dataset record: pick n_views views
// (seeded random subset when fewer than stored), produce latents per mode,
// concatenate, score against the groundtruth cloud.
Episode run_episode(const ckpt::ParamStore& params, const synthdata::DatasetRecord& rec,
                    int n_views, InitMode mode, const model::ModelConfig& mc,
                    const infer::InferenceConfig& icfg);

// episodes over a record list (seed offsets per record index)
std::vector<Episode> run_episodes(const ckpt::ParamStore& params,
                                  const std::vector<const synthdata::DatasetRecord*>& recs,
                                  int n_views, InitMode mode, const model::ModelConfig& mc,
                                  infer::InferenceConfig icfg);

// Trend aggregates use the size-normalized CD: concatenated predictions have
// n_views * N points, so the raw summed CD is not comparable across view
// counts, and FPS downsampling favors outlying points as clouds grow.
double mean_cd_x100(const std::vector<Episode>& eps);
double mean_norm_cd_x100(const std::vector<Episode>& eps);
double mean_fps_cd_x100(const std::vector<Episode>& eps);

// Conditional-sample spread on one image: consistency loss over k predictions
// with independent noise draws. Deterministic models score exactly 0.
double diversity_score(const ckpt::ParamStore& params, const ad::Tensor& image, int k,
                       const model::ModelConfig& mc, std::uint64_t seed);

// corpus mean of diversity_score over the given records' first views
double mean_diversity(const ckpt::ParamStore& params,
                      const std::vector<const synthdata::DatasetRecord*>& recs, int k,
                      const model::ModelConfig& mc, std::uint64_t seed);

// Pearson correlation; returns false (r untouched) when undefined
bool pearson(const std::vector<double>& xs, const std::vector<double>& ys, double& r);

std::string episode_csv_header();
std::string episode_csv_row(const Episode& e);

}  // namespace mvs::eval
