#include "mvs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mvs::eval {

std::string init_mode_name(InitMode m) {
    switch (m) {
        case InitMode::Random: return "random";
        case InitMode::Heuristic: return "heuristic";
        case InitMode::HeuristicOpt: return "heuristic+opt";
    }
    throw Error("unknown init mode");
}

Episode run_episode(const ckpt::ParamStore& params, const synthdata::DatasetRecord& rec,
                    int n_views, InitMode mode, const model::ModelConfig& mc,
                    const infer::InferenceConfig& icfg) {
    if (n_views < 1 || rec.views.empty()) throw Error("run_episode: no views");
    n_views = std::min<int>(n_views, static_cast<int>(rec.views.size()));

    Rng rng(icfg.seed);
    std::vector<int> order(rec.views.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(0, i)]);

    std::vector<ad::Tensor> images;
    for (int i = 0; i < n_views; ++i) images.push_back(rec.views[order[i]].image);

    Episode ep;
    ep.shape_id = rec.shape_id;
    ep.n_views = n_views;

    std::vector<ad::Tensor> latents;
    if (n_views == 1) {
        // single view: no consistency signal, one noise draw
        Rng noise(icfg.seed ^ 0x5bd1e995u);
        latents.push_back(model::gaussian_latent(mc.r_dim, noise));
        ep.init_consistency = 0.0;
        ep.final_consistency = 0.0;
    } else {
        infer::InferenceConfig c = icfg;
        if (mode == InitMode::Random) c.init_groups = 1;
        latents = infer::heuristic_init(params, images, mc, c);
        ep.init_consistency = infer::group_consistency(params, images, latents, mc);
        ep.final_consistency = ep.init_consistency;
        if (mode == InitMode::HeuristicOpt) {
            latents = infer::optimize_latents(params, images, std::move(latents), mc, c);
            ep.final_consistency = infer::group_consistency(params, images, latents, mc);
        }
    }

    geom::PointCloud pred;
    for (const auto& c : infer::predict_views(params, images, latents, mc))
        pred.points.insert(pred.points.end(), c.points.begin(), c.points.end());

    auto rep = metrics::make_report(pred, rec.gt);
    ep.cd_x100 = 100.0 * rep.cd;
    ep.norm_cd_x100 = 100.0 * rep.norm_cd;
    ep.fps_cd_x100 = 100.0 * rep.fps_cd;
    return ep;
}

std::vector<Episode> run_episodes(const ckpt::ParamStore& params,
                                  const std::vector<const synthdata::DatasetRecord*>& recs,
                                  int n_views, InitMode mode, const model::ModelConfig& mc,
                                  infer::InferenceConfig icfg) {
    std::vector<Episode> out;
    std::uint64_t base = icfg.seed;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        icfg.seed = base + 1000003ull * (i + 1);
        out.push_back(run_episode(params, *recs[i], n_views, mode, mc, icfg));
    }
    return out;
}

double mean_cd_x100(const std::vector<Episode>& eps) {
    if (eps.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& e : eps) acc += e.cd_x100;
    return acc / static_cast<double>(eps.size());
}

double mean_norm_cd_x100(const std::vector<Episode>& eps) {
    if (eps.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& e : eps) acc += e.norm_cd_x100;
    return acc / static_cast<double>(eps.size());
}

double mean_fps_cd_x100(const std::vector<Episode>& eps) {
    if (eps.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& e : eps) acc += e.fps_cd_x100;
    return acc / static_cast<double>(eps.size());
}

double diversity_score(const ckpt::ParamStore& params, const ad::Tensor& image, int k,
                       const model::ModelConfig& mc, std::uint64_t seed) {
    if (k < 2) throw losses::TooFewViews("diversity_score: need k >= 2 samples");
    Rng rng(seed);
    std::vector<geom::PointCloud> clouds;
    bool conditional = params.has("gen.emb1.w");
    for (int i = 0; i < k; ++i) {
        if (conditional) {
            clouds.push_back(
                model::generate(params, image, model::gaussian_latent(mc.r_dim, rng), mc));
        } else {
            clouds.push_back(model::generate_deterministic(params, image, mc));
        }
    }
    return losses::consistency_loss(clouds);
}

double mean_diversity(const ckpt::ParamStore& params,
                      const std::vector<const synthdata::DatasetRecord*>& recs, int k,
                      const model::ModelConfig& mc, std::uint64_t seed) {
    if (recs.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i)
        acc += diversity_score(params, recs[i]->views[0].image, k, mc,
                               seed + 7919ull * (i + 1));
    return acc / static_cast<double>(recs.size());
}

bool pearson(const std::vector<double>& xs, const std::vector<double>& ys, double& r) {
    if (xs.size() != ys.size() || xs.size() < 2) return false;
    double n = static_cast<double>(xs.size());
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return false;
    r = sxy / std::sqrt(sxx * syy);
    return true;
}

std::string episode_csv_header() {
    return "shape_id,n_views,init_consis,final_consis,cd_x100,norm_cd_x100,fps_cd_x100";
}

std::string episode_csv_row(const Episode& e) {
    std::ostringstream ss;
    ss.precision(17);
    ss << e.shape_id << "," << e.n_views << "," << e.init_consistency << ","
       << e.final_consistency << "," << e.cd_x100 << "," << e.norm_cd_x100 << ","
       << e.fps_cd_x100;
    return ss.str();
}

}  // namespace mvs::eval
