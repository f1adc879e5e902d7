#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mvs/infer.hpp"

using namespace mvs;

namespace {

ad::Tensor random_image(const model::ModelConfig& mc, Rng& rng) {
    ad::Tensor img(1, mc.img_pixels());
    for (double& x : img.v) x = rng.uniform(0.0, 1.0);
    return img;
}

// generator whose output is independent of the noise input: the noise
// embedding weights and bias are zeroed, so every latent maps to tanh(0)
ckpt::ParamStore noise_blind_generator(const model::ModelConfig& mc, std::uint64_t seed) {
    Rng rng(seed);
    auto ps = model::init_generator(mc, rng);
    for (double& x : ps.at("gen.emb1.w").v) x = 0.0;
    for (double& x : ps.at("gen.emb1.b").v) x = 0.0;
    return ps;
}

}  // namespace

TEST_CASE("consistency fixed point: identical per-view shapes, zero accepted steps") {
    model::ModelConfig mc;
    auto ps = noise_blind_generator(mc, 1);
    Rng rng(2);
    auto img = random_image(mc, rng);
    std::vector<ad::Tensor> images{img, img, img};  // same image every view

    infer::InferenceConfig cfg;
    cfg.seed = 11;
    infer::InferenceTrace trace;
    auto r = infer::heuristic_init(ps, images, mc, cfg, &trace);
    CHECK(infer::group_consistency(ps, images, r, mc) == 0.0);

    auto r_opt = infer::optimize_latents(ps, images, r, mc, cfg, &trace);
    CHECK(trace.steps_taken == 0);
    REQUIRE(trace.consistency.size() == 1);
    CHECK(trace.consistency[0] == 0.0);
    auto clouds = infer::predict_views(ps, images, r_opt, mc);
    for (std::size_t i = 1; i < clouds.size(); ++i)
        for (std::size_t j = 0; j < clouds[0].size(); ++j) {
            CHECK(clouds[i][j].x == clouds[0][j].x);
            CHECK(clouds[i][j].y == clouds[0][j].y);
            CHECK(clouds[i][j].z == clouds[0][j].z);
        }
}

TEST_CASE("model parameters unchanged by inference") {
    model::ModelConfig mc;
    Rng rng(3);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> images{random_image(mc, rng), random_image(mc, rng),
                                   random_image(mc, rng)};
    infer::InferenceConfig cfg;
    cfg.opt_steps = 20;
    cfg.seed = 5;
    auto before = ckpt::store_checksum(ps);
    infer::reconstruct(ps, images, mc, cfg);
    CHECK(ckpt::store_checksum(ps) == before);
}

TEST_CASE("accepted consistency sequence is non-increasing") {
    model::ModelConfig mc;
    Rng rng(4);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> images;
    for (int i = 0; i < 4; ++i) images.push_back(random_image(mc, rng));
    infer::InferenceConfig cfg;
    cfg.opt_steps = 40;
    cfg.seed = 6;
    infer::InferenceTrace trace;
    infer::reconstruct(ps, images, mc, cfg, &trace);
    REQUIRE_FALSE(trace.consistency.empty());
    for (std::size_t i = 1; i < trace.consistency.size(); ++i)
        CHECK(trace.consistency[i] <= trace.consistency[i - 1]);
    CHECK(trace.consistency.back() < trace.consistency.front());
}

TEST_CASE("heuristic picks the best of k independent groups") {
    model::ModelConfig mc;
    Rng rng(7);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> images{random_image(mc, rng), random_image(mc, rng)};
    infer::InferenceConfig cfg;
    cfg.init_groups = 5;
    cfg.seed = 8;
    infer::InferenceTrace trace;
    auto best = infer::heuristic_init(ps, images, mc, cfg, &trace);
    double best_loss = infer::group_consistency(ps, images, best, mc);
    CHECK(trace.chosen_group >= 0);
    CHECK(trace.chosen_group < cfg.init_groups);
    // re-draw the same 5 groups and verify none beats the chosen one
    Rng redraw(cfg.seed);
    for (int k = 0; k < cfg.init_groups; ++k) {
        std::vector<ad::Tensor> group;
        for (std::size_t i = 0; i < images.size(); ++i)
            group.push_back(model::gaussian_latent(mc.r_dim, redraw));
        CHECK(infer::group_consistency(ps, images, group, mc) >= best_loss - 1e-12);
    }
}

TEST_CASE("permuting views permutes outputs and keeps the loss") {
    model::ModelConfig mc;
    Rng rng(9);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> images;
    std::vector<ad::Tensor> r;
    for (int i = 0; i < 3; ++i) {
        images.push_back(random_image(mc, rng));
        r.push_back(model::gaussian_latent(mc.r_dim, rng));
    }
    double base = infer::group_consistency(ps, images, r, mc);
    std::vector<int> perm{2, 0, 1};
    std::vector<ad::Tensor> images_p, r_p;
    for (int i : perm) {
        images_p.push_back(images[i]);
        r_p.push_back(r[i]);
    }
    CHECK(infer::group_consistency(ps, images_p, r_p, mc) ==
          doctest::Approx(base).epsilon(1e-12));
    auto out = infer::predict_views(ps, images, r, mc);
    auto out_p = infer::predict_views(ps, images_p, r_p, mc);
    for (std::size_t v = 0; v < perm.size(); ++v)
        for (std::size_t j = 0; j < out[0].size(); ++j)
            CHECK(out_p[v][j].x == out[perm[v]][j].x);
}

TEST_CASE("optimization lowers or keeps the consistency of its init") {
    model::ModelConfig mc;
    Rng rng(10);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> images;
    for (int i = 0; i < 3; ++i) images.push_back(random_image(mc, rng));
    infer::InferenceConfig cfg;
    cfg.opt_steps = 30;
    cfg.seed = 12;
    auto r0 = infer::heuristic_init(ps, images, mc, cfg);
    double init = infer::group_consistency(ps, images, r0, mc);
    auto r1 = infer::optimize_latents(ps, images, r0, mc, cfg);
    CHECK(infer::group_consistency(ps, images, r1, mc) <= init);
}

TEST_CASE("reconstruct concatenates one cloud per view") {
    model::ModelConfig mc;
    Rng rng(13);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> images;
    for (int i = 0; i < 4; ++i) images.push_back(random_image(mc, rng));
    infer::InferenceConfig cfg;
    cfg.opt_steps = 5;
    cfg.seed = 14;
    auto cloud = infer::reconstruct(ps, images, mc, cfg);
    CHECK(static_cast<int>(cloud.size()) == 4 * mc.n_points);
    for (const auto& p : cloud.points) CHECK(p.finite());
}

TEST_CASE("fewer than two views is rejected") {
    model::ModelConfig mc;
    Rng rng(15);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> one{random_image(mc, rng)};
    infer::InferenceConfig cfg;
    CHECK_THROWS_AS(infer::heuristic_init(ps, one, mc, cfg), losses::TooFewViews);
    CHECK_THROWS_AS(
        infer::optimize_latents(ps, one, {model::gaussian_latent(mc.r_dim, rng)}, mc, cfg),
        losses::TooFewViews);
}

TEST_CASE("inference is deterministic under a fixed seed") {
    model::ModelConfig mc;
    Rng rng(16);
    auto ps = model::init_generator(mc, rng);
    std::vector<ad::Tensor> images;
    for (int i = 0; i < 3; ++i) images.push_back(random_image(mc, rng));
    infer::InferenceConfig cfg;
    cfg.opt_steps = 15;
    cfg.seed = 17;
    auto a = infer::reconstruct(ps, images, mc, cfg);
    auto b = infer::reconstruct(ps, images, mc, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].z == b[i].z);
    }
}
