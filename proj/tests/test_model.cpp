#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "mvs/checkpoint.hpp"
#include "mvs/model.hpp"

using namespace mvs;

namespace {

ad::Tensor random_image(const model::ModelConfig& mc, Rng& rng) {
    ad::Tensor img(1, mc.img_pixels());
    for (double& x : img.v) x = rng.uniform(0.0, 1.0);
    return img;
}

geom::PointCloud random_cloud(int n, Rng& rng) {
    geom::PointCloud pc;
    for (int i = 0; i < n; ++i)
        pc.points.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                               rng.uniform(-0.5, 0.5));
    return pc;
}

}  // namespace

TEST_CASE("latent dimensions line up with the autoencoder bottleneck") {
    model::ModelConfig mc;
    CHECK(mc.latent_dim() == mc.zi_dim + mc.zr_dim);
    Rng rng(1);
    auto ae = model::init_autoencoder(mc, rng);
    auto gen = model::init_generator(mc, rng);
    CHECK(ae.at("ae.enc2.w").cols == mc.latent_dim());
    CHECK(gen.at("dec.1.w").rows == mc.latent_dim());
    CHECK(ae.at("dec.1.w").rows == mc.latent_dim());
}

TEST_CASE("generator forward shapes and determinism") {
    model::ModelConfig mc;
    Rng rng(2);
    auto ps = model::init_generator(mc, rng);
    auto img = random_image(mc, rng);
    auto r = model::gaussian_latent(mc.r_dim, rng);
    auto cloud = model::generate(ps, img, r, mc);
    REQUIRE(static_cast<int>(cloud.size()) == mc.n_points);
    for (const auto& p : cloud.points) CHECK(p.finite());
    auto cloud2 = model::generate(ps, img, r, mc);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(cloud[i].x == cloud2[i].x);
        CHECK(cloud[i].y == cloud2[i].y);
        CHECK(cloud[i].z == cloud2[i].z);
    }
    // different noise changes the output
    auto r2 = model::gaussian_latent(mc.r_dim, rng);
    auto cloud3 = model::generate(ps, img, r2, mc);
    bool differs = false;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud[i].x != cloud3[i].x) differs = true;
    CHECK(differs);
}

TEST_CASE("generator latent is the concat fed to the critic") {
    model::ModelConfig mc;
    Rng rng(3);
    auto ps = model::init_generator(mc, rng);
    ad::Tape tape;
    auto p = model::load_params(tape, ps, false);
    int img = tape.constant(random_image(mc, rng));
    int r = tape.constant(model::gaussian_latent(mc.r_dim, rng));
    auto fwd = model::generate_on_tape(tape, p, img, r, mc);
    const auto& z = tape.value(fwd.latent);
    CHECK(z.rows == 1);
    CHECK(z.cols == mc.latent_dim());
    for (double x : z.v) {
        CHECK(x >= -1.0);  // tanh range
        CHECK(x <= 1.0);
    }
    CHECK(tape.value(fwd.cloud).rows == mc.n_points);
    CHECK(tape.value(fwd.cloud).cols == 3);
}

TEST_CASE("bad input shapes throw") {
    model::ModelConfig mc;
    Rng rng(4);
    auto ps = model::init_generator(mc, rng);
    ad::Tensor bad_img(1, 7);
    CHECK_THROWS_AS(model::generate(ps, bad_img, model::gaussian_latent(mc.r_dim, rng), mc),
                    ad::ShapeMismatch);
    CHECK_THROWS_AS(
        model::generate(ps, random_image(mc, rng), model::gaussian_latent(3, rng), mc),
        ad::ShapeMismatch);
}

TEST_CASE("shape encoder is permutation invariant") {
    model::ModelConfig mc;
    Rng rng(5);
    auto ae = model::init_autoencoder(mc, rng);
    auto s = random_cloud(32, rng);
    auto z1 = model::encode_shape(ae, s, mc);
    geom::PointCloud shuffled = s;
    for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i)
        std::swap(shuffled.points[i], shuffled.points[rng.uniform_int(0, i)]);
    auto z2 = model::encode_shape(ae, shuffled, mc);
    REQUIRE(z1.v.size() == z2.v.size());
    for (std::size_t i = 0; i < z1.v.size(); ++i)
        CHECK(z1.v[i] == doctest::Approx(z2.v[i]).epsilon(1e-12));
}

TEST_CASE("deterministic model ignores noise by construction") {
    model::ModelConfig mc;
    Rng rng(6);
    auto ps = model::init_deterministic(mc, rng);
    auto img = random_image(mc, rng);
    auto c1 = model::generate_deterministic(ps, img, mc);
    auto c2 = model::generate_deterministic(ps, img, mc);
    REQUIRE(c1.size() == c2.size());
    for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i].x == c2[i].x);
}

TEST_CASE("frozen parameters receive no gradient") {
    model::ModelConfig mc;
    Rng rng(7);
    auto ps = model::init_generator(mc, rng);
    ps.frozen.insert("dec.1.w");
    ps.frozen.insert("dec.1.b");
    ps.frozen.insert("dec.2.w");
    ps.frozen.insert("dec.2.b");
    ad::Tape tape;
    auto p = model::load_params(tape, ps, true);
    int img = tape.constant(random_image(mc, rng));
    int r = tape.constant(model::gaussian_latent(mc.r_dim, rng));
    auto fwd = model::generate_on_tape(tape, p, img, r, mc);
    tape.backward(tape.reduce_sum(tape.mul(fwd.cloud, fwd.cloud)));
    CHECK_FALSE(tape.has_grad(p.at("dec.1.w")));
    CHECK_FALSE(tape.has_grad(p.at("dec.2.w")));
    CHECK(tape.has_grad(p.at("gen.enc1.w")));
    CHECK(tape.has_grad(p.at("gen.emb1.w")));
}

TEST_CASE("critic input gradient matches finite differences") {
    model::ModelConfig mc;
    Rng rng(8);
    auto critic = model::init_critic(mc, rng);
    auto z = model::gaussian_latent(mc.latent_dim(), rng);
    auto g = model::critic_input_gradient(critic, z);
    double h = 1e-6;
    for (std::size_t i = 0; i < z.v.size(); ++i) {
        ad::Tensor zp = z, zm = z;
        zp.v[i] += h;
        zm.v[i] -= h;
        double fd = (model::critic_score(critic, zp) - model::critic_score(critic, zm)) /
                    (2 * h);
        CHECK(g.v[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("image_from_depth pools nearness blocks") {
    render::DepthMap dm(4, 4);
    // occupy one 2x2 block corner with the nearest depth
    dm.contributor[dm.idx(0, 0)] = 0;
    dm.depth[dm.idx(0, 0)] = 1.0;  // z_near -> nearness 1
    dm.contributor[dm.idx(3, 3)] = 1;
    dm.depth[dm.idx(3, 3)] = 3.0;  // z_far -> nearness 0
    auto img = model::image_from_depth(dm, 2, 2, 1.0, 3.0);
    REQUIRE(img.cols == 4);
    CHECK(img.v[0] == doctest::Approx(0.25));  // one of four pixels at nearness 1
    CHECK(img.v[1] == 0.0);
    CHECK(img.v[2] == 0.0);
    CHECK(img.v[3] == 0.0);  // far pixel contributes nearness 0
}

TEST_CASE("checkpoint round-trip preserves every tensor bit") {
    model::ModelConfig mc;
    Rng rng(9);
    auto ps = model::init_generator(mc, rng);
    auto path = (std::filesystem::temp_directory_path() / "t_model.ckpt").string();
    ckpt::save_checkpoint(ps, path);
    auto back = ckpt::load_checkpoint(path);
    CHECK(ckpt::store_checksum(back) == ckpt::store_checksum(ps));
    REQUIRE(back.tensors.size() == ps.tensors.size());
    for (const auto& [name, t] : ps.tensors) {
        REQUIRE(back.has(name));
        CHECK(back.at(name).v == t.v);
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(ckpt::load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

TEST_CASE("store checksum prefix isolates the decoder") {
    model::ModelConfig mc;
    Rng rng(10);
    auto a = model::init_generator(mc, rng);
    auto b = a;
    b.at("gen.enc1.w").v[0] += 1.0;
    CHECK(ckpt::store_checksum(a) != ckpt::store_checksum(b));
    CHECK(ckpt::store_checksum(a, "dec.") == ckpt::store_checksum(b, "dec."));
    b.at("dec.1.w").v[0] += 1.0;
    CHECK(ckpt::store_checksum(a, "dec.") != ckpt::store_checksum(b, "dec."));
}
