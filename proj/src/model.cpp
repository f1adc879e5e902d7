#include "mvs/model.hpp"

#include <algorithm>
#include <cmath>

namespace mvs::model {

namespace {

ad::Tensor xavier(int rows, int cols, Rng& rng) {
    ad::Tensor t(rows, cols);
    double s = std::sqrt(6.0 / (rows + cols));
    for (double& x : t.v) x = rng.uniform(-s, s);
    return t;
}

void add_linear(ckpt::ParamStore& ps, const std::string& name, int in, int out, Rng& rng) {
    ps.tensors[name + ".w"] = xavier(in, out, rng);
    ps.tensors[name + ".b"] = ad::Tensor(1, out);
}

int linear(ad::Tape& tape, const TapeParams& p, const std::string& name, int x) {
    return tape.add(tape.matmul(x, p.at(name + ".w")), p.at(name + ".b"));
}

void add_decoder(ckpt::ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
    add_linear(ps, "dec.1", cfg.latent_dim(), cfg.dec_hidden, rng);
    add_linear(ps, "dec.2", cfg.dec_hidden, cfg.n_points * 3, rng);
}

}  // namespace

ckpt::ParamStore init_generator(const ModelConfig& cfg, Rng& rng) {
    ckpt::ParamStore ps;
    add_linear(ps, "gen.enc1", cfg.img_pixels(), cfg.enc_hidden, rng);
    add_linear(ps, "gen.enc2", cfg.enc_hidden, cfg.zi_dim, rng);
    add_linear(ps, "gen.emb1", cfg.r_dim, cfg.zr_dim, rng);
    add_decoder(ps, cfg, rng);
    return ps;
}

ckpt::ParamStore init_deterministic(const ModelConfig& cfg, Rng& rng) {
    ckpt::ParamStore ps;
    add_linear(ps, "det.enc1", cfg.img_pixels(), cfg.enc_hidden, rng);
    add_linear(ps, "det.enc2", cfg.enc_hidden, cfg.latent_dim(), rng);
    add_decoder(ps, cfg, rng);
    return ps;
}

ckpt::ParamStore init_autoencoder(const ModelConfig& cfg, Rng& rng) {
    ckpt::ParamStore ps;
    add_linear(ps, "ae.enc1", 3, cfg.ae_hidden, rng);
    add_linear(ps, "ae.enc2", cfg.ae_hidden, cfg.latent_dim(), rng);
    add_decoder(ps, cfg, rng);
    return ps;
}

ckpt::ParamStore init_critic(const ModelConfig& cfg, Rng& rng) {
    ckpt::ParamStore ps;
    add_linear(ps, "critic.1", cfg.latent_dim(), cfg.critic_hidden, rng);
    add_linear(ps, "critic.2", cfg.critic_hidden, 1, rng);
    return ps;
}

TapeParams load_params(ad::Tape& tape, const ckpt::ParamStore& ps, bool trainable) {
    TapeParams p;
    for (const auto& [name, t] : ps.tensors) {
        bool grad = trainable && ps.frozen.count(name) == 0;
        p.ids[name] = tape.leaf(t, grad);
    }
    return p;
}

GeneratorForward generate_on_tape(ad::Tape& tape, const TapeParams& p,
                                  int image_node, int r_node, const ModelConfig& cfg) {
    const ad::Tensor& img = tape.value(image_node);
    if (img.rows != 1 || img.cols != cfg.img_pixels())
        throw ad::ShapeMismatch("generate: bad image shape");
    const ad::Tensor& r = tape.value(r_node);
    if (r.rows != 1 || r.cols != cfg.r_dim)
        throw ad::ShapeMismatch("generate: bad latent input shape");

    int h = tape.relu(linear(tape, p, "gen.enc1", image_node));
    int zi = tape.tanh_(linear(tape, p, "gen.enc2", h));
    int zr = tape.tanh_(linear(tape, p, "gen.emb1", r_node));
    int z = tape.concat(zi, zr, 1);
    int cloud = decode_shape_on_tape(tape, p, z, cfg);
    return {cloud, z};
}

int deterministic_on_tape(ad::Tape& tape, const TapeParams& p, int image_node,
                          const ModelConfig& cfg) {
    const ad::Tensor& img = tape.value(image_node);
    if (img.rows != 1 || img.cols != cfg.img_pixels())
        throw ad::ShapeMismatch("generate_deterministic: bad image shape");
    int h = tape.relu(linear(tape, p, "det.enc1", image_node));
    int z = tape.tanh_(linear(tape, p, "det.enc2", h));
    return decode_shape_on_tape(tape, p, z, cfg);
}

int encode_shape_on_tape(ad::Tape& tape, const TapeParams& p, int cloud_node,
                         const ModelConfig& cfg) {
    const ad::Tensor& s = tape.value(cloud_node);
    if (s.cols != 3) throw ad::ShapeMismatch("encode_shape: cloud must be (N,3)");
    int h = tape.relu(linear(tape, p, "ae.enc1", cloud_node));
    int f = linear(tape, p, "ae.enc2", h);
    int pooled = tape.reduce_max_with_index(f, 0);  // symmetric pooling
    return tape.tanh_(pooled);
}

int decode_shape_on_tape(ad::Tape& tape, const TapeParams& p, int latent_node,
                         const ModelConfig& cfg) {
    int h = tape.relu(linear(tape, p, "dec.1", latent_node));
    int flat = linear(tape, p, "dec.2", h);
    return tape.reshape(flat, cfg.n_points, 3);
}

int critic_on_tape(ad::Tape& tape, const TapeParams& p, int z_node) {
    int h = tape.tanh_(linear(tape, p, "critic.1", z_node));
    return linear(tape, p, "critic.2", h);
}

geom::PointCloud generate(const ckpt::ParamStore& ps, const ad::Tensor& image,
                          const ad::Tensor& r, const ModelConfig& cfg) {
    ad::Tape tape;
    TapeParams p = load_params(tape, ps, false);
    auto fwd = generate_on_tape(tape, p, tape.constant(image), tape.constant(r), cfg);
    return tensor_to_cloud(tape.value(fwd.cloud));
}

geom::PointCloud generate_deterministic(const ckpt::ParamStore& ps,
                                        const ad::Tensor& image, const ModelConfig& cfg) {
    ad::Tape tape;
    TapeParams p = load_params(tape, ps, false);
    int cloud = deterministic_on_tape(tape, p, tape.constant(image), cfg);
    return tensor_to_cloud(tape.value(cloud));
}

ad::Tensor encode_shape(const ckpt::ParamStore& ps, const geom::PointCloud& s,
                        const ModelConfig& cfg) {
    ad::Tape tape;
    TapeParams p = load_params(tape, ps, false);
    int z = encode_shape_on_tape(tape, p, tape.constant(cloud_to_tensor(s)), cfg);
    return tape.value(z);
}

geom::PointCloud decode_shape(const ckpt::ParamStore& ps, const ad::Tensor& latent,
                              const ModelConfig& cfg) {
    ad::Tape tape;
    TapeParams p = load_params(tape, ps, false);
    int cloud = decode_shape_on_tape(tape, p, tape.constant(latent), cfg);
    return tensor_to_cloud(tape.value(cloud));
}

double critic_score(const ckpt::ParamStore& critic, const ad::Tensor& z) {
    ad::Tape tape;
    TapeParams p = load_params(tape, critic, false);
    int s = critic_on_tape(tape, p, tape.constant(z));
    return tape.value(s).v[0];
}

ad::Tensor critic_input_gradient(const ckpt::ParamStore& critic, const ad::Tensor& z) {
    ad::Tape tape;
    TapeParams p = load_params(tape, critic, false);
    int zn = tape.leaf(z, true);
    int s = critic_on_tape(tape, p, zn);
    tape.backward(s);
    return tape.has_grad(zn) ? tape.grad(zn) : ad::Tensor(z.rows, z.cols);
}

ad::Tensor cloud_to_tensor(const geom::PointCloud& pc) {
    ad::Tensor t(static_cast<int>(pc.size()), 3);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        t.at(static_cast<int>(i), 0) = pc[i].x;
        t.at(static_cast<int>(i), 1) = pc[i].y;
        t.at(static_cast<int>(i), 2) = pc[i].z;
    }
    return t;
}

geom::PointCloud tensor_to_cloud(const ad::Tensor& t) {
    if (t.cols != 3) throw ad::ShapeMismatch("tensor_to_cloud: expected (N,3)");
    geom::PointCloud pc;
    pc.points.reserve(t.rows);
    for (int i = 0; i < t.rows; ++i)
        pc.points.emplace_back(t.at(i, 0), t.at(i, 1), t.at(i, 2));
    return pc;
}

ad::Tensor gaussian_latent(int dim, Rng& rng) {
    ad::Tensor t(1, dim);
    for (double& x : t.v) x = rng.normal();
    return t;
}

ad::Tensor image_from_depth(const render::DepthMap& dm, int out_w, int out_h,
                            double z_near, double z_far) {
    ad::Tensor img(1, out_w * out_h);
    int bx = dm.width / out_w, by = dm.height / out_h;
    double span = std::max(z_far - z_near, 1e-12);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            double acc = 0.0;
            for (int y = oy * by; y < (oy + 1) * by; ++y)
                for (int x = ox * bx; x < (ox + 1) * bx; ++x) {
                    if (!dm.occupied(x, y)) continue;
                    double t = (z_far - dm.depth[dm.idx(x, y)]) / span;
                    acc += std::clamp(t, 0.0, 1.0);
                }
            img.v[oy * out_w + ox] = acc / (bx * by);
        }
    }
    return img;
}

}  // namespace mvs::model
