#include "mvs/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "mvs/metrics.hpp"
#include "mvs/render.hpp"

namespace mvs::train {

void Adam::apply(ckpt::ParamStore& params, const std::map<std::string, ad::Tensor>& grads,
                 double sign) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, p] : params.tensors) {
        if (params.frozen.count(name)) continue;
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        const ad::Tensor& g = it->second;
        ad::Tensor& m = m_.try_emplace(name, p.rows, p.cols).first->second;
        ad::Tensor& v = v_.try_emplace(name, p.rows, p.cols).first->second;
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            m.v[i] = beta1_ * m.v[i] + (1.0 - beta1_) * g.v[i];
            v.v[i] = beta2_ * v.v[i] + (1.0 - beta2_) * g.v[i] * g.v[i];
            double mhat = m.v[i] / bc1;
            double vhat = v.v[i] / bc2;
            p.v[i] -= sign * lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::step(ckpt::ParamStore& params, const std::map<std::string, ad::Tensor>& grads) {
    apply(params, grads, 1.0);
}

void Adam::step_ascend(ckpt::ParamStore& params,
                       const std::map<std::string, ad::Tensor>& grads) {
    apply(params, grads, -1.0);
}

TrainConfig paper_stage1() {
    TrainConfig c;
    c.stage = Stage::SingleView;
    c.iterations = 40000;
    c.batch_shapes = 16;
    c.noises_per_view = 5;
    c.weights = losses::stage1_weights();
    c.lr = 1e-4;
    return c;
}

TrainConfig paper_stage2() {
    TrainConfig c;
    c.stage = Stage::MultiView;
    c.iterations = 100000;
    c.batch_shapes = 2;
    c.views_per_shape = 8;
    c.noises_per_view = 5;
    c.weights = losses::stage2_weights();
    c.lr = 1e-4;
    return c;
}

TrainConfig desk_autoencoder() {
    TrainConfig c;
    c.stage = Stage::Autoencoder;
    c.iterations = 1500;
    c.batch_shapes = 8;
    c.lr = 1e-3;
    return c;
}

TrainConfig desk_stage1() {
    TrainConfig c = paper_stage1();
    c.iterations = 2000;
    c.batch_shapes = 4;
    c.lr = 1e-3;
    return c;
}

TrainConfig desk_stage2() {
    TrainConfig c = paper_stage2();
    c.iterations = 3000;
    c.batch_shapes = 2;
    c.noises_per_view = 3;
    c.lr = 1e-3;
    return c;
}

namespace {

struct DivergenceGuard {
    int streak = 0;
    void check(double loss) {
        if (!std::isfinite(loss)) {
            if (++streak >= 3) throw Diverged("training diverged: non-finite loss");
        } else {
            streak = 0;
        }
    }
};

struct LogWriter {
    std::ofstream file;
    explicit LogWriter(const std::string& path, const std::string& provenance = "") {
        if (path.empty()) return;
        file.open(path);
        if (!file) throw IoError("cannot open training log " + path);
        if (!provenance.empty()) file << provenance << "\n";
        file << losses::loss_csv_header() << "\n";
        file.precision(17);
    }
    void row(int iter, const losses::LossReport& r, double wall_ms) {
        if (file.is_open()) file << losses::loss_csv_row(iter, r, wall_ms) << "\n";
    }
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::map<std::string, ad::Tensor> collect_grads(const ad::Tape& tape,
                                                const model::TapeParams& p) {
    std::map<std::string, ad::Tensor> grads;
    for (const auto& [name, id] : p.ids)
        if (tape.has_grad(id)) grads[name] = tape.grad(id);
    return grads;
}

// mean of tape scalars, or a zero constant when empty
int mean_node(ad::Tape& tape, const std::vector<int>& nodes) {
    if (nodes.empty()) return tape.constant(ad::Tensor::scalar(0.0));
    int acc = nodes[0];
    for (std::size_t i = 1; i < nodes.size(); ++i) acc = tape.add(acc, nodes[i]);
    return tape.scale(acc, 1.0 / static_cast<double>(nodes.size()));
}

int front_loss_or_full(ad::Tape& tape, int cloud, const geom::PointCloud& gt,
                       const geom::Camera& cam, losses::FrontMetric metric) {
    try {
        return losses::front_loss_on_tape(tape, cloud, gt, cam, metric);
    } catch (const losses::EmptyFront&) {
        // nothing in the frustum yet: fall back to full-cloud CD for this sample
        int gt_node = tape.constant(model::cloud_to_tensor(gt));
        return losses::chamfer_on_tape(tape, cloud, gt_node);
    }
}

void critic_max_step(ckpt::ParamStore& critic, Adam& opt,
                     const std::vector<ad::Tensor>& z_real,
                     const std::vector<ad::Tensor>& z_fake, double lambda, Rng& rng) {
    std::size_t n = std::min(z_real.size(), z_fake.size());
    std::vector<ad::Tensor> z_hat;
    for (std::size_t i = 0; i < n; ++i) {
        double eps = rng.uniform();
        ad::Tensor h = z_real[i];
        for (std::size_t k = 0; k < h.v.size(); ++k)
            h.v[k] = eps * z_real[i].v[k] + (1.0 - eps) * z_fake[i].v[k];
        z_hat.push_back(std::move(h));
    }
    auto grads = losses::critic_gradient(critic, z_real, z_fake, z_hat, lambda);
    opt.step_ascend(critic, grads);
}

}  // namespace

ckpt::ParamStore pretrain_autoencoder(const std::vector<geom::PointCloud>& corpus,
                                      const TrainConfig& cfg, const model::ModelConfig& mc) {
    if (corpus.empty()) throw Error("pretrain_autoencoder: empty corpus");
    Rng rng(cfg.seed);
    Rng init_rng = rng.fork(1);
    Rng batch_rng = rng.fork(2);
    ckpt::ParamStore ae = model::init_autoencoder(mc, init_rng);
    Adam opt(cfg.lr);
    DivergenceGuard guard;
    LogWriter log(cfg.log_path, cfg.log_provenance);
    for (int it = 0; it < cfg.iterations; ++it) {
        auto t0 = Clock::now();
        ad::Tape tape;
        model::TapeParams p = model::load_params(tape, ae, true);
        std::vector<int> terms;
        for (int b = 0; b < cfg.batch_shapes; ++b) {
            const auto& s = corpus[batch_rng.uniform_int(0, static_cast<int>(corpus.size()) - 1)];
            int in = tape.constant(model::cloud_to_tensor(s));
            int z = model::encode_shape_on_tape(tape, p, in, mc);
            int recon = model::decode_shape_on_tape(tape, p, z, mc);
            terms.push_back(losses::chamfer_on_tape(tape, recon, in));
        }
        int loss = mean_node(tape, terms);
        double lv = tape.value(loss).v[0];
        guard.check(lv);
        tape.backward(loss);
        opt.step(ae, collect_grads(tape, p));
        losses::LossReport r;
        r.front = lv;
        r.total = lv;
        log.row(it, r, ms_since(t0));
    }
    return ae;
}

double autoencoder_eval_cd(const ckpt::ParamStore& ae,
                           const std::vector<geom::PointCloud>& shapes,
                           const model::ModelConfig& mc) {
    double acc = 0.0;
    for (const auto& s : shapes) {
        auto recon = model::decode_shape(ae, model::encode_shape(ae, s, mc), mc);
        acc += losses::chamfer_loss(recon, s);
    }
    return shapes.empty() ? 0.0 : acc / static_cast<double>(shapes.size());
}

TrainResult train_single_view(const synthdata::Dataset& ds, const TrainConfig& cfg,
                              const model::ModelConfig& mc,
                              const ckpt::ParamStore& autoencoder) {
    auto records = ds.split(true);
    if (records.empty()) throw Error("train_single_view: empty train split");
    bool gan = cfg.weights.gamma > 0.0 && !cfg.deterministic_model;
    bool diversity = cfg.weights.beta > 0.0 && !cfg.deterministic_model;
    if (gan && autoencoder.tensors.empty())
        throw Error("train_single_view: gamma > 0 requires a pretrained autoencoder");

    Rng rng(cfg.seed);
    Rng init_rng = rng.fork(1);
    Rng batch_rng = rng.fork(2);
    Rng noise_rng = rng.fork(3);
    Rng critic_rng = rng.fork(4);

    TrainResult res;
    res.autoencoder = autoencoder;
    res.params = cfg.deterministic_model ? model::init_deterministic(mc, init_rng)
                                         : model::init_generator(mc, init_rng);
    if (!autoencoder.tensors.empty()) {
        // transfer the pretrained shape decoder and keep it fixed; the
        // deterministic ablation shares it so the comparison isolates the
        // noise conditioning rather than decoder provenance
        for (const auto& [name, t] : autoencoder.tensors)
            if (name.rfind("dec.", 0) == 0) {
                res.params.tensors[name] = t;
                res.params.frozen.insert(name);
            }
    }
    if (gan) res.critic = model::init_critic(mc, init_rng);

    Adam opt(cfg.lr);
    Adam critic_opt(cfg.lr);
    DivergenceGuard guard;
    LogWriter log(cfg.log_path, cfg.log_provenance);

    for (int it = 0; it < cfg.iterations; ++it) {
        auto t0 = Clock::now();
        ad::Tape tape;
        model::TapeParams p = model::load_params(tape, res.params, true);
        model::TapeParams cp;
        if (gan) cp = model::load_params(tape, res.critic, false);

        std::vector<int> front_terms, div_terms, z_fakes;
        std::vector<ad::Tensor> z_fake_vals;
        std::vector<const synthdata::DatasetRecord*> batch_records;
        for (int b = 0; b < cfg.batch_shapes; ++b) {
            const auto* rec = records[batch_rng.uniform_int(0, static_cast<int>(records.size()) - 1)];
            const auto& view = rec->views[batch_rng.uniform_int(0, static_cast<int>(rec->views.size()) - 1)];
            batch_records.push_back(rec);
            int img = tape.constant(view.image);

            if (cfg.deterministic_model) {
                int cloud = model::deterministic_on_tape(tape, p, img, mc);
                front_terms.push_back(
                    front_loss_or_full(tape, cloud, rec->gt, view.cam, cfg.front_metric));
                continue;
            }

            std::vector<int> r_nodes, clouds;
            for (int k = 0; k < cfg.noises_per_view; ++k) {
                int r = tape.constant(model::gaussian_latent(mc.r_dim, noise_rng));
                auto fwd = model::generate_on_tape(tape, p, img, r, mc);
                r_nodes.push_back(r);
                clouds.push_back(fwd.cloud);
                z_fakes.push_back(fwd.latent);
                front_terms.push_back(
                    front_loss_or_full(tape, fwd.cloud, rec->gt, view.cam, cfg.front_metric));
            }
            if (diversity) {
                for (std::size_t i = 0; i + 1 < clouds.size(); ++i)
                    for (std::size_t j = i + 1; j < clouds.size(); ++j)
                        div_terms.push_back(losses::diversity_loss_on_tape(
                            tape, r_nodes[i], r_nodes[j], clouds[i], clouds[j],
                            cfg.weights.alpha));
            }
        }

        int front = mean_node(tape, front_terms);
        int div = mean_node(tape, div_terms);
        int total = front;
        if (diversity) total = tape.add(total, tape.scale(div, cfg.weights.beta));
        int gan_term = -1;
        if (gan) {
            gan_term = losses::generator_gan_term_on_tape(tape, cp, z_fakes);
            total = tape.add(total, tape.scale(gan_term, cfg.weights.gamma));
        }

        losses::LossReport r;
        r.front = tape.value(front).v[0];
        r.div = tape.value(div).v[0];
        r.gan = gan ? tape.value(gan_term).v[0] : 0.0;
        r.total = tape.value(total).v[0];
        guard.check(r.total);

        tape.backward(total);
        opt.step(res.params, collect_grads(tape, p));

        if (gan) {
            for (int z : z_fakes) z_fake_vals.push_back(tape.value(z));
            std::vector<ad::Tensor> z_real;
            for (const auto* rec : batch_records)
                z_real.push_back(model::encode_shape(autoencoder, rec->gt, mc));
            for (int s = 0; s < cfg.critic_steps; ++s)
                critic_max_step(res.critic, critic_opt, z_real, z_fake_vals,
                                cfg.weights.lambda, critic_rng);
        }
        res.log.push_back(r);
        log.row(it, r, ms_since(t0));
    }
    return res;
}

TrainResult train_multi_view(const synthdata::Dataset& ds, const TrainConfig& cfg,
                             const model::ModelConfig& mc, const TrainResult& stage1) {
    auto records = ds.split(true);
    if (records.empty()) throw Error("train_multi_view: empty train split");
    bool gan = cfg.weights.gamma > 0.0 && !cfg.deterministic_model;
    bool diversity = cfg.weights.beta > 0.0 && !cfg.deterministic_model;

    Rng rng(cfg.seed);
    Rng init_rng = rng.fork(1);
    Rng batch_rng = rng.fork(2);
    Rng noise_rng = rng.fork(3);
    Rng critic_rng = rng.fork(4);

    TrainResult res;
    res.autoencoder = stage1.autoencoder;
    if (!stage1.params.tensors.empty()) {
        res.params = stage1.params;
        res.critic = stage1.critic;
    } else {
        // scratch start for the two-stage ablation
        res.params = cfg.deterministic_model ? model::init_deterministic(mc, init_rng)
                                             : model::init_generator(mc, init_rng);
        if (gan) res.critic = model::init_critic(mc, init_rng);
    }
    if (gan && res.autoencoder.tensors.empty())
        throw Error("train_multi_view: gamma > 0 requires a pretrained autoencoder");
    if (!res.autoencoder.tensors.empty()) {
        for (const auto& [name, t] : res.autoencoder.tensors)
            if (name.rfind("dec.", 0) == 0) {
                res.params.tensors[name] = t;
                res.params.frozen.insert(name);
            }
    }
    if (gan && res.critic.tensors.empty()) res.critic = model::init_critic(mc, init_rng);

    Adam opt(cfg.lr);
    Adam critic_opt(cfg.lr);
    DivergenceGuard guard;
    LogWriter log(cfg.log_path, cfg.log_provenance);

    for (int it = 0; it < cfg.iterations; ++it) {
        auto t0 = Clock::now();
        ad::Tape tape;
        model::TapeParams p = model::load_params(tape, res.params, true);
        model::TapeParams cp;
        if (gan) cp = model::load_params(tape, res.critic, false);

        std::vector<int> front_terms, div_terms, z_fakes;
        std::vector<ad::Tensor> z_fake_vals;
        std::vector<const synthdata::DatasetRecord*> batch_records;

        for (int b = 0; b < cfg.batch_shapes; ++b) {
            const auto* rec = records[batch_rng.uniform_int(0, static_cast<int>(records.size()) - 1)];
            batch_records.push_back(rec);
            int n_views = std::min<int>(cfg.views_per_shape,
                                        static_cast<int>(rec->views.size()));

            // per view, per noise-group prediction; concatenation over views
            std::vector<std::vector<int>> clouds(cfg.noises_per_view);
            std::vector<std::vector<int>> r_nodes(cfg.noises_per_view);
            for (int j = 0; j < cfg.noises_per_view; ++j) {
                for (int v = 0; v < n_views; ++v) {
                    int img = tape.constant(rec->views[v].image);
                    if (cfg.deterministic_model) {
                        clouds[j].push_back(model::deterministic_on_tape(tape, p, img, mc));
                    } else {
                        int r = tape.constant(model::gaussian_latent(mc.r_dim, noise_rng));
                        auto fwd = model::generate_on_tape(tape, p, img, r, mc);
                        clouds[j].push_back(fwd.cloud);
                        r_nodes[j].push_back(r);
                        z_fakes.push_back(fwd.latent);
                    }
                }
                int concat = clouds[j][0];
                for (int v = 1; v < n_views; ++v) concat = tape.concat(concat, clouds[j][v], 0);
                for (int v = 0; v < n_views; ++v)
                    front_terms.push_back(front_loss_or_full(
                        tape, concat, rec->gt, rec->views[v].cam, cfg.front_metric));
                if (cfg.deterministic_model) break;  // groups are identical
            }

            if (diversity && !cfg.deterministic_model) {
                if (cfg.diversity_on_concat) {
                    // Appendix-style variant: constraint on whole concatenations
                    std::vector<int> concats;
                    for (int j = 0; j < cfg.noises_per_view; ++j) {
                        int c = clouds[j][0];
                        for (int v = 1; v < n_views; ++v) c = tape.concat(c, clouds[j][v], 0);
                        concats.push_back(c);
                    }
                    for (int i = 0; i + 1 < cfg.noises_per_view; ++i)
                        for (int j = i + 1; j < cfg.noises_per_view; ++j) {
                            int ri = r_nodes[i][0], rj = r_nodes[j][0];
                            for (int v = 1; v < n_views; ++v) {
                                ri = tape.concat(ri, r_nodes[i][v], 1);
                                rj = tape.concat(rj, r_nodes[j][v], 1);
                            }
                            div_terms.push_back(losses::diversity_loss_on_tape(
                                tape, ri, rj, concats[i], concats[j], cfg.weights.alpha));
                        }
                } else {
                    for (int v = 0; v < n_views; ++v)
                        for (int i = 0; i + 1 < cfg.noises_per_view; ++i)
                            for (int j = i + 1; j < cfg.noises_per_view; ++j)
                                div_terms.push_back(losses::diversity_loss_on_tape(
                                    tape, r_nodes[i][v], r_nodes[j][v], clouds[i][v],
                                    clouds[j][v], cfg.weights.alpha));
                }
            }
        }

        int front = mean_node(tape, front_terms);
        int div = mean_node(tape, div_terms);
        int total = front;
        if (diversity && !cfg.deterministic_model)
            total = tape.add(total, tape.scale(div, cfg.weights.beta));
        int gan_term = -1;
        if (gan && !z_fakes.empty()) {
            gan_term = losses::generator_gan_term_on_tape(tape, cp, z_fakes);
            total = tape.add(total, tape.scale(gan_term, cfg.weights.gamma));
        }

        losses::LossReport r;
        r.front = tape.value(front).v[0];
        r.div = tape.value(div).v[0];
        r.gan = (gan && gan_term >= 0) ? tape.value(gan_term).v[0] : 0.0;
        r.total = tape.value(total).v[0];
        guard.check(r.total);

        tape.backward(total);
        opt.step(res.params, collect_grads(tape, p));

        if (gan && !z_fakes.empty()) {
            for (int z : z_fakes) z_fake_vals.push_back(tape.value(z));
            std::vector<ad::Tensor> z_real;
            for (const auto* rec : batch_records)
                z_real.push_back(model::encode_shape(res.autoencoder, rec->gt, mc));
            for (int s = 0; s < cfg.critic_steps; ++s)
                critic_max_step(res.critic, critic_opt, z_real, z_fake_vals,
                                cfg.weights.lambda, critic_rng);
        }
        res.log.push_back(r);
        log.row(it, r, ms_since(t0));
    }
    return res;
}

}  // namespace mvs::train
