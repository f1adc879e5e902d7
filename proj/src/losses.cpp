#include "mvs/losses.hpp"

#include <cmath>
#include <sstream>

#include "mvs/metrics.hpp"
#include "mvs/render.hpp"

namespace mvs::losses {

LossWeights stage1_weights() { return {0.2, 10.0, 0.1, 10.0}; }
LossWeights stage2_weights() { return {0.1, 1.0, 0.1, 10.0}; }
LossWeights highly_diverse_weights() { return {15.0, 0.5, 0.1, 10.0}; }

int chamfer_on_tape(ad::Tape& tape, int s1, int s2) {
    int d = tape.sqdist_matrix(s1, s2);
    int m1 = tape.reduce_min_with_index(d, 1);
    int m2 = tape.reduce_min_with_index(d, 0);
    int d12 = tape.reduce_sum(tape.sqrt_(m1));
    int d21 = tape.reduce_sum(tape.sqrt_(m2));
    return tape.add(d12, d21);
}

int emd_cost_on_tape(ad::Tape& tape, int s1, int s2) {
    auto c1 = model::tensor_to_cloud(tape.value(s1));
    auto c2 = model::tensor_to_cloud(tape.value(s2));
    auto matching = metrics::emd(c1, c2);
    int s2_perm = tape.gather_rows(s2, matching.assignment);
    int diff = tape.sub(s1, s2_perm);
    return tape.reduce_sum(tape.mul(diff, diff));
}

int front_loss_on_tape(ad::Tape& tape, int pred_cloud, const geom::PointCloud& gt,
                       const geom::Camera& cam, FrontMetric metric) {
    auto pred = model::tensor_to_cloud(tape.value(pred_cloud));
    if (pred.empty() || gt.empty()) throw metrics::EmptyCloud("front_loss: empty cloud");
    auto pred_front_idx = render::view_based_sample(pred, cam).front_indices;
    if (pred_front_idx.empty())
        throw EmptyFront("front_loss: no predicted point falls in the frustum");
    auto gt_front_idx = render::view_based_sample(gt, cam).front_indices;
    if (gt_front_idx.empty())
        throw EmptyFront("front_loss: groundtruth has no visible front part");

    geom::PointCloud gt_front;
    for (int i : gt_front_idx) gt_front.points.push_back(gt[i]);

    if (metric == FrontMetric::CD) {
        int pred_front = tape.gather_rows(pred_cloud, pred_front_idx);
        int gt_node = tape.constant(model::cloud_to_tensor(gt_front));
        return chamfer_on_tape(tape, pred_front, gt_node);
    }

    // EMD: FPS-downsample the larger front part to equalize counts
    geom::PointCloud pred_front;
    for (int i : pred_front_idx) pred_front.points.push_back(pred[i]);
    if (pred_front.size() > gt_front.size()) {
        auto keep = metrics::fps(pred_front, gt_front.size(),
                                 metrics::fps_default_start(pred_front));
        std::vector<int> composed;
        for (int i : keep) composed.push_back(pred_front_idx[i]);
        pred_front_idx = std::move(composed);
    } else if (gt_front.size() > pred_front.size()) {
        auto keep = metrics::fps(gt_front, pred_front.size(),
                                 metrics::fps_default_start(gt_front));
        geom::PointCloud down;
        for (int i : keep) down.points.push_back(gt_front[i]);
        gt_front = std::move(down);
    }
    int pred_node = tape.gather_rows(pred_cloud, pred_front_idx);
    int gt_node = tape.constant(model::cloud_to_tensor(gt_front));
    return emd_cost_on_tape(tape, pred_node, gt_node);
}

int diversity_loss_on_tape(ad::Tape& tape, int r1, int r2, int s1, int s2, double alpha) {
    if (tape.value(s1).rows != tape.value(s2).rows)
        throw metrics::SizeMismatch("diversity_loss: clouds must have equal size");
    int d = tape.sub(r1, r2);
    int margin = tape.sqrt_(tape.reduce_sum(tape.mul(d, d)));
    int emd = emd_cost_on_tape(tape, s1, s2);
    return tape.relu(tape.sub(margin, tape.scale(emd, alpha)));
}

int consistency_loss_on_tape(ad::Tape& tape, const std::vector<int>& clouds) {
    std::size_t n = clouds.size();
    if (n < 2) throw TooFewViews("consistency_loss: need at least 2 views");
    int acc = -1;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            int cd = chamfer_on_tape(tape, clouds[i], clouds[j]);
            acc = (acc < 0) ? cd : tape.add(acc, cd);
        }
    double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return tape.scale(acc, 1.0 / pairs);
}

int generator_gan_term_on_tape(ad::Tape& tape, const model::TapeParams& critic,
                               const std::vector<int>& z_fake_nodes) {
    int acc = -1;
    for (int z : z_fake_nodes) {
        int s = model::critic_on_tape(tape, critic, z);
        acc = (acc < 0) ? s : tape.add(acc, s);
    }
    return tape.scale(acc, -1.0 / static_cast<double>(z_fake_nodes.size()));
}

double chamfer_loss(const geom::PointCloud& s1, const geom::PointCloud& s2) {
    auto [d12, d21] = metrics::chamfer(s1, s2);
    return d12 + d21;
}

double front_loss(const geom::PointCloud& pred, const geom::PointCloud& gt,
                  const geom::Camera& cam, FrontMetric metric) {
    ad::Tape tape;
    int p = tape.constant(model::cloud_to_tensor(pred));
    return tape.value(front_loss_on_tape(tape, p, gt, cam, metric)).v[0];
}

double diversity_loss(const ad::Tensor& r1, const ad::Tensor& r2,
                      const geom::PointCloud& s1, const geom::PointCloud& s2,
                      double alpha) {
    ad::Tape tape;
    int a = tape.constant(r1), b = tape.constant(r2);
    int c1 = tape.constant(model::cloud_to_tensor(s1));
    int c2 = tape.constant(model::cloud_to_tensor(s2));
    return tape.value(diversity_loss_on_tape(tape, a, b, c1, c2, alpha)).v[0];
}

double consistency_loss(const std::vector<geom::PointCloud>& shapes) {
    ad::Tape tape;
    std::vector<int> nodes;
    nodes.reserve(shapes.size());
    for (const auto& s : shapes) nodes.push_back(tape.constant(model::cloud_to_tensor(s)));
    return tape.value(consistency_loss_on_tape(tape, nodes)).v[0];
}

double gradient_penalty(const ckpt::ParamStore& critic,
                        const std::vector<ad::Tensor>& z_hat) {
    if (z_hat.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& z : z_hat) {
        ad::Tensor g = model::critic_input_gradient(critic, z);
        double norm = 0.0;
        for (double x : g.v) norm += x * x;
        norm = std::sqrt(norm);
        acc += (norm - 1.0) * (norm - 1.0);
    }
    return acc / static_cast<double>(z_hat.size());
}

namespace {

double mean_critic_score(const ckpt::ParamStore& critic, const std::vector<ad::Tensor>& zs) {
    double acc = 0.0;
    for (const auto& z : zs) acc += model::critic_score(critic, z);
    return zs.empty() ? 0.0 : acc / static_cast<double>(zs.size());
}

}  // namespace

double critic_objective(const ckpt::ParamStore& critic,
                        const std::vector<ad::Tensor>& z_real,
                        const std::vector<ad::Tensor>& z_fake,
                        const std::vector<ad::Tensor>& z_hat, double lambda) {
    return -mean_critic_score(critic, z_fake) + mean_critic_score(critic, z_real) -
           lambda * gradient_penalty(critic, z_hat);
}

std::pair<double, double> gan_terms(const ckpt::ParamStore& critic,
                                    const std::vector<ad::Tensor>& z_real,
                                    const std::vector<ad::Tensor>& z_fake,
                                    const std::vector<ad::Tensor>& z_hat, double lambda) {
    double gen_term = -mean_critic_score(critic, z_fake);
    double critic_term = critic_objective(critic, z_real, z_fake, z_hat, lambda);
    return {gen_term, critic_term};
}

std::map<std::string, ad::Tensor> critic_gradient(const ckpt::ParamStore& critic,
                                                  const std::vector<ad::Tensor>& z_real,
                                                  const std::vector<ad::Tensor>& z_fake,
                                                  const std::vector<ad::Tensor>& z_hat,
                                                  double lambda, double fd_step) {
    // exact part: d/dθ [ -mean D(z_fake) + mean D(z_real) ]
    ad::Tape tape;
    model::TapeParams p = model::load_params(tape, critic, true);
    int acc = -1;
    auto add_scored = [&](const std::vector<ad::Tensor>& zs, double w) {
        if (zs.empty()) return;
        int local = -1;
        for (const auto& z : zs) {
            int s = model::critic_on_tape(tape, p, tape.constant(z));
            local = (local < 0) ? s : tape.add(local, s);
        }
        int scaled = tape.scale(local, w / static_cast<double>(zs.size()));
        acc = (acc < 0) ? scaled : tape.add(acc, scaled);
    };
    add_scored(z_fake, -1.0);
    add_scored(z_real, 1.0);

    std::map<std::string, ad::Tensor> grads;
    for (const auto& [name, t] : critic.tensors) grads[name] = ad::Tensor(t.rows, t.cols);
    if (acc >= 0) {
        tape.backward(acc);
        for (const auto& [name, id] : p.ids)
            if (tape.has_grad(id)) grads[name] = tape.grad(id);
    }

    // penalty part by central differences over critic parameters
    if (lambda != 0.0 && !z_hat.empty()) {
        ckpt::ParamStore probe = critic;
        for (auto& [name, t] : probe.tensors) {
            ad::Tensor& g = grads[name];
            for (std::size_t i = 0; i < t.v.size(); ++i) {
                double orig = t.v[i];
                t.v[i] = orig + fd_step;
                double up = gradient_penalty(probe, z_hat);
                t.v[i] = orig - fd_step;
                double dn = gradient_penalty(probe, z_hat);
                t.v[i] = orig;
                g.v[i] -= lambda * (up - dn) / (2.0 * fd_step);
            }
        }
    }
    return grads;
}

LossReport combined_loss(double front, double div, double gan, const LossWeights& w) {
    LossReport r;
    r.front = front;
    r.div = div;
    r.gan = gan;
    r.total = front + w.beta * div + w.gamma * gan;
    return r;
}

std::string loss_csv_header() { return "iter,front,div,gan,total,wall_ms"; }

std::string loss_csv_row(int iter, const LossReport& r, double wall_ms) {
    std::ostringstream ss;
    ss.precision(17);
    ss << iter << "," << r.front << "," << r.div << "," << r.gan << "," << r.total
       << "," << wall_ms;
    return ss.str();
}

}  // namespace mvs::losses
