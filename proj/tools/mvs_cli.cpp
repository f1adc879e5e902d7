// Command-line front end: data generation, training, inference, evaluation.
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mvs/config.hpp"
#include "mvs/eval.hpp"
#include "mvs/infer.hpp"
#include "mvs/render.hpp"
#include "mvs/synthdata.hpp"
#include "mvs/train.hpp"

namespace fs = std::filesystem;
using namespace mvs;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string provenance_line(const config::Config& cfg, std::uint64_t seed) {
    std::ostringstream ss;
    ss << "# provenance config_hash=" << std::hex << std::setw(16) << std::setfill('0')
       << cfg.hash() << std::dec << " seed=" << seed << " version=" << kVersion;
    return ss.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open output file " + path);
    f.precision(17);
    return f;
}

void write_sidecar(const std::string& path, const std::string& prov) {
    auto f = open_out(path + ".prov");
    f << prov << "\n";
}

model::ModelConfig model_config(const config::Config& cfg) {
    model::ModelConfig mc;
    mc.img_w = cfg.get("model.img_w", mc.img_w);
    mc.img_h = cfg.get("model.img_h", mc.img_h);
    mc.n_points = cfg.get("model.points", mc.n_points);
    mc.r_dim = cfg.get("model.r_dim", mc.r_dim);
    mc.zi_dim = cfg.get("model.zi_dim", mc.zi_dim);
    mc.zr_dim = cfg.get("model.zr_dim", mc.zr_dim);
    return mc;
}

std::string data_dir(const config::Config& cfg) {
    std::string d = cfg.get("data.dir", std::string());
    if (d.empty()) throw config::ConfigError("missing config key 'data.dir'");
    return d;
}

infer::InferenceConfig infer_config(const config::Config& cfg, std::uint64_t seed) {
    infer::InferenceConfig ic;
    ic.init_groups = cfg.get("infer.groups", ic.init_groups);
    ic.opt_steps = cfg.get("infer.steps", ic.opt_steps);
    ic.opt_lr = cfg.get("infer.lr", ic.opt_lr);
    ic.tol = cfg.get("infer.tol", ic.tol);
    ic.seed = seed;
    return ic;
}

losses::FrontMetric front_metric(const config::Config& cfg) {
    std::string m = cfg.get("train.front_metric", std::string("cd"));
    if (m == "cd") return losses::FrontMetric::CD;
    if (m == "emd") return losses::FrontMetric::EMD;
    throw config::ConfigError("train.front_metric must be cd or emd");
}

train::TrainConfig stage_config(const config::Config& cfg, std::uint64_t seed, int stage) {
    train::TrainConfig tc;
    if (stage == 0) {
        tc = train::desk_autoencoder();
        tc.iterations = cfg.get("train.ae_iters", tc.iterations);
    } else if (stage == 1) {
        tc = train::desk_stage1();
        tc.iterations = cfg.get("train.stage1_iters", tc.iterations);
        tc.weights.alpha = cfg.get("train.alpha1", tc.weights.alpha);
        tc.weights.beta = cfg.get("train.beta1", tc.weights.beta);
    } else {
        tc = train::desk_stage2();
        tc.iterations = cfg.get("train.stage2_iters", tc.iterations);
        tc.weights.alpha = cfg.get("train.alpha2", tc.weights.alpha);
        tc.weights.beta = cfg.get("train.beta2", tc.weights.beta);
        tc.views_per_shape = cfg.get("train.views", tc.views_per_shape);
        tc.diversity_on_concat = cfg.get("train.diversity_on_concat", false);
    }
    tc.batch_shapes = cfg.get("train.batch", tc.batch_shapes);
    tc.noises_per_view = cfg.get("train.noises", tc.noises_per_view);
    tc.weights.gamma = cfg.get("train.gamma", tc.weights.gamma);
    tc.weights.lambda = cfg.get("train.lambda", tc.weights.lambda);
    tc.lr = cfg.get("train.lr", tc.lr);
    tc.deterministic_model = cfg.get("train.deterministic", false);
    tc.front_metric = front_metric(cfg);
    tc.seed = seed;
    tc.log_provenance = provenance_line(cfg, seed);
    return tc;
}

int cmd_gen_data(const config::Config& cfg, const std::string& out, std::uint64_t seed) {
    geom::ViewRing ring;
    ring.view_count = cfg.get("data.views", ring.view_count);
    ring.seed = seed;
    int n = cfg.get("data.shapes", 200);
    std::vector<synthdata::Family> fams;
    std::string names = cfg.get("data.families", std::string("chairlike,boxcar,tee"));
    std::istringstream ss(names);
    for (std::string tok; std::getline(ss, tok, ',');)
        fams.push_back(synthdata::family_from_name(tok));
    fs::create_directories(out);
    synthdata::build_dataset(n, fams, ring, out);
    auto f = open_out(out + "/provenance.txt");
    f << provenance_line(cfg, seed) << "\n";
    std::cout << "wrote dataset of " << n << " shapes to " << out << "\n";
    return 0;
}

int cmd_train(const config::Config& cfg, const std::string& out, std::uint64_t seed) {
    fs::create_directories(out);
    auto mc = model_config(cfg);
    auto ds = synthdata::load_dataset(data_dir(cfg), mc.img_w, mc.img_h);
    std::string prov = provenance_line(cfg, seed);
    std::string stage = cfg.get("train.stage", std::string("full"));

    std::vector<geom::PointCloud> corpus;
    for (const auto* r : ds.split(true)) corpus.push_back(r->gt);

    train::TrainConfig tc0 = stage_config(cfg, seed, 0);
    train::TrainConfig tc1 = stage_config(cfg, seed, 1);
    train::TrainConfig tc2 = stage_config(cfg, seed, 2);
    bool deterministic = tc1.deterministic_model;

    ckpt::ParamStore ae;
    if (!deterministic && (tc1.weights.gamma > 0.0 || stage == "autoencoder")) {
        tc0.log_path = out + "/train_ae.csv";
        ae = train::pretrain_autoencoder(corpus, tc0, mc);
        ckpt::save_checkpoint(ae, out + "/ae.ckpt");
        write_sidecar(out + "/ae.ckpt", prov);
        std::cout << "autoencoder eval CD: " << train::autoencoder_eval_cd(ae, corpus, mc)
                  << "\n";
    }
    if (stage == "autoencoder") return 0;

    tc1.log_path = out + "/train_stage1.csv";
    auto s1 = train::train_single_view(ds, tc1, mc, ae);
    ckpt::save_checkpoint(s1.params, out + "/stage1.ckpt");
    write_sidecar(out + "/stage1.ckpt", prov);
    if (!s1.critic.tensors.empty()) {
        ckpt::save_checkpoint(s1.critic, out + "/stage1_critic.ckpt");
        write_sidecar(out + "/stage1_critic.ckpt", prov);
    }
    std::cout << "stage1 final front loss: " << s1.log.back().front << "\n";
    if (stage == "stage1") {
        ckpt::save_checkpoint(s1.params, out + "/model.ckpt");
        write_sidecar(out + "/model.ckpt", prov);
        return 0;
    }

    tc2.log_path = out + "/train_stage2.csv";
    auto s2 = train::train_multi_view(ds, tc2, mc, s1);
    ckpt::save_checkpoint(s2.params, out + "/stage2.ckpt");
    write_sidecar(out + "/stage2.ckpt", prov);
    ckpt::save_checkpoint(s2.params, out + "/model.ckpt");
    write_sidecar(out + "/model.ckpt", prov);
    if (!s2.critic.tensors.empty()) {
        ckpt::save_checkpoint(s2.critic, out + "/stage2_critic.ckpt");
        write_sidecar(out + "/stage2_critic.ckpt", prov);
    }
    std::cout << "stage2 final front loss: " << s2.log.back().front << "\n";
    return 0;
}

const synthdata::DatasetRecord& pick_record(const synthdata::Dataset& ds,
                                            const std::string& shape_id) {
    for (const auto& r : ds.records)
        if (shape_id.empty() ? !r.train_split : r.shape_id == shape_id) return r;
    if (!shape_id.empty()) throw Error("shape_id not found: " + shape_id);
    if (ds.records.empty()) throw Error("empty dataset");
    return ds.records.front();
}

int cmd_infer(const config::Config& cfg, const std::string& ckpt_path,
              const std::string& out, int views, std::uint64_t seed) {
    fs::create_directories(out);
    auto mc = model_config(cfg);
    auto ds = synthdata::load_dataset(data_dir(cfg), mc.img_w, mc.img_h);
    auto params = ckpt::load_checkpoint(ckpt_path);
    const auto& rec = pick_record(ds, cfg.get("infer.shape_id", std::string()));
    auto icfg = infer_config(cfg, seed);
    std::string prov = provenance_line(cfg, seed);

    int n = std::min<int>(views, static_cast<int>(rec.views.size()));
    std::vector<ad::Tensor> images;
    for (int i = 0; i < n; ++i) images.push_back(rec.views[i].image);

    infer::InferenceTrace trace;
    auto pred = infer::reconstruct(params, images, mc, icfg, &trace);
    auto rep = metrics::make_report(pred, rec.gt);

    geom::save_ply(pred, out + "/infer.ply");
    write_sidecar(out + "/infer.ply", prov);

    auto tf = open_out(out + "/trace.csv");
    tf << prov << "\nstep,consis,accepted\n";
    for (std::size_t i = 0; i < trace.consistency.size(); ++i)
        tf << i << "," << trace.consistency[i] << ",1\n";

    auto sf = open_out(out + "/summary.txt");
    sf << prov << "\n"
       << "shape_id=" << rec.shape_id << "\n"
       << "n_views=" << n << "\n"
       << "init_consis=" << trace.consistency.front() << "\n"
       << "final_consis=" << trace.consistency.back() << "\n"
       << "cd_x100=" << 100.0 * rep.cd << "\n"
       << "norm_cd_x100=" << 100.0 * rep.norm_cd << "\n"
       << "fps_cd_x100=" << 100.0 * rep.fps_cd << "\n";
    std::cout << "final consistency " << trace.consistency.back() << ", CDx100 "
              << 100.0 * rep.cd << "\n";
    return 0;
}

int cmd_eval(const config::Config& cfg, const std::string& ckpt_path,
             const std::string& out, int views, std::uint64_t seed) {
    fs::create_directories(out);
    auto mc = model_config(cfg);
    auto ds = synthdata::load_dataset(data_dir(cfg), mc.img_w, mc.img_h);
    auto params = ckpt::load_checkpoint(ckpt_path);
    auto eps = eval::run_episodes(params, ds.split(false), views, eval::InitMode::HeuristicOpt,
                                  mc, infer_config(cfg, seed));
    auto f = open_out(out + "/eval.csv");
    f << provenance_line(cfg, seed) << "\n" << eval::episode_csv_header() << "\n";
    for (const auto& e : eps) f << eval::episode_csv_row(e) << "\n";
    std::cout << "test shapes: " << eps.size() << ", mean normalized CDx100: "
              << eval::mean_norm_cd_x100(eps) << "\n";
    return 0;
}

int cmd_render(const std::string& ply, const std::string& cam_path,
               const std::string& out_pgm) {
    auto pc = geom::load_ply(ply);
    auto cam = geom::load_camera(cam_path);
    auto dm = render::render_depth(pc, cam);
    // eye distance from origin sets the recorded depth window
    geom::Point3 eye = cam.to_world({0, 0, 0});
    auto [zn, zf] = synthdata::depth_range(eye.norm());
    render::save_pgm(dm, out_pgm, zn, zf);
    std::cout << "wrote " << out_pgm << "\n";
    return 0;
}

int cmd_diversity(const config::Config& cfg, const std::string& ckpt_path,
                  const std::string& out, std::uint64_t seed) {
    fs::create_directories(out);
    auto mc = model_config(cfg);
    auto ds = synthdata::load_dataset(data_dir(cfg), mc.img_w, mc.img_h);
    auto params = ckpt::load_checkpoint(ckpt_path);
    int k = cfg.get("diversity.k", 10);
    auto recs = ds.split(false);
    auto f = open_out(out + "/diversity.csv");
    f << provenance_line(cfg, seed) << "\nshape_id,diversity\n";
    for (std::size_t i = 0; i < recs.size(); ++i)
        f << recs[i]->shape_id << ","
          << eval::diversity_score(params, recs[i]->views[0].image, k, mc,
                                   seed + 7919ull * (i + 1))
          << "\n";
    double mean = eval::mean_diversity(params, recs, k, mc, seed);
    f << "mean," << mean << "\n";
    std::cout << "corpus mean diversity: " << mean << "\n";
    return 0;
}

int cmd_correlate(const config::Config& cfg, const std::string& ckpt_path,
                  const std::string& out, int episodes, std::uint64_t seed) {
    fs::create_directories(out);
    auto mc = model_config(cfg);
    auto ds = synthdata::load_dataset(data_dir(cfg), mc.img_w, mc.img_h);
    auto params = ckpt::load_checkpoint(ckpt_path);
    auto recs = ds.split(false);
    if (recs.empty()) throw Error("correlate: empty test split");
    int views = cfg.get("infer.views", 8);
    auto icfg = infer_config(cfg, seed);

    auto f = open_out(out + "/correlate.csv");
    f << provenance_line(cfg, seed) << "\nshape_id,final_consis,norm_cd_x100\n";
    std::vector<double> consis, cds;
    for (int i = 0; i < episodes; ++i) {
        icfg.seed = seed + 1000003ull * (i + 1);
        auto ep = eval::run_episode(params, *recs[i % recs.size()], views,
                                    eval::InitMode::HeuristicOpt, mc, icfg);
        f << ep.shape_id << "," << ep.final_consistency << "," << ep.norm_cd_x100 << "\n";
        consis.push_back(ep.final_consistency);
        cds.push_back(ep.norm_cd_x100);
    }
    double r = 0.0;
    bool ok = eval::pearson(consis, cds, r);

    auto sf = open_out(out + "/summary.txt");
    sf << provenance_line(cfg, seed) << "\n";
    icfg.seed = seed;
    for (auto mode : {eval::InitMode::Random, eval::InitMode::Heuristic,
                      eval::InitMode::HeuristicOpt}) {
        auto eps = eval::run_episodes(params, recs, views, mode, mc, icfg);
        sf << eval::init_mode_name(mode)
           << " mean_norm_cd_x100=" << eval::mean_norm_cd_x100(eps) << "\n";
    }
    if (ok)
        sf << "pearson_r=" << r << "\n";
    else
        sf << "pearson_r=NA\n";
    std::cout << "pearson r: " << (ok ? std::to_string(r) : std::string("NA")) << " over "
              << episodes << " episodes\n";
    return 0;
}

int cmd_views_sweep(const config::Config& cfg, const std::string& ckpt_path,
                    const std::string& out, std::uint64_t seed) {
    fs::create_directories(out);
    auto mc = model_config(cfg);
    auto ds = synthdata::load_dataset(data_dir(cfg), mc.img_w, mc.img_h);
    auto params = ckpt::load_checkpoint(ckpt_path);
    auto recs = ds.split(false);
    auto f = open_out(out + "/views_sweep.csv");
    f << provenance_line(cfg, seed) << "\nn_views,mean_norm_cd_x100\n";
    for (int n : {1, 2, 4, 8}) {
        auto eps = eval::run_episodes(params, recs, n, eval::InitMode::HeuristicOpt, mc,
                                      infer_config(cfg, seed));
        f << n << "," << eval::mean_norm_cd_x100(eps) << "\n";
        std::cout << "n=" << n << " mean normalized CDx100 "
                  << eval::mean_norm_cd_x100(eps) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional single-view shape generation, desk scale"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", checkpoint;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int views = 8, episodes = 200;
    std::string ply, cam_path, out_pgm;

    auto add_common = [&](CLI::App* sub, bool needs_cfg) {
        auto* c = sub->add_option("--config", config_path, "config file path");
        if (needs_cfg) c->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; },
            "seed override");
    };

    auto* gen = app.add_subcommand("gen-data", "generate the procedural corpus");
    add_common(gen, true);
    auto* tr = app.add_subcommand("train", "two-stage training");
    add_common(tr, true);
    auto* inf = app.add_subcommand("infer", "multi-view reconstruction of one shape");
    add_common(inf, true);
    inf->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    inf->add_option("--views", views, "number of input views");
    auto* ev = app.add_subcommand("eval", "test-split evaluation");
    add_common(ev, true);
    ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    ev->add_option("--views", views, "number of input views");
    auto* rd = app.add_subcommand("render", "depth-render a PLY from a camera file");
    rd->add_option("ply", ply, "input PLY")->required();
    rd->add_option("camera", cam_path, "camera text file")->required();
    rd->add_option("out_pgm", out_pgm, "output PGM")->required();
    auto* dv = app.add_subcommand("diversity", "conditional sample spread per image");
    add_common(dv, true);
    dv->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    auto* co = app.add_subcommand("correlate", "consistency vs error correlation");
    add_common(co, true);
    co->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    co->add_option("--episodes", episodes, "number of inference episodes");
    auto* vs = app.add_subcommand("views-sweep", "mean CD vs number of views");
    add_common(vs, true);
    vs->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

    try {
        app.parse(argc, argv);
        config::Config cfg;
        if (!config_path.empty()) cfg = config::Config::parse_file(config_path);
        if (!seed_given) seed = cfg.get_u64("seed", 0);

        if (*gen) return cmd_gen_data(cfg, out_dir, seed);
        if (*tr) return cmd_train(cfg, out_dir, seed);
        if (*inf) return cmd_infer(cfg, checkpoint, out_dir, views, seed);
        if (*ev) return cmd_eval(cfg, checkpoint, out_dir, views, seed);
        if (*rd) return cmd_render(ply, cam_path, out_pgm);
        if (*dv) return cmd_diversity(cfg, checkpoint, out_dir, seed);
        if (*co) return cmd_correlate(cfg, checkpoint, out_dir, episodes, seed);
        if (*vs) return cmd_views_sweep(cfg, checkpoint, out_dir, seed);
        return 0;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const losses::TooFewViews& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const train::Diverged& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
