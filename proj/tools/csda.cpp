// csda: synthetic cloth depth data generation, domain-adversarial training
// of the segmenter, evaluation and visualization, as batch subcommands.
//
// Exit codes: 0 success, 1 runtime/IO failure, 2 usage or validation error.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "csda/camera.hpp"
#include "csda/config.hpp"
#include "csda/image.hpp"
#include "csda/render.hpp"
#include "csda/sensor.hpp"
#include "csda/train.hpp"

namespace fs = std::filesystem;
using namespace csda;

namespace {

constexpr const char* kVersion = "0.1.0";

int worker_count() {
    if (const char* env = std::getenv("CSDA_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

struct RunManifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_s = 0;

    void write(const fs::path& path) const {
        std::ofstream os(path, std::ios::trunc);
        os << "command=" << command << "\n";
        os << "tool_version=" << kVersion << "\n";
        os << "config_hash=" << config_hash << "\n";
        os << "seed=" << seed << "\n";
        for (const auto& i : inputs) os << "input=" << i << "\n";
        for (const auto& o : outputs) os << "output=" << o << "\n";
        os << "wall_clock_s=" << wall_s << "\n";
    }
};

Config load_config(const std::string& path) {
    if (path.empty()) return Config{};
    return Config::from_file(path);
}

double cm_per_px_for(const Config& cfg, int sample_w) {
    double focal = cfg.real("focal_px");
    focal *= static_cast<double>(sample_w) / cfg.real("image_w");
    return 100.0 * cfg.real("ring_radius_m") / focal;
}

SimParams sim_params_for(const Config& cfg, Domain domain) {
    SimParams p;
    p.frame_dt = cfg.real("sim_dt");
    p.substeps = cfg.integer("sim_substeps");
    p.damping = cfg.real("damping");
    p.density = cfg.real("density");
    p.stiffness.structural = cfg.real("k_structural");
    p.stiffness.shear = cfg.real("k_shear");
    p.stiffness.bend = cfg.real("k_bend");
    if (domain == Domain::surrogate_real)
        p.stiffness.structural *= cfg.real("surrogate_k_structural_scale");
    return p;
}

// ---------------- gen ----------------

int cmd_gen(const std::string& config_path, const std::string& out_dir,
            const std::string& domain_name_s, std::uint64_t seed, int configs) {
    const auto t0 = std::chrono::steady_clock::now();
    if (configs < 1) {
        std::cerr << "gen: --configs must be >= 1\n";
        return 2;
    }
    const Config cfg = load_config(config_path);
    const Domain domain = domain_from_name(domain_name_s);
    fs::create_directories(out_dir);
    if (!fs::is_directory(out_dir)) {
        std::cerr << "gen: cannot create output directory " << out_dir << "\n";
        return 1;
    }

    const auto mesh = build_surrogate_tshirt(cfg.real("body_w"), cfg.real("body_h"),
                                             cfg.real("sleeve_w"), cfg.real("sleeve_h"),
                                             cfg.real("resolution"), cfg.real("density"));
    const SimParams params = sim_params_for(cfg, domain);
    const int cameras = cfg.integer("cameras");
    const int image_w = cfg.integer("image_w");
    const int image_h = cfg.integer("image_h");
    const double focal = cfg.real("focal_px");
    const int sim_steps = cfg.integer("sim_steps");
    const auto hangs = sample_hang_configs(seed, configs, static_cast<int>(mesh.vertices.size()));

    std::vector<int> ids(static_cast<std::size_t>(configs));
    for (int i = 0; i < configs; ++i) ids[static_cast<std::size_t>(i)] = i;
    const auto split = configs >= 2 ? make_splits(ids, cfg.real("test_fraction"), seed)
                                    : SplitAssignment{{0}, {}};
    auto split_of = [&](int id) {
        for (int t : split.test_configs)
            if (t == id) return std::string("test");
        return std::string("train");
    };

    std::vector<ManifestEntry> entries(static_cast<std::size_t>(configs) *
                                       static_cast<std::size_t>(cameras));
    std::atomic<int> next{0};
    std::atomic<int> rest_warnings{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;

    auto work = [&]() {
        for (int ci = next.fetch_add(1); ci < configs; ci = next.fetch_add(1)) {
            try {
                const auto& hc = hangs[static_cast<std::size_t>(ci)];
                const auto st = simulate_hang(mesh, hc.hang_vertex, hc.yaw, hc.pitch, hc.roll,
                                              sim_steps, params);
                if (st.not_at_rest_warning) rest_warnings.fetch_add(1);
                Aabb box;
                for (const auto& p : st.positions) box.expand(p);
                const auto ring = camera_ring(box.center(), cfg.real("ring_radius_m"), cameras,
                                              focal, image_w, image_h);
                for (int k = 0; k < cameras; ++k) {
                    auto s = render(st, mesh, ring[static_cast<std::size_t>(k)]);
                    s.hang_id = static_cast<std::uint32_t>(ci);
                    s.camera_index = static_cast<std::uint16_t>(k);
                    s.seed = seed;
                    if (domain == Domain::surrogate_real) {
                        SensorParams sp;
                        sp.noise_sigma_m = cfg.real("sensor_noise_mm") / 1000.0;
                        sp.quant_step_m = cfg.real("sensor_quant_mm") / 1000.0;
                        sp.dropout_fraction = cfg.real("sensor_dropout");
                        s = apply_sensor_model(s, SensorProfile::surrogate_real,
                                               derive_seed(seed, 0x67656eull,
                                                           static_cast<std::uint64_t>(ci),
                                                           static_cast<std::uint64_t>(k)),
                                               sp);
                    }
                    char name[64];
                    std::snprintf(name, sizeof(name), "cfg%04d_cam%02d.dsmp", ci, k);
                    save_dsmp(fs::path(out_dir) / name, s);
                    entries[static_cast<std::size_t>(ci) * static_cast<std::size_t>(cameras) +
                            static_cast<std::size_t>(k)] = {name, domain, split_of(ci)};
                }
            } catch (const std::exception& e) {
                std::scoped_lock lock(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };
    const int workers = std::min(worker_count(), configs);
    std::vector<std::thread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failed) {
        std::cerr << "gen: " << first_error << "\n";
        return 1;
    }

    save_manifest(fs::path(out_dir) / "manifest.tsv", entries);

    // per-class pixel frequencies and weights over the train split
    {
        Dataset train = Dataset::load(fs::path(out_dir) / "manifest.tsv", "train");
        std::ofstream os(fs::path(out_dir) / "stats.csv", std::ios::trunc);
        os << "class,pixels,weight\n";
        if (!train.empty()) {
            const auto counts = train.class_pixel_counts();
            bool all_present = true;
            for (auto c : counts) all_present = all_present && c > 0;
            std::vector<double> weights;
            if (all_present) weights = class_weights(counts);
            for (std::size_t c = 0; c < counts.size(); ++c) {
                os << c << "," << counts[c] << ",";
                if (all_present) os << weights[c];
                os << "\n";
            }
        }
    }

    RunManifest rm;
    rm.command = "gen";
    rm.config_hash = cfg.hash();
    rm.seed = seed;
    for (const auto& e : entries) rm.outputs.push_back(e.path);
    rm.outputs.push_back("manifest.tsv");
    rm.outputs.push_back("stats.csv");
    rm.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rm.write(fs::path(out_dir) / "run_manifest.txt");

    std::cout << "gen: wrote " << entries.size() << " samples (" << configs << " configs x "
              << cameras << " cameras) to " << out_dir << "\n";
    if (rest_warnings > 0)
        std::cout << "gen: " << rest_warnings << " configs carried a not-at-rest warning\n";
    return 0;
}

// ---------------- train ----------------

template <class T>
int run_train(const Config& cfg, Regime regime, const std::string& synth_dir,
              const std::string& real_dir, const std::string& init_ckpt,
              const std::string& out_dir, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig tc;
    tc.regime = regime;
    tc.epochs = cfg.integer("epochs");
    tc.batch_size = cfg.integer("batch_size");
    tc.lr = cfg.real("lr");
    tc.adam_beta1 = cfg.real("adam_beta1");
    tc.adam_beta2 = cfg.real("adam_beta2");
    tc.alpha = cfg.real("alpha");
    tc.class_weight_temper = cfg.real("class_weight_temper");
    tc.grl_gamma = cfg.real("grl_gamma");
    tc.grl_lambda_max = cfg.real("grl_lambda_max");
    tc.finetune_lr_scale = cfg.real("finetune_lr_scale");
    tc.seed = seed;
    tc.augment = cfg.flag("augment");
    tc.covariance_rescale = cfg.flag("covariance_rescale");
    tc.val_fraction = cfg.real("val_fraction");
    tc.classes = cfg.integer("classes");
    tc.config_hash = cfg.hash();
    tc.init_checkpoint = init_ckpt;
    {
        // widths: comma-separated list of five channel counts
        const std::string ws = cfg.str("widths");
        std::array<int, 5> widths{};
        std::size_t pos = 0;
        for (int i = 0; i < 5; ++i) {
            const auto comma = ws.find(',', pos);
            widths[static_cast<std::size_t>(i)] = std::stoi(
                ws.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            pos = comma == std::string::npos ? ws.size() : comma + 1;
        }
        tc.widths = widths;
    }

    // argument-level regime validation, before any IO
    if (regime != Regime::synth_only && real_dir.empty())
        throw std::invalid_argument(std::string("train: regime ") + regime_name(regime) +
                                    " requires --real");
    if ((regime == Regime::synth_only || regime == Regime::da ||
         regime == Regime::da_finetune) &&
        synth_dir.empty())
        throw std::invalid_argument(std::string("train: regime ") + regime_name(regime) +
                                    " requires --synth");
    if (regime == Regime::finetune && init_ckpt.empty())
        throw std::invalid_argument("train: finetune requires --init");

    Dataset synth, real;
    if (!synth_dir.empty()) synth = Dataset::load(fs::path(synth_dir) / "manifest.tsv", "train");
    if (!real_dir.empty()) real = Dataset::load(fs::path(real_dir) / "manifest.tsv", "train");
    if (regime == Regime::synth_only && !real_dir.empty())
        std::cerr << "train: warning: --real is ignored in the synth_only regime\n";

    auto result = train<T>(tc, synth, real.empty() ? nullptr : &real);

    fs::create_directories(out_dir);
    result.model.save(fs::path(out_dir) / "model.ckpt");
    result.log.write_csv(fs::path(out_dir) / "trainlog.csv");
    result.log.write_summary(fs::path(out_dir) / "summary.txt");

    RunManifest rm;
    rm.command = std::string("train:") + regime_name(regime);
    rm.config_hash = cfg.hash();
    rm.seed = seed;
    if (!synth_dir.empty()) rm.inputs.push_back(synth_dir);
    if (!real_dir.empty()) rm.inputs.push_back(real_dir);
    if (!init_ckpt.empty()) rm.inputs.push_back(init_ckpt);
    rm.outputs = {"model.ckpt", "trainlog.csv", "summary.txt"};
    rm.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rm.write(fs::path(out_dir) / "run_manifest.txt");

    std::cout << "train: " << regime_name(regime) << " done in " << rm.wall_s << " s, "
              << result.log.epochs.size() << " epochs, checkpoint at " << out_dir
              << "/model.ckpt\n";
    if (result.log.aborted_non_finite)
        std::cout << "train: aborted on non-finite loss; kept the last finite checkpoint\n";
    return 0;
}

// ---------------- eval ----------------

int cmd_eval(const std::string& model_path, const std::string& test_dir,
             const std::string& mode_name, const std::string& out_csv,
             const std::string& label, const std::string& config_path) {
    const Config cfg = load_config(config_path);
    auto model = SegModel<double>::load(model_path);
    if (model.meta().classes != kClassCount) {
        std::cerr << "eval: checkpoint has " << model.meta().classes << " classes, the "
                  << mode_name << " mode needs " << kClassCount << "\n";
        return 2;
    }
    EvalMode mode;
    if (mode_name == "merged") {
        mode = EvalMode::merged_edges;
    } else if (mode_name == "fine") {
        mode = EvalMode::fine_grained;
    } else {
        std::cerr << "eval: --mode must be merged or fine\n";
        return 2;
    }
    Dataset test = Dataset::load(fs::path(test_dir) / "manifest.tsv", "test");
    if (test.empty()) {
        std::cerr << "eval: no test samples in " << test_dir << "\n";
        return 2;
    }
    const double cm_per_px = cm_per_px_for(cfg, test.sample(0).width);
    auto rep = evaluate(model, test, mode, cm_per_px, label.empty() ? mode_name : label);

    const bool fresh = !fs::exists(out_csv) || fs::file_size(out_csv) == 0;
    std::ofstream os(out_csv, std::ios::app);
    if (!os) {
        std::cerr << "eval: cannot open " << out_csv << "\n";
        return 1;
    }
    if (fresh) os << EvalReport::csv_header() << "\n";
    os << rep.csv_row() << "\n";

    std::cout << "regime        " << rep.regime << "\n";
    std::cout << "background    " << rep.background_iou << "\n";
    std::cout << "body          " << rep.body_iou << "\n";
    if (mode == EvalMode::merged_edges) {
        std::cout << "edges         " << rep.edges_iou << "\n";
    } else {
        std::cout << "top           " << rep.top_iou << "\n";
        std::cout << "middle        " << rep.middle_iou << "\n";
        std::cout << "bottom        " << rep.bottom_iou << "\n";
    }
    std::cout << "gp_px         " << rep.gp_px << "\n";
    std::cout << "gp_cm         " << rep.gp_cm << "\n";
    std::cout << "n             " << rep.n << "\n";
    return 0;
}

// ---------------- viz ----------------

int cmd_viz(const std::string& model_path, const std::string& sample_path,
            const std::string& out_png) {
    auto model = SegModel<double>::load(model_path);
    auto sample = load_dsmp(sample_path);
    DepthSample prepped = sample;
    if (sample.domain == Domain::synthetic &&
        (model.meta().cov_scale_v != 1.0 || model.meta().cov_scale_h != 1.0))
        prepped = rescale(sample, model.meta().cov_scale_v, model.meta().cov_scale_h);
    auto normalized = minmax_normalize(prepped);

    Tape<double> tape(false);
    auto x = TensorD::zeros({1, 1, sample.height, sample.width});
    for (std::size_t i = 0; i < normalized.depth.size(); ++i)
        x.data()[i] = normalized.depth[i];
    auto fwd = model.forward_segment(tape, x);
    const auto grasp = predict_grasp_point(fwd.probs)[0];

    std::vector<std::uint8_t> pred(normalized.labels.size());
    const int c = fwd.probs.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(sample.height) * sample.width;
    for (std::int64_t px = 0; px < hw; ++px) {
        int best = 0;
        double bv = fwd.probs.data()[px];
        for (int ic = 1; ic < c; ++ic)
            if (fwd.probs.data()[ic * hw + px] > bv) {
                bv = fwd.probs.data()[ic * hw + px];
                best = ic;
            }
        pred[static_cast<std::size_t>(px)] = static_cast<std::uint8_t>(best);
    }
    const auto rgb = compose_viz(prepped, pred, grasp);
    write_png(out_png, rgb, sample.width * 3, sample.height);
    std::cout << "viz: wrote " << out_png << " (" << sample.width * 3 << "x" << sample.height
              << "), grasp at (" << grasp.row << "," << grasp.col << ") confidence "
              << grasp.confidence << "\n";
    return 0;
}

// ---------------- baseline ----------------

int cmd_baseline(const std::string& test_dir, const std::string& out_csv, std::uint64_t seed,
                 const std::string& config_path) {
    const Config cfg = load_config(config_path);
    Dataset test = Dataset::load(fs::path(test_dir) / "manifest.tsv", "test");
    if (test.empty()) {
        std::cerr << "baseline: no test samples in " << test_dir << "\n";
        return 2;
    }
    const double cm_per_px = cm_per_px_for(cfg, test.sample(0).width);
    double centre_px = 0, centre_cm = 0, rand_px = 0, rand_cm = 0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& s = test.sample(i);
        std::vector<PixelPoint> gt;
        for (int r = 0; r < s.height; ++r)
            for (int col = 0; col < s.width; ++col)
                if (s.label_at(r, col) == 5) gt.push_back({r, col});
        if (gt.empty()) continue;
        const auto centre = centre_baseline(s.labels, s.height, s.width);
        const auto rnd =
            random_baseline(s.labels, s.height, s.width, derive_seed(seed, 0x626173ull, i));
        const auto [cpx, ccm] = gp_distance(centre, gt, cm_per_px);
        const auto [rpx, rcm] = gp_distance(rnd, gt, cm_per_px);
        centre_px += cpx;
        centre_cm += ccm;
        rand_px += rpx;
        rand_cm += rcm;
        ++n;
    }
    if (n == 0) {
        std::cerr << "baseline: no samples with visible grasp points\n";
        return 2;
    }
    const bool fresh = !fs::exists(out_csv) || fs::file_size(out_csv) == 0;
    std::ofstream os(out_csv, std::ios::app);
    if (!os) {
        std::cerr << "baseline: cannot open " << out_csv << "\n";
        return 1;
    }
    const auto dn = static_cast<double>(n);
    if (fresh) os << "baseline,gp_px,gp_cm,n\n";
    os << "centre," << centre_px / dn << "," << centre_cm / dn << "," << n << "\n";
    os << "random," << rand_px / dn << "," << rand_cm / dn << "," << n << "\n";
    std::cout << "centre baseline: " << centre_px / dn << " px, " << centre_cm / dn << " cm\n";
    std::cout << "random baseline: " << rand_px / dn << " px, " << rand_cm / dn << " cm\n";
    std::cout << "n = " << n << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cloth depth-map segmentation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, domain = "synthetic", synth_dir, real_dir, init_ckpt;
    std::string model_path, test_dir, mode = "merged", out_csv, sample_path, out_png;
    std::string regime = "synth_only", label;
    std::uint64_t seed = 0;
    int configs = 10;

    auto* gen = app.add_subcommand("gen", "generate a labeled depth dataset");
    gen->add_option("--config", config_path, "key=value config file");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--domain", domain, "synthetic | surrogate_real");
    gen->add_option("--seed", seed, "master seed");
    gen->add_option("--configs", configs, "hang configurations to simulate");

    auto* train_cmd = app.add_subcommand("train", "train a segmentation model");
    train_cmd->add_option("--regime", regime, "synth_only|da|finetune|da_finetune|real_only");
    train_cmd->add_option("--synth", synth_dir, "synthetic dataset directory");
    train_cmd->add_option("--real", real_dir, "surrogate-real dataset directory");
    train_cmd->add_option("--config", config_path, "key=value config file");
    train_cmd->add_option("--init", init_ckpt, "initial checkpoint (finetune)");
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--seed", seed, "master seed");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a test split");
    eval_cmd->add_option("--model", model_path, "checkpoint path")->required();
    eval_cmd->add_option("--test", test_dir, "dataset directory")->required();
    eval_cmd->add_option("--mode", mode, "merged | fine");
    eval_cmd->add_option("--out", out_csv, "CSV to append the report row to")->required();
    eval_cmd->add_option("--label", label, "regime label for the CSV row");
    eval_cmd->add_option("--config", config_path, "key=value config file");

    auto* viz_cmd = app.add_subcommand("viz", "render depth/labels/prediction side by side");
    viz_cmd->add_option("--model", model_path, "checkpoint path")->required();
    viz_cmd->add_option("--sample", sample_path, ".dsmp sample")->required();
    viz_cmd->add_option("--out", out_png, "output PNG")->required();

    auto* base_cmd = app.add_subcommand("baseline", "centre/random grasp baselines");
    base_cmd->add_option("--test", test_dir, "dataset directory")->required();
    base_cmd->add_option("--out", out_csv, "CSV output")->required();
    base_cmd->add_option("--seed", seed, "seed for the random baseline");
    base_cmd->add_option("--config", config_path, "key=value config file");

    // every config key is CLI-documented
    std::string footer = "config keys (key=value file given via --config):\n";
    for (const auto& k : Config::schema())
        footer += "  " + k.key + " (default " + k.def + "): " + k.doc + "\n";
    footer += "environment: CSDA_THREADS caps generation worker count\n";
    app.footer(footer);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(config_path, out_dir, domain, seed, configs);
        if (train_cmd->parsed()) {
            const Config cfg = load_config(config_path);
            const Regime r = regime_from_name(regime);
            if (cfg.str("precision") == "float")
                return run_train<float>(cfg, r, synth_dir, real_dir, init_ckpt, out_dir, seed);
            if (cfg.str("precision") != "double")
                throw std::invalid_argument("config: precision must be float or double");
            return run_train<double>(cfg, r, synth_dir, real_dir, init_ckpt, out_dir, seed);
        }
        if (eval_cmd->parsed())
            return cmd_eval(model_path, test_dir, mode, out_csv, label, config_path);
        if (viz_cmd->parsed()) return cmd_viz(model_path, sample_path, out_png);
        if (base_cmd->parsed()) return cmd_baseline(test_dir, out_csv, seed, config_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
