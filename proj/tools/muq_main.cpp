// Command-line front end: data generation, training, hyperparameter search,
// single homogenization, UQ, Monte Carlo, benchmarking and result
// comparison. Configuration is a flat key=value file; every command writes a
// manifest with the config hash, seeds and versions next to its outputs.
//
// Exit codes: 0 success, 2 usage/config error, 3 runtime failure.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "muq/concurrency.hpp"
#include "muq/config.hpp"
#include "muq/dataset.hpp"
#include "muq/fft.hpp"
#include "muq/grid.hpp"
#include "muq/train.hpp"
#include "muq/uq.hpp"

namespace fs = std::filesystem;
using namespace muq;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_sig6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    long seed = -1;     // -1: take from config (default 0)
    long threads = -1;  // -1: take from config (default 1)
};

Config load_config(const CommonOpts& opts) {
    Config cfg = opts.config_path.empty() ? Config::from_string("")
                                          : Config::from_file(opts.config_path);
    if (opts.seed >= 0) cfg.set("seed", std::to_string(opts.seed));
    if (opts.threads >= 0) cfg.set("threads", std::to_string(opts.threads));
    return cfg;
}

fs::path out_path(const CommonOpts& opts, const std::string& name) {
    fs::create_directories(opts.out_dir);
    return fs::path(opts.out_dir) / name;
}

void write_manifest(const CommonOpts& opts, const Config& cfg, const std::string& command,
                    const std::vector<std::string>& outputs,
                    const std::vector<std::pair<std::string, std::string>>& extra, double wall_s) {
    std::ofstream m(out_path(opts, command + ".manifest.txt"));
    m << "command = " << command << "\n";
    m << "version = " << kVersion << "\n";
    m << "config_hash = " << cfg.hash() << "\n";
    for (const auto& [k, v] : extra) m << k << " = " << v << "\n";
    m << "wall_seconds = " << fmt_double(wall_s) << "\n";
    for (const auto& o : outputs) m << "output = " << o << "\n";
    m << "config_begin\n" << cfg.canonical() << "config_end\n";
}

ParamRep parse_rep(const std::string& s) {
    if (s == "ENu" || s == "enu") return ParamRep::ENu;
    if (s == "KG" || s == "kg") return ParamRep::KG;
    if (s == "LameG" || s == "lameg") return ParamRep::LameG;
    throw ConfigError("unknown parameter representation: " + s);
}

MicroKind parse_kind(const std::string& s) {
    if (s == "fiber") return MicroKind::Fiber;
    if (s == "spheres") return MicroKind::Spheres;
    throw ConfigError("unknown microstructure kind: " + s);
}

MaterialParams read_material(Config& cfg, const std::string& prefix) {
    const ParamRep rep = parse_rep(cfg.get_string(prefix + ".rep", "ENu"));
    const double p1 = cfg.get_double(prefix + ".p1");
    const double p2 = cfg.get_double(prefix + ".p2");
    MaterialParams p{rep, p1, p2};
    validate(p);
    return p;
}

fft::SolverConfig read_solver(Config& cfg) {
    fft::SolverConfig s;
    s.rel_tol = cfg.get_double("solver.rel_tol", 1e-8);
    s.max_iter = static_cast<int>(cfg.get_int("solver.max_iter", 500));
    return s;
}

RsaConfig read_rsa(Config& cfg) {
    RsaConfig r;
    r.sphere_radius = cfg.get_double("rsa.radius", 0.1);
    r.max_attempts = static_cast<int>(cfg.get_int("rsa.max_attempts", 20000));
    return r;
}

void write_moments_csv(const std::string& path, const uq::UQResult& res) {
    std::ofstream f(path);
    f << "output_name,mean,std\n";
    for (std::size_t c = 0; c < res.names.size(); ++c)
        f << res.names[c] << "," << fmt_double(res.mean[c]) << "," << fmt_double(res.stddev[c])
          << "\n";
}

void write_cdf_csv(const std::string& path, const uq::UQResult& res) {
    std::ofstream f(path);
    f << "output_name,value,cdf\n";
    for (const auto& t : res.cdfs)
        for (std::size_t i = 0; i < t.value.size(); ++i)
            f << t.name << "," << fmt_double(t.value[i]) << "," << fmt_double(t.prob[i]) << "\n";
}

uq::UQResult read_result_csvs(const std::string& moments_path, const std::string& cdf_path) {
    uq::UQResult res;
    std::ifstream m(moments_path);
    if (!m) throw ConfigError("cannot open " + moments_path);
    std::string line;
    std::getline(m, line);  // header
    while (std::getline(m, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name, mean, sd;
        std::getline(ss, name, ',');
        std::getline(ss, mean, ',');
        std::getline(ss, sd, ',');
        res.names.push_back(name);
        res.mean.push_back(std::stod(mean));
        res.stddev.push_back(std::stod(sd));
    }
    std::ifstream c(cdf_path);
    if (!c) throw ConfigError("cannot open " + cdf_path);
    std::getline(c, line);
    std::map<std::string, pce::CdfTable> tables;
    std::vector<std::string> order;
    while (std::getline(c, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name, value, prob;
        std::getline(ss, name, ',');
        std::getline(ss, value, ',');
        std::getline(ss, prob, ',');
        if (!tables.count(name)) {
            tables[name].name = name;
            order.push_back(name);
        }
        tables[name].value.push_back(std::stod(value));
        tables[name].prob.push_back(std::stod(prob));
    }
    for (const std::string& name : res.names) {
        if (!tables.count(name)) throw ConfigError("CDF table missing output " + name);
        res.cdfs.push_back(tables[name]);
    }
    return res;
}

// ---------------------------------------------------------------------------

int cmd_gen_micro(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    const MicroKind kind = parse_kind(cfg.get_string("micro.kind", "fiber"));
    const int n = static_cast<int>(cfg.get_int("micro.n", 16));
    const double c_f = cfg.get_double("micro.cf");
    RsaConfig rsa = read_rsa(cfg);
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    (void)cfg.get_int("threads", 1);
    const std::string output = cfg.get_string("output", out_path(opts, "grid.muqg").string());
    cfg.finish();

    const VoxelGrid g = gen_microstructure(kind, n, c_f, seed, rsa);
    write_grid(g, output);
    std::cout << "wrote " << output << " (n=" << n
              << ", volume_fraction=" << fmt_sig6(volume_fraction(g)) << ")\n";
    write_manifest(opts, cfg, "gen-micro", {output},
                   {{"seed", std::to_string(seed)}},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_homogenize(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    const MaterialParams mat_M = read_material(cfg, "matrix");
    const MaterialParams mat_I = read_material(cfg, "inclusion");
    const fft::SolverConfig solver = read_solver(cfg);
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    (void)cfg.get_int("threads", 1);

    VoxelGrid grid;
    if (cfg.has("grid.file")) {
        grid = read_grid(cfg.get_string("grid.file"));
    } else {
        const MicroKind kind = parse_kind(cfg.get_string("micro.kind", "fiber"));
        const int n = static_cast<int>(cfg.get_int("micro.n", 16));
        const double c_f = cfg.get_double("micro.cf");
        grid = gen_microstructure(kind, n, c_f, seed, read_rsa(cfg));
    }
    const std::string csv = cfg.get_string("output.csv", "");
    const std::string dump_prefix = cfg.get_string("fields.dump", "");
    cfg.finish();

    fft::HomogenizeResult res;
    if (dump_prefix.empty()) {
        res = fft::homogenize(grid, mat_M, mat_I, solver);
    } else {
        // Per-state solves so the converged strain fields can be dumped.
        fft::ProjectionOperator op(grid.n);
        VoigtMatrix C;
        for (int i = 1; i <= 6; ++i) {
            const auto sr = fft::solve_micro(grid, mat_M, mat_I, unit_strain(i), solver, &op);
            if (!sr.converged)
                throw NoConvergenceError("strain state " + std::to_string(i) + " did not converge",
                                         sr.iterations, sr.residual);
            fft::write_field(sr.strain, dump_prefix + "_" + std::to_string(i) + ".muqf");
            const VoigtVector col = fft::average_stress(grid, mat_M, mat_I, sr.strain);
            for (int r = 0; r < 6; ++r) C(r, i - 1) = col[r];
            res.iterations[static_cast<std::size_t>(i - 1)] = sr.iterations;
            res.total_iterations += sr.iterations;
        }
        res.asymmetry = asymmetry(C);
        res.stiffness = symmetrize(C);
    }

    std::cout << "effective stiffness (Voigt, symmetrized; asymmetry "
              << fmt_sig6(res.asymmetry) << "):\n";
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) std::cout << (c ? " " : "") << fmt_sig6(res.stiffness(r, c));
        std::cout << "\n";
    }
    const TransverseIsoProps ti = extract_transverse_isotropic(res.stiffness);
    std::cout << "transverse isotropic: E1=" << fmt_sig6(ti.E1) << " E2=" << fmt_sig6(ti.E2)
              << " G12=" << fmt_sig6(ti.G12) << " G23=" << fmt_sig6(ti.G23)
              << " nu12=" << fmt_sig6(ti.nu12) << " nu23=" << fmt_sig6(ti.nu23) << "\n";
    const IsoProps iso = extract_isotropic(res.stiffness);
    std::cout << "isotropic average: E=" << fmt_sig6(iso.E) << " nu=" << fmt_sig6(iso.nu) << "\n";

    std::vector<std::string> outputs;
    if (!csv.empty()) {
        std::ofstream f(csv);
        f << "row,c1,c2,c3,c4,c5,c6\n";
        for (int r = 0; r < 6; ++r) {
            f << r + 1;
            for (int c = 0; c < 6; ++c) f << "," << fmt_double(res.stiffness(r, c));
            f << "\n";
        }
        outputs.push_back(csv);
    }
    write_manifest(opts, cfg, "homogenize", outputs,
                   {{"seed", std::to_string(seed)},
                    {"cg_iterations", std::to_string(res.total_iterations)}},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

SampleInputBounds read_bounds(Config& cfg) {
    SampleInputBounds b;
    b.cf_lo = cfg.get_double("bounds.cf_lo", 0.0);
    b.cf_hi = cfg.get_double("bounds.cf_hi", 1.0);
    b.rep = parse_rep(cfg.get_string("bounds.rep", "ENu"));
    b.p1_lo = cfg.get_double("bounds.p1_lo");
    b.p1_hi = cfg.get_double("bounds.p1_hi");
    b.p2_lo = cfg.get_double("bounds.p2_lo");
    b.p2_hi = cfg.get_double("bounds.p2_hi");
    b.inclusion = read_material(cfg, "inclusion");
    return b;
}

int cmd_gen_data(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    const SampleInputBounds bounds = read_bounds(cfg);
    GenerateConfig gen;
    gen.n_s = static_cast<int>(cfg.get_int("data.n_s"));
    gen.grid_n = static_cast<int>(cfg.get_int("data.grid_n", 16));
    gen.kind = parse_kind(cfg.get_string("data.kind", "fiber"));
    gen.embed_grids = cfg.get_bool("data.embed_grids", false);
    gen.base_seed = cfg.get_u64("seed", 0);
    gen.solver = read_solver(cfg);
    gen.rsa = read_rsa(cfg);
    gen.threads = resolve_threads(static_cast<int>(cfg.get_int("threads", 1)));
    const std::string output = cfg.get_string("output", out_path(opts, "dataset.muqd").string());
    cfg.finish();

    if (gen.n_s <= 0 || gen.n_s % 6 != 0)
        throw ConfigError("data.n_s must be a positive multiple of 6 so all strain states are "
                          "equally represented");

    const Dataset ds = generate(bounds, gen);
    write_dataset(ds, output);
    std::cout << "wrote " << output << " (" << ds.size() << " samples, grid " << ds.grid_n
              << "^3)\n";
    write_manifest(opts, cfg, "gen-data", {output},
                   {{"seed", std::to_string(gen.base_seed)},
                    {"n_s", std::to_string(gen.n_s)}},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

nn::TrainConfig read_train_cfg(Config& cfg) {
    nn::TrainConfig t;
    t.alpha = cfg.get_double("train.alpha", 1e-3);
    t.beta_dropout = cfg.get_double("train.dropout", 0.0);
    t.lambda_l2 = cfg.get_double("train.lambda_l2", 0.0);
    t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 32));
    t.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", 200));
    t.patience = static_cast<int>(cfg.get_int("train.patience", 20));
    t.lr_decay = cfg.get_double("train.lr_decay", 0.5);
    t.seed = cfg.get_u64("seed", 0);
    return t;
}

nn::TopologyConfig read_topo(Config& cfg) {
    nn::TopologyConfig t;
    t.n_u = static_cast<int>(cfg.get_int("topo.n_u", 128));
    t.n_F = static_cast<int>(cfg.get_int("topo.n_F", 8));
    t.n_L = static_cast<int>(cfg.get_int("topo.n_L", 2));
    return t;
}

int cmd_train(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    const std::string ds_path = cfg.get_string("dataset");
    nn::TrainConfig tc = read_train_cfg(cfg);
    nn::TopologyConfig topo_cfg = read_topo(cfg);
    topo_cfg.dropout = tc.beta_dropout;
    const double f_train = cfg.get_double("split.train", 0.8);
    const double f_val = cfg.get_double("split.val", 0.1);
    const double f_test = cfg.get_double("split.test", 0.1);
    const std::string ckpt_path = cfg.get_string("output", out_path(opts, "model.muqm").string());
    const std::string log_path = cfg.get_string("output.log", out_path(opts, "training_log.csv").string());
    (void)cfg.get_int("threads", 1);
    cfg.finish();

    if (!fs::exists(ds_path)) throw ConfigError("dataset file does not exist: " + ds_path);
    const Dataset ds = read_dataset(ds_path);
    const SplitResult parts = split(ds, f_train, f_val, f_test, tc.seed);
    const nn::TrainingData train_set = nn::to_training_data(parts.train);
    const nn::TrainingData val_set = nn::to_training_data(parts.val);

    const nn::Topology topology = nn::make_default_topology(ds.grid_n, topo_cfg);
    nn::TrainResult res = nn::train(train_set, val_set, topology, tc);

    {
        std::ofstream log(log_path);
        log << "epoch,train_loss,val_loss,lr\n";
        for (const auto& e : res.log)
            log << e.epoch << "," << fmt_double(e.train_loss) << "," << fmt_double(e.val_loss)
                << "," << fmt_double(e.lr) << "\n";
    }
    nn::save_checkpoint(res.net, ckpt_path);

    double test_err = -1.0;
    if (parts.test.size() > 0) {
        const nn::TrainingData test_set = nn::to_training_data(parts.test);
        test_err = nn::evaluate(res.net, test_set);
        std::cout << "test mean relative error: " << fmt_sig6(test_err) << "\n";
    }
    std::cout << "best validation loss " << fmt_sig6(res.best_val_loss) << " after "
              << res.epochs_run << " epochs; wrote " << ckpt_path << "\n";

    write_manifest(opts, cfg, "train", {ckpt_path, log_path},
                   {{"seed", std::to_string(tc.seed)},
                    {"epochs_run", std::to_string(res.epochs_run)},
                    {"best_val_loss", fmt_double(res.best_val_loss)},
                    {"test_mean_rel_error", fmt_double(test_err)}},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_hp_search(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    const std::string ds_path = cfg.get_string("dataset");
    nn::TrainConfig base = read_train_cfg(cfg);
    nn::TopologyConfig topo = read_topo(cfg);
    nn::HpSearchSpace space;
    space.trials = static_cast<int>(cfg.get_int("hp.trials", 10));
    space.alpha_lo = cfg.get_double("hp.alpha_lo", space.alpha_lo);
    space.alpha_hi = cfg.get_double("hp.alpha_hi", space.alpha_hi);
    space.lambda_lo = cfg.get_double("hp.lambda_lo", space.lambda_lo);
    space.lambda_hi = cfg.get_double("hp.lambda_hi", space.lambda_hi);
    space.lambda_zero_prob = cfg.get_double("hp.lambda_zero_prob", space.lambda_zero_prob);
    space.seed = cfg.get_u64("seed", 0);
    if (cfg.has("hp.n_u_choices")) space.n_u_choices = cfg.get_int_list("hp.n_u_choices");
    if (cfg.has("hp.n_f_choices")) space.n_f_choices = cfg.get_int_list("hp.n_f_choices");
    if (cfg.has("hp.n_l_choices")) space.n_l_choices = cfg.get_int_list("hp.n_l_choices");
    const double f_train = cfg.get_double("split.train", 0.8);
    const double f_val = cfg.get_double("split.val", 0.2);
    const std::string trials_path = cfg.get_string("output", out_path(opts, "hp_trials.csv").string());
    const std::string best_path = cfg.get_string("output.best", out_path(opts, "hp_best.txt").string());
    (void)cfg.get_int("threads", 1);
    cfg.finish();

    if (!fs::exists(ds_path)) throw ConfigError("dataset file does not exist: " + ds_path);
    const Dataset ds = read_dataset(ds_path);
    const SplitResult parts = split(ds, f_train, f_val, 1.0 - f_train - f_val, space.seed);
    const nn::TrainingData tune_train = nn::to_training_data(parts.train);
    const nn::TrainingData tune_val = nn::to_training_data(parts.val);

    const nn::HpSearchResult res = nn::hp_random_search(space, tune_train, tune_val, base, topo);
    {
        std::ofstream f(trials_path);
        f << "trial,alpha,dropout,lambda_l2,n_u,n_F,n_L,val_loss,failed,error\n";
        for (std::size_t t = 0; t < res.trials.size(); ++t) {
            const auto& tr = res.trials[t];
            f << t << "," << fmt_double(tr.cfg.alpha) << "," << fmt_double(tr.cfg.beta_dropout)
              << "," << fmt_double(tr.cfg.lambda_l2) << "," << tr.topo.n_u << "," << tr.topo.n_F
              << "," << tr.topo.n_L << "," << fmt_double(tr.val_loss) << ","
              << (tr.failed ? 1 : 0) << "," << tr.error << "\n";
        }
    }
    const auto& best = res.trials[res.best];
    {
        std::ofstream f(best_path);
        f << "train.alpha = " << fmt_double(best.cfg.alpha) << "\n";
        f << "train.dropout = " << fmt_double(best.cfg.beta_dropout) << "\n";
        f << "train.lambda_l2 = " << fmt_double(best.cfg.lambda_l2) << "\n";
        f << "topo.n_u = " << best.topo.n_u << "\n";
        f << "topo.n_F = " << best.topo.n_F << "\n";
        f << "topo.n_L = " << best.topo.n_L << "\n";
    }
    std::cout << "best trial " << res.best << ": val loss " << fmt_sig6(best.val_loss) << "\n";
    write_manifest(opts, cfg, "hp-search", {trials_path, best_path},
                   {{"seed", std::to_string(space.seed)},
                    {"trials", std::to_string(space.trials)},
                    {"best_trial", std::to_string(res.best)}},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

uq::UQConfig read_uq_cfg(Config& cfg, const CommonOpts&) {
    uq::UQConfig u;
    u.matrix_rep = parse_rep(cfg.get_string("dist.rep", "ENu"));
    const auto dist = [&cfg](const std::string& prefix, const std::string& name,
                             double lo_default, double hi_default) {
        pce::InputDistribution d;
        d.name = name;
        d.mean = cfg.get_double(prefix + ".mean");
        d.stddev = cfg.get_double(prefix + ".std", 0.0);
        d.lo = cfg.get_double(prefix + ".lo", lo_default);
        d.hi = cfg.get_double(prefix + ".hi", hi_default);
        return d;
    };
    u.inputs.push_back(dist("dist.cf", "c_f", 0.0, 1.0));
    if (u.matrix_rep == ParamRep::ENu) {
        u.inputs.push_back(dist("dist.p1", "E_M", 1e-12, 1e300));
        u.inputs.push_back(dist("dist.p2", "nu_M", 0.0, 0.499999));
    } else {
        u.inputs.push_back(dist("dist.p1", "p1_M", 1e-12, 1e300));
        u.inputs.push_back(dist("dist.p2", "p2_M", 1e-12, 1e300));
    }
    u.inclusion = read_material(cfg, "inclusion");
    u.n_w = static_cast<int>(cfg.get_int("uq.n_w", 10));
    u.n_pce = static_cast<int>(cfg.get_int("uq.n_pce", 9));
    u.grid_n = static_cast<int>(cfg.get_int("uq.grid_n", 16));
    u.kind = parse_kind(cfg.get_string("uq.kind", "fiber"));
    u.rsa = read_rsa(cfg);
    const std::string solver = cfg.get_string("uq.solver", "fft");
    if (solver == "fft") {
        u.solver = uq::SolverKind::FFT;
    } else if (solver == "ann") {
        u.solver = uq::SolverKind::ANN;
        u.checkpoint_path = cfg.get_string("uq.checkpoint");
        if (!fs::exists(u.checkpoint_path))
            throw ConfigError("checkpoint file does not exist: " + u.checkpoint_path);
    } else {
        throw ConfigError("unknown solver: " + solver);
    }
    const std::string props = cfg.get_string("uq.properties", "tiso");
    if (props == "tiso")
        u.props = uq::PropertySet::TransverseIso;
    else if (props == "iso")
        u.props = uq::PropertySet::Iso;
    else if (props == "raw")
        u.props = uq::PropertySet::RawTensor;
    else
        throw ConfigError("unknown property set: " + props);
    u.seed = cfg.get_u64("seed", 0);
    u.threads = resolve_threads(static_cast<int>(cfg.get_int("threads", 1)));
    u.fft_cfg = read_solver(cfg);
    u.cdf_samples = static_cast<std::size_t>(cfg.get_int("uq.cdf_samples", 100000));
    return u;
}

int run_uq_like(const CommonOpts& opts, bool monte_carlo) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    uq::UQConfig u = read_uq_cfg(cfg, opts);
    std::size_t mc_samples = 0;
    if (monte_carlo) mc_samples = static_cast<std::size_t>(cfg.get_int("mc.samples", 1000));
    const std::string name = monte_carlo ? "mc" : "uq";
    const std::string moments_path =
        cfg.get_string("output.moments", out_path(opts, name + "_moments.csv").string());
    const std::string cdf_path =
        cfg.get_string("output.cdf", out_path(opts, name + "_cdf.csv").string());
    cfg.finish();

    const uq::UQResult res = monte_carlo ? uq::run_mc(u, mc_samples) : uq::run_uq(u);
    write_moments_csv(moments_path, res);
    write_cdf_csv(cdf_path, res);
    for (std::size_t c = 0; c < res.names.size(); ++c)
        std::cout << res.names[c] << ": mean " << fmt_sig6(res.mean[c]) << ", std "
                  << fmt_sig6(res.stddev[c]) << "\n";
    if (res.clamp_warning)
        std::cerr << "warning: " << fmt_sig6(res.clamped_mass * 100.0)
                  << "% of cubature mass hit a truncation bound\n";

    write_manifest(opts, cfg, name, {moments_path, cdf_path},
                   {{"seed", std::to_string(u.seed)},
                    {"solver", u.solver == uq::SolverKind::FFT ? "fft" : "ann"},
                    {"solver_calls", std::to_string(res.solver_calls)},
                    {"n_x", std::to_string(res.n_x)},
                    {"n_q", std::to_string(res.n_q)},
                    {"clamped_mass", fmt_double(res.clamped_mass)}},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_bench(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    uq::BenchConfig b;
    b.sizes = cfg.get_int_list("bench.sizes");
    b.repetitions = static_cast<int>(cfg.get_int("bench.reps", 5));
    const std::string solvers = cfg.get_string("bench.solvers", "fft,ann");
    b.run_fft = solvers.find("fft") != std::string::npos;
    b.run_ann = solvers.find("ann") != std::string::npos;
    b.c_f = cfg.get_double("bench.cf", 0.3);
    b.kind = parse_kind(cfg.get_string("bench.kind", "fiber"));
    b.rsa = read_rsa(cfg);
    if (cfg.has("matrix.p1")) b.mat_M = read_material(cfg, "matrix");
    if (cfg.has("inclusion.p1")) b.mat_I = read_material(cfg, "inclusion");
    b.fft_cfg = read_solver(cfg);
    b.topo = read_topo(cfg);
    b.checkpoint_path = cfg.get_string("bench.checkpoint", "");
    b.seed = cfg.get_u64("seed", 0);
    (void)cfg.get_int("threads", 1);
    const std::string output = cfg.get_string("output", out_path(opts, "bench.csv").string());
    cfg.finish();

    const auto rows = uq::bench_timing(b);
    std::ofstream f(output);
    f << "size,fft_seconds,ann_seconds,ratio\n";
    for (const auto& r : rows) {
        f << r.size << "," << (r.fft_seconds < 0 ? "" : fmt_double(r.fft_seconds)) << ","
          << (r.ann_seconds < 0 ? "" : fmt_double(r.ann_seconds)) << ","
          << (r.ratio < 0 ? "" : fmt_double(r.ratio)) << "\n";
        std::cout << "size " << r.size << ": fft " << fmt_sig6(r.fft_seconds) << " s, ann "
                  << fmt_sig6(r.ann_seconds) << " s\n";
    }
    write_manifest(opts, cfg, "bench", {output}, {{"seed", std::to_string(b.seed)}},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_compare(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg = load_config(opts);
    const std::string a_moments = cfg.get_string("a.moments");
    const std::string a_cdf = cfg.get_string("a.cdf");
    const std::string b_moments = cfg.get_string("b.moments");
    const std::string b_cdf = cfg.get_string("b.cdf");
    const std::string output = cfg.get_string("output", out_path(opts, "compare.csv").string());
    (void)cfg.get_u64("seed", 0);
    (void)cfg.get_int("threads", 1);
    cfg.finish();

    const uq::UQResult a = read_result_csvs(a_moments, a_cdf);
    const uq::UQResult b = read_result_csvs(b_moments, b_cdf);
    const auto report = uq::compare_results(a, b);
    std::ofstream f(output);
    f << "output_name,mean_rel_diff,std_rel_diff,kolmogorov\n";
    for (const auto& e : report) {
        f << e.name << "," << fmt_double(e.mean_rel_diff) << "," << fmt_double(e.std_rel_diff)
          << "," << fmt_double(e.kolmogorov) << "\n";
        std::cout << e.name << ": mean diff " << fmt_sig6(e.mean_rel_diff) << ", std diff "
                  << fmt_sig6(e.std_rel_diff) << ", K " << fmt_sig6(e.kolmogorov) << "\n";
    }
    write_manifest(opts, cfg, "compare", {output}, {},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uncertainty quantification of homogenized elastic properties on voxel "
                 "microstructures (FFT solver, network surrogate, pseudospectral PCE)"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::function<int(const CommonOpts&)> handler;

    auto add_common = [&opts](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "key=value configuration file");
        sub->add_option("--seed", opts.seed, "override the config seed");
        sub->add_option("--threads", opts.threads, "override the thread count (0 = auto)");
        sub->add_option("--out", opts.out_dir, "output directory");
    };

    struct SubDef {
        const char* name;
        const char* help;
        std::function<int(const CommonOpts&)> fn;
    };
    const std::vector<SubDef> defs = {
        {"gen-micro", "generate a voxel microstructure and write it as .muqg", cmd_gen_micro},
        {"homogenize", "effective stiffness of one microstructure via the FFT solver", cmd_homogenize},
        {"gen-data", "generate an FFT-labeled training dataset", cmd_gen_data},
        {"train", "train the stress surrogate on a dataset", cmd_train},
        {"hp-search", "random hyperparameter search on a tuning dataset", cmd_hp_search},
        {"uq", "pseudospectral PCE over the chosen solver",
         [](const CommonOpts& o) { return run_uq_like(o, false); }},
        {"mc", "Monte Carlo baseline over the chosen solver",
         [](const CommonOpts& o) { return run_uq_like(o, true); }},
        {"bench", "FFT vs network timing benchmark", cmd_bench},
        {"compare", "compare two result CSV sets", cmd_compare},
    };
    for (const auto& def : defs) {
        CLI::App* sub = app.add_subcommand(def.name, def.help);
        add_common(sub);
        sub->callback([&handler, fn = def.fn]() { handler = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        return handler(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const NonPhysicalError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidBoundsError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
