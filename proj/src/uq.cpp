#include "muq/uq.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <new>

#include "muq/concurrency.hpp"
#include "muq/rng.hpp"
#include "muq/train.hpp"

namespace muq::uq {

namespace {

// One seed stream per node/sample, decorrelated from neighbouring streams.
std::uint64_t node_seed(std::uint64_t base, std::size_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<std::string> property_names(PropertySet set) {
    switch (set) {
        case PropertySet::TransverseIso:
            return {"E1", "E2", "G12", "G23", "nu12", "nu23"};
        case PropertySet::Iso:
            return {"E", "nu"};
        case PropertySet::RawTensor: {
            std::vector<std::string> names;
            for (int r = 0; r < 6; ++r)
                for (int c = r; c < 6; ++c)
                    names.push_back("C" + std::to_string(r + 1) + std::to_string(c + 1));
            return names;
        }
    }
    throw Error("unknown property set");
}

std::vector<double> extract_properties(const VoigtMatrix& C, PropertySet set) {
    switch (set) {
        case PropertySet::TransverseIso: {
            const TransverseIsoProps p = extract_transverse_isotropic(C);
            return {p.E1, p.E2, p.G12, p.G23, p.nu12, p.nu23};
        }
        case PropertySet::Iso: {
            const IsoProps p = extract_isotropic(C);
            return {p.E, p.nu};
        }
        case PropertySet::RawTensor: {
            std::vector<double> v;
            for (int r = 0; r < 6; ++r)
                for (int c = r; c < 6; ++c) v.push_back(C(r, c));
            return v;
        }
    }
    throw Error("unknown property set");
}

VoigtMatrix homogenize_at(const UQConfig& cfg, nn::Network* net,
                          const std::vector<double>& physical, std::uint64_t grid_seed) {
    if (physical.size() != 3) throw DimensionMismatchError("physical point must be {c_f, p1, p2}");
    const double c_f = physical[0];
    const MaterialParams mat_M =
        convert_params(MaterialParams{cfg.matrix_rep, physical[1], physical[2]}, ParamRep::KG);
    const MaterialParams mat_I = convert_params(cfg.inclusion, ParamRep::KG);
    const VoxelGrid grid = gen_microstructure(cfg.kind, cfg.grid_n, c_f, grid_seed, cfg.rsa);

    if (!net) return fft::homogenize(grid, mat_M, mat_I, cfg.fft_cfg).stiffness;

    VoigtMatrix C;
    for (int i = 1; i <= 6; ++i) {
        const std::vector<double> x1 = nn::numeric_features(mat_M, mat_I, unit_strain(i));
        const std::vector<double> col = nn::surrogate_predict(*net, x1, grid);
        for (int r = 0; r < 6; ++r) C(r, i - 1) = col[static_cast<std::size_t>(r)];
    }
    return symmetrize(C);
}

namespace {

struct ActiveInputs {
    std::vector<std::size_t> dims;  ///< indices of inputs with sigma > 0
    int n_x() const { return static_cast<int>(dims.size()); }
};

ActiveInputs active_inputs(const UQConfig& cfg) {
    if (cfg.inputs.size() != 3)
        throw DimensionMismatchError("expected exactly three inputs: c_f and two matrix parameters");
    ActiveInputs a;
    for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
        const auto& d = cfg.inputs[i];
        if (d.stddev < 0.0) throw OutOfRangeError("input stddev must be >= 0");
        if (!(d.lo < d.hi)) throw OutOfRangeError("truncation bounds must satisfy lo < hi");
        if (d.mean < d.lo || d.mean > d.hi) throw OutOfRangeError("input mean outside truncation bounds");
        if (d.stddev > 0.0) a.dims.push_back(i);
    }
    return a;
}

// Maps an active-space theta vector to the full physical point, clamping to
// the truncation bounds; reports whether any clamp fired.
std::vector<double> to_physical(const UQConfig& cfg, const ActiveInputs& act,
                                const std::vector<double>& theta, bool& clamped) {
    std::vector<double> x(cfg.inputs.size());
    for (std::size_t i = 0; i < cfg.inputs.size(); ++i) x[i] = cfg.inputs[i].mean;
    clamped = false;
    for (std::size_t d = 0; d < act.dims.size(); ++d) {
        const auto& dist = cfg.inputs[act.dims[d]];
        double v = dist.mean + dist.stddev * theta[d];
        if (v < dist.lo) {
            v = dist.lo;
            clamped = true;
        } else if (v > dist.hi) {
            v = dist.hi;
            clamped = true;
        }
        x[act.dims[d]] = v;
    }
    return x;
}

std::vector<pce::InputDistribution> active_dists(const UQConfig& cfg, const ActiveInputs& act) {
    std::vector<pce::InputDistribution> out;
    for (std::size_t d : act.dims) out.push_back(cfg.inputs[d]);
    return out;
}

}  // namespace

UQResult run_uq(const UQConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const ActiveInputs act = active_inputs(cfg);
    const pce::CubatureRule rule = pce::tensor_rule(cfg.n_w, act.n_x());
    const pce::MultiIndexSet basis = pce::multi_indices(act.n_x(), cfg.n_pce);

    std::unique_ptr<nn::Network> net;
    if (cfg.solver == SolverKind::ANN) {
        net = std::make_unique<nn::Network>(nn::load_checkpoint(cfg.checkpoint_path));
        if (net->grid_n() != cfg.grid_n)
            throw DimensionMismatchError("checkpoint grid size does not match configuration");
    }

    const std::vector<std::string> names = property_names(cfg.props);
    double clamped_mass = 0.0;
    for (std::size_t j = 0; j < rule.n_q(); ++j) {
        bool clamped = false;
        (void)to_physical(cfg, act, rule.nodes[j], clamped);
        if (clamped) clamped_mass += rule.weights[j];
    }

    // The network mutates per forward pass, so ANN evaluations stay on one
    // thread; FFT evaluations are independent and parallelize.
    const int threads = cfg.solver == SolverKind::ANN ? 1 : cfg.threads;
    const pce::NodeModel model = [&](const std::vector<double>& theta, std::size_t j) {
        bool clamped = false;
        const std::vector<double> x = to_physical(cfg, act, theta, clamped);
        const VoigtMatrix C = homogenize_at(cfg, net.get(), x, node_seed(cfg.seed, j));
        return extract_properties(C, cfg.props);
    };
    pce::PCESurrogate surrogate = pseudospectral_fit(model, rule, basis, names, threads);

    const pce::Moments m = pce::moments(surrogate);
    UQResult res;
    res.names = names;
    res.mean = m.mean;
    res.stddev = m.stddev;
    res.cdfs = pce::cdf_table(surrogate, active_dists(cfg, act), cfg.cdf_samples,
                              node_seed(cfg.seed, rule.n_q() + 1));
    res.solver_calls = rule.n_q();
    res.solver = cfg.solver;
    res.n_x = act.n_x();
    res.n_q = rule.n_q();
    res.clamped_mass = clamped_mass;
    res.clamp_warning = clamped_mass > 1e-3;
    res.surrogate = std::move(surrogate);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

UQResult run_mc(const UQConfig& cfg, std::size_t n_samples) {
    if (n_samples < 1) throw OutOfRangeError("Monte Carlo needs at least one sample");
    const auto t0 = std::chrono::steady_clock::now();
    const ActiveInputs act = active_inputs(cfg);

    std::unique_ptr<nn::Network> net;
    if (cfg.solver == SolverKind::ANN) {
        net = std::make_unique<nn::Network>(nn::load_checkpoint(cfg.checkpoint_path));
        if (net->grid_n() != cfg.grid_n)
            throw DimensionMismatchError("checkpoint grid size does not match configuration");
    }

    const std::vector<std::string> names = property_names(cfg.props);
    std::vector<std::vector<double>> rows(n_samples);
    std::vector<std::string> failures(n_samples);

    auto eval_sample = [&](std::size_t k, nn::Network* worker_net) {
        // Truncated-normal draws by rejection, one independent stream per
        // sample.
        Rng rng(node_seed(cfg.seed, k));
        std::vector<double> x(cfg.inputs.size());
        for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
            const auto& dist = cfg.inputs[i];
            if (dist.stddev <= 0.0) {
                x[i] = dist.mean;
                continue;
            }
            double v;
            do {
                v = dist.mean + dist.stddev * rng.normal();
            } while (v < dist.lo || v > dist.hi);
            x[i] = v;
        }
        const VoigtMatrix C = homogenize_at(cfg, worker_net, x, node_seed(cfg.seed ^ 0x5bf0ull, k));
        rows[k] = extract_properties(C, cfg.props);
    };

    if (cfg.solver == SolverKind::ANN) {
        for (std::size_t k = 0; k < n_samples; ++k) eval_sample(k, net.get());
    } else {
        parallel_for(n_samples, cfg.threads, [&](std::size_t k) {
            try {
                eval_sample(k, nullptr);
            } catch (const std::exception& e) {
                failures[k] = e.what();
            }
        });
        for (std::size_t k = 0; k < n_samples; ++k)
            if (!failures[k].empty())
                throw Error("sample " + std::to_string(k) + " failed: " + failures[k]);
    }

    UQResult res;
    res.names = names;
    res.mean.assign(names.size(), 0.0);
    res.stddev.assign(names.size(), 0.0);
    // Moments accumulated relative to the first sample; degenerate inputs
    // then give exactly zero spread.
    for (std::size_t c = 0; c < names.size(); ++c) {
        const double ref = rows[0][c];
        double sum = 0.0;
        for (const auto& r : rows) sum += r[c] - ref;
        const double shifted_mean = sum / static_cast<double>(n_samples);
        res.mean[c] = ref + shifted_mean;
        if (n_samples > 1) {
            double var = 0.0;
            for (const auto& r : rows) {
                const double d = (r[c] - ref) - shifted_mean;
                var += d * d;
            }
            res.stddev[c] = std::sqrt(var / static_cast<double>(n_samples - 1));
        }
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
        std::vector<double> col(n_samples);
        for (std::size_t k = 0; k < n_samples; ++k) col[k] = rows[k][c];
        res.cdfs.push_back(pce::empirical_cdf(names[c], std::move(col)));
    }
    res.solver_calls = n_samples;
    res.solver = cfg.solver;
    res.n_x = act.n_x();
    res.n_q = n_samples;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

double kolmogorov_distance(const pce::CdfTable& a, const pce::CdfTable& b) {
    // Right-continuous empirical CDF evaluated on the merged support.
    auto eval = [](const pce::CdfTable& t, double x) {
        const auto it = std::upper_bound(t.value.begin(), t.value.end(), x);
        if (it == t.value.begin()) return 0.0;
        return t.prob[static_cast<std::size_t>(it - t.value.begin()) - 1];
    };
    double d = 0.0;
    for (double x : a.value) d = std::max(d, std::abs(eval(a, x) - eval(b, x)));
    for (double x : b.value) d = std::max(d, std::abs(eval(a, x) - eval(b, x)));
    return d;
}

std::vector<CompareEntry> compare_results(const UQResult& a, const UQResult& b) {
    if (a.names != b.names) throw PropertyMismatchError("result property sets differ");
    std::vector<CompareEntry> out;
    for (std::size_t c = 0; c < a.names.size(); ++c) {
        CompareEntry e;
        e.name = a.names[c];
        const double mean_scale = 0.5 * (std::abs(a.mean[c]) + std::abs(b.mean[c]));
        e.mean_rel_diff = mean_scale > 0.0 ? std::abs(a.mean[c] - b.mean[c]) / mean_scale : 0.0;
        const double std_scale = 0.5 * (a.stddev[c] + b.stddev[c]);
        e.std_rel_diff = std_scale > 0.0 ? std::abs(a.stddev[c] - b.stddev[c]) / std_scale : 0.0;
        e.kolmogorov = kolmogorov_distance(a.cdfs[c], b.cdfs[c]);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<BenchRow> bench_timing(const BenchConfig& cfg) {
    std::vector<BenchRow> rows;
    for (int size : cfg.sizes) {
        BenchRow row;
        row.size = size;
        VoxelGrid grid;
        try {
            grid = gen_microstructure(cfg.kind, size, cfg.c_f, cfg.seed, cfg.rsa);
        } catch (const std::bad_alloc&) {
            rows.push_back(row);
            continue;
        }

        if (cfg.run_fft) {
            try {
                std::vector<double> times;
                for (int rep = 0; rep < cfg.repetitions; ++rep) {
                    const auto t0 = std::chrono::steady_clock::now();
                    (void)fft::homogenize(grid, cfg.mat_M, cfg.mat_I, cfg.fft_cfg);
                    times.push_back(
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                }
                row.fft_seconds = median(times);
            } catch (const std::bad_alloc&) {
            }
        }

        if (cfg.run_ann) {
            try {
                std::unique_ptr<nn::Network> net;
                if (!cfg.checkpoint_path.empty()) {
                    net = std::make_unique<nn::Network>(nn::load_checkpoint(cfg.checkpoint_path));
                    if (net->grid_n() != size) net.reset();
                }
                if (!net) {
                    const nn::Topology topo = nn::make_default_topology(size, cfg.topo);
                    const auto dim = nn::numeric_features(cfg.mat_M, cfg.mat_I, unit_strain(1)).size();
                    net = std::make_unique<nn::Network>(topo, size, static_cast<int>(dim), cfg.seed);
                }
                std::vector<double> times;
                for (int rep = 0; rep < cfg.repetitions; ++rep) {
                    const auto t0 = std::chrono::steady_clock::now();
                    VoigtMatrix C;
                    for (int i = 1; i <= 6; ++i) {
                        const auto x1 = nn::numeric_features(cfg.mat_M, cfg.mat_I, unit_strain(i));
                        const std::vector<double> col = nn::surrogate_predict(*net, x1, grid);
                        for (int r = 0; r < 6; ++r) C(r, i - 1) = col[static_cast<std::size_t>(r)];
                    }
                    times.push_back(
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                }
                row.ann_seconds = median(times);
            } catch (const std::bad_alloc&) {
            }
        }

        if (row.fft_seconds > 0.0 && row.ann_seconds > 0.0)
            row.ratio = row.fft_seconds / row.ann_seconds;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace muq::uq
