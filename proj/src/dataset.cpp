#include "muq/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "muq/concurrency.hpp"
#include "muq/io.hpp"
#include "muq/rng.hpp"

namespace muq {

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
}

void validate(const SampleInputBounds& b) {
    if (!(b.cf_lo >= 0.0 && b.cf_hi <= 1.0 && b.cf_lo <= b.cf_hi))
        throw InvalidBoundsError("volume fraction bounds outside [0, 1]");
    if (!(b.p1_lo <= b.p1_hi) || !(b.p2_lo <= b.p2_hi))
        throw InvalidBoundsError("material bounds must satisfy lo <= hi");
    // Both corners must be physically admissible; uniform draws in between
    // then are as well.
    validate(MaterialParams{b.rep, b.p1_lo, b.p2_lo});
    validate(MaterialParams{b.rep, b.p1_hi, b.p2_hi});
    validate(b.inclusion);
}

Sample sample_inputs(const SampleInputBounds& bounds, std::size_t k, std::uint64_t base_seed) {
    validate(bounds);
    Rng rng(base_seed + k);
    Sample s;
    s.c_f = bounds.cf_lo == bounds.cf_hi ? bounds.cf_lo : rng.uniform(bounds.cf_lo, bounds.cf_hi);
    const double p1 = bounds.p1_lo == bounds.p1_hi ? bounds.p1_lo : rng.uniform(bounds.p1_lo, bounds.p1_hi);
    const double p2 = bounds.p2_lo == bounds.p2_hi ? bounds.p2_lo : rng.uniform(bounds.p2_lo, bounds.p2_hi);
    s.mat_M = convert_params(MaterialParams{bounds.rep, p1, p2}, ParamRep::KG);
    s.mat_I = convert_params(bounds.inclusion, ParamRep::KG);
    s.grid_seed = base_seed + k;
    return s;
}

VoxelGrid realize_grid(const Dataset& ds, const Sample& s) {
    if (s.grid) return *s.grid;
    return gen_microstructure(ds.kind, ds.grid_n, s.c_f, s.grid_seed, ds.rsa);
}

Dataset generate(const SampleInputBounds& bounds, const GenerateConfig& cfg) {
    validate(bounds);
    if (cfg.n_s <= 0 || cfg.n_s % 6 != 0)
        throw InvalidBoundsError("sample count must be a positive multiple of 6");

    Dataset ds;
    ds.grid_n = cfg.grid_n;
    ds.kind = cfg.kind;
    ds.embed_grids = cfg.embed_grids;
    ds.rsa = cfg.rsa;
    ds.samples.resize(static_cast<std::size_t>(cfg.n_s));

    const std::size_t per_state = static_cast<std::size_t>(cfg.n_s) / 6;
    std::atomic<int> failures{0};
    std::vector<std::string> errors(ds.samples.size());

    parallel_for(ds.samples.size(), cfg.threads, [&](std::size_t k) {
        try {
            Sample s = sample_inputs(bounds, k, cfg.base_seed);
            s.strain_index = static_cast<int>(k / per_state) + 1;
            VoxelGrid grid = gen_microstructure(cfg.kind, cfg.grid_n, s.c_f, s.grid_seed, cfg.rsa);
            const auto res =
                fft::solve_micro(grid, s.mat_M, s.mat_I, unit_strain(s.strain_index), cfg.solver);
            if (!res.converged) {
                failures.fetch_add(1);
                errors[k] = "no convergence (residual " + std::to_string(res.residual) + ")";
                return;
            }
            s.label = fft::average_stress(grid, s.mat_M, s.mat_I, res.strain);
            if (cfg.embed_grids) s.grid = std::move(grid);
            ds.samples[k] = std::move(s);
        } catch (const std::exception& e) {
            failures.fetch_add(1);
            errors[k] = e.what();
        }
    });

    if (failures.load() > 0) {
        if (failures.load() * 100 > cfg.n_s) {
            std::string first;
            for (std::size_t k = 0; k < errors.size(); ++k)
                if (!errors[k].empty()) {
                    first = "sample " + std::to_string(k) + ": " + errors[k];
                    break;
                }
            throw Error("dataset generation aborted, " + std::to_string(failures.load()) +
                        " of " + std::to_string(cfg.n_s) + " samples failed (" + first + ")");
        }
        // Tolerated failure rate: regenerate the failed samples serially with
        // a perturbed seed so the dataset stays complete.
        for (std::size_t k = 0; k < errors.size(); ++k) {
            if (errors[k].empty()) continue;
            std::uint64_t retry_seed = cfg.base_seed + k;
            for (int attempt = 0; attempt < 100; ++attempt) {
                retry_seed += static_cast<std::uint64_t>(cfg.n_s) + 1;
                try {
                    Sample s = sample_inputs(bounds, k, retry_seed);
                    s.strain_index = static_cast<int>(k / per_state) + 1;
                    VoxelGrid grid =
                        gen_microstructure(cfg.kind, cfg.grid_n, s.c_f, s.grid_seed, cfg.rsa);
                    const auto res = fft::solve_micro(grid, s.mat_M, s.mat_I,
                                                      unit_strain(s.strain_index), cfg.solver);
                    if (!res.converged) continue;
                    s.label = fft::average_stress(grid, s.mat_M, s.mat_I, res.strain);
                    if (cfg.embed_grids) s.grid = std::move(grid);
                    ds.samples[k] = std::move(s);
                    errors[k].clear();
                    break;
                } catch (const std::exception&) {
                }
            }
            if (!errors[k].empty())
                throw Error("sample " + std::to_string(k) + " unrecoverable: " + errors[k]);
        }
    }

    // Row-wise shuffle, seeded independently of the per-sample streams.
    Rng shuffle_rng(cfg.base_seed + static_cast<std::uint64_t>(cfg.n_s));
    for (std::size_t i = ds.samples.size(); i > 1; --i) {
        const std::size_t j = shuffle_rng.uniform_int(i);
        std::swap(ds.samples[i - 1], ds.samples[j]);
    }
    return ds;
}

SplitResult split(const Dataset& ds, double f_train, double f_val, double f_test, std::uint64_t seed) {
    if (f_train < 0.0 || f_val < 0.0 || f_test < 0.0 ||
        std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw BadFractionsError("split fractions must be nonnegative and sum to 1");
    std::vector<std::size_t> order(ds.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);

    const auto n = ds.samples.size();
    const auto n_train = static_cast<std::size_t>(std::llround(f_train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(f_val * static_cast<double>(n)));
    SplitResult out;
    for (Dataset* part : {&out.train, &out.val, &out.test}) {
        part->grid_n = ds.grid_n;
        part->kind = ds.kind;
        part->embed_grids = ds.embed_grids;
        part->rsa = ds.rsa;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = ds.samples[order[i]];
        if (i < n_train)
            out.train.samples.push_back(s);
        else if (i < n_train + n_val)
            out.val.samples.push_back(s);
        else
            out.test.samples.push_back(s);
    }
    return out;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    io::BinaryWriter w(path);
    w.magic("MUQD");
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(ds.samples.size()));
    w.u32(static_cast<std::uint32_t>(ds.grid_n));
    w.u8(static_cast<std::uint8_t>(ds.kind));
    w.u8(ds.embed_grids ? 1 : 0);
    w.f64(ds.rsa.sphere_radius);
    w.u32(static_cast<std::uint32_t>(ds.rsa.max_attempts));
    for (const Sample& s : ds.samples) {
        w.f64(s.c_f);
        w.f64(s.mat_M.p1);
        w.f64(s.mat_M.p2);
        w.f64(s.mat_I.p1);
        w.f64(s.mat_I.p2);
        w.u8(static_cast<std::uint8_t>(s.strain_index));
        w.u64(s.grid_seed);
        w.f64s(s.label.c.data(), 6);
        if (ds.embed_grids) {
            if (!s.grid || s.grid->n != ds.grid_n) throw Error("sample is missing its embedded grid");
            w.bytes(s.grid->data.data(), s.grid->data.size());
        }
    }
    if (!w.good()) throw Error("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    io::BinaryReader r(path);
    r.expect_magic("MUQD");
    if (r.u32() != kDatasetVersion) throw CorruptFileError("unsupported dataset version in " + path);
    Dataset ds;
    const auto n_s = r.u32();
    ds.grid_n = static_cast<int>(r.u32());
    const auto kind = r.u8();
    if (kind > 1) throw CorruptFileError("unknown microstructure kind in " + path);
    ds.kind = static_cast<MicroKind>(kind);
    const auto embed = r.u8();
    if (embed > 1) throw CorruptFileError("bad embed flag in " + path);
    ds.embed_grids = embed == 1;
    ds.rsa.sphere_radius = r.f64();
    ds.rsa.max_attempts = static_cast<int>(r.u32());
    if (ds.grid_n < 2 || ds.grid_n > 4096) throw CorruptFileError("implausible grid size in " + path);

    ds.samples.resize(n_s);
    for (Sample& s : ds.samples) {
        s.c_f = r.f64();
        const double k_m = r.f64();
        const double g_m = r.f64();
        s.mat_M = MaterialParams::k_g(k_m, g_m);
        const double k_i = r.f64();
        const double g_i = r.f64();
        s.mat_I = MaterialParams::k_g(k_i, g_i);
        s.strain_index = static_cast<int>(r.u8());
        if (s.strain_index < 1 || s.strain_index > 6)
            throw CorruptFileError("strain index outside 1..6 in " + path);
        s.grid_seed = r.u64();
        r.f64s(s.label.c.data(), 6);
        if (ds.embed_grids) {
            VoxelGrid g(ds.grid_n);
            r.bytes(g.data.data(), g.data.size());
            s.grid = std::move(g);
        }
    }
    if (!r.at_eof()) throw CorruptFileError("trailing bytes in " + path);
    return ds;
}

}  // namespace muq
