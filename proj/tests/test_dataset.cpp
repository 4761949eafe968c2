#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "muq/dataset.hpp"

using namespace muq;

namespace {

SampleInputBounds example_bounds() {
    // c_f in [0,1], E_M in [1e3, 1e4] MPa, nu_M in [0.1, 0.48], fixed
    // inclusion.
    SampleInputBounds b;
    b.cf_lo = 0.0;
    b.cf_hi = 1.0;
    b.rep = ParamRep::ENu;
    b.p1_lo = 1e3;
    b.p1_hi = 1e4;
    b.p2_lo = 0.1;
    b.p2_hi = 0.48;
    b.inclusion = MaterialParams::e_nu(2.31e5, 0.1);
    return b;
}

GenerateConfig small_gen(int n_s) {
    GenerateConfig cfg;
    cfg.n_s = n_s;
    cfg.grid_n = 8;
    cfg.kind = MicroKind::Fiber;
    cfg.base_seed = 7;
    cfg.solver.rel_tol = 1e-6;
    cfg.solver.max_iter = 800;
    return cfg;
}

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("input sampling") {
    SUBCASE("degenerate bounds always return the constant") {
        SampleInputBounds b = example_bounds();
        b.cf_lo = b.cf_hi = 0.3;
        b.p1_lo = b.p1_hi = 5e3;
        b.p2_lo = b.p2_hi = 0.25;
        for (std::size_t k = 0; k < 10; ++k) {
            const Sample s = sample_inputs(b, k, 99);
            CHECK(s.c_f == 0.3);
            CHECK(youngs_modulus(s.mat_M) == doctest::Approx(5e3).epsilon(1e-12));
            CHECK(poisson_ratio(s.mat_M) == doctest::Approx(0.25).epsilon(1e-12));
        }
    }
    SUBCASE("draw statistics match the uniform bounds") {
        const SampleInputBounds b = example_bounds();
        double nu_min = 1.0, nu_max = 0.0, nu_sum = 0.0;
        const std::size_t n = 10000;
        for (std::size_t k = 0; k < n; ++k) {
            const Sample s = sample_inputs(b, k, 123);
            const double nu = poisson_ratio(s.mat_M);
            nu_min = std::min(nu_min, nu);
            nu_max = std::max(nu_max, nu);
            nu_sum += nu;
            CHECK(s.c_f >= 0.0);
            CHECK(s.c_f <= 1.0);
        }
        CHECK(nu_min >= 0.1);
        CHECK(nu_max <= 0.48);
        CHECK(std::abs(nu_sum / static_cast<double>(n) - 0.29) < 0.01);
    }
    SUBCASE("samples are stored in bulk/shear form") {
        const Sample s = sample_inputs(example_bounds(), 3, 5);
        CHECK(s.mat_M.rep == ParamRep::KG);
        CHECK(s.mat_I.rep == ParamRep::KG);
        CHECK(youngs_modulus(s.mat_I) == doctest::Approx(2.31e5).epsilon(1e-12));
    }
    SUBCASE("invalid bounds are rejected") {
        SampleInputBounds b = example_bounds();
        b.p2_hi = 0.55;
        CHECK_THROWS_AS(sample_inputs(b, 0, 0), Error);
        b = example_bounds();
        b.cf_hi = 1.5;
        CHECK_THROWS_AS(sample_inputs(b, 0, 0), InvalidBoundsError);
    }
}

TEST_CASE("generation balances strain states and respects bounds") {
    const Dataset ds = generate(example_bounds(), small_gen(12));
    REQUIRE(ds.size() == 12);
    std::array<int, 7> hist{};
    for (const Sample& s : ds.samples) {
        hist[static_cast<std::size_t>(s.strain_index)]++;
        CHECK(s.c_f >= 0.0);
        CHECK(s.c_f <= 1.0);
        const double nu = poisson_ratio(s.mat_M);
        CHECK(nu >= 0.1);
        CHECK(nu <= 0.48);
        for (int c = 0; c < 6; ++c) CHECK(std::isfinite(s.label[c]));
    }
    for (int i = 1; i <= 6; ++i) CHECK(hist[static_cast<std::size_t>(i)] == 2);

    CHECK_THROWS_AS(generate(example_bounds(), small_gen(10)), InvalidBoundsError);
}

TEST_CASE("inclusion-free samples carry the matrix stiffness column") {
    SampleInputBounds b = example_bounds();
    b.cf_lo = b.cf_hi = 0.0;
    const Dataset ds = generate(b, small_gen(6));
    for (const Sample& s : ds.samples) {
        const VoigtMatrix C = isotropic_stiffness(s.mat_M);
        for (int r = 0; r < 6; ++r)
            CHECK(s.label[r] ==
                  doctest::Approx(C(r, s.strain_index - 1)).epsilon(1e-9).scale(1e3));
    }
}

TEST_CASE("generation is reproducible and labels re-derivable") {
    const GenerateConfig cfg = small_gen(12);
    const Dataset a = generate(example_bounds(), cfg);
    const Dataset b = generate(example_bounds(), cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a.samples[k].c_f == b.samples[k].c_f);
        CHECK(a.samples[k].grid_seed == b.samples[k].grid_seed);
        for (int c = 0; c < 6; ++c) CHECK(a.samples[k].label[c] == b.samples[k].label[c]);
    }

    // Rebuild the grid from the stored recipe and re-solve.
    const Sample& s = a.samples[3];
    const VoxelGrid g = realize_grid(a, s);
    const auto res = fft::solve_micro(g, s.mat_M, s.mat_I, unit_strain(s.strain_index), cfg.solver);
    REQUIRE(res.converged);
    const VoigtVector sigma = fft::average_stress(g, s.mat_M, s.mat_I, res.strain);
    for (int c = 0; c < 6; ++c) CHECK(std::abs(sigma[c] - s.label[c]) < 1e-10 * 1e4);
}

TEST_CASE("splitting") {
    Dataset ds;
    ds.grid_n = 8;
    ds.samples.resize(100);
    for (std::size_t k = 0; k < 100; ++k) ds.samples[k].grid_seed = k;

    SUBCASE("all-train split") {
        const SplitResult r = split(ds, 1.0, 0.0, 0.0, 1);
        CHECK(r.train.size() == 100);
        CHECK(r.val.size() == 0);
        CHECK(r.test.size() == 0);
    }
    SUBCASE("80/10/10") {
        const SplitResult r = split(ds, 0.8, 0.1, 0.1, 1);
        CHECK(r.train.size() == 80);
        CHECK(r.val.size() == 10);
        CHECK(r.test.size() == 10);
        // Disjoint and exhaustive by grid_seed marker.
        std::array<int, 100> seen{};
        for (const Dataset* part : {&r.train, &r.val, &r.test})
            for (const Sample& s : part->samples) seen[static_cast<std::size_t>(s.grid_seed)]++;
        for (int v : seen) CHECK(v == 1);
    }
    SUBCASE("deterministic per seed") {
        const SplitResult a = split(ds, 0.8, 0.1, 0.1, 42);
        const SplitResult b = split(ds, 0.8, 0.1, 0.1, 42);
        for (std::size_t k = 0; k < a.train.size(); ++k)
            CHECK(a.train.samples[k].grid_seed == b.train.samples[k].grid_seed);
    }
    SUBCASE("bad fractions rejected") {
        CHECK_THROWS_AS(split(ds, 0.5, 0.1, 0.1, 0), BadFractionsError);
    }
}

TEST_CASE("dataset file round trip") {
    GenerateConfig cfg = small_gen(12);
    SUBCASE("recipe-only records") {
        const Dataset ds = generate(example_bounds(), cfg);
        const std::string path = temp_file("muq_test_ds.muqd");
        write_dataset(ds, path);
        const Dataset back = read_dataset(path);
        REQUIRE(back.size() == ds.size());
        CHECK(back.grid_n == ds.grid_n);
        CHECK(back.kind == ds.kind);
        for (std::size_t k = 0; k < ds.size(); ++k) {
            CHECK(back.samples[k].c_f == ds.samples[k].c_f);
            CHECK(back.samples[k].mat_M.p1 == ds.samples[k].mat_M.p1);
            CHECK(back.samples[k].strain_index == ds.samples[k].strain_index);
            CHECK(back.samples[k].grid_seed == ds.samples[k].grid_seed);
            for (int c = 0; c < 6; ++c) CHECK(back.samples[k].label[c] == ds.samples[k].label[c]);
        }
        std::remove(path.c_str());
    }
    SUBCASE("embedded grids") {
        cfg.embed_grids = true;
        const Dataset ds = generate(example_bounds(), cfg);
        const std::string path = temp_file("muq_test_ds_embed.muqd");
        write_dataset(ds, path);
        const Dataset back = read_dataset(path);
        for (std::size_t k = 0; k < ds.size(); ++k) {
            REQUIRE(back.samples[k].grid.has_value());
            CHECK(*back.samples[k].grid == *ds.samples[k].grid);
        }
        std::remove(path.c_str());
    }
    SUBCASE("header-only file") {
        Dataset empty;
        empty.grid_n = 8;
        const std::string path = temp_file("muq_test_ds_empty.muqd");
        write_dataset(empty, path);
        const Dataset back = read_dataset(path);
        CHECK(back.size() == 0);
        std::remove(path.c_str());
    }
    SUBCASE("truncation detected") {
        const Dataset ds = generate(example_bounds(), cfg);
        const std::string path = temp_file("muq_test_ds_trunc.muqd");
        write_dataset(ds, path);
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 11);
        CHECK_THROWS_AS(read_dataset(path), CorruptFileError);
        std::remove(path.c_str());
    }
}
