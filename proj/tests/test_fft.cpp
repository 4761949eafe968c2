#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "muq/fft.hpp"
#include "muq/rng.hpp"
#include "oracles.hpp"

using namespace muq;
using namespace muq::fft;

namespace {

double max_rel_entry_err(const VoigtMatrix& got, const VoigtMatrix& want) {
    double scale = 0.0;
    for (double v : want.m) scale = std::max(scale, std::abs(v));
    double err = 0.0;
    for (std::size_t i = 0; i < 36; ++i) err = std::max(err, std::abs(got.m[i] - want.m[i]));
    return err / scale;
}

VoxelGrid laminate_grid(int n) {
    // 50/50 two-phase laminate normal to axis 1.
    VoxelGrid g(n);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                if (x < n / 2) g.at(x, y, z) = 1;
    return g;
}

VoxelGrid random_grid(int n, std::uint64_t seed, double p = 0.5) {
    VoxelGrid g(n);
    Rng rng(seed);
    for (auto& v : g.data) v = rng.uniform() < p ? 1 : 0;
    return g;
}

Field random_strain_field(int n, std::uint64_t seed) {
    Field f(n);
    Rng rng(seed);
    for (double& v : f.data) v = rng.uniform(-1.0, 1.0);
    return f;
}

}  // namespace

TEST_CASE("projection annihilates constant fields") {
    ProjectionOperator op(8);
    Field f(8);
    for (int c = 0; c < 6; ++c) {
        double* p = f.comp(c);
        for (std::size_t i = 0; i < f.voxels(); ++i) p[i] = 1.0 + c;
    }
    op.apply(f);
    for (double v : f.data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("projection keeps a single-mode compatible field") {
    // eps = sym(xi ox u) * cos(2 pi k.x / n) at one mode is compatible and
    // must pass through unchanged.
    const int n = 8;
    ProjectionOperator op(n);
    const double u[3] = {0.3, -0.7, 0.2};
    const int k[3] = {2, 1, 3};
    Field f(n);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double phase = 2.0 * 3.14159265358979323846 *
                                     (k[0] * x + k[1] * y + k[2] * z) / static_cast<double>(n);
                const double c = std::cos(phase);
                const std::size_t idx = static_cast<std::size_t>((z * n + y) * n + x);
                const double e[3][3] = {
                    {k[0] * u[0], 0.5 * (k[0] * u[1] + k[1] * u[0]), 0.5 * (k[0] * u[2] + k[2] * u[0])},
                    {0.0, k[1] * u[1], 0.5 * (k[1] * u[2] + k[2] * u[1])},
                    {0.0, 0.0, k[2] * u[2]}};
                f.comp(0)[idx] = e[0][0] * c;
                f.comp(1)[idx] = e[1][1] * c;
                f.comp(2)[idx] = e[2][2] * c;
                f.comp(3)[idx] = 2.0 * e[1][2] * c;
                f.comp(4)[idx] = 2.0 * e[0][2] * c;
                f.comp(5)[idx] = 2.0 * e[0][1] * c;
            }
    const Field before = f;
    op.apply(f);
    for (std::size_t i = 0; i < f.data.size(); ++i)
        CHECK(std::abs(f.data[i] - before.data[i]) < 1e-12);
}

TEST_CASE("projection is idempotent") {
    const int n = 8;
    ProjectionOperator op(n);
    Field f = random_strain_field(n, 99);
    Field once = project(op, f);
    Field twice = project(op, once);
    for (std::size_t i = 0; i < f.data.size(); ++i)
        CHECK(std::abs(once.data[i] - twice.data[i]) < 1e-10);
}

TEST_CASE("projection rejects mismatched sizes") {
    ProjectionOperator op(8);
    Field f(16);
    CHECK_THROWS_AS(op.apply(f), DimensionMismatchError);
}

TEST_CASE("homogeneous grid solves to the constant macro strain") {
    const VoxelGrid g(8);  // all matrix
    const MaterialParams m = MaterialParams::e_nu(100.0, 0.3);
    const auto res = solve_micro(g, m, MaterialParams::e_nu(5.0, 0.2), unit_strain(1), {});
    CHECK(res.converged);
    CHECK(res.iterations == 0);
    const VoigtVector mean = res.strain.mean();
    CHECK(mean[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 1; c < 6; ++c) CHECK(std::abs(mean[c]) < 1e-12);
    for (std::size_t i = 0; i < res.strain.voxels(); ++i)
        CHECK(res.strain.comp(0)[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical phase parameters behave like a homogeneous cell") {
    const VoxelGrid g = random_grid(8, 4);
    const MaterialParams m = MaterialParams::e_nu(7.0, 0.25);
    const auto res = solve_micro(g, m, m, unit_strain(4), {});
    CHECK(res.converged);
    for (std::size_t i = 0; i < res.strain.voxels(); ++i) {
        CHECK(std::abs(res.strain.comp(0)[i]) < 1e-12);
        CHECK(res.strain.comp(3)[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("mean strain constraint holds for every macro strain") {
    const VoxelGrid g = random_grid(8, 11);
    const MaterialParams m = MaterialParams::e_nu(10.0, 0.3);
    const MaterialParams i = MaterialParams::e_nu(100.0, 0.2);
    for (int s = 1; s <= 6; ++s) {
        const auto res = solve_micro(g, m, i, unit_strain(s), {});
        REQUIRE(res.converged);
        const VoigtVector mean = res.strain.mean();
        for (int c = 0; c < 6; ++c)
            CHECK(std::abs(mean[c] - unit_strain(s)[c]) < 1e-12);
    }
}

TEST_CASE("laminate matches the closed-form oracle") {
    const int n = 16;
    const VoxelGrid g = laminate_grid(n);
    const MaterialParams mat_I = MaterialParams::e_nu(10.0, 0.3);  // phase in x < n/2
    const MaterialParams mat_M = MaterialParams::e_nu(1.0, 0.3);
    const VoigtMatrix C_I = isotropic_stiffness(mat_I);
    const VoigtMatrix C_M = isotropic_stiffness(mat_M);

    SolverConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.max_iter = 2000;

    SUBCASE("per-layer strain fields") {
        const auto sol = test::laminate_solve(C_I, C_M, 0.5, unit_strain(1));
        const auto res = solve_micro(g, mat_M, mat_I, unit_strain(1), cfg);
        REQUIRE(res.converged);
        for (int c = 0; c < 6; ++c) {
            // Voxel in the inclusion layer and one in the matrix layer.
            const double in_I = res.strain.comp(c)[0];
            const double in_M = res.strain.comp(c)[static_cast<std::size_t>(n) - 1];
            CHECK(std::abs(in_I - sol.eps_A[c]) < 1e-6 * (1.0 + std::abs(sol.eps_A[c])));
            CHECK(std::abs(in_M - sol.eps_B[c]) < 1e-6 * (1.0 + std::abs(sol.eps_B[c])));
        }
        const VoigtVector sbar = average_stress(g, mat_M, mat_I, res.strain);
        for (int c = 0; c < 6; ++c)
            CHECK(std::abs(sbar[c] - sol.sigma_bar[c]) < 1e-6 * (1.0 + std::abs(sol.sigma_bar[c])));
    }

    SUBCASE("effective tensor") {
        const VoigtMatrix want = test::laminate_effective(C_I, C_M, 0.5);
        const auto res = homogenize(g, mat_M, mat_I, cfg);
        CHECK(max_rel_entry_err(res.stiffness, want) < 1e-6);
        CHECK(res.asymmetry < 1e-8);
    }
}

TEST_CASE("average stress basics") {
    const VoxelGrid g(8);
    const MaterialParams m = MaterialParams::e_nu(10.0, 0.3);
    const MaterialParams i = MaterialParams::e_nu(100.0, 0.2);

    SUBCASE("homogeneous strain recovers a stiffness column") {
        Field eps(8);
        for (std::size_t k = 0; k < eps.voxels(); ++k) eps.comp(0)[k] = 1.0;
        const VoigtVector s = average_stress(g, m, i, eps);
        const VoigtMatrix C = isotropic_stiffness(m);
        for (int c = 0; c < 6; ++c) CHECK(s[c] == doctest::Approx(C(c, 0)).epsilon(1e-14));
    }
    SUBCASE("zero strain gives zero stress") {
        const VoigtVector s = average_stress(g, m, i, Field(8));
        for (int c = 0; c < 6; ++c) CHECK(s[c] == 0.0);
    }
}

TEST_CASE("homogenize on degenerate grids") {
    const MaterialParams m = MaterialParams::e_nu(10.0, 0.3);
    const MaterialParams i = MaterialParams::e_nu(100.0, 0.2);

    SUBCASE("all-matrix grid returns the matrix stiffness") {
        const auto res = homogenize(VoxelGrid(8), m, i, {});
        CHECK(max_rel_entry_err(res.stiffness, isotropic_stiffness(m)) < 1e-10);
    }
    SUBCASE("all-inclusion grid returns the inclusion stiffness") {
        VoxelGrid g(8);
        for (auto& v : g.data) v = 1;
        const auto res = homogenize(g, m, i, {});
        CHECK(max_rel_entry_err(res.stiffness, isotropic_stiffness(i)) < 1e-10);
    }
}

TEST_CASE("effective tensor sits between Reuss and Voigt bounds") {
    const MaterialParams m = MaterialParams::e_nu(10.0, 0.3);
    const MaterialParams i = MaterialParams::e_nu(100.0, 0.2);
    SolverConfig cfg;
    cfg.rel_tol = 1e-10;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const VoxelGrid g = random_grid(8, 100 + seed);
        const auto res = homogenize(g, m, i, cfg);
        const VoigtMatrix upper = voigt_bound(g, m, i);
        const VoigtMatrix lower = reuss_bound(g, m, i);
        const double tol = -1e-8 * norm(res.stiffness);
        VoigtMatrix gap_hi, gap_lo;
        for (std::size_t k = 0; k < 36; ++k) {
            gap_hi.m[k] = upper.m[k] - res.stiffness.m[k];
            gap_lo.m[k] = res.stiffness.m[k] - lower.m[k];
        }
        CHECK(min_eigenvalue(gap_hi) >= tol);
        CHECK(min_eigenvalue(gap_lo) >= tol);
    }
}

TEST_CASE("scaling both phases scales the effective tensor exactly") {
    const VoxelGrid g = random_grid(8, 21);
    const MaterialParams m = MaterialParams::k_g(8.0, 3.0);
    const MaterialParams i = MaterialParams::k_g(40.0, 24.0);
    const MaterialParams m2 = MaterialParams::k_g(16.0, 6.0);
    const MaterialParams i2 = MaterialParams::k_g(80.0, 48.0);
    const auto a = homogenize(g, m, i, {});
    const auto b = homogenize(g, m2, i2, {});
    for (std::size_t k = 0; k < 36; ++k) CHECK(b.stiffness.m[k] == 2.0 * a.stiffness.m[k]);
}

TEST_CASE("phase swap leaves the effective tensor unchanged") {
    const VoxelGrid g = random_grid(8, 31);
    VoxelGrid swapped = g;
    for (auto& v : swapped.data) v = v ? 0 : 1;
    const MaterialParams m = MaterialParams::e_nu(10.0, 0.3);
    const MaterialParams i = MaterialParams::e_nu(100.0, 0.2);
    const auto a = homogenize(g, m, i, {});
    const auto b = homogenize(swapped, i, m, {});
    CHECK(max_rel_entry_err(b.stiffness, a.stiffness) < 1e-10);
}

TEST_CASE("hill-mandel residual") {
    const MaterialParams m = MaterialParams::e_nu(10.0, 0.3);
    const MaterialParams i = MaterialParams::e_nu(100.0, 0.2);

    SUBCASE("zero for a homogeneous response") {
        const VoxelGrid g(8);
        const auto res = solve_micro(g, m, i, unit_strain(1), {});
        CHECK(hill_mandel_residual(g, m, i, res.strain) < 1e-14);
    }
    SUBCASE("small for a converged laminate") {
        const VoxelGrid g = laminate_grid(16);
        SolverConfig cfg;
        cfg.rel_tol = 1e-10;
        const auto res = solve_micro(g, m, i, unit_strain(1), cfg);
        REQUIRE(res.converged);
        CHECK(hill_mandel_residual(g, m, i, res.strain) < 1e-8);
    }
    SUBCASE("small for converged random two-phase cells") {
        // Laminates are insensitive to the stress-projection shear
        // convention; random grids are the discriminating case.
        SolverConfig cfg;
        cfg.rel_tol = 1e-10;
        cfg.max_iter = 2000;
        for (std::uint64_t seed = 50; seed < 53; ++seed) {
            const VoxelGrid g = random_grid(8, seed);
            for (int s = 1; s <= 6; ++s) {
                const auto res = solve_micro(g, m, i, unit_strain(s), cfg);
                REQUIRE(res.converged);
                CHECK(hill_mandel_residual(g, m, i, res.strain) < 1e-8);
            }
        }
    }
    SUBCASE("unconverged fields are diagnosed, not asserted") {
        const VoxelGrid g = random_grid(8, 77);
        SolverConfig cfg;
        cfg.max_iter = 1;
        cfg.rel_tol = 1e-12;
        const auto res = solve_micro(g, m, i, unit_strain(1), cfg);
        CHECK_FALSE(res.converged);
        CHECK(std::isfinite(hill_mandel_residual(g, m, i, res.strain)));
    }
}

TEST_CASE("non-convergence is tagged with the strain index") {
    const VoxelGrid g = random_grid(8, 78);
    const MaterialParams m = MaterialParams::e_nu(1.0, 0.3);
    const MaterialParams i = MaterialParams::e_nu(1000.0, 0.2);
    SolverConfig cfg;
    cfg.max_iter = 2;
    cfg.rel_tol = 1e-12;
    CHECK_THROWS_AS(homogenize(g, m, i, cfg), NoConvergenceError);
    try {
        homogenize(g, m, i, cfg);
    } catch (const NoConvergenceError& e) {
        CHECK(e.iterations == 2);
        CHECK(e.residual > 0.0);
        CHECK(std::string(e.what()).find("strain state 1") != std::string::npos);
    }
}

TEST_CASE("field dump round trip") {
    Field f = random_strain_field(4, 5);
    const std::string path =
        (std::filesystem::temp_directory_path() / "muq_test_field.muqf").string();
    write_field(f, path);
    const Field back = read_field(path);
    CHECK(back.n == f.n);
    for (std::size_t k = 0; k < f.data.size(); ++k)
        CHECK(back.data[k] == doctest::Approx(f.data[k]).epsilon(1e-6));
    std::remove(path.c_str());
}
