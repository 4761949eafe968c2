#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "muq/grid.hpp"

using namespace muq;

namespace {

// Independent center-count oracle for the fiber cylinder.
std::size_t fiber_center_count(int n, double c_f) {
    const double r2 = c_f / 3.14159265358979323846;
    std::size_t count = 0;
    for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
            const double dy = (y + 0.5) / n - 0.5;
            const double dz = (z + 0.5) / n - 0.5;
            if (dy * dy + dz * dz <= r2) ++count;
        }
    return count * static_cast<std::size_t>(n);
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("single fiber limits") {
    const VoxelGrid empty = gen_single_fiber(16, 0.0);
    CHECK(volume_fraction(empty) == 0.0);

    // c_f = 1 clips at the faces: the corner voxel centers lie outside the
    // cylinder radius sqrt(1/pi) ~ 0.564 < 0.5*sqrt(2).
    const VoxelGrid full = gen_single_fiber(16, 1.0);
    CHECK(volume_fraction(full) < 1.0);
    CHECK(full.at(0, 0, 0) == 0);
    const double expected =
        static_cast<double>(fiber_center_count(16, 1.0)) / static_cast<double>(full.size());
    CHECK(volume_fraction(full) == expected);
}

TEST_CASE("single fiber volume fraction tracks the target") {
    const VoxelGrid g = gen_single_fiber(32, 0.6335);
    CHECK(std::abs(volume_fraction(g) - 0.6335) < 0.02);
}

TEST_CASE("single fiber converges in volume fraction with resolution") {
    for (double c_f : {0.1, 0.3, 0.5, 0.7}) {
        const VoxelGrid g = gen_single_fiber(64, c_f);
        CHECK(std::abs(volume_fraction(g) - c_f) < 0.01);
    }
}

TEST_CASE("single fiber is translation invariant along axis 1") {
    const VoxelGrid g = gen_single_fiber(16, 0.4);
    for (int z = 0; z < g.n; ++z)
        for (int y = 0; y < g.n; ++y)
            for (int x = 1; x < g.n; ++x) CHECK(g.at(x, y, z) == g.at(0, y, z));
}

TEST_CASE("single fiber rejects out-of-range volume fractions") {
    CHECK_THROWS_AS(gen_single_fiber(16, -0.1), OutOfRangeError);
    CHECK_THROWS_AS(gen_single_fiber(16, 1.1), OutOfRangeError);
}

TEST_CASE("sphere packing basics") {
    RsaConfig cfg;
    cfg.sphere_radius = 0.1;
    cfg.seed = 7;

    SUBCASE("zero target yields all-matrix") {
        const VoxelGrid g = gen_spheres_rsa(16, 0.0, cfg);
        CHECK(volume_fraction(g) == 0.0);
    }
    SUBCASE("reaches a moderate target within granularity") {
        const VoxelGrid g = gen_spheres_rsa(32, 0.2, cfg);
        const double vf = volume_fraction(g);
        CHECK(vf >= 0.18);
        CHECK(vf <= 0.24);
    }
    SUBCASE("deterministic per seed") {
        const VoxelGrid a = gen_spheres_rsa(32, 0.2, cfg);
        const VoxelGrid b = gen_spheres_rsa(32, 0.2, cfg);
        CHECK(a == b);
    }
    SUBCASE("spheres never share a voxel") {
        RsaStats stats;
        const VoxelGrid g = gen_spheres_rsa(32, 0.25, cfg, &stats);
        std::size_t sum = 0;
        for (int v : stats.voxels_per_sphere) sum += static_cast<std::size_t>(v);
        const auto filled = static_cast<std::size_t>(
            std::llround(volume_fraction(g) * static_cast<double>(g.size())));
        CHECK(sum == filled);
    }
    SUBCASE("unreachable target reported") {
        RsaConfig tight = cfg;
        tight.max_attempts = 5;
        CHECK_THROWS_AS(gen_spheres_rsa(32, 0.4, tight), TargetUnreachableError);
    }
    SUBCASE("jamming-unsafe target rejected") {
        CHECK_THROWS_AS(gen_spheres_rsa(16, 0.5, cfg), OutOfRangeError);
    }
}

TEST_CASE("volume fraction counts voxels") {
    VoxelGrid g(4);
    CHECK(volume_fraction(g) == 0.0);
    for (auto& v : g.data) v = 1;
    CHECK(volume_fraction(g) == 1.0);
    for (std::size_t i = 0; i < g.size() / 2; ++i) g.data[i] = 0;
    CHECK(volume_fraction(g) == 0.5);
}

TEST_CASE("grid file round trip") {
    const VoxelGrid g = gen_single_fiber(8, 0.35);
    const std::string path = temp_path("muq_test_grid.muqg");
    write_grid(g, path);
    const VoxelGrid back = read_grid(path);
    CHECK(back == g);

    // Truncation must be detected.
    const auto full_size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full_size - 7);
    CHECK_THROWS_AS(read_grid(path), CorruptFileError);
    std::remove(path.c_str());
}
