#pragma once

/// Synthetic binary voxel unit cells: a centered cylindrical single fiber and
/// multi-sphere packings via random sequential adsorption. The unit cell is
/// the dimensionless cube (0,1)^3; a voxel belongs to the inclusion phase iff
/// its center lies inside the inclusion geometry.

#include <cstdint>
#include <string>
#include <vector>

#include "muq/error.hpp"

namespace muq {

enum class MicroKind : std::uint8_t { Fiber = 0, Spheres = 1 };

/// Binary phase indicator grid, n voxels per dimension, 0 = matrix,
/// 1 = inclusion. Storage is x-fastest: index = (z*n + y)*n + x.
struct VoxelGrid {
    int n = 0;
    std::vector<std::uint8_t> data;

    VoxelGrid() = default;
    explicit VoxelGrid(int n_) : n(n_), data(static_cast<std::size_t>(n_) * n_ * n_, 0) {}

    std::size_t size() const { return data.size(); }
    std::uint8_t at(int x, int y, int z) const {
        return data[static_cast<std::size_t>((z * n + y) * n + x)];
    }
    std::uint8_t& at(int x, int y, int z) {
        return data[static_cast<std::size_t>((z * n + y) * n + x)];
    }
    bool operator==(const VoxelGrid&) const = default;
};

struct RsaConfig {
    double sphere_radius = 0.1;  ///< fraction of the cell edge
    int max_attempts = 20000;
    std::uint64_t seed = 0;
};

struct RsaStats {
    int spheres = 0;
    int attempts = 0;
    std::vector<int> voxels_per_sphere;
};

/// Cylinder of radius sqrt(c_f/pi) along axis 1, centered in the 2-3
/// cross-section. For c_f close to 1 the cylinder clips at the cell faces and
/// the voxel volume fraction falls short of c_f.
VoxelGrid gen_single_fiber(int n, double c_f);

/// Sequential random placement of equal spheres (periodic wrap-around);
/// candidates sharing a voxel with an already placed sphere are rejected.
/// Stops once the voxelized volume fraction reaches c_f; throws
/// TargetUnreachableError when max_attempts run out more than 0.02 short.
VoxelGrid gen_spheres_rsa(int n, double c_f, const RsaConfig& cfg, RsaStats* stats = nullptr);

/// Convenience dispatcher used by dataset generation and the UQ pipeline.
VoxelGrid gen_microstructure(MicroKind kind, int n, double c_f, std::uint64_t seed,
                             const RsaConfig& rsa_template);

double volume_fraction(const VoxelGrid& g);

/// Raw binary export: header {magic "MUQG", version u32, n u32} then n^3
/// bytes of 0/1, little-endian, x-fastest.
void write_grid(const VoxelGrid& g, const std::string& path);
VoxelGrid read_grid(const std::string& path);

}  // namespace muq
