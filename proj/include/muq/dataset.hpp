#pragma once

/// Labeled training-set generation: uniform sampling of the physical inputs,
/// strain-state balancing (equal counts of all six unit macro strains),
/// FFT labeling, row shuffling and binary serialization. Fully reproducible
/// per base seed: sample k draws from seed base_seed + k and the final
/// shuffle from base_seed + n_s.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "muq/fft.hpp"
#include "muq/grid.hpp"
#include "muq/voigt.hpp"

namespace muq {

/// Uniform sampling ranges for the varying inputs. Material bounds are given
/// in `rep` (E/nu bounds are the common case) and samples are stored as
/// (K, G), whose ranges are of comparable magnitude.
struct SampleInputBounds {
    double cf_lo = 0.0;
    double cf_hi = 1.0;
    ParamRep rep = ParamRep::ENu;
    double p1_lo = 0.0;
    double p1_hi = 0.0;
    double p2_lo = 0.0;
    double p2_hi = 0.0;
    MaterialParams inclusion;  ///< fixed constants
};

void validate(const SampleInputBounds& b);

struct Sample {
    double c_f = 0.0;
    MaterialParams mat_M;  ///< stored as (K, G)
    MaterialParams mat_I;  ///< stored as (K, G)
    int strain_index = 1;  ///< 1..6
    std::uint64_t grid_seed = 0;
    VoigtVector label;     ///< macro stress under unit_strain(strain_index)
    std::optional<VoxelGrid> grid;  ///< present when grids are embedded
};

struct Dataset {
    int grid_n = 0;
    MicroKind kind = MicroKind::Fiber;
    bool embed_grids = false;
    RsaConfig rsa;  ///< sphere geometry template (seed comes from the sample)
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
};

/// Draws the inputs of sample k (no label): c_f, then the two matrix
/// parameters, uniform within bounds from seed base_seed + k.
Sample sample_inputs(const SampleInputBounds& bounds, std::size_t k, std::uint64_t base_seed);

struct GenerateConfig {
    int n_s = 0;  ///< must be a multiple of 6
    int grid_n = 16;
    MicroKind kind = MicroKind::Fiber;
    std::uint64_t base_seed = 0;
    fft::SolverConfig solver;
    RsaConfig rsa;
    bool embed_grids = false;
    int threads = 1;
};

/// Algorithm: outer loop over the six strain states, n_s/6 samples each; for
/// every sample draw inputs, build the microstructure from its c_f, run one
/// FFT solve, store the average stress as the label; shuffle rows at the end.
/// Aborts when more than 1% of the solves fail to converge.
Dataset generate(const SampleInputBounds& bounds, const GenerateConfig& cfg);

/// Builds (or returns) the voxel grid of a sample.
VoxelGrid realize_grid(const Dataset& ds, const Sample& s);

/// Seed-deterministic disjoint exhaustive partition.
struct SplitResult {
    Dataset train, val, test;
};
SplitResult split(const Dataset& ds, double f_train, double f_val, double f_test, std::uint64_t seed);

/// Dataset file: magic "MUQD", version u32, n_s u32, n u32, kind u8,
/// embed_grids u8; per record c_f f64, K_M f64, G_M f64, K_I f64, G_I f64,
/// strain_index u8, grid_seed u64, label 6 x f64, then n^3 grid bytes when
/// embedded; little-endian.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace muq
