#pragma once

/// Uncertainty-quantification orchestration: map the physical random inputs
/// (volume fraction and matrix parameters) to standard-normal cubature
/// space, homogenize at the nodes with the FFT solver or the trained
/// network, fit the pseudospectral PCE over the engineering constants, and
/// report moments and CDFs; plus Monte Carlo baselines, result comparison
/// and the FFT-vs-network timing benchmark.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "muq/fft.hpp"
#include "muq/grid.hpp"
#include "muq/nn.hpp"
#include "muq/pce.hpp"
#include "muq/voigt.hpp"

namespace muq::uq {

enum class SolverKind : std::uint8_t { FFT = 0, ANN = 1 };
enum class PropertySet : std::uint8_t { TransverseIso = 0, Iso = 1, RawTensor = 2 };

std::vector<std::string> property_names(PropertySet set);
std::vector<double> extract_properties(const VoigtMatrix& C, PropertySet set);

struct UQConfig {
    /// Ordered inputs: volume fraction first, then the two matrix material
    /// parameters expressed in matrix_rep. Inputs with zero standard
    /// deviation are folded into constants.
    std::vector<pce::InputDistribution> inputs;
    ParamRep matrix_rep = ParamRep::ENu;
    MaterialParams inclusion;
    int n_w = 10;
    int n_pce = 9;
    int grid_n = 16;
    MicroKind kind = MicroKind::Fiber;
    RsaConfig rsa;
    SolverKind solver = SolverKind::FFT;
    std::string checkpoint_path;  ///< when solver == ANN
    PropertySet props = PropertySet::TransverseIso;
    std::uint64_t seed = 0;
    int threads = 1;
    fft::SolverConfig fft_cfg;
    std::size_t cdf_samples = 100000;
};

struct UQResult {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<pce::CdfTable> cdfs;

    // Run metadata (reported in the manifest, not in the result tables).
    std::size_t solver_calls = 0;  ///< full 6-direction homogenizations
    double wall_seconds = 0.0;
    SolverKind solver = SolverKind::FFT;
    int n_x = 0;
    std::size_t n_q = 0;
    double clamped_mass = 0.0;  ///< cubature weight that hit a truncation bound
    bool clamp_warning = false;
    std::optional<pce::PCESurrogate> surrogate;  ///< PCE runs only
};

/// Full deterministic homogenization at one physical input point
/// {c_f, matrix p1, matrix p2}; shared by the cubature and Monte Carlo paths.
/// Pass the loaded network for the ANN solver (the instance is mutated by
/// the forward passes; clone per thread), nullptr for FFT. grid_seed makes
/// the sphere microstructure deterministic per evaluation.
VoigtMatrix homogenize_at(const UQConfig& cfg, nn::Network* net,
                          const std::vector<double>& physical, std::uint64_t grid_seed);

/// Algorithm: (i) tensor Gauss-Hermite rule over the non-degenerate inputs,
/// (ii) deterministic homogenizations at the mapped nodes (physical values
/// clamped to the truncation bounds), (iii)-(iv) pseudospectral coefficient
/// projection over the requested properties, (v) moments and sampled CDFs.
UQResult run_uq(const UQConfig& cfg);

/// Monte Carlo baseline: truncated-normal draws by rejection, one full
/// homogenization per sample, empirical moments and CDFs.
UQResult run_mc(const UQConfig& cfg, std::size_t n_samples);

struct CompareEntry {
    std::string name;
    double mean_rel_diff = 0.0;
    double std_rel_diff = 0.0;
    double kolmogorov = 0.0;
};

/// Per-property symmetric comparison; Kolmogorov distance on the merged
/// support of the two empirical CDFs.
std::vector<CompareEntry> compare_results(const UQResult& a, const UQResult& b);

double kolmogorov_distance(const pce::CdfTable& a, const pce::CdfTable& b);

struct BenchRow {
    int size = 0;
    double fft_seconds = -1.0;  ///< negative: not run / failed
    double ann_seconds = -1.0;
    double ratio = -1.0;        ///< fft / ann
};

struct BenchConfig {
    std::vector<int> sizes;
    int repetitions = 5;
    bool run_fft = true;
    bool run_ann = true;
    double c_f = 0.3;
    MicroKind kind = MicroKind::Fiber;
    RsaConfig rsa;
    MaterialParams mat_M = MaterialParams::e_nu(3101.0, 0.41);
    MaterialParams mat_I = MaterialParams::e_nu(2.31e5, 0.1);
    fft::SolverConfig fft_cfg;
    nn::TopologyConfig topo;
    std::string checkpoint_path;  ///< optional: time this network instead
    std::uint64_t seed = 0;
};

/// Median wall time of a full 6-direction homogenization per solver and
/// grid size. Memory failures are recorded as absent entries.
std::vector<BenchRow> bench_timing(const BenchConfig& cfg);

}  // namespace muq::uq
