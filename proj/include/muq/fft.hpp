#pragma once

/// Galerkin FFT solver for the periodic micro-elasticity problem on a voxel
/// grid. The scheme works directly with strains: compatibility of the
/// fluctuation field is enforced by a Fourier-space projection operator and
/// the resulting linear system is solved matrix-free by conjugate gradients
/// (apply the stiffness voxel-wise, project spectrally).

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "muq/grid.hpp"
#include "muq/voigt.hpp"

namespace muq::fft {

struct SolverConfig {
    double rel_tol = 1e-8;
    int max_iter = 500;
};

/// Voxel field of 6 Voigt components, component-major, x-fastest within a
/// component. Strain-shaped fields carry engineering shear.
struct Field {
    int n = 0;
    std::vector<double> data;

    Field() = default;
    explicit Field(int n_) : n(n_), data(6 * static_cast<std::size_t>(n_) * n_ * n_, 0.0) {}

    std::size_t voxels() const { return static_cast<std::size_t>(n) * n * n; }
    double* comp(int c) { return data.data() + static_cast<std::size_t>(c) * voxels(); }
    const double* comp(int c) const { return data.data() + static_cast<std::size_t>(c) * voxels(); }

    /// Spatial mean per component.
    VoigtVector mean() const;
};

using StrainField = Field;
using StressField = Field;

/// Fourier-space projection onto compatible strain fields. Owns FFTW plans
/// and scratch buffers for one grid size; one instance per concurrent solve.
class ProjectionOperator {
  public:
    explicit ProjectionOperator(int n);
    ~ProjectionOperator();
    ProjectionOperator(const ProjectionOperator&) = delete;
    ProjectionOperator& operator=(const ProjectionOperator&) = delete;

    int n() const { return n_; }

    /// In-place projection. The zero mode is annihilated, so the output has
    /// zero spatial mean in every component. Idempotent.
    void apply(Field& f);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int n_;
};

/// Out-of-place convenience wrapper around ProjectionOperator::apply.
Field project(ProjectionOperator& op, const Field& f);

struct MicroSolveResult {
    StrainField strain;     ///< total strain, mean equals the prescribed macro strain
    int iterations = 0;
    double residual = 0.0;  ///< final relative residual
    bool converged = false;
};

/// Solves for eps = eps_bar + eps* with project(C : eps*) = -project(C : eps_bar)
/// by conjugate gradients. Does not throw on hitting max_iter; the caller
/// inspects `converged` and decides.
MicroSolveResult solve_micro(const VoxelGrid& g, const MaterialParams& mat_M,
                             const MaterialParams& mat_I, const VoigtVector& eps_bar,
                             const SolverConfig& cfg, ProjectionOperator* op = nullptr);

/// Volume average of C(x) : eps(x).
VoigtVector average_stress(const VoxelGrid& g, const MaterialParams& mat_M,
                           const MaterialParams& mat_I, const StrainField& eps);

/// Pointwise stress C(x) : eps(x).
StressField stress_field(const VoxelGrid& g, const MaterialParams& mat_M,
                         const MaterialParams& mat_I, const StrainField& eps);

struct HomogenizeResult {
    VoigtMatrix stiffness;          ///< symmetrized effective tensor
    double asymmetry = 0.0;         ///< relative asymmetry before symmetrization
    std::array<int, 6> iterations{};
    int total_iterations = 0;
};

/// Effective stiffness from six unit macro strains; column i is the average
/// stress under unit_strain(i). Throws NoConvergenceError tagged with the
/// failing strain index.
HomogenizeResult homogenize(const VoxelGrid& g, const MaterialParams& mat_M,
                            const MaterialParams& mat_I, const SolverConfig& cfg);

/// |<sigma:eps> - <sigma>:<eps>| / |<sigma>:<eps>|.
double hill_mandel_residual(const VoxelGrid& g, const MaterialParams& mat_M,
                            const MaterialParams& mat_I, const StrainField& eps);

/// Arithmetic (Voigt) and harmonic (Reuss) phase averages for a two-phase
/// grid; rigorous bounds on the effective tensor.
VoigtMatrix voigt_bound(const VoxelGrid& g, const MaterialParams& mat_M, const MaterialParams& mat_I);
VoigtMatrix reuss_bound(const VoxelGrid& g, const MaterialParams& mat_M, const MaterialParams& mat_I);

/// Field dump: header {magic "MUQF", version u32, n u32, ncomp u32} then
/// ncomp * n^3 f32 values, component-major, x-fastest.
void write_field(const Field& f, const std::string& path);
Field read_field(const std::string& path);

}  // namespace muq::fft
