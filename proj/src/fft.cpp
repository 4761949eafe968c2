#include "muq/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>

#include "muq/io.hpp"

namespace muq::fft {

namespace {

// FFTW plan creation/destruction is not thread-safe; executions are.
std::mutex fftw_plan_mutex;

constexpr std::uint32_t kFieldVersion = 1;

// Integer frequency for index k on an n-point grid, k in {-floor(n/2), ...,
// ceil(n/2)-1}. The 2*pi scale cancels in the projection (homogeneous of
// degree zero in the frequency vector) and is omitted. The Nyquist component
// of even grids maps to zero: a signed +-n/2 assignment cannot satisfy the
// conjugate pairing of the stored half-spectrum on the Nyquist planes, which
// would make the operator lose idempotency. Pure-Nyquist modes therefore
// project to zero.
inline double freq(int k, int n) {
    if (2 * k == n) return 0.0;
    return k < (n + 1) / 2 ? k : k - n;
}

// Per-voxel isotropic stiffness application in engineering Voigt components.
struct IsoPair {
    double lambda_M, g_M, lambda_I, g_I;
};

IsoPair make_iso_pair(const MaterialParams& mat_M, const MaterialParams& mat_I) {
    return {lame_lambda(mat_M), shear_modulus(mat_M), lame_lambda(mat_I), shear_modulus(mat_I)};
}

// out = C(x) : in, both 6-component fields (in carries engineering shear).
void apply_stiffness(const VoxelGrid& g, const IsoPair& mats, const Field& in, Field& out) {
    const std::size_t nv = in.voxels();
    const double* e0 = in.comp(0);
    const double* e1 = in.comp(1);
    const double* e2 = in.comp(2);
    const double* e3 = in.comp(3);
    const double* e4 = in.comp(4);
    const double* e5 = in.comp(5);
    double* s0 = out.comp(0);
    double* s1 = out.comp(1);
    double* s2 = out.comp(2);
    double* s3 = out.comp(3);
    double* s4 = out.comp(4);
    double* s5 = out.comp(5);
    for (std::size_t i = 0; i < nv; ++i) {
        const bool incl = g.data[i] != 0;
        const double lambda = incl ? mats.lambda_I : mats.lambda_M;
        const double mu = incl ? mats.g_I : mats.g_M;
        const double tr = lambda * (e0[i] + e1[i] + e2[i]);
        s0[i] = tr + 2.0 * mu * e0[i];
        s1[i] = tr + 2.0 * mu * e1[i];
        s2[i] = tr + 2.0 * mu * e2[i];
        s3[i] = mu * e3[i];
        s4[i] = mu * e4[i];
        s5[i] = mu * e5[i];
    }
}

// Tensor contraction a:b in engineering Voigt pairing of strain-shaped
// fields: unit weight on normal components, 1/2 on engineering shears.
double strain_dot(const Field& a, const Field& b) {
    double s = 0.0;
    for (int c = 0; c < 6; ++c) {
        const double w = c < 3 ? 1.0 : 0.5;
        const double* pa = a.comp(c);
        const double* pb = b.comp(c);
        double acc = 0.0;
        for (std::size_t i = 0; i < a.voxels(); ++i) acc += pa[i] * pb[i];
        s += w * acc;
    }
    return s;
}

void axpy(double alpha, const Field& x, Field& y) {
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

// Compatibility projection of a stress-shaped field (whose shear entries are
// plain tensor components), returned as an engineering-shear strain-shaped
// field. Doubling the shears first cancels the strain-convention halving
// inside apply(); skipping this would project a stress with halved shears
// and enforce a perturbed equilibrium.
void project_stress(ProjectionOperator& op, Field& sigma) {
    for (int c = 3; c < 6; ++c) {
        double* p = sigma.comp(c);
        for (std::size_t i = 0; i < sigma.voxels(); ++i) p[i] *= 2.0;
    }
    op.apply(sigma);
}

}  // namespace

VoigtVector Field::mean() const {
    VoigtVector m;
    for (int c = 0; c < 6; ++c) {
        const double* p = comp(c);
        double s = 0.0;
        for (std::size_t i = 0; i < voxels(); ++i) s += p[i];
        m[c] = s / static_cast<double>(voxels());
    }
    return m;
}

struct ProjectionOperator::Impl {
    int n;
    std::size_t nc;  // complex values per component: n*n*(n/2+1)
    double* real_buf = nullptr;
    fftw_complex* spec[6] = {};
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;

    explicit Impl(int n_) : n(n_), nc(static_cast<std::size_t>(n_) * n_ * (n_ / 2 + 1)) {
        real_buf = fftw_alloc_real(static_cast<std::size_t>(n) * n * n);
        for (auto& s : spec) s = fftw_alloc_complex(nc);
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        // FFTW_ESTIMATE keeps plan selection deterministic run-to-run.
        fwd = fftw_plan_dft_r2c_3d(n, n, n, real_buf, spec[0], FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_3d(n, n, n, spec[0], real_buf, FFTW_ESTIMATE);
    }

    ~Impl() {
        {
            std::lock_guard<std::mutex> lock(fftw_plan_mutex);
            fftw_destroy_plan(fwd);
            fftw_destroy_plan(inv);
        }
        fftw_free(real_buf);
        for (auto& s : spec) fftw_free(s);
    }
};

ProjectionOperator::ProjectionOperator(int n) : n_(n) {
    if (n < 2) throw DimensionMismatchError("projection operator needs n >= 2");
    impl_ = std::make_unique<Impl>(n);
}

ProjectionOperator::~ProjectionOperator() = default;

void ProjectionOperator::apply(Field& f) {
    if (f.n != n_) throw DimensionMismatchError("field size does not match projection operator");
    auto& im = *impl_;
    const int n = n_;
    const std::size_t nv = f.voxels();

    // Forward transform of the six tensor components (engineering shears
    // halved on copy-in).
    for (int c = 0; c < 6; ++c) {
        const double* src = f.comp(c);
        const double scale = c < 3 ? 1.0 : 0.5;
        for (std::size_t i = 0; i < nv; ++i) im.real_buf[i] = scale * src[i];
        fftw_execute_dft_r2c(im.fwd, im.real_buf, im.spec[c]);
    }

    // Per-mode compatible-strain projection. With t = e.xi and s = xi.t:
    //   out_ij = (xi_i t_j + xi_j t_i)/|xi|^2 - xi_i xi_j s/|xi|^4.
    const int nxr = n / 2 + 1;
    using cd = std::complex<double>;
    for (int kz = 0; kz < n; ++kz) {
        const double fz = freq(kz, n);
        for (int ky = 0; ky < n; ++ky) {
            const double fy = freq(ky, n);
            for (int kx = 0; kx < nxr; ++kx) {
                const double fx = freq(kx, n);
                const std::size_t idx = (static_cast<std::size_t>(kz) * n + ky) * nxr + kx;
                const double q2 = fx * fx + fy * fy + fz * fz;
                if (q2 == 0.0) {
                    for (int c = 0; c < 6; ++c) im.spec[c][idx][0] = im.spec[c][idx][1] = 0.0;
                    continue;
                }
                const cd e00(im.spec[0][idx][0], im.spec[0][idx][1]);
                const cd e11(im.spec[1][idx][0], im.spec[1][idx][1]);
                const cd e22(im.spec[2][idx][0], im.spec[2][idx][1]);
                const cd e12(im.spec[3][idx][0], im.spec[3][idx][1]);
                const cd e02(im.spec[4][idx][0], im.spec[4][idx][1]);
                const cd e01(im.spec[5][idx][0], im.spec[5][idx][1]);

                const cd t0 = e00 * fx + e01 * fy + e02 * fz;
                const cd t1 = e01 * fx + e11 * fy + e12 * fz;
                const cd t2 = e02 * fx + e12 * fy + e22 * fz;
                const cd s = (t0 * fx + t1 * fy + t2 * fz) / (q2 * q2);

                const cd o00 = 2.0 * fx * t0 / q2 - fx * fx * s;
                const cd o11 = 2.0 * fy * t1 / q2 - fy * fy * s;
                const cd o22 = 2.0 * fz * t2 / q2 - fz * fz * s;
                const cd o12 = (fy * t2 + fz * t1) / q2 - fy * fz * s;
                const cd o02 = (fx * t2 + fz * t0) / q2 - fx * fz * s;
                const cd o01 = (fx * t1 + fy * t0) / q2 - fx * fy * s;

                const cd out[6] = {o00, o11, o22, o12, o02, o01};
                for (int c = 0; c < 6; ++c) {
                    im.spec[c][idx][0] = out[c].real();
                    im.spec[c][idx][1] = out[c].imag();
                }
            }
        }
    }

    // Inverse transforms; engineering shears restored and FFTW's unnormalized
    // round trip divided out.
    const double norm = 1.0 / static_cast<double>(nv);
    for (int c = 0; c < 6; ++c) {
        fftw_execute_dft_c2r(im.inv, im.spec[c], im.real_buf);
        double* dst = f.comp(c);
        const double scale = (c < 3 ? 1.0 : 2.0) * norm;
        for (std::size_t i = 0; i < nv; ++i) dst[i] = scale * im.real_buf[i];
    }
}

Field project(ProjectionOperator& op, const Field& f) {
    Field out = f;
    op.apply(out);
    return out;
}

MicroSolveResult solve_micro(const VoxelGrid& g, const MaterialParams& mat_M,
                             const MaterialParams& mat_I, const VoigtVector& eps_bar,
                             const SolverConfig& cfg, ProjectionOperator* op) {
    if (!(cfg.rel_tol > 0.0 && cfg.rel_tol < 1.0)) throw OutOfRangeError("rel_tol outside (0, 1)");
    if (cfg.max_iter < 1) throw OutOfRangeError("max_iter must be >= 1");
    validate(mat_M);
    validate(mat_I);

    std::unique_ptr<ProjectionOperator> own;
    if (!op) {
        own = std::make_unique<ProjectionOperator>(g.n);
        op = own.get();
    } else if (op->n() != g.n) {
        throw DimensionMismatchError("projection operator size does not match grid");
    }

    const IsoPair mats = make_iso_pair(mat_M, mat_I);
    const std::size_t nv = static_cast<std::size_t>(g.n) * g.n * g.n;

    // rhs b = -project(C : eps_bar)
    Field b(g.n);
    double macro_norm2 = 0.0;
    {
        Field macro(g.n);
        for (int c = 0; c < 6; ++c) {
            double* p = macro.comp(c);
            for (std::size_t i = 0; i < nv; ++i) p[i] = eps_bar[c];
        }
        apply_stiffness(g, mats, macro, b);
        macro_norm2 = strain_dot(b, b);
        project_stress(*op, b);
        for (double& v : b.data) v = -v;
    }

    MicroSolveResult res;
    res.strain = Field(g.n);
    Field x(g.n);  // fluctuation strain
    const double b_norm2 = strain_dot(b, b);

    // A projected rhs at roundoff level relative to the unprojected stress
    // means the constant field already solves the problem (homogeneous or
    // phase-identical grids); iterating on FFT noise would stall.
    if (b_norm2 <= 1e-28 * macro_norm2) {
        // Homogeneous response; the constant macro strain already solves the
        // problem.
        res.converged = true;
    } else {
        Field r = b;
        Field p = r;
        Field Ap(g.n);
        double rr = b_norm2;
        int it = 0;
        while (it < cfg.max_iter) {
            ++it;
            apply_stiffness(g, mats, p, Ap);
            project_stress(*op, Ap);
            const double pAp = strain_dot(p, Ap);
            if (!(pAp > 0.0)) break;  // operator lost definiteness numerically
            const double alpha = rr / pAp;
            axpy(alpha, p, x);
            axpy(-alpha, Ap, r);
            const double rr_new = strain_dot(r, r);
            if (rr_new <= cfg.rel_tol * cfg.rel_tol * b_norm2) {
                rr = rr_new;
                res.converged = true;
                break;
            }
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
        }
        res.iterations = it;
        res.residual = std::sqrt(rr / b_norm2);
    }

    res.strain = std::move(x);
    for (int c = 0; c < 6; ++c) {
        double* p = res.strain.comp(c);
        for (std::size_t i = 0; i < nv; ++i) p[i] += eps_bar[c];
    }
    return res;
}

StressField stress_field(const VoxelGrid& g, const MaterialParams& mat_M,
                         const MaterialParams& mat_I, const StrainField& eps) {
    if (eps.n != g.n) throw DimensionMismatchError("strain field does not match grid");
    StressField sigma(g.n);
    apply_stiffness(g, make_iso_pair(mat_M, mat_I), eps, sigma);
    return sigma;
}

VoigtVector average_stress(const VoxelGrid& g, const MaterialParams& mat_M,
                           const MaterialParams& mat_I, const StrainField& eps) {
    return stress_field(g, mat_M, mat_I, eps).mean();
}

HomogenizeResult homogenize(const VoxelGrid& g, const MaterialParams& mat_M,
                            const MaterialParams& mat_I, const SolverConfig& cfg) {
    ProjectionOperator op(g.n);
    HomogenizeResult out;
    VoigtMatrix C;
    for (int i = 1; i <= 6; ++i) {
        MicroSolveResult r = solve_micro(g, mat_M, mat_I, unit_strain(i), cfg, &op);
        if (!r.converged)
            throw NoConvergenceError("FFT solve for strain state " + std::to_string(i) +
                                         " stopped at relative residual " + std::to_string(r.residual),
                                     r.iterations, r.residual);
        out.iterations[static_cast<std::size_t>(i - 1)] = r.iterations;
        out.total_iterations += r.iterations;
        const VoigtVector col = average_stress(g, mat_M, mat_I, r.strain);
        for (int row = 0; row < 6; ++row) C(row, i - 1) = col[row];
    }
    out.asymmetry = asymmetry(C);
    out.stiffness = symmetrize(C);
    return out;
}

double hill_mandel_residual(const VoxelGrid& g, const MaterialParams& mat_M,
                            const MaterialParams& mat_I, const StrainField& eps) {
    const StressField sigma = stress_field(g, mat_M, mat_I, eps);
    // sigma stored plain, eps with engineering shear: the flat 6-component
    // dot product equals the tensor contraction sigma:eps.
    double micro = 0.0;
    for (int c = 0; c < 6; ++c) {
        const double* ps = sigma.comp(c);
        const double* pe = eps.comp(c);
        double acc = 0.0;
        for (std::size_t i = 0; i < eps.voxels(); ++i) acc += ps[i] * pe[i];
        micro += acc / static_cast<double>(eps.voxels());
    }
    const VoigtVector sm = sigma.mean();
    const VoigtVector em = eps.mean();
    double macro = 0.0;
    for (int c = 0; c < 6; ++c) macro += sm[c] * em[c];
    return std::abs(micro - macro) / std::abs(macro);
}

VoigtMatrix voigt_bound(const VoxelGrid& g, const MaterialParams& mat_M, const MaterialParams& mat_I) {
    const double f = volume_fraction(g);
    return (1.0 - f) * isotropic_stiffness(mat_M) + f * isotropic_stiffness(mat_I);
}

VoigtMatrix reuss_bound(const VoxelGrid& g, const MaterialParams& mat_M, const MaterialParams& mat_I) {
    const double f = volume_fraction(g);
    const VoigtMatrix S =
        (1.0 - f) * inverse(isotropic_stiffness(mat_M)) + f * inverse(isotropic_stiffness(mat_I));
    return inverse(S);
}

void write_field(const Field& f, const std::string& path) {
    io::BinaryWriter w(path);
    w.magic("MUQF");
    w.u32(kFieldVersion);
    w.u32(static_cast<std::uint32_t>(f.n));
    w.u32(6);
    for (double v : f.data) w.f32(static_cast<float>(v));
    if (!w.good()) throw Error("write failed: " + path);
}

Field read_field(const std::string& path) {
    io::BinaryReader r(path);
    r.expect_magic("MUQF");
    if (r.u32() != kFieldVersion) throw CorruptFileError("unsupported field version in " + path);
    const auto n = static_cast<int>(r.u32());
    if (n < 2 || n > 4096) throw CorruptFileError("implausible field size in " + path);
    if (r.u32() != 6) throw CorruptFileError("unexpected component count in " + path);
    Field f(n);
    for (double& v : f.data) v = static_cast<double>(r.f32());
    return f;
}

}  // namespace muq::fft
