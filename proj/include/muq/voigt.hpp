#pragma once

/// Linear-elastic tensor algebra in Voigt notation.
///
/// Conventions used throughout the library:
///  - component ordering (11, 22, 33, 23, 13, 12);
///  - strain vectors carry engineering shear (gamma = 2*eps_ij), so
///    sigma = C * eps is a plain matrix-vector product and the shear
///    diagonal of an isotropic stiffness is plain G.

#include <array>
#include <cstdint>

#include "muq/error.hpp"

namespace muq {

enum class ParamRep : std::uint8_t { LameG = 0, ENu = 1, KG = 2 };

/// Isotropic material description in one of three equivalent parameter pairs:
/// (lambda, G), (E, nu) or (K, G).
struct MaterialParams {
    ParamRep rep = ParamRep::KG;
    double p1 = 0.0;
    double p2 = 0.0;

    static MaterialParams lame(double lambda, double G) { return {ParamRep::LameG, lambda, G}; }
    static MaterialParams e_nu(double E, double nu) { return {ParamRep::ENu, E, nu}; }
    static MaterialParams k_g(double K, double G) { return {ParamRep::KG, K, G}; }
};

/// Throws NonPhysicalError if the pair violates its admissibility range
/// (E > 0 and 0 <= nu < 0.5; moduli > 0 with lambda >= 0 permitted).
void validate(const MaterialParams& p);

/// Re-expresses the same isotropic material in another parameter pair.
MaterialParams convert_params(const MaterialParams& p, ParamRep target);

double bulk_modulus(const MaterialParams& p);
double shear_modulus(const MaterialParams& p);
double youngs_modulus(const MaterialParams& p);
double poisson_ratio(const MaterialParams& p);
double lame_lambda(const MaterialParams& p);

struct VoigtVector {
    std::array<double, 6> c{};

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
};

struct VoigtMatrix {
    std::array<double, 36> m{};

    double& operator()(int r, int col) { return m[static_cast<std::size_t>(6 * r + col)]; }
    double operator()(int r, int col) const { return m[static_cast<std::size_t>(6 * r + col)]; }
};

VoigtVector operator*(const VoigtMatrix& a, const VoigtVector& x);
VoigtMatrix operator*(double s, const VoigtMatrix& a);
VoigtMatrix operator+(const VoigtMatrix& a, const VoigtMatrix& b);

struct IsoProps {
    double E = 0.0;
    double nu = 0.0;
};

struct TransverseIsoProps {
    double E1 = 0.0;
    double E2 = 0.0;
    double G12 = 0.0;
    double G23 = 0.0;
    double nu12 = 0.0;
    double nu23 = 0.0;
};

/// Isotropic stiffness with lambda + 2G on the normal diagonal, lambda on the
/// normal off-diagonals and G on the shear diagonal (lambda = K - 2G/3).
VoigtMatrix isotropic_stiffness(double K, double G);
VoigtMatrix isotropic_stiffness(const MaterialParams& p);

/// Reads (E, nu) off a nominally isotropic stiffness: mu from the shear
/// diagonal, lambda from the normal off-diagonals, deviations averaged away.
IsoProps extract_isotropic(const VoigtMatrix& C);

/// Reads the five transversely isotropic constants (fiber axis = direction 1)
/// through compliance inversion, averaging the 2<->3 and 5<->6 symmetry
/// partners.
TransverseIsoProps extract_transverse_isotropic(const VoigtMatrix& C);

/// Unit macro strain for state i in 1..6.
VoigtVector unit_strain(int i);

/// max_ij |C_ij - C_ji| relative to the largest entry magnitude.
double asymmetry(const VoigtMatrix& C);

/// Symmetric part (C + C^T)/2.
VoigtMatrix symmetrize(const VoigtMatrix& C);

/// True if C (symmetrized) is positive definite.
bool positive_definite(const VoigtMatrix& C);

/// Smallest eigenvalue of the symmetric part of C.
double min_eigenvalue(const VoigtMatrix& C);

/// Inverse; throws DegenerateError when singular to machine precision.
VoigtMatrix inverse(const VoigtMatrix& C);

/// Frobenius norm.
double norm(const VoigtMatrix& C);

}  // namespace muq
