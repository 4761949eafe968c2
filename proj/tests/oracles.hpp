#pragma once

// Test-only oracles, independent of the library's solver path.

#include <Eigen/Dense>
#include <array>

#include "muq/voigt.hpp"

namespace muq::test {

// Closed-form two-phase laminate with interface normal along axis 1.
// Phase strains are piecewise constant; the in-plane strain components
// (22, 33, 23) are continuous across the interface and the traction
// components (11, 13, 12) of the stress are continuous. Parametrize
// eps_A = eps_bar + f_B * d, eps_B = eps_bar - f_A * d with the jump d
// supported on the discontinuous slots {11, 13, 12}; traction continuity
// yields a 3x3 system for d.
inline VoigtVector laminate_phase_jump(const VoigtMatrix& C_A, const VoigtMatrix& C_B, double f_A,
                                       const VoigtVector& eps_bar) {
    const double f_B = 1.0 - f_A;
    const std::array<int, 3> jump = {0, 4, 5};  // Voigt slots 11, 13, 12
    Eigen::Matrix3d M;
    Eigen::Vector3d rhs;
    for (int r = 0; r < 3; ++r) {
        double b = 0.0;
        for (int c = 0; c < 6; ++c) b -= (C_A(jump[r], c) - C_B(jump[r], c)) * eps_bar[c];
        rhs(r) = b;
        for (int c = 0; c < 3; ++c)
            M(r, c) = f_B * C_A(jump[r], jump[c]) + f_A * C_B(jump[r], jump[c]);
    }
    const Eigen::Vector3d d = M.fullPivLu().solve(rhs);
    VoigtVector out;
    for (int c = 0; c < 3; ++c) out[jump[c]] = d(c);
    return out;
}

struct LaminateSolution {
    VoigtVector eps_A, eps_B;
    VoigtVector sigma_bar;
};

inline LaminateSolution laminate_solve(const VoigtMatrix& C_A, const VoigtMatrix& C_B, double f_A,
                                       const VoigtVector& eps_bar) {
    const double f_B = 1.0 - f_A;
    const VoigtVector d = laminate_phase_jump(C_A, C_B, f_A, eps_bar);
    LaminateSolution sol;
    for (int c = 0; c < 6; ++c) {
        sol.eps_A[c] = eps_bar[c] + f_B * d[c];
        sol.eps_B[c] = eps_bar[c] - f_A * d[c];
    }
    const VoigtVector sA = C_A * sol.eps_A;
    const VoigtVector sB = C_B * sol.eps_B;
    for (int c = 0; c < 6; ++c) sol.sigma_bar[c] = f_A * sA[c] + f_B * sB[c];
    return sol;
}

inline VoigtMatrix laminate_effective(const VoigtMatrix& C_A, const VoigtMatrix& C_B, double f_A) {
    VoigtMatrix C;
    for (int i = 1; i <= 6; ++i) {
        const VoigtVector col = laminate_solve(C_A, C_B, f_A, unit_strain(i)).sigma_bar;
        for (int r = 0; r < 6; ++r) C(r, i - 1) = col[r];
    }
    return C;
}

// Transversely isotropic stiffness assembled from engineering constants via
// the compliance matrix (fiber axis = direction 1).
inline VoigtMatrix transverse_iso_stiffness(double E1, double E2, double G12, double G23,
                                            double nu12, double nu23) {
    VoigtMatrix S;
    S(0, 0) = 1.0 / E1;
    S(1, 1) = S(2, 2) = 1.0 / E2;
    S(0, 1) = S(0, 2) = S(1, 0) = S(2, 0) = -nu12 / E1;
    S(1, 2) = S(2, 1) = -nu23 / E2;
    S(3, 3) = 1.0 / G23;
    S(4, 4) = S(5, 5) = 1.0 / G12;
    return inverse(S);
}

}  // namespace muq::test
