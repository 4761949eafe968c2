#include "muq/voigt.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace muq {

namespace {

constexpr double kNuMax = 0.5;

Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> as_eigen(const VoigtMatrix& C) {
    return Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(C.m.data());
}

}  // namespace

void validate(const MaterialParams& p) {
    switch (p.rep) {
        case ParamRep::ENu:
            if (!(p.p1 > 0.0)) throw NonPhysicalError("Young's modulus must be > 0");
            if (!(p.p2 >= 0.0 && p.p2 < kNuMax)) throw NonPhysicalError("Poisson ratio outside [0, 0.5)");
            break;
        case ParamRep::KG:
            if (!(p.p1 > 0.0)) throw NonPhysicalError("bulk modulus must be > 0");
            if (!(p.p2 > 0.0)) throw NonPhysicalError("shear modulus must be > 0");
            break;
        case ParamRep::LameG:
            if (!(p.p1 >= 0.0)) throw NonPhysicalError("first Lame constant must be >= 0");
            if (!(p.p2 > 0.0)) throw NonPhysicalError("shear modulus must be > 0");
            break;
    }
}

namespace {

struct KGPair {
    double K;
    double G;
};

// Common intermediate: (K, G).
KGPair to_kg(const MaterialParams& p) {
    validate(p);
    switch (p.rep) {
        case ParamRep::KG:
            return {p.p1, p.p2};
        case ParamRep::LameG:
            return {p.p1 + 2.0 * p.p2 / 3.0, p.p2};
        case ParamRep::ENu:
            return {p.p1 / (3.0 * (1.0 - 2.0 * p.p2)), p.p1 / (2.0 * (1.0 + p.p2))};
    }
    throw NonPhysicalError("unknown parameter representation");
}

}  // namespace

MaterialParams convert_params(const MaterialParams& p, ParamRep target) {
    const auto [K, G] = to_kg(p);
    MaterialParams out;
    out.rep = target;
    switch (target) {
        case ParamRep::KG:
            out.p1 = K;
            out.p2 = G;
            break;
        case ParamRep::LameG:
            out.p1 = K - 2.0 * G / 3.0;
            out.p2 = G;
            break;
        case ParamRep::ENu:
            out.p1 = 9.0 * K * G / (3.0 * K + G);
            out.p2 = (3.0 * K - 2.0 * G) / (2.0 * (3.0 * K + G));
            break;
    }
    validate(out);
    return out;
}

double bulk_modulus(const MaterialParams& p) { return to_kg(p).K; }

double shear_modulus(const MaterialParams& p) { return to_kg(p).G; }

double youngs_modulus(const MaterialParams& p) {
    const auto [K, G] = to_kg(p);
    return 9.0 * K * G / (3.0 * K + G);
}

double poisson_ratio(const MaterialParams& p) {
    const auto [K, G] = to_kg(p);
    return (3.0 * K - 2.0 * G) / (2.0 * (3.0 * K + G));
}

double lame_lambda(const MaterialParams& p) {
    const auto [K, G] = to_kg(p);
    return K - 2.0 * G / 3.0;
}

VoigtVector operator*(const VoigtMatrix& a, const VoigtVector& x) {
    VoigtVector y;
    for (int r = 0; r < 6; ++r) {
        double s = 0.0;
        for (int c = 0; c < 6; ++c) s += a(r, c) * x[c];
        y[r] = s;
    }
    return y;
}

VoigtMatrix operator*(double s, const VoigtMatrix& a) {
    VoigtMatrix out;
    for (std::size_t i = 0; i < 36; ++i) out.m[i] = s * a.m[i];
    return out;
}

VoigtMatrix operator+(const VoigtMatrix& a, const VoigtMatrix& b) {
    VoigtMatrix out;
    for (std::size_t i = 0; i < 36; ++i) out.m[i] = a.m[i] + b.m[i];
    return out;
}

VoigtMatrix isotropic_stiffness(double K, double G) {
    if (K < 0.0 || G < 0.0) throw NonPhysicalError("moduli must be >= 0");
    const double lambda = K - 2.0 * G / 3.0;
    VoigtMatrix C;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) C(i, j) = (i == j) ? lambda + 2.0 * G : lambda;
        C(i + 3, i + 3) = G;
    }
    return C;
}

VoigtMatrix isotropic_stiffness(const MaterialParams& p) {
    return isotropic_stiffness(bulk_modulus(p), shear_modulus(p));
}

IsoProps extract_isotropic(const VoigtMatrix& C) {
    const double mu = (C(3, 3) + C(4, 4) + C(5, 5)) / 3.0;
    const double lambda = (C(0, 1) + C(0, 2) + C(1, 0) + C(1, 2) + C(2, 0) + C(2, 1)) / 6.0;
    if (!(lambda + mu > 0.0)) throw DegenerateError("lambda + mu <= 0 in isotropic extraction");
    IsoProps out;
    out.E = mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu);
    out.nu = lambda / (2.0 * (lambda + mu));
    return out;
}

TransverseIsoProps extract_transverse_isotropic(const VoigtMatrix& C) {
    const VoigtMatrix S = inverse(C);
    TransverseIsoProps out;
    out.E1 = 1.0 / S(0, 0);
    const double s22 = 0.5 * (S(1, 1) + S(2, 2));
    out.E2 = 1.0 / s22;
    const double s12 = 0.25 * (S(0, 1) + S(0, 2) + S(1, 0) + S(2, 0));
    out.nu12 = -s12 * out.E1;
    const double s23 = 0.5 * (S(1, 2) + S(2, 1));
    out.nu23 = -s23 * out.E2;
    out.G23 = 1.0 / S(3, 3);
    out.G12 = 2.0 / (S(4, 4) + S(5, 5));
    return out;
}

VoigtVector unit_strain(int i) {
    if (i < 1 || i > 6) throw IndexOutOfRangeError("strain state index must be in 1..6");
    VoigtVector v;
    v[i - 1] = 1.0;
    return v;
}

double asymmetry(const VoigtMatrix& C) {
    double max_abs = 0.0, max_gap = 0.0;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            max_abs = std::max(max_abs, std::abs(C(r, c)));
            max_gap = std::max(max_gap, std::abs(C(r, c) - C(c, r)));
        }
    return max_abs > 0.0 ? max_gap / max_abs : 0.0;
}

VoigtMatrix symmetrize(const VoigtMatrix& C) {
    VoigtMatrix out;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) out(r, c) = 0.5 * (C(r, c) + C(c, r));
    return out;
}

double min_eigenvalue(const VoigtMatrix& C) {
    Eigen::Matrix<double, 6, 6> A = as_eigen(C);
    A = 0.5 * (A + A.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(A);
    return es.eigenvalues().minCoeff();
}

bool positive_definite(const VoigtMatrix& C) { return min_eigenvalue(C) > 0.0; }

VoigtMatrix inverse(const VoigtMatrix& C) {
    Eigen::Matrix<double, 6, 6> A = as_eigen(C);
    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(A);
    if (!lu.isInvertible()) throw DegenerateError("matrix singular to machine precision");
    Eigen::Matrix<double, 6, 6> inv = lu.inverse();
    VoigtMatrix out;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) out(r, c) = inv(r, c);
    return out;
}

double norm(const VoigtMatrix& C) {
    double s = 0.0;
    for (double v : C.m) s += v * v;
    return std::sqrt(s);
}

}  // namespace muq
