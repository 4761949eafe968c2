#pragma once

/// Pseudospectral polynomial chaos machinery: orthonormal probabilists'
/// Hermite bases, total-degree multi-index sets, tensorized Gauss-Hermite
/// cubature, coefficient projection, moments and empirical CDF tables.
/// The basis is orthonormal (normalization factors identically 1), so the
/// coefficient projection carries no extra divide.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "muq/error.hpp"

namespace muq::pce {

/// psi_n(theta): probabilists' Hermite polynomial He_n normalized by
/// 1/sqrt(n!) so that E[psi_m psi_n] = delta_mn under the standard normal
/// measure.
double hermite_orthonormal(int n, double theta);

/// psi_0..psi_max_degree at theta, by upward recurrence.
std::vector<double> hermite_all(int max_degree, double theta);

/// All multi-indices i in N_0^{n_x} with |i| <= n_pce, graded order (total
/// degree ascending, first component descending within a grade); the zero
/// index comes first. Count is binomial(n_x + n_pce, n_x).
struct MultiIndexSet {
    int n_x = 0;
    int n_pce = 0;
    std::vector<std::vector<int>> indices;
};

MultiIndexSet multi_indices(int n_x, int n_pce);

/// Product basis value Psi_i(theta) for one multi-index.
double basis_value(const std::vector<int>& index, const std::vector<double>& theta);

struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Probabilists' Gauss-Hermite rule (standard normal weight) via
/// Golub-Welsch on the symmetric Jacobi matrix with off-diagonals sqrt(k).
/// Integrates theta^m exactly for m <= 2*n_w - 1.
Rule1D gauss_hermite(int n_w);

struct CubatureRule {
    int n_w = 0;
    int n_x = 0;
    std::vector<std::vector<double>> nodes;  ///< n_q rows of n_x coordinates
    std::vector<double> weights;             ///< sum to 1

    std::size_t n_q() const { return nodes.size(); }
};

/// Full tensor product, n_q = n_w^{n_x} (a single weight-one node for
/// n_x = 0). Throws SizeOverflowError above 10^7 nodes.
CubatureRule tensor_rule(int n_w, int n_x);

struct PCESurrogate {
    MultiIndexSet basis;
    std::vector<std::string> output_names;
    /// coeffs[k] holds the coefficient array for output component k,
    /// one entry per multi-index.
    std::vector<std::vector<double>> coeffs;

    std::size_t n_outputs() const { return coeffs.size(); }
};

/// The deterministic model evaluated at a cubature node; `node` indexes into
/// the rule for error reporting.
using NodeModel = std::function<std::vector<double>(const std::vector<double>& theta, std::size_t node)>;

/// Coefficients by cubature projection: Yhat_i = sum_j model(theta_j)
/// Psi_i(theta_j) w_j. The model is evaluated exactly n_q times, in node
/// order; `threads` > 1 evaluates nodes in parallel with a deterministic
/// node-order reduction.
PCESurrogate pseudospectral_fit(const NodeModel& model, const CubatureRule& rule,
                                const MultiIndexSet& basis,
                                std::vector<std::string> output_names = {}, int threads = 1);

std::vector<double> surrogate_eval(const PCESurrogate& s, const std::vector<double>& theta);

struct Moments {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// mean = Yhat_0; variance = sum of squared higher coefficients (orthonormal
/// basis).
Moments moments(const PCESurrogate& s);

/// Physical input description for sampling: theta is standard normal and
/// maps to mu + sigma*theta, truncated to [lo, hi].
struct InputDistribution {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;
    double lo = -1e300;
    double hi = 1e300;
};

struct CdfTable {
    std::string name;
    std::vector<double> value;
    std::vector<double> prob;
};

/// Empirical CDF of each surrogate output under truncated-Gaussian inputs
/// (out-of-bounds physical values are resampled). With `kde_smooth` the
/// table is replaced by a Gaussian-kernel smoothed CDF on a uniform value
/// grid (Silverman bandwidth).
std::vector<CdfTable> cdf_table(const PCESurrogate& s, const std::vector<InputDistribution>& dists,
                                std::size_t n_samples, std::uint64_t seed, bool kde_smooth = false);

/// Empirical CDF of raw sample columns (used by the Monte Carlo pipeline).
CdfTable empirical_cdf(std::string name, std::vector<double> values);

}  // namespace muq::pce
