#include "muq/pce.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "muq/concurrency.hpp"
#include "muq/rng.hpp"

namespace muq::pce {

double hermite_orthonormal(int n, double theta) {
    if (n < 0) throw OutOfRangeError("polynomial degree must be >= 0");
    double prev = 1.0;  // psi_0
    if (n == 0) return prev;
    double cur = theta;  // psi_1
    for (int k = 1; k < n; ++k) {
        const double next = (theta * cur - std::sqrt(static_cast<double>(k)) * prev) /
                            std::sqrt(static_cast<double>(k + 1));
        prev = cur;
        cur = next;
    }
    return cur;
}

std::vector<double> hermite_all(int max_degree, double theta) {
    std::vector<double> psi(static_cast<std::size_t>(max_degree) + 1);
    psi[0] = 1.0;
    if (max_degree >= 1) psi[1] = theta;
    for (int k = 1; k < max_degree; ++k)
        psi[static_cast<std::size_t>(k) + 1] =
            (theta * psi[static_cast<std::size_t>(k)] -
             std::sqrt(static_cast<double>(k)) * psi[static_cast<std::size_t>(k) - 1]) /
            std::sqrt(static_cast<double>(k + 1));
    return psi;
}

namespace {

void emit_indices(int dims_left, int budget, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
    if (dims_left == 1) {
        cur.push_back(budget);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int head = budget; head >= 0; --head) {
        cur.push_back(head);
        emit_indices(dims_left - 1, budget - head, cur, out);
        cur.pop_back();
    }
}

}  // namespace

MultiIndexSet multi_indices(int n_x, int n_pce) {
    if (n_x < 0 || n_pce < 0) throw OutOfRangeError("multi-index parameters must be >= 0");
    MultiIndexSet set;
    set.n_x = n_x;
    set.n_pce = n_pce;
    if (n_x == 0) {
        set.indices.push_back({});
        return set;
    }
    std::vector<int> cur;
    for (int degree = 0; degree <= n_pce; ++degree) emit_indices(n_x, degree, cur, set.indices);
    return set;
}

double basis_value(const std::vector<int>& index, const std::vector<double>& theta) {
    if (index.size() != theta.size()) throw DimensionMismatchError("multi-index/point dimension mismatch");
    double v = 1.0;
    for (std::size_t d = 0; d < index.size(); ++d) v *= hermite_orthonormal(index[d], theta[d]);
    return v;
}

Rule1D gauss_hermite(int n_w) {
    if (n_w < 1 || n_w > 50) throw OutOfRangeError("nodes per dimension outside [1, 50]");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_w, n_w);
    for (int k = 1; k < n_w; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Rule1D rule;
    rule.nodes.resize(static_cast<std::size_t>(n_w));
    rule.weights.resize(static_cast<std::size_t>(n_w));
    std::vector<int> order(static_cast<std::size_t>(n_w));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b2) { return es.eigenvalues()(a) < es.eigenvalues()(b2); });
    for (int i = 0; i < n_w; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(order[static_cast<std::size_t>(i)]);
        const double v0 = es.eigenvectors()(0, order[static_cast<std::size_t>(i)]);
        rule.weights[static_cast<std::size_t>(i)] = v0 * v0;  // first moment of N(0,1) is 1
    }
    // The rule is symmetric about the origin; enforce the +- pairing exactly
    // so odd moments cancel to machine precision.
    for (int i = 0; i < n_w / 2; ++i) {
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n_w - 1 - i);
        const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
        rule.nodes[lo] = -x;
        rule.nodes[hi] = x;
        const double w = 0.5 * (rule.weights[lo] + rule.weights[hi]);
        rule.weights[lo] = rule.weights[hi] = w;
    }
    if (n_w % 2 == 1) rule.nodes[static_cast<std::size_t>(n_w / 2)] = 0.0;
    return rule;
}

CubatureRule tensor_rule(int n_w, int n_x) {
    if (n_x < 0) throw OutOfRangeError("dimension must be >= 0");
    CubatureRule rule;
    rule.n_w = n_w;
    rule.n_x = n_x;
    if (n_x == 0) {
        rule.nodes.push_back({});
        rule.weights.push_back(1.0);
        return rule;
    }
    const double n_q_dbl = std::pow(static_cast<double>(n_w), n_x);
    if (n_q_dbl > 1e7) throw SizeOverflowError("tensor rule would exceed 10^7 nodes");
    const Rule1D one = gauss_hermite(n_w);
    const auto n_q = static_cast<std::size_t>(std::llround(n_q_dbl));
    rule.nodes.reserve(n_q);
    rule.weights.reserve(n_q);
    // Dimension 0 is the slowest-varying digit of the node index.
    for (std::size_t j = 0; j < n_q; ++j) {
        std::vector<double> node(static_cast<std::size_t>(n_x));
        double w = 1.0;
        std::size_t rem = j;
        for (int d = n_x - 1; d >= 0; --d) {
            const std::size_t digit = rem % static_cast<std::size_t>(n_w);
            rem /= static_cast<std::size_t>(n_w);
            node[static_cast<std::size_t>(d)] = one.nodes[digit];
            w *= one.weights[digit];
        }
        rule.nodes.push_back(std::move(node));
        rule.weights.push_back(w);
    }
    return rule;
}

PCESurrogate pseudospectral_fit(const NodeModel& model, const CubatureRule& rule,
                                const MultiIndexSet& basis, std::vector<std::string> output_names,
                                int threads) {
    if (rule.n_x != basis.n_x) throw DimensionMismatchError("cubature rule and basis dimension differ");
    const std::size_t n_q = rule.n_q();

    // Evaluate the model at every node (possibly in parallel), then reduce in
    // node order so coefficients are reproducible.
    std::vector<std::vector<double>> values(n_q);
    std::vector<std::string> failures(n_q);
    parallel_for(n_q, threads, [&](std::size_t j) {
        try {
            values[j] = model(rule.nodes[j], j);
        } catch (const std::exception& e) {
            failures[j] = e.what();
        }
    });
    for (std::size_t j = 0; j < n_q; ++j)
        if (!failures[j].empty())
            throw Error("model evaluation failed at node " + std::to_string(j) + ": " + failures[j]);

    const std::size_t n_out = values.empty() ? 0 : values[0].size();
    for (std::size_t j = 1; j < n_q; ++j)
        if (values[j].size() != n_out) throw DimensionMismatchError("model output size varies across nodes");

    PCESurrogate s;
    s.basis = basis;
    s.output_names = std::move(output_names);
    if (s.output_names.empty())
        for (std::size_t k = 0; k < n_out; ++k) s.output_names.push_back("y" + std::to_string(k));
    s.coeffs.assign(n_out, std::vector<double>(basis.indices.size(), 0.0));

    std::vector<double> psi(basis.indices.size());
    for (std::size_t j = 0; j < n_q; ++j) {
        // Tabulate the 1D polynomials once per node.
        std::vector<std::vector<double>> per_dim(static_cast<std::size_t>(basis.n_x));
        for (int d = 0; d < basis.n_x; ++d)
            per_dim[static_cast<std::size_t>(d)] = hermite_all(basis.n_pce, rule.nodes[j][static_cast<std::size_t>(d)]);
        for (std::size_t i = 0; i < basis.indices.size(); ++i) {
            double v = 1.0;
            for (int d = 0; d < basis.n_x; ++d)
                v *= per_dim[static_cast<std::size_t>(d)][static_cast<std::size_t>(basis.indices[i][static_cast<std::size_t>(d)])];
            psi[i] = v;
        }
        const double w = rule.weights[j];
        for (std::size_t k = 0; k < n_out; ++k) {
            const double y = values[j][k];
            for (std::size_t i = 0; i < psi.size(); ++i) s.coeffs[k][i] += y * psi[i] * w;
        }
    }
    return s;
}

std::vector<double> surrogate_eval(const PCESurrogate& s, const std::vector<double>& theta) {
    if (static_cast<int>(theta.size()) != s.basis.n_x)
        throw DimensionMismatchError("evaluation point dimension mismatch");
    std::vector<std::vector<double>> per_dim(static_cast<std::size_t>(s.basis.n_x));
    for (int d = 0; d < s.basis.n_x; ++d)
        per_dim[static_cast<std::size_t>(d)] = hermite_all(s.basis.n_pce, theta[static_cast<std::size_t>(d)]);
    std::vector<double> out(s.n_outputs(), 0.0);
    for (std::size_t i = 0; i < s.basis.indices.size(); ++i) {
        double v = 1.0;
        for (int d = 0; d < s.basis.n_x; ++d)
            v *= per_dim[static_cast<std::size_t>(d)][static_cast<std::size_t>(s.basis.indices[i][static_cast<std::size_t>(d)])];
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += s.coeffs[k][i] * v;
    }
    return out;
}

Moments moments(const PCESurrogate& s) {
    Moments m;
    m.mean.resize(s.n_outputs());
    m.stddev.resize(s.n_outputs());
    for (std::size_t k = 0; k < s.n_outputs(); ++k) {
        m.mean[k] = s.coeffs[k][0];
        double var = 0.0;
        for (std::size_t i = 1; i < s.coeffs[k].size(); ++i) var += s.coeffs[k][i] * s.coeffs[k][i];
        m.stddev[k] = std::sqrt(var);
    }
    return m;
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

}  // namespace

std::vector<CdfTable> cdf_table(const PCESurrogate& s, const std::vector<InputDistribution>& dists,
                                std::size_t n_samples, std::uint64_t seed, bool kde_smooth) {
    if (n_samples < 1000) throw OutOfRangeError("CDF reconstruction needs at least 10^3 samples");
    if (static_cast<int>(dists.size()) != s.basis.n_x)
        throw DimensionMismatchError("distribution list does not match surrogate dimension");

    Rng rng(seed);
    std::vector<std::vector<double>> samples(s.n_outputs());
    for (auto& col : samples) col.reserve(n_samples);
    std::vector<double> theta(dists.size());
    for (std::size_t k = 0; k < n_samples; ++k) {
        for (std::size_t d = 0; d < dists.size(); ++d) {
            const auto& dist = dists[d];
            if (dist.stddev <= 0.0) {
                theta[d] = 0.0;
                continue;
            }
            // Resample until the mapped physical value is inside the
            // truncation bounds.
            double z, x;
            do {
                z = rng.normal();
                x = dist.mean + dist.stddev * z;
            } while (x < dist.lo || x > dist.hi);
            theta[d] = z;
        }
        const std::vector<double> y = surrogate_eval(s, theta);
        for (std::size_t c = 0; c < y.size(); ++c) samples[c].push_back(y[c]);
    }

    std::vector<CdfTable> tables;
    tables.reserve(s.n_outputs());
    for (std::size_t c = 0; c < s.n_outputs(); ++c) {
        if (!kde_smooth) {
            tables.push_back(empirical_cdf(s.output_names[c], std::move(samples[c])));
            continue;
        }
        auto& v = samples[c];
        std::sort(v.begin(), v.end());
        const double n = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / std::max(1.0, n - 1.0));
        const double h = std::max(1.06 * sd * std::pow(n, -0.2), 1e-300);
        const int grid = 401;
        CdfTable t;
        t.name = s.output_names[c];
        const double lo = v.front() - 3.0 * h, hi = v.back() + 3.0 * h;
        for (int i = 0; i < grid; ++i) {
            const double x = lo + (hi - lo) * i / (grid - 1);
            double acc = 0.0;
            for (double xj : v) acc += normal_cdf((x - xj) / h);
            t.value.push_back(x);
            t.prob.push_back(acc / n);
        }
        tables.push_back(std::move(t));
    }
    return tables;
}

CdfTable empirical_cdf(std::string name, std::vector<double> values) {
    std::sort(values.begin(), values.end());
    CdfTable t;
    t.name = std::move(name);
    const double n = static_cast<double>(values.size());
    t.value = std::move(values);
    t.prob.resize(t.value.size());
    for (std::size_t i = 0; i < t.prob.size(); ++i) t.prob[i] = static_cast<double>(i + 1) / n;
    return t;
}

}  // namespace muq::pce
