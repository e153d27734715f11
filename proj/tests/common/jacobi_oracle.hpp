#pragma once

// Cyclic Jacobi eigensolver for symmetric matrices, written independently of
// the library's square-root path so it can serve as a reference.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ngp/core/rng.hpp"

namespace ngp::testing {

using Dense = std::vector<std::vector<double>>;

struct EigenPairs {
    std::vector<double> values;
    Dense vectors;  // column k is the eigenvector of values[k]
};

inline EigenPairs jacobi_eigen(Dense a, int max_sweeps = 100) {
    const std::size_t n = a.size();
    Dense v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    EigenPairs out;
    for (std::size_t i = 0; i < n; ++i) out.values.push_back(a[i][i]);
    out.vectors = v;
    return out;
}

/// V sqrt(max(D, 0)) V^T from the Jacobi decomposition.
inline Dense jacobi_sqrt(const Dense& m) {
    const auto e = jacobi_eigen(m);
    const std::size_t n = m.size();
    Dense s(n, std::vector<double>(n, 0.0));
    double top = 0.0;
    for (double v : e.values) top = std::max(top, std::abs(v));
    const double cutoff = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * top;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = e.values[k] > cutoff ? std::sqrt(e.values[k]) : 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s[i][j] += e.vectors[i][k] * r * e.vectors[j][k];
    }
    return s;
}

// Eigen-side helpers for comparing against the oracle.

using MatrixXd = Eigen::MatrixXd;

inline MatrixXd random_psd(Rng& rng, int n, int rank) {
    MatrixXd a(n, rank);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < rank; ++j) a(i, j) = rng.normal();
    MatrixXd m = a * a.transpose() / rank;
    return 0.5 * (m + m.transpose());
}

inline Dense to_dense(const MatrixXd& m) {
    Dense d(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
    return d;
}

inline double max_abs(const MatrixXd& m, const Dense& d) {
    double worst = 0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) worst = std::max(worst, std::abs(m(i, j) - d[i][j]));
    return worst;
}

} // namespace ngp::testing
