#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngp/core/error.hpp"
#include "ngp/core/rng.hpp"
#include "ngp/tensor/tensor.hpp"

namespace ngp {

using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;

/// Substitute image features: images are converted to grayscale, bilinearly
/// resampled to `grid` x `grid` and projected onto `dim` orthonormal
/// directions drawn from a fixed seed.
struct FeatureConfig {
    int grid = 16;
    int dim = 64;
    std::uint64_t seed = 0x46454154ULL;
};

/// Orthonormal projection Q [grid^2, dim]: Gaussian columns orthonormalized
/// by two passes of modified Gram-Schmidt.
inline MatrixXd projection_matrix(const FeatureConfig& cfg) {
    const int n = cfg.grid * cfg.grid;
    if (cfg.dim < 1 || cfg.dim > n) throw InvalidArgument("features: dim must be in [1, grid^2]");
    Rng rng(cfg.seed);
    MatrixXd q(n, cfg.dim);
    for (int j = 0; j < cfg.dim; ++j)
        for (int i = 0; i < n; ++i) q(i, j) = rng.normal();
    for (int j = 0; j < cfg.dim; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
        }
        q.col(j) /= q.col(j).norm();
    }
    return q;
}

/// Grayscale (channel mean) of image `b` of an [N,C,H,W] batch, bilinearly
/// resampled at the centers of a grid x grid lattice.
inline VectorXd downsample_gray(const Tensor<float>& images, std::int64_t b, int grid) {
    const std::int64_t C = images.dim(1), H = images.dim(2), W = images.dim(3);
    const auto data = images.data();
    const std::size_t base = static_cast<std::size_t>(b * C * H * W);
    auto gray = [&](std::int64_t r, std::int64_t c) {
        double s = 0;
        for (std::int64_t ch = 0; ch < C; ++ch) s += data[base + static_cast<std::size_t>((ch * H + r) * W + c)];
        return s / static_cast<double>(C);
    };
    VectorXd out(grid * grid);
    for (int i = 0; i < grid; ++i) {
        const double y = std::clamp((i + 0.5) * static_cast<double>(H) / grid - 0.5, 0.0, static_cast<double>(H - 1));
        const auto y0 = static_cast<std::int64_t>(std::floor(y));
        const auto y1 = std::min(y0 + 1, H - 1);
        const double fy = y - y0;
        for (int j = 0; j < grid; ++j) {
            const double x = std::clamp((j + 0.5) * static_cast<double>(W) / grid - 0.5, 0.0, static_cast<double>(W - 1));
            const auto x0 = static_cast<std::int64_t>(std::floor(x));
            const auto x1 = std::min(x0 + 1, W - 1);
            const double fx = x - x0;
            out(i * grid + j) = (1 - fy) * ((1 - fx) * gray(y0, x0) + fx * gray(y0, x1)) +
                                fy * ((1 - fx) * gray(y1, x0) + fx * gray(y1, x1));
        }
    }
    return out;
}

/// Feature matrix [N, dim] of an [N,C,H,W] image batch.
inline MatrixXd extract_features(const Tensor<float>& images, const FeatureConfig& cfg = {}) {
    if (!images.defined() || images.ndim() != 4) throw ShapeError("extract_features: expected an [N,C,H,W] batch");
    if (images.dim(0) == 0) throw EmptyDatasetError("extract_features: empty image set");
    const MatrixXd q = projection_matrix(cfg);
    MatrixXd f(images.dim(0), cfg.dim);
    for (std::int64_t b = 0; b < images.dim(0); ++b) f.row(b) = (q.transpose() * downsample_gray(images, b, cfg.grid)).transpose();
    return f;
}

struct GaussianStats {
    VectorXd mu;
    MatrixXd sigma;
};

/// Sample mean and unbiased, symmetrized covariance of feature rows.
inline GaussianStats fit_gaussian(const MatrixXd& features) {
    const auto n = features.rows();
    if (n < 2) throw InvalidArgument("fit_gaussian: need at least two feature rows");
    GaussianStats s;
    s.mu = features.colwise().mean().transpose();
    const MatrixXd centered = features.rowwise() - s.mu.transpose();
    s.sigma = centered.transpose() * centered / static_cast<double>(n - 1);
    s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
    return s;
}

/// Symmetric square root of a symmetric PSD matrix via eigendecomposition;
/// negative eigenvalues (round-off) are clamped to 0.
inline MatrixXd matrix_sqrt_psd(const MatrixXd& m, double symmetry_tol = 1e-8) {
    if (m.rows() != m.cols()) throw ShapeError("matrix_sqrt_psd: matrix is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale) {
        throw InvalidArgument("matrix_sqrt_psd: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success) throw InvalidArgument("matrix_sqrt_psd: eigendecomposition failed");
    // Eigenvalues under the numerical-rank cutoff are roundoff; their roots
    // (about 1e-8 of the scale) would otherwise dominate the error.
    const VectorXd& ev = es.eigenvalues();
    const double cutoff = static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon() * ev.cwiseAbs().maxCoeff();
    const VectorXd root = ev.unaryExpr([cutoff](double v) { return v > cutoff ? std::sqrt(v) : 0.0; });
    MatrixXd s = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (s + s.transpose());
}

/// Frechet distance between two Gaussians before clamping at zero:
/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
inline double frechet_distance_raw(const GaussianStats& a, const GaussianStats& b) {
    if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows() || a.sigma.rows() != a.mu.size()) {
        throw ShapeError("frechet_distance: dimension mismatch (" + std::to_string(a.mu.size()) + " vs " +
                         std::to_string(b.mu.size()) + ")");
    }
    const MatrixXd ra = matrix_sqrt_psd(a.sigma);
    MatrixXd inner = ra * b.sigma * ra;
    inner = 0.5 * (inner + inner.transpose());
    const double cross = matrix_sqrt_psd(inner).trace();
    return (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
}

inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    return std::max(0.0, frechet_distance_raw(a, b));
}

/// Frechet distance between the substitute-feature Gaussians of two image sets.
inline double fid_lite(const Tensor<float>& a, const Tensor<float>& b, const FeatureConfig& cfg = {}) {
    return frechet_distance(fit_gaussian(extract_features(a, cfg)), fit_gaussian(extract_features(b, cfg)));
}

} // namespace ngp
