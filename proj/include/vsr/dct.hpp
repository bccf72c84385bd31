#pragma once

// Mouth-ROI DCT feature pipeline: square 2D DCT-II, zig-zag coefficient
// selection and fourth-order finite-difference dynamics.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsr/features.hpp"
#include "vsr/image.hpp"

namespace vsr {

// Orthonormal DCT-II basis matrix, C(k,i) = a_k cos(pi (2i+1) k / 2N).
inline Eigen::MatrixXd dct_basis(int n) {
    Eigen::MatrixXd c(n, n);
    double a0 = std::sqrt(1.0 / n);
    double ak = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            c(k, i) = (k == 0 ? a0 : ak) *
                      std::cos(M_PI * (2 * i + 1) * k / (2.0 * n));
    return c;
}

// Orthonormal 2D DCT-II of a square image: X = C I C^T.
inline Eigen::MatrixXd dct2(const GrayImage& img) {
    if (img.width() != img.height())
        throw std::invalid_argument("dct2: input must be square");
    int n = img.width();
    if (n < 2) throw std::invalid_argument("dct2: N must be >= 2");
    Eigen::MatrixXd pix(n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) pix(y, x) = img.at(x, y);
    Eigen::MatrixXd c = dct_basis(n);
    return c * pix * c.transpose();
}

inline GrayImage idct2(const Eigen::MatrixXd& coeffs) {
    if (coeffs.rows() != coeffs.cols())
        throw std::invalid_argument("idct2: input must be square");
    int n = static_cast<int>(coeffs.rows());
    Eigen::MatrixXd c = dct_basis(n);
    Eigen::MatrixXd pix = c.transpose() * coeffs * c;
    GrayImage img(n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) img.at(x, y) = pix(y, x);
    return img;
}

// JPEG zig-zag index order for an NxN matrix, (row, col) pairs starting at
// the DC entry. Antidiagonals alternate direction, first step to (0,1).
inline std::vector<std::pair<int, int>> zigzag_order(int n) {
    std::vector<std::pair<int, int>> order;
    order.reserve(static_cast<size_t>(n) * n);
    for (int s = 0; s <= 2 * (n - 1); ++s) {
        if (s % 2 == 0) {
            // up-right: row decreasing
            for (int r = std::min(s, n - 1); r >= std::max(0, s - n + 1); --r)
                order.emplace_back(r, s - r);
        } else {
            for (int r = std::max(0, s - n + 1); r <= std::min(s, n - 1); ++r)
                order.emplace_back(r, s - r);
        }
    }
    return order;
}

// First k AC coefficients in zig-zag order (DC skipped).
inline std::vector<double> zigzag_select(const Eigen::MatrixXd& coeffs, int k) {
    if (coeffs.rows() != coeffs.cols())
        throw std::invalid_argument("zigzag_select: non-square input");
    int n = static_cast<int>(coeffs.rows());
    if (k < 0 || k > n * n - 1)
        throw std::invalid_argument("zigzag_select: k out of range");
    auto order = zigzag_order(n);
    std::vector<double> out;
    out.reserve(k);
    for (int i = 1; i <= k; ++i)
        out.push_back(coeffs(order[i].first, order[i].second));
    return out;
}

namespace detail {

// Fourth-order 5-point first-derivative stencils, unit spacing. Row j holds
// the weights (x12) for the derivative at offset j inside the window.
inline constexpr double kFdStencil[5][5] = {
    {-25, 48, -36, 16, -3},
    {-3, -10, 18, -6, 1},
    {1, -8, 0, 8, -1},
    {-1, 6, -18, 10, 3},
    {3, -16, 36, -48, 25},
};

}  // namespace detail

// First derivative of a sequence of equal-length vectors, fourth-order
// accurate everywhere: central stencil in the interior, window-clamped
// 5-point stencils at the two first/last samples.
inline std::vector<std::vector<double>> fd_first_derivative(
    const std::vector<std::vector<double>>& seq) {
    int n = static_cast<int>(seq.size());
    if (n < 5)
        throw std::invalid_argument("fd_derivatives: need at least 5 frames");
    size_t dim = seq[0].size();
    std::vector<std::vector<double>> out(n, std::vector<double>(dim, 0.0));
    for (int i = 0; i < n; ++i) {
        int start = std::clamp(i - 2, 0, n - 5);
        int j = i - start;
        for (size_t d = 0; d < dim; ++d) {
            double acc = 0.0;
            for (int k = 0; k < 5; ++k)
                acc += detail::kFdStencil[j][k] * seq[start + k][d];
            out[i][d] = acc / 12.0;
        }
    }
    return out;
}

struct FdDerivatives {
    std::vector<std::vector<double>> delta;
    std::vector<std::vector<double>> deltadelta;
};

// Second derivative = the first-derivative scheme applied twice.
inline FdDerivatives fd_derivatives(const std::vector<std::vector<double>>& seq) {
    FdDerivatives out;
    out.delta = fd_first_derivative(seq);
    out.deltadelta = fd_first_derivative(out.delta);
    return out;
}

inline constexpr int kDctCoeffCount = 44;

struct DctConfig {
    int window = 36;      // resampled ROI side; 24/28/32/36/40 typical
    double frame_rate = 30.0;
};

// Static 44-coefficient vector for one frame.
inline std::vector<double> dct_static_features(const RgbImage& frame,
                                               const Rect& roi, int window) {
    if (window < 8) throw std::invalid_argument("dct window must be >= 8");
    GrayImage gray = to_grayscale(frame);
    Rect c = roi.clamped(gray.width(), gray.height());
    if (!c.valid())
        throw std::runtime_error("DCT ROI empty after clamping to frame");
    GrayImage patch = resize_cubic(gray.crop(c), window, window);
    return zigzag_select(dct2(patch), kDctCoeffCount);
}

// Full pipeline: per-frame static coefficients plus delta/delta-delta
// dynamics, 132 dimensions total.
inline FeatureSequence extract_dct_sequence(const std::vector<RgbImage>& frames,
                                            const std::vector<Rect>& rois,
                                            const DctConfig& cfg = {}) {
    if (frames.size() != rois.size())
        throw std::invalid_argument("extract_dct_sequence: one ROI per frame required");
    if (frames.size() < 5)
        throw std::invalid_argument("extract_dct_sequence: need at least 5 frames");
    std::vector<std::vector<double>> statics;
    statics.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        try {
            statics.push_back(dct_static_features(frames[i], rois[i], cfg.window));
        } catch (const std::exception& e) {
            throw std::runtime_error("frame " + std::to_string(i) + ": " + e.what());
        }
    }
    FdDerivatives dyn = fd_derivatives(statics);
    FeatureSequence seq;
    seq.dim = 3 * kDctCoeffCount;
    seq.frame_rate = cfg.frame_rate;
    seq.kind = "dct132";
    seq.frames.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        std::vector<double> row;
        row.reserve(seq.dim);
        row.insert(row.end(), statics[i].begin(), statics[i].end());
        row.insert(row.end(), dyn.delta[i].begin(), dyn.delta[i].end());
        row.insert(row.end(), dyn.deltadelta[i].begin(), dyn.deltadelta[i].end());
        seq.frames.push_back(std::move(row));
    }
    return seq;
}

}  // namespace vsr
