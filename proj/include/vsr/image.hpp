#pragma once

// Image containers and resampling primitives shared by the DCT and AAM
// front-ends. Intensities are stored as doubles in [0,1], row-major.
// Continuous coordinates follow the pixel-center convention: sample (i,j)
// sits at (j+0.5, i+0.5).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsr {

struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool valid() const { return w > 0 && h > 0; }

    Rect clamped(int img_w, int img_h) const {
        int x0 = std::clamp(x, 0, img_w);
        int y0 = std::clamp(y, 0, img_h);
        int x1 = std::clamp(x + w, 0, img_w);
        int y1 = std::clamp(y + h, 0, img_h);
        return Rect{x0, y0, x1 - x0, y1 - y0};
    }
};

class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          data_(static_cast<size_t>(width) * height, fill) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("GrayImage: non-positive dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double at(int x, int y) const {
        return data_[static_cast<size_t>(y) * width_ + x];
    }
    double& at(int x, int y) {
        return data_[static_cast<size_t>(y) * width_ + x];
    }

    // Clamped integer access.
    double at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width_ - 1);
        y = std::clamp(y, 0, height_ - 1);
        return at(x, y);
    }

    // Bilinear sample at a continuous pixel-center coordinate.
    double sample_bilinear(double cx, double cy) const {
        double u = cx - 0.5;
        double v = cy - 0.5;
        int x0 = static_cast<int>(std::floor(u));
        int y0 = static_cast<int>(std::floor(v));
        double fx = u - x0;
        double fy = v - y0;
        double p00 = at_clamped(x0, y0);
        double p10 = at_clamped(x0 + 1, y0);
        double p01 = at_clamped(x0, y0 + 1);
        double p11 = at_clamped(x0 + 1, y0 + 1);
        return (1 - fy) * ((1 - fx) * p00 + fx * p10) +
               fy * ((1 - fx) * p01 + fx * p11);
    }

    GrayImage crop(const Rect& r) const {
        Rect c = r.clamped(width_, height_);
        if (!c.valid())
            throw std::invalid_argument("GrayImage::crop: empty region");
        GrayImage out(c.w, c.h);
        for (int y = 0; y < c.h; ++y)
            for (int x = 0; x < c.w; ++x)
                out.at(x, y) = at(c.x + x, c.y + y);
        return out;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          data_(static_cast<size_t>(width) * height * 3, fill) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("RgbImage: non-positive dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double at(int x, int y, int c) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
    }
    double& at(int x, int y, int c) {
        return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

// Rec.601 luma weights.
inline GrayImage to_grayscale(const RgbImage& img) {
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                           0.114 * img.at(x, y, 2);
    return out;
}

namespace detail {

// Catmull-Rom kernel weights for fractional offset t in [0,1), applied to
// samples at offsets -1, 0, 1, 2. Weights sum to 1.
inline void catmull_rom_weights(double t, double w[4]) {
    double t2 = t * t;
    double t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2 * t2 - t);
    w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
    w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
}

// One separable pass; resamples rows of `src` (treated as n_rows x n_src)
// into n_dst samples per row.
inline void resample_lines(const std::vector<double>& src, int n_src,
                           int n_rows, int n_dst, std::vector<double>& dst) {
    dst.assign(static_cast<size_t>(n_rows) * n_dst, 0.0);
    double scale = static_cast<double>(n_src) / n_dst;
    std::vector<int> idx(static_cast<size_t>(n_dst) * 4);
    std::vector<double> wts(static_cast<size_t>(n_dst) * 4);
    for (int i = 0; i < n_dst; ++i) {
        double s = (i + 0.5) * scale - 0.5;
        int base = static_cast<int>(std::floor(s));
        double t = s - base;
        double w[4];
        catmull_rom_weights(t, w);
        for (int k = 0; k < 4; ++k) {
            idx[i * 4 + k] = std::clamp(base - 1 + k, 0, n_src - 1);
            wts[i * 4 + k] = w[k];
        }
    }
    for (int r = 0; r < n_rows; ++r) {
        const double* in = src.data() + static_cast<size_t>(r) * n_src;
        double* out = dst.data() + static_cast<size_t>(r) * n_dst;
        for (int i = 0; i < n_dst; ++i) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k)
                acc += wts[i * 4 + k] * in[idx[i * 4 + k]];
            out[i] = acc;
        }
    }
}

inline void transpose(const std::vector<double>& src, int w, int h,
                      std::vector<double>& dst) {
    dst.resize(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            dst[static_cast<size_t>(x) * h + y] =
                src[static_cast<size_t>(y) * w + x];
}

}  // namespace detail

// Separable Catmull-Rom resampling. Output clamped to [0,1].
inline GrayImage resize_cubic(const GrayImage& img, int out_w, int out_h) {
    if (out_w < 2 || out_h < 2)
        throw std::invalid_argument("resize_cubic: output size must be >= 2");
    std::vector<double> horiz;
    detail::resample_lines(img.data(), img.width(), img.height(), out_w, horiz);
    std::vector<double> horiz_t, vert, vert_t;
    detail::transpose(horiz, out_w, img.height(), horiz_t);
    detail::resample_lines(horiz_t, img.height(), out_w, out_h, vert);
    detail::transpose(vert, out_h, out_w, vert_t);
    GrayImage out(out_w, out_h);
    for (size_t i = 0; i < vert_t.size(); ++i)
        out.data()[i] = std::clamp(vert_t[i], 0.0, 1.0);
    return out;
}

inline RgbImage resize_cubic(const RgbImage& img, int out_w, int out_h) {
    if (out_w < 2 || out_h < 2)
        throw std::invalid_argument("resize_cubic: output size must be >= 2");
    RgbImage out(out_w, out_h);
    GrayImage chan(img.width(), img.height());
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                chan.at(x, y) = img.at(x, y, c);
        GrayImage rc = resize_cubic(chan, out_w, out_h);
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x)
                out.at(x, y, c) = rc.at(x, y);
    }
    return out;
}

struct NccResult {
    Rect rect;
    double score = 0.0;
};

// Zero-normalized cross-correlation template matching. Exhaustive search;
// ties broken toward the smallest (y,x).
inline NccResult ncc_match(const GrayImage& img, const GrayImage& tmpl) {
    int tw = tmpl.width(), th = tmpl.height();
    if (tw > img.width() || th > img.height())
        throw std::invalid_argument("ncc_match: template larger than image");
    size_t n = static_cast<size_t>(tw) * th;
    double t_mean = 0.0;
    for (double v : tmpl.data()) t_mean += v;
    t_mean /= static_cast<double>(n);
    std::vector<double> t_cent(n);
    double t_norm2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        t_cent[i] = tmpl.data()[i] - t_mean;
        t_norm2 += t_cent[i] * t_cent[i];
    }
    if (t_norm2 <= 1e-14)
        throw std::invalid_argument("ncc_match: zero-variance template");
    double t_norm = std::sqrt(t_norm2);

    NccResult best;
    best.score = -2.0;
    for (int oy = 0; oy + th <= img.height(); ++oy) {
        for (int ox = 0; ox + tw <= img.width(); ++ox) {
            double w_mean = 0.0;
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x)
                    w_mean += img.at(ox + x, oy + y);
            w_mean /= static_cast<double>(n);
            double dot = 0.0, w_norm2 = 0.0;
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x) {
                    double wv = img.at(ox + x, oy + y) - w_mean;
                    dot += wv * t_cent[static_cast<size_t>(y) * tw + x];
                    w_norm2 += wv * wv;
                }
            double score =
                w_norm2 <= 1e-14 ? 0.0 : dot / (t_norm * std::sqrt(w_norm2));
            if (score > best.score + 1e-12) {
                best.score = score;
                best.rect = Rect{ox, oy, tw, th};
            }
        }
    }
    best.score = std::clamp(best.score, -1.0, 1.0);
    return best;
}

inline int pyramid_dim(int dim, double factor) {
    return std::max(2, static_cast<int>(std::lround(factor * dim)));
}

// Multi-resolution pyramid; factor 1.0 returns the input unchanged.
inline std::vector<GrayImage> pyramid(const GrayImage& img,
                                      const std::vector<double>& scales) {
    if (scales.empty())
        throw std::invalid_argument("pyramid: empty scale list");
    std::vector<GrayImage> out;
    out.reserve(scales.size());
    for (double f : scales) {
        if (!(f > 0.0 && f <= 1.0))
            throw std::invalid_argument("pyramid: factor out of (0,1]");
        if (f == 1.0) {
            out.push_back(img);
        } else {
            out.push_back(resize_cubic(img, pyramid_dim(img.width(), f),
                                       pyramid_dim(img.height(), f)));
        }
    }
    return out;
}

inline std::vector<RgbImage> pyramid(const RgbImage& img,
                                     const std::vector<double>& scales) {
    if (scales.empty())
        throw std::invalid_argument("pyramid: empty scale list");
    std::vector<RgbImage> out;
    out.reserve(scales.size());
    for (double f : scales) {
        if (!(f > 0.0 && f <= 1.0))
            throw std::invalid_argument("pyramid: factor out of (0,1]");
        if (f == 1.0)
            out.push_back(img);
        else
            out.push_back(resize_cubic(img, pyramid_dim(img.width(), f),
                                       pyramid_dim(img.height(), f)));
    }
    return out;
}

}  // namespace vsr
