#pragma once

// Reference-frame appearance extraction: Delaunay triangulation,
// piecewise-affine warping, a dense 8-bin SIFT descriptor image and
// landmark-centered patches.
//
// Landmark coordinates are in index space: landmark (x,y) == pixel (x,y),
// so bilinear sampling at integer coordinates returns the pixel exactly.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vsr/image.hpp"
#include "vsr/shape.hpp"

namespace vsr {

// Dense raster with 1 (gray), 3 (rgb) or 8 (sift) channels; row-major,
// channel-minor.
struct MultiImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    MultiImage() = default;
    MultiImage(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    static MultiImage from(const GrayImage& g) {
        MultiImage m(g.width(), g.height(), 1);
        m.data = g.data();
        return m;
    }
    static MultiImage from(const RgbImage& g) {
        MultiImage m(g.width(), g.height(), 3);
        m.data = g.data();
        return m;
    }

    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at_clamped(int x, int y, int c) const {
        return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1), c);
    }

    // Bilinear sample in index space; out-of-image clamped.
    void sample_bilinear(double fx, double fy, double* out) const {
        int x0 = static_cast<int>(std::floor(fx));
        int y0 = static_cast<int>(std::floor(fy));
        double tx = fx - x0;
        double ty = fy - y0;
        for (int c = 0; c < channels; ++c) {
            double p00 = at_clamped(x0, y0, c);
            double p10 = at_clamped(x0 + 1, y0, c);
            double p01 = at_clamped(x0, y0 + 1, c);
            double p11 = at_clamped(x0 + 1, y0 + 1, c);
            out[c] = (1 - ty) * ((1 - tx) * p00 + tx * p10) +
                     ty * ((1 - tx) * p01 + tx * p11);
        }
    }
};

struct Triangle {
    int a, b, c;
};

struct TriMesh {
    std::vector<Triangle> triangles;
};

namespace detail {

inline double tri_area2(double ax, double ay, double bx, double by, double cx,
                        double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// Returns true if p lies strictly inside the circumcircle of (a,b,c) given
// in counterclockwise order.
inline bool in_circumcircle(double ax, double ay, double bx, double by,
                            double cx, double cy, double px, double py) {
    double adx = ax - px, ady = ay - py;
    double bdx = bx - px, bdy = by - py;
    double cdx = cx - px, cdy = cy - py;
    double det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) -
                 (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady) +
                 (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    return det > 1e-12;
}

}  // namespace detail

// Bowyer-Watson Delaunay triangulation of the reference landmarks.
// Deterministic: points inserted in index order, triangles emitted sorted.
inline TriMesh delaunay(const Shape& ref) {
    int n = ref.n_points();
    if (n < 3) throw std::invalid_argument("delaunay: need >= 3 points");

    auto bb = ref.bbox();
    double dx = bb[2] - bb[0], dy = bb[3] - bb[1];
    double d = std::max(dx, dy);
    if (d <= 1e-12) throw std::invalid_argument("delaunay: degenerate points");
    double midx = (bb[0] + bb[2]) / 2, midy = (bb[1] + bb[3]) / 2;

    // Vertex table: landmarks then 3 super-triangle vertices.
    std::vector<std::pair<double, double>> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = {ref.x(i), ref.y(i)};
    pts.push_back({midx - 20 * d, midy - d});
    pts.push_back({midx, midy + 20 * d});
    pts.push_back({midx + 20 * d, midy - d});
    int s0 = n, s1 = n + 1, s2 = n + 2;

    std::vector<Triangle> tris{{s0, s1, s2}};
    auto ccw = [&](Triangle& t) {
        if (detail::tri_area2(pts[t.a].first, pts[t.a].second, pts[t.b].first,
                              pts[t.b].second, pts[t.c].first,
                              pts[t.c].second) < 0)
            std::swap(t.b, t.c);
    };
    ccw(tris[0]);

    for (int i = 0; i < n; ++i) {
        double px = pts[i].first, py = pts[i].second;
        std::vector<Triangle> bad, keep;
        for (auto& t : tris) {
            if (detail::in_circumcircle(pts[t.a].first, pts[t.a].second,
                                        pts[t.b].first, pts[t.b].second,
                                        pts[t.c].first, pts[t.c].second, px,
                                        py))
                bad.push_back(t);
            else
                keep.push_back(t);
        }
        // Boundary of the cavity: edges appearing exactly once among bad
        // triangles.
        std::vector<std::pair<int, int>> edges;
        for (auto& t : bad) {
            std::pair<int, int> e[3] = {{t.a, t.b}, {t.b, t.c}, {t.c, t.a}};
            for (auto& ed : e) {
                auto rev = std::make_pair(ed.second, ed.first);
                auto it = std::find(edges.begin(), edges.end(), rev);
                if (it != edges.end())
                    edges.erase(it);
                else
                    edges.push_back(ed);
            }
        }
        for (auto& ed : edges) {
            Triangle t{ed.first, ed.second, i};
            ccw(t);
            keep.push_back(t);
        }
        tris = std::move(keep);
    }

    TriMesh mesh;
    for (auto& t : tris) {
        if (t.a >= n || t.b >= n || t.c >= n) continue;
        double a2 = std::abs(detail::tri_area2(
            pts[t.a].first, pts[t.a].second, pts[t.b].first, pts[t.b].second,
            pts[t.c].first, pts[t.c].second));
        if (a2 <= 2e-9) continue;
        // canonical vertex order for determinism
        Triangle s = t;
        if (s.b < s.a && s.b <= s.c) s = {t.b, t.c, t.a};
        else if (s.c < s.a && s.c < s.b) s = {t.c, t.a, t.b};
        mesh.triangles.push_back(s);
    }
    if (mesh.triangles.empty())
        throw std::invalid_argument("delaunay: collinear point set");
    std::sort(mesh.triangles.begin(), mesh.triangles.end(),
              [](const Triangle& x, const Triangle& y) {
                  return std::tie(x.a, x.b, x.c) < std::tie(y.a, y.b, y.c);
              });
    return mesh;
}

// Precomputed warp support: every pixel strictly inside the mesh in the
// reference frame, with its triangle id and barycentric coordinates.
struct WarpMap {
    std::vector<int> px, py;        // integer reference pixel coordinates
    std::vector<int> tri;           // triangle id per pixel
    std::vector<double> bary;       // 3 per pixel
    int grid_x0 = 0, grid_y0 = 0;   // mask bounding box
    int grid_w = 0, grid_h = 0;
    std::vector<int> grid;          // grid index -> mask index, -1 outside

    size_t size() const { return px.size(); }

    int mask_index(int x, int y) const {
        if (x < grid_x0 || y < grid_y0 || x >= grid_x0 + grid_w ||
            y >= grid_y0 + grid_h)
            return -1;
        return grid[static_cast<size_t>(y - grid_y0) * grid_w + (x - grid_x0)];
    }
};

inline WarpMap build_warp_map(const Shape& ref, const TriMesh& mesh) {
    auto bb = ref.bbox();
    int x0 = static_cast<int>(std::floor(bb[0]));
    int y0 = static_cast<int>(std::floor(bb[1]));
    int x1 = static_cast<int>(std::ceil(bb[2]));
    int y1 = static_cast<int>(std::ceil(bb[3]));

    WarpMap wm;
    wm.grid_x0 = x0;
    wm.grid_y0 = y0;
    wm.grid_w = x1 - x0 + 1;
    wm.grid_h = y1 - y0 + 1;
    wm.grid.assign(static_cast<size_t>(wm.grid_w) * wm.grid_h, -1);

    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            for (size_t t = 0; t < mesh.triangles.size(); ++t) {
                const Triangle& tr = mesh.triangles[t];
                double ax = ref.x(tr.a), ay = ref.y(tr.a);
                double bx = ref.x(tr.b), by = ref.y(tr.b);
                double cx = ref.x(tr.c), cy = ref.y(tr.c);
                double det = detail::tri_area2(ax, ay, bx, by, cx, cy);
                if (std::abs(det) <= 1e-12) continue;
                double l1 = detail::tri_area2(static_cast<double>(x),
                                              static_cast<double>(y), bx, by,
                                              cx, cy) / det;
                double l2 = detail::tri_area2(ax, ay, static_cast<double>(x),
                                              static_cast<double>(y), cx, cy) /
                            det;
                double l3 = 1.0 - l1 - l2;
                if (l1 < -1e-12 || l2 < -1e-12 || l3 < -1e-12) continue;
                wm.grid[static_cast<size_t>(y - y0) * wm.grid_w + (x - x0)] =
                    static_cast<int>(wm.px.size());
                wm.px.push_back(x);
                wm.py.push_back(y);
                wm.tri.push_back(static_cast<int>(t));
                wm.bary.push_back(std::clamp(l1, 0.0, 1.0));
                wm.bary.push_back(std::clamp(l2, 0.0, 1.0));
                wm.bary.push_back(std::clamp(l3, 0.0, 1.0));
                break;
            }
        }
    }
    if (wm.px.empty()) throw std::runtime_error("build_warp_map: empty mask");
    return wm;
}

// Piecewise-affine warp: barycentric mapping of each masked reference pixel
// into src-shape coordinates, bilinear sampling there. Output is mask-major,
// channel-minor.
inline std::vector<double> pa_warp(const MultiImage& img, const Shape& src,
                                   const Shape& ref, const TriMesh& mesh,
                                   const WarpMap& wm) {
    if (src.n_points() != ref.n_points())
        throw std::invalid_argument("pa_warp: shape size mismatch");
    std::vector<double> out(wm.size() * img.channels);
    std::vector<double> samp(img.channels);
    for (size_t i = 0; i < wm.size(); ++i) {
        const Triangle& tr = mesh.triangles[wm.tri[i]];
        const double* b = &wm.bary[3 * i];
        double sx = b[0] * src.x(tr.a) + b[1] * src.x(tr.b) + b[2] * src.x(tr.c);
        double sy = b[0] * src.y(tr.a) + b[1] * src.y(tr.b) + b[2] * src.y(tr.c);
        img.sample_bilinear(sx, sy, samp.data());
        for (int c = 0; c < img.channels; ++c)
            out[i * img.channels + c] = samp[c];
    }
    return out;
}

namespace detail {

inline void gaussian_blur_channel(std::vector<double>& chan, int w, int h,
                                  double sigma) {
    int radius = static_cast<int>(std::ceil(3 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= sum;

    std::vector<double> tmp(chan.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] *
                       chan[static_cast<size_t>(y) * w +
                            std::clamp(x + i, 0, w - 1)];
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] *
                       tmp[static_cast<size_t>(std::clamp(y + i, 0, h - 1)) * w +
                           x];
            chan[static_cast<size_t>(y) * w + x] = acc;
        }
}

}  // namespace detail

inline constexpr int kSiftBins = 8;

// Dense SIFT-like descriptor image: per-pixel gradient orientation
// soft-binned into 8 channels, Gaussian-pooled (sigma 2.5 px) and L2
// normalized per pixel (zero gradient stays zero).
inline MultiImage dense_sift(const GrayImage& img, double sigma = 2.5) {
    if (img.width() < 8 || img.height() < 8)
        throw std::invalid_argument("dense_sift: image must be >= 8x8");
    int w = img.width(), h = img.height();
    std::vector<std::vector<double>> bins(
        kSiftBins, std::vector<double>(static_cast<size_t>(w) * h, 0.0));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = 0.5 * (img.at_clamped(x + 1, y) - img.at_clamped(x - 1, y));
            double gy = 0.5 * (img.at_clamped(x, y + 1) - img.at_clamped(x, y - 1));
            double mag = std::hypot(gx, gy);
            if (mag <= 0) continue;
            double theta = std::atan2(gy, gx);  // [-pi, pi]
            double pos = (theta + M_PI) / (2 * M_PI) * kSiftBins;  // [0, 8]
            int b0 = static_cast<int>(std::floor(pos)) % kSiftBins;
            double frac = pos - std::floor(pos);
            int b1 = (b0 + 1) % kSiftBins;
            bins[b0][static_cast<size_t>(y) * w + x] += mag * (1 - frac);
            bins[b1][static_cast<size_t>(y) * w + x] += mag * frac;
        }
    }
    for (auto& b : bins) detail::gaussian_blur_channel(b, w, h, sigma);

    MultiImage out(w, h, kSiftBins);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double n2 = 0;
            for (int c = 0; c < kSiftBins; ++c) {
                double v = bins[c][static_cast<size_t>(y) * w + x];
                n2 += v * v;
            }
            double nrm = std::sqrt(n2);
            if (nrm > 1e-8)
                for (int c = 0; c < kSiftBins; ++c)
                    out.at(x, y, c) =
                        bins[c][static_cast<size_t>(y) * w + x] / nrm;
        }
    return out;
}

// Bilinearly sampled patch windows around each landmark, concatenated
// landmark-major, row-major, channel-minor.
inline std::vector<double> patch_extract(const MultiImage& img,
                                         const Shape& shape, int patch = 17) {
    if (patch % 2 == 0)
        throw std::invalid_argument("patch_extract: patch size must be odd");
    int half = patch / 2;
    int n = shape.n_points();
    std::vector<double> out;
    out.reserve(static_cast<size_t>(n) * patch * patch * img.channels);
    std::vector<double> samp(img.channels);
    for (int l = 0; l < n; ++l) {
        double lx = shape.x(l), ly = shape.y(l);
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
                img.sample_bilinear(lx + dx, ly + dy, samp.data());
                out.insert(out.end(), samp.begin(), samp.end());
            }
    }
    return out;
}

}  // namespace vsr
