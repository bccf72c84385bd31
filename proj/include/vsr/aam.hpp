#pragma once

// Active Appearance Model assembly and use: training-frame sampling,
// multi-scale model building over the Holistic/Patch x no-op/SIFT matrix
// and face/chin/lips parts, project-out inverse-compositional Gauss-Newton
// fitting with an exact appearance solve (the Wiberg alternation), and AAM
// feature extraction.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsr/appearance.hpp"
#include "vsr/dct.hpp"
#include "vsr/features.hpp"
#include "vsr/image.hpp"
#include "vsr/serialize.hpp"
#include "vsr/shape.hpp"

namespace vsr {

enum class WarpKind { holistic, patch };
enum class Descriptor { noop, sift };
enum class FacePart { face, chin, lips };

inline std::string to_string(WarpKind w) {
    return w == WarpKind::holistic ? "holistic" : "patch";
}
inline std::string to_string(Descriptor d) {
    return d == Descriptor::noop ? "no-op" : "sift";
}
inline std::string to_string(FacePart p) {
    switch (p) {
        case FacePart::face: return "face";
        case FacePart::chin: return "chin";
        default: return "lips";
    }
}

// 0-based landmark subsets of the 68-point markup.
inline std::vector<int> part_landmark_indices(FacePart part) {
    std::vector<int> idx;
    if (part == FacePart::face) {
        for (int i = 0; i < 68; ++i) idx.push_back(i);
    } else if (part == FacePart::chin) {
        for (int i = 0; i <= 16; ++i) idx.push_back(i);   // jaw
        for (int i = 48; i <= 67; ++i) idx.push_back(i);  // mouth
    } else {
        for (int i = 48; i <= 67; ++i) idx.push_back(i);  // lips
    }
    return idx;
}

struct AamConfig {
    WarpKind warp_kind = WarpKind::patch;
    Descriptor descriptor = Descriptor::sift;
    FacePart part = FacePart::face;
    std::vector<double> scales;   // empty -> part default
    std::vector<int> iterations;  // empty -> schedule default
    int n_shape = 40;             // includes the 4 similarity parameters
    int n_appearance = 150;
    int patch = 17;
    double diagonal_norm = 150.0;
    bool gray_holistic = false;  // grayscale no-op appearance (speed mode)
    bool cascaded = false;       // part model fed from a face fit

    void finalize() {
        if (scales.empty())
            scales = part == FacePart::lips ? std::vector<double>{0.5, 1.0}
                                            : std::vector<double>{0.25, 0.5, 1.0};
        if (iterations.empty()) {
            iterations.assign(scales.size(), 10);
            iterations.back() = 5;
            if (warp_kind == WarpKind::holistic && descriptor == Descriptor::noop)
                iterations.front() = 20;
            if (cascaded || part != FacePart::face)
                for (auto& it : iterations) it += 10;
        }
        validate();
    }

    void validate() const {
        if (scales.empty() || scales.back() != 1.0 ||
            !std::is_sorted(scales.begin(), scales.end()))
            throw std::invalid_argument("AamConfig: scales must ascend to 1.0");
        if (iterations.size() != scales.size())
            throw std::invalid_argument(
                "AamConfig: one iteration count per scale required");
        if (n_shape <= 4)
            throw std::invalid_argument("AamConfig: n_shape must exceed 4");
        if (patch % 2 == 0)
            throw std::invalid_argument("AamConfig: patch size must be odd");
    }

    int n_shape_pca() const { return n_shape - 4; }
    int channels() const {
        if (descriptor == Descriptor::sift) return kSiftBins;
        return gray_holistic ? 1 : 3;
    }
};

struct AamScaleModel {
    double scale = 1.0;
    LinearShapeModel shape;  // reference frame, pixel units
    TriMesh mesh;            // holistic only
    WarpMap warp;            // holistic only
    Eigen::VectorXd app_mean;
    Eigen::MatrixXd app_basis;  // L*C x m, orthonormal columns
    Eigen::VectorXd app_eigenvalues;
    double app_kept_variance = 0.0;
    Eigen::MatrixXd sd;     // L*C x P project-out steepest descent images
    Eigen::MatrixXd h_inv;  // P x P Gauss-Newton Hessian inverse

    int n_params() const { return 4 + static_cast<int>(shape.eigenvectors.cols()); }
    Eigen::MatrixXd full_basis() const {
        Eigen::MatrixXd b(shape.similarity_basis.rows(), n_params());
        b << shape.similarity_basis, shape.eigenvectors;
        return b;
    }
};

struct Aam {
    AamConfig config;
    std::vector<int> part_indices;  // into the 68-point markup
    std::vector<AamScaleModel> scales;
};

struct FitResult {
    Shape shape;                    // final shape, input-image coordinates
    Eigen::VectorXd p_sim;          // 4
    Eigen::VectorXd p;              // shape PCA parameters
    Eigen::VectorXd c;              // appearance parameters
    std::vector<double> cost_trace;  // project-out cost per evaluation
    std::vector<int> iterations_per_scale;
    bool converged = false;
    bool clamped_sampling = false;  // init partially outside the image
};

struct FrameRecord {
    std::string frame_id;  // usually the frame image path
    Shape landmarks;       // 68-point markup
    double confidence = 1.0;
    std::string sentence_id;
    std::string speaker_id;
};

struct SamplerConfig {
    double conf_threshold = 0.94;
    double fraction = 0.05;  // in [0.03, 0.06]
    int sentences_per_speaker = 5;
    uint64_t seed = 0;
};

// Mean vertical opening over the inner-lip pairs 62-68, 63-67, 64-66
// (1-based markup).
inline double lip_opening(const Shape& s) {
    static const int pairs[3][2] = {{61, 67}, {62, 66}, {63, 65}};
    double acc = 0;
    for (auto& pr : pairs) acc += std::abs(s.y(pr[1]) - s.y(pr[0]));
    return acc / 3.0;
}

// Confidence filter, per-speaker sentence subsampling, lip-opening sort and
// evenly spaced rank selection.
inline std::vector<FrameRecord> sample_training_frames(
    const std::vector<FrameRecord>& records, const SamplerConfig& cfg = {}) {
    if (records.empty())
        throw std::invalid_argument("sample_training_frames: no records");
    std::vector<FrameRecord> kept;
    for (const auto& r : records)
        if (r.confidence >= cfg.conf_threshold) kept.push_back(r);
    if (kept.empty())
        throw std::runtime_error(
            "sample_training_frames: no frames above confidence " +
            std::to_string(cfg.conf_threshold) + " (had " +
            std::to_string(records.size()) + ")");

    // Pick <= sentences_per_speaker sentences per speaker, seeded.
    std::map<std::string, std::vector<std::string>> speaker_sentences;
    for (const auto& r : kept) {
        auto& v = speaker_sentences[r.speaker_id];
        if (std::find(v.begin(), v.end(), r.sentence_id) == v.end())
            v.push_back(r.sentence_id);
    }
    std::map<std::string, std::vector<std::string>> chosen;
    for (auto& [spk, sents] : speaker_sentences) {
        std::sort(sents.begin(), sents.end());
        std::mt19937_64 rng(cfg.seed ^ std::hash<std::string>{}(spk));
        std::shuffle(sents.begin(), sents.end(), rng);
        if (static_cast<int>(sents.size()) > cfg.sentences_per_speaker)
            sents.resize(cfg.sentences_per_speaker);
        chosen[spk] = sents;
    }
    std::vector<FrameRecord> survivors;
    for (const auto& r : kept) {
        const auto& sents = chosen[r.speaker_id];
        if (std::find(sents.begin(), sents.end(), r.sentence_id) != sents.end())
            survivors.push_back(r);
    }

    std::stable_sort(survivors.begin(), survivors.end(),
                     [](const FrameRecord& a, const FrameRecord& b) {
                         return lip_opening(a.landmarks) <
                                lip_opening(b.landmarks);
                     });
    size_t count = survivors.size();
    size_t k = static_cast<size_t>(
        std::ceil(cfg.fraction * static_cast<double>(count)));
    k = std::max<size_t>(k, 1);
    std::vector<FrameRecord> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i)
        out.push_back(survivors[i * count / k]);
    return out;
}

namespace detail {

inline MultiImage make_descriptor(const RgbImage& img, const AamConfig& cfg) {
    if (cfg.descriptor == Descriptor::sift)
        return dense_sift(to_grayscale(img));
    if (cfg.gray_holistic) return MultiImage::from(to_grayscale(img));
    return MultiImage::from(img);
}

inline Shape scale_shape(const Shape& s, double f) {
    Shape out = s;
    for (auto& v : out.coords) v *= f;
    return out;
}

inline std::vector<double> sample_appearance(const AamScaleModel& m,
                                             const AamConfig& cfg,
                                             const MultiImage& desc,
                                             const Shape& shape_s) {
    if (cfg.warp_kind == WarpKind::holistic)
        return pa_warp(desc, shape_s, m.shape.mean_shape, m.mesh, m.warp);
    return patch_extract(desc, shape_s, cfg.patch);
}

// Gradient of the template over the reference-frame sampling domain.
// Holistic: finite differences on the warp-mask grid. Patch: differences
// inside each landmark patch raster.
inline void template_gradient(const AamScaleModel& m, const AamConfig& cfg,
                              Eigen::MatrixXd& gx, Eigen::MatrixXd& gy) {
    int ch = cfg.channels();
    Eigen::Index L = m.app_mean.size() / ch;
    gx.resize(L, ch);
    gy.resize(L, ch);
    auto val = [&](Eigen::Index pix, int c) {
        return m.app_mean(pix * ch + c);
    };
    if (cfg.warp_kind == WarpKind::holistic) {
        const WarpMap& wm = m.warp;
        for (Eigen::Index i = 0; i < L; ++i) {
            int x = wm.px[i], y = wm.py[i];
            int xm = wm.mask_index(x - 1, y), xp = wm.mask_index(x + 1, y);
            int ym = wm.mask_index(x, y - 1), yp = wm.mask_index(x, y + 1);
            for (int c = 0; c < ch; ++c) {
                double dx = 0, dy = 0;
                if (xm >= 0 && xp >= 0)
                    dx = 0.5 * (val(xp, c) - val(xm, c));
                else if (xp >= 0)
                    dx = val(xp, c) - val(i, c);
                else if (xm >= 0)
                    dx = val(i, c) - val(xm, c);
                if (ym >= 0 && yp >= 0)
                    dy = 0.5 * (val(yp, c) - val(ym, c));
                else if (yp >= 0)
                    dy = val(yp, c) - val(i, c);
                else if (ym >= 0)
                    dy = val(i, c) - val(ym, c);
                gx(i, c) = dx;
                gy(i, c) = dy;
            }
        }
    } else {
        int ps = cfg.patch;
        int per = ps * ps;
        for (Eigen::Index i = 0; i < L; ++i) {
            Eigen::Index in_patch = i % per;
            Eigen::Index row0 = i - in_patch;
            int px = static_cast<int>(in_patch % ps);
            int py = static_cast<int>(in_patch / ps);
            for (int c = 0; c < ch; ++c) {
                double dx, dy;
                if (px > 0 && px < ps - 1)
                    dx = 0.5 * (val(row0 + py * ps + px + 1, c) -
                                val(row0 + py * ps + px - 1, c));
                else if (px == 0)
                    dx = val(row0 + py * ps + 1, c) - val(i, c);
                else
                    dx = val(i, c) - val(row0 + py * ps + px - 1, c);
                if (py > 0 && py < ps - 1)
                    dy = 0.5 * (val(row0 + (py + 1) * ps + px, c) -
                                val(row0 + (py - 1) * ps + px, c));
                else if (py == 0)
                    dy = val(row0 + ps + px, c) - val(i, c);
                else
                    dy = val(i, c) - val(row0 + (py - 1) * ps + px, c);
                gx(i, c) = dx;
                gy(i, c) = dy;
            }
        }
    }
}

// Steepest-descent images on the project-out residual and the Gauss-Newton
// Hessian inverse.
inline void compute_fit_precomp(AamScaleModel& m, const AamConfig& cfg) {
    int ch = cfg.channels();
    Eigen::Index L = m.app_mean.size() / ch;
    int P = m.n_params();
    Eigen::MatrixXd basis = m.full_basis();  // 2N x P
    Eigen::MatrixXd gx, gy;
    template_gradient(m, cfg, gx, gy);

    Eigen::MatrixXd J(m.app_mean.size(), P);
    if (cfg.warp_kind == WarpKind::holistic) {
        const WarpMap& wm = m.warp;
        for (Eigen::Index i = 0; i < L; ++i) {
            const Triangle& t = m.mesh.triangles[wm.tri[i]];
            const double* b = &wm.bary[3 * i];
            for (int j = 0; j < P; ++j) {
                double dwx = b[0] * basis(2 * t.a, j) +
                             b[1] * basis(2 * t.b, j) +
                             b[2] * basis(2 * t.c, j);
                double dwy = b[0] * basis(2 * t.a + 1, j) +
                             b[1] * basis(2 * t.b + 1, j) +
                             b[2] * basis(2 * t.c + 1, j);
                for (int c = 0; c < ch; ++c)
                    J(i * ch + c, j) = gx(i, c) * dwx + gy(i, c) * dwy;
            }
        }
    } else {
        int per = cfg.patch * cfg.patch;
        for (Eigen::Index i = 0; i < L; ++i) {
            int lm = static_cast<int>(i / per);
            for (int j = 0; j < P; ++j) {
                double dwx = basis(2 * lm, j);
                double dwy = basis(2 * lm + 1, j);
                for (int c = 0; c < ch; ++c)
                    J(i * ch + c, j) = gx(i, c) * dwx + gy(i, c) * dwy;
            }
        }
    }

    // Project out the appearance subspace.
    if (m.app_basis.cols() > 0)
        J -= m.app_basis * (m.app_basis.transpose() * J);
    m.sd = J;
    Eigen::MatrixXd H = J.transpose() * J;
    H.diagonal().array() += 1e-10 * std::max(1.0, H.trace());
    m.h_inv = H.ldlt().solve(Eigen::MatrixXd::Identity(P, P));
}

// Pixel-unit shape model in the reference frame: GPA in normalized units,
// rescaled so the mean bbox diagonal matches target_diag, translated so the
// mask clears the sampling margin.
inline LinearShapeModel build_shape_model_px(const std::vector<Shape>& shapes,
                                             int max_components,
                                             double target_diag, double margin) {
    GpaResult g = gpa(shapes);
    double alpha = target_diag / g.mean.bbox_diagonal();
    Shape ref = scale_shape(g.mean, alpha);
    auto bb = ref.bbox();
    for (int i = 0; i < ref.n_points(); ++i)
        ref.set(i, ref.x(i) - bb[0] + margin, ref.y(i) - bb[1] + margin);

    LinearShapeModel model;
    model.mean_shape = ref;
    // Similarity basis about the centered mean: translate-to-centroid,
    // build, and the translation modes absorb the offset.
    auto [cx, cy] = ref.centroid();
    Shape centered = ref;
    for (int i = 0; i < ref.n_points(); ++i)
        centered.set(i, ref.x(i) - cx, ref.y(i) - cy);
    model.similarity_basis = build_similarity_basis(centered);

    std::vector<Eigen::VectorXd> data;
    data.reserve(shapes.size());
    for (const auto& s : shapes) {
        Shape a = align_pair(s, ref).apply(s);
        Eigen::VectorXd r = a.vec() - ref.vec();
        r -= model.similarity_basis * (model.similarity_basis.transpose() * r);
        data.push_back(r);
    }
    PcaResult pca = pca_fit(data, max_components);
    model.eigenvectors = pca.eigenvectors;
    model.eigenvalues = pca.eigenvalues;
    model.kept_variance_ratio = pca.kept_variance_ratio;
    for (int c = 0; c < model.eigenvectors.cols(); ++c) {
        Eigen::VectorXd v = model.eigenvectors.col(c);
        v -= model.similarity_basis * (model.similarity_basis.transpose() * v);
        for (int p = 0; p < c; ++p)
            v -= model.eigenvectors.col(p).dot(v) * model.eigenvectors.col(p);
        double nrm = v.norm();
        if (nrm > 1e-10) model.eigenvectors.col(c) = v / nrm;
    }
    return model;
}

}  // namespace detail

struct KeptVarianceRow {
    double scale;
    double shape_kept;
    double appearance_kept;
};

inline std::vector<KeptVarianceRow> kept_variance_report(const Aam& aam) {
    std::vector<KeptVarianceRow> rows;
    for (const auto& m : aam.scales)
        rows.push_back({m.scale, m.shape.kept_variance_ratio,
                        m.app_kept_variance});
    return rows;
}

// Trains one AAM over the configured scale pyramid. `shapes` are full
// 68-point markups; the part subset is taken internally.
inline Aam train_aam(const std::vector<RgbImage>& images,
                     const std::vector<Shape>& shapes, AamConfig config) {
    if (images.size() != shapes.size() || images.size() < 2)
        throw std::invalid_argument("train_aam: need >= 2 image/shape pairs");
    config.finalize();
    Aam aam;
    aam.config = config;
    aam.part_indices = part_landmark_indices(config.part);

    std::vector<Shape> part_shapes;
    part_shapes.reserve(shapes.size());
    for (const auto& s : shapes) {
        if (s.n_points() < 68)
            throw std::invalid_argument("train_aam: shapes must have 68 points");
        part_shapes.push_back(s.subset(aam.part_indices));
    }

    double margin = config.patch + 2.0;
    for (size_t si = 0; si < config.scales.size(); ++si) {
        double scale = config.scales[si];
        double target = config.diagonal_norm * scale;

        std::vector<Shape> scaled_shapes;
        std::vector<RgbImage> scaled_images;
        scaled_shapes.reserve(images.size());
        scaled_images.reserve(images.size());
        for (size_t k = 0; k < images.size(); ++k) {
            double f = target / part_shapes[k].bbox_diagonal();
            int w = std::max(2, static_cast<int>(std::lround(f * images[k].width())));
            int h = std::max(2, static_cast<int>(std::lround(f * images[k].height())));
            scaled_images.push_back(resize_cubic(images[k], w, h));
            scaled_shapes.push_back(detail::scale_shape(part_shapes[k], f));
        }

        AamScaleModel m;
        m.scale = scale;
        m.shape = detail::build_shape_model_px(scaled_shapes,
                                               config.n_shape_pca(), target,
                                               margin);
        if (config.warp_kind == WarpKind::holistic) {
            m.mesh = delaunay(m.shape.mean_shape);
            m.warp = build_warp_map(m.shape.mean_shape, m.mesh);
        }

        std::vector<Eigen::VectorXd> samples;
        samples.reserve(images.size());
        for (size_t k = 0; k < images.size(); ++k) {
            MultiImage desc = detail::make_descriptor(scaled_images[k], config);
            auto vec = detail::sample_appearance(m, config, desc,
                                                 scaled_shapes[k]);
            samples.push_back(Eigen::Map<Eigen::VectorXd>(
                vec.data(), static_cast<Eigen::Index>(vec.size())));
        }
        PcaResult app = pca_fit(samples, config.n_appearance);
        if (app.degenerate)
            throw std::runtime_error(
                "train_aam: degenerate appearance PCA (identical frames?)");
        m.app_mean = app.mean;
        m.app_basis = app.eigenvectors;
        m.app_eigenvalues = app.eigenvalues;
        m.app_kept_variance = app.kept_variance_ratio;
        detail::compute_fit_precomp(m, config);
        aam.scales.push_back(std::move(m));
    }
    return aam;
}

// Similarity-aligns the full-scale mean shape with a face bounding box.
inline Shape init_from_bbox(const Shape& model_mean, const Rect& face_box) {
    if (!face_box.valid())
        throw std::invalid_argument("init_from_bbox: empty box");
    auto bb = model_mean.bbox();
    double mw = bb[2] - bb[0], mh = bb[3] - bb[1];
    double mdiag = std::hypot(mw, mh);
    double bdiag = std::hypot(static_cast<double>(face_box.w),
                              static_cast<double>(face_box.h));
    double s = bdiag / mdiag;
    double mcx = (bb[0] + bb[2]) / 2, mcy = (bb[1] + bb[3]) / 2;
    double bcx = face_box.x + face_box.w / 2.0;
    double bcy = face_box.y + face_box.h / 2.0;
    Shape out = model_mean;
    for (int i = 0; i < out.n_points(); ++i)
        out.set(i, (model_mean.x(i) - mcx) * s + bcx,
                (model_mean.y(i) - mcy) * s + bcy);
    return out;
}

// Part initialization: the part's landmark subset of a finished face fit.
inline Shape init_part_from_face(const FitResult& face_fit, FacePart part) {
    if (face_fit.shape.n_points() != 68)
        throw std::invalid_argument("init_part_from_face: face fit required");
    return face_fit.shape.subset(part_landmark_indices(part));
}

namespace detail {

// Inverse composition for piecewise-affine warps, Matthews-Baker style:
// reference landmarks displaced by the inverted increment are pushed
// through the current warp, averaging the affine maps of the triangles
// adjacent to each vertex.
inline Shape compose_holistic(const AamScaleModel& m, const Shape& current,
                              const Eigen::VectorXd& inc_ref) {
    const Shape& ref = m.shape.mean_shape;
    int n = ref.n_points();
    std::vector<std::vector<int>> adjacent(n);
    for (size_t t = 0; t < m.mesh.triangles.size(); ++t) {
        const Triangle& tr = m.mesh.triangles[t];
        adjacent[tr.a].push_back(static_cast<int>(t));
        adjacent[tr.b].push_back(static_cast<int>(t));
        adjacent[tr.c].push_back(static_cast<int>(t));
    }
    Shape out = current;
    for (int l = 0; l < n; ++l) {
        double qx = inc_ref(2 * l), qy = inc_ref(2 * l + 1);
        if (adjacent[l].empty()) continue;
        double ax = 0, ay = 0;
        for (int t : adjacent[l]) {
            const Triangle& tr = m.mesh.triangles[t];
            double rax = ref.x(tr.a), ray = ref.y(tr.a);
            double rbx = ref.x(tr.b), rby = ref.y(tr.b);
            double rcx = ref.x(tr.c), rcy = ref.y(tr.c);
            double det = tri_area2(rax, ray, rbx, rby, rcx, rcy);
            double l1 = tri_area2(qx, qy, rbx, rby, rcx, rcy) / det;
            double l2 = tri_area2(rax, ray, qx, qy, rcx, rcy) / det;
            double l3 = 1 - l1 - l2;
            ax += l1 * current.x(tr.a) + l2 * current.x(tr.b) +
                  l3 * current.x(tr.c);
            ay += l1 * current.y(tr.a) + l2 * current.y(tr.b) +
                  l3 * current.y(tr.c);
        }
        out.set(l, ax / adjacent[l].size(), ay / adjacent[l].size());
    }
    return out;
}

}  // namespace detail

// Wiberg inverse-compositional fit: coarse-to-fine, closed-form appearance
// solve plus a Gauss-Newton shape increment on the project-out residual.
inline FitResult fit_wic(const Aam& aam, const RgbImage& image,
                         const Shape& init_shape) {
    const AamConfig& cfg = aam.config;
    if (init_shape.n_points() != aam.scales.back().shape.n_points())
        throw std::invalid_argument("fit_wic: init shape has wrong point count");

    FitResult res;
    double f0 = cfg.diagonal_norm / init_shape.bbox_diagonal();
    Shape shape_full = init_shape;
    {
        auto bb = init_shape.bbox();
        res.clamped_sampling = bb[0] < 0 || bb[1] < 0 ||
                               bb[2] > image.width() || bb[3] > image.height();
    }

    Eigen::VectorXd last_c;
    ShapeParams last_prm;
    size_t last_scale_start = 0;
    for (size_t si = 0; si < aam.scales.size(); ++si) {
        const AamScaleModel& m = aam.scales[si];
        double fs = f0 * m.scale;
        int w = std::max(2, static_cast<int>(std::lround(fs * image.width())));
        int h = std::max(2, static_cast<int>(std::lround(fs * image.height())));
        RgbImage img_s = resize_cubic(image, w, h);
        MultiImage desc = detail::make_descriptor(img_s, cfg);

        Shape shape_s = detail::scale_shape(shape_full, fs);
        ShapeParams prm = shape_to_params(m.shape, shape_s);
        shape_s = params_to_shape(m.shape, prm.p_sim, prm.p);

        last_scale_start = res.cost_trace.size();
        int iters = cfg.iterations[si];
        res.iterations_per_scale.push_back(iters);
        for (int it = 0; it <= iters; ++it) {
            auto sampled = detail::sample_appearance(m, cfg, desc, shape_s);
            Eigen::Map<Eigen::VectorXd> a(sampled.data(),
                                          static_cast<Eigen::Index>(sampled.size()));
            Eigen::VectorXd r = a - m.app_mean;
            Eigen::VectorXd c = m.app_basis.transpose() * r;
            double cost = r.squaredNorm() - c.squaredNorm();
            if (!std::isfinite(cost))
                throw std::runtime_error("fit_wic: non-finite cost at scale " +
                                         std::to_string(m.scale));
            res.cost_trace.push_back(cost);
            last_c = c;
            if (it == iters) break;

            Eigen::VectorXd dp = m.h_inv * (m.sd.transpose() * r);
            if (cfg.warp_kind == WarpKind::patch) {
                Eigen::VectorXd sv =
                    shape_s.vec() - m.full_basis() * dp;
                shape_s = Shape(sv);
            } else {
                Eigen::VectorXd inc_ref =
                    m.shape.mean_shape.vec() - m.full_basis() * dp;
                shape_s = detail::compose_holistic(m, shape_s, inc_ref);
            }
            prm = shape_to_params(m.shape, shape_s);
            shape_s = params_to_shape(m.shape, prm.p_sim, prm.p);
        }
        last_prm = prm;
        shape_full = detail::scale_shape(shape_s, 1.0 / fs);
    }

    res.shape = shape_full;
    res.p_sim = last_prm.p_sim;
    res.p = last_prm.p;
    res.c = last_c;

    size_t n = res.cost_trace.size();
    if (n >= 2) {
        double first = res.cost_trace[last_scale_start];
        double last = res.cost_trace[n - 1];
        double prev = res.cost_trace[n - 2];
        double rel = std::abs(prev - last) / std::max(prev, 1e-12);
        res.converged = last <= first && rel < 1e-4;
    }
    return res;
}

enum class AamFeatureVariant { S, A, SA, dA, SAdA };

inline AamFeatureVariant parse_variant(const std::string& s) {
    if (s == "S") return AamFeatureVariant::S;
    if (s == "A") return AamFeatureVariant::A;
    if (s == "S+A" || s == "SA") return AamFeatureVariant::SA;
    if (s == "dA") return AamFeatureVariant::dA;
    if (s == "S+A+dA" || s == "SAdA") return AamFeatureVariant::SAdA;
    throw std::invalid_argument("unknown AAM feature variant: " + s);
}

inline std::string to_string(AamFeatureVariant v) {
    switch (v) {
        case AamFeatureVariant::S: return "S";
        case AamFeatureVariant::A: return "A";
        case AamFeatureVariant::SA: return "S+A";
        case AamFeatureVariant::dA: return "dA";
        default: return "S+A+dA";
    }
}

// Feature vectors from per-frame fits. The 4 similarity parameters are
// always discarded; dA is the fourth-order first derivative of the
// appearance parameter track.
inline FeatureSequence extract_aam_features(
    const std::vector<FitResult>& fits,
    AamFeatureVariant variant = AamFeatureVariant::SAdA,
    double frame_rate = 30.0) {
    if (fits.empty())
        throw std::invalid_argument("extract_aam_features: no fits");
    Eigen::Index np = fits[0].p.size(), nc = fits[0].c.size();
    for (const auto& f : fits)
        if (f.p.size() != np || f.c.size() != nc)
            throw std::invalid_argument(
                "extract_aam_features: fits from mixed models");

    std::vector<std::vector<double>> c_track;
    bool need_dA =
        variant == AamFeatureVariant::dA || variant == AamFeatureVariant::SAdA;
    std::vector<std::vector<double>> dA;
    if (need_dA) {
        for (const auto& f : fits)
            c_track.emplace_back(f.c.data(), f.c.data() + nc);
        dA = fd_first_derivative(c_track);
    }

    FeatureSequence seq;
    seq.frame_rate = frame_rate;
    seq.kind = "aam-" + to_string(variant);
    for (size_t i = 0; i < fits.size(); ++i) {
        std::vector<double> row;
        auto add_p = [&] {
            row.insert(row.end(), fits[i].p.data(), fits[i].p.data() + np);
        };
        auto add_c = [&] {
            row.insert(row.end(), fits[i].c.data(), fits[i].c.data() + nc);
        };
        switch (variant) {
            case AamFeatureVariant::S: add_p(); break;
            case AamFeatureVariant::A: add_c(); break;
            case AamFeatureVariant::SA: add_p(); add_c(); break;
            case AamFeatureVariant::dA:
                row.insert(row.end(), dA[i].begin(), dA[i].end());
                break;
            case AamFeatureVariant::SAdA:
                add_p();
                add_c();
                row.insert(row.end(), dA[i].begin(), dA[i].end());
                break;
        }
        seq.frames.push_back(std::move(row));
    }
    seq.dim = static_cast<int>(seq.frames[0].size());
    seq.validate();
    return seq;
}

// --- model file (versioned binary) ---

inline constexpr uint32_t kAamMagic = 0x4D414156;  // "VAAM"
inline constexpr uint32_t kAamVersion = 1;

inline void save_aam(const std::string& path, const Aam& aam) {
    BinWriter w(path);
    w.u32(kAamMagic);
    w.u32(kAamVersion);
    const AamConfig& c = aam.config;
    w.i32(static_cast<int>(c.warp_kind));
    w.i32(static_cast<int>(c.descriptor));
    w.i32(static_cast<int>(c.part));
    w.vec_f64(c.scales);
    w.vec_i32(c.iterations);
    w.i32(c.n_shape);
    w.i32(c.n_appearance);
    w.i32(c.patch);
    w.f64(c.diagonal_norm);
    w.i32(c.gray_holistic ? 1 : 0);
    w.i32(c.cascaded ? 1 : 0);
    w.vec_i32(aam.part_indices);
    w.u32(static_cast<uint32_t>(aam.scales.size()));
    for (const auto& m : aam.scales) {
        w.f64(m.scale);
        w.vec_f64(m.shape.mean_shape.coords);
        w.mat(m.shape.similarity_basis);
        w.mat(m.shape.eigenvectors);
        w.evec(m.shape.eigenvalues);
        w.f64(m.shape.kept_variance_ratio);
        std::vector<int> tri_flat;
        for (const auto& t : m.mesh.triangles) {
            tri_flat.push_back(t.a);
            tri_flat.push_back(t.b);
            tri_flat.push_back(t.c);
        }
        w.vec_i32(tri_flat);
        w.vec_i32(m.warp.px);
        w.vec_i32(m.warp.py);
        w.vec_i32(m.warp.tri);
        w.vec_f64(m.warp.bary);
        w.i32(m.warp.grid_x0);
        w.i32(m.warp.grid_y0);
        w.i32(m.warp.grid_w);
        w.i32(m.warp.grid_h);
        w.vec_i32(m.warp.grid);
        w.evec(m.app_mean);
        w.mat(m.app_basis);
        w.evec(m.app_eigenvalues);
        w.f64(m.app_kept_variance);
        w.mat(m.sd);
        w.mat(m.h_inv);
    }
}

inline Aam load_aam(const std::string& path) {
    BinReader r(path);
    if (r.u32() != kAamMagic)
        throw std::runtime_error(path + ": not an AAM model file");
    if (r.u32() != kAamVersion)
        throw std::runtime_error(path + ": unsupported AAM model version");
    Aam aam;
    AamConfig& c = aam.config;
    c.warp_kind = static_cast<WarpKind>(r.i32());
    c.descriptor = static_cast<Descriptor>(r.i32());
    c.part = static_cast<FacePart>(r.i32());
    c.scales = r.vec_f64();
    c.iterations = r.vec_i32();
    c.n_shape = r.i32();
    c.n_appearance = r.i32();
    c.patch = r.i32();
    c.diagonal_norm = r.f64();
    c.gray_holistic = r.i32() != 0;
    c.cascaded = r.i32() != 0;
    aam.part_indices = r.vec_i32();
    uint32_t n_scales = r.u32();
    for (uint32_t i = 0; i < n_scales; ++i) {
        AamScaleModel m;
        m.scale = r.f64();
        m.shape.mean_shape = Shape(r.vec_f64());
        m.shape.similarity_basis = r.mat();
        m.shape.eigenvectors = r.mat();
        m.shape.eigenvalues = r.evec();
        m.shape.kept_variance_ratio = r.f64();
        auto tri_flat = r.vec_i32();
        for (size_t t = 0; t + 2 < tri_flat.size(); t += 3)
            m.mesh.triangles.push_back(
                {tri_flat[t], tri_flat[t + 1], tri_flat[t + 2]});
        m.warp.px = r.vec_i32();
        m.warp.py = r.vec_i32();
        m.warp.tri = r.vec_i32();
        m.warp.bary = r.vec_f64();
        m.warp.grid_x0 = r.i32();
        m.warp.grid_y0 = r.i32();
        m.warp.grid_w = r.i32();
        m.warp.grid_h = r.i32();
        m.warp.grid = r.vec_i32();
        m.app_mean = r.evec();
        m.app_basis = r.mat();
        m.app_eigenvalues = r.evec();
        m.app_kept_variance = r.f64();
        m.sd = r.mat();
        m.h_inv = r.mat();
        aam.scales.push_back(std::move(m));
    }
    return aam;
}

}  // namespace vsr
