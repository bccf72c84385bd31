#pragma once

// Landmark shape statistics: pairwise Procrustes alignment, Generalized
// Procrustes Analysis, PCA and the linear shape model with a prepended
// 4-mode similarity basis.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsr {

// 2N landmark coordinates serialized [x1,y1,...,xN,yN].
struct Shape {
    std::vector<double> coords;

    Shape() = default;
    explicit Shape(std::vector<double> c) : coords(std::move(c)) {
        if (coords.size() % 2 != 0)
            throw std::invalid_argument("Shape: odd coordinate count");
    }
    explicit Shape(const Eigen::VectorXd& v)
        : coords(v.data(), v.data() + v.size()) {
        if (coords.size() % 2 != 0)
            throw std::invalid_argument("Shape: odd coordinate count");
    }

    int n_points() const { return static_cast<int>(coords.size() / 2); }
    double x(int i) const { return coords[2 * i]; }
    double y(int i) const { return coords[2 * i + 1]; }
    void set(int i, double px, double py) {
        coords[2 * i] = px;
        coords[2 * i + 1] = py;
    }

    Eigen::Map<const Eigen::VectorXd> vec() const {
        return {coords.data(), static_cast<Eigen::Index>(coords.size())};
    }

    std::pair<double, double> centroid() const {
        double cx = 0, cy = 0;
        int n = n_points();
        for (int i = 0; i < n; ++i) {
            cx += x(i);
            cy += y(i);
        }
        return {cx / n, cy / n};
    }

    // Frobenius norm of the centered configuration.
    double centered_norm() const {
        auto [cx, cy] = centroid();
        double s = 0;
        for (int i = 0; i < n_points(); ++i) {
            double dx = x(i) - cx, dy = y(i) - cy;
            s += dx * dx + dy * dy;
        }
        return std::sqrt(s);
    }

    // Axis-aligned bounding box as (min_x, min_y, max_x, max_y).
    std::array<double, 4> bbox() const {
        std::array<double, 4> b{coords[0], coords[1], coords[0], coords[1]};
        for (int i = 1; i < n_points(); ++i) {
            b[0] = std::min(b[0], x(i));
            b[1] = std::min(b[1], y(i));
            b[2] = std::max(b[2], x(i));
            b[3] = std::max(b[3], y(i));
        }
        return b;
    }

    double bbox_diagonal() const {
        auto b = bbox();
        return std::hypot(b[2] - b[0], b[3] - b[1]);
    }

    Shape subset(const std::vector<int>& indices) const {
        Shape out;
        out.coords.reserve(indices.size() * 2);
        for (int i : indices) {
            out.coords.push_back(x(i));
            out.coords.push_back(y(i));
        }
        return out;
    }
};

struct SimilarityTransform {
    double scale = 1.0;
    double rotation = 0.0;  // radians
    double tx = 0.0;
    double ty = 0.0;

    Shape apply(const Shape& s) const {
        double c = scale * std::cos(rotation);
        double d = scale * std::sin(rotation);
        Shape out = s;
        for (int i = 0; i < s.n_points(); ++i)
            out.set(i, c * s.x(i) - d * s.y(i) + tx,
                    d * s.x(i) + c * s.y(i) + ty);
        return out;
    }
};

// Closed-form least-squares similarity mapping src toward dst, via the
// centered complex cross-covariance.
inline SimilarityTransform align_pair(const Shape& src, const Shape& dst) {
    if (src.n_points() != dst.n_points())
        throw std::invalid_argument("align_pair: point count mismatch");
    int n = src.n_points();
    auto [sx, sy] = src.centroid();
    auto [dx, dy] = dst.centroid();
    std::complex<double> num(0, 0);
    double den = 0;
    for (int i = 0; i < n; ++i) {
        std::complex<double> zs(src.x(i) - sx, src.y(i) - sy);
        std::complex<double> zd(dst.x(i) - dx, dst.y(i) - dy);
        num += std::conj(zs) * zd;
        den += std::norm(zs);
    }
    if (den <= 1e-14)
        throw std::invalid_argument("align_pair: degenerate source shape");
    std::complex<double> lambda = num / den;
    SimilarityTransform t;
    t.scale = std::abs(lambda);
    t.rotation = std::arg(lambda);
    double c = t.scale * std::cos(t.rotation);
    double s = t.scale * std::sin(t.rotation);
    t.tx = dx - (c * sx - s * sy);
    t.ty = dy - (s * sx + c * sy);
    return t;
}

struct GpaResult {
    Shape mean;  // unit centered norm, zero centroid
    std::vector<Shape> aligned;
    int iterations = 0;
};

inline Shape normalize_shape(const Shape& s) {
    auto [cx, cy] = s.centroid();
    double nrm = s.centered_norm();
    if (nrm <= 1e-14)
        throw std::invalid_argument("normalize_shape: degenerate shape");
    Shape out = s;
    for (int i = 0; i < s.n_points(); ++i)
        out.set(i, (s.x(i) - cx) / nrm, (s.y(i) - cy) / nrm);
    return out;
}

// Generalized Procrustes Analysis: align-to-mean / recompute-mean until the
// mean stops moving (1e-7, max 100 iterations).
inline GpaResult gpa(const std::vector<Shape>& shapes) {
    if (shapes.size() < 2)
        throw std::invalid_argument("gpa: need at least 2 shapes");
    int n = shapes[0].n_points();
    for (const auto& s : shapes)
        if (s.n_points() != n)
            throw std::invalid_argument("gpa: point count mismatch");

    GpaResult res;
    res.mean = normalize_shape(shapes[0]);
    res.aligned = shapes;
    for (int it = 0; it < 100; ++it) {
        res.iterations = it + 1;
        for (size_t k = 0; k < shapes.size(); ++k)
            res.aligned[k] = align_pair(shapes[k], res.mean).apply(shapes[k]);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(2 * n);
        for (const auto& s : res.aligned) acc += s.vec();
        acc /= static_cast<double>(shapes.size());
        Shape new_mean = normalize_shape(Shape(acc));
        // Fix the rotation/scale gauge by aligning the new mean to the old.
        new_mean = align_pair(new_mean, res.mean).apply(new_mean);
        new_mean = normalize_shape(new_mean);
        double delta = (new_mean.vec() - res.mean.vec()).norm();
        res.mean = new_mean;
        if (delta < 1e-7) break;
    }
    for (size_t k = 0; k < shapes.size(); ++k)
        res.aligned[k] = align_pair(shapes[k], res.mean).apply(shapes[k]);
    return res;
}

struct PcaResult {
    Eigen::VectorXd mean;
    Eigen::MatrixXd eigenvectors;  // D x k, columns orthonormal
    Eigen::VectorXd eigenvalues;   // k, descending
    double kept_variance_ratio = 0.0;
    bool degenerate = false;  // zero total variance
};

// PCA via the Gram matrix when samples < dimensions.
inline PcaResult pca_fit(const std::vector<Eigen::VectorXd>& data,
                         int max_components, double variance_cap = 1.0) {
    if (data.size() < 2)
        throw std::invalid_argument("pca_fit: need at least 2 samples");
    Eigen::Index dim = data[0].size();
    Eigen::Index m = static_cast<Eigen::Index>(data.size());
    PcaResult res;
    res.mean = Eigen::VectorXd::Zero(dim);
    for (const auto& v : data) res.mean += v;
    res.mean /= static_cast<double>(m);

    Eigen::MatrixXd centered(dim, m);
    for (Eigen::Index j = 0; j < m; ++j) centered.col(j) = data[j] - res.mean;
    double denom = static_cast<double>(m - 1);

    Eigen::VectorXd all_vals;
    Eigen::MatrixXd all_vecs;
    if (m - 1 < dim) {
        Eigen::MatrixXd gram = centered.transpose() * centered / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        // ascending order from Eigen; reverse
        Eigen::VectorXd vals = es.eigenvalues().reverse();
        Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
        all_vals = vals;
        all_vecs.resize(dim, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            double lam = vals(j);
            if (lam > 1e-12) {
                all_vecs.col(j) =
                    centered * vecs.col(j) / std::sqrt(lam * denom);
            } else {
                all_vecs.col(j).setZero();
            }
        }
    } else {
        Eigen::MatrixXd cov = centered * centered.transpose() / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        all_vals = es.eigenvalues().reverse();
        all_vecs = es.eigenvectors().rowwise().reverse();
    }

    double total = 0.0;
    for (Eigen::Index i = 0; i < all_vals.size(); ++i)
        total += std::max(0.0, all_vals(i));
    if (total <= 1e-14) {
        res.degenerate = true;
        res.eigenvectors.resize(dim, 0);
        res.eigenvalues.resize(0);
        res.kept_variance_ratio = 0.0;
        return res;
    }

    int rank = 0;
    for (Eigen::Index i = 0; i < all_vals.size(); ++i)
        if (all_vals(i) > 1e-12 * total) ++rank;
    int k = std::min(max_components, rank);
    if (variance_cap < 1.0) {
        double cum = 0.0;
        int kc = 0;
        for (int i = 0; i < k; ++i) {
            cum += all_vals(i);
            ++kc;
            if (cum / total >= variance_cap) break;
        }
        k = kc;
    }
    res.eigenvectors = all_vecs.leftCols(k);
    res.eigenvalues = all_vals.head(k);
    res.kept_variance_ratio = res.eigenvalues.sum() / total;
    return res;
}

// Linear shape model: mean + orthonormal [similarity | PCA] basis.
struct LinearShapeModel {
    Shape mean_shape;               // unit centered norm
    Eigen::MatrixXd similarity_basis;  // 2N x 4
    Eigen::MatrixXd eigenvectors;      // 2N x n
    Eigen::VectorXd eigenvalues;       // n, descending
    double kept_variance_ratio = 0.0;

    int n_points() const { return mean_shape.n_points(); }
    int n_components() const { return static_cast<int>(eigenvectors.cols()); }
};

// Orthonormal basis spanning the linearized similarity transforms of the
// mean shape: scaling, in-plane rotation and the two translations.
inline Eigen::MatrixXd build_similarity_basis(const Shape& mean) {
    int n = mean.n_points();
    Eigen::MatrixXd b(2 * n, 4);
    for (int i = 0; i < n; ++i) {
        b(2 * i, 0) = mean.x(i);
        b(2 * i + 1, 0) = mean.y(i);
        b(2 * i, 1) = -mean.y(i);
        b(2 * i + 1, 1) = mean.x(i);
        b(2 * i, 2) = 1.0;
        b(2 * i + 1, 2) = 0.0;
        b(2 * i, 3) = 0.0;
        b(2 * i + 1, 3) = 1.0;
    }
    // Gram-Schmidt
    for (int c = 0; c < 4; ++c) {
        for (int p = 0; p < c; ++p) b.col(c) -= b.col(p).dot(b.col(c)) * b.col(p);
        double nrm = b.col(c).norm();
        if (nrm <= 1e-12)
            throw std::runtime_error("similarity basis degenerate");
        b.col(c) /= nrm;
    }
    return b;
}

inline LinearShapeModel build_shape_model(const std::vector<Shape>& shapes,
                                          int max_components) {
    GpaResult g = gpa(shapes);
    LinearShapeModel model;
    model.mean_shape = g.mean;
    model.similarity_basis = build_similarity_basis(g.mean);
    // Project the similarity modes out of the aligned residuals before PCA
    // so the combined basis stays orthonormal.
    std::vector<Eigen::VectorXd> data;
    data.reserve(g.aligned.size());
    for (const auto& s : g.aligned) {
        Eigen::VectorXd r = s.vec() - g.mean.vec();
        r -= model.similarity_basis * (model.similarity_basis.transpose() * r);
        data.push_back(g.mean.vec() + r);
    }
    PcaResult pca = pca_fit(data, max_components);
    model.eigenvectors = pca.eigenvectors;
    model.eigenvalues = pca.eigenvalues;
    model.kept_variance_ratio = pca.kept_variance_ratio;
    // Re-orthonormalize against the similarity block.
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

struct ShapeParams {
    Eigen::VectorXd p_sim;  // 4
    Eigen::VectorXd p;      // n
};

inline ShapeParams shape_to_params(const LinearShapeModel& model,
                                   const Shape& shape) {
    if (shape.n_points() != model.n_points())
        throw std::invalid_argument("shape_to_params: point count mismatch");
    Eigen::VectorXd r = shape.vec() - model.mean_shape.vec();
    ShapeParams out;
    out.p_sim = model.similarity_basis.transpose() * r;
    out.p = model.eigenvectors.transpose() * r;
    return out;
}

inline Shape params_to_shape(const LinearShapeModel& model,
                             const Eigen::VectorXd& p_sim,
                             const Eigen::VectorXd& p) {
    if (p_sim.size() != 4 || p.size() != model.eigenvectors.cols())
        throw std::invalid_argument("params_to_shape: parameter size mismatch");
    Eigen::VectorXd v = model.mean_shape.vec() + model.similarity_basis * p_sim +
                        model.eigenvectors * p;
    return Shape(v);
}

// iBUG-style "pts" landmark file.
inline Shape read_pts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.rfind("n_points:", 0) == 0)
            n = std::stoi(line.substr(9));
        else if (!line.empty() && line[0] == '{')
            break;
    }
    if (n <= 0) throw std::runtime_error(path + ": bad pts header");
    Shape s;
    s.coords.reserve(2 * n);
    for (int i = 0; i < n; ++i) {
        double px, py;
        if (!(in >> px >> py))
            throw std::runtime_error(path + ": truncated pts file");
        s.coords.push_back(px);
        s.coords.push_back(py);
    }
    return s;
}

struct LandmarkFrame {
    Shape shape;
    double confidence = 1.0;
};

// CSV landmark file: one row per frame, 2N coordinates then a confidence.
inline std::vector<LandmarkFrame> read_landmark_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<LandmarkFrame> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() < 3 || vals.size() % 2 == 0)
            throw std::runtime_error(path + ": row must be 2N coords + confidence");
        LandmarkFrame f;
        f.confidence = vals.back();
        vals.pop_back();
        f.shape = Shape(std::move(vals));
        out.push_back(std::move(f));
    }
    return out;
}

inline void write_landmark_csv(const std::string& path,
                               const std::vector<LandmarkFrame>& frames) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[32];
    for (const auto& f : frames) {
        for (double v : f.shape.coords) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << ',';
        }
        std::snprintf(buf, sizeof(buf), "%.17g", f.confidence);
        out << buf << '\n';
    }
}

}  // namespace vsr
