#pragma once

// Scoring utilities: transcript alignment with correctness/accuracy,
// normalized landmark error, cumulative error distributions, and CSV/SVG
// report emitters.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsr/shape.hpp"

namespace vsr {

struct AlignmentStats {
    int n = 0;  // reference length
    int hits = 0;
    int substitutions = 0;
    int deletions = 0;
    int insertions = 0;

    double correctness() const {
        return n == 0 ? 0.0
                      : 100.0 * (n - deletions - substitutions) / n;
    }
    double accuracy() const {
        return n == 0 ? 0.0
                      : 100.0 * (n - deletions - substitutions - insertions) /
                            n;
    }

    AlignmentStats& operator+=(const AlignmentStats& o) {
        n += o.n;
        hits += o.hits;
        substitutions += o.substitutions;
        deletions += o.deletions;
        insertions += o.insertions;
        return *this;
    }
};

// Minimum-edit-distance alignment. Unit costs by default; the HTK-style
// weighting (substitution 10, deletion 7, insertion 7) is switchable. On
// cost ties the substitution path is preferred, then deletion.
inline AlignmentStats align_score(const std::vector<std::string>& ref,
                                  const std::vector<std::string>& hyp,
                                  bool htk_weights = false) {
    const int cs = htk_weights ? 10 : 1;
    const int cd = htk_weights ? 7 : 1;
    const int ci = htk_weights ? 7 : 1;
    size_t R = ref.size(), H = hyp.size();
    std::vector<std::vector<int>> cost(R + 1, std::vector<int>(H + 1, 0));
    // 0 = match/sub (diagonal), 1 = deletion (up), 2 = insertion (left)
    std::vector<std::vector<uint8_t>> move(R + 1,
                                           std::vector<uint8_t>(H + 1, 0));
    for (size_t i = 1; i <= R; ++i) {
        cost[i][0] = cost[i - 1][0] + cd;
        move[i][0] = 1;
    }
    for (size_t j = 1; j <= H; ++j) {
        cost[0][j] = cost[0][j - 1] + ci;
        move[0][j] = 2;
    }
    for (size_t i = 1; i <= R; ++i)
        for (size_t j = 1; j <= H; ++j) {
            int diag = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : cs);
            int up = cost[i - 1][j] + cd;
            int left = cost[i][j - 1] + ci;
            int best = diag;
            uint8_t mv = 0;
            if (up < best) {
                best = up;
                mv = 1;
            }
            if (left < best) {
                best = left;
                mv = 2;
            }
            cost[i][j] = best;
            move[i][j] = mv;
        }

    AlignmentStats stats;
    stats.n = static_cast<int>(R);
    size_t i = R, j = H;
    while (i > 0 || j > 0) {
        switch (move[i][j]) {
            case 0:
                if (ref[i - 1] == hyp[j - 1])
                    ++stats.hits;
                else
                    ++stats.substitutions;
                --i;
                --j;
                break;
            case 1:
                ++stats.deletions;
                --i;
                break;
            default:
                ++stats.insertions;
                --j;
                break;
        }
    }
    return stats;
}

// Mean per-point distance between fitted and ground-truth landmarks,
// normalized by the ground-truth bounding-box diagonal.
inline double landmark_error(const Shape& fit, const Shape& gt) {
    if (fit.n_points() != gt.n_points() || gt.n_points() == 0)
        throw std::invalid_argument("landmark_error: shape size mismatch");
    double diag = gt.bbox_diagonal();
    if (diag <= 0)
        throw std::invalid_argument("landmark_error: degenerate ground truth");
    double acc = 0;
    for (int i = 0; i < gt.n_points(); ++i) {
        double dx = fit.x(i) - gt.x(i);
        double dy = fit.y(i) - gt.y(i);
        acc += std::sqrt(dx * dx + dy * dy);
    }
    return acc / gt.n_points() / diag;
}

struct CedCurve {
    std::vector<double> thresholds;
    std::vector<double> fractions;  // fraction of images with error <= t

    // fraction converged at a given threshold (step interpolation)
    double at(double threshold) const {
        double best = 0.0;
        for (size_t i = 0; i < thresholds.size(); ++i)
            if (thresholds[i] <= threshold + 1e-15) best = fractions[i];
        return best;
    }
};

inline CedCurve ced_curve(std::vector<double> errors, double max_threshold,
                          int n_points = 100) {
    if (errors.empty()) throw std::invalid_argument("ced_curve: no errors");
    std::sort(errors.begin(), errors.end());
    CedCurve c;
    for (int i = 0; i <= n_points; ++i) {
        double t = max_threshold * i / n_points;
        size_t k = std::upper_bound(errors.begin(), errors.end(), t) -
                   errors.begin();
        c.thresholds.push_back(t);
        c.fractions.push_back(static_cast<double>(k) / errors.size());
    }
    return c;
}

namespace detail {

inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace detail

// one row per labeled curve/series in a recognition or fitting report
struct ReportRow {
    std::string name;
    std::vector<std::pair<std::string, double>> values;
};

inline void write_report_csv(const std::string& path,
                             const std::vector<ReportRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("write_report_csv: no rows");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "name";
    for (const auto& [key, _] : rows[0].values) out << ',' << key;
    out << '\n';
    for (const auto& row : rows) {
        out << row.name;
        for (const auto& [_, v] : row.values) out << ',' << detail::fmt_num(v);
        out << '\n';
    }
}

// Minimal standalone SVG line plot of one or more named curves sharing an
// x axis.
inline void write_svg_lines(
    const std::string& path, const std::string& x_label,
    const std::string& y_label,
    const std::vector<std::pair<std::string, CedCurve>>& curves) {
    if (curves.empty()) throw std::invalid_argument("write_svg_lines: empty");
    const int W = 640, H = 480, ml = 60, mr = 20, mt = 20, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 1.0;
    for (const auto& [_, c] : curves)
        for (double t : c.thresholds) {
            xmin = std::min(xmin, t);
            xmax = std::max(xmax, t);
        }
    for (const auto& [_, c] : curves)
        for (double f : c.fractions) ymax = std::max(ymax, f);
    if (xmax <= xmin) xmax = xmin + 1.0;

    auto px = [&](double x) {
        return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
    };
    auto py = [&](double y) {
        return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H
        << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H
        << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double xv = xmin + (xmax - xmin) * i / 5;
        double yv = ymin + (ymax - ymin) * i / 5;
        out << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">"
            << detail::fmt_short(xv) << "</text>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
            << "\" font-size=\"11\" text-anchor=\"end\">"
            << detail::fmt_short(yv) << "</text>\n";
    }
    out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
        << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
           "16 "
        << (mt + H - mb) / 2 << ")\">" << y_label << "</text>\n";
    for (size_t ci = 0; ci < curves.size(); ++ci) {
        const CedCurve& c = curves[ci].second;
        out << "<polyline fill=\"none\" stroke=\"" << colors[ci % 6]
            << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < c.thresholds.size(); ++i) {
            if (i) out << ' ';
            out << detail::fmt_short(px(c.thresholds[i])) << ','
                << detail::fmt_short(py(c.fractions[i]));
        }
        out << "\"/>\n";
        double ly = mt + 16 + 16 * static_cast<double>(ci);
        out << "<line x1=\"" << ml + 10 << "\" y1=\"" << ly << "\" x2=\""
            << ml + 34 << "\" y2=\"" << ly << "\" stroke=\"" << colors[ci % 6]
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << ml + 40 << "\" y=\"" << ly + 4
            << "\" font-size=\"12\">" << curves[ci].first << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace vsr
