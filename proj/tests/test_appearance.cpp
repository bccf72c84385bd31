#include <random>

#include "doctest.h"
#include "vsr/appearance.hpp"

using namespace vsr;

namespace {

// Brute-force empty-circumcircle validity check.
bool delaunay_valid(const Shape& pts, const TriMesh& mesh) {
    for (const auto& t : mesh.triangles) {
        double ax = pts.x(t.a), ay = pts.y(t.a);
        double bx = pts.x(t.b), by = pts.y(t.b);
        double cx = pts.x(t.c), cy = pts.y(t.c);
        if (detail::tri_area2(ax, ay, bx, by, cx, cy) < 0) {
            std::swap(bx, cx);
            std::swap(by, cy);
        }
        for (int i = 0; i < pts.n_points(); ++i) {
            if (i == t.a || i == t.b || i == t.c) continue;
            if (detail::in_circumcircle(ax, ay, bx, by, cx, cy, pts.x(i),
                                        pts.y(i)))
                return false;
        }
    }
    return true;
}

GrayImage ramp_image(int w, int h) {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = (0.3 * x + 0.5 * y) / (w + h);
    return img;
}

}  // namespace

TEST_CASE("delaunay basic shapes") {
    Shape tri(std::vector<double>{0, 0, 10, 0, 5, 8});
    auto m1 = delaunay(tri);
    CHECK(m1.triangles.size() == 1);

    Shape square(std::vector<double>{0, 0, 10, 0, 10, 10, 0, 10});
    auto m2 = delaunay(square);
    CHECK(m2.triangles.size() == 2);
    CHECK(delaunay_valid(square, m2));
}

TEST_CASE("delaunay empty-circumcircle property on random points") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<double> coords;
    for (int i = 0; i < 40; ++i) coords.push_back(u(rng));
    Shape pts(coords);
    auto mesh = delaunay(pts);
    CHECK(delaunay_valid(pts, mesh));
}

TEST_CASE("delaunay rejects collinear points") {
    Shape line(std::vector<double>{0, 0, 1, 1, 2, 2, 3, 3});
    CHECK_THROWS(delaunay(line));
}

TEST_CASE("warp map barycentric reconstruction") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(5, 45);
    std::vector<double> coords;
    for (int i = 0; i < 24; ++i) coords.push_back(u(rng));
    Shape ref(coords);
    auto mesh = delaunay(ref);
    auto wm = build_warp_map(ref, mesh);
    REQUIRE(wm.size() > 0);
    for (size_t i = 0; i < wm.size(); ++i) {
        const Triangle& t = mesh.triangles[wm.tri[i]];
        const double* b = &wm.bary[3 * i];
        CHECK(std::abs(b[0] + b[1] + b[2] - 1.0) < 1e-6);
        double rx = b[0] * ref.x(t.a) + b[1] * ref.x(t.b) + b[2] * ref.x(t.c);
        double ry = b[0] * ref.y(t.a) + b[1] * ref.y(t.b) + b[2] * ref.y(t.c);
        CHECK(std::abs(rx - wm.px[i]) < 1e-9);
        CHECK(std::abs(ry - wm.py[i]) < 1e-9);
    }
}

TEST_CASE("pa_warp identity reproduces direct sampling") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(4, 28);
    std::vector<double> coords;
    for (int i = 0; i < 16; ++i) coords.push_back(u(rng));
    Shape ref(coords);
    auto mesh = delaunay(ref);
    auto wm = build_warp_map(ref, mesh);

    std::uniform_real_distribution<double> pix(0, 1);
    GrayImage img(32, 32);
    for (auto& v : img.data()) v = pix(rng);
    auto out = pa_warp(MultiImage::from(img), ref, ref, mesh, wm);
    REQUIRE(out.size() == wm.size());
    for (size_t i = 0; i < wm.size(); ++i)
        CHECK(std::abs(out[i] - img.at(wm.px[i], wm.py[i])) < 1e-6);
}

TEST_CASE("pa_warp of a translated shape samples a shifted ramp") {
    Shape ref(std::vector<double>{6, 6, 26, 6, 26, 26, 6, 26, 16, 14});
    auto mesh = delaunay(ref);
    auto wm = build_warp_map(ref, mesh);
    Shape src = ref;
    for (int i = 0; i < src.n_points(); ++i)
        src.set(i, src.x(i) + 3, src.y(i) + 5);
    GrayImage img = ramp_image(64, 64);
    auto out = pa_warp(MultiImage::from(img), src, ref, mesh, wm);
    for (size_t i = 0; i < wm.size(); ++i) {
        double expect = (0.3 * (wm.px[i] + 3) + 0.5 * (wm.py[i] + 5)) / 128.0;
        CHECK(std::abs(out[i] - expect) < 1e-4);
    }
}

TEST_CASE("pa_warp constants and linearity") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(3, 20);
    std::vector<double> coords;
    for (int i = 0; i < 12; ++i) coords.push_back(u(rng));
    Shape ref(coords);
    auto mesh = delaunay(ref);
    auto wm = build_warp_map(ref, mesh);
    Shape src = ref;
    for (auto& v : src.coords) v *= 1.2;

    GrayImage c(30, 30, 0.6);
    auto out = pa_warp(MultiImage::from(c), src, ref, mesh, wm);
    for (double v : out) CHECK(std::abs(v - 0.6) < 1e-9);

    std::uniform_real_distribution<double> pix(0, 1);
    GrayImage a(30, 30), b(30, 30), comb(30, 30);
    for (auto& v : a.data()) v = pix(rng);
    for (auto& v : b.data()) v = pix(rng);
    double al = 0.7, be = 1.4;
    for (size_t i = 0; i < comb.data().size(); ++i)
        comb.data()[i] = al * a.data()[i] + be * b.data()[i];
    auto wa = pa_warp(MultiImage::from(a), src, ref, mesh, wm);
    auto wb = pa_warp(MultiImage::from(b), src, ref, mesh, wm);
    auto wc = pa_warp(MultiImage::from(comb), src, ref, mesh, wm);
    for (size_t i = 0; i < wc.size(); ++i)
        CHECK(std::abs(wc[i] - (al * wa[i] + be * wb[i])) < 1e-9);
}

TEST_CASE("dense_sift zero on constant images, 8 channels, unit norms") {
    GrayImage c(16, 16, 0.5);
    MultiImage s = dense_sift(c);
    CHECK(s.channels == 8);
    for (double v : s.data) CHECK(v == 0.0);

    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0, 1);
    GrayImage img(20, 20);
    for (auto& v : img.data()) v = u(rng);
    MultiImage d = dense_sift(img);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            double n2 = 0;
            for (int ch = 0; ch < 8; ++ch) n2 += d.at(x, y, ch) * d.at(x, y, ch);
            double n = std::sqrt(n2);
            CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-6));
        }
}

TEST_CASE("dense_sift concentrates a vertical step edge horizontally") {
    GrayImage img(24, 24, 0.0);
    for (int y = 0; y < 24; ++y)
        for (int x = 12; x < 24; ++x) img.at(x, y) = 1.0;
    MultiImage d = dense_sift(img);
    // gradient points in +x (theta=0); bin position (0+pi)/(2pi)*8 = 4
    int x = 12, y = 12;
    double edge_mass = d.at(x, y, 4);
    double rest = 0;
    for (int ch = 0; ch < 8; ++ch)
        if (ch != 4) rest += d.at(x, y, ch);
    CHECK(edge_mass > 0.9);
    CHECK(rest < 0.3);
}

TEST_CASE("patch_extract length and exactness at integer coords") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    GrayImage img(40, 40);
    for (auto& v : img.data()) v = u(rng);
    Shape lm(std::vector<double>{20, 20, 12, 25, 30, 10});
    auto vec = patch_extract(MultiImage::from(img), lm, 17);
    CHECK(vec.size() == 3u * 289);

    // landmark 0 at (20,20): patch equals the exact pixel window
    int half = 8;
    size_t idx = 0;
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
            CHECK(vec[idx] == doctest::Approx(img.at(20 + dx, 20 + dy)));
            ++idx;
        }

    GrayImage c(40, 40, 0.3);
    auto cv = patch_extract(MultiImage::from(c), lm, 17);
    for (double v : cv) CHECK(std::abs(v - 0.3) < 1e-12);

    CHECK_THROWS(patch_extract(MultiImage::from(img), lm, 16));
}

TEST_CASE("patch_extract length scales with channels") {
    GrayImage img(40, 40, 0.2);
    MultiImage sift(40, 40, 8, 0.1);
    Shape lm(std::vector<double>{10, 10, 30, 30});
    CHECK(patch_extract(sift, lm, 9).size() == 2u * 81 * 8);
}
