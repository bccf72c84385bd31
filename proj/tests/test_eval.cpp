#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"
#include "vsr/eval.hpp"

using namespace vsr;

namespace {

// brute-force minimum alignment cost by full recursion
int brute_cost(const std::vector<std::string>& ref,
               const std::vector<std::string>& hyp, size_t i, size_t j, int cs,
               int cd, int ci) {
    if (i == ref.size() && j == hyp.size()) return 0;
    int best = 1 << 28;
    if (i < ref.size() && j < hyp.size())
        best = std::min(best, (ref[i] == hyp[j] ? 0 : cs) +
                                  brute_cost(ref, hyp, i + 1, j + 1, cs, cd, ci));
    if (i < ref.size())
        best = std::min(best, cd + brute_cost(ref, hyp, i + 1, j, cs, cd, ci));
    if (j < hyp.size())
        best = std::min(best, ci + brute_cost(ref, hyp, i, j + 1, cs, cd, ci));
    return best;
}

std::vector<std::string> random_labels(std::mt19937_64& rng, int max_len,
                                       int alphabet) {
    int len = static_cast<int>(rng() % (max_len + 1));
    std::vector<std::string> out;
    for (int i = 0; i < len; ++i)
        out.push_back(std::string(1, static_cast<char>('A' + rng() % alphabet)));
    return out;
}

}  // namespace

TEST_CASE("alignment worked example") {
    std::vector<std::string> ref = {"A", "B", "C"};
    std::vector<std::string> hyp = {"A", "X", "C", "D"};
    AlignmentStats s = align_score(ref, hyp);
    CHECK(s.n == 3);
    CHECK(s.hits == 2);
    CHECK(s.substitutions == 1);
    CHECK(s.deletions == 0);
    CHECK(s.insertions == 1);
    CHECK(s.correctness() == doctest::Approx(66.6667).epsilon(1e-4));
    CHECK(s.accuracy() == doctest::Approx(33.3333).epsilon(1e-4));
}

TEST_CASE("alignment edge cases") {
    AlignmentStats s = align_score({}, {});
    CHECK(s.n == 0);
    CHECK(s.correctness() == 0.0);

    s = align_score({"A", "B"}, {});
    CHECK(s.deletions == 2);
    CHECK(s.correctness() == 0.0);

    s = align_score({}, {"A", "B"});
    CHECK(s.insertions == 2);

    s = align_score({"A", "B", "C"}, {"A", "B", "C"});
    CHECK(s.hits == 3);
    CHECK(s.accuracy() == doctest::Approx(100.0));
}

TEST_CASE("alignment matches exhaustive oracle on random pairs") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        auto ref = random_labels(rng, 6, 3);
        auto hyp = random_labels(rng, 6, 3);
        bool htk = trial % 2 == 1;
        int cs = htk ? 10 : 1, cd = htk ? 7 : 1, ci = htk ? 7 : 1;
        AlignmentStats s = align_score(ref, hyp, htk);
        int got = cs * s.substitutions + cd * s.deletions + ci * s.insertions;
        int want = brute_cost(ref, hyp, 0, 0, cs, cd, ci);
        CHECK(got == want);
        // bookkeeping invariants
        CHECK(s.hits + s.substitutions + s.deletions == static_cast<int>(ref.size()));
        CHECK(s.hits + s.substitutions + s.insertions == static_cast<int>(hyp.size()));
    }
}

TEST_CASE("alignment stats accumulate") {
    AlignmentStats total;
    total += align_score({"A", "B", "C"}, {"A", "X", "C", "D"});
    total += align_score({"A", "B"}, {"A", "B"});
    CHECK(total.n == 5);
    CHECK(total.hits == 4);
    CHECK(total.correctness() == doctest::Approx(100.0 * 4 / 5));
}

TEST_CASE("landmark error oracle") {
    // unit square ground truth, fit offset by (0.3, 0.4): every point is
    // 0.5 away and the diagonal is sqrt(2)
    Shape gt(std::vector<double>(8, 0.0)), fit(std::vector<double>(8, 0.0));
    double xs[4] = {0, 1, 1, 0}, ys[4] = {0, 0, 1, 1};
    for (int i = 0; i < 4; ++i) {
        gt.set(i, xs[i], ys[i]);
        fit.set(i, xs[i] + 0.3, ys[i] + 0.4);
    }
    CHECK(landmark_error(fit, gt) ==
          doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(landmark_error(gt, gt) == doctest::Approx(0.0));
    Shape wrong(std::vector<double>(6, 0.0));
    CHECK_THROWS_AS(landmark_error(wrong, gt), std::invalid_argument);
}

TEST_CASE("ced curve is a valid cumulative distribution") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 0.1);
    std::vector<double> errors;
    for (int i = 0; i < 500; ++i) errors.push_back(u(rng));
    CedCurve c = ced_curve(errors, 0.1, 50);
    REQUIRE(c.thresholds.size() == 51);
    CHECK(c.fractions.front() <= c.fractions.back());
    for (size_t i = 1; i < c.fractions.size(); ++i) {
        CHECK(c.fractions[i] >= c.fractions[i - 1]);  // monotone
        CHECK(c.thresholds[i] > c.thresholds[i - 1]);
    }
    CHECK(c.fractions.back() == doctest::Approx(1.0));
    // counting oracle at a mid threshold
    double t = 0.05;
    size_t k = 0;
    for (double e : errors)
        if (e <= t) ++k;
    CHECK(c.at(t) == doctest::Approx(static_cast<double>(k) / errors.size()));
}

TEST_CASE("report csv and svg emitters") {
    std::vector<ReportRow> rows = {
        {"dct", {{"corr", 71.5}, {"acc", 65.25}}},
        {"aam-patch-sift", {{"corr", 80.0}, {"acc", 74.0}}},
    };
    std::string csv = "/tmp/vsr_test_report.csv";
    write_report_csv(csv, rows);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "name,corr,acc");
    std::getline(in, line);
    CHECK(line == "dct,71.5,65.25");

    CedCurve a = ced_curve({0.01, 0.02, 0.05}, 0.06, 10);
    CedCurve b = ced_curve({0.03, 0.04, 0.08}, 0.06, 10);
    std::string svg = "/tmp/vsr_test_plot.svg";
    write_svg_lines(svg, "error", "fraction", {{"patch", a}, {"holistic", b}});
    std::ifstream sin(svg);
    std::stringstream ss;
    ss << sin.rdbuf();
    std::string body = ss.str();
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("polyline") != std::string::npos);
    CHECK(body.find("patch") != std::string::npos);
    CHECK(body.find("holistic") != std::string::npos);
    CHECK(body.find("</svg>") != std::string::npos);
}
