#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "vsr/pipeline.hpp"

using namespace vsr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// recursively compare two directory trees byte for byte
void check_trees_equal(const fs::path& a, const fs::path& b) {
    std::vector<std::string> ra, rb;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file())
            ra.push_back(fs::relative(e.path(), a).string());
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file())
            rb.push_back(fs::relative(e.path(), b).string());
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    REQUIRE(ra == rb);
    for (const auto& rel : ra)
        CHECK_MESSAGE(slurp((a / rel).string()) == slurp((b / rel).string()),
                      rel);
}

SynthConfig tiny_synth(uint64_t seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.n_speakers = 2;
    sc.sentences_per_speaker = 4;
    sc.frames_per_viseme = 6;
    sc.visemes_per_sentence = 3;
    return sc;
}

}  // namespace

TEST_CASE("flat config parsing") {
    std::stringstream in(
        "# comment\n"
        "[features]\n"
        "kind = aam\n"
        "window = 28   # trailing comment\n"
        "variant = S+A\n"
        "[hmm]\n"
        "schedule = 1,2,4\n"
        "[run]\n"
        "seed = 7\n"
        "jobs = 3\n"
        "out = /tmp/vsr_cfg_out\n");
    PipelineConfig c = PipelineConfig::from_map(parse_flat_config(in));
    CHECK(c.feature_kind == "aam");
    CHECK(c.dct_window == 28);
    CHECK(c.aam_variant == "S+A");
    CHECK(c.mixture_schedule == std::vector<int>{1, 2, 4});
    CHECK(c.seed == 7);
    CHECK(c.jobs == 3);
    CHECK(c.out == "/tmp/vsr_cfg_out");
    // untouched keys keep their defaults
    CHECK(c.sampler_confidence == doctest::Approx(0.94));
    CHECK(c.roi_margin == doctest::Approx(0.15));

    std::stringstream bad("[run]\nseed == oops\n");
    CHECK_THROWS(PipelineConfig::from_map(parse_flat_config(bad)));
    std::stringstream noeq("[run]\njust words\n");
    CHECK_THROWS_AS(parse_flat_config(noeq), std::runtime_error);
}

TEST_CASE("manifest round trip is byte identical") {
    fs::path dir = "/tmp/vsr_test_manifest";
    fs::remove_all(dir);
    fs::create_directories(dir / "d1");
    fs::create_directories(dir / "d2");
    std::ofstream(dir / "l1.csv") << "1,2,0.9\n";

    Manifest m;
    m.root = dir.string();
    m.entries.push_back(
        {"spk00", "s00_u000", "d1", "l1.csv", "train", {"sil", "v01", "sil"}});
    m.entries.push_back({"spk00", "s00_u001", "d2", "", "test", {"sil"}});
    std::string p1 = (dir / "manifest.txt").string();
    write_manifest(p1, m);

    Manifest r = read_manifest(p1);
    REQUIRE(r.entries.size() == 2);
    CHECK(r.entries[0].transcript == Transcript{"sil", "v01", "sil"});
    CHECK(r.entries[1].landmark_file.empty());
    CHECK(r.entries[1].split == "test");

    std::string p2 = (dir / "manifest2.txt").string();
    write_manifest(p2, r);
    CHECK(slurp(p1) == slurp(p2));

    // missing referenced files fail the check
    Manifest broken = m;
    broken.entries[0].frame_dir = "nope";
    write_manifest(p1, broken);
    CHECK_THROWS_AS(read_manifest(p1), std::runtime_error);
}

TEST_CASE("synthetic corpus generation") {
    CHECK(synth_viseme_labels().size() == 12);

    fs::path a = "/tmp/vsr_test_synth_a", b = "/tmp/vsr_test_synth_b";
    fs::remove_all(a);
    fs::remove_all(b);
    SynthConfig sc = tiny_synth(5);
    Manifest ma = synth_generate(sc, a.string());
    Manifest mb = synth_generate(sc, b.string());

    // same seed twice -> bitwise-identical corpus
    check_trees_equal(a, b);

    REQUIRE(ma.entries.size() == 8);
    int train = 0, test = 0;
    for (const auto& e : ma.entries) {
        (e.split == "train" ? train : test) += 1;
        CHECK(e.transcript.front() == "sil");
        CHECK(e.transcript.back() == "sil");
        // files exist and line up
        auto frames = detail::list_frames(ma.resolve(e.frame_dir));
        auto lmk = read_landmark_csv(ma.resolve(e.landmark_file));
        CHECK(frames.size() == lmk.size());
        CHECK(frames.size() == (sc.visemes_per_sentence + 2) *
                                   static_cast<size_t>(sc.frames_per_viseme));
        for (const auto& f : lmk) CHECK(f.shape.n_points() == 68);
    }
    CHECK(train == 6);
    CHECK(test == 2);
    // manifest on disk reloads cleanly with file checks
    Manifest reread = read_manifest((a / "manifest.txt").string());
    CHECK(reread.entries.size() == ma.entries.size());

    // a different seed changes the corpus
    fs::remove_all(b);
    SynthConfig sc2 = tiny_synth(6);
    synth_generate(sc2, b.string());
    bool different = false;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) {
            auto rel = fs::relative(e.path(), a);
            if (fs::exists(b / rel) &&
                slurp(e.path().string()) != slurp((b / rel).string()))
                different = true;
        }
    CHECK(different);

    CHECK_THROWS_AS(synth_generate(SynthConfig{1, 0}, "/tmp/vsr_test_synth_c"),
                    std::invalid_argument);
}

TEST_CASE("corrupt fraction marks about the requested share of frames") {
    SynthConfig sc = tiny_synth(11);
    sc.n_speakers = 3;
    sc.sentences_per_speaker = 8;
    sc.corrupt_fraction = 0.1;
    int low = 0, total = 0;
    for (int spk = 0; spk < sc.n_speakers; ++spk)
        for (int sent = 0; sent < sc.sentences_per_speaker; ++sent) {
            SynthSentence s = synth_sentence(sc, spk, sent);
            for (const auto& f : s.landmarks) {
                ++total;
                if (f.confidence < 0.94) ++low;
            }
        }
    double share = static_cast<double>(low) / total;
    CHECK(share > 0.05);
    CHECK(share < 0.15);
}

TEST_CASE("lip roi clamps to the image") {
    SynthConfig sc = tiny_synth(2);
    SynthSentence s = synth_sentence(sc, 0, 0);
    Rect r = lip_roi(s.landmarks[0].shape, 0.15, kSynthW, kSynthH);
    CHECK(r.valid());
    CHECK(r.x >= 0);
    CHECK(r.y >= 0);
    CHECK(r.x + r.w <= kSynthW);
    CHECK(r.y + r.h <= kSynthH);
    // margin grows the box
    Rect r0 = lip_roi(s.landmarks[0].shape, 0.0, kSynthW, kSynthH);
    CHECK(r.w >= r0.w);
    CHECK(r.h >= r0.h);
}

TEST_CASE("dct pipeline end to end is deterministic and scores sentences") {
    fs::path corpus = "/tmp/vsr_test_pipe_corpus";
    fs::remove_all(corpus);
    SynthConfig sc = tiny_synth(3);
    Manifest m = synth_generate(sc, corpus.string());

    PipelineConfig cfg;
    cfg.feature_kind = "dct";
    cfg.mixture_schedule = {1};
    cfg.reestimate_iters = 2;
    cfg.jobs = 2;
    cfg.seed = 3;

    fs::path o1 = "/tmp/vsr_test_pipe_out1", o2 = "/tmp/vsr_test_pipe_out2";
    fs::remove_all(o1);
    fs::remove_all(o2);
    cfg.out = o1.string();
    PipelineReports r1 = run_pipeline(cfg, m);
    cfg.out = o2.string();
    cfg.jobs = 1;  // worker count must not change any output byte
    PipelineReports r2 = run_pipeline(cfg, m);

    CHECK(r1.pooled.n > 0);
    REQUIRE(!r1.recognition.empty());
    CHECK(r1.recognition.back().name == "pooled");
    REQUIRE(!r1.hmm_loglik.empty());
    for (size_t i = 1; i < r1.hmm_loglik.size(); ++i)
        CHECK(r1.hmm_loglik[i] >= r1.hmm_loglik[i - 1] - 1e-6);

    // artifacts exist
    CHECK(fs::is_regular_file(o1 / "models" / "hmm.txt"));
    CHECK(fs::is_regular_file(o1 / "reports" / "recognition.csv"));
    CHECK(fs::is_regular_file(
        o1 / "features" /
        (m.entries[0].speaker + "_" + m.entries[0].sentence + ".csv")));

    check_trees_equal(o1, o2);

    // feature files written by the run reload as valid 132-dim sequences
    FeatureSequence f = read_features(
        (o1 / "features" / (m.entries[0].speaker + "_" + m.entries[0].sentence))
            .string());
    CHECK(f.dim == 132);
    CHECK(f.size() == (sc.visemes_per_sentence + 2) *
                          static_cast<size_t>(sc.frames_per_viseme));
}

TEST_CASE("pipeline failures carry the stage name") {
    Manifest empty;
    empty.root = "/tmp";
    PipelineConfig cfg;
    cfg.out = "/tmp/vsr_test_pipe_fail";
    try {
        run_pipeline(cfg, empty);
        FAIL("expected failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("stage ") != std::string::npos);
    }
}
