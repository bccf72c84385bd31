#pragma once

// Dataset manifests, flat key=value configuration, the synthetic corpus
// writer and the end-to-end chains (feature extraction -> HMM training ->
// decoding -> scoring) used by the command-line tool.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsr/aam.hpp"
#include "vsr/dct.hpp"
#include "vsr/eval.hpp"
#include "vsr/hmm.hpp"
#include "vsr/image_io.hpp"
#include "vsr/parallel.hpp"
#include "vsr/synth.hpp"

namespace vsr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- manifest

struct ManifestEntry {
    std::string speaker;
    std::string sentence;
    std::string frame_dir;      // relative to the manifest location
    std::string landmark_file;  // empty if none
    std::string split;          // "train" or "test"
    Transcript transcript;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::string root;  // directory the relative paths resolve against

    std::string resolve(const std::string& rel) const {
        if (rel.empty() || rel.front() == '/') return rel;
        return (fs::path(root) / rel).string();
    }
    std::vector<const ManifestEntry*> split_entries(
        const std::string& split) const {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : entries)
            if (e.split == split) out.push_back(&e);
        return out;
    }
};

inline void write_manifest(const std::string& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "manifest version 1\n";
    for (const auto& e : m.entries) {
        out << e.speaker << '\t' << e.sentence << '\t' << e.frame_dir << '\t'
            << (e.landmark_file.empty() ? "-" : e.landmark_file) << '\t'
            << e.split << '\t';
        for (size_t i = 0; i < e.transcript.size(); ++i) {
            if (i) out << ' ';
            out << e.transcript[i];
        }
        out << '\n';
    }
}

inline Manifest read_manifest(const std::string& path, bool check_files = true) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    Manifest m;
    m.root = fs::path(path).parent_path().string();
    if (m.root.empty()) m.root = ".";
    std::string line;
    std::getline(in, line);
    if (line != "manifest version 1")
        throw std::runtime_error(path + ": bad manifest header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        ManifestEntry e;
        std::string tr;
        if (!std::getline(ss, e.speaker, '\t') ||
            !std::getline(ss, e.sentence, '\t') ||
            !std::getline(ss, e.frame_dir, '\t') ||
            !std::getline(ss, e.landmark_file, '\t') ||
            !std::getline(ss, e.split, '\t') || !std::getline(ss, tr))
            throw std::runtime_error(path + ": malformed manifest row");
        if (e.landmark_file == "-") e.landmark_file.clear();
        if (e.split != "train" && e.split != "test")
            throw std::runtime_error(path + ": split must be train or test");
        std::stringstream ts(tr);
        std::string tok;
        while (ts >> tok) e.transcript.push_back(tok);
        if (check_files) {
            if (!fs::is_directory(m.resolve(e.frame_dir)))
                throw std::runtime_error(path + ": missing frame dir " +
                                         e.frame_dir);
            if (!e.landmark_file.empty() &&
                !fs::is_regular_file(m.resolve(e.landmark_file)))
                throw std::runtime_error(path + ": missing landmark file " +
                                         e.landmark_file);
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

// ------------------------------------------------------------------ config

// Flat `key = value` text with [section] headers; '#' starts a comment.
inline std::map<std::string, std::string> parse_flat_config(
    std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line, section;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value, got '" +
                                     line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        kv[section.empty() ? key : section + "." + key] = val;
    }
    return kv;
}

struct PipelineConfig {
    // features
    std::string feature_kind = "dct";  // dct | aam
    int dct_window = 36;
    double roi_margin = 0.15;
    std::string roi_source = "landmarks";  // landmarks | template
    std::string roi_template;              // image path for ncc matching
    std::string aam_warp = "patch";
    std::string aam_descriptor = "sift";
    std::string aam_part = "lips";
    int n_shape = 40;
    int n_appearance = 150;
    std::string aam_variant = "S+A+dA";
    // sampler
    double sampler_confidence = 0.94;
    double sampler_fraction = 0.05;
    int sampler_sentences = 5;
    // hmm
    std::vector<int> mixture_schedule = {1, 2};
    int reestimate_iters = 5;
    double insertion_penalty = 0.0;
    // synth
    int synth_speakers = 2;
    int synth_sentences = 8;
    int synth_frames_per_viseme = 8;
    int synth_visemes_per_sentence = 7;
    double synth_corrupt_fraction = 0.0;
    double synth_test_fraction = 0.25;
    // run
    uint64_t seed = 1;
    int jobs = 1;
    std::string out = "out";

    static PipelineConfig from_map(
        const std::map<std::string, std::string>& kv) {
        PipelineConfig c;
        auto get = [&](const std::string& key, auto& field) {
            auto it = kv.find(key);
            if (it == kv.end()) return;
            std::stringstream ss(it->second);
            ss >> field;
            if (ss.fail())
                throw std::runtime_error("config: bad value for " + key);
        };
        auto gets = [&](const std::string& key, std::string& field) {
            auto it = kv.find(key);
            if (it != kv.end()) field = it->second;
        };
        gets("features.kind", c.feature_kind);
        get("features.window", c.dct_window);
        get("features.roi_margin", c.roi_margin);
        gets("features.roi_source", c.roi_source);
        gets("features.roi_template", c.roi_template);
        gets("features.warp", c.aam_warp);
        gets("features.descriptor", c.aam_descriptor);
        gets("features.part", c.aam_part);
        get("features.n_shape", c.n_shape);
        get("features.n_appearance", c.n_appearance);
        gets("features.variant", c.aam_variant);
        get("sampler.confidence", c.sampler_confidence);
        get("sampler.fraction", c.sampler_fraction);
        get("sampler.sentences_per_speaker", c.sampler_sentences);
        if (auto it = kv.find("hmm.schedule"); it != kv.end()) {
            c.mixture_schedule.clear();
            std::stringstream ss(it->second);
            std::string tok;
            while (std::getline(ss, tok, ','))
                c.mixture_schedule.push_back(std::stoi(tok));
        }
        get("hmm.reestimate_iters", c.reestimate_iters);
        get("hmm.insertion_penalty", c.insertion_penalty);
        get("synth.speakers", c.synth_speakers);
        get("synth.sentences_per_speaker", c.synth_sentences);
        get("synth.frames_per_viseme", c.synth_frames_per_viseme);
        get("synth.visemes_per_sentence", c.synth_visemes_per_sentence);
        get("synth.corrupt_fraction", c.synth_corrupt_fraction);
        get("synth.test_fraction", c.synth_test_fraction);
        get("run.seed", c.seed);
        get("run.jobs", c.jobs);
        gets("run.out", c.out);
        return c;
    }

    static PipelineConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config " + path);
        auto kv = parse_flat_config(in);
        return from_map(kv);
    }

    AamConfig aam_config() const {
        AamConfig a;
        a.warp_kind = aam_warp == "holistic" ? WarpKind::holistic
                                             : WarpKind::patch;
        if (aam_warp != "holistic" && aam_warp != "patch")
            throw std::runtime_error("config: warp must be holistic or patch");
        a.descriptor =
            aam_descriptor == "sift" ? Descriptor::sift : Descriptor::noop;
        if (aam_descriptor != "sift" && aam_descriptor != "noop")
            throw std::runtime_error("config: descriptor must be sift or noop");
        a.part = aam_part == "face"   ? FacePart::face
                 : aam_part == "chin" ? FacePart::chin
                                      : FacePart::lips;
        if (aam_part != "face" && aam_part != "chin" && aam_part != "lips")
            throw std::runtime_error("config: part must be face, chin or lips");
        a.n_shape = n_shape;
        a.n_appearance = n_appearance;
        return a;
    }
};

// ------------------------------------------------------------ stage runner

namespace detail {

template <class F>
void run_stage(const std::string& name, F&& body) {
    auto t0 = std::chrono::steady_clock::now();
    std::cerr << "[" << name << "] start\n";
    try {
        body();
    } catch (const std::exception& e) {
        throw std::runtime_error("stage " + name + ": " + e.what());
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", secs);
    std::cerr << "[" << name << "] done in " << buf << " s\n";
}

inline std::vector<std::string> list_frames(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string ext = e.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm" || ext == ".png")
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no frames in " + dir);
    return out;
}

}  // namespace detail

// --------------------------------------------------- synthetic corpus writer

// Renders the synthetic corpus to `out_dir` (frames, landmark CSVs,
// manifest with per-speaker train/test split) and returns the manifest.
inline Manifest synth_generate(const SynthConfig& cfg,
                               const std::string& out_dir,
                               double test_fraction = 0.25) {
    if (cfg.n_speakers < 1 || cfg.sentences_per_speaker < 1 ||
        cfg.frames_per_viseme < 1 || cfg.visemes_per_sentence < 1)
        throw std::invalid_argument("synth_generate: all counts must be >= 1");
    fs::create_directories(out_dir);
    Manifest m;
    m.root = out_dir;
    int n_test = static_cast<int>(
        std::lround(test_fraction * cfg.sentences_per_speaker));
    n_test = std::clamp(n_test, 1, cfg.sentences_per_speaker - 1);
    for (int spk = 0; spk < cfg.n_speakers; ++spk) {
        char spk_id[16];
        std::snprintf(spk_id, sizeof(spk_id), "spk%02d", spk);
        for (int sent = 0; sent < cfg.sentences_per_speaker; ++sent) {
            SynthSentence s = synth_sentence(cfg, spk, sent);
            std::string rel_dir =
                std::string(spk_id) + "/" + s.sentence_id;
            fs::create_directories(fs::path(out_dir) / rel_dir);
            for (size_t f = 0; f < s.frames.size(); ++f) {
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%04d.pgm",
                              static_cast<int>(f));
                write_pgm((fs::path(out_dir) / rel_dir / name).string(),
                          s.frames[f]);
            }
            std::string rel_lmk =
                std::string(spk_id) + "/" + s.sentence_id + ".lmk.csv";
            write_landmark_csv((fs::path(out_dir) / rel_lmk).string(),
                               s.landmarks);
            ManifestEntry e;
            e.speaker = spk_id;
            e.sentence = s.sentence_id;
            e.frame_dir = rel_dir;
            e.landmark_file = rel_lmk;
            e.split = sent >= cfg.sentences_per_speaker - n_test ? "test"
                                                                 : "train";
            e.transcript = s.transcript;
            m.entries.push_back(std::move(e));
        }
    }
    write_manifest((fs::path(out_dir) / "manifest.txt").string(), m);
    return m;
}

// ------------------------------------------------------------- chain pieces

struct SentenceData {
    const ManifestEntry* entry = nullptr;
    std::vector<RgbImage> frames;
    std::vector<LandmarkFrame> landmarks;
};

inline SentenceData load_sentence(const Manifest& m, const ManifestEntry& e) {
    SentenceData s;
    s.entry = &e;
    for (const auto& path : detail::list_frames(m.resolve(e.frame_dir)))
        s.frames.push_back(read_frame(path));
    if (!e.landmark_file.empty()) {
        s.landmarks = read_landmark_csv(m.resolve(e.landmark_file));
        if (s.landmarks.size() != s.frames.size())
            throw std::runtime_error(e.sentence +
                                     ": landmark/frame count mismatch");
    }
    return s;
}

// Lip bounding box with a relative margin, the DCT region of interest.
inline Rect lip_roi(const Shape& landmarks, double margin, int img_w,
                    int img_h) {
    Shape lips = landmarks.subset(part_landmark_indices(FacePart::lips));
    auto bb = lips.bbox();
    double w = bb[2] - bb[0], h = bb[3] - bb[1];
    double mx = margin * w, my = margin * h;
    Rect r;
    r.x = static_cast<int>(std::floor(bb[0] - mx));
    r.y = static_cast<int>(std::floor(bb[1] - my));
    r.w = static_cast<int>(std::ceil(w + 2 * mx));
    r.h = static_cast<int>(std::ceil(h + 2 * my));
    return r.clamped(img_w, img_h);
}

inline FeatureSequence dct_sentence_features(const SentenceData& s,
                                             const PipelineConfig& cfg) {
    std::vector<Rect> rois;
    if (cfg.roi_source == "template") {
        GrayImage tmpl = to_grayscale(read_frame(cfg.roi_template));
        for (const auto& f : s.frames) {
            NccResult r = ncc_match(to_grayscale(f), tmpl);
            rois.push_back(r.rect);
        }
    } else {
        if (s.landmarks.empty())
            throw std::runtime_error(s.entry->sentence +
                                     ": landmarks required for DCT ROI");
        for (size_t f = 0; f < s.frames.size(); ++f)
            rois.push_back(lip_roi(s.landmarks[f].shape, cfg.roi_margin,
                                   s.frames[f].width(),
                                   s.frames[f].height()));
    }
    DctConfig dc;
    dc.window = cfg.dct_window;
    return extract_dct_sequence(s.frames, rois, dc);
}

struct PipelineReports {
    std::vector<ReportRow> recognition;  // per speaker plus pooled
    AlignmentStats pooled;
    std::vector<double> fit_errors;  // test frames, AAM chain only
    double ced_at_002 = -1.0;
    std::vector<double> hmm_loglik;
};

inline std::string feature_base(const std::string& dir,
                                const ManifestEntry& e) {
    return (fs::path(dir) / (e.speaker + "_" + e.sentence)).string();
}

// Executes the configured chain end to end and writes features, models and
// reports under cfg.out.
inline PipelineReports run_pipeline(const PipelineConfig& cfg,
                                    const Manifest& manifest) {
    PipelineReports rep;
    std::string feat_dir = (fs::path(cfg.out) / "features").string();
    std::string model_dir = (fs::path(cfg.out) / "models").string();
    std::string report_dir = (fs::path(cfg.out) / "reports").string();
    fs::create_directories(feat_dir);
    fs::create_directories(model_dir);
    fs::create_directories(report_dir);

    const auto& entries = manifest.entries;
    std::vector<FeatureSequence> feats(entries.size());

    if (cfg.feature_kind == "dct") {
        detail::run_stage("dct-extract", [&] {
            parallel_for(entries.size(), cfg.jobs, [&](size_t i) {
                SentenceData s = load_sentence(manifest, entries[i]);
                feats[i] = dct_sentence_features(s, cfg);
            });
            for (size_t i = 0; i < entries.size(); ++i)
                write_features(feature_base(feat_dir, entries[i]), feats[i]);
        });
    } else if (cfg.feature_kind == "aam") {
        Aam aam;
        detail::run_stage("aam-train", [&] {
            std::vector<FrameRecord> records;
            std::map<std::string, SentenceData> cache;
            for (const auto* e : manifest.split_entries("train")) {
                auto lmk = read_landmark_csv(manifest.resolve(e->landmark_file));
                for (size_t f = 0; f < lmk.size(); ++f) {
                    FrameRecord r;
                    char fid[32];
                    std::snprintf(fid, sizeof(fid), "%04d",
                                  static_cast<int>(f));
                    r.frame_id = e->frame_dir + "/" + fid;
                    r.landmarks = lmk[f].shape;
                    r.confidence = lmk[f].confidence;
                    r.sentence_id = e->sentence;
                    r.speaker_id = e->speaker;
                    records.push_back(std::move(r));
                }
            }
            SamplerConfig sc;
            sc.conf_threshold = cfg.sampler_confidence;
            sc.fraction = cfg.sampler_fraction;
            sc.sentences_per_speaker = cfg.sampler_sentences;
            sc.seed = cfg.seed;
            auto picked = sample_training_frames(records, sc);

            std::vector<RgbImage> images;
            std::vector<Shape> shapes;
            for (const auto& r : picked) {
                // frame_id is "<dir>/<index>"
                size_t cut = r.frame_id.rfind('/');
                std::string dir = r.frame_id.substr(0, cut);
                int idx = std::stoi(r.frame_id.substr(cut + 1));
                auto paths = detail::list_frames(manifest.resolve(dir));
                images.push_back(read_frame(paths[idx]));
                shapes.push_back(r.landmarks);
            }
            aam = train_aam(images, shapes, cfg.aam_config());
            save_aam((fs::path(model_dir) / "aam.bin").string(), aam);
        });

        detail::run_stage("aam-fit+features", [&] {
            AamFeatureVariant variant = parse_variant(cfg.aam_variant);
            std::vector<std::vector<double>> errs(entries.size());
            parallel_for(entries.size(), cfg.jobs, [&](size_t i) {
                SentenceData s = load_sentence(manifest, entries[i]);
                if (s.landmarks.empty())
                    throw std::runtime_error(entries[i].sentence +
                                             ": landmarks required");
                const Shape& mean = aam.scales.back().shape.mean_shape;
                std::vector<FitResult> fits;
                for (size_t f = 0; f < s.frames.size(); ++f) {
                    Shape part = s.landmarks[f].shape.subset(aam.part_indices);
                    auto bb = part.bbox();
                    Rect box{static_cast<int>(std::floor(bb[0])),
                             static_cast<int>(std::floor(bb[1])),
                             static_cast<int>(std::ceil(bb[2] - bb[0])),
                             static_cast<int>(std::ceil(bb[3] - bb[1]))};
                    Shape init = init_from_bbox(mean, box);
                    FitResult fit = fit_wic(aam, s.frames[f], init);
                    if (entries[i].split == "test")
                        errs[i].push_back(landmark_error(fit.shape, part));
                    fits.push_back(std::move(fit));
                }
                feats[i] = extract_aam_features(fits, variant);
            });
            for (size_t i = 0; i < entries.size(); ++i) {
                write_features(feature_base(feat_dir, entries[i]), feats[i]);
                rep.fit_errors.insert(rep.fit_errors.end(), errs[i].begin(),
                                      errs[i].end());
            }
            if (!rep.fit_errors.empty()) {
                CedCurve ced = ced_curve(rep.fit_errors, 0.05, 100);
                rep.ced_at_002 = ced.at(0.02);
                std::vector<ReportRow> rows;
                for (size_t i = 0; i < ced.thresholds.size(); ++i)
                    rows.push_back({"t" + std::to_string(i),
                                    {{"threshold", ced.thresholds[i]},
                                     {"fraction", ced.fractions[i]}}});
                write_report_csv(
                    (fs::path(report_dir) / "fit_ced.csv").string(), rows);
                write_svg_lines(
                    (fs::path(report_dir) / "fit_ced.svg").string(),
                    "normalized error", "fraction converged",
                    {{cfg.aam_warp + "+" + cfg.aam_descriptor, ced}});
            }
        });
    } else {
        throw std::runtime_error("config: feature kind must be dct or aam");
    }

    HmmSet hmm;
    detail::run_stage("hmm-train", [&] {
        HmmCorpus train;
        for (size_t i = 0; i < entries.size(); ++i)
            if (entries[i].split == "train") {
                train.features.push_back(feats[i]);
                train.transcripts.push_back(entries[i].transcript);
            }
        if (train.features.empty())
            throw std::runtime_error("no training sentences in manifest");
        hmm = flat_start(train);
        int current = 1;
        for (int target : cfg.mixture_schedule) {
            if (target > current) {
                hmm = split_mixtures(hmm, target);
                current = target;
            }
            ReestimateResult r =
                embedded_reestimate(hmm, train, cfg.reestimate_iters);
            hmm = std::move(r.set);
            rep.hmm_loglik.insert(rep.hmm_loglik.end(),
                                  r.loglik_per_iter.begin(),
                                  r.loglik_per_iter.end());
        }
        save_hmm_set((fs::path(model_dir) / "hmm.txt").string(), hmm);
    });

    detail::run_stage("decode+score", [&] {
        std::map<std::string, AlignmentStats> per_speaker;
        std::vector<Transcript> hyps(entries.size());
        parallel_for(entries.size(), cfg.jobs, [&](size_t i) {
            if (entries[i].split != "test") return;
            hyps[i] = viterbi_decode(hmm, feats[i], cfg.insertion_penalty);
        });
        for (size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].split != "test") continue;
            AlignmentStats s = align_score(entries[i].transcript, hyps[i]);
            per_speaker[entries[i].speaker] += s;
            rep.pooled += s;
        }
        if (rep.pooled.n == 0)
            throw std::runtime_error("no test sentences in manifest");
        for (const auto& [spk, s] : per_speaker)
            rep.recognition.push_back(
                {spk,
                 {{"corr", s.correctness()},
                  {"acc", s.accuracy()},
                  {"n", static_cast<double>(s.n)}}});
        rep.recognition.push_back(
            {"pooled",
             {{"corr", rep.pooled.correctness()},
              {"acc", rep.pooled.accuracy()},
              {"n", static_cast<double>(rep.pooled.n)}}});
        write_report_csv((fs::path(report_dir) / "recognition.csv").string(),
                         rep.recognition);
    });

    return rep;
}

}  // namespace vsr
