// Command-line front end: corpus generation, feature extraction, AAM and
// HMM training, decoding and scoring, plus the chained `run` command.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <random>

#include "vsr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace vsr;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string manifest_path;
    int jobs = -1;
    int64_t seed = -1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_manifest) {
    cmd->add_option("--config", o.config_path, "configuration file");
    auto* m = cmd->add_option("--manifest", o.manifest_path, "dataset manifest");
    if (needs_manifest) m->required();
    cmd->add_option("--jobs", o.jobs, "worker thread count");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--out", o.out, "output directory");
}

PipelineConfig make_config(const CommonOpts& o) {
    PipelineConfig cfg = o.config_path.empty()
                             ? PipelineConfig{}
                             : PipelineConfig::load(o.config_path);
    if (o.jobs > 0) cfg.jobs = o.jobs;
    if (o.seed >= 0) cfg.seed = static_cast<uint64_t>(o.seed);
    if (!o.out.empty()) cfg.out = o.out;
    return cfg;
}

SynthConfig make_synth_config(const PipelineConfig& cfg) {
    SynthConfig sc;
    sc.seed = cfg.seed;
    sc.n_speakers = cfg.synth_speakers;
    sc.sentences_per_speaker = cfg.synth_sentences;
    sc.frames_per_viseme = cfg.synth_frames_per_viseme;
    sc.visemes_per_sentence = cfg.synth_visemes_per_sentence;
    sc.corrupt_fraction = cfg.synth_corrupt_fraction;
    return sc;
}

std::string models_dir(const PipelineConfig& cfg) {
    return (fs::path(cfg.out) / "models").string();
}
std::string features_dir(const PipelineConfig& cfg) {
    return (fs::path(cfg.out) / "features").string();
}
std::string reports_dir(const PipelineConfig& cfg) {
    return (fs::path(cfg.out) / "reports").string();
}

Aam train_aam_from_manifest(const PipelineConfig& cfg, const Manifest& m) {
    std::vector<FrameRecord> records;
    for (const auto* e : m.split_entries("train")) {
        if (e->landmark_file.empty())
            throw std::runtime_error(e->sentence + ": landmarks required");
        auto lmk = read_landmark_csv(m.resolve(e->landmark_file));
        for (size_t f = 0; f < lmk.size(); ++f) {
            FrameRecord r;
            char fid[16];
            std::snprintf(fid, sizeof(fid), "%04d", static_cast<int>(f));
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
        size_t cut = r.frame_id.rfind('/');
        auto paths = detail::list_frames(m.resolve(r.frame_id.substr(0, cut)));
        images.push_back(read_frame(paths[std::stoi(r.frame_id.substr(cut + 1))]));
        shapes.push_back(r.landmarks);
    }
    return train_aam(images, shapes, cfg.aam_config());
}

Aam load_or_train_aam(const PipelineConfig& cfg, const Manifest& m) {
    std::string path = (fs::path(models_dir(cfg)) / "aam.bin").string();
    if (fs::is_regular_file(path)) return load_aam(path);
    Aam aam = train_aam_from_manifest(cfg, m);
    fs::create_directories(models_dir(cfg));
    save_aam(path, aam);
    return aam;
}

Shape init_from_landmarks(const Aam& aam, const Shape& full_landmarks) {
    Shape part = full_landmarks.subset(aam.part_indices);
    auto bb = part.bbox();
    Rect box{static_cast<int>(std::floor(bb[0])),
             static_cast<int>(std::floor(bb[1])),
             static_cast<int>(std::ceil(bb[2] - bb[0])),
             static_cast<int>(std::ceil(bb[3] - bb[1]))};
    return init_from_bbox(aam.scales.back().shape.mean_shape, box);
}

// fits every frame of every sentence; returns per-sentence fits
std::vector<std::vector<FitResult>> fit_manifest(const PipelineConfig& cfg,
                                                 const Manifest& m,
                                                 const Aam& aam) {
    std::vector<std::vector<FitResult>> fits(m.entries.size());
    parallel_for(m.entries.size(), cfg.jobs, [&](size_t i) {
        SentenceData s = load_sentence(m, m.entries[i]);
        if (s.landmarks.empty())
            throw std::runtime_error(m.entries[i].sentence +
                                     ": landmarks required");
        for (size_t f = 0; f < s.frames.size(); ++f) {
            Shape init = init_from_landmarks(aam, s.landmarks[f].shape);
            fits[i].push_back(fit_wic(aam, s.frames[f], init));
        }
    });
    return fits;
}

int cmd_synth_gen(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    std::string dir = o.out.empty() ? (fs::path(cfg.out) / "corpus").string()
                                    : o.out;
    Manifest m = synth_generate(make_synth_config(cfg), dir,
                                cfg.synth_test_fraction);
    std::cout << "wrote " << m.entries.size() << " sentences to " << dir
              << "\n";
    return 0;
}

int cmd_dct_extract(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    fs::create_directories(features_dir(cfg));
    std::vector<FeatureSequence> feats(m.entries.size());
    detail::run_stage("dct-extract", [&] {
        parallel_for(m.entries.size(), cfg.jobs, [&](size_t i) {
            SentenceData s = load_sentence(m, m.entries[i]);
            feats[i] = dct_sentence_features(s, cfg);
        });
        for (size_t i = 0; i < m.entries.size(); ++i)
            write_features(feature_base(features_dir(cfg), m.entries[i]),
                           feats[i]);
    });
    std::cout << "extracted " << m.entries.size() << " sequences\n";
    return 0;
}

int cmd_aam_train(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    detail::run_stage("aam-train", [&] {
        Aam aam = train_aam_from_manifest(cfg, m);
        fs::create_directories(models_dir(cfg));
        save_aam((fs::path(models_dir(cfg)) / "aam.bin").string(), aam);
        for (const auto& row : kept_variance_report(aam))
            std::cout << "scale " << row.scale << ": shape " << row.shape_kept
                      << ", appearance " << row.appearance_kept
                      << " variance kept\n";
    });
    return 0;
}

int cmd_aam_fit(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    detail::run_stage("aam-fit", [&] {
        Aam aam = load_or_train_aam(cfg, m);
        auto fits = fit_manifest(cfg, m, aam);
        fs::create_directories(reports_dir(cfg));
        std::ofstream log(fs::path(reports_dir(cfg)) / "fit_log.csv");
        log << "frame,cost,converged,error\n";
        for (size_t i = 0; i < m.entries.size(); ++i) {
            auto lmk = read_landmark_csv(m.resolve(m.entries[i].landmark_file));
            for (size_t f = 0; f < fits[i].size(); ++f) {
                Shape gt = lmk[f].shape.subset(aam.part_indices);
                log << m.entries[i].speaker << "_" << m.entries[i].sentence
                    << "_" << f << "," << fits[i][f].cost_trace.back() << ","
                    << (fits[i][f].converged ? 1 : 0) << ","
                    << landmark_error(fits[i][f].shape, gt) << "\n";
            }
        }
    });
    return 0;
}

int cmd_aam_features(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    detail::run_stage("aam-features", [&] {
        Aam aam = load_or_train_aam(cfg, m);
        auto fits = fit_manifest(cfg, m, aam);
        AamFeatureVariant variant = parse_variant(cfg.aam_variant);
        fs::create_directories(features_dir(cfg));
        for (size_t i = 0; i < m.entries.size(); ++i)
            write_features(feature_base(features_dir(cfg), m.entries[i]),
                           extract_aam_features(fits[i], variant));
    });
    return 0;
}

int cmd_hmm_train(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    detail::run_stage("hmm-train", [&] {
        HmmCorpus train;
        for (const auto* e : m.split_entries("train")) {
            train.features.push_back(
                read_features(feature_base(features_dir(cfg), *e)));
            train.transcripts.push_back(e->transcript);
        }
        if (train.features.empty())
            throw std::runtime_error("no training sentences in manifest");
        HmmSet hmm = flat_start(train);
        int current = 1;
        for (int target : cfg.mixture_schedule) {
            if (target > current) {
                hmm = split_mixtures(hmm, target);
                current = target;
            }
            ReestimateResult r =
                embedded_reestimate(hmm, train, cfg.reestimate_iters);
            hmm = std::move(r.set);
            std::cout << "mixtures " << current
                      << ": log-likelihood " << r.loglik_per_iter.back()
                      << "\n";
        }
        fs::create_directories(models_dir(cfg));
        save_hmm_set((fs::path(models_dir(cfg)) / "hmm.txt").string(), hmm);
    });
    return 0;
}

int cmd_decode(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    detail::run_stage("decode", [&] {
        HmmSet hmm =
            load_hmm_set((fs::path(models_dir(cfg)) / "hmm.txt").string());
        auto test = m.split_entries("test");
        std::vector<Transcript> hyps(test.size()), refs;
        parallel_for(test.size(), cfg.jobs, [&](size_t i) {
            hyps[i] = viterbi_decode(
                hmm, read_features(feature_base(features_dir(cfg), *test[i])),
                cfg.insertion_penalty);
        });
        for (const auto* e : test) refs.push_back(e->transcript);
        fs::create_directories(reports_dir(cfg));
        write_transcripts(
            (fs::path(reports_dir(cfg)) / "hypotheses.txt").string(), hyps);
        write_transcripts(
            (fs::path(reports_dir(cfg)) / "references.txt").string(), refs);
    });
    return 0;
}

int cmd_score(const CommonOpts& o, const std::string& ref_path,
              const std::string& hyp_path, bool htk) {
    PipelineConfig cfg = make_config(o);
    std::string rp = ref_path.empty()
                         ? (fs::path(reports_dir(cfg)) / "references.txt")
                               .string()
                         : ref_path;
    std::string hp = hyp_path.empty()
                         ? (fs::path(reports_dir(cfg)) / "hypotheses.txt")
                               .string()
                         : hyp_path;
    detail::run_stage("score", [&] {
        auto refs = read_transcripts(rp);
        auto hyps = read_transcripts(hp);
        if (refs.size() != hyps.size())
            throw std::runtime_error("reference/hypothesis count mismatch");
        AlignmentStats pooled;
        for (size_t i = 0; i < refs.size(); ++i)
            pooled += align_score(refs[i], hyps[i], htk);
        std::vector<ReportRow> rows{
            {"pooled",
             {{"corr", pooled.correctness()},
              {"acc", pooled.accuracy()},
              {"n", static_cast<double>(pooled.n)}}}};
        fs::create_directories(reports_dir(cfg));
        write_report_csv(
            (fs::path(reports_dir(cfg)) / "recognition.csv").string(), rows);
        std::cout << "Corr " << pooled.correctness() << "  Acc "
                  << pooled.accuracy() << "  (N=" << pooled.n << ")\n";
    });
    return 0;
}

int cmd_fit_eval(const CommonOpts& o, double perturb) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    detail::run_stage("fit-eval", [&] {
        Aam aam = load_or_train_aam(cfg, m);
        auto test = m.split_entries("test");
        std::vector<std::vector<double>> errs(test.size());
        std::mt19937_64 rng(cfg.seed);
        // pre-drawn offsets keep the evaluation identical under any --jobs
        std::vector<std::array<double, 2>> offsets;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (size_t i = 0; i < test.size() * 4096; ++i)
            offsets.push_back({u(rng), u(rng)});
        parallel_for(test.size(), cfg.jobs, [&](size_t i) {
            SentenceData s = load_sentence(m, *test[i]);
            for (size_t f = 0; f < s.frames.size(); ++f) {
                Shape gt = s.landmarks[f].shape.subset(aam.part_indices);
                Shape init = init_from_landmarks(aam, s.landmarks[f].shape);
                double d = gt.bbox_diagonal() * perturb;
                auto off = offsets[(i * 4096 + f) % offsets.size()];
                for (size_t ci = 0; ci < init.coords.size(); ++ci)
                    init.coords[ci] += d * (ci % 2 == 0 ? off[0] : off[1]);
                FitResult fit = fit_wic(aam, s.frames[f], init);
                errs[i].push_back(landmark_error(fit.shape, gt));
            }
        });
        std::vector<double> all;
        for (const auto& e : errs) all.insert(all.end(), e.begin(), e.end());
        CedCurve ced = ced_curve(all, 0.05, 100);
        fs::create_directories(reports_dir(cfg));
        std::vector<ReportRow> rows;
        for (size_t i = 0; i < ced.thresholds.size(); ++i)
            rows.push_back({"t" + std::to_string(i),
                            {{"threshold", ced.thresholds[i]},
                             {"fraction", ced.fractions[i]}}});
        write_report_csv((fs::path(reports_dir(cfg)) / "fit_ced.csv").string(),
                         rows);
        write_svg_lines((fs::path(reports_dir(cfg)) / "fit_ced.svg").string(),
                        "normalized error", "fraction converged",
                        {{cfg.aam_warp + "+" + cfg.aam_descriptor, ced}});
        std::cout << "converged at 0.02: " << ced.at(0.02) << "\n";
    });
    return 0;
}

int cmd_run(const CommonOpts& o) {
    PipelineConfig cfg = make_config(o);
    Manifest m = read_manifest(o.manifest_path);
    PipelineReports rep = run_pipeline(cfg, m);
    std::cout << "pooled Corr " << rep.pooled.correctness() << "  Acc "
              << rep.pooled.accuracy() << "  (N=" << rep.pooled.n << ")\n";
    if (rep.ced_at_002 >= 0)
        std::cout << "fit convergence at 0.02: " << rep.ced_at_002 << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"visual speech recognition toolkit"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string ref_path, hyp_path;
    bool htk = false;
    double perturb = 0.05;

    auto* synth = app.add_subcommand("synth-gen", "render a synthetic corpus");
    add_common(synth, o, false);
    auto* dct = app.add_subcommand("dct-extract", "DCT ROI feature extraction");
    add_common(dct, o, true);
    auto* atrain = app.add_subcommand("aam-train", "train the appearance model");
    add_common(atrain, o, true);
    auto* afit = app.add_subcommand("aam-fit", "fit every frame, write a log");
    add_common(afit, o, true);
    auto* afeat = app.add_subcommand("aam-features",
                                     "fit and emit feature sequences");
    add_common(afeat, o, true);
    auto* htrain = app.add_subcommand("hmm-train", "train the recognizer");
    add_common(htrain, o, true);
    auto* dec = app.add_subcommand("decode", "decode the test split");
    add_common(dec, o, true);
    auto* score = app.add_subcommand("score", "align and score transcripts");
    add_common(score, o, false);
    score->add_option("--ref", ref_path, "reference transcript file");
    score->add_option("--hyp", hyp_path, "hypothesis transcript file");
    score->add_flag("--htk-weights", htk, "weighted alignment costs (10/7/7)");
    auto* feval = app.add_subcommand("fit-eval",
                                     "perturbed-initialization fit evaluation");
    add_common(feval, o, true);
    feval->add_option("--perturb", perturb,
                      "initialization offset, fraction of the box diagonal");
    auto* run = app.add_subcommand("run", "full chained pipeline");
    add_common(run, o, true);

    CLI11_PARSE(app, argc, argv);
    try {
        if (synth->parsed()) return cmd_synth_gen(o);
        if (dct->parsed()) return cmd_dct_extract(o);
        if (atrain->parsed()) return cmd_aam_train(o);
        if (afit->parsed()) return cmd_aam_fit(o);
        if (afeat->parsed()) return cmd_aam_features(o);
        if (htrain->parsed()) return cmd_hmm_train(o);
        if (dec->parsed()) return cmd_decode(o);
        if (score->parsed()) return cmd_score(o, ref_path, hyp_path, htk);
        if (feval->parsed()) return cmd_fit_eval(o, perturb);
        if (run->parsed()) return cmd_run(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
