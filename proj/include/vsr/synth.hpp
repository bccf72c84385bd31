#pragma once

// Synthetic talking-mouth corpus: renders grayscale scenes of a face whose
// mouth opening, width and protrusion follow a hidden viseme sequence with
// smooth co-articulated transitions, and emits 68-point-compatible
// landmarks, confidences and ground-truth transcripts.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vsr/aam.hpp"
#include "vsr/image.hpp"
#include "vsr/shape.hpp"

namespace vsr {

// 12-class inventory including silence.
inline const std::vector<std::string>& synth_viseme_labels() {
    static const std::vector<std::string> labels = {
        "sil", "v01", "v02", "v03", "v04", "v05",
        "v06", "v07", "v08", "v09", "v10", "v11"};
    return labels;
}

struct Articulation {
    double opening = 0.0;    // [0,1]
    double width = 0.5;      // [0,1]
    double protrusion = 0.0; // [0,1]
};

// Fixed articulation target per viseme class; classes are spread over the
// corners and edges of the articulation cube so they are separable.
inline Articulation synth_viseme_target(int viseme) {
    static const Articulation table[12] = {
        {0.02, 0.45, 0.10},  // sil: nearly closed
        {0.95, 0.55, 0.10},  // v01: wide open
        {0.70, 0.95, 0.05},  // v02: open + spread
        {0.15, 0.95, 0.00},  // v03: spread, closed (smile-like)
        {0.55, 0.15, 0.90},  // v04: rounded, protruded
        {0.10, 0.20, 0.95},  // v05: tight round (oo)
        {0.40, 0.60, 0.45},  // v06: mid open
        {0.80, 0.25, 0.55},  // v07: open round
        {0.05, 0.70, 0.35},  // v08: closed, mild spread
        {0.60, 0.80, 0.70},  // v09: open spread protruded
        {0.30, 0.40, 0.20},  // v10: neutral-ish
        {0.90, 0.90, 0.85},  // v11: everything large
    };
    return table[viseme];
}

struct SpeakerAppearance {
    double face_scale = 1.0;
    double skin = 0.62;
    double lip = 0.34;
    double tex_phase = 0.0;
    double tex_amp = 0.05;
    double jaw_round = 1.0;
};

struct SynthFrameParams {
    Articulation art;
    double gain = 1.0;    // per-frame illumination gain
    double bias = 0.0;    // per-frame illumination bias
    double spot_x = 0.0;  // moving highlight
    double spot_y = 0.0;
    double spot_amp = 0.0;
};

inline constexpr int kSynthW = 160;
inline constexpr int kSynthH = 120;

namespace synth_detail {

inline double smooth_edge(double dist, double soft = 1.2) {
    // 1 inside (dist<0), 0 outside, smooth ramp of width `soft` pixels
    double t = std::clamp(0.5 - dist / soft, 0.0, 1.0);
    return t * t * (3 - 2 * t);
}

// Approximate signed distance to an ellipse boundary (negative inside).
inline double ellipse_dist(double dx, double dy, double a, double b) {
    double e = std::sqrt((dx * dx) / (a * a) + (dy * dy) / (b * b));
    return (e - 1.0) * std::min(a, b);
}

struct MouthGeometry {
    double cx, cy;       // mouth center
    double A, B;         // outer lip half-axes
    double A2, B2;       // aperture half-axes
    double thick;
};

inline MouthGeometry mouth_geometry(const SpeakerAppearance& spk,
                                    const Articulation& art) {
    MouthGeometry g;
    double fs = spk.face_scale;
    g.cx = kSynthW / 2.0;
    g.cy = 55.0 + 23.0 * fs;
    g.thick = (3.5 + 3.0 * art.protrusion) * fs;
    g.A2 = (8.0 + 12.0 * art.width) * fs;
    g.B2 = (0.8 + 11.0 * art.opening) * fs;
    g.A = g.A2 + g.thick;
    g.B = g.B2 + g.thick;
    return g;
}

}  // namespace synth_detail

inline GrayImage synth_render(const SpeakerAppearance& spk,
                              const SynthFrameParams& fp) {
    using namespace synth_detail;
    GrayImage img(kSynthW, kSynthH);
    double fs = spk.face_scale;
    double fcx = kSynthW / 2.0, fcy = 55.0;
    double fa = 52.0 * fs, fb = 46.0 * fs;
    MouthGeometry mg = mouth_geometry(spk, fp.art);

    for (int y = 0; y < kSynthH; ++y) {
        for (int x = 0; x < kSynthW; ++x) {
            double v = 0.12 + 0.10 * (static_cast<double>(y) / kSynthH);  // bg

            double fd = ellipse_dist(x - fcx, y - fcy, fa, fb);
            double face_m = smooth_edge(fd, 1.6);
            if (face_m > 0) {
                double skin = spk.skin +
                              spk.tex_amp *
                                  std::sin(0.21 * x + spk.tex_phase) *
                                  std::cos(0.17 * y - spk.tex_phase) +
                              0.06 * std::sin(0.05 * (x + 2 * y));
                // shading toward the face rim
                skin -= 0.10 * std::clamp(-fd / 40.0, 0.0, 1.0) *
                        (1 - std::clamp(-fd / 40.0, 0.0, 1.0)) * 2.0;
                v = v * (1 - face_m) + skin * face_m;
            }

            double od = ellipse_dist(x - mg.cx, y - mg.cy, mg.A, mg.B);
            double lip_m = smooth_edge(od, 1.4);
            if (lip_m > 0) {
                double lip = spk.lip - 0.08 * fp.art.protrusion +
                             0.03 * std::sin(0.5 * (x - mg.cx));
                v = v * (1 - lip_m) + lip * lip_m;
            }
            double id = ellipse_dist(x - mg.cx, y - mg.cy, mg.A2, mg.B2);
            double ap_m = smooth_edge(id, 1.2);
            if (ap_m > 0) {
                double mouth = 0.08;
                // teeth band near the top of an open aperture
                if (fp.art.opening > 0.25 &&
                    y < mg.cy - 0.25 * mg.B2 && y > mg.cy - 0.85 * mg.B2)
                    mouth = 0.75;
                v = v * (1 - ap_m) + mouth * ap_m;
            }

            if (fp.spot_amp > 0) {
                double sx = x - fp.spot_x, sy = y - fp.spot_y;
                v += fp.spot_amp * std::exp(-(sx * sx + sy * sy) / (2 * 81.0));
            }
            v = v * fp.gain + fp.bias;
            img.at(x, y) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

// 68-point-compatible landmarks consistent with the rendered scene.
inline Shape synth_landmarks(const SpeakerAppearance& spk,
                             const Articulation& art) {
    using namespace synth_detail;
    double fs = spk.face_scale;
    double fcx = kSynthW / 2.0, fcy = 55.0;
    double fa = 52.0 * fs, fb = 46.0 * fs;
    MouthGeometry mg = mouth_geometry(spk, art);

    std::vector<double> c(136, 0.0);
    auto put = [&](int i, double x, double y) {
        c[2 * i] = x;
        c[2 * i + 1] = y;
    };
    // jaw 0-16: lower face ellipse arc, left ear to right ear
    for (int i = 0; i < 17; ++i) {
        double theta = M_PI + (i / 16.0) * M_PI;  // pi -> 2pi (bottom half)
        put(i, fcx + fa * std::cos(theta) * spk.jaw_round,
            fcy - fb * std::sin(theta));
    }
    // brows 17-26: two arcs
    for (int i = 0; i < 5; ++i) {
        double t = i / 4.0;
        put(17 + i, fcx - 38 * fs + 22 * fs * t,
            fcy - 26 * fs - 6 * fs * std::sin(M_PI * t));
        put(22 + i, fcx + 16 * fs + 22 * fs * t,
            fcy - 26 * fs - 6 * fs * std::sin(M_PI * t));
    }
    // nose 27-35
    for (int i = 0; i < 4; ++i)
        put(27 + i, fcx, fcy - 16 * fs + i * 7.0 * fs);
    for (int i = 0; i < 5; ++i)
        put(31 + i, fcx - 8 * fs + i * 4.0 * fs, fcy + 8 * fs);
    // eyes 36-47: two hexagons
    for (int e = 0; e < 2; ++e) {
        double ecx = fcx + (e == 0 ? -26.0 : 26.0) * fs;
        double ecy = fcy - 14 * fs;
        for (int i = 0; i < 6; ++i) {
            double th = i * M_PI / 3.0;
            put(36 + 6 * e + i, ecx + 9 * fs * std::cos(th),
                ecy - 4 * fs * std::sin(th));
        }
    }
    // outer lips 48-59 on the (A,B) ellipse
    static const double outer_deg[12] = {180, 150, 120, 90,  60,  30,
                                         0,   -30, -60, -90, -120, -150};
    for (int i = 0; i < 12; ++i) {
        double th = outer_deg[i] * M_PI / 180.0;
        put(48 + i, mg.cx + mg.A * std::cos(th), mg.cy - mg.B * std::sin(th));
    }
    // inner lips 60-67 on the aperture ellipse
    static const double inner_deg[8] = {180, 135, 90, 45, 0, -45, -90, -135};
    for (int i = 0; i < 8; ++i) {
        double th = inner_deg[i] * M_PI / 180.0;
        put(60 + i, mg.cx + mg.A2 * std::cos(th), mg.cy - mg.B2 * std::sin(th));
    }
    return Shape(c);
}

struct SynthSentence {
    std::string sentence_id;
    std::vector<std::string> transcript;       // viseme labels
    std::vector<GrayImage> frames;
    std::vector<LandmarkFrame> landmarks;      // with confidence
    std::vector<int> frame_viseme;             // per-frame dominant class
};

struct SynthConfig {
    uint64_t seed = 1;
    int n_speakers = 2;
    int sentences_per_speaker = 8;
    int frames_per_viseme = 8;
    int visemes_per_sentence = 7;  // excluding enclosing silences
    double corrupt_fraction = 0.0; // frames with noisy low-confidence landmarks
    double illum_wobble = 0.06;    // per-frame gain/bias range
    double spot_amp = 0.10;        // moving highlight strength
};

inline double synth_uniform(std::mt19937_64& rng) {
    return (rng() >> 11) * 0x1.0p-53;
}

inline SpeakerAppearance synth_speaker(uint64_t seed, int speaker) {
    std::mt19937_64 rng(seed * 1000003u + speaker * 7919u + 17);
    SpeakerAppearance s;
    s.face_scale = 0.9 + 0.2 * synth_uniform(rng);
    s.skin = 0.56 + 0.12 * synth_uniform(rng);
    s.lip = 0.30 + 0.08 * synth_uniform(rng);
    s.tex_phase = 6.28 * synth_uniform(rng);
    s.tex_amp = 0.03 + 0.04 * synth_uniform(rng);
    s.jaw_round = 0.95 + 0.1 * synth_uniform(rng);
    return s;
}

// One sentence: silence - random visemes - silence, with raised-cosine
// co-articulation between consecutive targets.
inline SynthSentence synth_sentence(const SynthConfig& cfg, int speaker,
                                    int sentence) {
    std::mt19937_64 rng(cfg.seed * 2654435761u + speaker * 40503u +
                        sentence * 65537u + 3);
    const SpeakerAppearance spk = synth_speaker(cfg.seed, speaker);

    SynthSentence out;
    char sid[32];
    std::snprintf(sid, sizeof(sid), "s%02d_u%03d", speaker, sentence);
    out.sentence_id = sid;

    std::vector<int> visemes{0};
    for (int i = 0; i < cfg.visemes_per_sentence; ++i) {
        int v = 1 + static_cast<int>(synth_uniform(rng) * 11);
        v = std::min(v, 11);
        if (v == visemes.back())
            v = 1 + v % 11;  // avoid immediate repeats
        visemes.push_back(v);
    }
    visemes.push_back(0);
    for (int v : visemes) out.transcript.push_back(synth_viseme_labels()[v]);

    int fpv = cfg.frames_per_viseme;
    int n_frames = static_cast<int>(visemes.size()) * fpv;
    // per-frame articulation: hold each target, then smooth across
    // boundaries with a raised-cosine window of half the viseme duration
    std::vector<Articulation> raw(n_frames);
    for (int f = 0; f < n_frames; ++f) {
        raw[f] = synth_viseme_target(visemes[f / fpv]);
        out.frame_viseme.push_back(visemes[f / fpv]);
    }
    int halfw = std::max(1, fpv / 3);
    std::vector<Articulation> art(n_frames);
    for (int f = 0; f < n_frames; ++f) {
        double wsum = 0, o = 0, w = 0, p = 0;
        for (int k = -halfw; k <= halfw; ++k) {
            int i = std::clamp(f + k, 0, n_frames - 1);
            double wk = 0.5 * (1 + std::cos(M_PI * k / (halfw + 1)));
            wsum += wk;
            o += wk * raw[i].opening;
            w += wk * raw[i].width;
            p += wk * raw[i].protrusion;
        }
        art[f] = {o / wsum, w / wsum, p / wsum};
    }

    for (int f = 0; f < n_frames; ++f) {
        SynthFrameParams fp;
        fp.art = art[f];
        fp.gain = 1.0 + cfg.illum_wobble * (2 * synth_uniform(rng) - 1);
        fp.bias = 0.5 * cfg.illum_wobble * (2 * synth_uniform(rng) - 1);
        fp.spot_amp = cfg.spot_amp;
        double ph = 2 * M_PI * f / std::max(1, n_frames);
        fp.spot_x = kSynthW / 2.0 + 35 * std::cos(ph + speaker);
        fp.spot_y = 45.0 + 20 * std::sin(1.7 * ph);
        out.frames.push_back(synth_render(spk, fp));

        LandmarkFrame lf;
        lf.shape = synth_landmarks(spk, art[f]);
        lf.confidence = 1.0;
        if (cfg.corrupt_fraction > 0 &&
            synth_uniform(rng) < cfg.corrupt_fraction) {
            lf.confidence = 0.5 + 0.43 * synth_uniform(rng);  // < 0.94
            for (auto& v : lf.shape.coords)
                v += 4.0 * (2 * synth_uniform(rng) - 1);
        }
        out.landmarks.push_back(std::move(lf));
    }
    return out;
}

}  // namespace vsr
