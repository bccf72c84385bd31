#pragma once

// Per-frame feature sequences and their on-disk format: a CSV matrix (one
// row per frame) plus a key=value sidecar carrying dim, frame rate and the
// feature kind. Format version 1.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsr {

struct FeatureSequence {
    std::vector<std::vector<double>> frames;
    int dim = 0;
    double frame_rate = 0.0;
    std::string kind;  // e.g. "dct132", "aam-SAdA"

    size_t size() const { return frames.size(); }

    void validate() const {
        if (dim <= 0) throw std::runtime_error("FeatureSequence: dim <= 0");
        for (const auto& f : frames)
            if (static_cast<int>(f.size()) != dim)
                throw std::runtime_error("FeatureSequence: ragged frames");
    }
};

namespace detail {

inline std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline void write_features(const std::string& base_path,
                           const FeatureSequence& seq) {
    seq.validate();
    std::ofstream meta(base_path + ".meta");
    if (!meta) throw std::runtime_error("cannot write " + base_path + ".meta");
    meta << "version=1\n"
         << "kind=" << seq.kind << "\n"
         << "dim=" << seq.dim << "\n"
         << "frames=" << seq.frames.size() << "\n"
         << "frame_rate=" << detail::fmt_g17(seq.frame_rate) << "\n";
    std::ofstream csv(base_path + ".csv");
    if (!csv) throw std::runtime_error("cannot write " + base_path + ".csv");
    for (const auto& f : seq.frames) {
        for (size_t i = 0; i < f.size(); ++i) {
            if (i) csv << ',';
            csv << detail::fmt_g17(f[i]);
        }
        csv << '\n';
    }
}

inline FeatureSequence read_features(const std::string& base_path) {
    FeatureSequence seq;
    std::ifstream meta(base_path + ".meta");
    if (!meta) throw std::runtime_error("cannot open " + base_path + ".meta");
    std::string line;
    size_t n_frames = 0;
    while (std::getline(meta, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "version" && val != "1")
            throw std::runtime_error(base_path + ": unsupported feature version " + val);
        else if (key == "kind")
            seq.kind = val;
        else if (key == "dim")
            seq.dim = std::stoi(val);
        else if (key == "frames")
            n_frames = std::stoul(val);
        else if (key == "frame_rate")
            seq.frame_rate = std::stod(val);
    }
    std::ifstream csv(base_path + ".csv");
    if (!csv) throw std::runtime_error("cannot open " + base_path + ".csv");
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(seq.dim);
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        seq.frames.push_back(std::move(row));
    }
    if (seq.frames.size() != n_frames)
        throw std::runtime_error(base_path + ": frame count mismatch with sidecar");
    seq.validate();
    return seq;
}

}  // namespace vsr
