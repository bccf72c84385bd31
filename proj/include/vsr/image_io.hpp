#pragma once

// 8-bit PGM/PPM/PNG readers and PGM/PPM writers. Intensities map to [0,1]
// by /255 on read and round(v*255) on write.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include <png.h>

#include "vsr/image.hpp"

namespace vsr {

namespace detail {

inline int pnm_next_token(std::istream& in) {
    // Skips whitespace and '#' comments, then parses one integer.
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            in.unget();
            int v;
            if (!(in >> v)) break;
            return v;
        }
    }
    throw std::runtime_error("PNM: truncated header");
}

struct PnmHeader {
    std::string magic;
    int width = 0, height = 0, maxval = 0;
};

inline PnmHeader read_pnm_header(std::istream& in) {
    PnmHeader h;
    char m0, m1;
    if (!in.get(m0) || !in.get(m1))
        throw std::runtime_error("PNM: missing magic");
    h.magic = std::string{m0, m1};
    h.width = pnm_next_token(in);
    h.height = pnm_next_token(in);
    h.maxval = pnm_next_token(in);
    // Single whitespace byte separates header from binary raster.
    in.get();
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 255)
        throw std::runtime_error("PNM: unsupported header");
    return h;
}

}  // namespace detail

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    auto h = detail::read_pnm_header(in);
    if (h.magic != "P5" && h.magic != "P2")
        throw std::runtime_error(path + ": not a PGM file");
    GrayImage img(h.width, h.height);
    size_t n = img.data().size();
    if (h.magic == "P5") {
        std::string buf(n, '\0');
        in.read(buf.data(), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n)
            throw std::runtime_error(path + ": truncated raster");
        for (size_t i = 0; i < n; ++i)
            img.data()[i] =
                static_cast<unsigned char>(buf[i]) / static_cast<double>(h.maxval);
    } else {
        for (size_t i = 0; i < n; ++i) {
            int v;
            if (!(in >> v)) throw std::runtime_error(path + ": truncated raster");
            img.data()[i] = v / static_cast<double>(h.maxval);
        }
    }
    return img;
}

inline RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    auto h = detail::read_pnm_header(in);
    if (h.magic != "P6" && h.magic != "P3")
        throw std::runtime_error(path + ": not a PPM file");
    RgbImage img(h.width, h.height);
    size_t n = img.data().size();
    if (h.magic == "P6") {
        std::string buf(n, '\0');
        in.read(buf.data(), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n)
            throw std::runtime_error(path + ": truncated raster");
        for (size_t i = 0; i < n; ++i)
            img.data()[i] =
                static_cast<unsigned char>(buf[i]) / static_cast<double>(h.maxval);
    } else {
        for (size_t i = 0; i < n; ++i) {
            int v;
            if (!(in >> v)) throw std::runtime_error(path + ": truncated raster");
            img.data()[i] = v / static_cast<double>(h.maxval);
        }
    }
    return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    std::string buf(img.data().size(), '\0');
    for (size_t i = 0; i < buf.size(); ++i) {
        double v = std::clamp(img.data()[i], 0.0, 1.0);
        buf[i] = static_cast<char>(
            static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::string buf(img.data().size(), '\0');
    for (size_t i = 0; i < buf.size(); ++i) {
        double v = std::clamp(img.data()[i], 0.0, 1.0);
        buf[i] = static_cast<char>(
            static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

// PNG read via libpng; 8-bit expansion, alpha stripped.
inline RgbImage read_png(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"),
                                             std::fclose);
    if (!fp) throw std::runtime_error("cannot open " + path);
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error(path + ": PNG decode error");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    RgbImage img(static_cast<int>(w), static_cast<int>(h));
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(static_cast<int>(x), static_cast<int>(y), c) =
                    row[x * 3 + c] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

// Loads a frame by extension; grayscale files load as replicated RGB.
inline RgbImage read_frame(const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png") return read_png(path);
    if (ext == ".ppm") return read_ppm(path);
    if (ext == ".pgm") {
        GrayImage g = read_pgm(path);
        RgbImage rgb(g.width(), g.height());
        for (int y = 0; y < g.height(); ++y)
            for (int x = 0; x < g.width(); ++x)
                for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = g.at(x, y);
        return rgb;
    }
    throw std::runtime_error(path + ": unsupported frame format");
}

}  // namespace vsr
