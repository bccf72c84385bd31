#pragma once

// Minimal little-endian binary serialization for model files.

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsr {

class BinWriter {
public:
    explicit BinWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path);
    }

    void u32(uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
    void i32(int32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
    void f64(double v) { out_.write(reinterpret_cast<const char*>(&v), 8); }

    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void vec_f64(const std::vector<double>& v) {
        u32(static_cast<uint32_t>(v.size()));
        out_.write(reinterpret_cast<const char*>(v.data()),
                   static_cast<std::streamsize>(v.size() * 8));
    }
    void vec_i32(const std::vector<int>& v) {
        u32(static_cast<uint32_t>(v.size()));
        out_.write(reinterpret_cast<const char*>(v.data()),
                   static_cast<std::streamsize>(v.size() * 4));
    }
    void mat(const Eigen::MatrixXd& m) {
        u32(static_cast<uint32_t>(m.rows()));
        u32(static_cast<uint32_t>(m.cols()));
        out_.write(reinterpret_cast<const char*>(m.data()),
                   static_cast<std::streamsize>(m.size() * 8));
    }
    void evec(const Eigen::VectorXd& v) {
        u32(static_cast<uint32_t>(v.size()));
        out_.write(reinterpret_cast<const char*>(v.data()),
                   static_cast<std::streamsize>(v.size() * 8));
    }

private:
    std::ofstream out_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("cannot open " + path);
    }

    uint32_t u32() {
        uint32_t v;
        read(&v, 4);
        return v;
    }
    int32_t i32() {
        int32_t v;
        read(&v, 4);
        return v;
    }
    double f64() {
        double v;
        read(&v, 8);
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
    std::vector<double> vec_f64() {
        uint32_t n = u32();
        std::vector<double> v(n);
        read(v.data(), static_cast<size_t>(n) * 8);
        return v;
    }
    std::vector<int> vec_i32() {
        uint32_t n = u32();
        std::vector<int> v(n);
        read(v.data(), static_cast<size_t>(n) * 4);
        return v;
    }
    Eigen::MatrixXd mat() {
        uint32_t r = u32(), c = u32();
        Eigen::MatrixXd m(r, c);
        read(m.data(), static_cast<size_t>(r) * c * 8);
        return m;
    }
    Eigen::VectorXd evec() {
        uint32_t n = u32();
        Eigen::VectorXd v(n);
        read(v.data(), static_cast<size_t>(n) * 8);
        return v;
    }

private:
    void read(void* dst, size_t n) {
        in_.read(reinterpret_cast<char*>(dst),
                 static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n)
            throw std::runtime_error("truncated model file");
    }
    std::ifstream in_;
};

}  // namespace vsr
