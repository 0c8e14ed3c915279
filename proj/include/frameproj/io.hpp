#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "frameproj/errors.hpp"

namespace frameproj {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are not supported");

// Thin little-endian binary stream wrappers. All multi-byte values are written
// in host order, which the static_assert above pins to little-endian.

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open for writing: " + path);
        path_ = path;
    }

    void bytes(const void* p, size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed: " + path_);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void i32(int32_t v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
    void f64s(const std::vector<double>& v) {
        if (!v.empty()) bytes(v.data(), v.size() * sizeof(double));
    }
    void magic(const char (&m)[5]) { bytes(m, 4); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("close failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open for reading: " + path);
        path_ = path;
    }

    void bytes(void* p, size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n)
            throw IoError("truncated file: " + path_);
    }
    uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
    uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
    uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
    int32_t i32() { int32_t v; bytes(&v, 4); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
    std::vector<double> f64s(size_t n) {
        std::vector<double> v(n);
        if (n) bytes(v.data(), n * sizeof(double));
        return v;
    }
    void expect_magic(const char (&m)[5], const std::string& what) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, m, 4) != 0) throw IoError("bad magic for " + what + ": " + path_);
    }
    std::string str() {
        const uint32_t n = u32();
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }
    bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace frameproj
