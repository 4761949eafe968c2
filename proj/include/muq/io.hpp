#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "muq/error.hpp"

namespace muq::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

class BinaryWriter {
  public:
    explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open for writing: " + path);
    }

    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void magic(const char m[4]) { bytes(m, 4); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
    void f64s(const double* p, std::size_t n) { bytes(p, 8 * n); }

    bool good() const { return out_.good(); }

  private:
    std::ofstream out_;
};

class BinaryReader {
  public:
    explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw CorruptFileError("cannot open: " + path);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw CorruptFileError("truncated file: " + path_);
    }
    void expect_magic(const char m[4]) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, m, 4) != 0) throw CorruptFileError("bad magic in " + path_);
    }
    std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    float f32() { float v; bytes(&v, 4); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
    void f64s(double* p, std::size_t n) { bytes(p, 8 * n); }

    bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }
    const std::string& path() const { return path_; }

  private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace muq::io
