#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "visyn/common.hpp"

namespace visyn {

// Little-endian binary writer for the VS* container formats.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open for writing: " + path);
        path_ = path;
    }

    void magic(const char tag[4]) { raw(tag, 4); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_le(bits);
    }
    void f32_array(const double* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) f32(float(data[i]));
    }
    void str(const std::string& s) {
        u32(std::uint32_t(s.size()));
        raw(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw Error("write failed: " + path_);
    }

private:
    template <typename T>
    void put_le(T v) {
        unsigned char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = (v >> (8 * i)) & 0xff;
        raw(reinterpret_cast<const char*>(buf), sizeof(T));
    }
    void raw(const char* p, std::size_t n) { out_.write(p, std::streamsize(n)); }

    std::ofstream out_;
    std::string path_;
};

// Reader with byte-offset tracking; every failure reports the offset.
class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw Error("cannot open: " + path);
    }

    void expect_magic(const char tag[4]) {
        char buf[4];
        raw(buf, 4);
        if (std::memcmp(buf, tag, 4) != 0)
            throw FormatError(path_ + ": bad magic, expected \"" + std::string(tag, 4) + "\"",
                              offset_ - 4);
    }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    float f32() {
        std::uint32_t bits = get_le<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    void f32_array(double* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) data[i] = double(f32());
    }
    std::string str(std::size_t max_len = 1u << 20) {
        std::uint32_t n = u32();
        if (n > max_len) throw FormatError(path_ + ": string length " + std::to_string(n), offset_ - 4);
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

    std::int64_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& msg) const { throw FormatError(path_ + ": " + msg, offset_); }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    template <typename T>
    T get_le() {
        unsigned char buf[sizeof(T)];
        raw(reinterpret_cast<char*>(buf), sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(buf[i]) << (8 * i);
        return v;
    }
    void raw(char* p, std::size_t n) {
        in_.read(p, std::streamsize(n));
        if (std::size_t(in_.gcount()) != n)
            throw FormatError(path_ + ": unexpected end of file", offset_ + in_.gcount());
        offset_ += std::int64_t(n);
    }

    std::ifstream in_;
    std::string path_;
    std::int64_t offset_ = 0;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

}  // namespace visyn
