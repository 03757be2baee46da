#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "visyn/common.hpp"

namespace visyn {

// Dense raster, row-major, channel-interleaved, values nominally in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.f)
        : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

    float& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
    float at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    // Bilinear lookup with clamp-to-edge; (x, y) in pixel coordinates where
    // the center of pixel (i, j) sits at (i + 0.5, j + 0.5).
    std::array<double, 3> bilinear(double x, double y) const {
        double fx = x - 0.5, fy = y - 0.5;
        int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
        double ax = fx - x0, ay = fy - y0;
        auto cl = [](int v, int hi) { return std::clamp(v, 0, hi); };
        int x1 = cl(x0 + 1, width - 1), y1 = cl(y0 + 1, height - 1);
        x0 = cl(x0, width - 1);
        y0 = cl(y0, height - 1);
        std::array<double, 3> out{0, 0, 0};
        int nc = std::min(channels, 3);
        for (int c = 0; c < nc; ++c) {
            double v00 = at(x0, y0, c), v10 = at(x1, y0, c);
            double v01 = at(x0, y1, c), v11 = at(x1, y1, c);
            out[c] = (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 +
                     ax * ay * v11;
        }
        if (channels == 1) out[1] = out[2] = out[0];
        return out;
    }
};

// --- PPM (P6, maxval 255) ---------------------------------------------------

inline void write_ppm(const std::string& path, const Image& img) {
    if (img.channels != 3) throw Error("write_ppm: need 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(std::size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = std::clamp(img.at(x, y, c), 0.f, 1.f);
                row[std::size_t(x) * 3 + c] = (unsigned char)std::lround(v * 255.f);
            }
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!out) throw Error("write failed: " + path);
}

namespace detail {
inline int ppm_token(std::istream& in, const std::string& path, std::int64_t& offset) {
    // skips whitespace and '#' comments
    int c = in.get();
    ++offset;
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') { c = in.get(); ++offset; }
        c = in.get();
        ++offset;
    }
    if (c == EOF) throw FormatError(path + ": truncated header", offset);
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
        ++offset;
    }
    if (!any) throw FormatError(path + ": expected integer in header", offset - 1);
    return value;
}
}  // namespace detail

inline Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::int64_t offset = 0;
    char m0 = char(in.get()), m1 = char(in.get());
    offset += 2;
    if (m0 != 'P' || m1 != '6') throw FormatError(path + ": not a P6 PPM", 0);
    int w = detail::ppm_token(in, path, offset);
    int h = detail::ppm_token(in, path, offset);
    int maxval = detail::ppm_token(in, path, offset);
    if (maxval != 255) throw FormatError(path + ": unsupported maxval " + std::to_string(maxval), offset);
    Image img(w, h, 3);
    std::vector<unsigned char> row(std::size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
        if (std::size_t(in.gcount()) != row.size())
            throw FormatError(path + ": truncated pixel data", offset + in.gcount());
        offset += std::int64_t(row.size());
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = float(row[std::size_t(x) * 3 + c]) / 255.f;
    }
    return img;
}

// --- PFM (PF color / Pf gray, little-endian, bottom-up rows) ----------------

inline void write_pfm(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) throw Error("write_pfm: need 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << (img.channels == 3 ? "PF" : "Pf") << "\n"
        << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y) {
        const float* row = &img.data[std::size_t(y) * img.width * img.channels];
        out.write(reinterpret_cast<const char*>(row),
                  std::streamsize(sizeof(float) * img.width * img.channels));
    }
    if (!out) throw Error("write failed: " + path);
}

inline Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::string tag;
    int w = 0, h = 0;
    double scale = 0;
    in >> tag >> w >> h >> scale;
    if (tag != "PF" && tag != "Pf") throw FormatError(path + ": not a PFM", 0);
    if (w <= 0 || h <= 0) throw FormatError(path + ": bad dimensions", std::int64_t(in.tellg()));
    if (scale >= 0) throw FormatError(path + ": big-endian PFM unsupported", std::int64_t(in.tellg()));
    in.get();  // single whitespace byte after the scale line
    Image img(w, h, tag == "PF" ? 3 : 1);
    for (int y = h - 1; y >= 0; --y) {
        float* row = &img.data[std::size_t(y) * w * img.channels];
        std::int64_t pos = std::int64_t(in.tellg());
        in.read(reinterpret_cast<char*>(row), std::streamsize(sizeof(float) * w * img.channels));
        if (in.gcount() != std::streamsize(sizeof(float) * w * img.channels))
            throw FormatError(path + ": truncated pixel data", pos + in.gcount());
    }
    return img;
}

}  // namespace visyn
