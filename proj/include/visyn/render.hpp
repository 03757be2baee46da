#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "visyn/camera.hpp"
#include "visyn/image.hpp"
#include "visyn/mesh.hpp"

namespace visyn {

struct DepthRaster {
    int width = 0, height = 0;
    std::vector<double> depth;  // camera-space depth, +inf where empty

    DepthRaster(int w, int h)
        : width(w), height(h), depth(std::size_t(w) * h, std::numeric_limits<double>::infinity()) {}

    double at(int x, int y) const { return depth[std::size_t(y) * width + x]; }
};

namespace detail {

struct ProjectedTri {
    Vec3 p[3];  // x, y in pixels; z = camera depth
    bool valid;
};

inline ProjectedTri project_triangle(const std::vector<double>& positions,
                                     const std::array<int, 3>& tri, const Mat34& P) {
    ProjectedTri out;
    out.valid = true;
    for (int k = 0; k < 3; ++k) {
        Vec3 X(positions[3 * tri[k]], positions[3 * tri[k] + 1], positions[3 * tri[k] + 2]);
        Eigen::Vector4d h(X.x(), X.y(), X.z(), 1.0);
        Vec3 p = P * h;
        if (p.z() <= 1e-12) {
            out.valid = false;
            return out;
        }
        out.p[k] = {p.x() / p.z(), p.y() / p.z(), p.z()};
    }
    return out;
}

inline double edge_fn(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

}  // namespace detail

// Rasterizes every triangle into a z-buffer. Depth is interpolated
// perspective-correctly (linear in 1/z across the screen).
inline DepthRaster rasterize_depth(const std::vector<double>& positions,
                                   const std::vector<std::array<int, 3>>& triangles, const Mat34& P,
                                   int width, int height) {
    DepthRaster raster(width, height);
    for (const auto& tri : triangles) {
        auto pt = detail::project_triangle(positions, tri, P);
        if (!pt.valid) continue;
        double area = detail::edge_fn(pt.p[0].x(), pt.p[0].y(), pt.p[1].x(), pt.p[1].y(), pt.p[2].x(),
                                      pt.p[2].y());
        if (std::abs(area) < 1e-12) continue;
        int x0 = std::max(0, int(std::floor(std::min({pt.p[0].x(), pt.p[1].x(), pt.p[2].x()}) - 0.5)));
        int x1 = std::min(width - 1,
                          int(std::ceil(std::max({pt.p[0].x(), pt.p[1].x(), pt.p[2].x()}) + 0.5)));
        int y0 = std::max(0, int(std::floor(std::min({pt.p[0].y(), pt.p[1].y(), pt.p[2].y()}) - 0.5)));
        int y1 = std::min(height - 1,
                          int(std::ceil(std::max({pt.p[0].y(), pt.p[1].y(), pt.p[2].y()}) + 0.5)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double px = x + 0.5, py = y + 0.5;
                double w0 = detail::edge_fn(pt.p[1].x(), pt.p[1].y(), pt.p[2].x(), pt.p[2].y(), px, py);
                double w1 = detail::edge_fn(pt.p[2].x(), pt.p[2].y(), pt.p[0].x(), pt.p[0].y(), px, py);
                double w2 = detail::edge_fn(pt.p[0].x(), pt.p[0].y(), pt.p[1].x(), pt.p[1].y(), px, py);
                if (area < 0) {
                    w0 = -w0;
                    w1 = -w1;
                    w2 = -w2;
                }
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                double s = w0 + w1 + w2;
                if (s <= 0) continue;
                double inv_z = (w0 / pt.p[0].z() + w1 / pt.p[1].z() + w2 / pt.p[2].z()) / s;
                double z = 1.0 / inv_z;
                double& slot = raster.depth[std::size_t(y) * width + x];
                if (z < slot) slot = z;
            }
    }
    return raster;
}

// Flat-lit textured render used by the synthetic scene generator. Texture is
// addressed through per-vertex uv; shading is a lambert factor against a fixed
// light, flat per triangle.
inline Image render_textured(const std::vector<double>& positions, const TriMesh& mesh,
                             const Image& texture, const Mat34& P, int width, int height,
                             const Vec3& light_dir = Vec3(0.2, -0.3, 1.0).normalized(),
                             float background = 0.05f) {
    Image out(width, height, 3, background);
    DepthRaster zbuf(width, height);
    for (const auto& tri : mesh.triangles) {
        auto pt = detail::project_triangle(positions, tri, P);
        if (!pt.valid) continue;
        double area = detail::edge_fn(pt.p[0].x(), pt.p[0].y(), pt.p[1].x(), pt.p[1].y(), pt.p[2].x(),
                                      pt.p[2].y());
        if (std::abs(area) < 1e-12) continue;
        Vec3 a(positions[3 * tri[0]], positions[3 * tri[0] + 1], positions[3 * tri[0] + 2]);
        Vec3 b(positions[3 * tri[1]], positions[3 * tri[1] + 1], positions[3 * tri[1] + 2]);
        Vec3 c(positions[3 * tri[2]], positions[3 * tri[2] + 1], positions[3 * tri[2] + 2]);
        Vec3 normal = (b - a).cross(c - a);
        double nn = normal.norm();
        double shade = 0.8;
        if (nn > 1e-18) shade = 0.7 + 0.3 * std::max(0.0, normal.dot(light_dir) / nn);
        int x0 = std::max(0, int(std::floor(std::min({pt.p[0].x(), pt.p[1].x(), pt.p[2].x()}) - 0.5)));
        int x1 = std::min(width - 1,
                          int(std::ceil(std::max({pt.p[0].x(), pt.p[1].x(), pt.p[2].x()}) + 0.5)));
        int y0 = std::max(0, int(std::floor(std::min({pt.p[0].y(), pt.p[1].y(), pt.p[2].y()}) - 0.5)));
        int y1 = std::min(height - 1,
                          int(std::ceil(std::max({pt.p[0].y(), pt.p[1].y(), pt.p[2].y()}) + 0.5)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double px = x + 0.5, py = y + 0.5;
                double w0 = detail::edge_fn(pt.p[1].x(), pt.p[1].y(), pt.p[2].x(), pt.p[2].y(), px, py);
                double w1 = detail::edge_fn(pt.p[2].x(), pt.p[2].y(), pt.p[0].x(), pt.p[0].y(), px, py);
                double w2 = detail::edge_fn(pt.p[0].x(), pt.p[0].y(), pt.p[1].x(), pt.p[1].y(), px, py);
                if (area < 0) {
                    w0 = -w0;
                    w1 = -w1;
                    w2 = -w2;
                }
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                double s = w0 + w1 + w2;
                if (s <= 0) continue;
                // perspective-correct interpolation of uv and depth
                double iz0 = 1.0 / pt.p[0].z(), iz1 = 1.0 / pt.p[1].z(), iz2 = 1.0 / pt.p[2].z();
                double inv_z = (w0 * iz0 + w1 * iz1 + w2 * iz2) / s;
                double z = 1.0 / inv_z;
                double& slot = zbuf.depth[std::size_t(y) * width + x];
                if (z >= slot) continue;
                slot = z;
                double u = (w0 * iz0 * mesh.uv[tri[0]][0] + w1 * iz1 * mesh.uv[tri[1]][0] +
                            w2 * iz2 * mesh.uv[tri[2]][0]) /
                           (s * inv_z);
                double v = (w0 * iz0 * mesh.uv[tri[0]][1] + w1 * iz1 * mesh.uv[tri[1]][1] +
                            w2 * iz2 * mesh.uv[tri[2]][1]) /
                           (s * inv_z);
                auto rgb = texture.bilinear(u * texture.width, v * texture.height);
                for (int ch = 0; ch < 3; ++ch)
                    out.at(x, y, ch) = float(std::clamp(rgb[ch] * shade, 0.0, 1.0));
            }
    }
    return out;
}

}  // namespace visyn
