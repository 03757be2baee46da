#pragma once

#include <Eigen/Dense>
#include <array>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "visyn/camera.hpp"
#include "visyn/common.hpp"
#include "visyn/io.hpp"
#include "visyn/mesh.hpp"
#include "visyn/render.hpp"

namespace visyn {

inline constexpr int kShapeBasisSize = 15;

// Linear face model: deformed vertices = R * (mean + basis * b) + translation.
struct ShapeModel {
    TriMesh mesh;             // triangle list + uv; positions hold the mean shape
    Eigen::VectorXd mean;     // 3n
    Eigen::MatrixXd basis;    // 3n x k

    int vertex_count() const { return int(mean.size() / 3); }
    int basis_size() const { return int(basis.cols()); }
};

struct PoseShapeParams {
    std::array<double, 6> t{};  // tx, ty, tz, rx, ry, rz
    Eigen::VectorXd b;

    static PoseShapeParams zero(int basis_size = kShapeBasisSize) {
        PoseShapeParams p;
        p.b = Eigen::VectorXd::Zero(basis_size);
        return p;
    }
};

// Euler composition fixed as Rz * Ry * Rx.
inline Eigen::Matrix3d rotation_zyx(double rx, double ry, double rz) {
    Eigen::Matrix3d Rx, Ry, Rz;
    Rx << 1, 0, 0, 0, std::cos(rx), -std::sin(rx), 0, std::sin(rx), std::cos(rx);
    Ry << std::cos(ry), 0, std::sin(ry), 0, 1, 0, -std::sin(ry), 0, std::cos(ry);
    Rz << std::cos(rz), -std::sin(rz), 0, std::sin(rz), std::cos(rz), 0, 0, 0, 1;
    return Rz * Ry * Rx;
}

inline std::vector<double> deform(const ShapeModel& model, const PoseShapeParams& params) {
    if (params.b.size() != model.basis.cols())
        throw Error("deform: shape weight count " + std::to_string(params.b.size()) +
                    " does not match basis columns " + std::to_string(model.basis.cols()));
    Eigen::VectorXd shaped = model.mean + model.basis * params.b;
    Eigen::Matrix3d R = rotation_zyx(params.t[3], params.t[4], params.t[5]);
    Vec3 trans(params.t[0], params.t[1], params.t[2]);
    std::vector<double> out(shaped.size());
    for (int i = 0; i < int(shaped.size()) / 3; ++i) {
        Vec3 p = R * Vec3(shaped[3 * i], shaped[3 * i + 1], shaped[3 * i + 2]) + trans;
        out[3 * i] = p.x();
        out[3 * i + 1] = p.y();
        out[3 * i + 2] = p.z();
    }
    return out;
}

struct VisibilityInfo {
    bool visible = false;
    double area = 0.0;  // projected area in pixels^2
};

// Per-triangle visibility against one camera: front-facing (normal toward the
// camera center) and unoccluded at the centroid against a depth raster of the
// whole mesh. Degenerate triangles report area 0, not visible.
inline std::vector<VisibilityInfo> compute_visibility(const std::vector<double>& positions,
                                                      const std::vector<std::array<int, 3>>& triangles,
                                                      const Mat34& P, int width, int height) {
    DepthRaster raster = rasterize_depth(positions, triangles, P, width, height);
    Vec3 center = camera_center(P);
    std::vector<VisibilityInfo> out(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        Vec3 a(positions[3 * tri[0]], positions[3 * tri[0] + 1], positions[3 * tri[0] + 2]);
        Vec3 b(positions[3 * tri[1]], positions[3 * tri[1] + 1], positions[3 * tri[1] + 2]);
        Vec3 c(positions[3 * tri[2]], positions[3 * tri[2] + 1], positions[3 * tri[2] + 2]);
        auto pt = detail::project_triangle(positions, tri, P);
        if (!pt.valid) continue;  // behind the camera
        double signed_area = 0.5 * detail::edge_fn(pt.p[0].x(), pt.p[0].y(), pt.p[1].x(), pt.p[1].y(),
                                                   pt.p[2].x(), pt.p[2].y());
        out[t].area = std::abs(signed_area);
        if (out[t].area < 1e-12) continue;  // degenerate
        Vec3 normal = (b - a).cross(c - a);
        Vec3 centroid = (a + b + c) / 3.0;
        if (normal.dot(centroid - center) >= 0.0) continue;  // back-facing
        Vec3 proj = project_point_depth(P, centroid);
        int px = int(std::floor(proj.x())), py = int(std::floor(proj.y()));
        if (px < 0 || px >= width || py < 0 || py >= height) continue;
        double slack = std::max(1e-9, 1e-3 * proj.z());
        if (proj.z() <= raster.at(px, py) + slack) out[t].visible = true;
    }
    return out;
}

inline VisibilityInfo triangle_visibility(const std::vector<double>& positions,
                                          const std::vector<std::array<int, 3>>& triangles,
                                          const Mat34& P, int width, int height, int triangle_id) {
    return compute_visibility(positions, triangles, P, width, height)[std::size_t(triangle_id)];
}

// --- shape basis file ("VSBM") ----------------------------------------------

inline void save_shape_basis(const std::string& path, const ShapeModel& model) {
    BinaryWriter w(path);
    w.magic("VSBM");
    w.u32(1);
    w.u32(std::uint32_t(model.vertex_count()));
    w.u32(std::uint32_t(model.basis.cols()));
    w.f32_array(model.mean.data(), std::size_t(model.mean.size()));
    // column-major
    for (int c = 0; c < model.basis.cols(); ++c)
        w.f32_array(model.basis.col(c).data(), std::size_t(model.basis.rows()));
    w.close();
}

// Loads mean + basis; the triangle list and uv come from the mesh file.
inline void load_shape_basis(const std::string& path, ShapeModel& model) {
    BinaryReader r(path);
    r.expect_magic("VSBM");
    std::uint32_t version = r.u32();
    if (version != 1) r.fail("unsupported version " + std::to_string(version));
    std::uint32_t n = r.u32();
    std::uint32_t k = r.u32();
    if (n == 0 || n > 10u * 1000 * 1000) r.fail("implausible vertex count " + std::to_string(n));
    if (k != kShapeBasisSize)
        std::cerr << "warning: " << path << ": expected " << kShapeBasisSize
                  << " basis columns, found " << k << "\n";
    model.mean.resize(3 * n);
    r.f32_array(model.mean.data(), 3 * std::size_t(n));
    model.basis.resize(3 * n, k);
    for (std::uint32_t c = 0; c < k; ++c) r.f32_array(model.basis.col(c).data(), 3 * std::size_t(n));
}

// --- per-frame parameter JSON: {"t": [6], "b": [k]} ---------------------------

inline nlohmann::json params_to_json(const PoseShapeParams& p) {
    nlohmann::json j;
    j["t"] = p.t;
    j["b"] = std::vector<double>(p.b.data(), p.b.data() + p.b.size());
    return j;
}

inline PoseShapeParams params_from_json(const nlohmann::json& j) {
    PoseShapeParams p;
    if (!j.contains("t") || j["t"].size() != 6) throw FormatError("params: \"t\" must have 6 entries");
    for (int i = 0; i < 6; ++i) p.t[i] = j["t"][i].get<double>();
    const auto& b = j.at("b");
    p.b.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) p.b[int(i)] = b[i].get<double>();
    return p;
}

inline void save_params_json(const std::string& path, const std::vector<PoseShapeParams>& frames) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : frames) j.push_back(params_to_json(p));
    write_text_file(path, j.dump() + "\n");
}

inline std::vector<PoseShapeParams> load_params_json(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
    if (!j.is_array()) throw FormatError(path + ": expected a JSON array of frames");
    std::vector<PoseShapeParams> out;
    for (const auto& item : j) out.push_back(params_from_json(item));
    return out;
}

}  // namespace visyn
