#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

#include "visyn/common.hpp"
#include "visyn/image.hpp"
#include "visyn/io.hpp"

namespace visyn {

using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct LandmarkObs {
    int vertex;
    double x, y;
};

// One camera at one frame: projection, raster, detected landmarks.
struct CameraView {
    Mat34 projection = Mat34::Zero();
    int width = 0;
    int height = 0;
    Image image;
    std::vector<LandmarkObs> landmarks;
};

class BehindCameraError : public Error {
public:
    using Error::Error;
};

inline Vec2 project_point(const Mat34& P, const Vec3& X) {
    Eigen::Vector4d h(X.x(), X.y(), X.z(), 1.0);
    Vec3 p = P * h;
    if (p.z() <= 0.0) throw BehindCameraError("project: point behind camera");
    return {p.x() / p.z(), p.y() / p.z()};
}

// Projection with the depth returned and the division guarded; used inside
// iterative optimization where candidate parameters may wander.
inline Vec3 project_point_depth(const Mat34& P, const Vec3& X) {
    Eigen::Vector4d h(X.x(), X.y(), X.z(), 1.0);
    Vec3 p = P * h;
    double z = p.z() > 1e-12 ? p.z() : 1e-12;
    return {p.x() / z, p.y() / z, p.z()};
}

inline Vec3 camera_center(const Mat34& P) {
    Eigen::Matrix3d M = P.leftCols<3>();
    if (std::abs(M.determinant()) < 1e-18) throw DegenerateError("camera_center: singular projection");
    return -M.inverse() * P.col(3);
}

// JSON: {"P": [12 row-major], "width": w, "height": h}
inline CameraView load_camera_json(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
    if (!j.contains("P") || !j["P"].is_array() || j["P"].size() != 12)
        throw FormatError(path + ": camera needs \"P\" with 12 numbers");
    CameraView view;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) view.projection(r, c) = j["P"][std::size_t(r) * 4 + c].get<double>();
    view.width = j.at("width").get<int>();
    view.height = j.at("height").get<int>();
    if (view.projection.colPivHouseholderQr().rank() < 3)
        throw FormatError(path + ": projection matrix is rank deficient");
    return view;
}

inline void save_camera_json(const std::string& path, const CameraView& view) {
    nlohmann::json j;
    std::vector<double> p(12);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) p[std::size_t(r) * 4 + c] = view.projection(r, c);
    j["P"] = p;
    j["width"] = view.width;
    j["height"] = view.height;
    write_text_file(path, j.dump(2) + "\n");
}

// JSON: list of {"camera": id, "vertex": id, "x": px, "y": px}
inline std::vector<std::vector<LandmarkObs>> load_landmarks_json(const std::string& path,
                                                                 int camera_count) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
    if (!j.is_array()) throw FormatError(path + ": landmarks must be a JSON array");
    std::vector<std::vector<LandmarkObs>> per_camera(camera_count);
    for (const auto& item : j) {
        int cam = item.at("camera").get<int>();
        if (cam < 0 || cam >= camera_count)
            throw FormatError(path + ": camera id " + std::to_string(cam) + " out of range");
        per_camera[cam].push_back(
            {item.at("vertex").get<int>(), item.at("x").get<double>(), item.at("y").get<double>()});
    }
    return per_camera;
}

inline void save_landmarks_json(const std::string& path,
                                const std::vector<std::vector<LandmarkObs>>& per_camera) {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t cam = 0; cam < per_camera.size(); ++cam)
        for (const auto& lm : per_camera[cam])
            j.push_back({{"camera", int(cam)}, {"vertex", lm.vertex}, {"x", lm.x}, {"y", lm.y}});
    write_text_file(path, j.dump() + "\n");
}

}  // namespace visyn
