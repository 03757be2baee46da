#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "visyn/camera.hpp"
#include "visyn/codec.hpp"
#include "visyn/common.hpp"
#include "visyn/face_model.hpp"
#include "visyn/image.hpp"
#include "visyn/mesh.hpp"
#include "visyn/render.hpp"
#include "visyn/sample_db.hpp"
#include "visyn/viseme.hpp"

namespace visyn {

// Consecutive viseme annotations overlap by this many frames, matching the
// default transition window, so contiguous samples splice with zero cost.
inline constexpr int kAnnotationOverlap = 4;

struct ScenePreset {
    std::string name = "tiny";
    int grid = 10;           // vertices per side
    int cameras = 3;
    int image_width = 160;
    int image_height = 120;
    int atlas_size = 128;
    int max_frames = 300;
    int viseme_frames = 7;   // annotated sample length
    int gap_frames = 3;      // silence between words
};

inline ScenePreset preset_by_name(const std::string& name) {
    if (name == "tiny") return {};
    if (name == "small") {
        ScenePreset p;
        p.name = "small";
        p.grid = 14;
        p.image_width = 256;
        p.image_height = 192;
        p.atlas_size = 192;
        p.max_frames = 600;
        p.viseme_frames = 9;
        return p;
    }
    throw Error("unknown preset \"" + name + "\" (use tiny or small)");
}

struct SyntheticScene {
    ScenePreset preset;
    std::uint64_t seed = 0;
    ShapeModel model;
    Image texture;  // atlas-space skin texture
    std::vector<CameraView> rig;
    std::vector<int> landmark_vertices;
    std::vector<PoseShapeParams> truth;
    std::vector<Annotation> annotations;
    std::vector<std::string> words;  // phoneme strings
    VisemeDict dict;
    RoiSpec roi;
    double fps = 25.0;

    int frame_count() const { return int(truth.size()); }

    std::vector<double> ground_truth_vertices(int frame) const {
        return deform(model, truth[std::size_t(frame)]);
    }

    std::vector<CameraView> render_frame(int frame) const;
    Image ground_truth_atlas(int frame) const;
};

namespace detail {

inline double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

inline TriMesh build_proxy_mesh(int grid) {
    TriMesh mesh;
    for (int j = 0; j < grid; ++j)
        for (int i = 0; i < grid; ++i) {
            double u = double(i) / (grid - 1);
            double v = double(j) / (grid - 1);
            double ru = (u - 0.5) / 0.62, rv = (v - 0.5) / 0.82;
            double z = 0.3 * std::max(0.0, 1.0 - ru * ru - rv * rv);
            mesh.positions.push_back((u - 0.5) * 1.1);
            mesh.positions.push_back((v - 0.5) * 1.4);
            mesh.positions.push_back(z);
            mesh.uv.push_back({u, v});
        }
    auto id = [grid](int i, int j) { return j * grid + i; };
    for (int j = 0; j + 1 < grid; ++j)
        for (int i = 0; i + 1 < grid; ++i) {
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return mesh;
}

// 15 analytic deformation fields: a jaw-opening mode plus localized bumps
// ringed around the mouth. All displacement stays in the lower face so the
// mouth ROI captures it.
inline Eigen::MatrixXd build_shape_basis(const TriMesh& mesh) {
    int n = mesh.vertex_count();
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * n, kShapeBasisSize);
    const double mouth_u = 0.5, mouth_v = 0.75;
    for (int v = 0; v < n; ++v) {
        double u = mesh.uv[v][0], w = mesh.uv[v][1];
        double jaw = smoothstep((w - 0.56) / 0.3);
        basis(3 * v + 1, 0) = 0.10 * jaw;   // jaw drop
        basis(3 * v + 2, 0) = -0.03 * jaw;  // slight recede
        for (int k = 1; k < kShapeBasisSize; ++k) {
            double angle = 2.0 * 3.14159265358979323846 * (k - 1) / (kShapeBasisSize - 1);
            double cu = mouth_u + 0.11 * std::cos(angle);
            double cv = mouth_v + 0.08 * std::sin(angle);
            double d2 = (u - cu) * (u - cu) + (w - cv) * (w - cv);
            double g = 0.05 * std::exp(-d2 / (2.0 * 0.07 * 0.07));
            basis(3 * v + (k % 3), k) = g * ((k % 2) ? 1.0 : -1.0);
        }
    }
    return basis;
}

inline Image build_skin_texture(int size, Rng rng) {
    Image tex(size, size, 3);
    double f1 = rng.uniform(6, 10), f2 = rng.uniform(11, 17), p1 = rng.uniform(0, 6),
           p2 = rng.uniform(0, 6);
    double f3 = rng.uniform(19, 27), p3 = rng.uniform(0, 6);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double u = (x + 0.5) / size, v = (y + 0.5) / size;
            double mottle = 0.10 * std::sin(f1 * u + p1) * std::cos(f2 * v + p2) +
                            0.06 * std::sin(f3 * (u + v) + p3) +
                            0.05 * std::sin(f2 * u - f1 * v + p1 * 0.7);
            double du = (u - 0.5) / 0.16, dv = (v - 0.75) / 0.06;
            double lips = std::exp(-(du * du + dv * dv));
            double r = 0.78 + mottle - 0.25 * lips;
            double g = 0.60 + 0.8 * mottle - 0.35 * lips;
            double b = 0.52 + 0.6 * mottle - 0.30 * lips;
            tex.at(x, y, 0) = float(std::clamp(r, 0.02, 0.98));
            tex.at(x, y, 1) = float(std::clamp(g, 0.02, 0.98));
            tex.at(x, y, 2) = float(std::clamp(b, 0.02, 0.98));
        }
    return tex;
}

inline Mat34 lookat_camera(const Vec3& position, const Vec3& target, double focal, int width,
                           int height) {
    Vec3 z = (target - position).normalized();
    Vec3 x = Vec3(0, 1, 0).cross(z).normalized();
    Vec3 y = z.cross(x);
    Eigen::Matrix3d R;
    R.row(0) = x;
    R.row(1) = y;
    R.row(2) = z;
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    K(0, 0) = focal;
    K(1, 1) = focal;
    K(0, 2) = width / 2.0;
    K(1, 2) = height / 2.0;
    Mat34 P;
    P.leftCols<3>() = K * R;
    P.col(3) = K * (-R * position);
    return P;
}

// per-viseme target shape weights, deterministic in the symbol
inline Eigen::VectorXd viseme_target(const std::string& symbol) {
    Rng rng(0x5eedb00bull ^ std::uint64_t(symbol.empty() ? 0 : symbol[0]) * 0x9e37ull);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(kShapeBasisSize);
    bool vowel = symbol == "A" || symbol == "E" || symbol == "I" || symbol == "O" || symbol == "U";
    b[0] = vowel ? rng.uniform(0.6, 1.0) : rng.uniform(0.1, 0.35);
    for (int k = 1; k < kShapeBasisSize; ++k) b[k] = rng.uniform(-0.5, 0.5);
    return b;
}

}  // namespace detail

inline SyntheticScene make_scene(std::uint64_t seed, const ScenePreset& preset, int frame_cap = -1) {
    SyntheticScene scene;
    scene.preset = preset;
    scene.seed = seed;
    scene.dict = default_viseme_dict();

    scene.model.mesh = detail::build_proxy_mesh(preset.grid);
    int n = scene.model.mesh.vertex_count();
    scene.model.mean = Eigen::Map<const Eigen::VectorXd>(scene.model.mesh.positions.data(), 3 * n);
    scene.model.basis = detail::build_shape_basis(scene.model.mesh);

    Rng rng(seed);
    scene.texture = detail::build_skin_texture(preset.atlas_size, rng.fork());

    // mouth region in texel coordinates
    scene.roi.x = int(std::lround(0.30 * preset.atlas_size));
    scene.roi.y = int(std::lround(0.55 * preset.atlas_size));
    scene.roi.width = int(std::lround(0.40 * preset.atlas_size));
    scene.roi.height = int(std::lround(0.37 * preset.atlas_size));

    for (int c = 0; c < preset.cameras; ++c) {
        double angle = (c - (preset.cameras - 1) / 2.0) * 0.55;
        Vec3 pos(2.3 * std::sin(angle), 0.12, 2.3 * std::cos(angle));
        CameraView view;
        view.projection = detail::lookat_camera(pos, Vec3(0, 0.05, 0.15),
                                                1.15 * preset.image_width, preset.image_width,
                                                preset.image_height);
        view.width = preset.image_width;
        view.height = preset.image_height;
        scene.rig.push_back(view);
    }

    // landmark vertices: a coarse grid over the face plus a denser mouth ring
    int g = preset.grid;
    auto vid = [g](int i, int j) { return j * g + i; };
    for (int j : {0, g / 3, 2 * g / 3, g - 1})
        for (int i : {0, g / 3, 2 * g / 3, g - 1}) scene.landmark_vertices.push_back(vid(i, j));
    int mouth_j = int(std::lround(0.75 * (g - 1)));
    for (int i = g / 4; i <= 3 * g / 4; i += std::max(1, g / 8)) {
        scene.landmark_vertices.push_back(vid(i, mouth_j));
        scene.landmark_vertices.push_back(vid(i, std::max(0, mouth_j - 1)));
    }
    std::sort(scene.landmark_vertices.begin(), scene.landmark_vertices.end());
    scene.landmark_vertices.erase(
        std::unique(scene.landmark_vertices.begin(), scene.landmark_vertices.end()),
        scene.landmark_vertices.end());

    // viseme script: words chosen so every dictionary symbol appears in at
    // least three annotated samples within the tiny frame budget
    scene.words = {"k a l t", "b i f",  "m e r z", "p u S", "d O l", "f r a n",
                   "v E g",   "z o r",  "S i m",   "h u l t", "j E r", "g a f",
                   "S u x",   "n O z",  "s e m",   "x I v",  "l a d"};

    struct Key {
        int frame;
        Eigen::VectorXd value;
    };
    std::vector<Key> keys;
    keys.push_back({0, Eigen::VectorXd::Zero(kShapeBasisSize)});
    int cursor = preset.gap_frames;
    int L = preset.viseme_frames;
    for (const auto& word : scene.words) {
        auto labels = phonemes_to_extended(split_phoneme_string(word), scene.dict);
        int start = cursor;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            int s = start + int(i) * (L - kAnnotationOverlap);
            int e = s + L - 1;
            scene.annotations.push_back({labels[i], s, e});
            keys.push_back({(s + e) / 2, detail::viseme_target(labels[i].cur)});
        }
        int word_end = scene.annotations.back().end;
        cursor = word_end + 1 + preset.gap_frames;
        keys.push_back({word_end + 1 + preset.gap_frames / 2, Eigen::VectorXd::Zero(kShapeBasisSize)});
    }
    int total = cursor;
    if (total > preset.max_frames)
        throw Error("synthetic script exceeds the preset frame budget: " + std::to_string(total));
    keys.push_back({total - 1, Eigen::VectorXd::Zero(kShapeBasisSize)});

    if (frame_cap > 0) total = std::min(total, frame_cap);
    scene.truth.resize(std::size_t(total));
    std::size_t key_idx = 0;
    for (int f = 0; f < total; ++f) {
        while (key_idx + 1 < keys.size() && keys[key_idx + 1].frame <= f) ++key_idx;
        Eigen::VectorXd b;
        if (key_idx + 1 >= keys.size()) {
            b = keys.back().value;
        } else {
            const Key& a = keys[key_idx];
            const Key& c = keys[key_idx + 1];
            double t = c.frame == a.frame ? 0.0 : double(f - a.frame) / double(c.frame - a.frame);
            double w = 0.5 - 0.5 * std::cos(3.14159265358979323846 * t);
            b = (1.0 - w) * a.value + w * c.value;
        }
        PoseShapeParams p;
        p.b = b;
        // slow rigid drift; frame 0 is the registration reference
        p.t[0] = 0.020 + 0.015 * std::sin(2 * 3.141592653589793 * f / 140.0);
        p.t[1] = -0.030 + 0.012 * std::sin(2 * 3.141592653589793 * f / 170.0 + 1.0);
        p.t[2] = 0.050 + 0.020 * std::sin(2 * 3.141592653589793 * f / 200.0 + 2.0);
        p.t[3] = 0.010 + 0.010 * std::sin(2 * 3.141592653589793 * f / 160.0 + 0.5);
        p.t[4] = -0.020 + 0.015 * std::sin(2 * 3.141592653589793 * f / 150.0 + 1.2);
        p.t[5] = 0.015 + 0.010 * std::sin(2 * 3.141592653589793 * f / 180.0 + 2.1);
        scene.truth[std::size_t(f)] = std::move(p);
    }
    // drop annotations past the cap
    std::erase_if(scene.annotations,
                  [&](const Annotation& a) { return a.end >= int(scene.truth.size()); });
    return scene;
}

inline SyntheticScene make_scene(std::uint64_t seed, const std::string& preset_name,
                                 int frame_cap = -1) {
    return make_scene(seed, preset_by_name(preset_name), frame_cap);
}

inline std::vector<CameraView> SyntheticScene::render_frame(int frame) const {
    std::vector<double> verts = ground_truth_vertices(frame);
    std::vector<CameraView> views;
    views.reserve(rig.size());
    for (const auto& cam : rig) {
        CameraView v = cam;
        v.image = render_textured(verts, model.mesh, texture, cam.projection, cam.width, cam.height);
        for (int lm : landmark_vertices) {
            Vec3 X(verts[3 * lm], verts[3 * lm + 1], verts[3 * lm + 2]);
            Vec3 p = project_point_depth(cam.projection, X);
            if (p.x() >= 0 && p.x() < cam.width && p.y() >= 0 && p.y() < cam.height)
                v.landmarks.push_back({lm, p.x(), p.y()});
        }
        views.push_back(std::move(v));
    }
    return views;
}

// Atlas-space ground truth for one frame: the skin texture modulated by the
// per-triangle lambert factor of the deformed mesh. Gives the same kind of
// appearance dynamics the camera images show, without any stitching.
inline Image SyntheticScene::ground_truth_atlas(int frame) const {
    std::vector<double> verts = ground_truth_vertices(frame);
    int size = preset.atlas_size;
    Image atlas(size, size, 3);
    Vec3 light = Vec3(0.2, -0.3, 1.0).normalized();
    for (const auto& tri : model.mesh.triangles) {
        Vec3 a(verts[3 * tri[0]], verts[3 * tri[0] + 1], verts[3 * tri[0] + 2]);
        Vec3 b(verts[3 * tri[1]], verts[3 * tri[1] + 1], verts[3 * tri[1] + 2]);
        Vec3 c(verts[3 * tri[2]], verts[3 * tri[2] + 1], verts[3 * tri[2] + 2]);
        Vec3 normal = (b - a).cross(c - a);
        double nn = normal.norm();
        double shade = nn > 1e-18 ? 0.7 + 0.3 * std::max(0.0, normal.dot(light) / nn) : 0.8;
        // rasterize the uv footprint
        double u0 = model.mesh.uv[tri[0]][0] * size, v0 = model.mesh.uv[tri[0]][1] * size;
        double u1 = model.mesh.uv[tri[1]][0] * size, v1 = model.mesh.uv[tri[1]][1] * size;
        double u2 = model.mesh.uv[tri[2]][0] * size, v2 = model.mesh.uv[tri[2]][1] * size;
        double area = detail::edge_fn(u0, v0, u1, v1, u2, v2);
        if (std::abs(area) < 1e-12) continue;
        int x0 = std::max(0, int(std::floor(std::min({u0, u1, u2}))));
        int x1 = std::min(size - 1, int(std::ceil(std::max({u0, u1, u2}))));
        int y0 = std::max(0, int(std::floor(std::min({v0, v1, v2}))));
        int y1 = std::min(size - 1, int(std::ceil(std::max({v0, v1, v2}))));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double px = x + 0.5, py = y + 0.5;
                double w0 = detail::edge_fn(u1, v1, u2, v2, px, py);
                double w1 = detail::edge_fn(u2, v2, u0, v0, px, py);
                double w2 = detail::edge_fn(u0, v0, u1, v1, px, py);
                if (area < 0) {
                    w0 = -w0;
                    w1 = -w1;
                    w2 = -w2;
                }
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                auto rgb = texture.bilinear(px, py);
                for (int ch = 0; ch < 3; ++ch)
                    atlas.at(x, y, ch) = float(std::clamp(rgb[ch] * shade, 0.0, 1.0));
            }
    }
    return atlas;
}

// --- on-disk scene layout --------------------------------------------------------

namespace detail {
inline std::string frame_name(int f) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", f);
    return buf;
}
}  // namespace detail

inline void write_scene(const std::string& dir, const SyntheticScene& scene) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "cameras");
    fs::create_directories(fs::path(dir) / "landmarks");
    fs::create_directories(fs::path(dir) / "truth");
    for (std::size_t c = 0; c < scene.rig.size(); ++c)
        fs::create_directories(fs::path(dir) / "images" / ("cam" + std::to_string(c)));

    nlohmann::json manifest;
    manifest["preset"] = scene.preset.name;
    manifest["seed"] = scene.seed;
    manifest["frames"] = scene.frame_count();
    manifest["cameras"] = int(scene.rig.size());
    manifest["atlas_size"] = scene.preset.atlas_size;
    manifest["landmark_vertices"] = scene.landmark_vertices;
    manifest["words"] = scene.words;
    manifest["fps"] = scene.fps;
    write_text_file((fs::path(dir) / "scene.json").string(), manifest.dump(2) + "\n");

    write_obj((fs::path(dir) / "mesh.obj").string(), scene.model.mesh);
    save_shape_basis((fs::path(dir) / "model.vsbm").string(), scene.model);
    save_roi_json((fs::path(dir) / "roi.json").string(), scene.roi);
    save_viseme_dict((fs::path(dir) / "dict.json").string(), scene.dict);
    save_annotations_json((fs::path(dir) / "annotations.json").string(), scene.annotations);
    save_params_json((fs::path(dir) / "truth" / "params.json").string(), scene.truth);
    write_ppm((fs::path(dir) / "texture.ppm").string(), scene.texture);
    for (std::size_t c = 0; c < scene.rig.size(); ++c)
        save_camera_json((fs::path(dir) / "cameras" / ("cam" + std::to_string(c) + ".json")).string(),
                         scene.rig[c]);
    for (int f = 0; f < scene.frame_count(); ++f) {
        auto views = scene.render_frame(f);
        std::vector<std::vector<LandmarkObs>> lms(views.size());
        for (std::size_t c = 0; c < views.size(); ++c) {
            write_ppm((fs::path(dir) / "images" / ("cam" + std::to_string(c)) /
                       ("frame" + detail::frame_name(f) + ".ppm"))
                          .string(),
                      views[c].image);
            lms[c] = views[c].landmarks;
        }
        save_landmarks_json(
            (fs::path(dir) / "landmarks" / ("frame" + detail::frame_name(f) + ".json")).string(),
            lms);
    }
}

// Scene directory reader used by the pipeline commands.
struct SceneOnDisk {
    std::string dir;
    ScenePreset preset;
    std::uint64_t seed = 0;
    ShapeModel model;
    std::vector<CameraView> rig;
    std::vector<int> landmark_vertices;
    VisemeDict dict;
    RoiSpec roi;
    std::vector<Annotation> annotations;
    int frames = 0;
    double fps = 25.0;

    std::vector<CameraView> frame_views(int f, bool with_images = true) const {
        namespace fs = std::filesystem;
        std::vector<CameraView> views = rig;
        auto lms = load_landmarks_json(
            (fs::path(dir) / "landmarks" / ("frame" + detail::frame_name(f) + ".json")).string(),
            int(rig.size()));
        for (std::size_t c = 0; c < views.size(); ++c) {
            views[c].landmarks = lms[c];
            if (with_images)
                views[c].image = read_ppm((fs::path(dir) / "images" / ("cam" + std::to_string(c)) /
                                           ("frame" + detail::frame_name(f) + ".ppm"))
                                              .string());
        }
        return views;
    }
};

inline SceneOnDisk open_scene(const std::string& dir) {
    namespace fs = std::filesystem;
    SceneOnDisk scene;
    scene.dir = dir;
    nlohmann::json manifest =
        nlohmann::json::parse(read_text_file((fs::path(dir) / "scene.json").string()), nullptr, true,
                              true);
    scene.preset = preset_by_name(manifest.at("preset").get<std::string>());
    scene.seed = manifest.at("seed").get<std::uint64_t>();
    scene.frames = manifest.at("frames").get<int>();
    scene.fps = manifest.value("fps", 25.0);
    scene.landmark_vertices = manifest.at("landmark_vertices").get<std::vector<int>>();
    scene.model.mesh = read_obj((fs::path(dir) / "mesh.obj").string());
    load_shape_basis((fs::path(dir) / "model.vsbm").string(), scene.model);
    if (int(scene.model.mesh.positions.size()) != int(scene.model.mean.size()))
        throw FormatError(dir + ": mesh.obj and model.vsbm disagree on the vertex count");
    scene.roi = load_roi_json((fs::path(dir) / "roi.json").string());
    scene.dict = load_viseme_dict((fs::path(dir) / "dict.json").string());
    scene.annotations = load_annotations_json((fs::path(dir) / "annotations.json").string());
    int cams = manifest.at("cameras").get<int>();
    for (int c = 0; c < cams; ++c)
        scene.rig.push_back(
            load_camera_json((fs::path(dir) / "cameras" / ("cam" + std::to_string(c) + ".json")).string()));
    return scene;
}

}  // namespace visyn
