#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "visyn/common.hpp"
#include "visyn/image.hpp"
#include "visyn/io.hpp"
#include "visyn/mesh.hpp"

namespace visyn {

// Rectangular region of interest in texel coordinates of an atlas.
struct RoiSpec {
    int x = 0, y = 0;
    int width = 480, height = 370;

    bool operator==(const RoiSpec& o) const {
        return x == o.x && y == o.y && width == o.width && height == o.height;
    }
};

inline RoiSpec load_roi_json(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
    RoiSpec r;
    r.x = j.at("x").get<int>();
    r.y = j.at("y").get<int>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    return r;
}

inline void save_roi_json(const std::string& path, const RoiSpec& r) {
    nlohmann::json j{{"x", r.x}, {"y", r.y}, {"width", r.width}, {"height", r.height}};
    write_text_file(path, j.dump(2) + "\n");
}

// ROI plus the set of mesh vertices whose uv falls inside it.
struct MouthRoi {
    RoiSpec rect;
    std::vector<int> vertices;
};

// One frame of the mouth region: texture crop plus the shape weights.
struct MouthFrame {
    Image texture;             // rect.width x rect.height, RGB in [0,1]
    Eigen::VectorXd geometry;  // shape weights
};

struct LatentFrame {
    Eigen::VectorXd z;
};

// Crops the ROI out of an atlas and recomputes the vertex-of-interest set by
// comparing each vertex uv (scaled to texels) with the rectangle.
inline MouthRoi extract_roi_vertices(const TriMesh& mesh, const RoiSpec& rect, int atlas_width,
                                     int atlas_height) {
    if (rect.width <= 0 || rect.height <= 0) throw Error("extract_roi: empty rectangle");
    if (rect.x < 0 || rect.y < 0 || rect.x + rect.width > atlas_width ||
        rect.y + rect.height > atlas_height)
        throw Error("extract_roi: rectangle outside the atlas");
    MouthRoi roi;
    roi.rect = rect;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        double tx = mesh.uv[v][0] * atlas_width;
        double ty = mesh.uv[v][1] * atlas_height;
        if (tx >= rect.x && tx < rect.x + rect.width && ty >= rect.y && ty < rect.y + rect.height)
            roi.vertices.push_back(v);
    }
    return roi;
}

struct RoiExtract {
    Image texture;
    std::vector<int> vertices;
};

inline RoiExtract extract_roi(const Image& atlas, const TriMesh& mesh, const RoiSpec& rect) {
    MouthRoi roi = extract_roi_vertices(mesh, rect, atlas.width, atlas.height);
    RoiExtract out;
    out.vertices = std::move(roi.vertices);
    out.texture = Image(rect.width, rect.height, 3);
    for (int y = 0; y < rect.height; ++y)
        for (int x = 0; x < rect.width; ++x)
            for (int c = 0; c < 3; ++c) out.texture.at(x, y, c) = atlas.at(rect.x + x, rect.y + y, c);
    return out;
}

// Linear codec: orthonormal basis over the standardized concatenation of the
// flattened ROI texture and the (alpha-scaled) shape weights. Stands behind
// the same encode/decode surface a learned model would use.
struct CodecModel {
    int input_dim = 0;
    int latent_dim = 0;
    int geometry_dim = 0;
    double alpha = 1.0;
    RoiSpec roi;
    Eigen::VectorXd mean, scale;  // per input dimension
    Eigen::MatrixXd basis;        // input_dim x latent_dim, orthonormal columns

    int texture_dim() const { return roi.width * roi.height * 3; }
};

inline double default_codec_alpha(const RoiSpec& roi, int geometry_dim) {
    return std::sqrt(double(roi.width * roi.height * 3) / std::max(1, geometry_dim));
}

namespace detail {

inline Eigen::VectorXd flatten_mouth_frame(const MouthFrame& frame, const RoiSpec& roi,
                                           double alpha) {
    int tex_dim = roi.width * roi.height * 3;
    if (frame.texture.width != roi.width || frame.texture.height != roi.height ||
        frame.texture.channels != 3)
        throw Error("codec: frame raster does not match the ROI size");
    Eigen::VectorXd x(tex_dim + frame.geometry.size());
    for (int i = 0; i < tex_dim; ++i) x[i] = double(frame.texture.data[std::size_t(i)]);
    for (int i = 0; i < frame.geometry.size(); ++i) x[tex_dim + i] = alpha * frame.geometry[i];
    return x;
}

}  // namespace detail

// PCA fit via the Gram-matrix route: eigenvectors of the N x N inner-product
// matrix of the standardized samples, mapped back to input space. Suited to
// sample counts far below the input dimension. Rank-deficient trailing
// components are completed with a deterministic orthonormal complement so the
// basis stays orthonormal at any requested d <= N.
inline CodecModel fit_codec(const std::vector<MouthFrame>& frames, const RoiSpec& roi, int latent_dim,
                            double alpha = -1.0) {
    int n = int(frames.size());
    if (n < 2) throw Error("fit_codec: need at least 2 frames");
    if (latent_dim < 1 || latent_dim > n)
        throw Error("fit_codec: latent dimension must be in [1, sample count]");
    int geometry_dim = int(frames[0].geometry.size());
    if (alpha <= 0.0) alpha = default_codec_alpha(roi, geometry_dim);

    CodecModel model;
    model.roi = roi;
    model.geometry_dim = geometry_dim;
    model.alpha = alpha;
    model.latent_dim = latent_dim;

    int d_in = roi.width * roi.height * 3 + geometry_dim;
    model.input_dim = d_in;
    Eigen::MatrixXd X(n, d_in);
    for (int i = 0; i < n; ++i) {
        if (int(frames[i].geometry.size()) != geometry_dim)
            throw Error("fit_codec: inconsistent geometry dimension");
        X.row(i) = detail::flatten_mouth_frame(frames[i], roi, alpha).transpose();
    }
    model.mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
    model.scale.resize(d_in);
    for (int j = 0; j < d_in; ++j) {
        double var = centered.col(j).squaredNorm() / double(n);
        model.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;  // zero-variance guard
    }
    Eigen::MatrixXd standardized = centered.array().rowwise() / model.scale.transpose().array();

    double total_var = standardized.squaredNorm();
    if (total_var < 1e-18) throw Error("fit_codec: zero variance across frames");

    Eigen::MatrixXd gram = standardized * standardized.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw Error("fit_codec: eigendecomposition failed");

    model.basis.resize(d_in, latent_dim);
    double lambda_max = eig.eigenvalues().maxCoeff();
    int filled = 0;
    for (int k = 0; k < latent_dim; ++k) {
        int src = n - 1 - k;  // eigenvalues ascend; take from the top
        double lambda = eig.eigenvalues()[src];
        if (lambda <= 1e-12 * lambda_max) break;
        model.basis.col(k) = standardized.transpose() * eig.eigenvectors().col(src) / std::sqrt(lambda);
        ++filled;
    }
    // deterministic completion for the rank-deficient tail
    for (int k = filled; k < latent_dim; ++k) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(d_in);
        for (int cand = 0; cand < d_in; ++cand) {
            v.setZero();
            v[cand] = 1.0;
            for (int j = 0; j < k; ++j) v -= model.basis.col(j).dot(v) * model.basis.col(j);
            if (v.norm() > 1e-6) break;
        }
        if (v.norm() <= 1e-6) throw Error("fit_codec: cannot complete orthonormal basis");
        model.basis.col(k) = v / v.norm();
    }
    return model;
}

inline LatentFrame encode(const CodecModel& model, const MouthFrame& frame) {
    Eigen::VectorXd x = detail::flatten_mouth_frame(frame, model.roi, model.alpha);
    if (x.size() != model.input_dim) throw Error("encode: input dimension mismatch");
    Eigen::VectorXd s = (x - model.mean).array() / model.scale.array();
    return {model.basis.transpose() * s};
}

inline MouthFrame decode(const CodecModel& model, const Eigen::VectorXd& z) {
    if (z.size() != model.latent_dim) throw Error("decode: latent dimension mismatch");
    Eigen::VectorXd x = model.mean.array() + (model.basis * z).array() * model.scale.array();
    MouthFrame frame;
    frame.texture = Image(model.roi.width, model.roi.height, 3);
    int tex_dim = model.texture_dim();
    for (int i = 0; i < tex_dim; ++i)
        frame.texture.data[std::size_t(i)] = float(std::clamp(x[i], 0.0, 1.0));
    frame.geometry.resize(model.geometry_dim);
    for (int i = 0; i < model.geometry_dim; ++i) frame.geometry[i] = x[tex_dim + i] / model.alpha;
    return frame;
}

struct StorageReport {
    std::uint64_t raw_bytes_per_frame = 0;
    std::uint64_t latent_bytes_per_frame = 0;
    std::uint64_t raw_bytes_total = 0;
    std::uint64_t latent_bytes_total = 0;
    double ratio = 0.0;
};

// Raw cost: 8-bit RGB texels plus float shape weights. Latent cost: d floats.
inline StorageReport storage_report(const RoiSpec& roi, int geometry_dim, int latent_dim,
                                    std::uint64_t frame_count) {
    StorageReport r;
    r.raw_bytes_per_frame =
        std::uint64_t(roi.width) * std::uint64_t(roi.height) * 3 + std::uint64_t(geometry_dim) * 4;
    r.latent_bytes_per_frame = std::uint64_t(latent_dim) * 4;
    r.raw_bytes_total = r.raw_bytes_per_frame * frame_count;
    r.latent_bytes_total = r.latent_bytes_per_frame * frame_count;
    r.ratio = double(r.raw_bytes_per_frame) / double(r.latent_bytes_per_frame);
    return r;
}

inline StorageReport storage_report(const CodecModel& model, std::uint64_t frame_count) {
    return storage_report(model.roi, model.geometry_dim, model.latent_dim, frame_count);
}

// --- codec file ("VSCM") -------------------------------------------------------

inline void save_codec(const std::string& path, const CodecModel& model) {
    BinaryWriter w(path);
    w.magic("VSCM");
    w.u32(1);
    w.u32(std::uint32_t(model.input_dim));
    w.u32(std::uint32_t(model.latent_dim));
    w.f32(float(model.alpha));
    w.f32_array(model.mean.data(), std::size_t(model.mean.size()));
    w.f32_array(model.scale.data(), std::size_t(model.scale.size()));
    for (int c = 0; c < model.basis.cols(); ++c)
        w.f32_array(model.basis.col(c).data(), std::size_t(model.basis.rows()));
    w.u32(std::uint32_t(model.roi.x));
    w.u32(std::uint32_t(model.roi.y));
    w.u32(std::uint32_t(model.roi.width));
    w.u32(std::uint32_t(model.roi.height));
    w.close();
}

inline CodecModel load_codec(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("VSCM");
    std::uint32_t version = r.u32();
    if (version != 1) r.fail("unsupported version " + std::to_string(version));
    CodecModel model;
    model.input_dim = int(r.u32());
    model.latent_dim = int(r.u32());
    if (model.input_dim <= 0 || model.input_dim > 100 * 1000 * 1000) r.fail("implausible input dim");
    if (model.latent_dim <= 0 || model.latent_dim > model.input_dim) r.fail("implausible latent dim");
    model.alpha = double(r.f32());
    model.mean.resize(model.input_dim);
    r.f32_array(model.mean.data(), std::size_t(model.input_dim));
    model.scale.resize(model.input_dim);
    r.f32_array(model.scale.data(), std::size_t(model.input_dim));
    model.basis.resize(model.input_dim, model.latent_dim);
    for (int c = 0; c < model.latent_dim; ++c)
        r.f32_array(model.basis.col(c).data(), std::size_t(model.input_dim));
    model.roi.x = int(r.u32());
    model.roi.y = int(r.u32());
    model.roi.width = int(r.u32());
    model.roi.height = int(r.u32());
    model.geometry_dim = model.input_dim - model.texture_dim();
    if (model.geometry_dim < 0) r.fail("ROI larger than the input dimension");
    return model;
}

}  // namespace visyn
