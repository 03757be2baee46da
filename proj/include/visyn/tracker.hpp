#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "visyn/camera.hpp"
#include "visyn/common.hpp"
#include "visyn/face_model.hpp"

namespace visyn {

struct TrackerConfig {
    double landmark_weight = 1.0;   // weight of the landmark term in the total
    double shape_reg = 0.1;         // weight of |b|^2
    int photo_samples_per_tri = 3;  // surface samples per visible triangle
    int max_iterations = 30;
    double step_tolerance = 1e-10;  // on the accepted parameter-update norm
    int max_backtracks = 10;
};

struct EnergyBreakdown {
    double total = 0.0;
    double landmark = 0.0;   // sum of squared pixel distances, unweighted
    double image = 0.0;      // sum of squared RGB differences, unweighted
    double shape_reg = 0.0;  // |b|^2
};

// Registered neutral frame: its parameters plus the per-camera images that act
// as the model texture for the photometric term.
struct ReferenceFrame {
    PoseShapeParams params;
    std::vector<CameraView> views;
};

// One photometric residual site: a barycentric point on a triangle, observed
// by one camera, with its color frozen from the reference frame.
struct PhotoSample {
    int camera;
    int triangle;
    double bary[3];
    double ref_color[3];
};

struct FrameSolve {
    PoseShapeParams params;
    std::vector<double> energy_log;  // accepted energies, non-increasing
    int iterations = 0;
};

namespace detail {

// low-discrepancy barycentric points, identical for every triangle
inline void sample_bary(int s, double bary[3]) {
    constexpr double a1 = 0.7548776662466927;  // 1/plastic
    constexpr double a2 = 0.5698402909980532;  // 1/plastic^2
    double u = std::fmod(0.5 + a1 * (s + 1), 1.0);
    double v = std::fmod(0.5 + a2 * (s + 1), 1.0);
    if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    bary[0] = 1.0 - u - v;
    bary[1] = u;
    bary[2] = v;
}

inline Vec3 bary_point(const std::vector<double>& verts, const std::array<int, 3>& tri,
                       const double bary[3]) {
    Vec3 p = Vec3::Zero();
    for (int k = 0; k < 3; ++k)
        p += bary[k] * Vec3(verts[3 * tri[k]], verts[3 * tri[k] + 1], verts[3 * tri[k] + 2]);
    return p;
}

}  // namespace detail

// Picks the photometric sample set for one frame: visibility evaluated at
// `params`, reference colors looked up once from the reference frame.
inline std::vector<PhotoSample> build_photo_samples(const ShapeModel& model,
                                                    const PoseShapeParams& params,
                                                    const std::vector<CameraView>& views,
                                                    const ReferenceFrame& reference,
                                                    const TrackerConfig& config) {
    std::vector<PhotoSample> samples;
    if (config.photo_samples_per_tri <= 0) return samples;
    std::vector<double> current = deform(model, params);
    std::vector<double> ref_verts = deform(model, reference.params);
    for (std::size_t c = 0; c < views.size(); ++c) {
        if (c >= reference.views.size() || reference.views[c].image.width == 0) continue;
        const CameraView& ref_view = reference.views[c];
        auto vis = compute_visibility(current, model.mesh.triangles, views[c].projection,
                                      views[c].width, views[c].height);
        for (std::size_t t = 0; t < vis.size(); ++t) {
            if (!vis[t].visible) continue;
            for (int s = 0; s < config.photo_samples_per_tri; ++s) {
                PhotoSample sample;
                sample.camera = int(c);
                sample.triangle = int(t);
                detail::sample_bary(s, sample.bary);
                Vec3 X = detail::bary_point(ref_verts, model.mesh.triangles[t], sample.bary);
                Vec3 proj = project_point_depth(ref_view.projection, X);
                if (proj.x() < 0 || proj.x() >= ref_view.width || proj.y() < 0 ||
                    proj.y() >= ref_view.height)
                    continue;
                auto rgb = ref_view.image.bilinear(proj.x(), proj.y());
                for (int ch = 0; ch < 3; ++ch) sample.ref_color[ch] = rgb[ch];
                samples.push_back(sample);
            }
        }
    }
    return samples;
}

namespace detail {

// Residual vector: sqrt(lw)*landmark diffs, photometric diffs, sqrt(reg)*b.
inline void tracking_residuals(const ShapeModel& model, const PoseShapeParams& params,
                               const std::vector<CameraView>& views,
                               const std::vector<PhotoSample>& samples,
                               const TrackerConfig& config, Eigen::VectorXd& r,
                               EnergyBreakdown* breakdown = nullptr) {
    std::vector<double> verts = deform(model, params);
    std::size_t lm_count = 0;
    for (const auto& v : views) lm_count += v.landmarks.size();
    r.resize(2 * lm_count + 3 * samples.size() + std::size_t(params.b.size()));
    double sl = std::sqrt(config.landmark_weight);
    std::size_t row = 0;
    double lm_term = 0.0;
    for (const auto& view : views)
        for (const auto& lm : view.landmarks) {
            Vec3 X(verts[3 * lm.vertex], verts[3 * lm.vertex + 1], verts[3 * lm.vertex + 2]);
            Vec3 proj = project_point_depth(view.projection, X);
            double dx = proj.x() - lm.x, dy = proj.y() - lm.y;
            lm_term += dx * dx + dy * dy;
            r[row++] = sl * dx;
            r[row++] = sl * dy;
        }
    double img_term = 0.0;
    for (const auto& s : samples) {
        const CameraView& view = views[s.camera];
        Vec3 X = bary_point(verts, model.mesh.triangles[s.triangle], s.bary);
        Vec3 proj = project_point_depth(view.projection, X);
        auto rgb = view.image.bilinear(proj.x(), proj.y());
        for (int ch = 0; ch < 3; ++ch) {
            double d = rgb[ch] - s.ref_color[ch];
            img_term += d * d;
            r[row++] = d;
        }
    }
    double sr = std::sqrt(config.shape_reg);
    for (int i = 0; i < params.b.size(); ++i) r[row++] = sr * params.b[i];
    if (breakdown) {
        breakdown->landmark = lm_term;
        breakdown->image = img_term;
        breakdown->shape_reg = params.b.squaredNorm();
        breakdown->total = config.landmark_weight * lm_term + img_term +
                           config.shape_reg * breakdown->shape_reg;
    }
}

inline PoseShapeParams apply_step(const PoseShapeParams& p, const Eigen::VectorXd& delta,
                                  double scale) {
    PoseShapeParams out = p;
    for (int i = 0; i < 6; ++i) out.t[i] += scale * delta[i];
    for (int i = 0; i < p.b.size(); ++i) out.b[i] += scale * delta[6 + i];
    return out;
}

}  // namespace detail

// Energy and gradient on a fixed residual structure; the gradient is the
// exact derivative of what the solver minimizes (2 J^T r with the same
// finite-difference Jacobian).
inline double tracking_energy_value(const ShapeModel& model, const PoseShapeParams& params,
                                    const std::vector<CameraView>& views,
                                    const std::vector<PhotoSample>& samples,
                                    const TrackerConfig& config) {
    Eigen::VectorXd r;
    detail::tracking_residuals(model, params, views, samples, config, r);
    return r.squaredNorm();
}

inline Eigen::VectorXd tracking_gradient(const ShapeModel& model, const PoseShapeParams& params,
                                         const std::vector<CameraView>& views,
                                         const std::vector<PhotoSample>& samples,
                                         const TrackerConfig& config, double h = 1e-5) {
    int np = 6 + int(params.b.size());
    Eigen::VectorXd r, rp, rm, grad(np), unit = Eigen::VectorXd::Zero(np);
    detail::tracking_residuals(model, params, views, samples, config, r);
    for (int p = 0; p < np; ++p) {
        unit.setZero();
        unit[p] = 1.0;
        detail::tracking_residuals(model, detail::apply_step(params, unit, h), views, samples, config,
                                   rp);
        detail::tracking_residuals(model, detail::apply_step(params, unit, -h), views, samples,
                                   config, rm);
        grad[p] = 2.0 * r.dot((rp - rm) / (2.0 * h));
    }
    return grad;
}

// Combined energy at the given parameters. The photometric sample set is
// evaluated at `params`; pass nullptr for reference to skip the image term.
inline EnergyBreakdown tracking_energy(const ShapeModel& model, const PoseShapeParams& params,
                                       const std::vector<CameraView>& views,
                                       const ReferenceFrame* reference,
                                       const TrackerConfig& config) {
    std::vector<PhotoSample> samples;
    if (reference) samples = build_photo_samples(model, params, views, *reference, config);
    std::size_t lm_count = 0;
    for (const auto& v : views) lm_count += v.landmarks.size();
    if (lm_count == 0 && samples.empty())
        throw Error("tracking_energy: no landmarks and no visible surface samples");
    Eigen::VectorXd r;
    EnergyBreakdown breakdown;
    detail::tracking_residuals(model, params, views, samples, config, r, &breakdown);
    return breakdown;
}

// Gauss-Newton on a fixed residual structure (landmarks of `views`, the given
// photometric samples, the shape regularizer), with halving line search.
// Accepted energies never increase; the log starts at the initial energy.
inline FrameSolve gauss_newton_solve(const ShapeModel& model, const std::vector<CameraView>& views,
                                     const std::vector<PhotoSample>& samples,
                                     const PoseShapeParams& init, const TrackerConfig& config) {
    int np = 6 + int(init.b.size());
    PoseShapeParams params = init;
    Eigen::VectorXd r;
    detail::tracking_residuals(model, params, views, samples, config, r);
    if (r.size() < np)
        throw DegenerateError("gauss_newton: fewer residuals than parameters");
    double energy = r.squaredNorm();
    FrameSolve solve;
    solve.params = params;
    solve.energy_log.push_back(energy);

    const double h = 1e-5;
    Eigen::MatrixXd J(r.size(), np);
    Eigen::VectorXd rp, rm;
    for (int it = 0; it < config.max_iterations; ++it) {
        Eigen::VectorXd delta_unit = Eigen::VectorXd::Zero(np);
        for (int p = 0; p < np; ++p) {
            delta_unit.setZero();
            delta_unit[p] = 1.0;
            detail::tracking_residuals(model, detail::apply_step(params, delta_unit, h), views,
                                       samples, config, rp);
            detail::tracking_residuals(model, detail::apply_step(params, delta_unit, -h), views,
                                       samples, config, rm);
            J.col(p) = (rp - rm) / (2.0 * h);
        }
        Eigen::MatrixXd N = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(N);
        if (lu.rank() < np)
            throw DegenerateError("gauss_newton: rank-deficient normal equations (rank " +
                                  std::to_string(lu.rank()) + " of " + std::to_string(np) + ")");
        Eigen::VectorXd step = lu.solve(-g);
        if (!step.allFinite()) throw DegenerateError("gauss_newton: non-finite update");

        double scale = 1.0;
        bool accepted = false;
        Eigen::VectorXd r_new;
        for (int bt = 0; bt <= config.max_backtracks; ++bt) {
            PoseShapeParams trial = detail::apply_step(params, step, scale);
            detail::tracking_residuals(model, trial, views, samples, config, r_new);
            double e_new = r_new.squaredNorm();
            if (e_new <= energy) {
                params = trial;
                energy = e_new;
                r = r_new;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
        solve.energy_log.push_back(energy);
        solve.iterations = it + 1;
        if (scale * step.norm() < config.step_tolerance) break;
    }
    solve.params = params;
    return solve;
}

// Registers the model against one multi-view frame using landmarks only
// (plus the shape regularizer), from a zero start.
inline PoseShapeParams register_neutral(const ShapeModel& model,
                                        const std::vector<CameraView>& views,
                                        const TrackerConfig& config,
                                        FrameSolve* details = nullptr) {
    std::size_t lm_count = 0;
    for (const auto& v : views) lm_count += v.landmarks.size();
    if (lm_count < 6)
        throw DegenerateError("register_neutral: needs at least 6 landmark correspondences, got " +
                              std::to_string(lm_count));
    for (const auto& v : views)
        for (const auto& lm : v.landmarks)
            if (lm.vertex < 0 || lm.vertex >= model.vertex_count())
                throw Error("register_neutral: landmark vertex id out of range");
    FrameSolve solve = gauss_newton_solve(model, views, {}, PoseShapeParams::zero(model.basis_size()),
                                          config);
    if (details) *details = solve;
    return solve.params;
}

inline ReferenceFrame make_reference(const ShapeModel& model, const std::vector<CameraView>& views,
                                     const TrackerConfig& config) {
    ReferenceFrame ref;
    ref.params = register_neutral(model, views, config);
    ref.views = views;
    return ref;
}

// Tracks an ordered frame sequence; frame f starts from frame f-1's solution.
// The photometric sample set of each frame is frozen at its initialization.
inline std::vector<FrameSolve> track_sequence(const ShapeModel& model,
                                              const std::vector<std::vector<CameraView>>& frames,
                                              const ReferenceFrame& reference,
                                              const TrackerConfig& config) {
    std::vector<FrameSolve> out;
    out.reserve(frames.size());
    PoseShapeParams prev = reference.params;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        try {
            std::vector<PhotoSample> samples =
                build_photo_samples(model, prev, frames[f], reference, config);
            FrameSolve solve = gauss_newton_solve(model, frames[f], samples, prev, config);
            prev = solve.params;
            out.push_back(std::move(solve));
        } catch (const DegenerateError& e) {
            throw DegenerateError("frame " + std::to_string(f) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace visyn
