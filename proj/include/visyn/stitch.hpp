#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "visyn/blend.hpp"
#include "visyn/camera.hpp"
#include "visyn/common.hpp"
#include "visyn/face_model.hpp"
#include "visyn/image.hpp"
#include "visyn/mesh.hpp"
#include "visyn/mrf.hpp"

namespace visyn {

struct StitchConfig {
    double spatial_weight = 1.0;   // seam-cost weight between adjacent triangles
    double temporal_weight = 0.5;  // per-triangle label-change penalty across frames
    int edge_samples = 8;          // quadrature points along a shared edge
    int band_radius = 4;           // seam concealment band, in texels
    int atlas_width = 256;
    int atlas_height = 256;
    int max_sweeps = 10;
};

// Everything the per-sequence labeling needs: deformed geometry, per-camera
// visibility and projected areas, shared-edge adjacency, and the images.
struct StitchProblem {
    TriMesh mesh;
    std::vector<std::vector<double>> frame_verts;               // [frame] -> 3n
    std::vector<std::vector<CameraView>> views;                 // [frame][camera]
    std::vector<std::vector<std::vector<VisibilityInfo>>> vis;  // [frame][camera][tri]
    std::vector<EdgeAdjacency> adjacency;
    std::map<std::pair<int, int>, int> edge_of;                 // (min tri, max tri) -> adjacency idx

    int frame_count() const { return int(frame_verts.size()); }
    int camera_count() const { return views.empty() ? 0 : int(views[0].size()); }
    int triangle_count() const { return int(mesh.triangles.size()); }
};

inline StitchProblem build_stitch_problem(const ShapeModel& model,
                                          const std::vector<PoseShapeParams>& params,
                                          std::vector<std::vector<CameraView>> views,
                                          int threads = 1) {
    if (params.size() != views.size()) throw Error("build_stitch_problem: frame count mismatch");
    if (params.empty()) throw Error("build_stitch_problem: empty sequence");
    StitchProblem problem;
    problem.mesh = model.mesh;
    problem.views = std::move(views);
    problem.adjacency = shared_edges(model.mesh);
    for (int e = 0; e < int(problem.adjacency.size()); ++e) {
        const auto& adj = problem.adjacency[e];
        problem.edge_of[std::minmax(adj.tri_a, adj.tri_b)] = e;
    }
    int frames = int(params.size());
    problem.frame_verts.resize(frames);
    problem.vis.assign(frames, {});
    for (int f = 0; f < frames; ++f) problem.frame_verts[f] = deform(model, params[f]);
    parallel_for(std::size_t(frames), threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t f = lo; f < hi; ++f) {
            problem.vis[f].resize(problem.views[f].size());
            for (std::size_t c = 0; c < problem.views[f].size(); ++c) {
                const CameraView& cam = problem.views[f][c];
                problem.vis[f][c] = compute_visibility(problem.frame_verts[f],
                                                       problem.mesh.triangles, cam.projection,
                                                       cam.width, cam.height);
            }
        }
    });
    return problem;
}

// Quality of texturing triangle `tri` from `camera` at `frame`: one minus the
// camera's share of the total visible projected area; forbidden if occluded.
inline double data_cost(const StitchProblem& problem, int frame, int tri, int camera) {
    if (!problem.vis[frame][camera][tri].visible) return kInfCost;
    double total = 0.0;
    for (int c = 0; c < problem.camera_count(); ++c)
        if (problem.vis[frame][c][tri].visible) total += problem.vis[frame][c][tri].area;
    if (total <= 0.0) return kInfCost;
    return 1.0 - problem.vis[frame][camera][tri].area / total;
}

// Color mismatch along the shared edge of adjacent triangles i and j when they
// are textured from cameras a and b: an S-point quadrature of the RGB
// difference, scaled by the 3D edge length. Zero when a == b; forbidden when
// any sample leaves either camera's image.
inline double edge_cost(const StitchProblem& problem, int frame, int tri_i, int tri_j, int cam_a,
                        int cam_b, int samples) {
    if (cam_a == cam_b) return 0.0;
    auto it = problem.edge_of.find(std::minmax(tri_i, tri_j));
    if (it == problem.edge_of.end()) throw Error("edge_cost: triangles are not adjacent");
    const EdgeAdjacency& edge = problem.adjacency[it->second];
    const std::vector<double>& verts = problem.frame_verts[frame];
    Vec3 p0(verts[3 * edge.v0], verts[3 * edge.v0 + 1], verts[3 * edge.v0 + 2]);
    Vec3 p1(verts[3 * edge.v1], verts[3 * edge.v1 + 1], verts[3 * edge.v1 + 2]);
    double length = (p1 - p0).norm();
    const CameraView& va = problem.views[frame][cam_a];
    const CameraView& vb = problem.views[frame][cam_b];
    double sum = 0.0;
    for (int s = 0; s < samples; ++s) {
        double t = (s + 0.5) / samples;
        Vec3 X = p0 + t * (p1 - p0);
        Eigen::Vector4d h(X.x(), X.y(), X.z(), 1.0);
        Vec3 pa = va.projection * h;
        Vec3 pb = vb.projection * h;
        if (pa.z() <= 1e-12 || pb.z() <= 1e-12) return kInfCost;
        double ax = pa.x() / pa.z(), ay = pa.y() / pa.z();
        double bx = pb.x() / pb.z(), by = pb.y() / pb.z();
        if (ax < 0 || ax >= va.width || ay < 0 || ay >= va.height) return kInfCost;
        if (bx < 0 || bx >= vb.width || by < 0 || by >= vb.height) return kInfCost;
        auto ca = va.image.bilinear(ax, ay);
        auto cb = vb.image.bilinear(bx, by);
        double d = 0.0;
        for (int ch = 0; ch < 3; ++ch) d += (ca[ch] - cb[ch]) * (ca[ch] - cb[ch]);
        sum += std::sqrt(d);
    }
    return sum * length / samples;
}

// Total sequence energy of a labeling: data + weighted seam + weighted
// temporal terms, saturating on forbidden assignments.
inline double stitch_energy(const StitchProblem& problem, const StitchConfig& config,
                            const std::vector<std::vector<int>>& labels) {
    double e = 0.0;
    for (int f = 0; f < problem.frame_count(); ++f) {
        for (int t = 0; t < problem.triangle_count(); ++t)
            e = sat_add(e, data_cost(problem, f, t, labels[f][t]));
        for (const auto& adj : problem.adjacency) {
            double v = edge_cost(problem, f, adj.tri_a, adj.tri_b, labels[f][adj.tri_a],
                                 labels[f][adj.tri_b], config.edge_samples);
            e = sat_add(e, is_inf_cost(v) ? kInfCost : config.spatial_weight * v);
        }
        if (f > 0)
            for (int t = 0; t < problem.triangle_count(); ++t)
                if (labels[f][t] != labels[f - 1][t]) e = sat_add(e, config.temporal_weight);
    }
    return e;
}

struct LabelingResult {
    std::vector<std::vector<int>> labels;  // [frame][triangle] -> camera
    double energy = 0.0;
    // triangles that were occluded in every camera, labeled by the fallback
    // rule (previous frame's label, else largest projected area)
    std::vector<std::pair<int, int>> fallback;  // (frame, triangle)
};

// One alpha-expansion over the whole spatio-temporal graph: data costs per
// triangle and frame, seam costs between adjacent triangles within a frame,
// and a label-change penalty linking each triangle to itself in the previous
// frame.
inline LabelingResult solve_labeling(const StitchProblem& problem, const StitchConfig& config) {
    int frames = problem.frame_count();
    int tris = problem.triangle_count();
    int cams = problem.camera_count();
    if (frames == 0 || tris == 0 || cams == 0) throw Error("solve_labeling: empty problem");

    auto node_of = [tris](int frame, int tri) { return frame * tris + tri; };

    MultiLabelProblem mrf;
    mrf.nodes = frames * tris;
    mrf.labels = cams;
    mrf.unary.assign(std::size_t(mrf.nodes) * cams, 0.0);

    LabelingResult result;
    std::vector<bool> is_fallback(std::size_t(mrf.nodes), false);
    std::vector<int> pinned(std::size_t(mrf.nodes), -1);
    for (int f = 0; f < frames; ++f)
        for (int t = 0; t < tris; ++t) {
            int node = node_of(f, t);
            bool any_visible = false;
            for (int c = 0; c < cams; ++c) {
                double u = data_cost(problem, f, t, c);
                mrf.unary[std::size_t(node) * cams + c] = u;
                if (!is_inf_cost(u)) any_visible = true;
            }
            if (!any_visible) {
                is_fallback[std::size_t(node)] = true;
                result.fallback.push_back({f, t});
                // the solver realizes the fallback rule: free unaries plus a
                // huge temporal tie (first frame: pinned to the largest area)
                for (int c = 0; c < cams; ++c) mrf.unary[std::size_t(node) * cams + c] = 0.0;
                if (f == 0) {
                    int best = 0;
                    double best_area = -1.0;
                    for (int c = 0; c < cams; ++c)
                        if (problem.vis[f][c][t].area > best_area) {
                            best_area = problem.vis[f][c][t].area;
                            best = c;
                        }
                    pinned[std::size_t(node)] = best;
                    for (int c = 0; c < cams; ++c)
                        if (c != best) mrf.unary[std::size_t(node) * cams + c] = kInfCost;
                }
            }
        }

    // spatial seam terms (skipped on fallback nodes)
    for (int f = 0; f < frames; ++f)
        for (const auto& adj : problem.adjacency) {
            int na = node_of(f, adj.tri_a), nb = node_of(f, adj.tri_b);
            if (is_fallback[std::size_t(na)] || is_fallback[std::size_t(nb)]) continue;
            std::vector<double> table(std::size_t(cams) * cams, 0.0);
            for (int a = 0; a < cams; ++a)
                for (int b = 0; b < cams; ++b)
                    table[std::size_t(a) * cams + b] =
                        edge_cost(problem, f, adj.tri_a, adj.tri_b, a, b, config.edge_samples);
            mrf.edges.push_back(
                {na, nb, PairwiseCost::from_table(cams, std::move(table), config.spatial_weight)});
        }

    // temporal consistency between consecutive frames
    for (int f = 1; f < frames; ++f)
        for (int t = 0; t < tris; ++t) {
            int node = node_of(f, t);
            double w = is_fallback[std::size_t(node)] ? kBigCost : config.temporal_weight;
            if (w <= 0.0) continue;
            mrf.edges.push_back({node_of(f - 1, t), node, PairwiseCost::potts(w)});
        }

    // initial labeling: cheapest admissible camera, fallbacks copy backwards
    std::vector<int> init(std::size_t(mrf.nodes), 0);
    for (int f = 0; f < frames; ++f)
        for (int t = 0; t < tris; ++t) {
            int node = node_of(f, t);
            if (is_fallback[std::size_t(node)]) {
                init[std::size_t(node)] =
                    pinned[std::size_t(node)] >= 0 ? pinned[std::size_t(node)]
                                                   : init[std::size_t(node_of(f - 1, t))];
                continue;
            }
            double best = kInfCost + 1.0;
            for (int c = 0; c < cams; ++c) {
                double u = mrf.unary[std::size_t(node) * cams + c];
                if (u < best) {
                    best = u;
                    init[std::size_t(node)] = c;
                }
            }
        }

    ExpansionResult solved = alpha_expand(mrf, std::move(init), config.max_sweeps);
    result.energy = solved.energy;
    result.labels.assign(std::size_t(frames), std::vector<int>(std::size_t(tris), 0));
    for (int f = 0; f < frames; ++f)
        for (int t = 0; t < tris; ++t)
            result.labels[std::size_t(f)][std::size_t(t)] = solved.labeling[std::size_t(node_of(f, t))];
    return result;
}

// --- atlas assembly ------------------------------------------------------------

struct SeamEdge {
    int tri_a, tri_b;
    double x0, y0, x1, y1;  // shared uv edge in texel coordinates
};

struct AtlasResult {
    Image atlas;
    std::vector<int> texel_label;  // source camera per texel, -1 where empty
    std::vector<SeamEdge> seams;
    std::vector<int> degenerate_uv;  // skipped triangles
};

// Fills each triangle's uv footprint by projecting the corresponding surface
// point into the triangle's source camera.
inline AtlasResult assemble_texture(const TriMesh& mesh, const std::vector<double>& verts,
                                    const std::vector<int>& labels,
                                    const std::vector<CameraView>& views,
                                    const StitchConfig& config) {
    if (labels.size() != mesh.triangles.size()) throw Error("assemble_texture: labeling size mismatch");
    int W = config.atlas_width, H = config.atlas_height;
    AtlasResult result;
    result.atlas = Image(W, H, 3);
    result.texel_label.assign(std::size_t(W) * H, -1);

    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        int cam = labels[t];
        const CameraView& view = views[std::size_t(cam)];
        double u0 = mesh.uv[tri[0]][0] * W, v0 = mesh.uv[tri[0]][1] * H;
        double u1 = mesh.uv[tri[1]][0] * W, v1 = mesh.uv[tri[1]][1] * H;
        double u2 = mesh.uv[tri[2]][0] * W, v2 = mesh.uv[tri[2]][1] * H;
        double area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0);
        if (std::abs(area) < 1e-12) {
            result.degenerate_uv.push_back(int(t));
            continue;
        }
        int x0 = std::max(0, int(std::floor(std::min({u0, u1, u2}))));
        int x1 = std::min(W - 1, int(std::ceil(std::max({u0, u1, u2}))));
        int y0 = std::max(0, int(std::floor(std::min({v0, v1, v2}))));
        int y1 = std::min(H - 1, int(std::ceil(std::max({v0, v1, v2}))));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double px = x + 0.5, py = y + 0.5;
                double w0 = (u1 - px) * (v2 - py) - (v1 - py) * (u2 - px);
                double w1 = (u2 - px) * (v0 - py) - (v2 - py) * (u0 - px);
                double w2 = (u0 - px) * (v1 - py) - (v0 - py) * (u1 - px);
                if (area < 0) {
                    w0 = -w0;
                    w1 = -w1;
                    w2 = -w2;
                }
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                double s = w0 + w1 + w2;
                if (s <= 0) continue;
                Vec3 X = (w0 * Vec3(verts[3 * tri[0]], verts[3 * tri[0] + 1], verts[3 * tri[0] + 2]) +
                          w1 * Vec3(verts[3 * tri[1]], verts[3 * tri[1] + 1], verts[3 * tri[1] + 2]) +
                          w2 * Vec3(verts[3 * tri[2]], verts[3 * tri[2] + 1], verts[3 * tri[2] + 2])) /
                         s;
                Vec3 proj = project_point_depth(view.projection, X);
                auto rgb = view.image.bilinear(proj.x(), proj.y());
                for (int c = 0; c < 3; ++c) result.atlas.at(x, y, c) = float(rgb[c]);
                result.texel_label[std::size_t(y) * W + x] = cam;
            }
    }

    // seams: shared uv edges between triangles with different source cameras
    for (const auto& adj : shared_edges(mesh)) {
        if (labels[std::size_t(adj.tri_a)] == labels[std::size_t(adj.tri_b)]) continue;
        result.seams.push_back({adj.tri_a, adj.tri_b, mesh.uv[adj.v0][0] * W, mesh.uv[adj.v0][1] * H,
                                mesh.uv[adj.v1][0] * W, mesh.uv[adj.v1][1] * H});
    }
    return result;
}

// Hides seams by a gradient-domain solve in a band around each seam edge.
// Texels outside every band are returned bit-identical. Across the seam the
// guidance is the mean of the one-sided differences of the two sides.
inline Image conceal_seams(const AtlasResult& assembled, const StitchConfig& config) {
    const Image& atlas = assembled.atlas;
    int W = atlas.width, H = atlas.height;
    if (assembled.seams.empty() || config.band_radius < 1) return atlas;

    std::vector<std::uint8_t> band(std::size_t(W) * H, 0);
    std::vector<std::pair<int, int>> frontier;
    for (const auto& seam : assembled.seams) {
        double len = std::hypot(seam.x1 - seam.x0, seam.y1 - seam.y0);
        int steps = std::max(2, int(std::ceil(len * 2)));
        for (int s = 0; s <= steps; ++s) {
            double t = double(s) / steps;
            int x = int(std::floor(seam.x0 + t * (seam.x1 - seam.x0)));
            int y = int(std::floor(seam.y0 + t * (seam.y1 - seam.y0)));
            if (x < 0 || x >= W || y < 0 || y >= H) continue;  // clipped at bounds
            if (!band[std::size_t(y) * W + x]) {
                band[std::size_t(y) * W + x] = 1;
                frontier.push_back({x, y});
            }
        }
    }
    // dilate the rasterized seams by the band radius (4-neighborhood rings)
    for (int r = 0; r < config.band_radius; ++r) {
        std::vector<std::pair<int, int>> next;
        for (auto [x, y] : frontier) {
            const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                int nx = x + dx[k], ny = y + dy[k];
                if (nx < 0 || nx >= W || ny < 0 || ny >= H) continue;
                if (!band[std::size_t(ny) * W + nx]) {
                    band[std::size_t(ny) * W + nx] = 1;
                    next.push_back({nx, ny});
                }
            }
        }
        frontier.swap(next);
    }

    // guidance: same-side pairs keep the atlas difference; crossing pairs take
    // the mean of the available one-sided differences
    GradientField g{Image(W, H, 3), Image(W, H, 3)};
    auto side = [&](int x, int y) { return assembled.texel_label[std::size_t(y) * W + x]; };
    auto fill_dir = [&](Image& field, int dx, int dy) {
        for (int y = 0; y + dy < H; ++y)
            for (int x = 0; x + dx < W; ++x) {
                int qx = x + dx, qy = y + dy;
                int sp = side(x, y), sq = side(qx, qy);
                for (int c = 0; c < 3; ++c) {
                    double v;
                    if (sp == sq || sp < 0 || sq < 0) {
                        v = atlas.at(qx, qy, c) - atlas.at(x, y, c);
                    } else {
                        double acc = 0.0;
                        int n = 0;
                        int lx = x - dx, ly = y - dy;
                        if (lx >= 0 && ly >= 0 && side(lx, ly) == sp) {
                            acc += atlas.at(x, y, c) - atlas.at(lx, ly, c);
                            ++n;
                        }
                        int rx = qx + dx, ry = qy + dy;
                        if (rx < W && ry < H && side(rx, ry) == sq) {
                            acc += atlas.at(rx, ry, c) - atlas.at(qx, qy, c);
                            ++n;
                        }
                        v = n > 0 ? acc / n : 0.0;
                    }
                    field.at(x, y, c) = float(v);
                }
            }
    };
    fill_dir(g.gx, 1, 0);
    fill_dir(g.gy, 0, 1);

    return poisson_blend_2d(atlas, band, g, atlas, 1e-10, 20000);
}

// --- labeling dump: JSON array [frame][triangle] = camera id --------------------

inline void save_labeling_json(const std::string& path, const std::vector<std::vector<int>>& labels) {
    nlohmann::json j = labels;
    write_text_file(path, j.dump() + "\n");
}

inline std::vector<std::vector<int>> load_labeling_json(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
    if (!j.is_array()) throw FormatError(path + ": labeling must be a JSON array");
    return j.get<std::vector<std::vector<int>>>();
}

}  // namespace visyn
