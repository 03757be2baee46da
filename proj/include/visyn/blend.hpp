#pragma once

#include <algorithm>
#include <vector>

#include "visyn/common.hpp"
#include "visyn/image.hpp"
#include "visyn/linsolve.hpp"

namespace visyn {

// --- 1D sequence blending -----------------------------------------------------

// A junction at index j means frame j is the first frame of the later piece;
// the discontinuous step is (j-1, j). The blend window spans `radius` steps on
// each side of that step, i.e. frames [j-1-radius, j+radius], clipped at the
// sequence ends and at the midpoints between neighboring junctions. Within a
// window the new values minimize the squared deviation from target gradients
// (the within-piece differences; the junction step targets the mean of its two
// flanking differences) with both window boundary frames pinned, so frames
// outside every window are returned bit-identical.
inline std::vector<double> blend_sequence_1d(const std::vector<double>& frames, int dim,
                                             std::vector<int> junctions, int radius) {
    if (dim <= 0) throw Error("blend_sequence_1d: bad dimension");
    if (frames.size() % std::size_t(dim) != 0) throw Error("blend_sequence_1d: size not multiple of dim");
    int total = int(frames.size() / std::size_t(dim));
    std::vector<double> out(frames);
    if (junctions.empty() || total < 3 || radius < 1) return out;
    std::sort(junctions.begin(), junctions.end());
    junctions.erase(std::unique(junctions.begin(), junctions.end()), junctions.end());
    for (int j : junctions)
        if (j < 1 || j > total - 1) throw Error("blend_sequence_1d: junction outside sequence");

    auto input = [&](int f, int k) { return frames[std::size_t(f) * dim + k]; };

    for (std::size_t w = 0; w < junctions.size(); ++w) {
        int j = junctions[w];
        int lo = std::max(0, j - 1 - radius);
        int hi = std::min(total - 1, j + radius);
        if (w > 0) lo = std::max(lo, (junctions[w - 1] + j) / 2);
        if (w + 1 < junctions.size()) hi = std::min(hi, (j + junctions[w + 1]) / 2);
        int unknowns = hi - lo - 1;
        if (unknowns <= 0) continue;

        for (int k = 0; k < dim; ++k) {
            // target gradient per step f -> f+1 inside [lo, hi)
            std::vector<double> g(std::size_t(hi - lo), 0.0);
            for (int f = lo; f < hi; ++f) {
                double t;
                if (f == j - 1) {
                    double before = j >= 2 ? input(j - 1, k) - input(j - 2, k) : 0.0;
                    double after = j + 1 <= total - 1 ? input(j + 1, k) - input(j, k) : 0.0;
                    if (j >= 2 && j + 1 <= total - 1)
                        t = 0.5 * (before + after);
                    else
                        t = j >= 2 ? before : after;
                } else {
                    t = input(f + 1, k) - input(f, k);
                }
                g[std::size_t(f - lo)] = t;
            }
            // minimize sum_f ((x[f+1]-x[f]) - g[f])^2 with x[lo], x[hi] pinned
            TriDiagSystem sys;
            sys.diag.assign(unknowns, 2.0);
            sys.sub.assign(std::size_t(std::max(0, unknowns - 1)), -1.0);
            sys.super.assign(std::size_t(std::max(0, unknowns - 1)), -1.0);
            sys.rhs.assign(unknowns, 0.0);
            for (int u = 0; u < unknowns; ++u) {
                int f = lo + 1 + u;
                sys.rhs[u] = g[std::size_t(f - 1 - lo)] - g[std::size_t(f - lo)];
                if (f - 1 == lo) sys.rhs[u] += input(lo, k);
                if (f + 1 == hi) sys.rhs[u] += input(hi, k);
            }
            std::vector<double> x = solve_tridiag(std::move(sys));
            for (int u = 0; u < unknowns; ++u) out[std::size_t(lo + 1 + u) * dim + k] = x[u];
        }
    }
    return out;
}

// --- 2D Poisson blending --------------------------------------------------------

// Target finite differences: gx(x,y,c) prescribes I(x+1,y,c) - I(x,y,c) and
// gy(x,y,c) prescribes I(x,y+1,c) - I(x,y,c).
struct GradientField {
    Image gx, gy;
};

inline GradientField gradient_of(const Image& img) {
    GradientField g{Image(img.width, img.height, img.channels), Image(img.width, img.height, img.channels)};
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                if (x + 1 < img.width) g.gx.at(x, y, c) = img.at(x + 1, y, c) - img.at(x, y, c);
                if (y + 1 < img.height) g.gy.at(x, y, c) = img.at(x, y + 1, c) - img.at(x, y, c);
            }
    return g;
}

// Discrete Poisson solve on the masked region: per channel, the output inside
// the mask minimizes the squared deviation of its finite differences from the
// guidance field, with Dirichlet values taken from `boundary` on the ring of
// pixels just outside the mask. Pixels outside the mask are copied from input.
inline Image poisson_blend_2d(const Image& input, const std::vector<std::uint8_t>& mask,
                              const GradientField& guidance, const Image& boundary,
                              double tol = 1e-11, int max_iterations = 20000) {
    int w = input.width, h = input.height;
    if (int(mask.size()) != w * h) throw Error("poisson_blend_2d: mask size mismatch");
    if (!input.same_shape(boundary)) throw Error("poisson_blend_2d: boundary shape mismatch");
    if (!guidance.gx.same_shape(input) || !guidance.gy.same_shape(input))
        throw Error("poisson_blend_2d: guidance shape mismatch");

    std::vector<int> unknown_of(std::size_t(w) * h, -1);
    std::vector<int> pixels;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask[std::size_t(y) * w + x]) {
                unknown_of[std::size_t(y) * w + x] = int(pixels.size());
                pixels.push_back(y * w + x);
            }
    if (pixels.empty()) throw Error("poisson_blend_2d: empty mask");

    Image out(input);
    int n = int(pixels.size());
    for (int c = 0; c < input.channels; ++c) {
        SparseSystem sys(n);
        std::vector<double> diag(n, 0.0);
        // residual per 4-neighbor pair (p, q), q = p + ex or p + ey:
        //   (x_q - x_p) - g(p->q)
        auto add_pair = [&](int px, int py, int qx, int qy, double g) {
            bool p_in = unknown_of[std::size_t(py) * w + px] >= 0;
            bool q_in = unknown_of[std::size_t(qy) * w + qx] >= 0;
            if (!p_in && !q_in) return;
            int up = p_in ? unknown_of[std::size_t(py) * w + px] : -1;
            int uq = q_in ? unknown_of[std::size_t(qy) * w + qx] : -1;
            if (p_in && q_in) {
                diag[up] += 1.0;
                diag[uq] += 1.0;
                sys.add_sym(up, uq, -1.0);
                sys.rhs[up] -= g;
                sys.rhs[uq] += g;
            } else if (p_in) {
                double fixed = boundary.at(qx, qy, c);
                diag[up] += 1.0;
                sys.rhs[up] += fixed - g;
            } else {
                double fixed = boundary.at(px, py, c);
                diag[uq] += 1.0;
                sys.rhs[uq] += fixed + g;
            }
        };
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (x + 1 < w) add_pair(x, y, x + 1, y, guidance.gx.at(x, y, c));
                if (y + 1 < h) add_pair(x, y, x, y + 1, guidance.gy.at(x, y, c));
            }
        for (int i = 0; i < n; ++i) sys.add_sym(i, i, diag[i]);
        std::vector<double> x = solve_cg(sys, tol, max_iterations);
        for (int i = 0; i < n; ++i) out.data[std::size_t(pixels[i]) * input.channels + c] = float(x[i]);
    }
    return out;
}

// --- Laplacian mesh integration -------------------------------------------------

// Replaces the ROI vertices of `base` so that the uniform-Laplacian
// coordinates match those of `replacement` (least squares), softly anchoring
// `anchors` to the base positions with the given weight. Vertices outside the
// ROI are returned exactly as in `base`.
inline std::vector<double> laplacian_mesh_integrate(const std::vector<double>& base,
                                                    const std::vector<double>& replacement,
                                                    const std::vector<int>& roi,
                                                    const std::vector<int>& anchors,
                                                    double anchor_weight,
                                                    const std::vector<std::vector<int>>& adjacency) {
    int n = int(adjacency.size());
    if (base.size() != std::size_t(3) * n || replacement.size() != std::size_t(3) * n)
        throw Error("laplacian_mesh_integrate: size mismatch");
    std::vector<int> unknown_of(n, -1);
    for (std::size_t i = 0; i < roi.size(); ++i) {
        if (roi[i] < 0 || roi[i] >= n) throw Error("laplacian_mesh_integrate: roi index out of range");
        unknown_of[roi[i]] = int(i);
    }
    std::vector<bool> anchored(n, false);
    for (int a : anchors) {
        if (a < 0 || a >= n || unknown_of[a] < 0)
            throw Error("laplacian_mesh_integrate: anchor must be a roi vertex");
        anchored[a] = true;
    }

    // connectivity check: every ROI component needs contact with fixed
    // vertices or at least one anchor
    {
        std::vector<int> comp(n, -1);
        for (int seed : roi) {
            if (comp[seed] >= 0) continue;
            std::vector<int> stack{seed};
            comp[seed] = seed;
            bool constrained = anchored[seed];
            std::vector<int> members;
            while (!stack.empty()) {
                int v = stack.back();
                stack.pop_back();
                members.push_back(v);
                for (int u : adjacency[v]) {
                    if (unknown_of[u] < 0) {
                        constrained = true;
                        continue;
                    }
                    if (comp[u] < 0) {
                        comp[u] = seed;
                        if (anchored[u]) constrained = true;
                        stack.push_back(u);
                    }
                }
            }
            if (!constrained)
                throw DegenerateError(
                    "laplacian_mesh_integrate: ROI component without anchors or fixed neighbors");
        }
    }

    int m = int(roi.size());
    std::vector<double> out(base);
    if (m == 0) return out;

    for (int coord = 0; coord < 3; ++coord) {
        SparseSystem sys(m);
        std::vector<double> diag(m, 0.0);
        std::vector<std::pair<int, double>> row;
        for (int v : roi) {
            // Laplacian row: deg*x_v - sum_u x_u, target from the replacement
            // field (replacement on roi, base elsewhere)
            row.clear();
            double rhs = double(adjacency[v].size()) * replacement[3 * v + coord];
            for (int u : adjacency[v]) rhs -= (unknown_of[u] >= 0 ? replacement : base)[3 * u + coord];
            row.push_back({unknown_of[v], double(adjacency[v].size())});
            for (int u : adjacency[v]) {
                if (unknown_of[u] >= 0)
                    row.push_back({unknown_of[u], -1.0});
                else
                    rhs += base[3 * u + coord];
            }
            for (std::size_t a = 0; a < row.size(); ++a) {
                diag[row[a].first] += row[a].second * row[a].second;
                for (std::size_t b = a + 1; b < row.size(); ++b)
                    sys.add_sym(row[a].first, row[b].first, row[a].second * row[b].second);
                sys.rhs[row[a].first] += row[a].second * rhs;
            }
        }
        for (int a : anchors) {
            double wgt = anchor_weight * anchor_weight;
            diag[unknown_of[a]] += wgt;
            sys.rhs[unknown_of[a]] += wgt * base[3 * a + coord];
        }
        for (int i = 0; i < m; ++i) sys.add_sym(i, i, diag[i]);
        std::vector<double> x = solve_cg(sys, 1e-12, 20000);
        for (int i = 0; i < m; ++i) out[std::size_t(3) * roi[i] + coord] = x[i];
    }
    return out;
}

}  // namespace visyn
