#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "visyn/blend.hpp"
#include "visyn/common.hpp"

using namespace visyn;

TEST_CASE("blend_sequence_1d: junction-free input is returned bit-identical") {
    std::vector<double> frames{0, 1, 2, 3, 4, 5};
    auto out = blend_sequence_1d(frames, 1, {}, 5);
    REQUIRE(out == frames);
}

TEST_CASE("blend_sequence_1d: continuous input with constant gradient is a fixed point") {
    int F = 20;
    std::vector<double> frames(F);
    for (int f = 0; f < F; ++f) frames[f] = 0.5 + 0.1 * f;
    auto out = blend_sequence_1d(frames, 1, {10}, 5);
    for (int f = 0; f < F; ++f) REQUIRE(out[f] == Catch::Approx(frames[f]).margin(1e-9));
}

TEST_CASE("blend_sequence_1d: unit step junction shrinks by the window length") {
    int F = 40, j = 20, r = 5;
    std::vector<double> frames(F, 0.0);
    for (int f = j; f < F; ++f) frames[f] = 1.0;
    auto out = blend_sequence_1d(frames, 1, {j}, r);
    // closed form: all target gradients vanish, both window ends pinned, so
    // the window relaxes to a linear ramp over its 2r+1 steps
    int lo = j - 1 - r, hi = j + r;
    for (int f = lo + 1; f < hi; ++f) {
        double expected = double(f - lo) / double(hi - lo);
        REQUIRE(out[f] == Catch::Approx(expected).margin(1e-9));
    }
    double junction_step = std::abs(out[j] - out[j - 1]);
    REQUIRE(junction_step <= 1.0 / 10.0 + 1e-12);
    REQUIRE(junction_step == Catch::Approx(1.0 / 11.0).margin(1e-9));
    // endpoints and everything outside the window are untouched, bit-exact
    for (int f = 0; f <= lo; ++f) REQUIRE(out[f] == frames[f]);
    for (int f = hi; f < F; ++f) REQUIRE(out[f] == frames[f]);
}

TEST_CASE("blend_sequence_1d: channels are independent") {
    int F = 16;
    Rng rng(4242);
    std::vector<double> a(F), b(F);
    for (int f = 0; f < F; ++f) {
        a[f] = rng.uniform(0, 1);
        b[f] = rng.uniform(0, 1);
    }
    std::vector<double> joint(2 * F);
    for (int f = 0; f < F; ++f) {
        joint[2 * f] = a[f];
        joint[2 * f + 1] = b[f];
    }
    auto out_joint = blend_sequence_1d(joint, 2, {8}, 3);
    auto out_a = blend_sequence_1d(a, 1, {8}, 3);
    auto out_b = blend_sequence_1d(b, 1, {8}, 3);
    for (int f = 0; f < F; ++f) {
        REQUIRE(out_joint[2 * f] == out_a[f]);
        REQUIRE(out_joint[2 * f + 1] == out_b[f]);
    }
}

TEST_CASE("blend_sequence_1d: close junctions clip at midpoints, far frames untouched") {
    int F = 30;
    std::vector<double> frames(F, 0.0);
    for (int f = 10; f < 14; ++f) frames[f] = 1.0;
    for (int f = 14; f < F; ++f) frames[f] = 2.0;
    auto out = blend_sequence_1d(frames, 1, {10, 14}, 5);
    REQUIRE(out.size() == frames.size());
    // windows meet at the midpoint (frame 12); sequence ends are untouched
    for (int f = 0; f <= 4; ++f) REQUIRE(out[f] == frames[f]);
    for (int f = 19; f < F; ++f) REQUIRE(out[f] == frames[f]);
    REQUIRE(std::abs(out[10] - out[9]) < 1.0);
    REQUIRE(std::abs(out[14] - out[13]) < 1.0);
}

TEST_CASE("blend_sequence_1d: junction outside (0, F) rejected") {
    std::vector<double> frames(8, 0.0);
    REQUIRE_THROWS_AS(blend_sequence_1d(frames, 1, {0}, 2), Error);
    REQUIRE_THROWS_AS(blend_sequence_1d(frames, 1, {8}, 2), Error);
}

// --- poisson_blend_2d --------------------------------------------------------

namespace {

std::vector<std::uint8_t> rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
    std::vector<std::uint8_t> m(std::size_t(w) * h, 0);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m[std::size_t(y) * w + x] = 1;
    return m;
}

GradientField zero_guidance(int w, int h, int c) {
    return {Image(w, h, c), Image(w, h, c)};
}

}  // namespace

TEST_CASE("poisson_blend_2d: zero guidance with constant boundary is constant") {
    int w = 12, h = 10;
    Image img(w, h, 3, 0.9f);
    Image boundary(w, h, 3, 0.35f);
    auto mask = rect_mask(w, h, 2, 2, 9, 7);
    Image out = poisson_blend_2d(img, mask, zero_guidance(w, h, 3), boundary, 1e-12, 5000);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                if (mask[std::size_t(y) * w + x])
                    REQUIRE(out.at(x, y, c) == Catch::Approx(0.35).margin(1e-6));
                else
                    REQUIRE(out.at(x, y, c) == img.at(x, y, c));  // untouched
            }
}

TEST_CASE("poisson_blend_2d: guidance equal to the raster gradient is a fixed point") {
    int w = 14, h = 11;
    Image img(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y, 0) = float(0.2 + 0.03 * x + 0.05 * y + 0.01 * x * y);
    auto mask = rect_mask(w, h, 3, 3, 10, 8);
    Image out = poisson_blend_2d(img, mask, gradient_of(img), img, 1e-12, 5000);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) REQUIRE(out.at(x, y, 0) == Catch::Approx(img.at(x, y, 0)).margin(1e-6));
}

TEST_CASE("poisson_blend_2d: mixed guidance on a 16x16 mask matches the dense solve") {
    int w = 16, h = 16;
    Rng rng(31);
    Image img(w, h, 1);
    Image boundary(w, h, 1);
    for (auto& v : img.data) v = float(rng.uniform(0, 1));
    for (auto& v : boundary.data) v = float(rng.uniform(0, 1));
    GradientField g{Image(w, h, 1), Image(w, h, 1)};
    for (auto& v : g.gx.data) v = float(rng.uniform(-0.1, 0.1));
    for (auto& v : g.gy.data) v = float(rng.uniform(-0.1, 0.1));
    auto mask = rect_mask(w, h, 2, 3, 12, 13);

    Image out = poisson_blend_2d(img, mask, g, boundary, 1e-13, 20000);

    // dense oracle: assemble the same least-squares problem and solve exactly
    std::vector<int> unknown_of(std::size_t(w) * h, -1);
    std::vector<int> pix;
    for (int i = 0; i < w * h; ++i)
        if (mask[i]) {
            unknown_of[i] = int(pix.size());
            pix.push_back(i);
        }
    int n = int(pix.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    auto pair = [&](int px, int py, int qx, int qy, double gv) {
        int up = unknown_of[py * w + px], uq = unknown_of[qy * w + qx];
        if (up < 0 && uq < 0) return;
        if (up >= 0 && uq >= 0) {
            A(up, up) += 1;
            A(uq, uq) += 1;
            A(up, uq) -= 1;
            A(uq, up) -= 1;
            b(up) -= gv;
            b(uq) += gv;
        } else if (up >= 0) {
            A(up, up) += 1;
            b(up) += boundary.at(qx, qy, 0) - gv;
        } else {
            A(uq, uq) += 1;
            b(uq) += boundary.at(px, py, 0) + gv;
        }
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) pair(x, y, x + 1, y, g.gx.at(x, y, 0));
            if (y + 1 < h) pair(x, y, x, y + 1, g.gy.at(x, y, 0));
        }
    Eigen::VectorXd dense = A.ldlt().solve(b);
    for (int i = 0; i < n; ++i)
        REQUIRE(out.data[std::size_t(pix[i])] == Catch::Approx(dense(i)).margin(1e-6));
}

TEST_CASE("poisson_blend_2d: discrete maximum principle with zero guidance") {
    int w = 10, h = 10;
    Rng rng(32);
    Image img(w, h, 1, 0.5f);
    Image boundary(w, h, 1);
    for (auto& v : boundary.data) v = float(rng.uniform(0.2, 0.8));
    auto mask = rect_mask(w, h, 2, 2, 7, 7);
    Image out = poisson_blend_2d(img, mask, zero_guidance(w, h, 1), boundary, 1e-12, 5000);
    double lo = 1e9, hi = -1e9;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (!mask[std::size_t(y) * w + x] && (x >= 1 && x <= 8 && y >= 1 && y <= 8)) {
                lo = std::min(lo, double(boundary.at(x, y, 0)));
                hi = std::max(hi, double(boundary.at(x, y, 0)));
            }
    for (int y = 2; y <= 7; ++y)
        for (int x = 2; x <= 7; ++x) {
            REQUIRE(out.at(x, y, 0) >= lo - 1e-9);
            REQUIRE(out.at(x, y, 0) <= hi + 1e-9);
        }
}

TEST_CASE("poisson_blend_2d: empty mask rejected") {
    Image img(4, 4, 1);
    std::vector<std::uint8_t> mask(16, 0);
    REQUIRE_THROWS_AS(poisson_blend_2d(img, mask, zero_guidance(4, 4, 1), img), Error);
}

// --- laplacian_mesh_integrate --------------------------------------------------

namespace {

// grid mesh helper: gw x gh vertices in the plane z = 0
struct GridMesh {
    std::vector<double> pos;
    std::vector<std::vector<int>> adj;
    int gw, gh;
    int id(int x, int y) const { return y * gw + x; }
};

GridMesh make_grid(int gw, int gh) {
    GridMesh m;
    m.gw = gw;
    m.gh = gh;
    m.pos.resize(std::size_t(gw) * gh * 3);
    m.adj.resize(std::size_t(gw) * gh);
    for (int y = 0; y < gh; ++y)
        for (int x = 0; x < gw; ++x) {
            int i = m.id(x, y);
            m.pos[3 * i] = x;
            m.pos[3 * i + 1] = y;
            m.pos[3 * i + 2] = 0.0;
            if (x > 0) m.adj[i].push_back(m.id(x - 1, y));
            if (x < gw - 1) m.adj[i].push_back(m.id(x + 1, y));
            if (y > 0) m.adj[i].push_back(m.id(x, y - 1));
            if (y < gh - 1) m.adj[i].push_back(m.id(x, y + 1));
        }
    return m;
}

}  // namespace

TEST_CASE("laplacian_mesh_integrate: replacement equal to base is a fixed point") {
    GridMesh m = make_grid(6, 6);
    std::vector<int> roi;
    for (int y = 1; y <= 4; ++y)
        for (int x = 1; x <= 4; ++x) roi.push_back(m.id(x, y));
    std::vector<int> anchors{m.id(1, 1), m.id(4, 4)};
    auto out = laplacian_mesh_integrate(m.pos, m.pos, roi, anchors, 1.0, m.adj);
    for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == Catch::Approx(m.pos[i]).margin(1e-9));
}

TEST_CASE("laplacian_mesh_integrate: huge anchor weight pins anchors to base") {
    GridMesh m = make_grid(6, 6);
    std::vector<int> roi;
    for (int y = 1; y <= 4; ++y)
        for (int x = 1; x <= 4; ++x) roi.push_back(m.id(x, y));
    std::vector<double> replacement = m.pos;
    for (int v : roi) replacement[3 * v + 2] += 1.0;  // lifted patch
    std::vector<int> anchors;
    for (int v : roi) {
        bool border = false;
        for (int u : m.adj[v])
            if (std::find(roi.begin(), roi.end(), u) == roi.end()) border = true;
        if (border) anchors.push_back(v);
    }
    auto out = laplacian_mesh_integrate(m.pos, replacement, roi, anchors, 1e6, m.adj);
    for (int a : anchors)
        for (int c = 0; c < 3; ++c)
            REQUIRE(std::abs(out[3 * a + c] - m.pos[3 * a + c]) <= 1e-3);
    // vertices outside the ROI are exactly base
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
            int v = m.id(x, y);
            if (std::find(roi.begin(), roi.end(), v) == roi.end())
                for (int c = 0; c < 3; ++c) REQUIRE(out[3 * v + c] == m.pos[3 * v + c]);
        }
}

TEST_CASE("laplacian_mesh_integrate: lifted patch matches the dense least-squares oracle") {
    GridMesh m = make_grid(7, 7);
    std::vector<int> roi;
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x) roi.push_back(m.id(x, y));
    std::vector<double> replacement = m.pos;
    for (int v : roi) replacement[3 * v + 2] += 1.0;
    std::vector<int> anchors;
    for (int v : roi) {
        bool border = false;
        for (int u : m.adj[v])
            if (std::find(roi.begin(), roi.end(), u) == roi.end()) border = true;
        if (border) anchors.push_back(v);
    }
    double w = 0.5;
    auto out = laplacian_mesh_integrate(m.pos, replacement, roi, anchors, w, m.adj);

    // dense oracle for the z coordinate
    int n = int(roi.size());
    std::vector<int> unknown_of(m.pos.size() / 3, -1);
    for (int i = 0; i < n; ++i) unknown_of[roi[i]] = i;
    int rows = n + int(anchors.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    for (int i = 0; i < n; ++i) {
        int v = roi[i];
        double deg = double(m.adj[v].size());
        A(i, i) = deg;
        b(i) = deg * replacement[3 * v + 2];
        for (int u : m.adj[v]) {
            b(i) -= (unknown_of[u] >= 0 ? replacement : m.pos)[3 * u + 2];
            if (unknown_of[u] >= 0)
                A(i, unknown_of[u]) -= 1.0;
            else
                b(i) -= m.pos[3 * u + 2];  // cancels: base z = 0 here
        }
    }
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        A(n + int(a), unknown_of[anchors[a]]) = w;
        b(n + int(a)) = w * m.pos[3 * anchors[a] + 2];
    }
    Eigen::VectorXd dense = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    for (int i = 0; i < n; ++i) REQUIRE(out[3 * roi[i] + 2] == Catch::Approx(dense(i)).margin(1e-6));

    // the soft-anchored profile falls off smoothly and monotonically along the
    // row through the patch center, staying between base and replacement
    std::vector<double> half;
    for (int x = 1; x <= 3; ++x) half.push_back(out[3 * m.id(x, 3) + 2]);
    for (std::size_t i = 0; i + 1 < half.size(); ++i) REQUIRE(half[i] >= half[i + 1] - 1e-9);
    for (double z : half) {
        REQUIRE(z > 0.0);
        REQUIRE(z < 1.0);
    }
}

TEST_CASE("laplacian_mesh_integrate: disconnected ROI without anchors rejected") {
    // two isolated vertices form their own component with no fixed contact
    std::vector<std::vector<int>> adj{{1}, {0}, {3}, {2}};
    std::vector<double> base(12, 0.0), replacement(12, 0.0);
    std::vector<int> roi{0, 1};
    REQUIRE_THROWS_AS(laplacian_mesh_integrate(base, replacement, roi, {}, 1.0, adj),
                      DegenerateError);
    // with an anchor the same problem is well posed
    auto out = laplacian_mesh_integrate(base, replacement, roi, {0}, 1.0, adj);
    REQUIRE(out.size() == base.size());
}
