#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "visyn/common.hpp"

namespace visyn {

// Tridiagonal system. diag has n entries, sub/super n-1.
struct TriDiagSystem {
    std::vector<double> sub, diag, super, rhs;

    int size() const { return int(diag.size()); }
};

// Thomas algorithm, pivot-free; intended for diagonally dominant systems.
inline std::vector<double> solve_tridiag(TriDiagSystem s) {
    int n = s.size();
    if (n == 0) return {};
    if (int(s.rhs.size()) != n || int(s.sub.size()) != n - 1 || int(s.super.size()) != n - 1)
        throw Error("solve_tridiag: inconsistent sizes");
    for (int i = 1; i < n; ++i) {
        if (std::abs(s.diag[i - 1]) < 1e-300) throw DegenerateError("solve_tridiag: zero pivot");
        double w = s.sub[i - 1] / s.diag[i - 1];
        s.diag[i] -= w * s.super[i - 1];
        s.rhs[i] -= w * s.rhs[i - 1];
    }
    if (std::abs(s.diag[n - 1]) < 1e-300) throw DegenerateError("solve_tridiag: zero pivot");
    std::vector<double> x(n);
    x[n - 1] = s.rhs[n - 1] / s.diag[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = (s.rhs[i] - s.super[i] * x[i + 1]) / s.diag[i];
    return x;
}

// Symmetric positive semi-definite matrix in coordinate form. add_sym stores
// both triangle entries so the stored triplets are symmetric by construction.
struct SparseSystem {
    int n = 0;
    std::vector<std::array<int, 2>> idx;
    std::vector<double> val;
    std::vector<double> rhs;

    explicit SparseSystem(int size = 0) : n(size), rhs(size, 0.0) {}

    void add_sym(int i, int j, double v) {
        idx.push_back({i, j});
        val.push_back(v);
        if (i != j) {
            idx.push_back({j, i});
            val.push_back(v);
        }
    }

    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        y.assign(n, 0.0);
        for (std::size_t k = 0; k < idx.size(); ++k) y[idx[k][0]] += val[k] * x[idx[k][1]];
    }
};

// Jacobi-preconditioned conjugate gradients. Converged when the true
// residual satisfies |Ax - b|_2 <= tol * |b|_2.
inline std::vector<double> solve_cg(const SparseSystem& system, double tol = 1e-10,
                                    int max_iterations = 10000) {
    int n = system.n;
    std::vector<double> inv_diag(n, 1.0);
    {
        std::vector<double> diag(n, 0.0);
        for (std::size_t k = 0; k < system.idx.size(); ++k)
            if (system.idx[k][0] == system.idx[k][1]) diag[system.idx[k][0]] += system.val[k];
        for (int i = 0; i < n; ++i)
            if (diag[i] > 0.0) inv_diag[i] = 1.0 / diag[i];
    }
    std::vector<double> x(n, 0.0), r(system.rhs), z(n), p(n), ap(n);
    double rhs_norm = 0.0;
    for (double v : system.rhs) rhs_norm += v * v;
    rhs_norm = std::sqrt(rhs_norm);
    if (rhs_norm == 0.0) return x;
    double target = tol * rhs_norm;
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = 0.0;
    for (int i = 0; i < n; ++i) rz += r[i] * z[i];
    double res = rhs_norm;
    for (int it = 0; it < max_iterations; ++it) {
        if (res <= target) return x;
        system.multiply(p, ap);
        double pap = 0.0;
        for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0.0 || !std::isfinite(pap))
            throw NonConvergenceError("solve_cg: breakdown (matrix not SPD on Krylov space)", res);
        double step = rz / pap;
        for (int i = 0; i < n; ++i) {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        double rr = 0.0;
        for (double v : r) rr += v * v;
        res = std::sqrt(rr);
        for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        double rz_new = 0.0;
        for (int i = 0; i < n; ++i) rz_new += r[i] * z[i];
        double beta = rz_new / rz;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        rz = rz_new;
    }
    if (res <= target) return x;
    throw NonConvergenceError("solve_cg: no convergence", res);
}

}  // namespace visyn
