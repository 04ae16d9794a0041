#include "qcx/beta.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace qcx {

namespace {

// --- exact d=2 path -------------------------------------------------------

double cross2(VecView o, VecView a, VecView b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Andrew's monotone chain. Returns hull in counter-clockwise order.
std::vector<Vec> convex_hull_2d(std::vector<Vec> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
        return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const size_t n = pts.size();
    if (n <= 2) return pts;
    std::vector<Vec> h(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross2(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross2(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

WidthResult min_width_line_2d(const std::vector<Vec>& points) {
    std::vector<Vec> hull = convex_hull_2d(points);
    WidthResult best;
    best.sup_dist = std::numeric_limits<double>::infinity();
    if (hull.size() <= 2) {
        // Collinear (or fewer than 3 distinct points): width 0 along the span.
        Vec dir = {1.0, 0.0};
        if (hull.size() == 2) {
            Vec d = sub(hull[1], hull[0]);
            if (norm(d) > 0) dir = normalized(d);
        }
        best.line = Line(hull.empty() ? points[0] : hull[0], dir);
        best.sup_dist = 0.0;
        for (const Vec& p : points)
            best.sup_dist = std::max(best.sup_dist, dist_point_to_line(p, best.line));
        return best;
    }
    // The minimal slab is parallel to some hull edge.
    for (size_t i = 0; i < hull.size(); ++i) {
        const Vec& a = hull[i];
        const Vec& b = hull[(i + 1) % hull.size()];
        Vec d = sub(b, a);
        const double len = norm(d);
        if (len == 0) continue;
        Vec u = {d[0] / len, d[1] / len};
        Vec nrm = {-u[1], u[0]};
        double mn = 0.0, mx = 0.0;
        for (const Vec& p : hull) {
            const double t = (p[0] - a[0]) * nrm[0] + (p[1] - a[1]) * nrm[1];
            mn = std::min(mn, t);
            mx = std::max(mx, t);
        }
        const double half = 0.5 * (mx - mn);
        if (half < best.sup_dist) {
            const double mid = 0.5 * (mn + mx);
            Vec anchor = {a[0] + mid * nrm[0], a[1] + mid * nrm[1]};
            best.line = Line(anchor, u);
            best.sup_dist = half;
        }
    }
    return best;
}

// --- minimum enclosing ball (Welzl) ---------------------------------------

// Ball through a support set of at most d+1 points: solve the linear system
// for the center equidistant to all support points.
Ball ball_from_support(const std::vector<Vec>& sup, int dim) {
    if (sup.empty()) return Ball(Vec(dim, 0.0), 0.0);
    if (sup.size() == 1) return Ball(sup[0], 0.0);
    const size_t m = sup.size() - 1;
    // Solve A c' = b where rows are 2*(p_i - p_0), unknown center offset from
    // p_0 restricted to the affine hull of the support.
    std::vector<std::vector<double>> A(m, std::vector<double>(m, 0.0));
    std::vector<double> rhs(m, 0.0);
    std::vector<Vec> basis(m);
    for (size_t i = 0; i < m; ++i) basis[i] = sub(sup[i + 1], sup[0]);
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) A[i][j] = 2.0 * dot(basis[i], basis[j]);
        rhs[i] = dot(basis[i], basis[i]);
    }
    // Gaussian elimination with partial pivoting.
    std::vector<double> x(m, 0.0);
    for (size_t col = 0; col < m; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < m; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        std::swap(rhs[col], rhs[piv]);
        if (std::abs(A[col][col]) < 1e-30) return Ball(sup[0], 0.0);  // degenerate
        for (size_t r = col + 1; r < m; ++r) {
            const double f = A[r][col] / A[col][col];
            for (size_t c2 = col; c2 < m; ++c2) A[r][c2] -= f * A[col][c2];
            rhs[r] -= f * rhs[col];
        }
    }
    for (size_t r = m; r-- > 0;) {
        double s = rhs[r];
        for (size_t c2 = r + 1; c2 < m; ++c2) s -= A[r][c2] * x[c2];
        x[r] = s / A[r][r];
    }
    Vec center(sup[0].begin(), sup[0].end());
    for (size_t i = 0; i < m; ++i)
        for (int k = 0; k < dim; ++k) center[k] += x[i] * basis[i][k];
    return Ball(center, dist(center, sup[0]));
}

Ball welzl(const std::vector<Vec>& pts, std::vector<size_t>& order, size_t n,
           std::vector<Vec>& sup, int dim) {
    if (n == 0 || sup.size() == static_cast<size_t>(dim) + 1)
        return ball_from_support(sup, dim);
    const size_t idx = order[n - 1];
    Ball b = welzl(pts, order, n - 1, sup, dim);
    if (b.contains(pts[idx], 1e-12 * (b.radius + 1.0))) return b;
    sup.push_back(pts[idx]);
    b = welzl(pts, order, n - 1, sup, dim);
    sup.pop_back();
    return b;
}

// --- direction-grid path for d >= 3 ----------------------------------------

// Orthonormal basis of the hyperplane orthogonal to u (Householder).
std::vector<Vec> orthogonal_basis(const Vec& u) {
    const int d = static_cast<int>(u.size());
    Vec v = u;
    v[0] += (u[0] >= 0 ? 1.0 : -1.0) * norm(u);
    const double vn2 = dot(v, v);
    std::vector<Vec> basis;
    for (int k = 1; k < d; ++k) {
        Vec e(d, 0.0);
        e[k] = 1.0;
        const double f = 2.0 * dot(v, e) / vn2;
        for (int i = 0; i < d; ++i) e[i] -= f * v[i];
        basis.push_back(std::move(e));
    }
    return basis;
}

double width_about_axis(const std::vector<Vec>& pts, const Vec& u, Vec* center_out) {
    std::vector<Vec> basis = orthogonal_basis(u);
    const size_t m = basis.size();
    std::vector<Vec> proj(pts.size(), Vec(m, 0.0));
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = 0; j < m; ++j) proj[i][j] = dot(pts[i], basis[j]);
    Ball mb = min_enclosing_ball(proj);
    if (center_out) {
        Vec c(u.size(), 0.0);
        for (size_t j = 0; j < m; ++j)
            for (size_t i = 0; i < u.size(); ++i) c[i] += mb.center[j] * basis[j][i];
        *center_out = c;
    }
    return mb.radius;
}

WidthResult min_width_line_grid(const std::vector<Vec>& points, int dirs, double tau) {
    const int d = static_cast<int>(points[0].size());
    std::vector<Vec> cand = sphere_directions(d, dirs);
    Vec best_u;
    double best_w = std::numeric_limits<double>::infinity();
    for (const Vec& u : cand) {
        const double w = width_about_axis(points, u, nullptr);
        if (w < best_w) {
            best_w = w;
            best_u = u;
        }
    }
    // Pattern-search refinement: perturb the axis along coordinate directions
    // with a shrinking step until the relative improvement is below tau/10.
    double step = 2.0 / std::sqrt(static_cast<double>(dirs));
    while (step > tau * 1e-2) {
        bool improved = false;
        for (int k = 0; k < d; ++k) {
            for (double sgn : {1.0, -1.0}) {
                Vec u = best_u;
                u[k] += sgn * step;
                u = normalized(u);
                const double w = width_about_axis(points, u, nullptr);
                if (w < best_w * (1.0 - 1e-12)) {
                    best_w = w;
                    best_u = u;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    Vec center;
    best_w = width_about_axis(points, best_u, &center);
    WidthResult r;
    r.line = Line(center, best_u);
    r.sup_dist = best_w;
    return r;
}

}  // namespace

Ball min_enclosing_ball(const std::vector<Vec>& points) {
    if (points.empty()) throw Error("beta", "minimum enclosing ball of empty set");
    const int dim = static_cast<int>(points[0].size());
    std::vector<size_t> order(points.size());
    for (size_t i = 0; i < points.size(); ++i) order[i] = i;
    std::vector<Vec> sup;
    Ball b = welzl(points, order, points.size(), sup, dim);
    // Guard: enforce containment against accumulated FP error.
    double r = b.radius;
    for (const Vec& p : points) r = std::max(r, dist(b.center, p));
    b.radius = r;
    return b;
}

std::vector<Vec> sphere_directions(int dim, int n) {
    std::vector<Vec> out;
    out.reserve(n);
    if (dim == 2) {
        for (int i = 0; i < n; ++i) {
            const double a = M_PI * i / n;  // half circle: lines are unsigned
            out.push_back({std::cos(a), std::sin(a)});
        }
        return out;
    }
    if (dim == 3) {
        // Fibonacci spiral on the upper hemisphere.
        const double ga = M_PI * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            const double z = (i + 0.5) / n;  // (0,1]
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            out.push_back({r * std::cos(ga * i), r * std::sin(ga * i), z});
        }
        return out;
    }
    std::mt19937_64 rng(0x5bd1e995u);  // fixed seed: the grid is part of the spec'd method
    std::normal_distribution<double> g(0.0, 1.0);
    while (static_cast<int>(out.size()) < n) {
        Vec u(dim);
        for (double& x : u) x = g(rng);
        const double nn = norm(u);
        if (nn < 1e-9) continue;
        for (double& x : u) x /= nn;
        out.push_back(std::move(u));
    }
    return out;
}

WidthResult min_width_line(const std::vector<Vec>& points, int dirs, double tau) {
    if (points.empty()) throw Error("beta", "min_width_line of empty set");
    const int d = static_cast<int>(points[0].size());
    if (points.size() == 1) {
        Vec dir(d, 0.0);
        dir[0] = 1.0;
        return WidthResult{Line(points[0], dir), 0.0};
    }
    if (points.size() == 2) {
        Vec delta = sub(points[1], points[0]);
        Vec dir(d, 0.0);
        if (norm(delta) > 0)
            dir = normalized(delta);
        else
            dir[0] = 1.0;
        return WidthResult{Line(points[0], dir), 0.0};
    }
    if (d == 2) return min_width_line_2d(points);
    return min_width_line_grid(points, dirs, tau);
}

double beta_number(const Ball& B, const std::vector<Vec>& K, int dirs, double tau) {
    if (B.radius <= 0.0) return 0.0;
    std::vector<Vec> inside;
    const double tol = kStrictTol * (B.radius + 1.0);
    for (const Vec& p : K)
        if (dist(B.center, p) <= B.radius + tol) inside.push_back(p);
    if (inside.size() <= 2) return 0.0;
    const double w = min_width_line(inside, dirs, tau).sup_dist;
    return std::min(w / B.diameter(), 0.5);
}

}  // namespace qcx
