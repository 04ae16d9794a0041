#include "qcx/geometry.hpp"

#include <algorithm>
#include <limits>

namespace qcx {

double point_segment_dist(VecView p, VecView a, VecView b) {
    const size_t d = p.size();
    double ab2 = 0.0, apab = 0.0;
    for (size_t i = 0; i < d; ++i) {
        const double e = b[i] - a[i];
        ab2 += e * e;
        apab += (p[i] - a[i]) * e;
    }
    double t = ab2 > 0.0 ? apab / ab2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double s = 0.0;
    for (size_t i = 0; i < d; ++i) {
        const double r = p[i] - (a[i] + t * (b[i] - a[i]));
        s += r * r;
    }
    return std::sqrt(s);
}

double segment_segment_dist(VecView a, VecView b, VecView c, VecView d) {
    // Iterative refinement over the two segment parameters. Each step solves
    // one parameter exactly with the other fixed; converges for convex
    // distance and is symmetric enough for audit use.
    auto point_on = [](VecView u, VecView v, double t, Vec& out) {
        out.resize(u.size());
        for (size_t i = 0; i < u.size(); ++i) out[i] = u[i] + t * (v[i] - u[i]);
    };
    auto closest_t = [](VecView p, VecView u, VecView v) {
        double uv2 = 0.0, pu = 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            const double e = v[i] - u[i];
            uv2 += e * e;
            pu += (p[i] - u[i]) * e;
        }
        return uv2 > 0.0 ? std::clamp(pu / uv2, 0.0, 1.0) : 0.0;
    };
    double s = 0.5, t = 0.5;
    Vec ps, qt;
    for (int it = 0; it < 64; ++it) {
        point_on(c, d, t, qt);
        const double s2 = closest_t(qt, a, b);
        point_on(a, b, s2, ps);
        const double t2 = closest_t(ps, c, d);
        if (std::abs(s2 - s) < 1e-14 && std::abs(t2 - t) < 1e-14) {
            s = s2;
            t = t2;
            break;
        }
        s = s2;
        t = t2;
    }
    point_on(a, b, s, ps);
    point_on(c, d, t, qt);
    double best = dist(ps, qt);
    // Endpoint cases guard against alternation stalls.
    best = std::min(best, point_segment_dist(a, c, d));
    best = std::min(best, point_segment_dist(b, c, d));
    best = std::min(best, point_segment_dist(c, a, b));
    best = std::min(best, point_segment_dist(d, a, b));
    return best;
}

double PolyCurve::min_edge_length() const {
    double m = std::numeric_limits<double>::infinity();
    for (size_t e = 0; e < edges.size(); ++e) m = std::min(m, edge_length(e));
    return m;
}

double PolyCurve::diameter() const {
    const size_t n = vertex_count();
    double best = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) best = std::max(best, dist(vertex(i), vertex(j)));
    return best;
}

bool PolyCurve::is_connected() const {
    const size_t n = vertex_count();
    if (n == 0) return false;
    std::vector<int> parent(n);
    for (size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    std::vector<int>* pp = &parent;
    auto find = [pp](int a) {
        while ((*pp)[a] != a) {
            (*pp)[a] = (*pp)[(*pp)[a]];
            a = (*pp)[a];
        }
        return a;
    };
    for (const auto& e : edges) {
        int ra = find(e[0]), rb = find(e[1]);
        if (ra != rb) parent[ra] = rb;
    }
    const int r0 = find(0);
    for (size_t i = 1; i < n; ++i)
        if (find(static_cast<int>(i)) != r0) return false;
    return true;
}

void PolyCurve::validate() const {
    if (dim < 2) throw Error("input", "ambient dimension must be >= 2");
    if (vertex_count() == 0) throw Error("input", "empty curve");
    for (double x : vx)
        if (!std::isfinite(x)) throw Error("input", "non-finite coordinate");
    for (const auto& e : edges) {
        if (e[0] < 0 || e[1] < 0 || static_cast<size_t>(e[0]) >= vertex_count() ||
            static_cast<size_t>(e[1]) >= vertex_count())
            throw Error("input", "edge index out of range");
    }
    if (!is_connected()) throw Error("input", "curve is not connected");
    if (!(length() > 0.0)) throw Error("input", "curve has zero length");
}

double dist_point_to_curve(VecView p, const PolyCurve& curve) {
    if (curve.edges.empty()) throw Error("geometry", "distance to empty curve");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : curve.edges)
        best = std::min(best, point_segment_dist(p, curve.vertex(e[0]), curve.vertex(e[1])));
    return best;
}

bool in_R_rho(VecView p, VecView x, VecView y, double rho) {
    const double r = dist(x, y);
    if (r <= 0.0) throw Error("geometry", "degenerate pair");
    if (rho < 0.0) throw Error("geometry", "negative rho");
    Vec mid = midpoint(x, y);
    return strictly_less(dist(p, mid), 0.5 * (1.0 + rho) * r, r);
}

bool in_S_lambda(VecView p, VecView x, VecView y, double lambda) {
    const double r = dist(x, y);
    if (r <= 0.0) throw Error("geometry", "degenerate pair");
    if (lambda < 0.0 || lambda >= 1.0) throw Error("geometry", "lambda out of range");
    const double rr = (1.0 - lambda) * r;
    return strictly_less(dist(p, x), rr, r) && strictly_less(dist(p, y), rr, r);
}

uint64_t GridIndex::mix(uint64_t h, int64_t v) {
    uint64_t x = static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return h * 0x100000001b3ULL ^ x;
}

uint64_t GridIndex::cell_hash(VecView p) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < p.size(); ++i)
        h = mix(h, static_cast<int64_t>(std::floor(p[i] / cell)));
    return h;
}

void GridIndex::attach(const PointSet& ps, double cell_size) {
    dim = ps.dim;
    cell = cell_size;
    pts = &ps;
    buckets.clear();
}

void GridIndex::build(const PointSet& ps, double cell_size) {
    attach(ps, cell_size);
    buckets.reserve(ps.size());
    for (size_t i = 0; i < ps.size(); ++i)
        buckets[cell_hash(ps[i])].push_back(static_cast<int32_t>(i));
}

void GridIndex::insert(int32_t idx) {
    buckets[cell_hash((*pts)[idx])].push_back(idx);
}

namespace {

template <typename Fn>
void for_each_cell(int dim, double cell, VecView c, double r,
                   uint64_t (*hash1)(uint64_t, int64_t), Fn&& fn) {
    std::vector<int64_t> lo(dim), hi(dim), cur(dim);
    for (int i = 0; i < dim; ++i) {
        lo[i] = static_cast<int64_t>(std::floor((c[i] - r) / cell));
        hi[i] = static_cast<int64_t>(std::floor((c[i] + r) / cell));
        cur[i] = lo[i];
    }
    while (true) {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (int i = 0; i < dim; ++i) h = hash1(h, cur[i]);
        if (fn(h)) return;
        int i = 0;
        for (; i < dim; ++i) {
            if (++cur[i] <= hi[i]) break;
            cur[i] = lo[i];
        }
        if (i == dim) break;
    }
}

}  // namespace

void GridIndex::query_ball(VecView c, double r, std::vector<int32_t>& out) const {
    if (!pts || buckets.empty()) return;
    const double r2 = r * r;
    for_each_cell(dim, cell, c, r, &GridIndex::mix, [&](uint64_t h) {
        auto it = buckets.find(h);
        if (it != buckets.end()) {
            for (int32_t idx : it->second)
                if (dist2((*pts)[idx], c) <= r2) out.push_back(idx);
        }
        return false;
    });
}

bool GridIndex::any_within(VecView c, double r) const {
    if (!pts || buckets.empty()) return false;
    const double r2 = r * r;
    bool found = false;
    for_each_cell(dim, cell, c, r, &GridIndex::mix, [&](uint64_t h) {
        auto it = buckets.find(h);
        if (it != buckets.end()) {
            for (int32_t idx : it->second)
                if (dist2((*pts)[idx], c) <= r2) {
                    found = true;
                    return true;
                }
        }
        return false;
    });
    return found;
}

}  // namespace qcx
