#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qcx {

using Vec = std::vector<double>;
using VecView = std::span<const double>;

/// Error with a pipeline stage tag, so the CLI can report which stage failed.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& msg)
        : std::runtime_error(stage + ": " + msg), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// Strict inequalities are evaluated with a relative tolerance so that points
// sitting exactly on a region boundary do not flap between runs.
inline constexpr double kStrictTol = 1e-12;

inline bool strictly_less(double a, double b, double scale) {
    return a < b - kStrictTol * scale;
}

inline double dot(VecView a, VecView b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double dist2(VecView a, VecView b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(VecView a, VecView b) { return std::sqrt(dist2(a, b)); }
inline double norm(VecView a) { return std::sqrt(dot(a, a)); }

inline Vec sub(VecView a, VecView b) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(VecView a, VecView b) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scaled(VecView a, double s) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
    return r;
}

/// a + t*(b-a)
inline Vec lerp(VecView a, VecView b, double t) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + t * (b[i] - a[i]);
    return r;
}

inline Vec midpoint(VecView a, VecView b) { return lerp(a, b, 0.5); }

inline Vec normalized(VecView a) {
    const double n = norm(a);
    if (n == 0.0) throw Error("geometry", "cannot normalize zero vector");
    return scaled(a, 1.0 / n);
}

/// Lexicographic comparison, used for deterministic tie-breaking.
inline bool lex_less(VecView a, VecView b) {
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

/// Flat storage for a set of points of equal dimension.
struct PointSet {
    int dim = 0;
    std::vector<double> xs;

    PointSet() = default;
    explicit PointSet(int d) : dim(d) {}

    size_t size() const { return dim == 0 ? 0 : xs.size() / dim; }
    VecView operator[](size_t i) const { return VecView(xs.data() + i * dim, dim); }
    Vec get(size_t i) const {
        VecView v = (*this)[i];
        return Vec(v.begin(), v.end());
    }
    void push(VecView p) { xs.insert(xs.end(), p.begin(), p.end()); }
};

/// Closed ball; |B| denotes its diameter. dilated(M) keeps the center and
/// multiplies the diameter by M.
struct Ball {
    Vec center;
    double radius = 0.0;

    Ball() = default;
    Ball(Vec c, double r) : center(std::move(c)), radius(r) {
        if (!(radius >= 0.0)) throw Error("geometry", "negative ball radius");
    }
    double diameter() const { return 2.0 * radius; }
    Ball dilated(double M) const { return Ball(center, radius * M); }
    bool contains(VecView p, double tol = 0.0) const {
        return dist(center, p) <= radius + tol;
    }
};

struct Segment {
    Vec a, b;
    double length() const { return dist(a, b); }
};

/// Line through `anchor` with unit `direction` (|direction| = 1 within 1e-12).
struct Line {
    Vec anchor;
    Vec direction;

    Line() = default;
    Line(Vec a, Vec d) : anchor(std::move(a)), direction(std::move(d)) {
        const double n = norm(direction);
        if (std::abs(n - 1.0) > 1e-12) {
            if (n == 0.0) throw Error("geometry", "line with zero direction");
            for (double& x : direction) x /= n;
        }
    }
};

inline double dist_point_to_line(VecView p, const Line& L) {
    Vec w = sub(p, L.anchor);
    const double t = dot(w, L.direction);
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        const double r = w[i] - t * L.direction[i];
        s += r * r;
    }
    return std::sqrt(s);
}

/// Distance from p to the closed segment [a,b].
double point_segment_dist(VecView p, VecView a, VecView b);

/// Distance between two closed segments.
double segment_segment_dist(VecView a, VecView b, VecView c, VecView d);

/// Open polygonal path given by an ordered vertex list (>= 2 vertices).
struct PolyPath {
    std::vector<Vec> vertices;

    double length() const {
        double s = 0.0;
        for (size_t i = 0; i + 1 < vertices.size(); ++i) s += dist(vertices[i], vertices[i + 1]);
        return s;
    }
    size_t edge_count() const { return vertices.empty() ? 0 : vertices.size() - 1; }
};

/// A connected polygonal complex: vertices plus index-pair edges. H^1 length is
/// the sum of edge lengths; the diameter is taken over vertices.
struct PolyCurve {
    int dim = 0;
    std::vector<double> vx;
    std::vector<std::array<int, 2>> edges;

    size_t vertex_count() const { return dim == 0 ? 0 : vx.size() / dim; }
    VecView vertex(size_t i) const { return VecView(vx.data() + i * dim, dim); }
    Vec vertex_vec(size_t i) const {
        VecView v = vertex(i);
        return Vec(v.begin(), v.end());
    }

    double edge_length(size_t e) const {
        return dist(vertex(edges[e][0]), vertex(edges[e][1]));
    }
    double length() const {
        double s = 0.0;
        for (size_t e = 0; e < edges.size(); ++e) s += edge_length(e);
        return s;
    }
    double min_edge_length() const;
    double diameter() const;
    bool is_connected() const;
    void validate() const;  // throws Error on empty/disconnected/non-finite input
};

/// Exact min over all edges of the point-to-segment distance.
double dist_point_to_curve(VecView p, const PolyCurve& curve);

/// R_rho(x,y): ball about the midpoint of [x,y] with radius (1+rho)/2*|x-y|.
/// Membership is strict; x=y is rejected.
bool in_R_rho(VecView p, VecView x, VecView y, double rho);

/// S_lambda(x,y): intersection of the two balls B(x,(1-lambda)|x-y|) and
/// B(y,(1-lambda)|x-y|). Membership is strict.
bool in_S_lambda(VecView p, VecView x, VecView y, double lambda);

/// Uniform hash grid over a PointSet for range queries. Collisions in the cell
/// hash only ever add candidates; queries filter by exact distance. Supports
/// incremental insertion for greedy net construction.
struct GridIndex {
    int dim = 0;
    double cell = 1.0;
    const PointSet* pts = nullptr;
    std::unordered_map<uint64_t, std::vector<int32_t>> buckets;

    void attach(const PointSet& ps, double cell_size);
    void build(const PointSet& ps, double cell_size);
    void insert(int32_t idx);
    /// Append to `out` the indices of all points within `r` of `c` (closed).
    void query_ball(VecView c, double r, std::vector<int32_t>& out) const;
    /// True if some stored point lies within `r` of `c`.
    bool any_within(VecView c, double r) const;
    bool built() const { return pts != nullptr; }

    uint64_t cell_hash(VecView p) const;
    static uint64_t mix(uint64_t h, int64_t v);
};

}  // namespace qcx
