#include "qcx/sampling.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace qcx {

void CurveSampling::build(const PolyCurve& c, double pitch_) {
    curve = &c;
    pitch = pitch_;
    pts = PointSet(c.dim);
    edge_id.clear();
    edge_t.clear();
    for (size_t e = 0; e < c.edges.size(); ++e) {
        VecView a = c.vertex(c.edges[e][0]);
        VecView b = c.vertex(c.edges[e][1]);
        const double len = dist(a, b);
        const int n = std::max(1, static_cast<int>(std::ceil(len / pitch)));
        // Include both endpoints; duplicates at shared vertices are harmless.
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            Vec p = lerp(a, b, t);
            pts.push(p);
            edge_id.push_back(static_cast<int32_t>(e));
            edge_t.push_back(t);
        }
    }
    grid.build(pts, 4.0 * pitch);
}

void CurveDist::attach(const CurveSampling& s) {
    samp_ = &s;
    // With few edges the brute scan beats grid bookkeeping and is exact by
    // definition; with many edges use the sample grid to localize.
    brute_ = s.curve->edges.size() <= 24;
}

double CurveDist::exact_from_radius(VecView p, double r) const {
    // All edges within distance r of p carry a sample within r + pitch/2, so
    // scanning samples in that ball and refining against their edges is exact.
    std::vector<int32_t> idx;
    samp_->grid.query_ball(p, r + samp_->pitch, idx);
    double best = std::numeric_limits<double>::infinity();
    std::set<int32_t> seen;
    const PolyCurve& c = *samp_->curve;
    for (int32_t i : idx) {
        const int32_t e = samp_->edge_id[i];
        if (!seen.insert(e).second) continue;
        best = std::min(best, point_segment_dist(p, c.vertex(c.edges[e][0]),
                                                 c.vertex(c.edges[e][1])));
    }
    return best;
}

double CurveDist::operator()(VecView p, double upper_hint) const {
    const PolyCurve& c = *samp_->curve;
    if (brute_) return dist_point_to_curve(p, c);
    // Find an upper bound via expanding grid search over samples.
    double ub = upper_hint;
    if (!(ub > 0.0)) {
        double r = samp_->grid.cell;
        std::vector<int32_t> idx;
        for (int it = 0; it < 24; ++it) {
            idx.clear();
            samp_->grid.query_ball(p, r, idx);
            if (!idx.empty()) {
                double best = std::numeric_limits<double>::infinity();
                for (int32_t i : idx) best = std::min(best, dist(samp_->pts[i], p));
                ub = best;
                break;
            }
            r *= 2.0;
        }
        if (!(ub > 0.0) || r > 64.0 * samp_->grid.cell * (1 << 10))
            return dist_point_to_curve(p, c);
    } else {
        // Tighten the hint to the true nearest-sample distance if cheap.
        std::vector<int32_t> idx;
        samp_->grid.query_ball(p, ub + samp_->pitch, idx);
        if (idx.empty()) return dist_point_to_curve(p, c);
        double best = std::numeric_limits<double>::infinity();
        for (int32_t i : idx) best = std::min(best, dist(samp_->pts[i], p));
        ub = best;
    }
    const double ratio = ub / samp_->grid.cell;
    if (ratio > 48.0) return dist_point_to_curve(p, c);
    return exact_from_radius(p, ub);
}

bool cone_inequality(VecView z, VecView xi, double alpha, const CurveDist& dist_fn) {
    const double lhs = dist(z, xi);
    if (lhs == 0.0) return false;  // strict inequality fails at the apex
    return strictly_less(lhs, alpha * dist_fn(z), lhs);
}

bool segment_in_cone(VecView z, VecView target, VecView xi, const CurveDist& dist_fn,
                     const ConeOptions& opt) {
    const double len = dist(z, target);
    if (len == 0.0) return false;
    for (int i = 0; i <= opt.samples; ++i) {
        const double t = static_cast<double>(i) / opt.samples;
        Vec p = lerp(z, target, t);
        if (dist(p, xi) <= opt.arrival_tol) continue;  // inside the arrival disc
        if (!cone_inequality(p, xi, opt.alpha, dist_fn)) return false;
    }
    return true;
}

bool in_cone(VecView z, VecView xi, double alpha, const PolyCurve& curve,
             const CurveDist& dist_fn, const ConeOptions& opt_in) {
    ConeOptions opt = opt_in;
    opt.alpha = alpha;
    if (dist_fn(Vec(xi.begin(), xi.end())) > 1e-9 * (1.0 + norm(xi)))
        throw Error("geometry", "cone apex is not on the curve");
    if (dist(z, xi) <= opt.arrival_tol) return false;
    if (!cone_inequality(z, xi, alpha, dist_fn)) return false;

    // Descend toward the curve point nearest xi, offset outward (toward z)
    // by the arrival tolerance so the strict inequality can hold throughout.
    Vec target(xi.begin(), xi.end());
    Vec toward = sub(z, xi);
    const double tn = norm(toward);
    if (tn > 0) {
        for (size_t i = 0; i < target.size(); ++i)
            target[i] += toward[i] / tn * opt.arrival_tol * 0.5;
    }
    if (segment_in_cone(z, target, xi, dist_fn, opt)) return true;

    // Single detour through the best-clearance midpoint candidate.
    Vec mid = midpoint(z, target);
    const double span = dist(z, target);
    Vec axis = normalized(sub(target, Vec(z.begin(), z.end())));
    Vec best_m;
    double best_clear = -1.0;
    const int d = static_cast<int>(z.size());
    for (int k = 0; k < d; ++k) {
        Vec perp(d, 0.0);
        perp[k] = 1.0;
        const double along = dot(perp, axis);
        for (int i = 0; i < d; ++i) perp[i] -= along * axis[i];
        const double pn = norm(perp);
        if (pn < 1e-9) continue;
        for (double s : {-1.0, -0.5, 0.5, 1.0}) {
            Vec m = mid;
            for (int i = 0; i < d; ++i) m[i] += s * span * 0.5 * perp[i] / pn;
            const double c = dist_fn(m);
            if (c > best_clear) {
                best_clear = c;
                best_m = m;
            }
        }
    }
    if (best_clear <= 0.0) return false;
    return segment_in_cone(z, best_m, xi, dist_fn, opt) &&
           segment_in_cone(best_m, target, xi, dist_fn, opt);
}

}  // namespace qcx
