#include "qcx/beta_engine.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace qcx {

namespace {
int64_t key_bits(double M) {
    int64_t k;
    static_assert(sizeof(double) == sizeof(int64_t));
    std::memcpy(&k, &M, sizeof(k));
    return k;
}
}  // namespace

std::vector<Vec> BetaEngine::samples_in_ball(const Ball& B) const {
    std::vector<int32_t> idx;
    samp_->grid.query_ball(B.center, B.radius * (1.0 + kStrictTol) + samp_->pitch * 1e-6, idx);
    std::sort(idx.begin(), idx.end());
    std::vector<Vec> out;
    out.reserve(idx.size());
    for (int32_t i : idx) out.push_back(samp_->pts.get(i));
    return out;
}

double BetaEngine::beta_ball(const Ball& B) const {
    if (B.radius <= 0.0) return 0.0;
    return beta_number(B, samples_in_ball(B), cfg_.beta_dirs, cfg_.tau_beta);
}

double BetaEngine::beta_net_ball(int k, int32_t pt, double M) const {
    const auto key = std::make_tuple(k, pt, key_bits(M));
    auto it = ball_cache_.find(key);
    if (it != ball_cache_.end()) return it->second;
    Ball B(nets_->level(k).pts.get(pt), std::ldexp(1.0, -k));
    const double v = beta_ball(B.dilated(M));
    ball_cache_[key] = v;
    return v;
}

double BetaEngine::beta_cube(int32_t node, double M) const {
    if (!tree_) throw Error("beta", "cube tree not attached");
    const auto key = std::make_pair(node, key_bits(M));
    auto it = cube_cache_.find(key);
    if (it != cube_cache_.end()) return it->second;
    const CubeTree& t = *tree_;
    const auto& n = t.nodes[node];
    const double budget = M * n.diam;
    // Clip to the enclosing ball, then settle the shell by the exact
    // distance-to-region test.
    Ball clip(Vec(t.center(node).begin(), t.center(node).end()),
              n.outer_radius + budget);
    std::vector<int32_t> idx;
    samp_->grid.query_ball(clip.center, clip.radius + samp_->pitch * 1e-6, idx);
    std::sort(idx.begin(), idx.end());
    std::vector<Vec> pts;
    pts.reserve(idx.size());
    const double quick = t.ball_radius(n.level) + budget;
    for (int32_t i : idx) {
        VecView p = samp_->pts[i];
        const double dc = dist(t.center(node), p);
        if (dc <= quick || t.dist_to_cube(node, p) <= budget) pts.push_back(samp_->pts.get(i));
    }
    double v = 0.0;
    if (pts.size() > 2) {
        const double region_diam = n.diam * (1.0 + 2.0 * M);
        if (region_diam > 0.0) {
            const double w = min_width_line(pts, cfg_.beta_dirs, cfg_.tau_beta).sup_dist;
            v = std::min(w / region_diam, 0.5);
        }
    }
    cube_cache_[key] = v;
    return v;
}

TstFunctional compute_beta_sum(const BetaEngine& engine, double M) {
    const DeltaNets& nets = engine.nets();
    TstFunctional f;
    f.M = M;
    // Diameter of the sampled curve, exact over net level k_max (the diameter
    // of a polyline is attained at vertices, which the sampling contains).
    const CurveSampling& samp = engine.sampling();
    f.diameter_term = samp.curve->diameter();
    f.level_sums.resize(nets.k_max + 1, 0.0);
    for (int k = 0; k <= nets.k_max; ++k) {
        const auto& lvl = nets.level(k);
        const double ball_diam = 2.0 * std::ldexp(1.0, -k);
        double s = 0.0;
        for (size_t i = 0; i < lvl.pts.size(); ++i) {
            const double b = engine.beta_net_ball(k, static_cast<int32_t>(i), M);
            s += b * b * ball_diam;
        }
        f.level_sums[k] = s;
    }
    f.total = f.diameter_term;
    for (double s : f.level_sums) f.total += s;
    return f;
}

FlatnessProbe flatness_probe(const BetaEngine& engine, const Ball& B) {
    const CurveSampling& samp = engine.sampling();
    std::vector<int32_t> idx;
    samp.grid.query_ball(B.center, B.radius, idx);
    std::sort(idx.begin(), idx.end());
    FlatnessProbe probe;
    if (idx.empty()) return probe;

    // Components of curve∩B: samples are adjacent when consecutive on one
    // edge or within a small multiple of the pitch (edge junctions).
    std::vector<int32_t> parent(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) parent[i] = static_cast<int32_t>(i);
    auto find = [&](int32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    auto unite = [&](int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[a] = b;
    };
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = i + 1; j < idx.size(); ++j) {
            if (dist(samp.pts[idx[i]], samp.pts[idx[j]]) <= 2.5 * samp.pitch)
                unite(static_cast<int32_t>(i), static_cast<int32_t>(j));
        }
    // Largest component diameter.
    double best_diam = 0.0;
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = i; j < idx.size(); ++j)
            if (find(static_cast<int32_t>(i)) == find(static_cast<int32_t>(j)))
                best_diam = std::max(best_diam, dist(samp.pts[idx[i]], samp.pts[idx[j]]));
    probe.component_diameter_fraction = best_diam / B.diameter();

    // Two-sided Hausdorff gap between curve∩B and L∩B for the best line.
    std::vector<Vec> pts;
    pts.reserve(idx.size());
    for (int32_t i : idx) pts.push_back(samp.pts.get(i));
    const auto wr = min_width_line(pts, engine.config().beta_dirs, engine.config().tau_beta);
    // Chord of the line inside the ball.
    Vec co = sub(B.center, wr.line.anchor);
    const double t0 = dot(co, wr.line.direction);
    const double h2 = dist2(B.center, add(wr.line.anchor, scaled(wr.line.direction, t0)));
    const double half = std::sqrt(std::max(0.0, B.radius * B.radius - h2));
    Vec ca = add(wr.line.anchor, scaled(wr.line.direction, t0 - half));
    Vec cb = add(wr.line.anchor, scaled(wr.line.direction, t0 + half));
    double h_curve_to_line = 0.0;
    for (const Vec& p : pts)
        h_curve_to_line = std::max(h_curve_to_line, point_segment_dist(p, ca, cb));
    double h_line_to_curve = 0.0;
    const int n_chord = 64;
    for (int i = 0; i <= n_chord; ++i) {
        Vec q = lerp(ca, cb, static_cast<double>(i) / n_chord);
        double best = std::numeric_limits<double>::infinity();
        for (const Vec& p : pts) best = std::min(best, dist(p, q));
        h_line_to_curve = std::max(h_line_to_curve, best);
    }
    probe.hausdorff_line_gap = std::max(h_curve_to_line, h_line_to_curve);
    return probe;
}

}  // namespace qcx
