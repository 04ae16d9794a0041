#include "qcx/nets.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace qcx {

// ---------------------------------------------------------------------------
// Delta nets
// ---------------------------------------------------------------------------

DeltaNets build_delta_nets(const CurveSampling& samp, int k_max) {
    if (samp.size() == 0) throw Error("nets", "empty curve sampling");
    if (k_max < 1) throw Error("nets", "k_max must be >= 1");
    DeltaNets nets;
    nets.dim = samp.pts.dim;
    nets.k_max = k_max;
    nets.levels.resize(k_max + 1);
    std::vector<int32_t> prev;
    for (int k = 0; k <= k_max; ++k) {
        auto& lvl = nets.levels[k];
        const double sep = nets.separation(k);
        lvl.pts = PointSet(nets.dim);
        lvl.grid.attach(lvl.pts, sep);
        auto try_insert = [&](int32_t sample) {
            VecView p = samp.pts[sample];
            if (lvl.grid.any_within(p, sep * (1.0 - kStrictTol))) return;
            lvl.pts.push(p);
            lvl.sample_idx.push_back(sample);
            lvl.grid.insert(static_cast<int32_t>(lvl.pts.size() - 1));
        };
        // Seed with the previous level (gives the nesting Delta_k ⊆ Delta_{k+1}),
        // then sweep the dense sampling in its fixed order.
        for (int32_t s : prev) try_insert(s);
        for (size_t s = 0; s < samp.size(); ++s) try_insert(static_cast<int32_t>(s));
        prev = lvl.sample_idx;
    }
    if (nets.levels[0].pts.size() != 1)
        throw Error("nets", "level 0 is not a single point; rescale the curve to diameter <= 1");
    return nets;
}

std::vector<int32_t> DeltaNets::points_in_ball(int k, const Ball& B) const {
    std::vector<int32_t> out;
    levels.at(k).grid.query_ball(B.center, B.radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<AuditRow> audit_delta_nets(const DeltaNets& nets, const CurveSampling& samp) {
    std::vector<AuditRow> rows;
    const double tol = 1e-9;
    // Separation: pairwise >= 2^{-k}, checked via grid neighborhoods.
    {
        double worst = std::numeric_limits<double>::infinity();
        bool pass = true;
        std::vector<int32_t> nb;
        for (int k = 0; k <= nets.k_max; ++k) {
            const auto& lvl = nets.levels[k];
            const double sep = nets.separation(k);
            for (size_t i = 0; i < lvl.pts.size(); ++i) {
                nb.clear();
                lvl.grid.query_ball(lvl.pts[i], sep * (1.0 - tol), nb);
                for (int32_t j : nb) {
                    if (static_cast<size_t>(j) == i) continue;
                    pass = false;
                    worst = std::min(worst, dist(lvl.pts[i], lvl.pts[j]) / sep);
                }
            }
        }
        rows.push_back({"delta.separation", pass, pass ? 1.0 : worst, 1.0});
    }
    // Covering: every dense sample within 2^{-k} of the level.
    {
        double worst = 0.0;
        std::vector<int32_t> nb;
        for (int k = 0; k <= nets.k_max; ++k) {
            const auto& lvl = nets.levels[k];
            const double sep = nets.separation(k);
            for (size_t s = 0; s < samp.size(); ++s) {
                nb.clear();
                lvl.grid.query_ball(samp.pts[s], sep * (1.0 + tol), nb);
                if (nb.empty()) {
                    // Outside the cheap radius: measure the true gap.
                    double best = std::numeric_limits<double>::infinity();
                    for (size_t i = 0; i < lvl.pts.size(); ++i)
                        best = std::min(best, dist(lvl.pts[i], samp.pts[s]));
                    worst = std::max(worst, best / sep);
                }
            }
        }
        rows.push_back({"delta.covering", worst <= 1.0 + tol, std::max(worst, 1.0), 1.0});
    }
    // Nesting: level k appears as a prefix of level k+1 (by construction the
    // seeds are inserted first and never rejected).
    {
        bool pass = true;
        for (int k = 0; k + 1 <= nets.k_max && pass; ++k) {
            const auto& a = nets.levels[k].sample_idx;
            const auto& b = nets.levels[k + 1].sample_idx;
            if (a.size() > b.size()) pass = false;
            for (size_t i = 0; pass && i < a.size(); ++i)
                if (a[i] != b[i]) pass = false;
        }
        rows.push_back({"delta.nesting", pass, pass ? 1.0 : 0.0, 1.0});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Whitney net
// ---------------------------------------------------------------------------

int feasible_k0(int requested) {
    int k0 = std::max(requested, 2);
    // The locality ball B(x, 10*2^{-k-k0}) around x in annulus k must stay
    // within the annuli k-1..k+1, i.e. 2^{-k-1} - 10*2^{-k-k0} >= 2^{-k-2}.
    while (0.5 - 10.0 * std::ldexp(1.0, -k0) < 0.25) ++k0;
    return k0;
}

namespace {

// Orthonormal basis of the subspace orthogonal to dir (Householder).
std::vector<Vec> normal_basis(const Vec& dir) {
    const int d = static_cast<int>(dir.size());
    Vec v = dir;
    v[0] += (dir[0] >= 0 ? 1.0 : -1.0) * norm(dir);
    const double vn2 = dot(v, v);
    std::vector<Vec> basis;
    for (int k = 1; k < d; ++k) {
        Vec e(d, 0.0);
        e[k] = 1.0;
        const double f = 2.0 * dot(v, e) / vn2;
        for (int i = 0; i < d; ++i) e[i] -= f * v[i];
        basis.push_back(normalized(e));
    }
    return basis;
}

// Random point at distance roughly `mag` from the curve: either offset from a
// random edge point along a random normal, or radially from a random vertex
// (covers endpoint caps and corner wedges). The caller verifies the exact
// distance and rejects off-annulus draws.
template <typename Rng>
Vec random_near_curve_point(const PolyCurve& curve, const std::vector<double>& cum_len,
                            double inner, double outer, Rng& rng, bool* ok) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    *ok = false;
    const double mag = inner + uni(rng) * (outer - inner);
    const int dim = curve.dim;
    if (uni(rng) < 0.3) {
        const size_t vi = std::min(curve.vertex_count() - 1,
                                   static_cast<size_t>(uni(rng) * curve.vertex_count()));
        Vec dir(dim);
        for (double& x : dir) x = g(rng);
        const double n = norm(dir);
        if (n == 0.0) return Vec(dim, 0.0);
        Vec c(curve.vertex(vi).begin(), curve.vertex(vi).end());
        for (int j = 0; j < dim; ++j) c[j] += dir[j] / n * mag;
        *ok = true;
        return c;
    }
    const double pick = uni(rng) * cum_len.back();
    const size_t e = std::lower_bound(cum_len.begin(), cum_len.end(), pick) - cum_len.begin();
    Vec pa = curve.vertex_vec(curve.edges[e][0]);
    Vec pb = curve.vertex_vec(curve.edges[e][1]);
    Vec base = lerp(pa, pb, uni(rng));
    Vec dirv = sub(pb, pa);
    if (norm(dirv) == 0.0) return Vec(dim, 0.0);
    Vec u = normalized(dirv);
    Vec o(dim);
    for (double& x : o) x = g(rng);
    const double along = dot(o, u);
    for (int j = 0; j < dim; ++j) o[j] -= along * u[j];
    const double on = norm(o);
    if (on == 0.0) return Vec(dim, 0.0);
    for (int j = 0; j < dim; ++j) base[j] += o[j] / on * mag;
    *ok = true;
    return base;
}

// Lattice offsets o (in the normal space) with |o| in [lo, hi], pitch h.
std::vector<std::pair<Vec, double>> band_offsets(const std::vector<Vec>& basis, double h,
                                                 double lo, double hi) {
    const size_t m = basis.size();
    const int dim = static_cast<int>(basis[0].size());
    const int64_t span = static_cast<int64_t>(std::ceil(hi / h));
    std::vector<int64_t> cur(m, -span);
    std::vector<std::pair<Vec, double>> out;
    while (true) {
        double r2 = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const double c = cur[i] * h;
            r2 += c * c;
        }
        const double r = std::sqrt(r2);
        if (r >= lo && r <= hi) {
            Vec o(dim, 0.0);
            for (size_t i = 0; i < m; ++i)
                for (int j = 0; j < dim; ++j) o[j] += cur[i] * h * basis[i][j];
            out.emplace_back(std::move(o), r);
        }
        size_t i = 0;
        for (; i < m; ++i) {
            if (++cur[i] <= span) break;
            cur[i] = -span;
        }
        if (i == m) break;
    }
    return out;
}

}  // namespace

WhitneyNet build_whitney_net(const PolyCurve& curve, const CurveSampling& samp,
                             const CurveDist& dist_fn, int k0, int k_max,
                             double bbox_pad) {
    WhitneyNet net;
    net.dim = curve.dim;
    net.k0 = feasible_k0(k0);
    net.k_max = k_max;
    net.levels.resize(k_max + 1);

    Vec bb_lo(curve.dim, std::numeric_limits<double>::infinity());
    Vec bb_hi(curve.dim, -std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < curve.vertex_count(); ++i) {
        VecView v = curve.vertex(i);
        for (int j = 0; j < curve.dim; ++j) {
            bb_lo[j] = std::min(bb_lo[j], v[j] - bbox_pad);
            bb_hi[j] = std::max(bb_hi[j], v[j] + bbox_pad);
        }
    }
    auto in_box = [&](VecView p) {
        for (int j = 0; j < curve.dim; ++j)
            if (p[j] < bb_lo[j] || p[j] > bb_hi[j]) return false;
        return true;
    };

    const GridIndex* prev_grid = nullptr;
    for (int k = 0; k <= k_max; ++k) {
        auto& lvl = net.levels[k];
        const double u = net.unit(k);
        const double s = net.spacing_factor * u;
        const double h = 0.5 * s;
        const double inner = net.inner(k);
        const double outer = net.outer(k);
        lvl.spacing = s;
        lvl.pts = PointSet(net.dim);
        lvl.grid.attach(lvl.pts, s);

        auto blocked = [&](VecView c) {
            if (lvl.grid.any_within(c, s * (1.0 - kStrictTol))) return true;
            if (prev_grid && prev_grid->any_within(c, s * (1.0 - kStrictTol))) return true;
            return false;
        };
        auto try_accept = [&](VecView c, double hint) {
            if (!in_box(c)) return;
            if (blocked(c)) return;
            const double dd = dist_fn(c, hint);
            if (dd < inner * (1.0 + kStrictTol) || dd > outer * (1.0 - kStrictTol)) return;
            lvl.pts.push(c);
            lvl.dist_to_curve.push_back(dd);
            lvl.grid.insert(static_cast<int32_t>(lvl.pts.size() - 1));
        };

        // Candidates: per edge, a normal-offset lattice walked along the edge;
        // per vertex, a full radial fan covering endpoint caps and corner
        // wedges that the edge frames miss.
        for (size_t e = 0; e < curve.edges.size(); ++e) {
            Vec a = curve.vertex_vec(curve.edges[e][0]);
            Vec b = curve.vertex_vec(curve.edges[e][1]);
            Vec d = sub(b, a);
            const double len = norm(d);
            if (len == 0.0) continue;
            Vec dir = scaled(d, 1.0 / len);
            auto offsets = band_offsets(normal_basis(dir), h, inner - 2.0 * h, outer + 2.0 * h);
            const int nt = std::max(1, static_cast<int>(std::ceil(len / h)));
            for (int it = 0; it <= nt; ++it) {
                Vec base = lerp(a, b, static_cast<double>(it) / nt);
                for (const auto& [o, r] : offsets) {
                    Vec c = add(base, o);
                    try_accept(c, r + samp.pitch);
                }
            }
        }
        {
            // Radial fans around curve vertices: full rings covering endpoint
            // caps and corner wedges that the edge frames miss.
            Vec e0(net.dim, 0.0);
            e0[0] = 1.0;
            auto cross = band_offsets(normal_basis(e0), h, 0.0, outer + 2.0 * h);
            // normal_basis(e0) spans only d-1 dims; add the axis dimension by
            // a lattice over the remaining coordinate.
            for (size_t vi = 0; vi < curve.vertex_count(); ++vi) {
                VecView v = curve.vertex(vi);
                const int64_t span = static_cast<int64_t>(std::ceil((outer + 2.0 * h) / h));
                for (int64_t ax = -span; ax <= span; ++ax) {
                    const double x0 = ax * h;
                    for (const auto& [o, r] : cross) {
                        const double rr = std::sqrt(x0 * x0 + r * r);
                        if (rr < inner - 2.0 * h || rr > outer + 2.0 * h) continue;
                        Vec c = add(v, o);
                        c[0] += x0;
                        try_accept(c, rr + samp.pitch);
                    }
                }
            }
        }

        // Covering repair: sample the annulus; where no accepted point is
        // within 3.4u (and no previous-level point blocks), insert the sample.
        {
            std::mt19937_64 rng(0x9e3779b9u ^ (static_cast<uint64_t>(k) << 32) ^ net.k0);
            std::vector<double> cum(curve.edges.size());
            double acc = 0.0;
            for (size_t e = 0; e < curve.edges.size(); ++e) {
                acc += curve.edge_length(e);
                cum[e] = acc;
            }
            const int attempts = 20000;
            for (int a2 = 0; a2 < attempts; ++a2) {
                bool ok = false;
                Vec c = random_near_curve_point(curve, cum, inner, outer, rng, &ok);
                if (!ok || !in_box(c)) continue;
                const double dd = dist_fn(c, outer + samp.pitch);
                if (dd < inner * (1.0 + kStrictTol) || dd > outer * (1.0 - kStrictTol)) continue;
                if (lvl.grid.any_within(c, 3.4 * u)) continue;
                if (prev_grid && prev_grid->any_within(c, s * (1.0 - kStrictTol))) continue;
                lvl.pts.push(c);
                lvl.dist_to_curve.push_back(dd);
                lvl.grid.insert(static_cast<int32_t>(lvl.pts.size() - 1));
            }
        }
        prev_grid = &lvl.grid;
    }
    return net;
}

std::vector<int32_t> WhitneyNet::points_in_ball(int k, const Ball& B) const {
    std::vector<int32_t> out;
    levels.at(k).grid.query_ball(B.center, B.radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<int, int32_t>> WhitneyNet::all_points_in_ball(const Ball& B,
                                                                    double center_dist) const {
    std::vector<std::pair<int, int32_t>> out;
    std::vector<int32_t> buf;
    for (int k = 0; k <= k_max; ++k) {
        // Level k can meet the ball only if its annulus intersects
        // [center_dist - r, center_dist + r].
        if (inner(k) > center_dist + B.radius) continue;
        if (outer(k) < center_dist - B.radius) continue;
        buf.clear();
        levels[k].grid.query_ball(B.center, B.radius, buf);
        std::sort(buf.begin(), buf.end());
        for (int32_t i : buf) out.emplace_back(k, i);
    }
    return out;
}

std::vector<AuditRow> audit_whitney_net(const WhitneyNet& net, const PolyCurve& curve,
                                        const CurveSampling& samp, const CurveDist& dist_fn,
                                        uint64_t seed, int covering_samples) {
    std::vector<AuditRow> rows;
    const double tol = 1e-9;

    // Annulus membership, recomputed.
    {
        bool pass = true;
        double worst = 1.0;
        for (int k = 0; k <= net.k_max; ++k) {
            const auto& lvl = net.levels[k];
            for (size_t i = 0; i < lvl.pts.size(); ++i) {
                const double dd = dist_fn(lvl.pts[i], lvl.dist_to_curve[i] + samp.pitch);
                if (!(dd >= net.inner(k) * (1.0 - tol) && dd < net.outer(k) * (1.0 + tol))) {
                    pass = false;
                    worst = dd / net.outer(k);
                }
            }
        }
        rows.push_back({"whitney.annulus_membership", pass, worst, 1.0});
    }
    // Separation within and across adjacent levels (the construction seeds
    // level k's exclusion set with level k-1).
    {
        bool pass = true;
        double worst = std::numeric_limits<double>::infinity();
        std::vector<int32_t> nb;
        for (int k = 0; k <= net.k_max; ++k) {
            const auto& lvl = net.levels[k];
            const double req = net.unit(k);
            for (size_t i = 0; i < lvl.pts.size(); ++i) {
                nb.clear();
                lvl.grid.query_ball(lvl.pts[i], req * (1.0 - tol), nb);
                for (int32_t j : nb)
                    if (static_cast<size_t>(j) != i) {
                        pass = false;
                        worst = std::min(worst, dist(lvl.pts[i], lvl.pts[j]) / req);
                    }
            }
        }
        rows.push_back({"whitney.separation", pass, pass ? 1.0 : worst, 1.0});
    }
    // Locality: a net point of level k sees only levels k-1..k+1 within
    // 10*2^{-k-k0}. Nearby levels are checked by range query; far levels are
    // excluded by the annulus arithmetic certificate below.
    {
        bool pass = true;
        std::vector<int32_t> nb;
        for (int k = 0; k <= net.k_max && pass; ++k) {
            const double r = 10.0 * net.unit(k);
            for (int j = std::max(0, k - 3); j <= std::min(net.k_max, k + 3); ++j) {
                if (std::abs(j - k) <= 1) continue;
                const auto& lk = net.levels[k];
                for (size_t i = 0; i < lk.pts.size() && pass; ++i) {
                    nb.clear();
                    net.levels[j].grid.query_ball(lk.pts[i], r, nb);
                    if (!nb.empty()) pass = false;
                }
            }
        }
        // Certificate for |j-k| >= 4: dist ranges cannot meet when the ball
        // radius is below the annulus margin. (10*2^{-k0} <= 2^{-k-2} holds by
        // the k0 feasibility rule; levels 4 apart differ by a factor 16.)
        const bool arith = 0.5 - 10.0 * std::ldexp(1.0, -net.k0) >= 0.25 - tol;
        rows.push_back({"whitney.locality_eq2", pass && arith, (pass && arith) ? 1.0 : 0.0, 1.0});
    }
    // Covering: random points of the annuli are within 4*2^{-k-k0} of the net
    // (levels k-1..k+1 suffice by locality).
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::vector<double> cum(curve.edges.size());
        double acc = 0.0;
        for (size_t e = 0; e < curve.edges.size(); ++e) {
            acc += curve.edge_length(e);
            cum[e] = acc;
        }
        double worst = 0.0;
        int tested = 0;
        for (int a = 0; a < covering_samples * 20 && tested < covering_samples * (net.k_max + 1);
             ++a) {
            const int k = static_cast<int>(uni(rng) * (net.k_max + 1));
            if (k > net.k_max) continue;
            bool ok = false;
            Vec c = random_near_curve_point(curve, cum, net.inner(k), net.outer(k), rng, &ok);
            if (!ok) continue;
            const double dd = dist_fn(c, net.outer(k) + samp.pitch);
            if (dd < net.inner(k) || dd >= net.outer(k)) continue;  // off-annulus draw
            ++tested;
            double best = std::numeric_limits<double>::infinity();
            std::vector<int32_t> nb;
            for (int j = std::max(0, k - 1); j <= std::min(net.k_max, k + 1); ++j) {
                nb.clear();
                net.levels[j].grid.query_ball(c, 4.0 * net.unit(k) * (1.0 + tol), nb);
                for (int32_t idx : nb) best = std::min(best, dist(net.levels[j].pts[idx], c));
            }
            worst = std::max(worst, best / (4.0 * net.unit(k)));
        }
        rows.push_back({"whitney.covering", worst <= 1.0 + tol,
                        std::min(worst, 2.0), 1.0});
    }
    return rows;
}

}  // namespace qcx
