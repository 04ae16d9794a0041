#include "qcx/cubes.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>

namespace qcx {

const char* cube_class_name(CubeClass c) {
    switch (c) {
        case CubeClass::FlatGood: return "flat_good";
        case CubeClass::FlatBad: return "flat_bad";
        case CubeClass::NonFlat: return "non_flat";
        default: return "unclassified";
    }
}

int32_t CubeTree::ancestor_at(int32_t node, int tree_k) const {
    while (nodes[node].level > tree_k) node = nodes[node].parent;
    return nodes[node].level == tree_k ? node : -1;
}

CubeTree build_cube_tree(const DeltaNets& nets, const CurveSampling& samp, int J, int cQ) {
    if (J < 2) throw Error("cubes", "J must be >= 2");
    CubeTree t;
    t.J = J;
    t.cQ = cQ;
    t.nets = &nets;
    t.samp = &samp;
    t.tree_depth = nets.k_max / J + 1;
    if (t.tree_depth < 2) throw Error("cubes", "need at least two tree levels; raise k_max");

    t.by_level.resize(t.tree_depth);
    t.node_of_pt.resize(t.tree_depth);
    for (int k = 0; k < t.tree_depth; ++k) {
        const auto& lvl = nets.level(t.net_level(k));
        t.node_of_pt[k].resize(lvl.pts.size(), -1);
        for (size_t i = 0; i < lvl.pts.size(); ++i) {
            CubeTree::Node n;
            n.level = k;
            n.pt = static_cast<int32_t>(i);
            const int32_t id = static_cast<int32_t>(t.nodes.size());
            t.nodes.push_back(std::move(n));
            t.by_level[k].push_back(id);
            t.node_of_pt[k][i] = id;
        }
    }

    // Parents: nearest point of the coarser net, lexicographic tie-break.
    std::vector<int32_t> cand;
    for (int k = 1; k < t.tree_depth; ++k) {
        const auto& fine = nets.level(t.net_level(k));
        const auto& coarse = nets.level(t.net_level(k - 1));
        const double cover = std::ldexp(1.0, -t.net_level(k - 1));
        for (int32_t id : t.by_level[k]) {
            CubeTree::Node& n = t.nodes[id];
            VecView x = fine.pts[n.pt];
            cand.clear();
            double r = cover * (1.0 + 1e-9);
            while (cand.empty()) {
                coarse.grid.query_ball(x, r, cand);
                r *= 2.0;  // safety; covering guarantees the first pass succeeds
            }
            double best = std::numeric_limits<double>::infinity();
            int32_t best_pt = -1;
            for (int32_t c : cand) {
                const double d = dist(coarse.pts[c], x);
                if (d < best - 1e-15 ||
                    (std::abs(d - best) <= 1e-15 && best_pt >= 0 &&
                     lex_less(coarse.pts[c], coarse.pts[best_pt]))) {
                    best = d;
                    best_pt = c;
                }
            }
            n.parent = t.node_of_pt[k - 1][best_pt];
            n.parent_dist = best;
            t.nodes[n.parent].children.push_back(id);
        }
    }

    // Assign every dense sample to its nearest deepest-level net point.
    const int K = t.tree_depth - 1;
    const auto& deep = nets.level(t.net_level(K));
    const double deep_cover = std::ldexp(1.0, -t.net_level(K));
    t.sample_owner.resize(samp.size(), -1);
    for (size_t s = 0; s < samp.size(); ++s) {
        cand.clear();
        double r = deep_cover * (1.0 + 1e-9);
        while (cand.empty()) {
            deep.grid.query_ball(samp.pts[s], r, cand);
            r *= 2.0;
        }
        double best = std::numeric_limits<double>::infinity();
        int32_t best_pt = -1;
        for (int32_t c : cand) {
            const double d = dist(deep.pts[c], samp.pts[s]);
            if (d < best - 1e-15 || (std::abs(d - best) <= 1e-15 && c < best_pt)) {
                best = d;
                best_pt = c;
            }
        }
        t.sample_owner[s] = t.node_of_pt[K][best_pt];
    }

    // Flatten descendants and subtree samples bottom-up, then region metrics.
    for (size_t s = 0; s < samp.size(); ++s)
        t.nodes[t.sample_owner[s]].samples.push_back(static_cast<int32_t>(s));
    for (int k = t.tree_depth; k-- > 0;) {
        for (int32_t id : t.by_level[k]) {
            CubeTree::Node& n = t.nodes[id];
            n.desc.emplace_back(n.level, n.pt);
            for (int32_t c : n.children) {
                const CubeTree::Node& cn = t.nodes[c];
                n.desc.insert(n.desc.end(), cn.desc.begin(), cn.desc.end());
                n.samples.insert(n.samples.end(), cn.samples.begin(), cn.samples.end());
            }
        }
    }
    for (auto& n : t.nodes) {
        VecView x = nets.level(t.net_level(n.level)).pts[n.pt];
        double outer = 0.0;
        for (const auto& [l, pt] : n.desc) {
            outer = std::max(outer, dist(x, nets.level(t.net_level(l)).pts[pt]) +
                                        t.ball_radius(l));
        }
        for (int32_t s : n.samples)
            outer = std::max(outer, dist(x, samp.pts[s]) + t.sample_ball_radius());
        n.outer_radius = outer;
        // Diameter of the ball union via the alternating farthest-pair sweep.
        auto ball_at = [&](size_t i, Vec& c, double& r) {
            if (i < n.desc.size()) {
                const auto& [l, pt] = n.desc[i];
                VecView v = nets.level(t.net_level(l)).pts[pt];
                c = Vec(v.begin(), v.end());
                r = t.ball_radius(l);
            } else {
                c = samp.pts.get(n.samples[i - n.desc.size()]);
                r = t.sample_ball_radius();
            }
        };
        const size_t nb = n.desc.size() + n.samples.size();
        Vec ca, cb;
        double ra, rb;
        size_t a = 0;
        ball_at(a, ca, ra);
        double best = 2.0 * ra;
        for (int sweep = 0; sweep < 6; ++sweep) {
            size_t far = a;
            double fv = best;
            for (size_t i = 0; i < nb; ++i) {
                ball_at(i, cb, rb);
                const double v = dist(ca, cb) + ra + rb;
                if (v > fv) {
                    fv = v;
                    far = i;
                }
            }
            if (far == a) break;
            best = fv;
            a = far;
            ball_at(a, ca, ra);
        }
        n.diam = best;
    }
    return t;
}

bool CubeTree::contains(int32_t node, VecView p, bool open) const {
    const int k = nodes[node].level;
    auto covered_by = [&](double d, double r) { return open ? d < r : d <= r; };
    std::vector<int32_t> cand;
    for (int l = k; l < tree_depth; ++l) {
        const double r = ball_radius(l);
        cand.clear();
        nets->level(net_level(l)).grid.query_ball(p, r, cand);
        for (int32_t c : cand) {
            if (!covered_by(dist(nets->level(net_level(l)).pts[c], p), r)) continue;
            if (ancestor_at(node_of_pt[l][c], k) == node) return true;
        }
    }
    const double sr = sample_ball_radius();
    cand.clear();
    samp->grid.query_ball(p, sr, cand);
    for (int32_t s : cand) {
        if (!covered_by(dist(samp->pts[s], p), sr)) continue;
        if (ancestor_at(sample_owner[s], k) == node) return true;
    }
    return false;
}

std::vector<std::pair<int, int32_t>> CubeTree::containing_nodes(VecView p, bool open) const {
    std::set<std::pair<int, int32_t>> acc;
    auto covered_by = [&](double d, double r) { return open ? d < r : d <= r; };
    std::vector<int32_t> cand;
    auto add_chain = [&](int32_t node) {
        while (node >= 0) {
            acc.insert({nodes[node].level, node});
            node = nodes[node].parent;
        }
    };
    for (int l = 0; l < tree_depth; ++l) {
        const double r = ball_radius(l);
        cand.clear();
        nets->level(net_level(l)).grid.query_ball(p, r, cand);
        for (int32_t c : cand)
            if (covered_by(dist(nets->level(net_level(l)).pts[c], p), r))
                add_chain(node_of_pt[l][c]);
    }
    const double sr = sample_ball_radius();
    cand.clear();
    samp->grid.query_ball(p, sr, cand);
    for (int32_t s : cand)
        if (covered_by(dist(samp->pts[s], p), sr)) add_chain(sample_owner[s]);
    return std::vector<std::pair<int, int32_t>>(acc.rbegin(), acc.rend());
}

double CubeTree::dist_to_cube(int32_t node, VecView p) const {
    const Node& n = nodes[node];
    VecView x = center(node);
    const double to_center = dist(x, p);
    if (to_center <= ball_radius(n.level)) return 0.0;
    double best = to_center - ball_radius(n.level);
    // Localize: any region ball beating `best` has its center within
    // best + r_l of p; shrink as we go.
    std::vector<int32_t> cand;
    for (int l = n.level; l < tree_depth; ++l) {
        const double r = ball_radius(l);
        cand.clear();
        nets->level(net_level(l)).grid.query_ball(p, best + r, cand);
        for (int32_t c : cand) {
            if (ancestor_at(node_of_pt[l][c], n.level) != node) continue;
            best = std::min(best, std::max(0.0, dist(nets->level(net_level(l)).pts[c], p) - r));
        }
        if (best == 0.0) return 0.0;
    }
    const double sr = sample_ball_radius();
    cand.clear();
    samp->grid.query_ball(p, best + sr, cand);
    for (int32_t s : cand) {
        if (ancestor_at(sample_owner[s], n.level) != node) continue;
        best = std::min(best, std::max(0.0, dist(samp->pts[s], p) - sr));
    }
    return best;
}

bool CubeTree::dilated_contains(int32_t node, double M, VecView p) const {
    const Node& n = nodes[node];
    const double budget = M * n.diam;
    const double to_center = dist(center(node), p);
    if (to_center <= ball_radius(n.level) + budget) return true;   // quick accept
    if (to_center > n.outer_radius + budget) return false;         // quick reject
    return dist_to_cube(node, p) <= budget;
}

int32_t CubeTree::smallest_cube_containing(const Ball& B) const {
    // Deterministic boundary sample of B, reused at every node.
    std::vector<Vec> probes;
    probes.push_back(B.center);
    const int d = nets->dim;
    std::mt19937_64 rng(0xc0ffee);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < d; ++k)
        for (double s : {1.0, -1.0}) {
            Vec p = B.center;
            p[k] += s * B.radius;
            probes.push_back(std::move(p));
        }
    for (int i = 0; i < 16; ++i) {
        Vec u(d);
        for (double& x : u) x = g(rng);
        const double nn = norm(u);
        if (nn == 0) continue;
        Vec p = B.center;
        for (int k = 0; k < d; ++k) p[k] += B.radius * u[k] / nn;
        probes.push_back(std::move(p));
    }
    auto contained = [&](int32_t node) {
        VecView x = center(node);
        const Node& n = nodes[node];
        if (dist(x, B.center) + B.radius <= ball_radius(n.level)) return true;
        if (dist(x, B.center) + B.radius > n.outer_radius + kStrictTol) return false;
        for (const Vec& p : probes)
            if (!contains(node, p, /*open=*/false)) return false;
        return true;
    };
    int32_t cur = root();
    if (!contained(cur)) throw Error("cubes", "out of domain");
    for (;;) {
        int32_t next = -1;
        for (int32_t c : nodes[cur].children) {
            if (contained(c)) {
                next = c;
                break;  // children are interior-disjoint; first hit is canonical
            }
        }
        if (next < 0) return cur;
        cur = next;
    }
}

std::vector<AuditRow> audit_cube_tree(const CubeTree& t, uint64_t seed, int sample_points) {
    std::vector<AuditRow> rows;
    const double tol = 1e-9;
    const DeltaNets& nets = *t.nets;
    const CurveSampling& samp = *t.samp;
    const int K = t.tree_depth - 1;

    // Parent distance band [2^{-kJ}, 2^{-(k-1)J}] for points that are not
    // carried over from the coarser net (self-parented copies sit at 0).
    {
        bool pass = true;
        double worst_lo = 1.0, worst_hi = 1.0;
        for (int k = 1; k < t.tree_depth; ++k) {
            const double lo = t.scale(k), hi = t.scale(k - 1);
            for (int32_t id : t.by_level[k]) {
                const double d = t.nodes[id].parent_dist;
                if (d <= kStrictTol) continue;  // same net point, one level up
                if (d < lo * (1.0 - tol)) {
                    pass = false;
                    worst_lo = std::min(worst_lo, d / lo);
                }
                if (d > hi * (1.0 + tol)) {
                    pass = false;
                    worst_hi = std::max(worst_hi, d / hi);
                }
            }
        }
        rows.push_back({"cube.parent_distance_band", pass, pass ? 1.0 : std::max(1.0 / worst_lo, worst_hi), 1.0});
    }
    // (i) every dense sample lies in some level-k cube, for every level.
    {
        bool pass = true;
        for (size_t s = 0; s < samp.size() && pass; ++s) {
            int32_t owner = t.sample_owner[s];
            for (int k = 0; k <= K && pass; ++k) {
                int32_t anc = t.ancestor_at(owner, k);
                if (anc < 0 || !t.contains(anc, samp.pts[s], /*open=*/true)) pass = false;
            }
        }
        rows.push_back({"cube.covering_all_levels", pass, pass ? 1.0 : 0.0, 1.0});
    }
    // (ii)+(iv) rejection sampling: no point may sit in two distinct open
    // cubes of one level, and meeting open cubes at different levels must be
    // nested along the ancestor chain.
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::normal_distribution<double> g(0.0, 1.0);
        bool pass_ii = true, pass_iv = true;
        for (int it = 0; it < sample_points; ++it) {
            const size_t s = static_cast<size_t>(uni(rng) * samp.size()) % samp.size();
            Vec p = samp.pts.get(s);
            const int lvl = static_cast<int>(uni(rng) * t.tree_depth) % t.tree_depth;
            const double spread = t.scale(lvl);
            for (int j = 0; j < t.nets->dim; ++j) p[j] += g(rng) * 0.5 * spread;
            auto nodes_at = t.containing_nodes(p, /*open=*/true);
            // group by level
            for (size_t a = 0; a < nodes_at.size(); ++a)
                for (size_t b = a + 1; b < nodes_at.size(); ++b) {
                    if (nodes_at[a].first == nodes_at[b].first &&
                        nodes_at[a].second != nodes_at[b].second)
                        pass_ii = false;
                    if (nodes_at[a].first != nodes_at[b].first) {
                        const auto [kd, nd] = nodes_at[a].first > nodes_at[b].first
                                                  ? nodes_at[a]
                                                  : nodes_at[b];
                        const auto [ks, ns] = nodes_at[a].first > nodes_at[b].first
                                                  ? nodes_at[b]
                                                  : nodes_at[a];
                        if (t.ancestor_at(nd, ks) != ns) pass_iv = false;
                    }
                }
        }
        rows.push_back({"cube.open_disjoint_same_level", pass_ii, pass_ii ? 1.0 : 0.0, 1.0});
        rows.push_back({"cube.nesting_on_intersection", pass_iv, pass_iv ? 1.0 : 0.0, 1.0});
    }
    // (iii) ball sandwich with constants derived for (J, cQ): the inner ball
    // is a region ball by definition; the outer radius is bounded by the
    // geometric chain sum 1/(1-2^{-J}) plus the truncation slack.
    {
        const double F = 1.0 / (1.0 - std::ldexp(1.0, -t.J));
        bool pass = true;
        double worst = 0.0;
        for (size_t id = 0; id < t.nodes.size(); ++id) {
            const auto& n = t.nodes[id];
            const double bound = F * t.scale(n.level) + t.scale(K) + samp.pitch;
            const double ratio = n.outer_radius / bound;
            worst = std::max(worst, ratio);
            if (ratio > 1.0 + tol) pass = false;
        }
        rows.push_back({"cube.ball_sandwich_outer", pass, worst, 1.0});
    }
    return rows;
}

}  // namespace qcx
