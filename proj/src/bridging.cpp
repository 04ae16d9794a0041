#include "qcx/bridging.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <random>

namespace qcx {

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace {

bool ball_non_flat(const BetaEngine& engine, int net_level, int32_t pt, const Config& cfg) {
    return engine.beta_net_ball(net_level, pt, cfg.M) > cfg.delta * cfg.eps;
}

}  // namespace

ClassifyResult classify(CubeTree& tree, const BetaEngine& engine, const Config& cfg) {
    ClassifyResult res;
    const int32_t root = tree.root();
    const bool root_nf = ball_non_flat(engine, 0, tree.nodes[root].pt, cfg);
    res.root_beta = engine.beta_cube(root, 0.0);
    if (!root_nf && res.root_beta >= cfg.eps)
        throw Error("classify", "root not flat: shrink input or raise eps");
    tree.nodes[root].cls = root_nf ? CubeClass::NonFlat : CubeClass::FlatGood;
    if (root_nf)
        res.non_flat++;
    else
        res.flat_good++;

    // Depth-first; each stack frame carries the accumulated sum of
    // beta(MQ)^2 since the last restart and its largest single term.
    struct Frame {
        int32_t node;
        double acc;
        double max_term;
    };
    std::vector<Frame> stack;
    auto push_children = [&](int32_t id, double acc, double max_term) {
        const auto& ch = tree.nodes[id].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it)
            stack.push_back({*it, acc, max_term});
    };
    push_children(root, 0.0, 0.0);
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        auto& n = tree.nodes[f.node];
        if (ball_non_flat(engine, tree.net_level(n.level), n.pt, cfg)) {
            n.cls = CubeClass::NonFlat;
            res.non_flat++;
            push_children(f.node, 0.0, 0.0);
            continue;
        }
        const double b = engine.beta_cube(f.node, cfg.M);
        const double term = b * b;
        const double acc = f.acc + term;
        const double max_term = std::max(f.max_term, term);
        if (acc > cfg.eps) {
            n.cls = CubeClass::FlatBad;
            res.flat_bad++;
            res.flat_bad_records.push_back({f.node, acc, max_term});
            push_children(f.node, 0.0, 0.0);
        } else {
            n.cls = CubeClass::FlatGood;
            res.flat_good++;
            push_children(f.node, acc, max_term);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Filter graph
// ---------------------------------------------------------------------------

int32_t FilterGraph::add_node(VecView p) {
    if (!grid.built()) throw Error("bridging", "filter graph not initialized");
    nodes.push(p);
    adj.emplace_back();
    const int32_t id = static_cast<int32_t>(nodes.size() - 1);
    grid.insert(id);
    return id;
}

void FilterGraph::add_edge(int32_t u, int32_t v) {
    const double w = dist(nodes[u], nodes[v]);
    adj[u].push_back({v, w});
    adj[v].push_back({u, w});
}

int32_t FilterGraph::snap(VecView p) const {
    std::vector<int32_t> cand;
    double r = snap_radius;
    for (int it = 0; it < 8 && cand.empty(); ++it) {
        grid.query_ball(p, r, cand);
        r *= 2.0;
    }
    if (cand.empty()) return -1;
    int32_t best = cand[0];
    double bd = dist(nodes[best], p);
    for (int32_t c : cand) {
        const double d = dist(nodes[c], p);
        if (d < bd || (d == bd && c < best)) {
            bd = d;
            best = c;
        }
    }
    return best;
}

double FilterGraph::bounded_dist(int32_t s, int32_t t, double cap) const {
    if (s < 0 || t < 0) return std::numeric_limits<double>::infinity();
    if (s == t) return 0.0;
    std::priority_queue<std::pair<double, int32_t>, std::vector<std::pair<double, int32_t>>,
                        std::greater<>>
        pq;
    std::unordered_map<int32_t, double> dist_map;
    pq.push({0.0, s});
    dist_map[s] = 0.0;
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > cap) break;
        auto it = dist_map.find(u);
        if (it != dist_map.end() && d > it->second) continue;
        if (u == t) return d;
        for (const auto& [v, w] : adj[u]) {
            const double nd = d + w;
            if (nd > cap) continue;
            auto f = dist_map.find(v);
            if (f == dist_map.end() || nd < f->second) {
                dist_map[v] = nd;
                pq.push({nd, v});
            }
        }
    }
    return std::numeric_limits<double>::infinity();
}

std::vector<Vec> FilterGraph::extract_path(int32_t s, int32_t t, double cap) const {
    std::vector<Vec> out;
    if (s < 0 || t < 0) return out;
    std::priority_queue<std::pair<double, int32_t>, std::vector<std::pair<double, int32_t>>,
                        std::greater<>>
        pq;
    std::unordered_map<int32_t, double> dist_map;
    std::unordered_map<int32_t, int32_t> prev;
    pq.push({0.0, s});
    dist_map[s] = 0.0;
    bool found = s == t;
    while (!pq.empty() && !found) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > cap) break;
        auto it = dist_map.find(u);
        if (it != dist_map.end() && d > it->second) continue;
        if (u == t) {
            found = true;
            break;
        }
        for (const auto& [v, w] : adj[u]) {
            const double nd = d + w;
            if (nd > cap) continue;
            auto f = dist_map.find(v);
            if (f == dist_map.end() || nd < f->second) {
                dist_map[v] = nd;
                prev[v] = u;
                pq.push({nd, v});
            }
        }
    }
    if (!found) return out;
    int32_t cur = t;
    while (true) {
        out.push_back(nodes.get(cur));
        if (cur == s) break;
        cur = prev.at(cur);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Straightening
// ---------------------------------------------------------------------------

namespace {

struct PathVtx {
    Vec pos;
    int level;    // -1 for the anchor
    int32_t idx;  // Whitney index, or sample id for the anchor
};

bool same_vertex(const PathVtx& a, const PathVtx& b) {
    return a.level == b.level && a.idx == b.idx;
}

// All Whitney points strictly inside R_lambda(a, b), excluding the endpoints.
std::vector<std::pair<int, int32_t>> clearance_violators(const PathVtx& a, const PathVtx& b,
                                                         const BridgeContext& ctx) {
    const double r = dist(a.pos, b.pos);
    Vec mid = midpoint(a.pos, b.pos);
    const double rad = 0.5 * (1.0 + ctx.cfg.lambda) * r;
    const double cd = (*ctx.dist_fn)(mid, -1.0);
    auto hits = ctx.whitney->all_points_in_ball(Ball(mid, rad), cd);
    std::vector<std::pair<int, int32_t>> out;
    for (const auto& [lvl, i] : hits) {
        if ((lvl == a.level && i == a.idx) || (lvl == b.level && i == b.idx)) continue;
        const double d = dist(ctx.whitney->level(lvl).pts[i], mid);
        if (strictly_less(d, rad, r)) out.emplace_back(lvl, i);
    }
    return out;
}

}  // namespace

StraightenedPath straighten_path(const std::vector<Vec>& raw, int start_level,
                                 int32_t start_idx, int32_t anchor_sample,
                                 const BridgeContext& ctx) {
    if (raw.size() < 2) throw Error("straighten", "raw path needs >= 2 points");
    const WhitneyNet& W = *ctx.whitney;
    const CurveDist& df = *ctx.dist_fn;

    // Precondition: for each covering ball, the doubled ball meets the raw
    // path in one interval. Raw paths are 1..2 segments, so it can only fail
    // across the bend of a 2-segment path.
    if (raw.size() > 3) throw Error("straighten", "raw path must be one or two segments");

    double raw_len = 0.0;
    for (size_t i = 0; i + 1 < raw.size(); ++i) raw_len += dist(raw[i], raw[i + 1]);

    std::vector<PathVtx> path;
    path.push_back({raw.front(), start_level, start_idx});

    // Chain selection: walk the raw path; at each step attach the nearest net
    // point of the annulus band of the current clearance.
    std::vector<int32_t> cand;
    for (size_t seg = 0; seg + 1 < raw.size(); ++seg) {
        const Vec& a = raw[seg];
        const Vec& b = raw[seg + 1];
        const double len = dist(a, b);
        if (len == 0.0) continue;
        double t = 0.0;
        while (t < len) {
            Vec p = lerp(a, b, t / len);
            const double d = df(p, -1.0);
            if (d < W.inner(W.k_max)) break;  // below the deepest annulus: stop at anchor
            int j = std::clamp(static_cast<int>(std::floor(-std::log2(std::max(d, 1e-300)))), 0,
                               W.k_max);
            double best = std::numeric_limits<double>::infinity();
            int bl = -1;
            int32_t bi = -1;
            for (int l = std::max(0, j - 1); l <= std::min(W.k_max, j + 1); ++l) {
                cand.clear();
                W.level(l).grid.query_ball(p, 6.0 * W.unit(j), cand);
                for (int32_t c : cand) {
                    const double dd = dist(W.level(l).pts[c], p);
                    if (dd < best) {
                        best = dd;
                        bl = l;
                        bi = c;
                    }
                }
            }
            if (bl >= 0 && !(path.back().level == bl && path.back().idx == bi))
                path.push_back({W.level(bl).pts.get(bi), bl, bi});
            t += 2.0 * W.unit(j);
        }
    }
    path.push_back({ctx.samp->pts.get(anchor_sample), -1, anchor_sample});

    // Drop consecutive duplicates and any accidental zero-length edges.
    {
        std::vector<PathVtx> clean;
        for (auto& v : path)
            if (clean.empty() || !same_vertex(clean.back(), v)) clean.push_back(std::move(v));
        path = std::move(clean);
    }

    // Repair: replace any net-net edge whose clearance region R_lambda holds a
    // third net point; the midpoint-most violator splits the edge. Levels stay
    // within a band by the locality property, and mutual distances contract,
    // so the loop terminates; a cap guards against mistuned lambda/k0.
    {
        int iters = 0;
        size_t i = 0;
        while (i + 1 < path.size()) {
            if (path[i].level < 0 || path[i + 1].level < 0) {
                ++i;
                continue;
            }
            auto viol = clearance_violators(path[i], path[i + 1], ctx);
            if (viol.empty()) {
                ++i;
                continue;
            }
            if (++iters > 10000) {
#ifdef QCX_STRAIGHTEN_DEBUG
                fprintf(stderr, "diverge: path size %zu, edge %zu len %.3g levels %d %d viol %zu\n",
                        path.size(), i, dist(path[i].pos, path[i + 1].pos), path[i].level,
                        path[i + 1].level, viol.size());
                for (size_t q2 = std::max<size_t>(1, i) - 1; q2 < std::min(path.size(), i + 3);
                     ++q2)
                    fprintf(stderr, "  v[%zu] lvl %d idx %d pos %.5f %.5f\n", q2, path[q2].level,
                            path[q2].idx, path[q2].pos[0], path[q2].pos[1]);
#endif
                throw Error("straighten", "straightening diverged");
            }
            const Vec& pa = path[i].pos;
            const Vec& pb = path[i + 1].pos;
            double best = std::numeric_limits<double>::infinity();
            std::pair<int, int32_t> pick = viol.front();
            for (const auto& [lvl, idx] : viol) {
                VecView w = W.level(lvl).pts[idx];
                const double v = std::max(dist(w, pa), dist(w, pb));
                if (v < best) {
                    best = v;
                    pick = {lvl, idx};
                }
            }
            // Skip degenerate splits that would duplicate a neighbour.
            PathVtx nv{W.level(pick.first).pts.get(pick.second), pick.first, pick.second};
            if (same_vertex(nv, path[i]) || same_vertex(nv, path[i + 1])) {
                ++i;
                continue;
            }
            path.insert(path.begin() + i + 1, std::move(nv));
        }
    }

    // Prune: drop interior vertices whose removal keeps the clearance and the
    // level-adjacency constraints; this undoes chain-phase zigzag.
    {
        bool changed = true;
        int sweeps = 0;
        while (changed && sweeps++ < 8) {
            changed = false;
            for (size_t i = 1; i + 1 < path.size(); ++i) {
                const PathVtx& a = path[i - 1];
                const PathVtx& b = path[i + 1];
                if (a.level < 0 || b.level < 0) continue;
                if (std::abs(a.level - b.level) > 1) continue;
                if (!clearance_violators(a, b, ctx).empty()) continue;
                // Keep the band |x-y| <= 10 * 2^{-j-k0} for both endpoints.
                const double d = dist(a.pos, b.pos);
                if (d > 10.0 * W.unit(std::max(a.level, b.level))) continue;
                path.erase(path.begin() + i);
                changed = true;
                --i;
            }
        }
    }

    StraightenedPath out;
    out.raw_length = raw_len;
    for (auto& v : path) {
        out.vertices.push_back(v.pos);
        out.levels.push_back(v.level);
        out.idx.push_back(v.idx);
    }
    for (size_t i = 0; i + 1 < out.vertices.size(); ++i)
        out.length += dist(out.vertices[i], out.vertices[i + 1]);
    return out;
}

// ---------------------------------------------------------------------------
// Bridge construction
// ---------------------------------------------------------------------------

namespace {

// Nearest dense sample to `target` within the ball around `seed`; -1 if none.
int32_t nearest_sample_in_ball(const CurveSampling& samp, VecView seed, double radius,
                               VecView target, int skip_rank = 0) {
    std::vector<int32_t> cand;
    samp.grid.query_ball(seed, radius, cand);
    std::sort(cand.begin(), cand.end(), [&](int32_t a, int32_t b) {
        const double da = dist(samp.pts[a], target), db = dist(samp.pts[b], target);
        if (da != db) return da < db;
        return a < b;
    });
    if (static_cast<size_t>(skip_rank) >= cand.size()) return -1;
    return cand[skip_rank];
}

void register_bridge_path(FilterGraph& fg, const Bridge& b) {
    int32_t prev = -1;
    for (size_t i = 0; i < b.path.size(); ++i) {
        int32_t id;
        if (b.vtx_level[i] < 0) {
            id = fg.snap(b.path[i]);
            if (id < 0) id = fg.add_node(b.path[i]);
        } else {
            id = fg.add_node(b.path[i]);
        }
        if (prev >= 0) fg.add_edge(prev, id);
        prev = id;
    }
}

struct FlatExceptionCheck {
    bool flat = false;
};

}  // namespace

BridgeSet build_bridges(BridgeContext& ctx, const ClassifyResult& cls) {
    BridgeSet out;
    const Config& cfg = ctx.cfg;
    const CubeTree& tree = *ctx.tree;
    const DeltaNets& nets = *ctx.nets;
    const WhitneyNet& W = *ctx.whitney;
    const BetaEngine& engine = *ctx.engine;
    const CurveSampling& samp = *ctx.samp;
    ConeOptions cone;
    cone.arrival_tol = samp.pitch;
    cone.samples = 64;

    auto straighten_leg = [&](const Vec& z, int z_level, int32_t z_idx, int32_t anchor,
                              Bridge& b) {
        std::vector<Vec> raw = {z, samp.pts.get(anchor)};
        StraightenedPath sp = straighten_path(raw, z_level, z_idx, anchor, ctx);
        out.max_straighten_ratio =
            std::max(out.max_straighten_ratio, sp.length / std::max(sp.raw_length, 1e-300));
        b.path = std::move(sp.vertices);
        b.vtx_level = std::move(sp.levels);
        b.vtx_idx = std::move(sp.idx);
        b.raw_length = sp.raw_length;
        b.length = sp.length;
    };

    // --- Flat-bad cubes, in tree order -------------------------------------
    std::vector<int32_t> fb_nodes;
    for (const auto& rec : cls.flat_bad_records) fb_nodes.push_back(rec.node);
    std::sort(fb_nodes.begin(), fb_nodes.end(), [&](int32_t a, int32_t b) {
        if (tree.nodes[a].level != tree.nodes[b].level)
            return tree.nodes[a].level < tree.nodes[b].level;
        return tree.nodes[a].pt < tree.nodes[b].pt;
    });
    for (int32_t node : fb_nodes) {
        const auto& n = tree.nodes[node];
        const int q = tree.net_level(n.level);
        const double r = std::ldexp(1.0, -q);
        VecView x = tree.center(node);

        // Apex: Whitney point of level q inside 2B, closest to the center.
        // Staged radii keep the grid scans small (the nearest net point sits
        // just past the annulus floor 2^{-q-1}).
        auto pick_apex = [&](int level, double radius) -> std::pair<int32_t, double> {
            if (level < 0 || level > W.k_max) return {-1, 0.0};
            std::vector<int32_t> cand;
            for (double f : {0.65, 1.1, 2.0}) {
                const double rr = f * std::ldexp(1.0, -level);
                if (rr > radius * 1.01) break;
                W.level(level).grid.query_ball(x, std::min(rr, radius), cand);
                if (!cand.empty()) break;
            }
            int32_t best = -1;
            double bd = std::numeric_limits<double>::infinity();
            for (int32_t c : cand) {
                const double d = dist(W.level(level).pts[c], x);
                if (d < bd || (d == bd && c < best)) {
                    bd = d;
                    best = c;
                }
            }
            return {best, bd};
        };
        int z_level = std::min(q, W.k_max);
        auto [z_idx, zd] = pick_apex(z_level, 2.0 * r);
        if (z_idx < 0) {
            ++out.widened_searches;
            for (int dl : {-1, 1}) {
                auto [i2, d2] = pick_apex(z_level + dl, 2.0 * r);
                if (i2 >= 0) {
                    z_level += dl;
                    z_idx = i2;
                    break;
                }
            }
        }
        if (z_idx < 0) {
            ++out.flagged_skips;
            continue;
        }
        Vec z = W.level(z_level).pts.get(z_idx);

        // Anchor targets: net points of Delta_q inside 2B (capped).
        auto xi_list = nets.points_in_ball(q, Ball(Vec(x.begin(), x.end()), 2.0 * r));
        std::sort(xi_list.begin(), xi_list.end(), [&](int32_t a, int32_t b) {
            const double da = dist(nets.level(q).pts[a], x), db = dist(nets.level(q).pts[b], x);
            if (da != db) return da < db;
            return a < b;
        });
        if (xi_list.size() > 8) {
            ++out.anchor_cap_hits;
            xi_list.resize(8);
        }
        for (int32_t xi : xi_list) {
            VecView xi_p = nets.level(q).pts[xi];
            const double anchor_r = cfg.M * cfg.eps * 2.0 * r;
            bool done = false;
            for (int rank = 0; rank < 16 && !done; ++rank) {
                const int32_t a = nearest_sample_in_ball(samp, xi_p, anchor_r, z, rank);
                if (a < 0) break;
                if (!segment_in_cone(z, samp.pts[a], samp.pts[a], *ctx.dist_fn,
                                     ConeOptions{cfg.alpha, cone.arrival_tol, cone.samples}))
                    continue;
                Bridge b;
                b.kind = Bridge::Kind::FlatBad;
                b.cube_node = node;
                b.ball_level = q;
                b.scale = r;
                b.apex = z;
                b.apex_level = z_level;
                b.anchor_samples = {a};
                straighten_leg(z, z_level, z_idx, a, b);
                out.max_flatbad_len_ratio = std::max(
                    out.max_flatbad_len_ratio, b.length / std::max(n.diam, 1e-300));
                out.by_cube[node].push_back(static_cast<int32_t>(out.bridges.size()));
                if (ctx.filter) register_bridge_path(*ctx.filter, b);
                out.bridges.push_back(std::move(b));
                done = true;
            }
            if (!done) ++out.flagged_skips;
        }
    }

    // --- Non-flat balls, coarse to fine -------------------------------------
    std::set<std::tuple<int, int32_t, int32_t>> seen_pairs;
    for (int k = 0; k <= nets.k_max; ++k) {
        const auto& lvl = nets.level(k);
        const double r = std::ldexp(1.0, -k);
        for (size_t pt = 0; pt < lvl.pts.size(); ++pt) {
            if (!ball_non_flat(engine, k, static_cast<int32_t>(pt), cfg)) continue;
            VecView xi1 = lvl.pts[pt];

            // Flat-containment exception: when a modest dilation is already
            // flat, anchors move within M*eps of the net points.
            const bool flat_ctx =
                engine.beta_net_ball(k, static_cast<int32_t>(pt), 2.0) < cfg.eps ||
                engine.beta_net_ball(k, static_cast<int32_t>(pt), 2.0 * cfg.M) < cfg.eps;
            const double anchor_r = flat_ctx ? cfg.M * cfg.eps * r : r;

            auto annulus = nets.points_in_ball(k, Ball(Vec(xi1.begin(), xi1.end()), cfg.C * r));
            for (int32_t xi2 : annulus) {
                if (xi2 == static_cast<int32_t>(pt)) continue;
                const double sep = dist(lvl.pts[xi2], xi1);
                if (sep < 2.0 * r) continue;
                auto key = std::make_tuple(k, std::min<int32_t>(pt, xi2),
                                           std::max<int32_t>(pt, xi2));
                if (!seen_pairs.insert(key).second) continue;
                VecView xi2_p = lvl.pts[xi2];

                // Redundancy filter: pairs already connected within
                // theta_red * 2^{-k} in the partial network are recorded,
                // not bridged (the certificate is what the bridge would add).
                if (ctx.filter) {
                    const int32_t s1 = ctx.filter->snap(xi1);
                    const int32_t s2 = ctx.filter->snap(xi2_p);
                    const double cap = cfg.theta_red * r;
                    const double d = ctx.filter->bounded_dist(s1, s2, cap);
                    if (d <= cap) {
                        out.covered.push_back({k, static_cast<int32_t>(pt), xi2, d});
                        ++out.redundant_pairs;
                        continue;
                    }
                }

                // Apex candidates: probe deterministic offsets around the
                // pair, then take the nearest net point of the augmented-net
                // levels k+k1-1, k+k1 at each probe. All candidates of one
                // level have comparable clearance (a factor-2 range), so the
                // probe set stands in for a full-ball enumeration; candidates
                // are then ordered by exact clearance.
                struct Cand {
                    double clear;
                    int level;
                    int32_t idx;
                };
                std::vector<Cand> cands;
                {
                    const int la = std::min(k + cfg.k1, W.k_max);
                    Vec mid = midpoint(xi1, xi2_p);
                    Vec axis = normalized(sub(xi2_p, Vec(xi1.begin(), xi1.end())));
                    std::vector<Vec> probes;
                    auto push_probe = [&](const Vec& base, const Vec& dir, double h) {
                        Vec p = base;
                        for (size_t q2 = 0; q2 < p.size(); ++q2) p[q2] += dir[q2] * h;
                        probes.push_back(std::move(p));
                    };
                    // Normal directions of the pair axis.
                    std::vector<Vec> nrms;
                    for (int d2 = 0; d2 < ctx.curve->dim; ++d2) {
                        Vec e(ctx.curve->dim, 0.0);
                        e[d2] = 1.0;
                        const double along = dot(e, axis);
                        for (int q2 = 0; q2 < ctx.curve->dim; ++q2) e[q2] -= along * axis[q2];
                        const double nn = norm(e);
                        if (nn > 0.3) nrms.push_back(scaled(e, 1.0 / nn));
                    }
                    const double h0 = std::ldexp(1.0, -la);
                    for (const Vec& base :
                         {mid, lerp(xi1, xi2_p, 0.25), lerp(xi1, xi2_p, 0.75)}) {
                        probes.push_back(base);
                        for (const Vec& nv : nrms)
                            for (double h : {0.75 * h0, 1.5 * h0, 3.0 * h0, -0.75 * h0,
                                             -1.5 * h0, -3.0 * h0})
                                push_probe(base, nv, h);
                    }
                    // Beyond-the-pair probes (apexes outside an open end).
                    for (double t : {-0.5, 1.5})
                        probes.push_back(lerp(xi1, xi2_p, t));
                    std::set<std::pair<int, int32_t>> seen_cand;
                    std::vector<int32_t> nearby;
                    for (const Vec& p : probes) {
                        for (int l : {la - 1, la}) {
                            if (l < 0 || l > W.k_max) continue;
                            nearby.clear();
                            W.level(l).grid.query_ball(p, 6.0 * W.unit(l), nearby);
                            for (int32_t w : nearby) {
                                VecView zp = W.level(l).pts[w];
                                if (dist(zp, xi1) > cfg.C * r) continue;
                                if (dist(zp, xi2_p) > cfg.C * r) continue;
                                if (!seen_cand.insert({l, w}).second) continue;
                                cands.push_back({W.level(l).dist_to_curve[w], l, w});
                            }
                        }
                    }
                    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
                        if (a.clear != b.clear) return a.clear > b.clear;
                        if (a.level != b.level) return a.level < b.level;
                        return a.idx < b.idx;
                    });
                    if (cands.size() > 48) cands.resize(48);
                }

                bool built = false;
                for (const Cand& c : cands) {
                    Vec z = W.level(c.level).pts.get(c.idx);
                    const int32_t a1 = nearest_sample_in_ball(samp, xi1, anchor_r, z);
                    const int32_t a2 = nearest_sample_in_ball(samp, xi2_p, anchor_r, z);
                    if (a1 < 0 || a2 < 0) continue;
                    if (dist(z, samp.pts[a1]) > cfg.c_raw_leg * r) continue;
                    if (dist(z, samp.pts[a2]) > cfg.c_raw_leg * r) continue;
                    ConeOptions co{cfg.C * cfg.alpha, cone.arrival_tol, cone.samples};
                    if (!segment_in_cone(z, samp.pts[a1], samp.pts[a1], *ctx.dist_fn, co))
                        continue;
                    if (!segment_in_cone(z, samp.pts[a2], samp.pts[a2], *ctx.dist_fn, co))
                        continue;

                    Bridge leg1, leg2;
                    straighten_leg(z, c.level, c.idx, a1, leg1);
                    straighten_leg(z, c.level, c.idx, a2, leg2);
                    if (leg1.length + leg2.length > cfg.c_len * r) continue;

                    Bridge b;
                    b.kind = Bridge::Kind::NonFlat;
                    b.ball_level = k;
                    b.ball_pt = static_cast<int32_t>(pt);
                    b.ball_pt2 = xi2;
                    b.scale = r;
                    b.apex = z;
                    b.apex_level = c.level;
                    b.anchor_samples = {a1, a2};
                    b.raw_length = leg1.raw_length + leg2.raw_length;
                    b.length = leg1.length + leg2.length;
                    // anchor1 -> apex -> anchor2
                    b.path.assign(leg1.path.rbegin(), leg1.path.rend());
                    b.vtx_level.assign(leg1.vtx_level.rbegin(), leg1.vtx_level.rend());
                    b.vtx_idx.assign(leg1.vtx_idx.rbegin(), leg1.vtx_idx.rend());
                    for (size_t i = 1; i < leg2.path.size(); ++i) {
                        b.path.push_back(leg2.path[i]);
                        b.vtx_level.push_back(leg2.vtx_level[i]);
                        b.vtx_idx.push_back(leg2.vtx_idx[i]);
                    }
                    if (ctx.filter) register_bridge_path(*ctx.filter, b);
                    out.bridges.push_back(std::move(b));
                    built = true;
                    break;
                }
                if (!built) ++out.unbridged_pairs;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

AugmentedNetwork assemble(const PolyCurve& curve, BridgeSet&& bs, const CurveSampling& samp) {
    AugmentedNetwork net;
    net.base = curve;
    net.bridges = std::move(bs.bridges);
    net.covered = std::move(bs.covered);
    net.nodes = PointSet(curve.dim);
    net.base_length = curve.length();

    // Base vertices first.
    std::vector<int32_t> vmap(curve.vertex_count());
    for (size_t i = 0; i < curve.vertex_count(); ++i) {
        net.nodes.push(curve.vertex(i));
        net.node_on_curve.push_back(1);
        vmap[i] = static_cast<int32_t>(i);
    }
    // Anchor feet, one node per distinct dense sample.
    std::map<int32_t, int32_t> anchor_node;                 // sample -> node
    std::map<size_t, std::vector<std::pair<double, int32_t>>> splits;  // edge -> (t, node)
    for (const auto& b : net.bridges) {
        for (int32_t s : b.anchor_samples) {
            if (anchor_node.count(s)) continue;
            const double t = samp.edge_t[s];
            const size_t e = samp.edge_id[s];
            int32_t id;
            if (t <= 1e-12) {
                id = vmap[curve.edges[e][0]];
            } else if (t >= 1.0 - 1e-12) {
                id = vmap[curve.edges[e][1]];
            } else {
                net.nodes.push(samp.pts[s]);
                net.node_on_curve.push_back(1);
                id = static_cast<int32_t>(net.nodes.size() - 1);
                splits[e].push_back({t, id});
            }
            anchor_node[s] = id;
        }
    }
    auto add_edge = [&](int32_t u, int32_t v, int8_t tag, int32_t bid) {
        if (u == v) return;
        net.gedges.push_back({u, v});
        net.elen.push_back(dist(net.nodes[u], net.nodes[v]));
        net.etag.push_back(tag);
        net.ebridge.push_back(bid);
    };
    // Base edges with splits.
    for (size_t e = 0; e < curve.edges.size(); ++e) {
        auto it = splits.find(e);
        int32_t prev = vmap[curve.edges[e][0]];
        if (it != splits.end()) {
            std::sort(it->second.begin(), it->second.end());
            for (const auto& [t, id] : it->second) {
                add_edge(prev, id, 0, -1);
                prev = id;
            }
        }
        add_edge(prev, vmap[curve.edges[e][1]], 0, -1);
    }
    // Bridge paths; Whitney vertices are deduplicated by identity so adjacent
    // bridges share nodes exactly.
    std::map<std::pair<int, int32_t>, int32_t> wnode;
    double bridge_len = 0.0;
    for (size_t bi = 0; bi < net.bridges.size(); ++bi) {
        const Bridge& b = net.bridges[bi];
        int32_t prev = -1;
        for (size_t i = 0; i < b.path.size(); ++i) {
            int32_t id;
            if (b.vtx_level[i] < 0) {
                id = anchor_node.at(b.vtx_idx[i]);
            } else {
                auto key = std::make_pair(b.vtx_level[i], b.vtx_idx[i]);
                auto f = wnode.find(key);
                if (f != wnode.end()) {
                    id = f->second;
                } else {
                    net.nodes.push(b.path[i]);
                    net.node_on_curve.push_back(0);
                    id = static_cast<int32_t>(net.nodes.size() - 1);
                    wnode.emplace(key, id);
                }
            }
            if (prev >= 0) {
                add_edge(prev, id, 1, static_cast<int32_t>(bi));
                bridge_len += dist(net.nodes[prev], net.nodes[id]);
            }
            prev = id;
        }
        net.bridge_length += b.length;
    }
    // Shared Whitney vertices would double-count; use the de-duplicated sum.
    net.bridge_length = 0.0;
    for (size_t e = 0; e < net.gedges.size(); ++e)
        if (net.etag[e] == 1) net.bridge_length += net.elen[e];
    (void)bridge_len;

    // Connectivity check over the merged graph.
    {
        std::vector<int32_t> parent(net.nodes.size());
        for (size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int32_t>(i);
        std::vector<int32_t>* pp = &parent;
        auto find = [pp](int32_t a) {
            while ((*pp)[a] != a) {
                (*pp)[a] = (*pp)[(*pp)[a]];
                a = (*pp)[a];
            }
            return a;
        };
        for (const auto& e : net.gedges) {
            const int32_t ra = find(e[0]), rb = find(e[1]);
            if (ra != rb) parent[ra] = rb;
        }
        const int32_t r0 = find(0);
        for (size_t i = 1; i < parent.size(); ++i)
            if (find(static_cast<int32_t>(i)) != r0)
                throw Error("assemble", "augmented network is disconnected");
    }
    return net;
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

std::vector<AuditRow> audit_bridges(const AugmentedNetwork& net, const WhitneyNet& W,
                                    const CurveDist& dist_fn, const Config& cfg) {
    std::vector<AuditRow> rows;
    const double tol = 1e-9;

    // Per-edge checks on every bridge path: level adjacency, the clearance
    // property, the length band on net-net edges, and the stub bound on the
    // single closing edge at each anchor.
    bool pass_levels = true, pass_clear = true, pass_band = true, pass_stub = true;
    double band_worst = 1.0, stub_worst = 0.0;
    size_t lemma_edges = 0, stub_edges = 0;
    for (const auto& b : net.bridges) {
        for (size_t i = 0; i + 1 < b.path.size(); ++i) {
            const int la = b.vtx_level[i], lb = b.vtx_level[i + 1];
            const double elen = dist(b.path[i], b.path[i + 1]);
            if (la < 0 || lb < 0) {
                ++stub_edges;
                const double bound = 2.0 * std::ldexp(1.0, -W.k_max);
                stub_worst = std::max(stub_worst, elen / bound);
                if (elen > bound * (1.0 + tol)) pass_stub = false;
                continue;
            }
            ++lemma_edges;
            if (std::abs(la - lb) > 1) pass_levels = false;
            // R_lambda emptiness.
            Vec mid = midpoint(b.path[i], b.path[i + 1]);
            const double rad = 0.5 * (1.0 + cfg.lambda) * elen;
            auto hits = W.all_points_in_ball(Ball(mid, rad), dist_fn(mid, -1.0));
            for (const auto& [lvl, idx] : hits) {
                if ((lvl == la && idx == b.vtx_idx[i]) || (lvl == lb && idx == b.vtx_idx[i + 1]))
                    continue;
                if (strictly_less(dist(W.level(lvl).pts[idx], mid), rad, elen)) {
                    pass_clear = false;
                    break;
                }
            }
            // Band against both endpoint levels.
            for (int j : {la, lb}) {
                const double u = W.unit(j);
                const double lo = 0.5 * u, hi = 10.0 * u;
                if (elen < lo * (1.0 - tol) || elen > hi * (1.0 + tol)) {
                    pass_band = false;
                    band_worst = std::max(band_worst, std::max(lo / elen, elen / hi));
                }
            }
        }
    }
    rows.push_back({"bridge.level_adjacency", pass_levels, pass_levels ? 1.0 : 0.0, 1.0});
    rows.push_back({"bridge.clearance_empty", pass_clear, pass_clear ? 1.0 : 0.0, 1.0});
    rows.push_back({"bridge.length_band", pass_band, band_worst, 1.0});
    rows.push_back({"bridge.anchor_stub", pass_stub, stub_worst, 1.0});
    (void)lemma_edges;
    (void)stub_edges;

    // Segment separation over nonadjacent bridge edges (deduplicated by node
    // ids in the merged graph).
    {
        struct E {
            int32_t u, v;
            double len;
        };
        std::vector<E> be;
        std::set<std::pair<int32_t, int32_t>> seen;
        for (size_t e = 0; e < net.gedges.size(); ++e) {
            if (net.etag[e] != 1) continue;
            auto key = std::minmax(net.gedges[e][0], net.gedges[e][1]);
            if (!seen.insert({key.first, key.second}).second) continue;
            be.push_back({net.gedges[e][0], net.gedges[e][1], net.elen[e]});
        }
        double worst = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < be.size(); ++i)
            for (size_t j = i + 1; j < be.size(); ++j) {
                if (be[i].u == be[j].u || be[i].u == be[j].v || be[i].v == be[j].u ||
                    be[i].v == be[j].v)
                    continue;
                const double d =
                    segment_segment_dist(net.nodes[be[i].u], net.nodes[be[i].v],
                                         net.nodes[be[j].u], net.nodes[be[j].v]);
                worst = std::min(worst, d / std::min(be[i].len, be[j].len));
            }
        const bool pass = !(worst < cfg.a_min);
        rows.push_back({"bridge.segment_separation", pass,
                        std::isfinite(worst) ? worst : 1.0, cfg.a_min});
    }

    // Bridges meet the curve only at anchors: interiors of bridge edges keep
    // a positive distance from the base curve unless anchor-incident.
    {
        bool pass = true;
        double worst = std::numeric_limits<double>::infinity();
        for (size_t e = 0; e < net.gedges.size() && pass; ++e) {
            if (net.etag[e] != 1) continue;
            const bool touches_anchor = net.node_on_curve[net.gedges[e][0]] ||
                                        net.node_on_curve[net.gedges[e][1]];
            Vec a = net.nodes.get(net.gedges[e][0]);
            Vec b = net.nodes.get(net.gedges[e][1]);
            // Sample the open edge; for anchor stubs exclude the end cap.
            for (int s = 1; s < 16; ++s) {
                const double t = s / 16.0;
                Vec p = lerp(a, b, t);
                const double d = dist_fn(p, -1.0);
                const double cap = touches_anchor ? 0.9 * std::min(t, 1.0 - t) * net.elen[e]
                                                  : 1e-12;
                if (d <= std::min(cap, net.elen[e])) {
                    // anchor stubs approach the curve linearly; flag only
                    // a genuine crossing
                    if (!touches_anchor || d < 1e-12) pass = false;
                }
                worst = std::min(worst, d);
            }
        }
        rows.push_back({"bridge.meets_curve_only_at_anchors", pass,
                        std::isfinite(worst) ? worst : 1.0, 0.0});
    }

    // H^1 additivity: the merged graph length equals base + bridge sums.
    {
        double glen = 0.0;
        for (double l : net.elen) glen += l;
        const double expect = net.base_length + net.bridge_length;
        const double err = std::abs(glen - expect) / expect;
        rows.push_back({"network.h1_additivity", err <= 1e-9, err, 1e-9});
    }
    return rows;
}

std::vector<AuditRow> audit_stopping_rule(const CubeTree& tree, const BetaEngine& engine,
                                          const ClassifyResult& cls, const Config& cfg) {
    std::vector<AuditRow> rows;
    bool pass = true;
    double worst = 0.0;
    for (const auto& rec : cls.flat_bad_records) {
        // Recompute the accumulator by walking up to the restart marker.
        double acc = 0.0, max_term = 0.0;
        int32_t cur = rec.node;
        while (true) {
            const double b = engine.beta_cube(cur, cfg.M);
            acc += b * b;
            max_term = std::max(max_term, b * b);
            int32_t p = tree.nodes[cur].parent;
            if (p < 0) break;
            const CubeClass pc = tree.nodes[p].cls;
            if (pc == CubeClass::NonFlat || pc == CubeClass::FlatBad || p == tree.root()) break;
            cur = p;
        }
        const bool in_window = acc > cfg.eps && acc <= cfg.eps + max_term + 1e-12;
        const bool matches = std::abs(acc - rec.accumulator) <= 1e-9 * std::max(1.0, acc);
        if (!in_window || !matches) pass = false;
        worst = std::max(worst, acc);
    }
    rows.push_back({"classify.stop_accumulator_window", pass,
                    cls.flat_bad_records.empty() ? 0.0 : worst, cfg.eps});
    return rows;
}

std::vector<AuditRow> audit_cube_sums(const CubeTree& tree, const BetaEngine& engine,
                                      const Config& cfg, uint64_t seed, int pairs,
                                      double* c_bj_out) {
    std::vector<AuditRow> rows;
    const CurveSampling& samp = engine.sampling();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double c_bj = 0.0;
    int tested = 0;
    for (int it = 0; it < pairs * 10 && tested < pairs; ++it) {
        const size_t i = static_cast<size_t>(uni(rng) * samp.size()) % samp.size();
        const size_t j = static_cast<size_t>(uni(rng) * samp.size()) % samp.size();
        if (i == j) continue;
        Vec x = samp.pts.get(i), y = samp.pts.get(j);
        const double r = dist(x, y);
        if (r < 8.0 * samp.pitch) continue;
        Ball R(midpoint(x, y), 0.5 * r);
        if (engine.beta_ball(R) >= cfg.eps) continue;
        ++tested;
        // Lens content and its diameter.
        std::vector<int32_t> lens_samples;
        samp.grid.query_ball(R.center, r, lens_samples);
        double lens_diam = 0.0;
        Vec far = x;
        for (int sweep = 0; sweep < 4; ++sweep) {
            double best = 0.0;
            Vec next = far;
            for (int32_t s : lens_samples) {
                VecView p = samp.pts[s];
                if (dist(p, x) > r || dist(p, y) > r) continue;
                const double d = dist(p, far);
                if (d > best) {
                    best = d;
                    next = samp.pts.get(s);
                }
            }
            lens_diam = std::max(lens_diam, best);
            far = next;
        }
        // Maximal not-flat-good cubes centered in the closed lens.
        std::vector<int32_t> cand;
        for (size_t id = 0; id < tree.nodes.size(); ++id) {
            const auto& n = tree.nodes[id];
            if (n.cls == CubeClass::FlatGood || n.cls == CubeClass::Unclassified) continue;
            VecView c = tree.center(static_cast<int32_t>(id));
            if (dist(c, x) > r * (1.0 + 1e-12) || dist(c, y) > r * (1.0 + 1e-12)) continue;
            if (n.diam > lens_diam) continue;
            cand.push_back(static_cast<int32_t>(id));
        }
        std::set<int32_t> cand_set(cand.begin(), cand.end());
        double sum = 0.0;
        for (int32_t id : cand) {
            bool maximal = true;
            for (int32_t p = tree.nodes[id].parent; p >= 0; p = tree.nodes[p].parent)
                if (cand_set.count(p)) {
                    maximal = false;
                    break;
                }
            if (maximal) sum += tree.nodes[id].diam;
        }
        c_bj = std::max(c_bj, sum / r);
    }
    if (c_bj_out) *c_bj_out = c_bj;
    rows.push_back({"bridge.lens_cube_sum", c_bj <= 50.0, c_bj, 50.0});
    return rows;
}

}  // namespace qcx
