#include "qcx/io.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace qcx {

// ---------------------------------------------------------------------------
// Input
// ---------------------------------------------------------------------------

PolyCurve parse_polyline_json(const Json& j) {
    PolyCurve c;
    if (!j.contains("vertices") || !j["vertices"].is_array() || j["vertices"].empty())
        throw Error("input", "polyline JSON needs a nonempty 'vertices' array");
    const auto& vs = j["vertices"];
    c.dim = static_cast<int>(vs[0].size());
    for (const auto& v : vs) {
        if (static_cast<int>(v.size()) != c.dim)
            throw Error("input", "inconsistent vertex dimension");
        for (const auto& x : v) c.vx.push_back(x.get<double>());
    }
    if (!j.contains("edges")) throw Error("input", "polyline JSON needs 'edges'");
    for (const auto& e : j["edges"])
        c.edges.push_back({e[0].get<int>(), e[1].get<int>()});
    c.validate();
    return c;
}

PolyCurve mst_connect(const std::vector<Vec>& points) {
    if (points.empty()) throw Error("input", "empty point cloud");
    PolyCurve c;
    c.dim = static_cast<int>(points[0].size());
    for (const auto& p : points)
        c.vx.insert(c.vx.end(), p.begin(), p.end());
    if (points.size() == 1) throw Error("input", "point cloud needs >= 2 points");
    // Prim, O(n^2); exact and deterministic.
    const size_t n = points.size();
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<int> from(n, -1);
    std::vector<bool> used(n, false);
    used[0] = true;
    for (size_t i = 1; i < n; ++i) {
        best[i] = dist(points[0], points[i]);
        from[i] = 0;
    }
    for (size_t it = 1; it < n; ++it) {
        size_t pick = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < n; ++i)
            if (!used[i] && best[i] < bd) {
                bd = best[i];
                pick = i;
            }
        used[pick] = true;
        c.edges.push_back({from[pick], static_cast<int>(pick)});
        for (size_t i = 0; i < n; ++i)
            if (!used[i]) {
                const double d = dist(points[pick], points[i]);
                if (d < best[i]) {
                    best[i] = d;
                    from[i] = static_cast<int>(pick);
                }
            }
    }
    c.validate();
    return c;
}

PolyCurve load_input(const InputSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw Error("input", "cannot open " + spec.path);
    if (spec.kind == InputSpec::Kind::Polyline) {
        Json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw Error("input", std::string("invalid JSON: ") + e.what());
        }
        return parse_polyline_json(j);
    }
    std::vector<Vec> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        Vec p;
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell.empty()) continue;
            p.push_back(std::stod(cell));
        }
        if (!p.empty()) pts.push_back(std::move(p));
    }
    if (pts.empty()) throw Error("input", "empty point cloud file");
    for (const auto& p : pts)
        if (p.size() != pts[0].size()) throw Error("input", "ragged CSV rows");
    return mst_connect(pts);
}

std::pair<PolyCurve, Transform> rescale_to_unit(const PolyCurve& curve) {
    curve.validate();
    Transform t;
    const double diam = curve.diameter();
    if (!(diam > 0)) throw Error("input", "degenerate curve diameter");
    // Land strictly inside (1/2, 1] so the level-0 net is a single point even
    // when two vertices attain the diameter exactly.
    t.scale = diam / (1.0 - 1e-9);
    t.offset.assign(curve.dim, 0.0);
    Vec lo(curve.dim, std::numeric_limits<double>::infinity());
    Vec hi(curve.dim, -std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < curve.vertex_count(); ++i) {
        VecView v = curve.vertex(i);
        for (int k = 0; k < curve.dim; ++k) {
            lo[k] = std::min(lo[k], v[k]);
            hi[k] = std::max(hi[k], v[k]);
        }
    }
    for (int k = 0; k < curve.dim; ++k) t.offset[k] = 0.5 * (lo[k] + hi[k]);
    PolyCurve out = curve;
    for (size_t i = 0; i < curve.vertex_count(); ++i) {
        Vec p = t.to_internal(curve.vertex(i));
        for (int k = 0; k < curve.dim; ++k) out.vx[i * curve.dim + k] = p[k];
    }
    return {out, t};
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

int derive_k_max(const PolyCurve& rescaled, const Config& cfg) {
    if (cfg.kmax_override > 0) return std::min(cfg.kmax_override, 14);
    const double feature = rescaled.min_edge_length() / 4.0;
    int k = 1;
    while (k < 14 && std::ldexp(1.0, -k) >= feature) ++k;
    return std::max(k, 4);
}

namespace {
struct StageTimer {
    bool on = std::getenv("QCX_TIMING") != nullptr;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    void mark(const char* stage) {
        if (!on) return;
        const auto t1 = std::chrono::steady_clock::now();
        std::cerr << "[stage] " << stage << " "
                  << std::chrono::duration<double>(t1 - t0).count() << "s\n";
        t0 = t1;
    }
};
}  // namespace

PipelineResult run_pipeline(const PolyCurve& input, const Config& cfg) {
    cfg.validate();
    StageTimer timer;
    PipelineResult r;
    r.cfg = cfg;
    auto [curve, transform] = rescale_to_unit(input);
    r.curve = std::move(curve);
    r.transform = transform;
    r.k_max = derive_k_max(r.curve, cfg);
    r.pitch = std::ldexp(1.0, -r.k_max - 2);

    r.samp.build(r.curve, r.pitch);
    r.dist_fn.attach(r.samp);
    r.nets = build_delta_nets(r.samp, r.k_max);
    r.tree = build_cube_tree(r.nets, r.samp, cfg.J, cfg.cQ);
    r.engine = std::make_unique<BetaEngine>(r.samp, r.nets, cfg);
    r.engine->attach_tree(r.tree);
    r.classes = classify(r.tree, *r.engine, cfg);

    // Whitney depth: deep enough for the deepest bridge-relevant scale plus
    // the apex offset, but never beyond the sampling resolution.
    int deepest = 0;
    for (const auto& rec : r.classes.flat_bad_records)
        deepest = std::max(deepest, r.tree.net_level(r.tree.nodes[rec.node].level));
    for (int k = 0; k <= r.nets.k_max; ++k) {
        const auto& lvl = r.nets.level(k);
        for (size_t i = 0; i < lvl.pts.size(); ++i)
            if (r.engine->beta_net_ball(k, static_cast<int32_t>(i), cfg.M) >
                cfg.delta * cfg.eps) {
                deepest = std::max(deepest, k + cfg.k1);
                break;  // one hit per level is enough to set the depth
            }
    }
    const int k_max_w = std::min(r.k_max, std::max(4, deepest + 1));
    r.whitney = build_whitney_net(r.curve, r.samp, r.dist_fn, cfg.k0, k_max_w);

    FilterGraph filter;
    filter.nodes = PointSet(r.curve.dim);
    filter.snap_radius = r.pitch;
    filter.grid.attach(filter.nodes, std::max(r.pitch * 2.0, 1e-12));
    {
        // Base curve at the subdivision pitch.
        for (size_t e = 0; e < r.curve.edges.size(); ++e) {
            Vec a = r.curve.vertex_vec(r.curve.edges[e][0]);
            Vec b = r.curve.vertex_vec(r.curve.edges[e][1]);
            const double len = dist(a, b);
            const int n = std::max(1, static_cast<int>(std::ceil(len / r.pitch)));
            int32_t prev = -1;
            for (int i = 0; i <= n; ++i) {
                Vec p = lerp(a, b, static_cast<double>(i) / n);
                int32_t id = (i == 0 || i == n) ? filter.snap(p) : -1;
                if (id < 0 || (id >= 0 && dist(filter.nodes[id], p) > 1e-12))
                    id = filter.add_node(p);
                if (prev >= 0) filter.add_edge(prev, id);
                prev = id;
            }
        }
    }

    BridgeContext bctx;
    bctx.curve = &r.curve;
    bctx.samp = &r.samp;
    bctx.dist_fn = &r.dist_fn;
    bctx.nets = &r.nets;
    bctx.whitney = &r.whitney;
    bctx.tree = &r.tree;
    bctx.engine = r.engine.get();
    bctx.cfg = cfg;
    bctx.filter = &filter;
    BridgeSet bridges = build_bridges(bctx, r.classes);
    r.bridge_stats = bridges;  // copy of the counters (bridges moved next)
    r.bridge_stats.bridges.clear();
    r.net = assemble(r.curve, std::move(bridges), r.samp);

    r.graph.build(r.net, r.pitch);
    {
        AugmentedNetwork raw = assemble(r.curve, BridgeSet{}, r.samp);
        r.raw_graph.build(raw, r.pitch);
    }
    r.stretch_raw = measure_stretch(r.raw_graph, cfg.n_rand_pairs, cfg.seed);
    r.stretch = measure_stretch(r.graph, cfg.n_rand_pairs, cfg.seed);
    r.tst = compute_beta_sum(*r.engine, cfg.M);

    // Invariant suite.
    auto push_rows = [&](std::vector<AuditRow> rows) {
        for (auto& row : rows) r.audits.push_back(std::move(row));
    };
    push_rows(audit_delta_nets(r.nets, r.samp));
    push_rows(audit_whitney_net(r.whitney, r.curve, r.samp, r.dist_fn, cfg.seed));
    push_rows(audit_cube_tree(r.tree, cfg.seed, 10000));
    push_rows(audit_bridges(r.net, r.whitney, r.dist_fn, cfg));
    push_rows(audit_stopping_rule(r.tree, *r.engine, r.classes, cfg));
    push_rows(audit_cube_sums(r.tree, *r.engine, cfg, cfg.seed, 60));

    // Report.
    Json rep;
    rep["config"] = config_to_json(cfg);
    rep["input"] = {{"dimension", r.curve.dim},
                    {"vertices", r.curve.vertex_count()},
                    {"edges", r.curve.edges.size()},
                    {"k_max", r.k_max},
                    {"whitney_k0", r.whitney.k0},
                    {"whitney_depth", r.whitney.k_max},
                    {"rescale", {{"scale", r.transform.scale}, {"offset", r.transform.offset}}}};
    rep["length"] = {{"gamma", r.net.base_length},
                     {"bridges_total", r.net.bridge_length},
                     {"gamma_tilde", r.net.base_length + r.net.bridge_length},
                     {"ratio", r.net.length_ratio()}};
    auto stretch_json = [](const StretchStats& s) {
        return Json{{"max", s.max_stretch},
                    {"median", s.median},
                    {"p99", s.p99},
                    {"pairs", s.pairs},
                    {"worst_pair", {{"a", s.worst_a}, {"b", s.worst_b},
                                    {"euclid", s.worst_euclid}, {"graph", s.worst_graph}}}};
    };
    rep["stretch"] = {{"raw", stretch_json(r.stretch_raw)}, {"augmented", stretch_json(r.stretch)}};
    rep["cube_classes"] = {{"flat_good", r.classes.flat_good},
                           {"flat_bad", r.classes.flat_bad},
                           {"non_flat", r.classes.non_flat},
                           {"total", r.tree.nodes.size()},
                           {"root_beta", r.classes.root_beta}};
    {
        Json levels = Json::array();
        for (size_t k = 0; k < r.tst.level_sums.size(); ++k)
            levels.push_back({{"k", k}, {"sum", r.tst.level_sums[k]}});
        rep["beta_functional"] = {{"M", r.tst.M},
                                  {"diameter", r.tst.diameter_term},
                                  {"levels", levels},
                                  {"total", r.tst.total},
                                  {"ratio_to_length", r.tst.total / r.net.base_length}};
    }
    {
        Json rows = Json::array();
        for (const auto& a : r.audits)
            rows.push_back({{"name", a.name}, {"pass", a.pass}, {"measured", a.measured},
                            {"bound", a.bound}});
        rep["invariants"] = rows;
    }
    rep["bridges"] = {{"count", r.net.bridges.size()},
                      {"total_length", r.net.bridge_length},
                      {"covered_pairs", r.net.covered.size()},
                      {"max_flatbad_len_ratio", r.bridge_stats.max_flatbad_len_ratio},
                      {"max_straighten_ratio", r.bridge_stats.max_straighten_ratio}};
    rep["flags"] = {{"bridge_skips", r.bridge_stats.flagged_skips},
                    {"widened_searches", r.bridge_stats.widened_searches},
                    {"unbridged_pairs", r.bridge_stats.unbridged_pairs},
                    {"redundant_pairs", r.bridge_stats.redundant_pairs},
                    {"anchor_cap_hits", r.bridge_stats.anchor_cap_hits}};
    r.report = std::move(rep);
    return r;
}

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

Json config_to_json(const Config& c) {
    return Json{{"eps", c.eps},       {"delta", c.delta},
                {"M", c.M},           {"Mp", c.Mp},
                {"J", c.J},           {"k0", c.k0},
                {"k1", c.k1},         {"alpha", c.alpha},
                {"phi", c.phi},       {"lambda", c.lambda},
                {"C", c.C},           {"cQ", c.cQ},
                {"a_min", c.a_min},   {"c_len", c.c_len},
                {"c_raw_leg", c.c_raw_leg}, {"c_straight", c.c_straight},
                {"theta_red", c.theta_red}, {"beta_dirs", c.beta_dirs},
                {"tau_beta", c.tau_beta},   {"kmax_override", c.kmax_override},
                {"seed", c.seed},     {"n_rand_pairs", c.n_rand_pairs},
                {"preset", c.preset}};
}

Config config_from_json(const Json& j) {
    Config c;
    if (j.contains("preset")) c = Config::by_name(j["preset"].get<std::string>());
    auto opt = [&](const char* k, auto& field) {
        if (j.contains(k)) field = j[k].get<std::decay_t<decltype(field)>>();
    };
    opt("eps", c.eps);
    opt("delta", c.delta);
    opt("M", c.M);
    opt("Mp", c.Mp);
    opt("J", c.J);
    opt("k0", c.k0);
    opt("k1", c.k1);
    opt("alpha", c.alpha);
    opt("phi", c.phi);
    opt("lambda", c.lambda);
    opt("C", c.C);
    opt("cQ", c.cQ);
    opt("a_min", c.a_min);
    opt("c_len", c.c_len);
    opt("c_raw_leg", c.c_raw_leg);
    opt("c_straight", c.c_straight);
    opt("theta_red", c.theta_red);
    opt("beta_dirs", c.beta_dirs);
    opt("tau_beta", c.tau_beta);
    opt("kmax_override", c.kmax_override);
    opt("seed", c.seed);
    opt("n_rand_pairs", c.n_rand_pairs);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Network dump / reload
// ---------------------------------------------------------------------------

Json dump_network(const PipelineResult& r) {
    Json j;
    j["dimension"] = r.curve.dim;
    j["transform"] = {{"scale", r.transform.scale}, {"offset", r.transform.offset}};
    Json verts = Json::array();
    for (size_t i = 0; i < r.net.nodes.size(); ++i)
        verts.push_back(r.transform.to_original(r.net.nodes[i]));
    j["vertices"] = std::move(verts);
    Json edges = Json::array();
    for (size_t e = 0; e < r.net.gedges.size(); ++e)
        edges.push_back({r.net.gedges[e][0], r.net.gedges[e][1],
                         r.net.etag[e] == 0 ? "original" : "bridge"});
    j["edges"] = std::move(edges);
    Json bridges = Json::array();
    for (const auto& b : r.net.bridges) {
        Json path = Json::array();
        for (const auto& p : b.path) path.push_back(r.transform.to_original(p));
        Json anchors = Json::array();
        for (int32_t s : b.anchor_samples)
            anchors.push_back(r.transform.to_original(r.samp.pts[s]));
        bridges.push_back({{"kind", b.kind == Bridge::Kind::FlatBad ? "flat_bad" : "non_flat"},
                           {"cube", b.cube_node},
                           {"ball_level", b.ball_level},
                           {"ball_pt", b.ball_pt},
                           {"ball_pt2", b.ball_pt2},
                           {"scale", b.scale},
                           {"apex", r.transform.to_original(b.apex)},
                           {"anchors", anchors},
                           {"path", path},
                           {"length", b.length}});
    }
    j["bridges"] = std::move(bridges);
    Json cubes = Json::array();
    for (size_t i = 0; i < r.tree.nodes.size(); ++i) {
        const auto& n = r.tree.nodes[i];
        cubes.push_back({{"id", i},
                         {"level", n.level},
                         {"center", r.transform.to_original(r.tree.center(static_cast<int32_t>(i)))},
                         {"parent", n.parent},
                         {"class", cube_class_name(n.cls)}});
    }
    j["cubes"] = {{"J", r.tree.J}, {"cQ", r.tree.cQ}, {"nodes", std::move(cubes)}};
    j["config"] = config_to_json(r.cfg);
    return j;
}

LoadedNetwork load_network(const Json& j) {
    LoadedNetwork n;
    n.dim = j.at("dimension").get<int>();
    n.nodes = PointSet(n.dim);
    for (const auto& v : j.at("vertices")) {
        Vec p = v.get<Vec>();
        n.nodes.push(p);
    }
    for (const auto& e : j.at("edges")) {
        n.edges.push_back({e[0].get<int32_t>(), e[1].get<int32_t>()});
        n.etag.push_back(e[2].get<std::string>() == "original" ? 0 : 1);
    }
    for (const auto& c : j.at("cubes").at("nodes")) {
        const std::string cls = c.at("class").get<std::string>();
        if (cls == "flat_good")
            n.cube_classes.push_back(CubeClass::FlatGood);
        else if (cls == "flat_bad")
            n.cube_classes.push_back(CubeClass::FlatBad);
        else if (cls == "non_flat")
            n.cube_classes.push_back(CubeClass::NonFlat);
        else
            n.cube_classes.push_back(CubeClass::Unclassified);
    }
    n.config = j.at("config");
    return n;
}

// ---------------------------------------------------------------------------
// Schema-lite validation
// ---------------------------------------------------------------------------

bool validate_against_schema(const Json& doc, const Json& schema, std::string* err) {
    auto fail = [&](const std::string& m) {
        if (err) *err = m;
        return false;
    };
    if (schema.contains("type")) {
        const std::string t = schema["type"].get<std::string>();
        const bool ok = (t == "object" && doc.is_object()) || (t == "array" && doc.is_array()) ||
                        (t == "number" && doc.is_number()) ||
                        (t == "integer" && doc.is_number_integer()) ||
                        (t == "string" && doc.is_string()) || (t == "boolean" && doc.is_boolean());
        if (!ok) return fail("expected type " + t);
    }
    if (schema.contains("required")) {
        for (const auto& k : schema["required"]) {
            if (!doc.contains(k.get<std::string>()))
                return fail("missing required key " + k.get<std::string>());
        }
    }
    if (schema.contains("properties") && doc.is_object()) {
        for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
            if (doc.contains(it.key())) {
                if (!validate_against_schema(doc[it.key()], it.value(), err)) return false;
            }
        }
    }
    if (schema.contains("items") && doc.is_array()) {
        for (const auto& el : doc)
            if (!validate_against_schema(el, schema["items"], err)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

std::string render_svg(const PipelineResult& r, bool draw_cubes) {
    if (r.curve.dim > 2)
        std::cerr << "render: projecting " << r.curve.dim
                  << "-dimensional data onto the first two coordinates\n";
    double lo0 = 1e300, lo1 = 1e300, hi0 = -1e300, hi1 = -1e300;
    for (size_t i = 0; i < r.net.nodes.size(); ++i) {
        VecView p = r.net.nodes[i];
        lo0 = std::min(lo0, p[0]);
        hi0 = std::max(hi0, p[0]);
        lo1 = std::min(lo1, p[1]);
        hi1 = std::max(hi1, p[1]);
    }
    const double pad = 0.05 * std::max(hi0 - lo0, hi1 - lo1);
    std::ostringstream ss;
    ss.precision(8);
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << lo0 - pad << " "
       << lo1 - pad << " " << (hi0 - lo0 + 2 * pad) << " " << (hi1 - lo1 + 2 * pad) << "\">\n";
    const double sw = std::max(hi0 - lo0, hi1 - lo1) / 400.0;
    if (draw_cubes) {
        ss << "<g id=\"cubes\" fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"" << sw * 0.5
           << "\">\n";
        for (size_t i = 0; i < r.tree.nodes.size(); ++i) {
            VecView c = r.tree.center(static_cast<int32_t>(i));
            ss << "<circle cx=\"" << c[0] << "\" cy=\"" << c[1] << "\" r=\""
               << r.tree.scale(r.tree.nodes[i].level) << "\"/>\n";
        }
        ss << "</g>\n";
    }
    ss << "<g id=\"gamma\" stroke=\"black\" stroke-width=\"" << sw
       << "\" fill=\"none\" stroke-linecap=\"round\">\n";
    for (size_t e = 0; e < r.net.gedges.size(); ++e) {
        if (r.net.etag[e] != 0) continue;
        VecView a = r.net.nodes[r.net.gedges[e][0]];
        VecView b = r.net.nodes[r.net.gedges[e][1]];
        ss << "<line x1=\"" << a[0] << "\" y1=\"" << a[1] << "\" x2=\"" << b[0] << "\" y2=\""
           << b[1] << "\"/>\n";
    }
    ss << "</g>\n";
    auto bridge_layer = [&](Bridge::Kind kind, const char* id, const char* color) {
        ss << "<g id=\"" << id << "\" stroke=\"" << color << "\" stroke-width=\"" << sw
           << "\" fill=\"none\">\n";
        for (size_t e = 0; e < r.net.gedges.size(); ++e) {
            if (r.net.etag[e] != 1) continue;
            if (r.net.bridges[r.net.ebridge[e]].kind != kind) continue;
            VecView a = r.net.nodes[r.net.gedges[e][0]];
            VecView b = r.net.nodes[r.net.gedges[e][1]];
            ss << "<line x1=\"" << a[0] << "\" y1=\"" << a[1] << "\" x2=\"" << b[0]
               << "\" y2=\"" << b[1] << "\"/>\n";
        }
        ss << "</g>\n";
    };
    bridge_layer(Bridge::Kind::FlatBad, "bridges_flat_bad", "#d62728");
    bridge_layer(Bridge::Kind::NonFlat, "bridges_non_flat", "#1f77b4");
    if (!r.stretch.worst_a.empty()) {
        ss << "<g id=\"worst_pair\" stroke=\"#ff7f0e\" stroke-width=\"" << sw * 1.5
           << "\" stroke-dasharray=\"" << sw * 3 << "\">\n<line x1=\"" << r.stretch.worst_a[0]
           << "\" y1=\"" << r.stretch.worst_a[1] << "\" x2=\"" << r.stretch.worst_b[0]
           << "\" y2=\"" << r.stretch.worst_b[1] << "\"/>\n</g>\n";
    }
    ss << "</svg>\n";
    return ss.str();
}

}  // namespace qcx
