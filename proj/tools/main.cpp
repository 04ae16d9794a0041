// Command-line front end: build the augmented network for an input set, verify
// a dumped network, render it to SVG, or run the brute-force self checks.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <random>

#include "qcx/beta.hpp"
#include "qcx/io.hpp"

namespace {

qcx::Config make_config(const std::string& config_path, const std::string& preset,
                        uint64_t seed, int kmax) {
    qcx::Config cfg = qcx::Config::by_name(preset);
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw qcx::Error("config", "cannot open " + config_path);
        qcx::Json j;
        in >> j;
        cfg = qcx::config_from_json(j);
    }
    cfg.seed = seed;
    if (kmax > 0) cfg.kmax_override = kmax;
    return cfg;
}

qcx::InputSpec make_input(const std::string& path) {
    qcx::InputSpec spec;
    spec.path = path;
    spec.kind = path.size() > 4 && path.substr(path.size() - 4) == ".csv"
                    ? qcx::InputSpec::Kind::PointCloud
                    : qcx::InputSpec::Kind::Polyline;
    return spec;
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path);
    if (!out) throw qcx::Error("output", "cannot write " + path);
    out << data;
}

int run_oracle_checks() {
    // Beta: exact slab width against the direction-grid evaluation.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    int bad = 0;
    for (int it = 0; it < 50; ++it) {
        std::vector<qcx::Vec> pts;
        const int n = 3 + static_cast<int>((uni(rng) + 1.0) * 4);
        for (int i = 0; i < n; ++i) pts.push_back({uni(rng), uni(rng)});
        qcx::Ball B(qcx::Vec{0.0, 0.0}, 2.0);
        const double exact = qcx::beta_number(B, pts);
        // Grid route: brute minimum over directions.
        double grid = 1e300;
        for (const auto& u : qcx::sphere_directions(2, 4096)) {
            double lo = 1e300, hi = -1e300;
            for (const auto& p : pts) {
                const double t = p[0] * u[1] - p[1] * u[0];
                lo = std::min(lo, t);
                hi = std::max(hi, t);
            }
            grid = std::min(grid, 0.5 * (hi - lo));
        }
        grid = std::min(grid / B.diameter(), 0.5);
        if (std::abs(grid - exact) > 1e-3 * std::max(grid, 1e-9)) ++bad;
    }
    std::cout << "beta slab-vs-grid mismatches: " << bad << "/50\n";
    // MST: incremental Prim against the full Kruskal edge scan.
    int mst_bad = 0;
    for (int it = 0; it < 20; ++it) {
        std::vector<qcx::Vec> pts;
        for (int i = 0; i < 16; ++i) pts.push_back({uni(rng), uni(rng)});
        qcx::PolyCurve prim = qcx::mst_connect(pts);
        // Kruskal.
        struct E {
            double w;
            int a, b;
        };
        std::vector<E> edges;
        for (int i = 0; i < 16; ++i)
            for (int j = i + 1; j < 16; ++j)
                edges.push_back({qcx::dist(pts[i], pts[j]), i, j});
        std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) { return a.w < b.w; });
        std::vector<int> par(16);
        for (int i = 0; i < 16; ++i) par[i] = i;
        std::function<int(int)> find = [&](int a) { return par[a] == a ? a : par[a] = find(par[a]); };
        double kruskal = 0.0;
        for (const auto& e : edges) {
            if (find(e.a) == find(e.b)) continue;
            par[find(e.a)] = find(e.b);
            kruskal += e.w;
        }
        if (std::abs(kruskal - prim.length()) > 1e-9) ++mst_bad;
    }
    std::cout << "mst prim-vs-kruskal mismatches: " << mst_bad << "/20\n";
    return (bad == 0 && mst_bad == 0) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quasiconvex network builder"};
    app.require_subcommand(1);

    std::string input_path, config_path, preset = "default";
    std::string report_path, svg_path, dump_path, network_path;
    uint64_t seed = 12345;
    int kmax = -1;
    bool cubes_layer = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config JSON file");
        sub->add_option("--preset", preset, "config preset: default|strict");
        sub->add_option("--seed", seed, "seed for verification pair sampling");
        sub->add_option("--kmax", kmax, "override net resolution depth");
    };

    auto* build = app.add_subcommand("build", "run the full pipeline on an input");
    build->add_option("input", input_path, "polyline .json or point-cloud .csv")->required();
    build->add_option("--report", report_path, "write the JSON report here");
    build->add_option("--dump", dump_path, "write the network dump here");
    build->add_option("--svg", svg_path, "write an SVG rendering here");
    build->add_flag("--cubes", cubes_layer, "include the cube outline layer in the SVG");
    add_common(build);

    auto* verify = app.add_subcommand("verify", "rebuild and compare against a network dump");
    verify->add_option("input", input_path, "original input file")->required();
    verify->add_option("network", network_path, "network dump to verify")->required();
    add_common(verify);

    auto* render = app.add_subcommand("render", "render an input's network to SVG");
    render->add_option("input", input_path, "polyline .json or point-cloud .csv")->required();
    render->add_option("--svg", svg_path, "output SVG path")->required();
    render->add_flag("--cubes", cubes_layer, "include the cube outline layer");
    add_common(render);

    auto* oracle = app.add_subcommand("oracle", "run the brute-force self checks");
    (void)oracle;

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("oracle")) return run_oracle_checks();

        const qcx::Config cfg = make_config(config_path, preset, seed, kmax);
        const qcx::PolyCurve input = qcx::load_input(make_input(input_path));
        qcx::PipelineResult res = qcx::run_pipeline(input, cfg);

        if (app.got_subcommand("build")) {
            bool ok = true;
            for (const auto& a : res.audits) ok = ok && a.pass;
            if (!report_path.empty()) write_file(report_path, res.report.dump(2) + "\n");
            if (!dump_path.empty()) write_file(dump_path, qcx::dump_network(res).dump(2) + "\n");
            if (!svg_path.empty()) write_file(svg_path, qcx::render_svg(res, cubes_layer));
            std::cout << "length ratio " << res.net.length_ratio() << ", max stretch "
                      << res.stretch.max_stretch << ", bridges " << res.net.bridges.size()
                      << "\n";
            if (!ok) {
                for (const auto& a : res.audits)
                    if (!a.pass)
                        std::cerr << "invariant failed: " << a.name << " measured " << a.measured
                                  << " bound " << a.bound << "\n";
                return 1;
            }
            return 0;
        }
        if (app.got_subcommand("verify")) {
            std::ifstream in(network_path);
            if (!in) throw qcx::Error("input", "cannot open " + network_path);
            qcx::Json nj;
            in >> nj;
            qcx::LoadedNetwork loaded = qcx::load_network(nj);
            qcx::Json fresh = qcx::dump_network(res);
            qcx::LoadedNetwork rebuilt = qcx::load_network(fresh);
            auto mismatch = [&](const std::string& what) {
                std::cerr << "verify: mismatch in " << what << "\n";
                return 1;
            };
            if (loaded.nodes.size() != rebuilt.nodes.size()) return mismatch("vertex count");
            if (loaded.edges.size() != rebuilt.edges.size()) return mismatch("edge count");
            if (loaded.cube_classes != rebuilt.cube_classes) return mismatch("cube labels");
            for (size_t i = 0; i < loaded.nodes.size(); ++i)
                if (qcx::dist(loaded.nodes[i], rebuilt.nodes[i]) > 1e-12)
                    return mismatch("vertex coordinates");
            bool ok = true;
            for (const auto& a : res.audits) ok = ok && a.pass;
            std::cout << "verify: network matches; invariants "
                      << (ok ? "pass" : "FAIL") << "\n";
            return ok ? 0 : 1;
        }
        if (app.got_subcommand("render")) {
            write_file(svg_path, qcx::render_svg(res, cubes_layer));
            return 0;
        }
    } catch (const qcx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.stage() == "input" || e.stage() == "config" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
