#pragma once

#include <json.hpp>

#include "qcx/routing.hpp"

namespace qcx {

using Json = nlohmann::ordered_json;

/// Affine normalization applied before construction: internal = (orig - offset) / scale,
/// chosen so the internal diameter is 1. Inverted exactly on output.
struct Transform {
    double scale = 1.0;
    Vec offset;

    Vec to_internal(VecView p) const {
        Vec r(p.size());
        for (size_t i = 0; i < p.size(); ++i) r[i] = (p[i] - offset[i]) / scale;
        return r;
    }
    Vec to_original(VecView p) const {
        Vec r(p.size());
        for (size_t i = 0; i < p.size(); ++i) r[i] = p[i] * scale + offset[i];
        return r;
    }
};

struct InputSpec {
    std::string path;
    enum class Kind { Polyline, PointCloud } kind = Kind::Polyline;
};

/// Load a polyline JSON {"vertices": [[...]], "edges": [[i,j]]} or a CSV point
/// cloud (one point per row); clouds are pre-connected by their Euclidean
/// minimum spanning tree.
PolyCurve load_input(const InputSpec& spec);
PolyCurve parse_polyline_json(const Json& j);
PolyCurve mst_connect(const std::vector<Vec>& points);

/// Rescale so the diameter is exactly 1; records the inverse map.
std::pair<PolyCurve, Transform> rescale_to_unit(const PolyCurve& curve);

/// Everything the pipeline produced, kept alive together for verification.
struct PipelineResult {
    Config cfg;
    Transform transform;
    PolyCurve curve;  // rescaled
    CurveSampling samp;
    CurveDist dist_fn;
    DeltaNets nets;
    CubeTree tree;
    std::unique_ptr<BetaEngine> engine;
    WhitneyNet whitney;
    ClassifyResult classes;
    AugmentedNetwork net;
    SubdividedGraph graph;       // augmented, subdivided at 2^{-k_max}
    SubdividedGraph raw_graph;   // base curve only
    StretchStats stretch_raw;
    StretchStats stretch;
    TstFunctional tst;
    std::vector<AuditRow> audits;
    BridgeSet bridge_stats;      // counters only; bridges moved into net
    int k_max = 0;
    double pitch = 0.0;
    Json report;
};

int derive_k_max(const PolyCurve& rescaled, const Config& cfg);

/// Deterministic end-to-end build: nets -> cubes -> beta -> classify ->
/// bridge -> assemble -> verify -> report.
PipelineResult run_pipeline(const PolyCurve& input, const Config& cfg);

Json config_to_json(const Config& c);
Config config_from_json(const Json& j);

/// Network dump: base + bridges + cube labels + config, in original coords.
Json dump_network(const PipelineResult& r);
/// Reload the dumped graph (vertices/edges with tags) for round-trip checks.
struct LoadedNetwork {
    int dim = 0;
    PointSet nodes;
    std::vector<std::array<int32_t, 2>> edges;
    std::vector<int8_t> etag;
    std::vector<CubeClass> cube_classes;
    Json config;
};
LoadedNetwork load_network(const Json& j);

/// Minimal JSON-schema checker supporting type/required/properties/items —
/// enough to validate the report against the checked-in schema.
bool validate_against_schema(const Json& doc, const Json& schema, std::string* err = nullptr);

/// SVG rendering: base curve in black, bridges colored by provenance, the
/// worst-stretch pair highlighted, cube outlines optional. For d > 2 the first
/// two coordinates are used (with a warning on stderr).
std::string render_svg(const PipelineResult& r, bool draw_cubes = false);

}  // namespace qcx
