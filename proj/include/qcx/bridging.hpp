#pragma once

#include <map>
#include <set>

#include "qcx/beta_engine.hpp"

namespace qcx {

/// A polygonal shortcut with vertices in the Whitney net, anchored on the
/// curve. Flat-bad bridges are single legs apex -> anchor (one per nearby net
/// point); non-flat bridges run anchor -> apex -> anchor.
struct Bridge {
    enum class Kind : uint8_t { FlatBad, NonFlat };
    Kind kind = Kind::FlatBad;
    int32_t cube_node = -1;         // provenance for flat-bad legs
    int ball_level = -1;            // provenance for non-flat pairs
    int32_t ball_pt = -1, ball_pt2 = -1;
    double scale = 0.0;             // 2^{-k} of the generating ball

    std::vector<Vec> path;          // ordered vertices
    std::vector<int> vtx_level;     // Whitney level per vertex, -1 for anchors
    std::vector<int32_t> vtx_idx;   // Whitney index per vertex, sample id for anchors
    Vec apex;
    int apex_level = -1;
    std::vector<int32_t> anchor_samples;  // dense-sample ids of the anchors

    double raw_length = 0.0;
    double length = 0.0;
};

/// Pair that the redundancy filter found already well connected; the route
/// validator may still use it as a certified short connection.
struct CoveredPair {
    int level = 0;
    int32_t pt1 = 0, pt2 = 0;
    double cert_len = 0.0;  // network distance witnessed at build time
};

struct FlatBadRecord {
    int32_t node = -1;
    double accumulator = 0.0;  // value that crossed eps
    double max_term = 0.0;     // largest single beta^2 term since the restart
};

struct ClassifyResult {
    int flat_good = 0, flat_bad = 0, non_flat = 0;
    double root_beta = 0.0;
    std::vector<FlatBadRecord> flat_bad_records;
};

/// Stopping-time classification. Walks the tree depth-first carrying the
/// accumulated beta^2 since the last restart (root, non-flat cube, or previous
/// flat-bad). Throws when the root region is not flat and not handled by the
/// non-flat machinery.
ClassifyResult classify(CubeTree& tree, const BetaEngine& engine, const Config& cfg);

/// Incremental graph used for redundancy checks while bridges are being added
/// and, later, as the registry's certified-path extractor.
struct FilterGraph {
    PointSet nodes;
    std::vector<std::vector<std::pair<int32_t, double>>> adj;
    GridIndex grid;
    double snap_radius = 0.0;

    int32_t add_node(VecView p);
    void add_edge(int32_t u, int32_t v);
    int32_t snap(VecView p) const;  // nearest node; -1 if far
    /// Shortest-path distance capped at `cap`; +inf when unreachable within it.
    double bounded_dist(int32_t s, int32_t t, double cap) const;
    std::vector<Vec> extract_path(int32_t s, int32_t t, double cap) const;
};

struct BridgeSet {
    std::vector<Bridge> bridges;
    std::vector<CoveredPair> covered;
    std::map<int32_t, std::vector<int32_t>> by_cube;  // cube node -> bridge ids
    int flagged_skips = 0;
    int widened_searches = 0;
    int unbridged_pairs = 0;   // (C1) candidates with no admissible triple
    int redundant_pairs = 0;
    int anchor_cap_hits = 0;
    double max_flatbad_len_ratio = 0.0;   // leg length / cube diameter
    double max_straighten_ratio = 0.0;    // straightened / raw
};

struct BridgeContext {
    const PolyCurve* curve = nullptr;
    const CurveSampling* samp = nullptr;
    const CurveDist* dist_fn = nullptr;
    const DeltaNets* nets = nullptr;
    const WhitneyNet* whitney = nullptr;
    CubeTree* tree = nullptr;
    const BetaEngine* engine = nullptr;
    Config cfg;
    FilterGraph* filter = nullptr;
};

/// Straighten a raw path (one or two segments ending at an anchor sample on
/// the curve) into a Whitney polygonal path: chain selection along the raw
/// path, clearance repair of every net-net edge, then a pruning sweep.
/// Returns vertices, levels and indices aligned as in Bridge.
struct StraightenedPath {
    std::vector<Vec> vertices;
    std::vector<int> levels;
    std::vector<int32_t> idx;
    double raw_length = 0.0;
    double length = 0.0;
};
StraightenedPath straighten_path(const std::vector<Vec>& raw, int start_level,
                                 int32_t start_idx, int32_t anchor_sample,
                                 const BridgeContext& ctx);

BridgeSet build_bridges(BridgeContext& ctx, const ClassifyResult& cls);

/// Exact merged network: the base curve with anchor feet split in, plus all
/// bridge paths, each edge tagged with its origin.
struct AugmentedNetwork {
    PolyCurve base;
    std::vector<Bridge> bridges;
    std::vector<CoveredPair> covered;

    PointSet nodes;
    std::vector<std::array<int32_t, 2>> gedges;
    std::vector<double> elen;
    std::vector<int8_t> etag;      // 0 original, 1 bridge
    std::vector<int32_t> ebridge;  // bridge id or -1
    std::vector<int8_t> node_on_curve;

    double base_length = 0.0;
    double bridge_length = 0.0;
    double length_ratio() const { return (base_length + bridge_length) / base_length; }
};

AugmentedNetwork assemble(const PolyCurve& curve, BridgeSet&& bridges,
                          const CurveSampling& samp);

/// Lemma-style audits of the emitted bridges: per-edge clearance (empty
/// R_lambda), level adjacency, the length band, anchor-stub bounds, pairwise
/// segment separation, accumulator exactness, and the lens cube-sum bound.
std::vector<AuditRow> audit_bridges(const AugmentedNetwork& net, const WhitneyNet& whitney,
                                    const CurveDist& dist_fn, const Config& cfg);
std::vector<AuditRow> audit_stopping_rule(const CubeTree& tree, const BetaEngine& engine,
                                          const ClassifyResult& cls, const Config& cfg);
std::vector<AuditRow> audit_cube_sums(const CubeTree& tree, const BetaEngine& engine,
                                      const Config& cfg, uint64_t seed, int pairs,
                                      double* c_bj_out = nullptr);

}  // namespace qcx
