#pragma once

#include "qcx/bridging.hpp"

namespace qcx {

/// The merged network with every edge subdivided at a fixed pitch; the
/// shortest-path oracle runs on this graph. Original network nodes keep their
/// ids (they come first), subdivision nodes follow.
struct SubdividedGraph {
    PointSet nodes;
    std::vector<std::vector<std::pair<int32_t, double>>> adj;
    std::vector<int8_t> on_curve;
    GridIndex grid;
    double pitch = 0.0;
    size_t original_nodes = 0;

    void build(const AugmentedNetwork& net, double pitch_);
    int32_t snap(VecView p) const;
};

struct ShortestPathResult {
    PolyPath path;
    double length = 0.0;
    bool reachable = false;
};

/// Exact shortest path in the subdivided graph between the snapped endpoints.
ShortestPathResult graph_shortest_path(const SubdividedGraph& g, VecView p, VecView q);

struct StretchStats {
    double max_stretch = 1.0;
    double median = 1.0;
    double p99 = 1.0;
    size_t pairs = 0;
    Vec worst_a, worst_b;
    double worst_euclid = 0.0, worst_graph = 0.0;
};

/// Max/median/p99 of graph-vs-Euclid dilation over all original-vertex pairs
/// plus seeded random on-edge pairs.
StretchStats measure_stretch(const SubdividedGraph& g, int n_random_pairs, uint64_t seed);

struct ReduceResult {
    Vec anchor;
    PolyPath path;
    double length = 0.0;
    double dist_to_curve = 0.0;
};

/// Shortest in-network path from p to the base curve.
ReduceResult reduce_to_gamma(const SubdividedGraph& g, VecView p);

/// Frame for the cone cases of the route schema: the max-clearance point of
/// the segment, the axis, and the double cones V_j with half-angle j*phi.
struct ConeFrame {
    Vec z;
    double r_z = 0.0;
    Vec axis;       // unit, from x to y
    double proj_a = 0.0, proj_b = 0.0;  // projections of the segment endpoints
    double phi = 0.0;

    double proj(VecView w) const;
    bool in_V(int j, VecView w) const;
    bool in_H_plus(VecView w) const;   // strictly between z and the y-side end
    bool in_H_minus(VecView w) const;
};

ConeFrame make_cone_frame(VecView x, VecView y, const CurveDist& dist_fn, double phi,
                          double sample_pitch);

struct RouteContext {
    const AugmentedNetwork* net = nullptr;
    const SubdividedGraph* graph = nullptr;
    const DeltaNets* nets = nullptr;
    const CubeTree* tree = nullptr;
    const BetaEngine* engine = nullptr;
    const CurveDist* dist_fn = nullptr;
    Config cfg;
    double pitch = 0.0;
};

struct RouteResult {
    PolyPath path;
    double length = 0.0;
    std::vector<std::pair<double, double>> trace;  // (sigma_n, settled length)
    int fallbacks = 0;
    int rounds = 0;
    size_t edge_count = 0;
};

/// Constructive route between two points of the base curve following the
/// four-case segment-replacement schema; falls back to the graph oracle for a
/// segment when no registered bridge fits (counted, never fatal).
RouteResult route(const RouteContext& ctx, VecView x, VecView y);

/// Synthetic checks used by the acceptance suite: the almost-collinear splice
/// inequality and the clearance-point conclusion. Both return the number of
/// violations over `n` seeded configurations.
int check_splice_inequality(uint64_t seed, int n, double phi);
int check_clearance_proposition(uint64_t seed, int n);

}  // namespace qcx
