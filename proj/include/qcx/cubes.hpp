#pragma once

#include "qcx/audit.hpp"
#include "qcx/nets.hpp"

namespace qcx {

enum class CubeClass : uint8_t { Unclassified = 0, FlatGood, FlatBad, NonFlat };

const char* cube_class_name(CubeClass c);

/// Tree of dyadic-style cubes over the nets Delta_{kJ}. A cube is the union of
/// balls B(z, 2^{-lJ-cQ}) over the net descendants z of its center, plus tiny
/// balls (radius pitch/4) around the dense samples assigned to its deepest
/// descendants; the sample balls stand in for the truncated finer scales so
/// that level-k cubes still cover the curve.
struct CubeTree {
    int J = 2;
    int cQ = 2;
    int tree_depth = 0;  // number of levels; tree level k uses net level k*J
    const DeltaNets* nets = nullptr;
    const CurveSampling* samp = nullptr;

    struct Node {
        int level = 0;       // tree level
        int32_t pt = 0;      // index into nets->level(level*J)
        int32_t parent = -1; // node id; -1 for root
        std::vector<int32_t> children;
        CubeClass cls = CubeClass::Unclassified;
        double parent_dist = 0.0;
        double outer_radius = 0.0;  // max over region balls of |x-z|+r
        double diam = 0.0;          // diameter of the region (ball union)
        std::vector<std::pair<int, int32_t>> desc;  // (tree level, pt) incl. self
        std::vector<int32_t> samples;               // flattened subtree samples
    };
    std::vector<Node> nodes;
    std::vector<std::vector<int32_t>> by_level;           // node ids per tree level
    std::vector<std::vector<int32_t>> node_of_pt;         // per level: pt -> node id
    std::vector<int32_t> sample_owner;                    // sample -> deepest node id

    int net_level(int tree_k) const { return tree_k * J; }
    double ball_radius(int tree_k) const { return std::ldexp(1.0, -net_level(tree_k) - cQ); }
    double sample_ball_radius() const { return samp->pitch * 0.25; }
    double scale(int tree_k) const { return std::ldexp(1.0, -net_level(tree_k)); }
    int32_t root() const { return by_level.at(0).at(0); }
    VecView center(int32_t node) const {
        const Node& n = nodes[node];
        return nets->level(net_level(n.level)).pts[n.pt];
    }
    int32_t ancestor_at(int32_t node, int tree_k) const;

    /// Membership in the (open/closed) cube region.
    bool contains(int32_t node, VecView p, bool open) const;
    /// All nodes whose region contains p, as (level, node id), deepest first.
    std::vector<std::pair<int, int32_t>> containing_nodes(VecView p, bool open) const;
    /// Exact distance from p to the closed cube region.
    double dist_to_cube(int32_t node, VecView p) const;
    /// Distance test against the dilation MQ = {p : dist(p,Q) <= M diam Q}.
    bool dilated_contains(int32_t node, double M, VecView p) const;
    /// Deepest node whose closed region contains the ball (boundary sampled);
    /// throws if even the root does not contain it.
    int32_t smallest_cube_containing(const Ball& B) const;
};

CubeTree build_cube_tree(const DeltaNets& nets, const CurveSampling& samp, int J, int cQ);

/// Dyadic-cube property audits with constants re-derived for the configured
/// (J, cQ): covering per level, same-level open-cube disjointness (rejection
/// sampled), the ball sandwich, nesting of open cubes under intersection, and
/// the parent distance band [2^{-kJ}, 2^{-(k-1)J}].
std::vector<AuditRow> audit_cube_tree(const CubeTree& tree, uint64_t seed = 77,
                                      int sample_points = 10000);

}  // namespace qcx
