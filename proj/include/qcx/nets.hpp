#pragma once

#include "qcx/audit.hpp"
#include "qcx/sampling.hpp"

namespace qcx {

/// Nested 2^{-k}-nets on the curve, built by greedy sequential insertion over
/// the dense sampling, with level k points reused as seeds for level k+1.
/// Requires the curve diameter to lie in (1/2, 1] so that level 0 is the
/// single seed point.
struct DeltaNets {
    int dim = 0;
    int k_max = 0;
    struct Level {
        PointSet pts;
        std::vector<int32_t> sample_idx;  // into the generating CurveSampling
        GridIndex grid;                   // cell = separation
    };
    std::vector<Level> levels;

    double separation(int k) const { return std::ldexp(1.0, -k); }
    const Level& level(int k) const { return levels.at(k); }
    /// Exact range query at one level.
    std::vector<int32_t> points_in_ball(int k, const Ball& B) const;
};

DeltaNets build_delta_nets(const CurveSampling& samp, int k_max);

std::vector<AuditRow> audit_delta_nets(const DeltaNets& nets, const CurveSampling& samp);

/// Whitney-style net in the complement: level k lives in the annulus
/// 2^{-k-1} <= dist(.,curve) < 2^{-k}, with points pairwise >= 2^{-k-k0}
/// apart and the annulus covered within 2^{-k-k0+2}.
struct WhitneyNet {
    int dim = 0;
    int k0 = 0;       // effective offset (locality-feasible)
    int k_max = 0;    // deepest level built
    double spacing_factor = 2.5;  // net spacing in units of 2^{-k-k0}
    struct Level {
        PointSet pts;
        std::vector<double> dist_to_curve;  // exact, recorded at build time
        GridIndex grid;                     // cell = spacing
        double spacing = 0.0;
    };
    std::vector<Level> levels;

    double unit(int k) const { return std::ldexp(1.0, -k - k0); }
    double inner(int k) const { return std::ldexp(1.0, -k - 1); }
    double outer(int k) const { return std::ldexp(1.0, -k); }
    const Level& level(int k) const { return levels.at(k); }

    std::vector<int32_t> points_in_ball(int k, const Ball& B) const;
    /// Query across all levels that can intersect the ball (annulus pruning
    /// via the exact distance from the ball center to the curve).
    std::vector<std::pair<int, int32_t>> all_points_in_ball(const Ball& B,
                                                            double center_dist) const;
};

/// Smallest k0 >= requested for which the locality ball of radius
/// 10*2^{-k-k0} stays inside the adjacent-annulus band. The build enforces
/// this before construction; the locality audit re-checks after.
int feasible_k0(int requested);

WhitneyNet build_whitney_net(const PolyCurve& curve, const CurveSampling& samp,
                             const CurveDist& dist_fn, int k0, int k_max,
                             double bbox_pad = 1.5);

std::vector<AuditRow> audit_whitney_net(const WhitneyNet& net, const PolyCurve& curve,
                                        const CurveSampling& samp, const CurveDist& dist_fn,
                                        uint64_t seed = 1234, int covering_samples = 1000);

}  // namespace qcx
