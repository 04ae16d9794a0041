#pragma once

#include "qcx/geometry.hpp"

namespace qcx {

/// Dense sampling of a polygonal curve at a fixed pitch. Net construction,
/// beta evaluation and anchor selection all operate on these samples; the
/// pitch is chosen far below every threshold used downstream.
struct CurveSampling {
    const PolyCurve* curve = nullptr;
    double pitch = 0.0;
    PointSet pts;
    std::vector<int32_t> edge_id;   // generating curve edge per sample
    std::vector<double> edge_t;     // parameter along that edge
    GridIndex grid;                 // cell = 4 * pitch

    void build(const PolyCurve& c, double pitch_);
    size_t size() const { return pts.size(); }
};

/// Exact distance to the curve with grid acceleration. Falls back to the
/// brute-force edge scan for curves with few edges or far-away queries.
class CurveDist {
public:
    void attach(const CurveSampling& s);
    /// Exact dist(p, curve). `upper_hint`, when positive, promises that the
    /// distance is <= upper_hint (skips the expanding search).
    double operator()(VecView p, double upper_hint = -1.0) const;
    const CurveSampling& sampling() const { return *samp_; }

private:
    const CurveSampling* samp_ = nullptr;
    bool brute_ = true;
    double exact_from_radius(VecView p, double r) const;
};

struct ConeOptions {
    double alpha = 4.0;
    double arrival_tol = 1e-6;  // distance at which the target counts as reached
    int samples = 96;
};

/// Pointwise cone inequality |z - xi| < alpha * dist(z, curve).
bool cone_inequality(VecView z, VecView xi, double alpha, const CurveDist& dist_fn);

/// True if every sample of the segment from z to the target satisfies the cone
/// inequality with apex xi (the component-membership certificate used for
/// bridge legs).
bool segment_in_cone(VecView z, VecView target, VecView xi, const CurveDist& dist_fn,
                     const ConeOptions& opt);

/// Cone membership test per the two-stage procedure: straight descent toward
/// the curve point nearest xi (offset outward by arrival_tol), then a single
/// detour through the best-clearance midpoint candidate.
bool in_cone(VecView z, VecView xi, double alpha, const PolyCurve& curve,
             const CurveDist& dist_fn, const ConeOptions& opt);

}  // namespace qcx
