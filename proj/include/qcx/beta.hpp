#pragma once

#include "qcx/geometry.hpp"

namespace qcx {

struct WidthResult {
    Line line;
    double sup_dist = 0.0;  // max over the points of dist(p, line)
};

/// Line minimizing the sup of point-to-line distances.
/// d = 2: exact via convex-hull slab-width enumeration.
/// d >= 3: quasi-uniform direction grid (cylinder axes) with a minimum
/// enclosing ball per projection, plus local refinement to relative
/// tolerance tau. Deterministic for fixed `dirs`.
WidthResult min_width_line(const std::vector<Vec>& points, int dirs = 4096,
                           double tau = 1e-4);

/// Jones beta number of the point set K within ball B: inf over lines of
/// sup_{x in K∩B} dist(x,L) / |B|. Zero for <= 2 points or a degenerate ball;
/// always <= 1/2.
double beta_number(const Ball& B, const std::vector<Vec>& K, int dirs = 4096,
                   double tau = 1e-4);

/// Minimum enclosing ball (Welzl). Exact for small point counts in any
/// dimension; used per projected direction in d >= 3.
Ball min_enclosing_ball(const std::vector<Vec>& points);

/// Deterministic quasi-uniform directions on the unit sphere in R^d.
/// d = 2: evenly spaced half-circle angles. d = 3: Fibonacci hemisphere.
/// d > 3: fixed-seed Gaussian samples, normalized.
std::vector<Vec> sphere_directions(int dim, int n);

}  // namespace qcx
