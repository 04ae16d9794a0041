#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "qcx/geometry.hpp"

namespace qcx {

/// All tunable constants of the construction in one place. Only the order of
/// choice is constrained (phi first, then alpha and C from phi, M large with
/// respect to phi, M' with respect to M, delta from M and M', epsilon last);
/// the defaults are desk-scale values validated by the acceptance suite, not
/// asymptotic ones.
struct Config {
    double eps = 0.1;       // flatness budget for the stopping rule
    double delta = 0.3;     // non-flat threshold is delta*eps on beta(MB)
    double M = 3.0;         // dilation for beta queries
    double Mp = 2.0;        // M' < M, the routing dilation
    int J = 2;              // cube levels use nets at multiples of J
    int k0 = 3;             // requested Whitney offset (raised to feasibility)
    int k1 = 2;             // apex depth below a bridged ball's level
    double alpha = 4.0;     // cone opening
    double phi = M_PI / 16; // routing cone half-angle
    double lambda = 0.05;   // edge clearance parameter for bridge paths
    double C = 8.0;         // annulus reach for non-flat pair search
    int cQ = 2;             // cube ball margin exponent
    double a_min = 0.01;    // required segment-separation constant

    // Artifact knobs (not part of the constant cascade).
    double c_len = 32.0;       // bridge total-length budget, units of the ball scale
    double c_raw_leg = 6.0;    // raw leg budget before straightening
    double c_straight = 4.0;   // straightened / raw length bound
    double theta_red = 8.0;    // redundancy threshold: skip a pair already connected
    int beta_dirs = 4096;      // direction grid size for d >= 3
    double tau_beta = 1e-4;    // relative tolerance of the grid beta
    int kmax_override = -1;    // <0: derive from the min edge length
    uint64_t seed = 12345;     // verification pair sampling only
    int n_rand_pairs = 64;     // random on-edge pairs per stretch measurement
    std::string preset = "default";

    void validate() const {
        auto req = [](bool ok, const char* what) {
            if (!ok) throw Error("config", what);
        };
        req(eps > 0 && eps < 1, "require 0 < eps < 1");
        req(delta > 0 && delta < 1, "require 0 < delta < 1");
        req(Mp < M, "require M' < M");
        req(lambda > 0 && lambda < 1, "require 0 < lambda < 1");
        req(phi > 0 && phi < M_PI / 8, "require phi in (0, pi/8)");
        req(C > 2, "require C > 2");
        req(J >= 2, "require J >= 2");
        req(k0 >= 2, "require k0 >= 2");
        req(k1 >= 0, "require k1 >= 0");
        req(alpha > 0, "require alpha > 0");
        req(cQ >= 1, "require cQ >= 1");
        req(a_min > 0, "require a_min > 0");
    }

    static Config preset_default() { return Config{}; }
    /// Strict preset honouring M > 2^{J+2}.
    static Config preset_strict() {
        Config c;
        c.M = 17.0;
        c.preset = "strict";
        return c;
    }
    static Config by_name(const std::string& name) {
        if (name == "default") return preset_default();
        if (name == "strict") return preset_strict();
        throw Error("config", "unknown preset: " + name);
    }
};

}  // namespace qcx
