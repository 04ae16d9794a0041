#pragma once

#include <map>

#include "qcx/beta.hpp"
#include "qcx/config.hpp"
#include "qcx/cubes.hpp"

namespace qcx {

/// Cached beta evaluations over the multiscale ball family and cube dilations.
/// The curve is represented by its dense sample set; the sampling error per
/// query is below pitch/|region| and is absorbed by the thresholds.
class BetaEngine {
public:
    BetaEngine(const CurveSampling& samp, const DeltaNets& nets, const Config& cfg)
        : samp_(&samp), nets_(&nets), cfg_(cfg) {}

    void attach_tree(const CubeTree& tree) { tree_ = &tree; }

    /// beta of the dilated net ball M * B(xi, 2^{-k}), xi = Delta_k point.
    double beta_net_ball(int k, int32_t pt, double M) const;
    /// beta of an arbitrary ball.
    double beta_ball(const Ball& B) const;
    /// beta of the dilated cube region MQ, normalized by diam(Q)(1+2M);
    /// M = 0 gives the un-dilated region Q.
    double beta_cube(int32_t node, double M) const;

    const CurveSampling& sampling() const { return *samp_; }
    const DeltaNets& nets() const { return *nets_; }
    const CubeTree& tree() const { return *tree_; }
    const Config& config() const { return cfg_; }
    size_t cache_size() const { return ball_cache_.size() + cube_cache_.size(); }

private:
    const CurveSampling* samp_;
    const DeltaNets* nets_;
    const CubeTree* tree_ = nullptr;
    Config cfg_;
    mutable std::map<std::tuple<int, int32_t, int64_t>, double> ball_cache_;
    mutable std::map<std::pair<int32_t, int64_t>, double> cube_cache_;

    std::vector<Vec> samples_in_ball(const Ball& B) const;
};

/// The multiscale functional: |K| plus the sum over every net ball of
/// beta^2(MB) |B|. Levels are summed separately for the report.
struct TstFunctional {
    double diameter_term = 0.0;
    std::vector<double> level_sums;
    double total = 0.0;
    double M = 0.0;
};

TstFunctional compute_beta_sum(const BetaEngine& engine, double M);

struct FlatnessProbe {
    double component_diameter_fraction = 0.0;  // largest component of curve∩B over |B|
    double hausdorff_line_gap = 0.0;           // two-sided gap to the best line in B
};

/// Flatness diagnostics for a ball (meaningful when beta(2B) is small).
FlatnessProbe flatness_probe(const BetaEngine& engine, const Ball& B);

}  // namespace qcx
