#pragma once

#include <cstdint>
#include <optional>

#include "cipw/model.hpp"

namespace cipw {

struct Thm91Params {
    double eta = 0.05;
    double eps = 0.02;
    int grid_points = 0;
    long n_intended = 10000;
};

// Four atoms at 0, eps, 1-eps, 1 plus an even grid carrying the eps residual.
// v1 = 1 - mu1^2 so that a [-1,1] outcome law exists.
FiniteDistribution make_thm91(const Thm91Params& params);
double thm91_delta(double eta, long n_intended);

// printed: v1 = 1 as displayed; otherwise v1 = 0, the feasible choice with mu1 = 1
FiniteDistribution make_prop92(double eta, bool printed = true);
FiniteDistribution make_lemC1(double eps);
FiniteDistribution make_lem16();
FiniteDistribution make_thmD1(double alpha, double beta, double L, double rho, double eta, double mu1_choice);

struct PlantedSpec {
    int d = 1;
    int k = 1;
    double alpha = 0.05;
    double beta = 0.2;
    double rho = 0.3;
    double L = 1.0;
    std::uint64_t seed = 0;
    int inliers_per_ball = 4;  // non-outlier atoms per ball
    int background = 40;       // atoms outside the balls
};

struct Planted {
    FiniteDistribution dist;
    Eigen::MatrixXd centers;  // k x d
    IdSet outliers;
};

Planted make_planted(const PlantedSpec& spec);
void validate(const PlantedSpec& spec);

// Draws x ~ D, t ~ Bernoulli(e(x)), y from a two-point law with mean mu_t(x)
// and variance v_t(x) on [-1,1].
CensoredDataset sample_dataset(const FiniteDistribution& dist, Index n, std::uint64_t seed);

// Two-point law matching (mu, v) on [-1,1]: values lo < hi, P(hi) = p_hi.
struct TwoPoint {
    double lo, hi, p_hi;
};
TwoPoint outcome_law(double mu, double v);

enum class PerturbMode { random, anti_outlier, worst_bias };

// Scores inside the closed l-inf ball of radius eps, clipped into (0,1).
// worst_bias needs the distribution for the sign of each point's bias term.
PropensityMap perturb_scores(const PropensityMap& e, double eps, PerturbMode mode, std::uint64_t seed,
                             const FiniteDistribution* dist = nullptr);

constexpr double kPerturbFloor = 1e-9;

} // namespace cipw
