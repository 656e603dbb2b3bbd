#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cipw/estimators.hpp"
#include "cipw/model.hpp"

namespace cipw {

struct FinderConfig {
    double alpha = 0.1;
    double beta = 0.1;
    double epsilon = 0.0;
    std::uint64_t split_seed = 0;
    std::optional<int> k_hint;
    std::optional<double> L;

    double outlier_threshold() const { return beta / 3.0; }
};

void validate(const FinderConfig& cfg);

// Closed l-inf ball opened around a C1 outlier. Non-outliers inside it keep
// inlier_weight in the ball and the rest in their singleton.
struct Ball {
    Eigen::VectorXd center;
    int set = 0;
    double inlier_weight = 1.0;
};

struct FinderResult {
    FractionalPartition fpart;  // rows for the dataset's covariate ids
    double tau = 0.0;
    int k_found = 0;
    Index c1_size = 0, c2_size = 0;
    Index covered_outliers = 0;  // distinct outlier covariates placed in balls
    Index null_assigned = 0;     // distinct covariates sent to N
    std::vector<Ball> balls;
    double alpha = 0.0, threshold = 0.0;
};

bool is_hat_outlier(const PropensityMap& scores_hat, Index x, double beta);
bool is_hat_outlier(double e_hat, double beta);

Index detect_k(const CensoredDataset& c1, const PropensityMap& scores_hat, double alpha, double beta);

// Weights over a ball's members: outliers get 1, non-outliers the clamped
// ratio, with the remainder on their singleton.
struct BallWeights {
    double eta = 0.0, eta_s = 0.0, inlier_weight = 0.0;
};
BallWeights update_weight(Index ball_samples, Index ball_outliers, Index all_samples, Index all_outliers, int k);
// Dataset-level form: members flags which rows of c lie in the ball.
BallWeights update_weight(const std::vector<char>& members, const CensoredDataset& c,
                          const PropensityMap& scores_hat, double beta, int k);

// Seeded shuffle into halves (C1 gets the extra row); rows keep their order.
struct Split {
    std::vector<Index> first, second;
};
Split split_halves(Index n, std::uint64_t split_seed);

FinderResult find_good_partition(const CensoredDataset& c, const PropensityMap& scores_hat, const FinderConfig& cfg);
double robust_ate(const CensoredDataset& c, const PropensityMap& scores_hat, const FinderConfig& cfg);

// Applies the finder's rule to every point of a distribution.
FractionalPartition extend_partition(const FinderResult& res, const FiniteDistribution& dist,
                                     const PropensityMap& scores_hat);
// x sits in its ball whenever its ball weight is positive, else in its
// singleton (or N for uncovered outliers).
Partition hard_projection(const FractionalPartition& fpart);

// Outlier predicates linking e and e_hat.
struct FactCheck {
    bool fact81 = true;  // O(beta/9; e) in test set in O(beta; e)
    bool part1 = true;
    bool part2 = true;
    bool part3 = true;
};
FactCheck check_facts(double e, double e_hat, double beta, double eps);

// n = (k^3 d + log(1/delta)) / (rho eps)^2 with the hidden constant set to 1.
double finder_sample_size(int k, int d, double rho, double eps, double delta);

} // namespace cipw
