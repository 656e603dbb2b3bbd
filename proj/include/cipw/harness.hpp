#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cipw/estimators.hpp"
#include "cipw/moments.hpp"
#include "cipw/partition_finder.hpp"
#include "cipw/synth.hpp"

namespace cipw {

// An estimator as seen by the harness. rep_seed feeds any internal
// randomness (sample splitting, fractional draws).
struct Estimator {
    std::string name;
    std::function<double(const CensoredDataset&, const PropensityMap&, std::uint64_t rep_seed)> run;
};

Estimator make_ipw();
Estimator make_neyman();
Estimator make_trimmed_ipw(double eta);
// coarse scores fixed up front, e.g. analytic ones
Estimator make_cipw(const Partition& part, const CoarseScoreTable& coarse, std::string name = "cipw");
// coarse scores re-estimated on every dataset from scores_hat
Estimator make_cipw_empirical(const Partition& part, std::string name = "cipw_empirical");
Estimator make_fractional_cipw(const FractionalPartition& fpart, std::string name = "fractional_cipw");
Estimator make_robust_ate(const FinderConfig& cfg);
Estimator make_doubly_robust(const ConditionalMeanMap& mu);

struct McReport {
    std::string estimator, mode = "e";
    long n = 0, R = 0, failures = 0;
    double mean = 0, bias = 0, rmse = 0, se = 0;
    double mse = 0, mse_se = 0;
    std::uint64_t seed = 0;
};

constexpr long kMinReplications = 100;

// Failed replications (DomainError) are excluded and counted.
McReport mc_rmse(const FiniteDistribution& dist, const Estimator& est, const PropensityMap& scores_hat, long n,
                 long R, std::uint64_t seed);
// Raw per-replication estimates; NaN marks a failure.
Eigen::VectorXd mc_estimates(const FiniteDistribution& dist, const Estimator& est, const PropensityMap& scores_hat,
                             long n, long R, std::uint64_t seed);
McReport summarize(const Eigen::VectorXd& estimates, double tau);

// Same replications for many hard partitions at once: each dataset is reduced
// to per-point sums, and every partition's CIPW estimate (with fixed coarse
// scores) is read off those sums. Replications with no retained sample are
// failures for that partition.
std::vector<McReport> mc_rmse_partitions(const FiniteDistribution& dist, const std::vector<Partition>& parts,
                                         const std::vector<CoarseScoreTable>& coarse, long n, long R,
                                         std::uint64_t seed);

struct NormalityReport {
    Eigen::VectorXd standardized;
    double ks = 1.0, threshold = 0.02, mean = 0, sd = 0;
    long failures = 0;
    bool pass = false;
};

double ks_normal(Eigen::VectorXd sample);
NormalityReport normality_check(const FiniteDistribution& dist, const Partition& part,
                                const PropensityMap& scores_hat, long n, long R, std::uint64_t seed,
                                double threshold = 0.02);
NormalityReport normality_from(const Eigen::VectorXd& estimates, double threshold = 0.02);

struct ModeScores {
    std::string mode;
    PropensityMap scores;
};

// e, anti_outlier, worst_bias, random x5; only e when the radius is 0.
std::vector<ModeScores> adversary_menu(const FiniteDistribution& dist, const PerturbationBall& ball,
                                       std::uint64_t seed);

struct CompareRow {
    std::vector<McReport> by_mode;
    McReport worst;
};

// Rows follow the estimator order; the same datasets are reused across modes.
std::vector<CompareRow> compare(const FiniteDistribution& dist, const std::vector<Estimator>& estimators,
                                const PerturbationBall& ball, long n, long R, std::uint64_t seed);

// estimator,mode,n,rmse,se
std::string to_csv(const std::vector<CompareRow>& rows);

} // namespace cipw
