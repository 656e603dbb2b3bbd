#pragma once

#include <cstdint>
#include <vector>

#include "cipw/model.hpp"

namespace cipw {

enum class ScoreSource { analytic, empirical };

// One coarse score per set; NaN marks a set with no score.
struct CoarseScoreTable {
    Eigen::VectorXd values;
    ScoreSource source = ScoreSource::analytic;

    bool has(Index s) const { return s >= 0 && s < values.size() && !std::isnan(values(s)); }
    double at(Index s) const;
};

struct ConditionalMeanMap {
    Eigen::VectorXd mu0, mu1;
};

constexpr double kScoreClip = 1e-9;

double neyman(const CensoredDataset& data);
double ipw(const CensoredDataset& data, const PropensityMap& scores);
double trimmed_ipw(const CensoredDataset& data, const PropensityMap& scores, double eta);

double cipw(const CensoredDataset& data, const Partition& part, const CoarseScoreTable& coarse);

// Per-sample set index (kNull for the null set) under a fractional partition.
// Each draw is keyed on the sample's content, so reordering the rows permutes
// the assignment with them.
std::vector<int> assign_fractional(const CensoredDataset& data, const FractionalPartition& fpart,
                                   std::uint64_t seed);
double cipw_assigned(const CensoredDataset& data, const std::vector<int>& assignment,
                     const CoarseScoreTable& coarse);
double fractional_cipw(const CensoredDataset& data, const FractionalPartition& fpart,
                       const CoarseScoreTable& coarse, std::uint64_t seed);

double doubly_robust(const CensoredDataset& data, const ConditionalMeanMap& mu,
                     const PropensityMap& scores);
double coarse_doubly_robust(const CensoredDataset& data, const Partition& part,
                            const ConditionalMeanMap& mu, const CoarseScoreTable& coarse);
// y -> y - mu_t(x)
CensoredDataset centered(const CensoredDataset& data, const ConditionalMeanMap& mu);

// Sets without samples come back as NaN; use require_complete to abort instead.
CoarseScoreTable empirical_coarse_scores(const CensoredDataset& data, const PropensityMap& scores_hat,
                                         const Partition& part);
CoarseScoreTable empirical_coarse_scores(const CensoredDataset& data, const PropensityMap& scores_hat,
                                         const std::vector<int>& assignment, Index num_sets);
void require_complete(const CoarseScoreTable& coarse);

// e(S) computed from the distribution's masses and the given scores.
CoarseScoreTable analytic_coarse_scores(const FiniteDistribution& dist, const Partition& part,
                                        const PropensityMap& scores);
CoarseScoreTable analytic_coarse_scores(const FiniteDistribution& dist, const FractionalPartition& fpart,
                                        const PropensityMap& scores);

// Samples per set; kNull samples are dropped.
std::vector<int> hard_assignment(const CensoredDataset& data, const Partition& part);

} // namespace cipw
