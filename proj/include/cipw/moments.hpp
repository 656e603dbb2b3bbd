#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cipw/model.hpp"

namespace cipw {

template <class Scalar>
struct MomentCore {
    Scalar expectation, bias, variance, mse;
};

// Closed-form moments of CIPW on a finite support. scores supplies the
// coarse denominators; the distribution's own e drives the sampling.
// variance = var_factor * (second moment - expectation^2), both taken over
// the support outside N with masses renormalized by 1 - D(N).
// Terms with a zero numerator are skipped so exact instances may carry e = 1.
template <class Scalar>
MomentCore<Scalar> moments_core(const Distribution<Scalar>& d, const Partition& part,
                                const Vec<Scalar>& scores, const Scalar& var_factor) {
    const Scalar zero(0), one(1);
    const Index m = d.size();
    std::vector<char> is_null(m, 0);
    Scalar null_mass(0);
    for (Index x : part.null_set) {
        is_null[x] = 1;
        null_mass += d.mass(x);
    }
    const Scalar keep = one - null_mass;
    if (keep == zero) throw DomainError("null set carries all the mass", "all_null");

    Scalar first(0), second(0);
    for (const IdSet& set : part.sets) {
        const Scalar es = coarse_score<Scalar>(scores, d.mass, set);
        const Scalar ec = one - es;
        for (Index x : set) {
            const Scalar w = d.mass(x) / keep;
            const Scalar n1 = d.e(x) * d.mu1(x);
            const Scalar n0 = (one - d.e(x)) * d.mu0(x);
            const Scalar s1 = d.e(x) * (d.v1(x) + d.mu1(x) * d.mu1(x));
            const Scalar s0 = (one - d.e(x)) * (d.v0(x) + d.mu0(x) * d.mu0(x));
            if (n1 != zero || s1 != zero) {
                if (es == zero) throw DomainError("coarse score 0 with treated mass", "infinite");
                first += w * n1 / es;
                second += w * s1 / (es * es);
            }
            if (n0 != zero || s0 != zero) {
                if (ec == zero) throw DomainError("coarse score 1 with control mass", "infinite");
                first -= w * n0 / ec;
                second += w * s0 / (ec * ec);
            }
        }
    }
    MomentCore<Scalar> r;
    r.expectation = first;
    Scalar diff = true_ate(d) - first;
    r.bias = diff < zero ? Scalar(-diff) : diff;
    r.variance = var_factor * (second - first * first);
    r.mse = r.bias * r.bias + r.variance;
    return r;
}

// fixed: the retained-sample count is taken as n (closed-form display).
// binomial: the count is Binomial(n, 1 - D(N)) conditioned on being >= 1,
// which is what the estimator actually divides by.
enum class CountModel { fixed, binomial };

struct MomentReport {
    double expectation = 0, bias = 0, variance = 0, mse = 0, rmse = 0;
    long n = 0;
};

// E[1/K | K >= 1] for K ~ Binomial(n, q).
double inverse_count_mean(long n, double q);

// Extended support: one copy of x per positive weight, mass D(x) w_T(x).
struct Extended {
    FiniteDistribution dist;
    Partition part;
    PropensityMap scores;
    std::vector<Index> origin;  // copy -> original id
};
Extended expand(const FiniteDistribution& dist, const FractionalPartition& fpart,
                const PropensityMap& scores);

double cipw_expectation(const FiniteDistribution& dist, const Partition& part, const PropensityMap& scores);
double cipw_expectation(const FiniteDistribution& dist, const FractionalPartition& fpart,
                        const PropensityMap& scores);
MomentReport cipw_moments(const FiniteDistribution& dist, const Partition& part, const PropensityMap& scores,
                          long n, CountModel model = CountModel::fixed);
MomentReport cipw_moments(const FiniteDistribution& dist, const FractionalPartition& fpart,
                          const PropensityMap& scores, long n, CountModel model = CountModel::fixed);

struct RobustSearch {
    enum Mode { corners, grid } mode = corners;
    int grid_points = 5;
    int max_passes = 50;
};

struct RobustResult {
    double rmse = 0;
    PropensityMap maximizer;
    bool certified = false;  // exhaustive corner scan
};

RobustResult robust_rmse(const FiniteDistribution& dist, const Partition& part, const PerturbationBall& ball,
                         long n, RobustSearch search = {}, CountModel model = CountModel::fixed);
RobustResult robust_rmse(const FiniteDistribution& dist, const FractionalPartition& fpart,
                         const PerturbationBall& ball, long n, RobustSearch search = {},
                         CountModel model = CountModel::fixed);

struct GoodLocalReport {
    double null_mass = 0, max_diameter = 0, min_overlap = 0;
    bool verdict = false;
};

GoodLocalReport check_good_local(const FiniteDistribution& dist, const Partition& part, double alpha,
                                 double beta, double gamma);
GoodLocalReport check_good_local(const FiniteDistribution& dist, const FractionalPartition& fpart,
                                 double alpha, double beta, double gamma);

struct PartitionDiagnostics {
    std::vector<double> span, mass, diameter;
};

PartitionDiagnostics diagnose(const FiniteDistribution& dist, const Partition& part);
PartitionDiagnostics diagnose(const FiniteDistribution& dist, const FractionalPartition& fpart);
// max |mu_t(x) - mu_t(z)| / |x - z| over support pairs and t
double lipschitz_ratio(const FiniteDistribution& dist);

struct BiasVarBound {
    double bias_bound = 0, var_bound = 0;
};

BiasVarBound eq17_bound(const FiniteDistribution& dist, const Partition& part, const PropensityMap& scores_hat,
                        long n, std::optional<double> L = std::nullopt);
BiasVarBound eq17_bound(const FiniteDistribution& dist, const FractionalPartition& fpart,
                        const PropensityMap& scores_hat, long n, std::optional<double> L = std::nullopt);

// Slack constants standing in for the hidden big-O factors.
constexpr double kGoodLocalSlack = 30.0;
constexpr double kRobustRatioSlack = 10.0;

double good_local_rmse_bound(double alpha, double beta, double gamma, double eps, long n, double L);

} // namespace cipw
