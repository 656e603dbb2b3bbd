#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/gmp.hpp>

#include "cipw/moments.hpp"

namespace cipw {

using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                               boost::multiprecision::et_off>;
using RationalDistribution = Distribution<Rational>;

// "p/q" (or "p" for integers)
std::string to_string(const Rational& r);
Rational parse_rational(const std::string& s);

std::uint64_t bell_number(int m);
// sum_j C(m,j) Bell(m-j)
std::uint64_t partition_count(int m);

// Every (S, N) over [m]: N runs over subsets in mask order, the rest over set
// partitions in restricted-growth order. Blocks are sorted and ordered by
// their smallest element.
void enumerate_partitions(int m, const std::function<void(const Partition&)>& visit);
std::vector<Partition> all_partitions(int m);

// fewer sets first, then lexicographic block order, then null set
bool partition_less(const Partition& a, const Partition& b);

struct MinRmseResult {
    double best_mse = 0.0;
    Partition best;
    Index evaluated = 0, skipped = 0;
};

// Scores default to the true e.
MinRmseResult brute_force_min_rmse(const FiniteDistribution& dist, long n, const PropensityMap* scores = nullptr,
                                   CountModel model = CountModel::fixed);

struct SubsetSumInput {
    std::vector<long> a;
    long target = 1;

    long total() const;
};

void validate(const SubsetSumInput& in);
// exhaustive; witness receives 0-based indices
bool subset_sum_yes(const SubsetSumInput& in, std::vector<int>* witness = nullptr);

struct MinRmseInstance {
    Rational U, n;
    RationalDistribution dist;  // points x_1..x_k, x_{m-1}, x_m on a line
    Rational eps, alpha, beta, delta;
    int k = 0;
    bool conforming = true;  // false when eps was overridden
};

Rational default_reduction_eps(const SubsetSumInput& in);
MinRmseInstance subset_sum_reduce(const SubsetSumInput& in, std::optional<Rational> eps_override = std::nullopt);

// MSE with the variance scaled by 1/n, exact.
Rational exact_mse(const MinRmseInstance& inst, const Partition& part);

struct ReductionCheck {
    Rational mse;
    bool leq_U = false;
    Partition part;
};

// R holds 0-based indices into the first k points.
ReductionCheck verify_reduction(const MinRmseInstance& inst, const std::vector<int>& R);

struct ExactMinResult {
    Rational best_mse;
    Partition best;
    Index evaluated = 0, skipped = 0;
};

ExactMinResult brute_force_min_mse_exact(const MinRmseInstance& inst);

// mse > U / sqrt(eps), compared as mse^2 eps > U^2
bool exceeds_gap(const MinRmseInstance& inst, const Rational& mse);

struct GapCheck {
    bool yes = false;
    bool holds = false;
    ExactMinResult min;
};

// Yes => min MSE <= U; No => min MSE > U/sqrt(eps).
GapCheck check_gap(const SubsetSumInput& in, std::optional<Rational> eps_override = std::nullopt);

FiniteDistribution to_double(const RationalDistribution& dist);

} // namespace cipw
