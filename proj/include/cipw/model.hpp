#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cipw/errors.hpp"

namespace cipw {

using Index = Eigen::Index;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using IdSet = std::vector<Index>;

enum class Norm { L1, L2, Linf };

std::string norm_name(Norm p);
double norm_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b, Norm p);

// Finite-support unconfounded distribution. Row i of points is covariate i.
template <class Scalar>
struct Distribution {
    Eigen::MatrixXd points;
    Vec<Scalar> mass, e, mu0, mu1, v0, v1;
    Norm p = Norm::Linf;

    Index size() const { return points.rows(); }
    Index dim() const { return points.cols(); }
};

using FiniteDistribution = Distribution<double>;

// Range and shape checks; throws DataError.
void validate(const FiniteDistribution& dist);
// A [-1,1]-supported outcome law with the given (mu, v) exists at every point.
void check_feasible(const FiniteDistribution& dist);
bool moment_feasible(double mu, double v);

enum class ScoreLabel { truth, estimate };

struct PropensityMap {
    Eigen::VectorXd values;
    ScoreLabel label = ScoreLabel::truth;

    double at(Index id) const;
    Index size() const { return values.size(); }
};

PropensityMap true_scores(const FiniteDistribution& dist);
void validate(const PropensityMap& scores);

struct PerturbationBall {
    PropensityMap center;
    double radius = 0.0;
};

void validate(const PerturbationBall& ball);

struct Partition {
    std::vector<IdSet> sets;
    IdSet null_set;
};

constexpr int kNull = -1;
constexpr int kUncovered = -2;

struct Share {
    int set;  // kNull for the null set
    double w;
};

// Rows are indexed by covariate id; an empty row means the id is not covered.
struct FractionalPartition {
    std::vector<IdSet> sets;
    IdSet null_set;
    std::vector<std::vector<Share>> weights;
};

void validate(const Partition& part, Index m);
void validate(const FractionalPartition& fpart, Index m);
// Rows that are present must be stochastic and agree with the member lists.
void validate_rows(const FractionalPartition& fpart);

Partition singleton_partition(Index m);
Partition merged_partition(Index m);
FractionalPartition to_fractional(const Partition& part, Index m);
// id -> set index, kNull, or kUncovered for ids outside the partition.
std::vector<int> membership(const Partition& part, Index m);

IdSet outlier_set(const PropensityMap& scores, const IdSet& support, double beta);
IdSet outlier_set(const PropensityMap& scores, double beta);

template <class Scalar>
Scalar true_ate(const Distribution<Scalar>& dist) {
    Scalar tau(0);
    for (Index i = 0; i < dist.size(); ++i)
        tau += dist.mass(i) * (dist.mu1(i) - dist.mu0(i));
    return tau;
}

template <class Scalar>
Scalar set_mass(const Vec<Scalar>& mass, const IdSet& set, const Vec<Scalar>* weights = nullptr) {
    Scalar total(0);
    for (Index x : set)
        total += weights ? Scalar((*weights)(x) * mass(x)) : Scalar(mass(x));
    return total;
}

template <class Scalar>
Scalar set_mass(const Distribution<Scalar>& dist, const IdSet& set,
                const Vec<Scalar>* weights = nullptr) {
    return set_mass<Scalar>(dist.mass, set, weights);
}

// Mass-weighted mean of scores over set.
template <class Scalar>
Scalar coarse_score(const Vec<Scalar>& scores, const Vec<Scalar>& mass, const IdSet& set,
                    const Vec<Scalar>* weights = nullptr) {
    Scalar num(0), den(0);
    for (Index x : set) {
        Scalar d = weights ? Scalar((*weights)(x) * mass(x)) : Scalar(mass(x));
        num += scores(x) * d;
        den += d;
    }
    if (den == Scalar(0)) throw DomainError("coarse propensity of a zero-mass set", "zero_mass");
    return num / den;
}

template <class Scalar>
Scalar coarse_propensity(const Distribution<Scalar>& dist, const IdSet& set,
                         const Vec<Scalar>* weights = nullptr) {
    return coarse_score<Scalar>(dist.e, dist.mass, set, weights);
}

double diameter(const Eigen::MatrixXd& points, const IdSet& set, Norm p);
double diameter(const FiniteDistribution& dist, const IdSet& set);
double diameter(const FiniteDistribution& dist);

// Observed tuples. Ids tie rows to a distribution's support or to the
// distinct coordinate vectors of a raw file.
struct CensoredDataset {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::VectorXi t;
    Eigen::Matrix<Index, Eigen::Dynamic, 1> id;

    Index size() const { return y.size(); }
    Index dim() const { return x.cols(); }
    Index id_bound() const { return id.size() ? id.maxCoeff() + 1 : 0; }
};

void validate(const CensoredDataset& data);
CensoredDataset subset(const CensoredDataset& data, const std::vector<Index>& rows);
// Assigns ids by exact coordinate match against dist; unmatched coordinate
// vectors get fresh ids m, m+1, ...
void attach_ids(CensoredDataset& data, const FiniteDistribution& dist);
// Assigns ids 0.. to distinct coordinate vectors in order of first appearance.
void assign_ids(CensoredDataset& data);

} // namespace cipw
