#include "cipw/estimators.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <tuple>

#include "cipw/parallel.hpp"

namespace cipw {

double CoarseScoreTable::at(Index s) const {
    if (!has(s)) throw DataError("coarse score table has no entry for set " + std::to_string(s), "lookup");
    return values(s);
}

namespace {

inline double ipw_term(double y, int t, double e) {
    return t ? y / e : -(y / (1.0 - e));
}

inline double dr_term(double y, int t, double e, double m0, double m1) {
    return (t - e) * (y - m1) / e - (e - t) * (y - m0) / (1.0 - e);
}

} // namespace

double neyman(const CensoredDataset& data) {
    double s1 = 0.0, s0 = 0.0;
    Index n1 = 0, n0 = 0;
    for (Index i = 0; i < data.size(); ++i) {
        if (data.t(i)) {
            s1 += data.y(i);
            ++n1;
        } else {
            s0 += data.y(i);
            ++n0;
        }
    }
    if (n1 == 0 || n0 == 0) throw DomainError("Neyman estimator needs both arms", "empty_arm");
    return s1 / double(n1) - s0 / double(n0);
}

double ipw(const CensoredDataset& data, const PropensityMap& scores) {
    if (data.size() == 0) throw DomainError("empty dataset");
    double acc = 0.0;
    for (Index i = 0; i < data.size(); ++i)
        acc += ipw_term(data.y(i), data.t(i), scores.at(data.id(i)));
    return acc / double(data.size());
}

double trimmed_ipw(const CensoredDataset& data, const PropensityMap& scores, double eta) {
    if (!(eta > 0.0 && eta < 0.5)) throw ConfigError("trimming level must lie in (0, 1/2)");
    double acc = 0.0;
    Index kept = 0;
    for (Index i = 0; i < data.size(); ++i) {
        double e = scores.at(data.id(i));
        if (e < eta || e > 1.0 - eta) continue;
        acc += ipw_term(data.y(i), data.t(i), e);
        ++kept;
    }
    if (kept == 0) throw DomainError("every sample was trimmed", "empty_trim");
    return acc / double(kept);
}

std::vector<int> hard_assignment(const CensoredDataset& data, const Partition& part) {
    const Index m = std::max<Index>(data.id_bound(), 0);
    std::vector<int> of(m, kUncovered);
    for (size_t s = 0; s < part.sets.size(); ++s)
        for (Index x : part.sets[s])
            if (x >= 0 && x < m) of[x] = int(s);
    for (Index x : part.null_set)
        if (x >= 0 && x < m) of[x] = kNull;
    std::vector<int> out(data.size());
    for (Index i = 0; i < data.size(); ++i) {
        int s = of[data.id(i)];
        if (s == kUncovered)
            throw DataError("sample " + std::to_string(i) + " is not covered by the partition", "coverage");
        out[i] = s;
    }
    return out;
}

double cipw_assigned(const CensoredDataset& data, const std::vector<int>& assignment,
                     const CoarseScoreTable& coarse) {
    double acc = 0.0;
    Index kept = 0;
    for (Index i = 0; i < data.size(); ++i) {
        int s = assignment[i];
        if (s == kNull) continue;
        acc += ipw_term(data.y(i), data.t(i), coarse.at(s));
        ++kept;
    }
    if (kept == 0) throw DomainError("every sample lies in the null set", "all_null");
    return acc / double(kept);
}

double cipw(const CensoredDataset& data, const Partition& part, const CoarseScoreTable& coarse) {
    return cipw_assigned(data, hard_assignment(data, part), coarse);
}

std::vector<int> assign_fractional(const CensoredDataset& data, const FractionalPartition& fpart,
                                   std::uint64_t seed) {
    // identical tuples are told apart by their occurrence rank only
    std::map<std::tuple<Index, int, std::uint64_t>, std::uint64_t> seen;
    std::vector<int> out(data.size());
    for (Index i = 0; i < data.size(); ++i) {
        Index x = data.id(i);
        if (x < 0 || x >= Index(fpart.weights.size()) || fpart.weights[x].empty())
            throw DataError("sample " + std::to_string(i) + " has no partition weights", "coverage");
        const auto& row = fpart.weights[x];
        std::uint64_t ybits = std::bit_cast<std::uint64_t>(data.y(i));
        std::uint64_t rank = seen[{x, data.t(i), ybits}]++;
        std::uint64_t key = derive_seed(derive_seed(seed, std::uint64_t(x), ybits),
                                        std::uint64_t(data.t(i)), rank);
        double u = unit_draw(key);
        int pick = row.back().set;
        double cum = 0.0;
        for (const Share& sh : row) {
            cum += sh.w;
            if (sh.w > 0.0 && u < cum) {
                pick = sh.set;
                break;
            }
        }
        out[i] = pick;
    }
    return out;
}

double fractional_cipw(const CensoredDataset& data, const FractionalPartition& fpart,
                       const CoarseScoreTable& coarse, std::uint64_t seed) {
    return cipw_assigned(data, assign_fractional(data, fpart, seed), coarse);
}

double doubly_robust(const CensoredDataset& data, const ConditionalMeanMap& mu,
                     const PropensityMap& scores) {
    if (data.size() == 0) throw DomainError("empty dataset");
    double acc = 0.0;
    for (Index i = 0; i < data.size(); ++i) {
        Index x = data.id(i);
        if (x >= mu.mu0.size() || x >= mu.mu1.size())
            throw DataError("no conditional means for sample " + std::to_string(i), "lookup");
        acc += dr_term(data.y(i), data.t(i), scores.at(x), mu.mu0(x), mu.mu1(x));
    }
    return acc / double(data.size());
}

double coarse_doubly_robust(const CensoredDataset& data, const Partition& part,
                            const ConditionalMeanMap& mu, const CoarseScoreTable& coarse) {
    auto assignment = hard_assignment(data, part);
    double acc = 0.0;
    Index kept = 0;
    for (Index i = 0; i < data.size(); ++i) {
        int s = assignment[i];
        if (s == kNull) continue;
        Index x = data.id(i);
        if (x >= mu.mu0.size() || x >= mu.mu1.size())
            throw DataError("no conditional means for sample " + std::to_string(i), "lookup");
        acc += dr_term(data.y(i), data.t(i), coarse.at(s), mu.mu0(x), mu.mu1(x));
        ++kept;
    }
    if (kept == 0) throw DomainError("every sample lies in the null set", "all_null");
    return acc / double(kept);
}

CensoredDataset centered(const CensoredDataset& data, const ConditionalMeanMap& mu) {
    CensoredDataset out = data;
    for (Index i = 0; i < data.size(); ++i) {
        Index x = data.id(i);
        out.y(i) -= data.t(i) ? mu.mu1(x) : mu.mu0(x);
    }
    return out;
}

CoarseScoreTable empirical_coarse_scores(const CensoredDataset& data, const PropensityMap& scores_hat,
                                         const std::vector<int>& assignment, Index num_sets) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(num_sets);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(num_sets);
    for (Index i = 0; i < data.size(); ++i) {
        int s = assignment[i];
        if (s < 0) continue;
        sum(s) += scores_hat.at(data.id(i));
        count(s) += 1.0;
    }
    CoarseScoreTable table{Eigen::VectorXd::Constant(num_sets, std::nan("")), ScoreSource::empirical};
    for (Index s = 0; s < num_sets; ++s)
        if (count(s) > 0) table.values(s) = std::clamp(sum(s) / count(s), kScoreClip, 1.0 - kScoreClip);
    return table;
}

CoarseScoreTable empirical_coarse_scores(const CensoredDataset& data, const PropensityMap& scores_hat,
                                         const Partition& part) {
    return empirical_coarse_scores(data, scores_hat, hard_assignment(data, part), Index(part.sets.size()));
}

void require_complete(const CoarseScoreTable& coarse) {
    for (Index s = 0; s < coarse.values.size(); ++s)
        if (std::isnan(coarse.values(s)))
            throw DataError("set " + std::to_string(s) + " has no samples to estimate its score", "empty_set");
}

CoarseScoreTable analytic_coarse_scores(const FiniteDistribution& dist, const Partition& part,
                                        const PropensityMap& scores) {
    CoarseScoreTable table{Eigen::VectorXd(part.sets.size()), ScoreSource::analytic};
    for (size_t s = 0; s < part.sets.size(); ++s)
        table.values(s) = coarse_score<double>(scores.values, dist.mass, part.sets[s]);
    return table;
}

CoarseScoreTable analytic_coarse_scores(const FiniteDistribution& dist, const FractionalPartition& fpart,
                                        const PropensityMap& scores) {
    const Index k = Index(fpart.sets.size());
    Eigen::VectorXd num = Eigen::VectorXd::Zero(k), den = Eigen::VectorXd::Zero(k);
    for (Index x = 0; x < Index(fpart.weights.size()); ++x)
        for (const Share& sh : fpart.weights[x]) {
            if (sh.set == kNull) continue;
            num(sh.set) += sh.w * dist.mass(x) * scores.at(x);
            den(sh.set) += sh.w * dist.mass(x);
        }
    CoarseScoreTable table{Eigen::VectorXd(k), ScoreSource::analytic};
    for (Index s = 0; s < k; ++s) {
        if (!(den(s) > 0.0)) throw DomainError("coarse propensity of a zero-mass set", "zero_mass");
        table.values(s) = num(s) / den(s);
    }
    return table;
}

} // namespace cipw
