#include "cipw/model.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace cipw {

std::string norm_name(Norm p) {
    switch (p) {
    case Norm::L1: return "1";
    case Norm::L2: return "2";
    default: return "inf";
    }
}

double norm_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b, Norm p) {
    switch (p) {
    case Norm::L1: return (a - b).lpNorm<1>();
    case Norm::L2: return (a - b).norm();
    default: return (a - b).lpNorm<Eigen::Infinity>();
    }
}

namespace {

std::string at_point(const char* what, Index i) {
    std::ostringstream os;
    os << what << " at point " << i;
    return os.str();
}

} // namespace

void validate(const FiniteDistribution& d) {
    const Index m = d.size();
    if (m < 1) throw DataError("distribution has no support points");
    if (d.dim() < 1) throw DataError("covariate dimension must be at least 1");
    for (auto* v : {&d.mass, &d.e, &d.mu0, &d.mu1, &d.v0, &d.v1})
        if (v->size() != m) throw DataError("per-point vector length differs from point count");
    if (!d.points.allFinite()) throw DataError("non-finite covariate coordinates");
    for (Index i = 0; i < m; ++i) {
        if (!(d.mass(i) > 0.0 && d.mass(i) <= 1.0)) throw DataError(at_point("mass outside (0,1]", i));
        if (!(d.e(i) > 0.0 && d.e(i) < 1.0)) throw DataError(at_point("propensity outside (0,1)", i));
        if (!(std::abs(d.mu0(i)) <= 1.0 && std::abs(d.mu1(i)) <= 1.0))
            throw DataError(at_point("conditional mean outside [-1,1]", i));
        if (!(d.v0(i) >= 0.0 && d.v0(i) <= 1.0 && d.v1(i) >= 0.0 && d.v1(i) <= 1.0))
            throw DataError(at_point("conditional variance outside [0,1]", i));
    }
    if (std::abs(d.mass.sum() - 1.0) > 1e-12) throw DataError("masses do not sum to 1");
    // lexicographic sort to find duplicate coordinates
    std::vector<Index> order(m);
    std::iota(order.begin(), order.end(), 0);
    auto row_less = [&](Index a, Index b) {
        for (Index j = 0; j < d.dim(); ++j) {
            if (d.points(a, j) != d.points(b, j)) return d.points(a, j) < d.points(b, j);
        }
        return false;
    };
    std::sort(order.begin(), order.end(), row_less);
    for (Index i = 1; i < m; ++i)
        if (!row_less(order[i - 1], order[i]))
            throw DataError(at_point("duplicate covariate coordinates", order[i]));
}

bool moment_feasible(double mu, double v) {
    return v <= (1.0 - mu) * (1.0 + mu) + 1e-12;
}

void check_feasible(const FiniteDistribution& d) {
    for (Index i = 0; i < d.size(); ++i) {
        if (!moment_feasible(d.mu0(i), d.v0(i)) || !moment_feasible(d.mu1(i), d.v1(i)))
            throw DataError(at_point("no [-1,1] outcome law has these (mu, v)", i), "feasibility");
    }
}

double PropensityMap::at(Index id) const {
    if (id < 0 || id >= values.size() || std::isnan(values(id)))
        throw DataError(at_point("no propensity score", id), "lookup");
    return values(id);
}

PropensityMap true_scores(const FiniteDistribution& dist) {
    return {dist.e, ScoreLabel::truth};
}

void validate(const PropensityMap& s) {
    for (Index i = 0; i < s.size(); ++i) {
        double v = s.values(i);
        if (std::isnan(v)) continue;  // id without a score
        if (!(v > 0.0 && v < 1.0)) throw DataError(at_point("score outside (0,1)", i));
    }
}

void validate(const PerturbationBall& ball) {
    validate(ball.center);
    if (!(ball.radius >= 0.0)) throw ConfigError("ball radius must be non-negative");
    double margin = 1.0;
    for (Index i = 0; i < ball.center.size(); ++i) {
        double v = ball.center.values(i);
        if (!std::isnan(v)) margin = std::min({margin, v, 1.0 - v});
    }
    if (!(ball.radius < margin))
        throw ConfigError("radius must stay below min(e, 1-e) over the support");
}

Partition singleton_partition(Index m) {
    Partition part;
    part.sets.reserve(m);
    for (Index i = 0; i < m; ++i) part.sets.push_back({i});
    return part;
}

Partition merged_partition(Index m) {
    Partition part;
    IdSet all(m);
    std::iota(all.begin(), all.end(), Index(0));
    part.sets.push_back(all);
    return part;
}

std::vector<int> membership(const Partition& part, Index m) {
    std::vector<int> of(m, kUncovered);
    auto claim = [&](Index x, int s) {
        if (x < 0 || x >= m) throw DataError(at_point("partition id out of range", x), "coverage");
        if (of[x] != kUncovered) throw DataError(at_point("partition sets overlap", x), "coverage");
        of[x] = s;
    };
    for (size_t s = 0; s < part.sets.size(); ++s)
        for (Index x : part.sets[s]) claim(x, int(s));
    for (Index x : part.null_set) claim(x, kNull);
    return of;
}

void validate(const Partition& part, Index m) {
    for (const auto& s : part.sets)
        if (s.empty()) throw DataError("partition has an empty set", "coverage");
    auto of = membership(part, m);
    for (Index x = 0; x < m; ++x)
        if (of[x] == kUncovered) throw DataError(at_point("partition misses", x), "coverage");
}

FractionalPartition to_fractional(const Partition& part, Index m) {
    FractionalPartition fp{part.sets, part.null_set, std::vector<std::vector<Share>>(m)};
    auto of = membership(part, m);
    for (Index x = 0; x < m; ++x)
        if (of[x] != kUncovered) fp.weights[x].push_back({of[x], 1.0});
    return fp;
}

void validate_rows(const FractionalPartition& fp) {
    const Index m = Index(fp.weights.size());
    const int k = int(fp.sets.size());
    // sets listing each id as a member
    std::vector<std::vector<int>> listed(m);
    auto mark = [&](int s, Index x) {
        if (x < 0 || x >= m) throw DataError(at_point("partition id out of range", x), "coverage");
        listed[x].push_back(s);
    };
    for (int s = 0; s < k; ++s) {
        if (fp.sets[s].empty()) throw DataError("partition has an empty set", "coverage");
        for (Index x : fp.sets[s]) mark(s, x);
    }
    for (Index x : fp.null_set) mark(kNull, x);
    for (Index x = 0; x < m; ++x) {
        const auto& row = fp.weights[x];
        if (row.empty() && listed[x].empty()) continue;
        double total = 0.0;
        for (const Share& sh : row) {
            if (sh.set < kNull || sh.set >= k) throw DataError(at_point("weight names an unknown set", x));
            if (!(sh.w >= 0.0 && sh.w <= 1.0)) throw DataError(at_point("weight outside [0,1]", x));
            bool member = std::find(listed[x].begin(), listed[x].end(), sh.set) != listed[x].end();
            if (sh.w > 0.0 && !member)
                throw DataError(at_point("positive weight outside the set's support", x), "coverage");
            total += sh.w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw DataError(at_point("weights do not sum to 1", x));
        for (int s : listed[x]) {
            bool positive = false;
            for (const Share& sh : row)
                if (sh.set == s && sh.w > 0.0) positive = true;
            if (!positive) throw DataError(at_point("member without positive weight", x), "coverage");
        }
    }
}

void validate(const FractionalPartition& fp, Index m) {
    if (Index(fp.weights.size()) != m) throw DataError("weight rows differ from point count", "coverage");
    validate_rows(fp);
    for (Index x = 0; x < m; ++x)
        if (fp.weights[x].empty()) throw DataError(at_point("partition misses", x), "coverage");
}

IdSet outlier_set(const PropensityMap& scores, const IdSet& support, double beta) {
    if (!(beta > 0.0 && beta <= 0.25)) throw ConfigError("beta must lie in (0, 1/4]");
    IdSet out;
    for (Index x : support) {
        double e = scores.at(x);
        if (e * (1.0 - e) < beta) out.push_back(x);
    }
    return out;
}

IdSet outlier_set(const PropensityMap& scores, double beta) {
    IdSet all(scores.size());
    std::iota(all.begin(), all.end(), Index(0));
    return outlier_set(scores, all, beta);
}

double diameter(const Eigen::MatrixXd& points, const IdSet& set, Norm p) {
    if (set.empty()) throw DomainError("diameter of an empty set");
    double best = 0.0;
    for (size_t a = 0; a < set.size(); ++a)
        for (size_t b = a + 1; b < set.size(); ++b)
            best = std::max(best, norm_distance(points.row(set[a]).transpose(),
                                                points.row(set[b]).transpose(), p));
    return best;
}

double diameter(const FiniteDistribution& dist, const IdSet& set) {
    return diameter(dist.points, set, dist.p);
}

double diameter(const FiniteDistribution& dist) {
    IdSet all(dist.size());
    std::iota(all.begin(), all.end(), Index(0));
    if (dist.p == Norm::Linf || dist.dim() == 1) {
        // coordinate ranges give the answer without the pair scan
        Eigen::RowVectorXd span = dist.points.colwise().maxCoeff() - dist.points.colwise().minCoeff();
        return span.maxCoeff();
    }
    return diameter(dist.points, all, dist.p);
}

void validate(const CensoredDataset& data) {
    const Index n = data.size();
    if (n < 1) throw DataError("dataset is empty");
    if (data.t.size() != n || data.id.size() != n || data.x.rows() != n)
        throw DataError("dataset columns have different lengths");
    for (Index i = 0; i < n; ++i) {
        if (!std::isfinite(data.y(i)) || std::abs(data.y(i)) > 1.0)
            throw DataError(at_point("outcome outside [-1,1]", i));
        if (data.t(i) != 0 && data.t(i) != 1) throw DataError(at_point("treatment not in {0,1}", i));
        if (data.id(i) < 0) throw DataError(at_point("sample without covariate id", i));
    }
    if (!data.x.allFinite()) throw DataError("non-finite covariates in dataset");
}

CensoredDataset subset(const CensoredDataset& data, const std::vector<Index>& rows) {
    CensoredDataset out;
    const Index n = Index(rows.size());
    out.x.resize(n, data.dim());
    out.y.resize(n);
    out.t.resize(n);
    out.id.resize(n);
    for (Index i = 0; i < n; ++i) {
        Index r = rows[i];
        out.x.row(i) = data.x.row(r);
        out.y(i) = data.y(r);
        out.t(i) = data.t(r);
        out.id(i) = data.id(r);
    }
    return out;
}

namespace {

using Key = std::vector<double>;

Key make_key(const Eigen::MatrixXd& x, Index i) {
    Key k(x.cols());
    for (Index j = 0; j < x.cols(); ++j) k[j] = x(i, j);
    return k;
}

} // namespace

void attach_ids(CensoredDataset& data, const FiniteDistribution& dist) {
    if (data.dim() != dist.dim()) throw DataError("dataset and distribution dimensions differ");
    std::map<Key, Index> index;
    for (Index i = 0; i < dist.size(); ++i) index.emplace(make_key(dist.points, i), i);
    Index next = dist.size();
    data.id.resize(data.size());
    for (Index i = 0; i < data.size(); ++i) {
        auto [it, fresh] = index.emplace(make_key(data.x, i), next);
        if (fresh) ++next;
        data.id(i) = it->second;
    }
}

void assign_ids(CensoredDataset& data) {
    std::map<Key, Index> index;
    data.id.resize(data.size());
    for (Index i = 0; i < data.size(); ++i) {
        auto [it, fresh] = index.emplace(make_key(data.x, i), Index(index.size()));
        data.id(i) = it->second;
    }
}

} // namespace cipw
