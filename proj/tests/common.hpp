#pragma once

#include <random>
#include <vector>

#include "cipw/estimators.hpp"
#include "cipw/model.hpp"
#include "cipw/parallel.hpp"

namespace testutil {

using cipw::FiniteDistribution;
using cipw::Index;

struct RandomDistOptions {
    int dim = 1;
    double e_lo = 0.05, e_hi = 0.95;
    bool equal_variances = false;  // v0 = v1
};

// Random feasible distribution on m distinct grid points.
inline FiniteDistribution random_distribution(Index m, cipw::Rng& rng, RandomDistOptions o = {}) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FiniteDistribution d;
    d.points.resize(m, o.dim);
    for (Index i = 0; i < m; ++i)
        for (int k = 0; k < o.dim; ++k) d.points(i, k) = k == 0 ? double(i) : std::floor(10 * unit(rng));
    for (auto* v : {&d.mass, &d.e, &d.mu0, &d.mu1, &d.v0, &d.v1}) v->resize(m);
    for (Index i = 0; i < m; ++i) {
        d.mass(i) = 0.2 + unit(rng);
        d.e(i) = o.e_lo + (o.e_hi - o.e_lo) * unit(rng);
        d.mu0(i) = 1.8 * unit(rng) - 0.9;
        d.mu1(i) = 1.8 * unit(rng) - 0.9;
        double cap = std::min(1.0 - d.mu0(i) * d.mu0(i), 1.0 - d.mu1(i) * d.mu1(i));
        d.v0(i) = (o.equal_variances ? cap : 1.0 - d.mu0(i) * d.mu0(i)) * unit(rng);
        d.v1(i) = o.equal_variances ? d.v0(i) : (1.0 - d.mu1(i) * d.mu1(i)) * unit(rng);
    }
    d.mass /= d.mass.sum();
    return d;
}

// Dataset from (id, y, t) triples; covariate i sits at coordinate i.
struct Row {
    Index id;
    double y;
    int t;
};

inline cipw::CensoredDataset dataset(const std::vector<Row>& rows) {
    cipw::CensoredDataset c;
    const Index n = Index(rows.size());
    c.x.resize(n, 1);
    c.y.resize(n);
    c.t.resize(n);
    c.id.resize(n);
    for (Index i = 0; i < n; ++i) {
        c.x(i, 0) = double(rows[i].id);
        c.y(i) = rows[i].y;
        c.t(i) = rows[i].t;
        c.id(i) = rows[i].id;
    }
    return c;
}

inline cipw::PropensityMap scores(std::vector<double> v) {
    return {Eigen::Map<Eigen::VectorXd>(v.data(), Index(v.size())), cipw::ScoreLabel::truth};
}

inline cipw::CoarseScoreTable table(std::vector<double> v) {
    return {Eigen::Map<Eigen::VectorXd>(v.data(), Index(v.size())), cipw::ScoreSource::analytic};
}

// random partition of [m] with a random null set that leaves at least one point
inline cipw::Partition random_partition(Index m, cipw::Rng& rng, double null_prob = 0.2) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    cipw::Partition part;
    std::vector<Index> kept;
    for (Index x = 0; x < m; ++x) {
        if (unit(rng) < null_prob && x + 1 < m) part.null_set.push_back(x);
        else kept.push_back(x);
    }
    for (Index x : kept) {
        size_t s = size_t(unit(rng) * double(part.sets.size() + 1));
        if (s >= part.sets.size()) part.sets.push_back({});
        part.sets[s].push_back(x);
    }
    return part;
}

} // namespace testutil
