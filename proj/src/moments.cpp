#include "cipw/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cipw {

double inverse_count_mean(long n, double q) {
    if (n < 1) throw ConfigError("sample count must be at least 1");
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("retained fraction must lie in (0,1]", "all_null");
    if (q == 1.0) return 1.0 / double(n);
    const double mean = double(n) * q;
    const double sd = std::sqrt(double(n) * q * (1.0 - q));
    long lo = std::max<long>(1, long(std::floor(mean - 40.0 * sd - 40.0)));
    long hi = std::min<long>(n, long(std::ceil(mean + 40.0 * sd + 40.0)));
    const double lq = std::log(q), lp = std::log1p(-q);
    const double lgn = std::lgamma(double(n) + 1.0);
    double acc = 0.0;
    for (long j = lo; j <= hi; ++j) {
        double lpmf = lgn - std::lgamma(double(j) + 1.0) - std::lgamma(double(n - j) + 1.0) + j * lq + (n - j) * lp;
        acc += std::exp(lpmf) / double(j);
    }
    // P(K = 0) = (1-q)^n
    return acc / -std::expm1(double(n) * lp);
}

Extended expand(const FiniteDistribution& dist, const FractionalPartition& fpart, const PropensityMap& scores) {
    Index copies = 0;
    for (const auto& row : fpart.weights)
        for (const Share& sh : row)
            if (sh.w > 0.0) ++copies;
    Extended ex;
    auto& d = ex.dist;
    d.points.resize(copies, dist.dim());
    for (auto* v : {&d.mass, &d.e, &d.mu0, &d.mu1, &d.v0, &d.v1}) v->resize(copies);
    d.p = dist.p;
    ex.scores.values.resize(copies);
    ex.scores.label = scores.label;
    ex.part.sets.assign(fpart.sets.size(), {});
    Index c = 0;
    for (Index x = 0; x < Index(fpart.weights.size()); ++x) {
        for (const Share& sh : fpart.weights[x]) {
            if (!(sh.w > 0.0)) continue;
            d.points.row(c) = dist.points.row(x);
            d.mass(c) = dist.mass(x) * sh.w;
            d.e(c) = dist.e(x);
            d.mu0(c) = dist.mu0(x);
            d.mu1(c) = dist.mu1(x);
            d.v0(c) = dist.v0(x);
            d.v1(c) = dist.v1(x);
            ex.scores.values(c) = scores.at(x);
            ex.origin.push_back(x);
            if (sh.set == kNull)
                ex.part.null_set.push_back(c);
            else
                ex.part.sets[sh.set].push_back(c);
            ++c;
        }
    }
    return ex;
}

namespace {

double null_mass(const FiniteDistribution& d, const Partition& part) {
    double nm = 0.0;
    for (Index x : part.null_set) nm += d.mass(x);
    return nm;
}

MomentReport report(const FiniteDistribution& d, const Partition& part, const Eigen::VectorXd& scores, long n,
                    CountModel model) {
    if (n < 1) throw ConfigError("sample count must be at least 1");
    double factor = model == CountModel::fixed ? 1.0 / double(n)
                                               : inverse_count_mean(n, 1.0 - null_mass(d, part));
    auto core = moments_core<double>(d, part, scores, factor);
    MomentReport r;
    r.expectation = core.expectation;
    r.bias = core.bias;
    r.variance = std::max(0.0, core.variance);
    r.mse = r.bias * r.bias + r.variance;
    r.rmse = std::sqrt(r.mse);
    r.n = n;
    return r;
}

} // namespace

double cipw_expectation(const FiniteDistribution& dist, const Partition& part, const PropensityMap& scores) {
    return moments_core<double>(dist, part, scores.values, 0.0).expectation;
}

double cipw_expectation(const FiniteDistribution& dist, const FractionalPartition& fpart,
                        const PropensityMap& scores) {
    auto ex = expand(dist, fpart, scores);
    return moments_core<double>(ex.dist, ex.part, ex.scores.values, 0.0).expectation;
}

MomentReport cipw_moments(const FiniteDistribution& dist, const Partition& part, const PropensityMap& scores,
                          long n, CountModel model) {
    return report(dist, part, scores.values, n, model);
}

MomentReport cipw_moments(const FiniteDistribution& dist, const FractionalPartition& fpart,
                          const PropensityMap& scores, long n, CountModel model) {
    auto ex = expand(dist, fpart, scores);
    return report(ex.dist, ex.part, ex.scores.values, n, model);
}

namespace {

// objective over per-original-point scores
template <class Eval>
RobustResult search_ball(const PerturbationBall& ball, RobustSearch search, Eval eval) {
    validate(ball);
    const Eigen::VectorXd& e = ball.center.values;
    const Index m = e.size();
    const double eps = ball.radius;
    RobustResult best;
    best.maximizer = {e, ScoreLabel::estimate};
    best.rmse = eval(e);
    if (eps == 0.0) {
        best.certified = true;
        return best;
    }
    if (search.mode == RobustSearch::corners) {
        if (m > 20) throw ConfigError("corner search is limited to 20 points", "size");
        best.rmse = -1.0;
        Eigen::VectorXd hat(m);
        for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << m); ++mask) {
            for (Index i = 0; i < m; ++i) hat(i) = e(i) + ((mask >> i) & 1 ? eps : -eps);
            double v = eval(hat);
            if (v > best.rmse) {
                best.rmse = v;
                best.maximizer.values = hat;
            }
        }
        best.certified = true;
        return best;
    }
    const int k = std::max(2, search.grid_points);
    Eigen::VectorXd hat = e;
    double cur = best.rmse;
    for (int pass = 0; pass < search.max_passes; ++pass) {
        bool improved = false;
        for (Index i = 0; i < m; ++i) {
            double arg = hat(i);
            for (int j = 0; j < k; ++j) {
                hat(i) = e(i) - eps + 2.0 * eps * double(j) / double(k - 1);
                double v = eval(hat);
                if (v > cur) {
                    cur = v;
                    arg = hat(i);
                    improved = true;
                }
            }
            hat(i) = arg;
        }
        if (!improved) break;
    }
    best.rmse = cur;
    best.maximizer.values = hat;
    best.certified = false;
    return best;
}

} // namespace

RobustResult robust_rmse(const FiniteDistribution& dist, const Partition& part, const PerturbationBall& ball,
                         long n, RobustSearch search, CountModel model) {
    return search_ball(ball, search, [&](const Eigen::VectorXd& hat) {
        return report(dist, part, hat, n, model).rmse;
    });
}

RobustResult robust_rmse(const FiniteDistribution& dist, const FractionalPartition& fpart,
                         const PerturbationBall& ball, long n, RobustSearch search, CountModel model) {
    auto ex = expand(dist, fpart, ball.center);
    Eigen::VectorXd copy_scores(ex.origin.size());
    return search_ball(ball, search, [&](const Eigen::VectorXd& hat) {
        for (size_t c = 0; c < ex.origin.size(); ++c) copy_scores(c) = hat(ex.origin[c]);
        return report(ex.dist, ex.part, copy_scores, n, model).rmse;
    });
}

namespace {

GoodLocalReport good_local(const FiniteDistribution& d, const Partition& part, double alpha, double beta,
                           double gamma) {
    GoodLocalReport r;
    r.null_mass = null_mass(d, part);
    r.min_overlap = std::numeric_limits<double>::infinity();
    for (const IdSet& set : part.sets) {
        r.max_diameter = std::max(r.max_diameter, diameter(d.points, set, d.p));
        double es = coarse_propensity<double>(d, set);
        r.min_overlap = std::min(r.min_overlap, es * (1.0 - es));
    }
    r.verdict = r.null_mass <= gamma && r.max_diameter <= alpha && r.min_overlap >= beta;
    return r;
}

} // namespace

GoodLocalReport check_good_local(const FiniteDistribution& dist, const Partition& part, double alpha,
                                 double beta, double gamma) {
    return good_local(dist, part, alpha, beta, gamma);
}

GoodLocalReport check_good_local(const FiniteDistribution& dist, const FractionalPartition& fpart,
                                 double alpha, double beta, double gamma) {
    auto ex = expand(dist, fpart, true_scores(dist));
    return good_local(ex.dist, ex.part, alpha, beta, gamma);
}

namespace {

PartitionDiagnostics diagnostics(const FiniteDistribution& d, const Partition& part) {
    PartitionDiagnostics out;
    for (const IdSet& set : part.sets) {
        double span = 0.0;
        for (const Eigen::VectorXd* mu : {&d.mu0, &d.mu1}) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (Index x : set) {
                lo = std::min(lo, (*mu)(x));
                hi = std::max(hi, (*mu)(x));
            }
            span = std::max(span, hi - lo);
        }
        out.span.push_back(span);
        out.mass.push_back(set_mass<double>(d, set));
        out.diameter.push_back(diameter(d.points, set, d.p));
    }
    return out;
}

BiasVarBound bound17(const FiniteDistribution& d, const Partition& part, const Eigen::VectorXd& hat, long n,
                     std::optional<double> L) {
    if (n < 1) throw ConfigError("sample count must be at least 1");
    const double dn = null_mass(d, part);
    if (dn > 0.5) throw DomainError("bound needs D(N) <= 1/2", "precondition");
    auto diag = diagnostics(d, part);
    BiasVarBound b;
    double spread = 0.0, inv = 0.0;
    for (size_t s = 0; s < part.sets.size(); ++s) {
        double local = L ? *L * diag.diameter[s] : diag.span[s];
        spread += diag.mass[s] * local;
        double es = coarse_score<double>(hat, d.mass, part.sets[s]);
        inv += diag.mass[s] / (es * (1.0 - es));
    }
    b.bias_bound = 4.0 * spread + 8.0 * dn;
    b.var_bound = inv / (double(n) * (1.0 - dn));
    return b;
}

} // namespace

PartitionDiagnostics diagnose(const FiniteDistribution& dist, const Partition& part) {
    return diagnostics(dist, part);
}

PartitionDiagnostics diagnose(const FiniteDistribution& dist, const FractionalPartition& fpart) {
    auto ex = expand(dist, fpart, true_scores(dist));
    return diagnostics(ex.dist, ex.part);
}

double lipschitz_ratio(const FiniteDistribution& d) {
    double best = 0.0;
    for (Index a = 0; a < d.size(); ++a)
        for (Index b = a + 1; b < d.size(); ++b) {
            double dist = norm_distance(d.points.row(a).transpose(), d.points.row(b).transpose(), d.p);
            double jump = std::max(std::abs(d.mu0(a) - d.mu0(b)), std::abs(d.mu1(a) - d.mu1(b)));
            if (dist > 0.0) best = std::max(best, jump / dist);
        }
    return best;
}

BiasVarBound eq17_bound(const FiniteDistribution& dist, const Partition& part, const PropensityMap& scores_hat,
                        long n, std::optional<double> L) {
    return bound17(dist, part, scores_hat.values, n, L);
}

BiasVarBound eq17_bound(const FiniteDistribution& dist, const FractionalPartition& fpart,
                        const PropensityMap& scores_hat, long n, std::optional<double> L) {
    auto ex = expand(dist, fpart, scores_hat);
    return bound17(ex.dist, ex.part, ex.scores.values, n, L);
}

double good_local_rmse_bound(double alpha, double beta, double gamma, double eps, long n, double L) {
    return kGoodLocalSlack * (alpha * L + eps / beta + gamma + 1.0 / std::sqrt(double(n) * beta));
}

} // namespace cipw
