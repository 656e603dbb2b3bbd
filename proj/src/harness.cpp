#include "cipw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cipw/parallel.hpp"

namespace cipw {

Estimator make_ipw() {
    return {"ipw", [](const CensoredDataset& d, const PropensityMap& s, std::uint64_t) { return ipw(d, s); }};
}

Estimator make_neyman() {
    return {"neyman", [](const CensoredDataset& d, const PropensityMap&, std::uint64_t) { return neyman(d); }};
}

Estimator make_trimmed_ipw(double eta) {
    return {"trimmed_ipw",
            [eta](const CensoredDataset& d, const PropensityMap& s, std::uint64_t) { return trimmed_ipw(d, s, eta); }};
}

Estimator make_cipw(const Partition& part, const CoarseScoreTable& coarse, std::string name) {
    return {std::move(name), [part, coarse](const CensoredDataset& d, const PropensityMap&, std::uint64_t) {
                return cipw(d, part, coarse);
            }};
}

Estimator make_cipw_empirical(const Partition& part, std::string name) {
    return {std::move(name), [part](const CensoredDataset& d, const PropensityMap& s, std::uint64_t) {
                return cipw(d, part, empirical_coarse_scores(d, s, part));
            }};
}

Estimator make_fractional_cipw(const FractionalPartition& fpart, std::string name) {
    return {std::move(name), [fpart](const CensoredDataset& d, const PropensityMap& s, std::uint64_t seed) {
                auto assignment = assign_fractional(d, fpart, seed);
                auto coarse = empirical_coarse_scores(d, s, assignment, Index(fpart.sets.size()));
                return cipw_assigned(d, assignment, coarse);
            }};
}

Estimator make_robust_ate(const FinderConfig& cfg) {
    return {"robust_ate", [cfg](const CensoredDataset& d, const PropensityMap& s, std::uint64_t seed) {
                FinderConfig c = cfg;
                c.split_seed = seed;
                return robust_ate(d, s, c);
            }};
}

Estimator make_doubly_robust(const ConditionalMeanMap& mu) {
    return {"doubly_robust", [mu](const CensoredDataset& d, const PropensityMap& s, std::uint64_t) {
                return doubly_robust(d, mu, s);
            }};
}

namespace {

void check_reps(long n, long R) {
    if (n < 1) throw ConfigError("sample size must be at least 1");
    if (R < kMinReplications) throw ConfigError("need at least 100 replications");
}

// Replications are processed in fixed-size blocks so that partial sums, and
// therefore the reports, do not depend on the worker count.
constexpr long kBlock = 512;

} // namespace

Eigen::VectorXd mc_estimates(const FiniteDistribution& dist, const Estimator& est, const PropensityMap& scores_hat,
                             long n, long R, std::uint64_t seed) {
    check_reps(n, R);
    check_feasible(dist);
    Eigen::VectorXd out(R);
    parallel_for(R, [&](Index lo, Index hi) {
        for (Index r = lo; r < hi; ++r) {
            auto data = sample_dataset(dist, n, derive_seed(seed, std::uint64_t(r)));
            try {
                out(r) = est.run(data, scores_hat, derive_seed(seed, std::uint64_t(r), 1));
            } catch (const DomainError&) {
                out(r) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    });
    return out;
}

McReport summarize(const Eigen::VectorXd& est, double tau) {
    McReport r;
    r.R = long(est.size());
    double sum = 0, sq = 0, sq2 = 0;
    long valid = 0;
    for (Index i = 0; i < est.size(); ++i) {
        if (std::isnan(est(i))) continue;
        ++valid;
        double err = est(i) - tau;
        sum += est(i);
        sq += err * err;
        sq2 += err * err * err * err;
    }
    r.failures = r.R - valid;
    if (valid == 0) throw DomainError("every replication failed", "all_failed");
    r.mean = sum / valid;
    r.bias = r.mean - tau;
    r.mse = sq / valid;
    r.rmse = std::sqrt(r.mse);
    double var_sq = valid > 1 ? std::max(0.0, (sq2 - valid * r.mse * r.mse) / (valid - 1)) : 0.0;
    r.mse_se = std::sqrt(var_sq / valid);
    // delta method: d sqrt(m) = dm / (2 sqrt(m))
    r.se = r.rmse > 0 ? r.mse_se / (2.0 * r.rmse) : 0.0;
    return r;
}

McReport mc_rmse(const FiniteDistribution& dist, const Estimator& est, const PropensityMap& scores_hat, long n,
                 long R, std::uint64_t seed) {
    McReport r = summarize(mc_estimates(dist, est, scores_hat, n, R, seed), true_ate(dist));
    r.estimator = est.name;
    r.n = n;
    r.seed = seed;
    return r;
}

std::vector<McReport> mc_rmse_partitions(const FiniteDistribution& dist, const std::vector<Partition>& parts,
                                         const std::vector<CoarseScoreTable>& coarse, long n, long R,
                                         std::uint64_t seed) {
    check_reps(n, R);
    check_feasible(dist);
    if (parts.size() != coarse.size()) throw ConfigError("one coarse table per partition");
    const Index m = dist.size(), P = Index(parts.size());
    Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(P, m), c0 = c1, keep = c1;
    for (Index p = 0; p < P; ++p) {
        validate(parts[p], m);
        for (size_t s = 0; s < parts[p].sets.size(); ++s) {
            double es = coarse[p].at(Index(s));
            if (!(es > 0.0 && es < 1.0)) throw DomainError("coarse score outside (0,1)", "infinite");
            for (Index x : parts[p].sets[s]) {
                c1(p, x) = 1.0 / es;
                c0(p, x) = 1.0 / (1.0 - es);
                keep(p, x) = 1.0;
            }
        }
    }
    const double tau = true_ate(dist);
    const long blocks = (R + kBlock - 1) / kBlock;
    // per block and partition: valid, sum, sum of squared errors, sum of fourth powers
    std::vector<Eigen::MatrixXd> acc(blocks, Eigen::MatrixXd::Zero(P, 4));
    parallel_for(blocks, [&](Index lo, Index hi) {
        Eigen::VectorXd s1(m), s0(m), cnt(m);
        for (Index b = lo; b < hi; ++b) {
            auto& a = acc[b];
            for (long r = b * kBlock; r < std::min<long>(R, (b + 1) * kBlock); ++r) {
                auto data = sample_dataset(dist, n, derive_seed(seed, std::uint64_t(r)));
                s1.setZero();
                s0.setZero();
                cnt.setZero();
                for (Index i = 0; i < data.size(); ++i) {
                    Index x = data.id(i);
                    (data.t(i) ? s1 : s0)(x) += data.y(i);
                    cnt(x) += 1.0;
                }
                Eigen::VectorXd num = c1 * s1 - c0 * s0;
                Eigen::VectorXd den = keep * cnt;
                for (Index p = 0; p < P; ++p) {
                    if (den(p) == 0.0) continue;
                    double est = num(p) / den(p), err = est - tau;
                    a(p, 0) += 1.0;
                    a(p, 1) += est;
                    a(p, 2) += err * err;
                    a(p, 3) += err * err * err * err;
                }
            }
        }
    });
    Eigen::MatrixXd tot = Eigen::MatrixXd::Zero(P, 4);
    for (const auto& a : acc) tot += a;
    std::vector<McReport> out(P);
    for (Index p = 0; p < P; ++p) {
        McReport& r = out[p];
        r.estimator = "cipw";
        r.n = n;
        r.R = R;
        r.seed = seed;
        const double valid = tot(p, 0);
        r.failures = R - long(valid);
        if (valid == 0) {
            r.mean = r.bias = r.mse = r.rmse = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        r.mean = tot(p, 1) / valid;
        r.bias = r.mean - tau;
        r.mse = tot(p, 2) / valid;
        r.rmse = std::sqrt(r.mse);
        double var_sq = valid > 1 ? std::max(0.0, (tot(p, 3) - valid * r.mse * r.mse) / (valid - 1)) : 0.0;
        r.mse_se = std::sqrt(var_sq / valid);
        r.se = r.rmse > 0 ? r.mse_se / (2.0 * r.rmse) : 0.0;
    }
    return out;
}

double ks_normal(Eigen::VectorXd z) {
    std::sort(z.data(), z.data() + z.size());
    const double R = double(z.size());
    double d = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
        double cdf = 0.5 * std::erfc(-z(i) / std::sqrt(2.0));
        d = std::max({d, (i + 1) / R - cdf, cdf - i / R});
    }
    return d;
}

NormalityReport normality_from(const Eigen::VectorXd& est, double threshold) {
    NormalityReport rep;
    rep.threshold = threshold;
    std::vector<double> v;
    for (Index i = 0; i < est.size(); ++i)
        if (!std::isnan(est(i))) v.push_back(est(i));
    rep.failures = long(est.size()) - long(v.size());
    if (v.size() < 2) throw DomainError("too few estimates to standardize", "degenerate");
    Eigen::Map<Eigen::VectorXd> x(v.data(), Index(v.size()));
    rep.mean = x.mean();
    rep.sd = std::sqrt((x.array() - rep.mean).square().sum() / double(x.size() - 1));
    if (!(rep.sd > 0.0)) throw DomainError("estimates have zero spread", "degenerate");
    rep.standardized = (x.array() - rep.mean) / rep.sd;
    rep.ks = ks_normal(rep.standardized);
    rep.pass = rep.ks < threshold;
    return rep;
}

NormalityReport normality_check(const FiniteDistribution& dist, const Partition& part,
                                const PropensityMap& scores_hat, long n, long R, std::uint64_t seed,
                                double threshold) {
    auto est = make_cipw(part, analytic_coarse_scores(dist, part, scores_hat));
    return normality_from(mc_estimates(dist, est, scores_hat, n, R, seed), threshold);
}

std::vector<ModeScores> adversary_menu(const FiniteDistribution& dist, const PerturbationBall& ball,
                                       std::uint64_t seed) {
    std::vector<ModeScores> menu{{"e", ball.center}};
    if (ball.radius == 0.0) return menu;
    const double eps = ball.radius;
    menu.push_back({"anti_outlier", perturb_scores(ball.center, eps, PerturbMode::anti_outlier, seed)});
    menu.push_back({"worst_bias", perturb_scores(ball.center, eps, PerturbMode::worst_bias, seed, &dist)});
    for (int j = 1; j <= 5; ++j)
        menu.push_back({"random" + std::to_string(j),
                        perturb_scores(ball.center, eps, PerturbMode::random, derive_seed(seed, 0x6d656e75ULL, j))});
    return menu;
}

std::vector<CompareRow> compare(const FiniteDistribution& dist, const std::vector<Estimator>& estimators,
                                const PerturbationBall& ball, long n, long R, std::uint64_t seed) {
    // The ball may reach past 0 or 1 here (outliers closer to the boundary
    // than the radius); perturb_scores clips back into (0,1).
    validate(ball.center);
    if (!(ball.radius >= 0.0)) throw ConfigError("ball radius must be non-negative");
    const auto menu = adversary_menu(dist, ball, seed);
    std::vector<CompareRow> rows;
    for (const Estimator& est : estimators) {
        CompareRow row;
        for (const auto& ms : menu) {
            McReport r = mc_rmse(dist, est, ms.scores, n, R, seed);
            r.mode = ms.mode;
            if (row.by_mode.empty() || r.rmse > row.worst.rmse) row.worst = r;
            row.by_mode.push_back(r);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string to_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "estimator,mode,n,rmse,se\n";
    for (const auto& row : rows)
        for (const auto& r : row.by_mode) os << r.estimator << ',' << r.mode << ',' << r.n << ',' << r.rmse << ',' << r.se << '\n';
    return os.str();
}

} // namespace cipw
