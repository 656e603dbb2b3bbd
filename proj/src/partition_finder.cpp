#include "cipw/partition_finder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cipw/parallel.hpp"

namespace cipw {

void validate(const FinderConfig& cfg) {
    if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(cfg.beta > 0.0 && cfg.beta <= 0.25)) throw ConfigError("beta must lie in (0, 1/4]");
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= cfg.beta / 10.0 + 1e-15))
        throw ConfigError("epsilon must lie in [0, beta/10]");
    if (cfg.k_hint && *cfg.k_hint < 0) throw ConfigError("k hint must be non-negative");
    if (cfg.L && !(*cfg.L >= 0.0)) throw ConfigError("L must be non-negative");
}

bool is_hat_outlier(double e_hat, double beta) {
    return e_hat * (1.0 - e_hat) < beta / 3.0;
}

bool is_hat_outlier(const PropensityMap& scores_hat, Index x, double beta) {
    return is_hat_outlier(scores_hat.at(x), beta);
}

namespace {

bool in_ball(const Eigen::Ref<const Eigen::RowVectorXd>& z, const Eigen::VectorXd& center, double alpha) {
    return (z.transpose() - center).lpNorm<Eigen::Infinity>() <= alpha;
}

struct Distinct {
    std::vector<Index> ids;     // distinct covariate ids, first-appearance order
    std::vector<Index> row_of;  // a representative row per id
    std::vector<Index> count;   // samples per id
};

Distinct distinct_ids(const CensoredDataset& c) {
    Distinct d;
    std::vector<Index> slot(c.id_bound(), -1);
    for (Index i = 0; i < c.size(); ++i) {
        Index x = c.id(i);
        if (slot[x] < 0) {
            slot[x] = Index(d.ids.size());
            d.ids.push_back(x);
            d.row_of.push_back(i);
            d.count.push_back(0);
        }
        ++d.count[slot[x]];
    }
    return d;
}

struct Cover {
    std::vector<Eigen::VectorXd> centers;
    std::vector<Index> ball_samples, ball_outliers;
    Index outlier_samples = 0;
};

// Greedy cover of C1 outliers in canonical order.
Cover greedy_cover(const CensoredDataset& c1, const PropensityMap& scores_hat, double alpha, double beta) {
    const Distinct d = distinct_ids(c1);
    const Index u = Index(d.ids.size());
    std::vector<char> outlier(u);
    std::vector<Index> order;
    Cover cover;
    for (Index j = 0; j < u; ++j) {
        outlier[j] = is_hat_outlier(scores_hat, d.ids[j], beta);
        if (outlier[j]) {
            order.push_back(j);
            cover.outlier_samples += d.count[j];
        }
    }
    auto overlap = [&](Index j) {
        double e = scores_hat.at(d.ids[j]);
        return e * (1.0 - e);
    };
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        double oa = overlap(a), ob = overlap(b);
        if (oa != ob) return oa < ob;
        const auto ra = c1.x.row(d.row_of[a]), rb = c1.x.row(d.row_of[b]);
        for (Index k = 0; k < c1.dim(); ++k)
            if (ra(k) != rb(k)) return ra(k) < rb(k);
        return d.ids[a] < d.ids[b];
    });
    std::vector<char> covered(u, 0);
    for (Index j : order) {
        if (covered[j]) continue;
        Eigen::VectorXd center = c1.x.row(d.row_of[j]).transpose();
        Index samples = 0, outs = 0;
        for (Index z = 0; z < u; ++z) {
            if (covered[z] || !in_ball(c1.x.row(d.row_of[z]), center, alpha)) continue;
            covered[z] = 1;
            samples += d.count[z];
            if (outlier[z]) outs += d.count[z];
        }
        cover.centers.push_back(center);
        cover.ball_samples.push_back(samples);
        cover.ball_outliers.push_back(outs);
    }
    return cover;
}

} // namespace

Index detect_k(const CensoredDataset& c1, const PropensityMap& scores_hat, double alpha, double beta) {
    if (c1.size() == 0) return 0;
    return Index(greedy_cover(c1, scores_hat, alpha, beta).centers.size());
}

BallWeights update_weight(Index ball_samples, Index ball_outliers, Index all_samples, Index all_outliers, int k) {
    if (k < 1) throw ConfigError("update_weight needs k >= 1");
    if (ball_samples < 1) throw DomainError("ball holds no samples");
    BallWeights w;
    w.eta = double(all_outliers) / double(all_samples);
    w.eta_s = double(ball_outliers) / double(ball_samples);
    const double num = w.eta_s + w.eta / k;
    const double den = 1.0 - w.eta_s + w.eta / k;
    w.inlier_weight = den > 0.0 ? std::min(num / den, 1.0) : 1.0;
    return w;
}

BallWeights update_weight(const std::vector<char>& members, const CensoredDataset& c,
                          const PropensityMap& scores_hat, double beta, int k) {
    Index in = 0, in_out = 0, outs = 0;
    for (Index i = 0; i < c.size(); ++i) {
        bool o = is_hat_outlier(scores_hat, c.id(i), beta);
        outs += o;
        if (members[i]) {
            ++in;
            in_out += o;
        }
    }
    return update_weight(in, in_out, c.size(), outs, k);
}

namespace {

// Shares for one covariate; singletons are appended to sets as needed.
std::vector<Share> place(const Eigen::Ref<const Eigen::RowVectorXd>& z, Index id, bool outlier,
                         const std::vector<Ball>& balls, double alpha, FractionalPartition& fp) {
    for (const Ball& b : balls) {
        if (!in_ball(z, b.center, alpha)) continue;
        fp.sets[b.set].push_back(id);
        if (outlier || b.inlier_weight >= 1.0) return {{b.set, 1.0}};
        if (b.inlier_weight > 0.0) {
            int s = int(fp.sets.size());
            fp.sets.push_back({id});
            return {{b.set, b.inlier_weight}, {s, 1.0 - b.inlier_weight}};
        }
        fp.sets[b.set].pop_back();
        break;
    }
    if (outlier) {
        fp.null_set.push_back(id);
        return {{kNull, 1.0}};
    }
    int s = int(fp.sets.size());
    fp.sets.push_back({id});
    return {{s, 1.0}};
}

} // namespace

Split split_halves(Index n, std::uint64_t split_seed) {
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index(0));
    Rng rng(derive_seed(split_seed, 0x73706c6974ULL));
    std::shuffle(order.begin(), order.end(), rng);
    const Index n1 = (n + 1) / 2;
    Split s{{order.begin(), order.begin() + n1}, {order.begin() + n1, order.end()}};
    // keep original row order inside each half
    std::sort(s.first.begin(), s.first.end());
    std::sort(s.second.begin(), s.second.end());
    return s;
}

FinderResult find_good_partition(const CensoredDataset& c, const PropensityMap& scores_hat, const FinderConfig& cfg) {
    validate(cfg);
    validate(c);
    const Index n = c.size();
    if (n < 2) throw DomainError("need at least two samples to split");

    const Split halves = split_halves(n, cfg.split_seed);
    const Index n1 = Index(halves.first.size());
    const CensoredDataset c1 = subset(c, halves.first), c2 = subset(c, halves.second);

    FinderResult res;
    res.alpha = cfg.alpha;
    res.threshold = cfg.outlier_threshold();
    res.c1_size = n1;
    res.c2_size = n - n1;
    const Cover cover = greedy_cover(c1, scores_hat, cfg.alpha, cfg.beta);
    res.k_found = int(cover.centers.size());
    const int k = cfg.k_hint ? *cfg.k_hint : res.k_found;

    FractionalPartition& fp = res.fpart;
    for (size_t b = 0; b < cover.centers.size(); ++b) {
        auto w = update_weight(cover.ball_samples[b], cover.ball_outliers[b], n1, cover.outlier_samples, k);
        res.balls.push_back({cover.centers[b], int(b), w.inlier_weight});
        fp.sets.push_back({});
    }

    const Distinct all = distinct_ids(c);
    fp.weights.assign(c.id_bound(), {});
    for (size_t j = 0; j < all.ids.size(); ++j) {
        Index x = all.ids[j];
        bool outlier = is_hat_outlier(scores_hat, x, cfg.beta);
        fp.weights[x] = place(c.x.row(all.row_of[j]), x, outlier, res.balls, cfg.alpha, fp);
        if (fp.weights[x].front().set == kNull) ++res.null_assigned;
        else if (outlier) ++res.covered_outliers;
    }

    auto assignment = assign_fractional(c2, fp, derive_seed(cfg.split_seed, 0x61737367ULL));
    auto coarse = empirical_coarse_scores(c2, scores_hat, assignment, Index(fp.sets.size()));
    res.tau = cipw_assigned(c2, assignment, coarse);
    return res;
}

double robust_ate(const CensoredDataset& c, const PropensityMap& scores_hat, const FinderConfig& cfg) {
    validate(cfg);
    if (cfg.L && cfg.alpha * *cfg.L > 1.0) return trimmed_ipw(c, scores_hat, cfg.beta);
    return find_good_partition(c, scores_hat, cfg).tau;
}

FractionalPartition extend_partition(const FinderResult& res, const FiniteDistribution& dist,
                                     const PropensityMap& scores_hat) {
    FractionalPartition fp;
    fp.sets.assign(res.balls.size(), {});
    fp.weights.assign(dist.size(), {});
    // beta/3 threshold recovered from the stored level
    const double beta = 3.0 * res.threshold;
    for (Index x = 0; x < dist.size(); ++x)
        fp.weights[x] = place(dist.points.row(x), x, is_hat_outlier(scores_hat, x, beta), res.balls, res.alpha, fp);
    // a ball no support point falls into cannot happen for balls opened at
    // support points, but guard the invariant anyway
    for (const auto& s : fp.sets)
        if (s.empty()) throw DomainError("ball without support points");
    return fp;
}

Partition hard_projection(const FractionalPartition& fpart) {
    const Index m = Index(fpart.weights.size());
    std::vector<int> pick(m, kUncovered);
    for (Index x = 0; x < m; ++x) {
        int best = kUncovered;
        for (const Share& sh : fpart.weights[x]) {
            if (!(sh.w > 0.0)) continue;
            if (sh.set == kNull) {
                if (best == kUncovered) best = kNull;
            } else if (best < 0 || sh.set < best) {
                best = sh.set;
            }
        }
        pick[x] = best;
    }
    Partition part;
    std::vector<int> remap(fpart.sets.size(), -1);
    for (Index x = 0; x < m; ++x) {
        int s = pick[x];
        if (s == kNull) part.null_set.push_back(x);
        if (s < 0) continue;
        if (remap[s] < 0) {
            remap[s] = int(part.sets.size());
            part.sets.push_back({});
        }
        part.sets[remap[s]].push_back(x);
    }
    return part;
}

FactCheck check_facts(double e, double h, double beta, double eps) {
    auto ov = [](double v) { return v * (1.0 - v); };
    FactCheck f;
    const double oe = ov(e), oh = ov(h);
    // O(beta/9; e) in {x: oh < beta/3} in O(beta; e)
    if (oe < beta / 9.0 && !(oh < beta / 3.0)) f.fact81 = false;
    if (oh < beta / 3.0 && !(oe < beta)) f.fact81 = false;
    if (oe >= beta)
        f.part1 = e >= beta && e <= 1.0 - beta;
    else
        f.part1 = !(e >= 2.0 * beta && e <= 1.0 - 2.0 * beta);
    if (oe >= beta)
        f.part2 = oh >= 0.75 * (beta - eps);
    else
        f.part2 = oh < 2.0 * beta + eps;
    if (oh >= beta)
        f.part3 = oe >= 0.75 * (beta - eps);
    else
        f.part3 = oe <= 2.0 * beta + eps;
    return f;
}

double finder_sample_size(int k, int d, double rho, double eps, double delta) {
    if (!(rho > 0.0 && eps > 0.0 && delta > 0.0 && delta < 1.0)) throw ConfigError("bad sample-size parameters");
    double r = rho * eps;
    return (double(k) * k * k * d + std::log(1.0 / delta)) / (r * r);
}

} // namespace cipw
