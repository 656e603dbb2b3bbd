#include "cipw/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cipw/estimators.hpp"
#include "cipw/parallel.hpp"

namespace cipw {

namespace {

FiniteDistribution blank(Index m, Index d) {
    FiniteDistribution dist;
    dist.points = Eigen::MatrixXd::Zero(m, d);
    for (auto* v : {&dist.mass, &dist.e, &dist.mu0, &dist.mu1, &dist.v0, &dist.v1}) *v = Eigen::VectorXd::Zero(m);
    return dist;
}

double ramp(double x) {
    if (x <= 1.0 / 3.0) return 0.0;
    if (x >= 2.0 / 3.0) return 1.0;
    return 3.0 * (x - 1.0 / 3.0);
}

} // namespace

double thm91_delta(double eta, long n_intended) {
    return eta * eta / (10.0 * double(n_intended));
}

FiniteDistribution make_thm91(const Thm91Params& p) {
    if (!(p.eps > 0.0 && p.eps < 1.0 / 3.0)) throw ConfigError("eps must lie in (0, 1/3)");
    if (!(p.eta > 0.0 && p.eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
    if (p.grid_points < 0 || p.grid_points % 2) throw ConfigError("grid_points must be even and non-negative");
    if (p.n_intended < 1) throw ConfigError("n_intended must be positive");
    const double eps = p.eps, delta = thm91_delta(p.eta, p.n_intended);
    const int g = p.grid_points;
    const double atom_scale = g == 0 ? 1.0 : 1.0 - eps;
    auto dist = blank(4 + g, 1);
    const double coords[4] = {0.0, eps, 1.0 - eps, 1.0};
    const double weights[4] = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0};
    for (int i = 0; i < 4; ++i) {
        dist.points(i, 0) = coords[i];
        dist.mass(i) = atom_scale * weights[i];
        dist.e(i) = (i == 1 || i == 2) ? delta : 0.5;
    }
    for (int j = 0; j < g; ++j) {
        double x = (j + 0.5) / g;
        for (double c : coords)
            if (x == c) throw ConfigError("grid point collides with an atom; pick another grid size");
        dist.points(4 + j, 0) = x;
        dist.mass(4 + j) = eps / g;
        dist.e(4 + j) = 0.5;
    }
    for (Index i = 0; i < dist.size(); ++i) {
        dist.mu1(i) = ramp(dist.points(i, 0));
        dist.v1(i) = 1.0 - dist.mu1(i) * dist.mu1(i);
    }
    dist.p = Norm::Linf;
    return dist;
}

FiniteDistribution make_prop92(double eta, bool printed) {
    if (!(eta > 0.0 && eta <= 0.25)) throw ConfigError("eta must lie in (0, 1/4]");
    auto dist = blank(2, 1);
    dist.points(1, 0) = 1e-3;
    dist.mass << 0.5, 0.5;
    dist.e << eta, 0.5;
    dist.mu1 << 1.0, 1.0;
    dist.v1.setConstant(printed ? 1.0 : 0.0);
    return dist;
}

FiniteDistribution make_lemC1(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("eps must lie in (0, 1/2)");
    auto dist = blank(2, 1);
    dist.points(1, 0) = 1.0;
    dist.mass << 0.5, 0.5;
    dist.e << eps, 0.5;
    dist.mu1 << 0.5, 0.5;
    dist.v1 << 0.5, 0.5;
    return dist;
}

FiniteDistribution make_lem16() {
    auto dist = blank(2, 1);
    dist.points(1, 0) = 1.0;
    dist.mass << 0.5, 0.5;
    dist.e << 7.0 / 8.0, 1.0 / 8.0;
    dist.mu1 << 1.0, 0.0;
    return dist;
}

FiniteDistribution make_thmD1(double alpha, double beta, double L, double rho, double eta, double mu1_choice) {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(beta > 0.0 && beta <= 0.25)) throw ConfigError("beta must lie in (0, 1/4]");
    if (!(L >= 0.0)) throw ConfigError("L must be non-negative");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    if (!(eta > 0.0 && eta < 0.5)) throw ConfigError("eta must lie in (0, 1/2)");
    const double cap = std::min(alpha * L, 1.0);
    if (!(std::abs(mu1_choice) <= cap)) throw ConfigError("mu1 choice outside [-alpha L, alpha L] and [-1, 1]");
    auto dist = blank(2, 1);
    dist.points(1, 0) = alpha;
    dist.mass << rho, 1.0 - rho;
    dist.e << eta, 0.5;
    dist.mu1 << mu1_choice, 0.0;
    return dist;
}

void validate(const PlantedSpec& s) {
    if (s.d < 1) throw ConfigError("dimension must be at least 1");
    if (s.k < 0) throw ConfigError("k must be non-negative");
    if (!(s.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(s.beta > 0.0 && s.beta <= 0.25)) throw ConfigError("beta must lie in (0, 1/4]");
    if (!(s.rho > 0.0 && s.rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    if (!(s.L > 0.0)) throw ConfigError("L must be positive");
    if (s.inliers_per_ball < 1 || s.background < 0) throw ConfigError("atom counts must be positive");
    // each ball carries at least as much inlier mass as outlier mass / 2
    if (s.k > 0 && s.rho > 2.0 / 3.0) throw ConfigError("rho above 2/3 leaves no room for ball inliers", "geometry");
}

Planted make_planted(const PlantedSpec& s) {
    validate(s);
    Rng rng(derive_seed(s.seed, 0x706c616eULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double side = 10.0 * std::max(1, s.k) * s.alpha;
    const double a = s.alpha;

    Eigen::MatrixXd centers(s.k, s.d);
    for (int c = 0; c < s.k; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            Eigen::VectorXd z(s.d);
            for (int j = 0; j < s.d; ++j) z(j) = a + (side - 2.0 * a) * unit(rng);
            placed = true;
            for (int o = 0; o < c; ++o)
                if ((centers.row(o).transpose() - z).lpNorm<Eigen::Infinity>() <= 3.0 * a) placed = false;
            if (placed) centers.row(c) = z.transpose();
        }
        if (!placed) throw ConfigError("could not place ball centers 3 alpha apart", "geometry");
    }

    // inlier band keeps e(1-e) strictly above beta
    const double root = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * s.beta));
    const double lo_in = root + 0.25 * (0.5 - root);
    // outliers sit well inside O(beta/9)
    const double hi_out = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * s.beta / 20.0));

    const int out_per_ball = 2;
    const double ball_inlier_mass = s.k ? std::min(s.rho, 1.0 - s.rho) : 0.0;
    const double out_mass = s.k ? s.rho : 0.0;
    double bg_mass = 1.0 - out_mass - ball_inlier_mass;
    int bg = s.background;
    if (bg_mass <= 1e-12) {
        bg = 0;
        bg_mass = 0.0;
    } else if (bg == 0) {
        bg = 1;
    }
    const Index m = Index(s.k) * (out_per_ball + s.inliers_per_ball) + bg;
    Planted out;
    out.centers = centers;
    auto& dist = out.dist;
    dist = blank(m, s.d);
    dist.p = Norm::Linf;
    Index row = 0;
    auto near_center = [&](int c) {
        Eigen::VectorXd z(s.d);
        for (int j = 0; j < s.d; ++j) z(j) = centers(c, j) + a * (unit(rng) - 0.5);
        return z;
    };
    for (int c = 0; c < s.k; ++c) {
        for (int i = 0; i < out_per_ball; ++i, ++row) {
            dist.points.row(row) = near_center(c).transpose();
            dist.mass(row) = out_mass / (s.k * out_per_ball);
            double e = 1e-3 + (hi_out - 1e-3) * unit(rng);
            dist.e(row) = unit(rng) < 0.5 ? e : 1.0 - e;
            out.outliers.push_back(row);
        }
        for (int i = 0; i < s.inliers_per_ball; ++i, ++row) {
            dist.points.row(row) = near_center(c).transpose();
            dist.mass(row) = ball_inlier_mass / (s.k * s.inliers_per_ball);
            dist.e(row) = lo_in + (1.0 - 2.0 * lo_in) * unit(rng);
        }
    }
    for (int i = 0; i < bg; ++i, ++row) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            Eigen::VectorXd z(s.d);
            for (int j = 0; j < s.d; ++j) z(j) = side * unit(rng);
            placed = true;
            for (int c = 0; c < s.k; ++c)
                if ((centers.row(c).transpose() - z).lpNorm<Eigen::Infinity>() <= 2.0 * a) placed = false;
            if (placed) dist.points.row(row) = z.transpose();
        }
        if (!placed) throw ConfigError("no room for background atoms", "geometry");
        dist.mass(row) = bg_mass / bg;
        dist.e(row) = lo_in + (1.0 - 2.0 * lo_in) * unit(rng);
    }
    dist.mass /= dist.mass.sum();

    // mu_t = 0.9 * clamp(min of two linear pieces); slopes have unit l1 norm,
    // so each piece is L-Lipschitz under l-inf
    for (Eigen::VectorXd* mu : {&dist.mu0, &dist.mu1}) {
        Eigen::MatrixXd u(2, s.d);
        Eigen::Vector2d c0;
        for (int piece = 0; piece < 2; ++piece) {
            for (int j = 0; j < s.d; ++j) u(piece, j) = unit(rng) - 0.5;
            u.row(piece) /= u.row(piece).lpNorm<1>();
            c0(piece) = 2.0 * unit(rng) - 1.0;
        }
        const Eigen::RowVectorXd mid = Eigen::RowVectorXd::Constant(s.d, side / 2.0);
        for (Index i = 0; i < m; ++i) {
            Eigen::RowVectorXd z = dist.points.row(i) - mid;
            double f = std::min(c0(0) + s.L * u.row(0).dot(z), c0(1) + s.L * u.row(1).dot(z));
            (*mu)(i) = 0.9 * std::clamp(f, -1.0, 1.0);
        }
    }
    for (Index i = 0; i < m; ++i) {
        dist.v0(i) = 0.5 * unit(rng) * (1.0 - dist.mu0(i) * dist.mu0(i));
        dist.v1(i) = 0.5 * unit(rng) * (1.0 - dist.mu1(i) * dist.mu1(i));
    }
    return out;
}

TwoPoint outcome_law(double mu, double v) {
    if (v <= 0.0 || std::abs(mu) >= 1.0) return {mu, mu, 0.0};
    const double s = std::sqrt(v);
    if (mu - s >= -1.0 && mu + s <= 1.0) return {mu - s, mu + s, 0.5};
    if (mu + s > 1.0) {
        // top atom pinned at 1
        double lo = mu - v / (1.0 - mu);
        return {std::max(lo, -1.0), 1.0, (mu - lo) / (1.0 - lo)};
    }
    double hi = mu + v / (1.0 + mu);
    return {-1.0, std::min(hi, 1.0), (mu + 1.0) / (hi + 1.0)};
}

CensoredDataset sample_dataset(const FiniteDistribution& dist, Index n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample size must be at least 1");
    check_feasible(dist);
    const Index m = dist.size();
    std::vector<TwoPoint> law0(m), law1(m);
    for (Index i = 0; i < m; ++i) {
        law0[i] = outcome_law(dist.mu0(i), dist.v0(i));
        law1[i] = outcome_law(dist.mu1(i), dist.v1(i));
    }
    Rng rng(derive_seed(seed, 0x73616d70ULL));
    std::discrete_distribution<Index> pick(dist.mass.data(), dist.mass.data() + m);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    CensoredDataset data;
    data.x.resize(n, dist.dim());
    data.y.resize(n);
    data.t.resize(n);
    data.id.resize(n);
    for (Index i = 0; i < n; ++i) {
        Index x = pick(rng);
        int t = unit(rng) < dist.e(x) ? 1 : 0;
        const TwoPoint& law = t ? law1[x] : law0[x];
        data.id(i) = x;
        data.t(i) = t;
        data.y(i) = unit(rng) < law.p_hi ? law.hi : law.lo;
        data.x.row(i) = dist.points.row(x);
    }
    return data;
}

PropensityMap perturb_scores(const PropensityMap& e, double eps, PerturbMode mode, std::uint64_t seed,
                             const FiniteDistribution* dist) {
    if (!(eps >= 0.0)) throw ConfigError("eps must be non-negative");
    PropensityMap out{e.values, ScoreLabel::estimate};
    if (eps == 0.0) return out;
    auto clip = [](double v) { return std::clamp(v, kPerturbFloor, 1.0 - kPerturbFloor); };
    const Index m = e.size();
    switch (mode) {
    case PerturbMode::random: {
        Rng rng(derive_seed(seed, 0x72616e64ULL));
        std::bernoulli_distribution coin(0.5);
        for (Index i = 0; i < m; ++i) out.values(i) = clip(e.values(i) + (coin(rng) ? eps : -eps));
        break;
    }
    case PerturbMode::anti_outlier:
        for (Index i = 0; i < m; ++i) {
            double v = e.values(i);
            if (v < 0.5) out.values(i) = clip(v - eps);
            else if (v > 0.5) out.values(i) = clip(v + eps);
        }
        break;
    case PerturbMode::worst_bias: {
        if (!dist) throw ConfigError("worst_bias perturbation needs the distribution");
        // d/de of the point's IPW term has the sign of -(mu1/e + mu0/(1-e))
        Eigen::VectorXd dir(m);
        for (Index i = 0; i < m; ++i) {
            double g = dist->mu1(i) / e.values(i) + dist->mu0(i) / (1.0 - e.values(i));
            dir(i) = g > 0.0 ? -1.0 : (g < 0.0 ? 1.0 : 0.0);
        }
        const double tau = true_ate(*dist);
        double best = -1.0;
        for (double sign : {1.0, -1.0}) {
            PropensityMap cand{e.values, ScoreLabel::estimate};
            for (Index i = 0; i < m; ++i) cand.values(i) = clip(e.values(i) + sign * dir(i) * eps);
            double gap = 0.0;
            for (Index i = 0; i < m; ++i) {
                double h = cand.values(i);
                gap += dist->mass(i) * (dist->e(i) * dist->mu1(i) / h - (1.0 - dist->e(i)) * dist->mu0(i) / (1.0 - h));
            }
            gap = std::abs(gap - tau);
            if (gap > best) {
                best = gap;
                out = cand;
            }
        }
        break;
    }
    }
    return out;
}

} // namespace cipw
