#include "cipw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

namespace cipw {

std::string to_string(const Rational& r) {
    return r.str();
}

Rational parse_rational(const std::string& s) {
    static const std::regex form(R"(\s*-?\d+(\s*/\s*\d+)?\s*)");
    if (!std::regex_match(s, form)) throw DataError("not a rational: '" + s + "'");
    std::string t;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    auto slash = t.find('/');
    if (slash != std::string::npos && std::all_of(t.begin() + slash + 1, t.end(), [](char c) { return c == '0'; }))
        throw DataError("zero denominator in '" + s + "'");
    Rational r(t);
    // string input is not reduced by gmp
    return Rational(numerator(r), denominator(r));
}

std::uint64_t bell_number(int m) {
    if (m < 0 || m > 25) throw ConfigError("bell number out of range", "size");
    // Bell triangle
    std::vector<std::uint64_t> row{1};
    for (int i = 0; i < m; ++i) {
        std::vector<std::uint64_t> next{row.back()};
        for (auto v : row) next.push_back(next.back() + v);
        row = std::move(next);
    }
    return row.front();
}

std::uint64_t partition_count(int m) {
    std::uint64_t total = 0, binom = 1;
    for (int j = 0; j <= m; ++j) {
        total += binom * bell_number(m - j);
        binom = binom * std::uint64_t(m - j) / std::uint64_t(j + 1);
    }
    return total;
}

void enumerate_partitions(int m, const std::function<void(const Partition&)>& visit) {
    if (m < 1 || m > 10) throw ConfigError("enumeration needs 1 <= m <= 10", "size");
    Partition part;
    std::vector<Index> rest;
    std::vector<int> rgs;
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
        part.null_set.clear();
        rest.clear();
        for (int x = 0; x < m; ++x) {
            if (mask >> x & 1u) part.null_set.push_back(x);
            else rest.push_back(x);
        }
        const int r = int(rest.size());
        if (r == 0) {
            part.sets.clear();
            visit(part);
            continue;
        }
        // restricted growth strings: rgs[0] = 0, rgs[i] <= max(prefix) + 1
        rgs.assign(r, 0);
        std::vector<int> pmax(r, 0);
        while (true) {
            int blocks = pmax[r - 1] + 1;
            part.sets.assign(blocks, {});
            for (int i = 0; i < r; ++i) part.sets[rgs[i]].push_back(rest[i]);
            visit(part);
            int i = r - 1;
            while (i > 0 && rgs[i] == pmax[i - 1] + 1) --i;
            if (i == 0) break;
            ++rgs[i];
            pmax[i] = std::max(pmax[i - 1], rgs[i]);
            for (int j = i + 1; j < r; ++j) {
                rgs[j] = 0;
                pmax[j] = pmax[i];
            }
        }
    }
}

std::vector<Partition> all_partitions(int m) {
    std::vector<Partition> out;
    enumerate_partitions(m, [&](const Partition& p) { out.push_back(p); });
    return out;
}

bool partition_less(const Partition& a, const Partition& b) {
    if (a.sets.size() != b.sets.size()) return a.sets.size() < b.sets.size();
    if (a.sets != b.sets) return a.sets < b.sets;
    return a.null_set < b.null_set;
}

namespace {

bool skippable(const DomainError& e) {
    return e.kind() == "all_null" || e.kind() == "infinite" || e.kind() == "zero_mass";
}

} // namespace

MinRmseResult brute_force_min_rmse(const FiniteDistribution& dist, long n, const PropensityMap* scores,
                                   CountModel model) {
    validate(dist);
    if (n < 1) throw ConfigError("sample count must be at least 1");
    const PropensityMap truth = true_scores(dist);
    const PropensityMap& hat = scores ? *scores : truth;
    MinRmseResult best;
    bool found = false;
    enumerate_partitions(int(dist.size()), [&](const Partition& p) {
        if (p.sets.empty()) {
            ++best.skipped;
            return;
        }
        double mse;
        try {
            mse = cipw_moments(dist, p, hat, n, model).mse;
        } catch (const DomainError& e) {
            if (!skippable(e)) throw;
            ++best.skipped;
            return;
        }
        ++best.evaluated;
        const double tol = 1e-12 * std::max(std::abs(mse), std::abs(best.best_mse));
        bool take = !found || mse < best.best_mse - tol ||
                    (std::abs(mse - best.best_mse) <= tol && partition_less(p, best.best));
        if (take) {
            best.best_mse = mse;
            best.best = p;
            found = true;
        }
    });
    if (!found) throw DomainError("no partition has a defined estimator", "all_null");
    return best;
}

long SubsetSumInput::total() const {
    long s = 0;
    for (long v : a) s += v;
    return s;
}

void validate(const SubsetSumInput& in) {
    if (in.a.empty()) throw ConfigError("subset-sum input needs at least one item");
    for (long v : in.a)
        if (v < 1) throw ConfigError("subset-sum items must be positive integers");
    if (in.target < 1) throw ConfigError("subset-sum target must be a positive integer");
    if (in.a.size() > 20) throw ConfigError("subset-sum input limited to 20 items", "size");
}

bool subset_sum_yes(const SubsetSumInput& in, std::vector<int>* witness) {
    validate(in);
    const int k = int(in.a.size());
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
        long s = 0;
        for (int i = 0; i < k; ++i)
            if (mask >> i & 1u) s += in.a[i];
        if (s == in.target) {
            if (witness) {
                witness->clear();
                for (int i = 0; i < k; ++i)
                    if (mask >> i & 1u) witness->push_back(i);
            }
            return true;
        }
    }
    return false;
}

Rational default_reduction_eps(const SubsetSumInput& in) {
    const Rational am = Rational(in.total()) * Rational(long(in.a.size()) + 2);
    return Rational(1) / (Rational(20) * am * am * am * am);
}

namespace {

Rational ipow(const Rational& b, int p) {
    Rational r(1);
    for (int i = 0; i < p; ++i) r *= b;
    return r;
}

} // namespace

MinRmseInstance subset_sum_reduce(const SubsetSumInput& in, std::optional<Rational> eps_override) {
    validate(in);
    MinRmseInstance inst;
    const int k = int(in.a.size());
    const int m = k + 2;
    const Rational A(in.total()), V(in.target), one(1);
    inst.k = k;
    inst.conforming = !eps_override;
    inst.eps = eps_override ? *eps_override : default_reduction_eps(in);
    if (!(inst.eps > 0 && inst.eps < 1)) throw ConfigError("reduction eps must lie in (0,1)");
    const Rational& eps = inst.eps;
    inst.alpha = ipow(eps, 3);
    inst.beta = ipow(eps, 5);
    inst.delta = one / (one + eps + Rational(k) * inst.alpha);
    inst.n = one / ipow(eps, 7);
    const Rational& D = inst.delta;

    auto& d = inst.dist;
    d.points.resize(m, 1);
    for (auto* v : {&d.mass, &d.e, &d.mu0, &d.mu1, &d.v0, &d.v1}) v->resize(m);
    for (int x = 0; x < m; ++x) {
        d.points(x, 0) = double(x);
        d.mu0(x) = 0;
        d.v0(x) = 0;
    }
    const Rational four_a2 = Rational(4) * A * A;
    for (int i = 0; i < k; ++i) {
        d.mass(i) = D * inst.alpha;
        d.e(i) = 1;
        d.mu1(i) = Rational(in.a[i]);
    }
    d.mass(m - 2) = D;
    d.e(m - 2) = 1;
    d.mu1(m - 2) = Rational(2) * A * inst.alpha;
    d.mass(m - 1) = D * eps;
    d.e(m - 1) = inst.beta;
    d.mu1(m - 1) = ((V + Rational(2) * A) / D - Rational(3) * A) * (inst.alpha / eps);
    for (int x = 0; x < m; ++x) d.v1(x) = four_a2 - d.mu1(x) * d.mu1(x);

    // scale outcomes into range: mu1 / A, v1 and U / A^2
    inst.U = Rational(8) * A * A * ipow(eps, 7);
    const Rational a2 = A * A;
    for (int x = 0; x < m; ++x) {
        d.mu1(x) /= A;
        d.v1(x) /= a2;
    }
    inst.U /= a2;
    return inst;
}

Rational exact_mse(const MinRmseInstance& inst, const Partition& part) {
    return moments_core<Rational>(inst.dist, part, inst.dist.e, Rational(1) / inst.n).mse;
}

ReductionCheck verify_reduction(const MinRmseInstance& inst, const std::vector<int>& R) {
    const int k = inst.k, m = k + 2;
    std::vector<char> in_r(k, 0);
    for (int i : R) {
        if (i < 0 || i >= k) throw ConfigError("certificate index out of range");
        in_r[i] = 1;
    }
    ReductionCheck out;
    IdSet s;
    for (int i = 0; i < k; ++i) {
        if (in_r[i]) s.push_back(i);
        else out.part.null_set.push_back(i);
    }
    s.push_back(m - 2);
    out.part.sets.push_back(s);
    out.part.null_set.push_back(m - 1);
    out.mse = exact_mse(inst, out.part);
    out.leq_U = out.mse <= inst.U;
    return out;
}

ExactMinResult brute_force_min_mse_exact(const MinRmseInstance& inst) {
    ExactMinResult best;
    bool found = false;
    enumerate_partitions(int(inst.dist.size()), [&](const Partition& p) {
        if (p.sets.empty()) {
            ++best.skipped;
            return;
        }
        Rational mse;
        try {
            mse = exact_mse(inst, p);
        } catch (const DomainError& e) {
            if (!skippable(e)) throw;
            ++best.skipped;
            return;
        }
        ++best.evaluated;
        if (!found || mse < best.best_mse || (mse == best.best_mse && partition_less(p, best.best))) {
            best.best_mse = mse;
            best.best = p;
            found = true;
        }
    });
    if (!found) throw DomainError("no partition has a defined estimator", "all_null");
    return best;
}

bool exceeds_gap(const MinRmseInstance& inst, const Rational& mse) {
    return mse > 0 && mse * mse * inst.eps > inst.U * inst.U;
}

GapCheck check_gap(const SubsetSumInput& in, std::optional<Rational> eps_override) {
    GapCheck g;
    g.yes = subset_sum_yes(in);
    auto inst = subset_sum_reduce(in, eps_override);
    g.min = brute_force_min_mse_exact(inst);
    g.holds = g.yes ? g.min.best_mse <= inst.U : exceeds_gap(inst, g.min.best_mse);
    return g;
}

FiniteDistribution to_double(const RationalDistribution& dist) {
    FiniteDistribution d;
    d.points = dist.points;
    d.p = dist.p;
    const Index m = dist.size();
    auto conv = [m](const Vec<Rational>& v) {
        Eigen::VectorXd out(m);
        for (Index i = 0; i < m; ++i) out(i) = v(i).convert_to<double>();
        return out;
    };
    d.mass = conv(dist.mass);
    d.e = conv(dist.e);
    d.mu0 = conv(dist.mu0);
    d.mu1 = conv(dist.mu1);
    d.v0 = conv(dist.v0);
    d.v1 = conv(dist.v1);
    return d;
}

} // namespace cipw
