#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cipw/io.hpp"
#include "cipw/parallel.hpp"

using namespace cipw;

namespace {

struct Ctx {
    std::vector<std::string> argv;
    std::string out;
    std::optional<std::uint64_t> seed;

    Json meta() const {
        return Json{{"seed", seed ? Json(*seed) : Json(nullptr)},
                    {"version", version_string()},
                    {"config_hash", config_hash(Json(argv))}};
    }

    std::uint64_t need_seed(const char* why) const {
        if (!seed) throw ConfigError(std::string("--seed is required for ") + why);
        return *seed;
    }

    void write(const std::string& text) const {
        if (out.empty()) {
            std::cout << text;
            return;
        }
        std::ofstream f(out);
        if (!f) throw DataError("cannot write '" + out + "'");
        f << text;
    }

    void emit(Json j, bool stochastic) const {
        if (stochastic) j["meta"] = meta();
        write(j.dump(2) + "\n");
    }
};

std::vector<long> parse_longs(const std::string& s) {
    std::vector<long> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            size_t pos = 0;
            out.push_back(std::stol(cell, &pos));
            if (pos != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw ConfigError("not an integer list: '" + s + "'");
        }
    }
    return out;
}

PerturbMode parse_mode(const std::string& s) {
    if (s == "random") return PerturbMode::random;
    if (s == "anti_outlier") return PerturbMode::anti_outlier;
    if (s == "worst_bias") return PerturbMode::worst_bias;
    throw ConfigError("unknown perturbation mode '" + s + "'");
}

CountModel parse_count(const std::string& s) {
    if (s == "fixed") return CountModel::fixed;
    if (s == "binomial") return CountModel::binomial;
    throw ConfigError("unknown count model '" + s + "'");
}

PartitionFile load_partition(const std::string& path, Index m) {
    return partition_from_json(read_json_file(path), m);
}

// Dataset plus the scores the estimators should see.
struct Loaded {
    CensoredDataset data;
    PropensityMap scores;
    bool have_scores = false;
};

Loaded load_data(const std::string& csv, const std::optional<FiniteDistribution>& dist) {
    Loaded l;
    auto c = load_csv(csv);
    l.data = std::move(c.data);
    if (dist) attach_ids(l.data, *dist);
    if (c.e_hat) {
        l.scores = scores_from_rows(l.data, *c.e_hat);
        l.have_scores = true;
    } else if (dist) {
        l.scores = true_scores(*dist);
        l.scores.values.conservativeResize(l.data.id_bound());
        for (Index i = dist->size(); i < l.scores.size(); ++i) l.scores.values(i) = std::nan("");
        l.have_scores = true;
    }
    return l;
}

} // namespace

int main(int argc, char** argv) {
    Ctx ctx;
    for (int i = 1; i < argc; ++i) ctx.argv.emplace_back(argv[i]);

    CLI::App app{"coarse IPW toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed_value = 0;
    app.add_option("--out,-o", ctx.out, "output path (default stdout)");
    auto* seed_opt = app.add_option("--seed", seed_value, "master seed");

    // synth
    auto* synth = app.add_subcommand("synth", "emit a distribution JSON");
    std::string synth_name;
    double eta = 0.05, eps = 0.02, alpha = 0.05, beta = 0.2, L = 1.0, rho = 0.3, mu1_choice = 0.0;
    int grid = 0, dim = 1, kballs = 1;
    long n_intended = 10000;
    bool feasible = false;
    synth->add_option("name", synth_name, "thm91 | prop92 | lemC1 | lem16 | thmD1 | planted")->required();
    synth->add_option("--eta", eta);
    synth->add_option("--eps", eps);
    synth->add_option("--grid", grid);
    synth->add_option("--n-intended", n_intended);
    synth->add_flag("--feasible", feasible, "prop92 with v1 = 0");
    synth->add_option("--alpha", alpha);
    synth->add_option("--beta", beta);
    synth->add_option("--L", L);
    synth->add_option("--rho", rho);
    synth->add_option("--mu1", mu1_choice);
    synth->add_option("--d", dim);
    synth->add_option("--k", kballs);

    // sample
    auto* sample = app.add_subcommand("sample", "draw a censored dataset as CSV");
    std::string dist_path, data_path, part_path;
    long n = 100, R = 1000;
    std::string scores_kind = "none", mode = "anti_outlier";
    sample->add_option("--dist", dist_path)->required();
    sample->add_option("--n", n)->required();
    sample->add_option("--scores", scores_kind, "none | true | perturbed");
    sample->add_option("--eps", eps);
    sample->add_option("--mode", mode);

    // estimate
    auto* estimate = app.add_subcommand("estimate", "run a point estimator on a CSV");
    std::string method = "ipw", coarse_kind = "empirical";
    estimate->add_option("--data", data_path)->required();
    estimate->add_option("--dist", dist_path);
    estimate->add_option("--partition", part_path);
    estimate->add_option("--method", method, "ipw | neyman | trimmed | cipw | fractional | robust | dr | coarse_dr");
    estimate->add_option("--coarse", coarse_kind, "empirical | analytic");
    estimate->add_option("--eta", eta);
    estimate->add_option("--alpha", alpha);
    estimate->add_option("--beta", beta);
    std::optional<int> k_hint;
    std::optional<double> lip;
    estimate->add_option("--k", k_hint);
    estimate->add_option("--L", lip);

    // moments
    auto* moments = app.add_subcommand("moments", "closed-form bias, variance and MSE");
    std::string count_model = "fixed";
    std::optional<double> perturb_eps;
    moments->add_option("--dist", dist_path)->required();
    moments->add_option("--partition", part_path)->required();
    moments->add_option("--n", n)->required();
    moments->add_option("--count", count_model, "fixed | binomial");
    moments->add_option("--eps", perturb_eps, "perturb the scores by eps");
    moments->add_option("--mode", mode);

    // robust
    auto* robust = app.add_subcommand("robust", "worst-case RMSE over the eps-ball");
    std::string search = "corners";
    int grid_points = 5;
    robust->add_option("--dist", dist_path)->required();
    robust->add_option("--partition", part_path)->required();
    robust->add_option("--n", n)->required();
    robust->add_option("--eps", eps)->required();
    robust->add_option("--search", search, "corners | grid");
    robust->add_option("--grid-points", grid_points);
    robust->add_option("--count", count_model);

    // find
    auto* find = app.add_subcommand("find", "run the partition finder");
    find->add_option("--data", data_path);
    find->add_option("--dist", dist_path);
    find->add_option("--n", n);
    find->add_option("--alpha", alpha);
    find->add_option("--beta", beta);
    find->add_option("--eps", eps, "score error for sampled data");
    find->add_option("--k", k_hint);
    find->add_option("--L", lip);

    // compare
    auto* cmp = app.add_subcommand("compare", "Monte Carlo comparison over the adversary menu");
    std::string est_list = "ipw,trimmed,robust", format = "json";
    cmp->add_option("--dist", dist_path)->required();
    cmp->add_option("--n", n)->required();
    cmp->add_option("--R", R)->required();
    cmp->add_option("--eps", eps)->required();
    cmp->add_option("--estimators", est_list);
    cmp->add_option("--eta", eta, "trimming level (default eps)");
    cmp->add_option("--alpha", alpha);
    cmp->add_option("--beta", beta);
    cmp->add_option("--format", format, "json | csv");

    // reduce
    auto* reduce = app.add_subcommand("reduce", "Subset-Sum to Min-RMSE instance");
    std::string a_list, eps_str, cert;
    long target = 1;
    bool brute = false;
    reduce->add_option("--a", a_list)->required();
    reduce->add_option("--target", target)->required();
    reduce->add_option("--eps", eps_str, "override eps, as p/q");
    reduce->add_option("--certificate", cert, "0-based item indices");
    reduce->add_flag("--brute-force", brute);

    // oracle
    auto* oracle = app.add_subcommand("oracle", "brute-force minimum MSE over all partitions");
    int count_m = 0;
    oracle->add_option("--dist", dist_path);
    oracle->add_option("--n", n);
    oracle->add_option("--count", count_m, "only count partitions of m points");
    oracle->add_option("--count-model", count_model);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << Json{{"error", "config"}, {"exit", 2}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }
    if (*seed_opt) ctx.seed = seed_value;

    try {
        std::optional<FiniteDistribution> dist;
        if (!dist_path.empty()) dist = load_distribution(dist_path);

        if (*synth) {
            FiniteDistribution d;
            bool stochastic = false;
            if (synth_name == "thm91") d = make_thm91({eta, eps, grid, n_intended});
            else if (synth_name == "prop92") d = make_prop92(eta, !feasible);
            else if (synth_name == "lemC1") d = make_lemC1(eps);
            else if (synth_name == "lem16") d = make_lem16();
            else if (synth_name == "thmD1") d = make_thmD1(alpha, beta, L, rho, eta, mu1_choice);
            else if (synth_name == "planted") {
                PlantedSpec s;
                s.d = dim;
                s.k = kballs;
                s.alpha = alpha;
                s.beta = beta;
                s.rho = rho;
                s.L = L;
                s.seed = ctx.need_seed("planted");
                d = make_planted(s).dist;
                stochastic = true;
            } else
                throw ConfigError("unknown generator '" + synth_name + "'");
            ctx.emit(to_json(d), stochastic);
        } else if (*sample) {
            auto seed = ctx.need_seed("sample");
            auto data = sample_dataset(*dist, n, seed);
            std::optional<Eigen::VectorXd> rows;
            if (scores_kind != "none") {
                PropensityMap s = true_scores(*dist);
                if (scores_kind == "perturbed")
                    s = perturb_scores(s, eps, parse_mode(mode), derive_seed(seed, 0x736370ULL), &*dist);
                else if (scores_kind != "true")
                    throw ConfigError("unknown score kind '" + scores_kind + "'");
                rows = Eigen::VectorXd(data.size());
                for (Index i = 0; i < data.size(); ++i) (*rows)(i) = s.at(data.id(i));
            }
            auto m = ctx.meta();
            std::ostringstream os;
            os << "# seed=" << seed << ",version=" << version_string()
               << ",config_hash=" << m["config_hash"].get<std::string>() << "\n";
            write_csv(os, data, rows ? &*rows : nullptr);
            ctx.write(os.str());
        } else if (*estimate) {
            auto l = load_data(data_path, dist);
            auto need_scores = [&] {
                if (!l.have_scores) throw ConfigError("scores needed: add an e_hat column or pass --dist");
            };
            auto need_part = [&] {
                if (part_path.empty() || !dist) throw ConfigError("--partition and --dist are required for " + method);
                return load_partition(part_path, dist->size());
            };
            auto need_mu = [&] {
                if (!dist) throw ConfigError("--dist supplies the conditional means for " + method);
                return ConditionalMeanMap{dist->mu0, dist->mu1};
            };
            auto coarse_for = [&](const Partition& p) {
                if (coarse_kind == "analytic") return analytic_coarse_scores(*dist, p, l.scores);
                if (coarse_kind != "empirical") throw ConfigError("unknown coarse kind '" + coarse_kind + "'");
                auto c = empirical_coarse_scores(l.data, l.scores, p);
                return c;
            };
            double value = 0.0;
            bool stochastic = false;
            if (method == "ipw") {
                need_scores();
                value = ipw(l.data, l.scores);
            } else if (method == "neyman") {
                value = neyman(l.data);
            } else if (method == "trimmed") {
                need_scores();
                value = trimmed_ipw(l.data, l.scores, eta);
            } else if (method == "cipw") {
                need_scores();
                auto p = need_part();
                value = cipw::cipw(l.data, p.hard, coarse_for(p.hard));
            } else if (method == "fractional") {
                need_scores();
                auto p = need_part();
                if (!p.fractional) p.fractional = to_fractional(p.hard, dist->size());
                auto seed = ctx.need_seed("fractional");
                auto assignment = assign_fractional(l.data, *p.fractional, seed);
                auto coarse = empirical_coarse_scores(l.data, l.scores, assignment, Index(p.fractional->sets.size()));
                value = cipw_assigned(l.data, assignment, coarse);
                stochastic = true;
            } else if (method == "robust") {
                need_scores();
                FinderConfig cfg;
                cfg.alpha = alpha;
                cfg.beta = beta;
                cfg.split_seed = ctx.need_seed("robust");
                cfg.k_hint = k_hint;
                cfg.L = lip;
                value = robust_ate(l.data, l.scores, cfg);
                stochastic = true;
            } else if (method == "dr") {
                need_scores();
                value = doubly_robust(l.data, need_mu(), l.scores);
            } else if (method == "coarse_dr") {
                need_scores();
                auto p = need_part();
                value = coarse_doubly_robust(l.data, p.hard, need_mu(), coarse_for(p.hard));
            } else
                throw ConfigError("unknown method '" + method + "'");
            ctx.emit(Json{{"method", method}, {"estimate", value}, {"n", l.data.size()}}, stochastic);
        } else if (*moments) {
            auto p = load_partition(part_path, dist->size());
            PropensityMap s = true_scores(*dist);
            bool stochastic = false;
            if (perturb_eps) {
                auto pm = parse_mode(mode);
                stochastic = pm == PerturbMode::random;
                s = perturb_scores(s, *perturb_eps, pm, stochastic ? ctx.need_seed("random scores") : 0, &*dist);
            }
            auto cm = parse_count(count_model);
            MomentReport r = p.fractional ? cipw_moments(*dist, *p.fractional, s, n, cm)
                                          : cipw_moments(*dist, p.hard, s, n, cm);
            Json j = to_json(r);
            j["tau"] = true_ate(*dist);
            j["count_model"] = count_model;
            ctx.emit(j, stochastic);
        } else if (*robust) {
            auto p = load_partition(part_path, dist->size());
            RobustSearch rs;
            if (search == "grid") rs.mode = RobustSearch::grid;
            else if (search != "corners") throw ConfigError("unknown search '" + search + "'");
            rs.grid_points = grid_points;
            PerturbationBall ball{true_scores(*dist), eps};
            auto cm = parse_count(count_model);
            RobustResult r = p.fractional ? robust_rmse(*dist, *p.fractional, ball, n, rs, cm)
                                          : robust_rmse(*dist, p.hard, ball, n, rs, cm);
            std::vector<double> maxi(r.maximizer.values.data(), r.maximizer.values.data() + r.maximizer.size());
            ctx.emit(Json{{"rmse", r.rmse}, {"certified", r.certified}, {"maximizer", maxi}, {"eps", eps}, {"n", n}},
                     false);
        } else if (*find) {
            auto seed = ctx.need_seed("find");
            Loaded l;
            if (!data_path.empty()) {
                l = load_data(data_path, dist);
            } else if (dist) {
                l.data = sample_dataset(*dist, n, derive_seed(seed, 0x64617461ULL));
                l.scores = perturb_scores(true_scores(*dist), eps, PerturbMode::random, derive_seed(seed, 0x736370ULL));
                l.have_scores = true;
            } else
                throw ConfigError("find needs --data or --dist");
            if (!l.have_scores) throw ConfigError("scores needed: add an e_hat column or pass --dist");
            FinderConfig cfg;
            cfg.alpha = alpha;
            cfg.beta = beta;
            cfg.split_seed = seed;
            cfg.k_hint = k_hint;
            cfg.L = lip;
            auto res = find_good_partition(l.data, l.scores, cfg);
            ctx.emit(to_json(res), true);
        } else if (*cmp) {
            auto seed = ctx.need_seed("compare");
            std::vector<Estimator> ests;
            std::stringstream ss(est_list);
            std::string name;
            bool eta_given = cmp->count("--eta") > 0;
            while (std::getline(ss, name, ',')) {
                if (name == "ipw") ests.push_back(make_ipw());
                else if (name == "neyman") ests.push_back(make_neyman());
                else if (name == "trimmed") ests.push_back(make_trimmed_ipw(eta_given ? eta : eps));
                else if (name == "robust") {
                    FinderConfig cfg;
                    cfg.alpha = alpha;
                    cfg.beta = beta;
                    ests.push_back(make_robust_ate(cfg));
                } else if (name == "dr")
                    ests.push_back(make_doubly_robust({dist->mu0, dist->mu1}));
                else
                    throw ConfigError("unknown estimator '" + name + "'");
            }
            auto rows = compare(*dist, ests, {true_scores(*dist), eps}, n, R, seed);
            if (format == "csv") {
                ctx.write(to_csv(rows));
            } else if (format == "json") {
                Json table = Json::array();
                for (const auto& row : rows) {
                    Json modes = Json::array();
                    for (const auto& r : row.by_mode) modes.push_back(to_json(r));
                    table.push_back({{"estimator", row.worst.estimator}, {"worst", to_json(row.worst)}, {"modes", modes}});
                }
                ctx.emit(Json{{"tau", true_ate(*dist)}, {"rows", table}}, true);
            } else
                throw ConfigError("unknown format '" + format + "'");
        } else if (*reduce) {
            SubsetSumInput in{parse_longs(a_list), target};
            std::optional<Rational> over;
            if (!eps_str.empty()) over = parse_rational(eps_str);
            auto inst = subset_sum_reduce(in, over);
            Json j = to_json(inst);
            j["subset_sum"] = {{"a", in.a}, {"target", in.target}, {"yes", subset_sum_yes(in)}};
            if (!cert.empty()) {
                std::vector<int> idx;
                for (long v : parse_longs(cert)) idx.push_back(int(v));
                auto chk = verify_reduction(inst, idx);
                j["certificate"] = {{"mse", to_string(chk.mse)}, {"leq_U", chk.leq_U}, {"partition", to_json(chk.part)}};
            }
            if (brute) {
                auto g = check_gap(in, over);
                j["brute_force"] = {{"min_mse", to_string(g.min.best_mse)},
                                    {"best", to_json(g.min.best)},
                                    {"gap_holds", g.holds}};
            }
            ctx.emit(j, false);
        } else if (*oracle) {
            if (count_m > 0) {
                ctx.emit(Json{{"m", count_m}, {"count", partition_count(count_m)}}, false);
            } else {
                if (!dist) throw ConfigError("oracle needs --dist or --count");
                auto r = brute_force_min_rmse(*dist, n, nullptr, parse_count(count_model));
                ctx.emit(Json{{"best_mse", r.best_mse},
                              {"best", to_json(r.best)},
                              {"evaluated", r.evaluated},
                              {"skipped", r.skipped}},
                         false);
            }
        }
    } catch (const Error& e) {
        std::cerr << Json{{"error", e.kind()}, {"exit", e.exit_code()}, {"message", e.what()}}.dump() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << Json{{"error", "internal"}, {"exit", 1}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
