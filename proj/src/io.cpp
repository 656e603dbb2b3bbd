#include "cipw/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cipw {

std::string version_string() {
    return "0.1.0";
}

Norm parse_norm(const std::string& s) {
    if (s == "1" || s == "l1" || s == "L1") return Norm::L1;
    if (s == "2" || s == "l2" || s == "L2") return Norm::L2;
    if (s == "inf" || s == "linf" || s == "Linf" || s == "infinity") return Norm::Linf;
    throw ConfigError("unknown norm '" + s + "'");
}

namespace {

double number(const Json& v, const char* field) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_rational(v.get<std::string>()).convert_to<double>();
    throw DataError(std::string("non-numeric entry in '") + field + "'");
}

Eigen::VectorXd vec(const Json& j, const char* field, Index m) {
    if (!j.contains(field)) throw DataError(std::string("missing field '") + field + "'");
    const Json& a = j.at(field);
    if (!a.is_array() || Index(a.size()) != m) throw DataError(std::string("field '") + field + "' has the wrong length");
    Eigen::VectorXd v(m);
    for (Index i = 0; i < m; ++i) v(i) = number(a[i], field);
    return v;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

IdSet ids(const Json& a, Index m, const char* what) {
    if (!a.is_array()) throw DataError(std::string(what) + " must be an array of ids");
    IdSet out;
    for (const auto& v : a) {
        if (!v.is_number_integer()) throw DataError(std::string(what) + " ids must be integers");
        Index x = v.get<Index>();
        if (x < 0 || x >= m) throw DataError(std::string(what) + " id out of range");
        out.push_back(x);
    }
    return out;
}

} // namespace

Json to_json(const FiniteDistribution& d) {
    Json pts = Json::array();
    for (Index i = 0; i < d.size(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < d.dim(); ++k) row.push_back(d.points(i, k));
        pts.push_back(row);
    }
    return Json{{"points", pts},          {"mass", to_std(d.mass)}, {"e", to_std(d.e)},
                {"mu0", to_std(d.mu0)},   {"mu1", to_std(d.mu1)},   {"v0", to_std(d.v0)},
                {"v1", to_std(d.v1)},     {"p", norm_name(d.p)}};
}

FiniteDistribution distribution_from_json(const Json& j) {
    try {
        if (!j.is_object() || !j.contains("points")) throw DataError("distribution needs a 'points' array");
        const Json& pts = j.at("points");
        if (!pts.is_array() || pts.empty()) throw DataError("'points' must be a non-empty array");
        FiniteDistribution d;
        const Index m = Index(pts.size());
        const Index dim = pts[0].is_array() ? Index(pts[0].size()) : 1;
        if (dim < 1) throw DataError("points need at least one coordinate");
        d.points.resize(m, dim);
        for (Index i = 0; i < m; ++i) {
            if (pts[i].is_array()) {
                if (Index(pts[i].size()) != dim) throw DataError("points have mixed dimensions");
                for (Index k = 0; k < dim; ++k) d.points(i, k) = number(pts[i][k], "points");
            } else {
                if (dim != 1) throw DataError("points have mixed dimensions");
                d.points(i, 0) = number(pts[i], "points");
            }
        }
        d.mass = vec(j, "mass", m);
        d.e = vec(j, "e", m);
        d.mu0 = vec(j, "mu0", m);
        d.mu1 = vec(j, "mu1", m);
        d.v0 = vec(j, "v0", m);
        d.v1 = vec(j, "v1", m);
        if (j.contains("p")) {
            const Json& p = j.at("p");
            d.p = parse_norm(p.is_string() ? p.get<std::string>() : p.dump());
        }
        validate(d);
        return d;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed distribution: ") + e.what());
    }
}

Json to_json(const Partition& part) {
    return Json{{"sets", part.sets}, {"null", part.null_set}};
}

Json to_json(const FractionalPartition& fp) {
    Json j{{"sets", fp.sets}, {"null", fp.null_set}};
    Json w = Json::array();
    for (size_t x = 0; x < fp.weights.size(); ++x)
        for (const Share& sh : fp.weights[x]) w.push_back({{"x", x}, {"set", sh.set}, {"w", sh.w}});
    j["weights"] = w;
    return j;
}

PartitionFile partition_from_json(const Json& j, Index m) {
    try {
        if (!j.is_object()) throw DataError("partition must be a JSON object");
        PartitionFile out;
        Partition& p = out.hard;
        if (j.contains("sets")) {
            if (!j.at("sets").is_array()) throw DataError("'sets' must be an array");
            for (const auto& s : j.at("sets")) p.sets.push_back(ids(s, m, "set"));
        }
        if (j.contains("null")) p.null_set = ids(j.at("null"), m, "null");
        if (!j.contains("weights")) {
            validate(p, m);
            return out;
        }
        FractionalPartition fp;
        fp.sets = p.sets;
        fp.null_set = p.null_set;
        fp.weights.assign(m, {});
        for (const auto& w : j.at("weights")) {
            Index x = w.at("x").get<Index>();
            int s = w.at("set").get<int>();
            double v = w.at("w").get<double>();
            if (x < 0 || x >= m) throw DataError("weight id out of range");
            if (s < kNull || s >= int(fp.sets.size())) throw DataError("weight names an unknown set");
            fp.weights[x].push_back({s, v});
        }
        // ids listed without explicit weights carry weight 1
        for (size_t s = 0; s < fp.sets.size(); ++s)
            for (Index x : fp.sets[s]) {
                bool listed = false;
                for (const Share& sh : fp.weights[x]) listed |= sh.set == int(s);
                if (!listed) fp.weights[x].push_back({int(s), 1.0});
            }
        for (Index x : fp.null_set) {
            bool listed = false;
            for (const Share& sh : fp.weights[x]) listed |= sh.set == kNull;
            if (!listed) fp.weights[x].push_back({kNull, 1.0});
        }
        validate(fp, m);
        out.fractional = fp;
        return out;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed partition: ") + e.what());
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_cell(const std::string& s, size_t row) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad number '" + s + "' on data row " + std::to_string(row));
    }
}

} // namespace

CsvData read_csv(std::istream& in) {
    std::string line;
    // leading '#' lines carry run metadata
    do {
        if (!std::getline(in, line)) throw DataError("empty CSV");
    } while (!line.empty() && line[0] == '#');
    const auto header = split_line(line);
    std::vector<int> xcols;
    int ycol = -1, tcol = -1, ecol = -1;
    for (int c = 0; c < int(header.size()); ++c) {
        const std::string& h = header[c];
        if (h == "y") ycol = c;
        else if (h == "t") tcol = c;
        else if (h == "e_hat") ecol = c;
        else if (h.size() > 1 && h[0] == 'x') {
            if (h != "x" + std::to_string(xcols.size() + 1)) throw DataError("covariate columns must be x1..xd in order");
            xcols.push_back(c);
        } else
            throw DataError("unknown CSV column '" + h + "'");
    }
    if (xcols.empty() || ycol < 0 || tcol < 0) throw DataError("CSV header must hold x1..xd, y and t");
    std::vector<std::vector<double>> rows;
    size_t r = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        ++r;
        auto cells = split_line(line);
        if (cells.size() != header.size()) throw DataError("wrong number of cells on data row " + std::to_string(r));
        std::vector<double> v;
        for (const auto& c : cells) v.push_back(parse_cell(c, r));
        rows.push_back(std::move(v));
    }
    if (rows.empty()) throw DataError("CSV has no data rows");
    CsvData out;
    auto& d = out.data;
    const Index n = Index(rows.size()), dim = Index(xcols.size());
    d.x.resize(n, dim);
    d.y.resize(n);
    d.t.resize(n);
    if (ecol >= 0) out.e_hat = Eigen::VectorXd(n);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < dim; ++k) d.x(i, k) = rows[i][xcols[k]];
        d.y(i) = rows[i][ycol];
        double t = rows[i][tcol];
        if (t != 0.0 && t != 1.0) throw DataError("t must be 0 or 1 on data row " + std::to_string(i + 1));
        d.t(i) = int(t);
        if (ecol >= 0) (*out.e_hat)(i) = rows[i][ecol];
    }
    assign_ids(d);
    return out;
}

void write_csv(std::ostream& out, const CensoredDataset& d, const Eigen::VectorXd* e_hat) {
    for (Index k = 0; k < d.dim(); ++k) out << 'x' << k + 1 << ',';
    out << "y,t" << (e_hat ? ",e_hat" : "") << '\n';
    out << std::setprecision(17);
    for (Index i = 0; i < d.size(); ++i) {
        for (Index k = 0; k < d.dim(); ++k) out << d.x(i, k) << ',';
        out << d.y(i) << ',' << d.t(i);
        if (e_hat) out << ',' << (*e_hat)(i);
        out << '\n';
    }
}

PropensityMap scores_from_rows(const CensoredDataset& data, const Eigen::VectorXd& e_hat) {
    if (e_hat.size() != data.size()) throw DataError("one e_hat per row expected");
    PropensityMap s;
    s.label = ScoreLabel::estimate;
    s.values = Eigen::VectorXd::Constant(data.id_bound(), std::numeric_limits<double>::quiet_NaN());
    for (Index i = 0; i < data.size(); ++i) {
        double& v = s.values(data.id(i));
        if (std::isnan(v)) v = e_hat(i);
        else if (v != e_hat(i)) throw DataError("rows with equal covariates carry different e_hat");
    }
    validate(s);
    return s;
}

Json to_json(const MinRmseInstance& inst) {
    const auto& d = inst.dist;
    auto strs = [](const Vec<Rational>& v) {
        Json a = Json::array();
        for (Index i = 0; i < v.size(); ++i) a.push_back(to_string(v(i)));
        return a;
    };
    Json pts = Json::array();
    for (Index i = 0; i < d.size(); ++i) pts.push_back(Json::array({d.points(i, 0)}));
    return Json{{"m", d.size()},
                {"k", inst.k},
                {"n", to_string(inst.n)},
                {"U", to_string(inst.U)},
                {"eps", to_string(inst.eps)},
                {"alpha", to_string(inst.alpha)},
                {"beta", to_string(inst.beta)},
                {"delta", to_string(inst.delta)},
                {"conforming", inst.conforming},
                {"dist",
                 {{"points", pts},
                  {"mass", strs(d.mass)},
                  {"e", strs(d.e)},
                  {"mu0", strs(d.mu0)},
                  {"mu1", strs(d.mu1)},
                  {"v0", strs(d.v0)},
                  {"v1", strs(d.v1)},
                  {"p", norm_name(d.p)}}}};
}

Json to_json(const McReport& r) {
    return Json{{"estimator", r.estimator}, {"mode", r.mode}, {"n", r.n},       {"R", r.R},
                {"failures", r.failures},   {"mean", r.mean}, {"bias", r.bias}, {"rmse", r.rmse},
                {"se", r.se},               {"mse", r.mse},   {"mse_se", r.mse_se}, {"seed", r.seed}};
}

Json to_json(const MomentReport& r) {
    return Json{{"expectation", r.expectation}, {"bias", r.bias}, {"variance", r.variance},
                {"mse", r.mse},                 {"rmse", r.rmse}, {"n", r.n}};
}

Json to_json(const FinderResult& r) {
    Json balls = Json::array();
    for (const Ball& b : r.balls)
        balls.push_back({{"center", to_std(b.center)}, {"set", b.set}, {"inlier_weight", b.inlier_weight}});
    return Json{{"tau", r.tau},
                {"k_found", r.k_found},
                {"c1_size", r.c1_size},
                {"c2_size", r.c2_size},
                {"covered_outliers", r.covered_outliers},
                {"null_assigned", r.null_assigned},
                {"alpha", r.alpha},
                {"threshold", r.threshold},
                {"balls", balls},
                {"partition", to_json(r.fpart)}};
}

Json to_json(const NormalityReport& r) {
    return Json{{"ks", r.ks},     {"threshold", r.threshold}, {"pass", r.pass},
                {"mean", r.mean}, {"sd", r.sd},               {"failures", r.failures},
                {"R", r.standardized.size()}};
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

FiniteDistribution load_distribution(const std::string& path) {
    return distribution_from_json(read_json_file(path));
}

CsvData load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

std::string config_hash(const Json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace cipw
