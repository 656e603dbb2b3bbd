#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "cipw/io.hpp"
#include "cipw/synth.hpp"

using namespace cipw;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run cli(const std::string& args) {
    std::string cmd = std::string(CIPW_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, got);
    int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

struct TmpDir {
    fs::path path;
    TmpDir() {
        path = fs::temp_directory_path() / ("cipw_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(file(name)) << text;
        return file(name);
    }
};

} // namespace

TEST_CASE("cli synth and moments") {
    TmpDir tmp;
    auto r = cli("synth lem16 -o " + tmp.file("d.json"));
    REQUIRE(r.code == 0);
    auto d = load_distribution(tmp.file("d.json"));
    auto ref = make_lem16();
    CHECK(d.e == ref.e);
    CHECK(d.mu1 == ref.mu1);

    auto part = tmp.write("p.json", R"({"sets": [[0, 1]]})");
    auto m = cli("moments --dist " + tmp.file("d.json") + " --partition " + part + " --n 100");
    REQUIRE(m.code == 0);
    auto j = Json::parse(m.out);
    CHECK(j["bias"].get<double>() == doctest::Approx(0.375));
    CHECK(j["tau"].get<double>() == doctest::Approx(0.5));
    CHECK_FALSE(j.contains("meta"));
}

TEST_CASE("cli reduce") {
    auto r = cli("reduce --a 1,2,3 --target 3 --certificate 2");
    REQUIRE(r.code == 0);
    auto j = Json::parse(r.out);
    CHECK(j["m"] == 5);
    CHECK(j["subset_sum"]["yes"] == true);
    CHECK(j["certificate"]["leq_U"] == true);
}

TEST_CASE("cli sample and estimate") {
    TmpDir tmp;
    REQUIRE(cli("synth lem16 -o " + tmp.file("d.json")).code == 0);
    auto s = cli("sample --dist " + tmp.file("d.json") + " --n 200 --scores true --seed 5 -o " + tmp.file("x.csv"));
    REQUIRE(s.code == 0);
    {
        std::ifstream in(tmp.file("x.csv"));
        std::string first;
        std::getline(in, first);
        CHECK(first.rfind("# seed=5,version=", 0) == 0);
        CHECK(first.find("config_hash=") != std::string::npos);
    }
    auto c = load_csv(tmp.file("x.csv"));
    REQUIRE(c.e_hat);
    auto data = c.data;
    attach_ids(data, make_lem16());
    double lib = ipw(data, scores_from_rows(data, *c.e_hat));

    auto e = cli("estimate --method ipw --data " + tmp.file("x.csv"));
    REQUIRE(e.code == 0);
    auto j = Json::parse(e.out);
    CHECK(j["estimate"].get<double>() == doctest::Approx(lib));
    CHECK(j["n"] == 200);

    // same seed, same file
    REQUIRE(cli("sample --dist " + tmp.file("d.json") + " --n 200 --scores true --seed 5 -o " + tmp.file("y.csv")).code ==
            0);
    std::ifstream a(tmp.file("x.csv")), b(tmp.file("y.csv"));
    std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    // the '#' line hashes argv, which includes the output path
    CHECK(sa.substr(sa.find('\n')) == sb.substr(sb.find('\n')));

    auto rob = cli("estimate --method robust --seed 9 --data " + tmp.file("x.csv"));
    REQUIRE(rob.code == 0);
    auto jr = Json::parse(rob.out);
    CHECK(jr["meta"]["seed"] == 9);
    CHECK(jr["meta"]["config_hash"].get<std::string>().size() == 16);
    CHECK(jr["meta"].contains("version"));
}

TEST_CASE("cli exit codes") {
    TmpDir tmp;
    CHECK(cli("synth lem16 --bogus").code == 2);
    CHECK(cli("synth nosuch").code == 2);
    CHECK(cli("synth planted").code == 2);  // needs --seed
    CHECK(cli("moments --dist " + tmp.file("missing.json") + " --partition x --n 5").code == 3);
    auto bad = tmp.write("bad.json", "{not json");
    CHECK(cli("moments --dist " + bad + " --partition x --n 5").code == 3);
    // every sample trimmed
    auto csv = tmp.write("t.csv", "x1,y,t,e_hat\n0,1,1,0.01\n1,0,0,0.99\n");
    CHECK(cli("estimate --method trimmed --eta 0.1 --data " + csv).code == 4);
}
