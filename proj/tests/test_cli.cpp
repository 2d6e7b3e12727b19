// End-to-end checks of the installed binary: exit codes, file layout, and
// reproducibility of the JSON artifacts.  Each case gets a scratch directory
// under the system temp root.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("s3_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CliResult run_cli(const fs::path& dir, const std::string& args) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(S3_CLI_PATH) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

json base_config() {
    json j;
    j["map"] = {{"family", "cat"}};
    j["field"] = {{"type", "sinusoid"},
                  {"amplitude", 1.0},
                  {"wave", {1, 1}},
                  {"direction", {0.0, 1.0}}};
    j["observable"] = {{"type", "harmonic"}, {"amplitude", 1.0}, {"wave", {1, 1}}};
    j["quadrature"] = {{"samples", 20000}};
    j["validation"] = {{"orbit_length", 20000}};
    j["seed"] = 5;
    return j;
}

fs::path write_config(const fs::path& dir, const json& j) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2) << "\n";
    return p;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("run writes a complete, confined report tree", "[cli]") {
    const fs::path dir = scratch("run");
    const fs::path cfg = write_config(dir, base_config());
    const fs::path out = dir / "out";

    const CliResult r =
        run_cli(dir, "run --config " + cfg.string() + " --out " + out.string());
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("psi_total") != std::string::npos);

    const json rep = json::parse(slurp(out / "report.json"));
    CHECK(rep.at("psi_total").is_number());
    CHECK(rep.at("method") == "probabilistic");
    CHECK(rep.at("unstable_terms").size() == 20);
    CHECK(rep.at("error_bars").contains("total"));
    CHECK(rep.at("diagnostics").at("checkpoints").size() == 2);
    CHECK(rep.at("provenance").at("config").at("seed") == 5);

    const json man = json::parse(slurp(out / "manifest.json"));
    CHECK(man.at("subcommand") == "run");

    // everything the manifest lists exists, and nothing else was written
    std::size_t listed = 0;
    for (const auto& name : man.at("outputs")) {
        CHECK(fs::exists(out / name.get<std::string>()));
        ++listed;
    }
    std::size_t present = 0;
    for (const auto& e : fs::directory_iterator(out)) {
        ++present;
        CHECK(e.is_regular_file());
    }
    CHECK(present == listed);

    const std::string series = slurp(out / "unstable_terms.csv");
    CHECK(series.rfind("# s3 csv v1: unstable series terms", 0) == 0);
    CHECK(count_lines(series) == 2 + 20);
}

TEST_CASE("reports are byte-identical across reruns and change with the seed", "[cli]") {
    const fs::path dir = scratch("rerun");
    const fs::path cfg = write_config(dir, base_config());

    const fs::path out1 = dir / "a", out2 = dir / "b", out3 = dir / "c";
    REQUIRE(run_cli(dir, "run --config " + cfg.string() + " --out " + out1.string())
                .exit_code == 0);
    REQUIRE(run_cli(dir, "run --config " + cfg.string() + " --out " + out2.string())
                .exit_code == 0);
    CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
    CHECK(slurp(out1 / "unstable_terms.csv") == slurp(out2 / "unstable_terms.csv"));

    REQUIRE(run_cli(dir, "run --seed 7 --config " + cfg.string() + " --out " + out3.string())
                .exit_code == 0);
    const json a = json::parse(slurp(out1 / "report.json"));
    const json c = json::parse(slurp(out3 / "report.json"));
    CHECK(a.at("psi_total").get<double>() != c.at("psi_total").get<double>());
    CHECK(c.at("provenance").at("config").at("seed") == 7);
}

TEST_CASE("the echoed config reproduces the run bit for bit", "[cli]") {
    const fs::path dir = scratch("echo");
    const fs::path cfg = write_config(dir, base_config());
    const fs::path out1 = dir / "a", out2 = dir / "b";

    REQUIRE(run_cli(dir, "run --config " + cfg.string() + " --out " + out1.string())
                .exit_code == 0);
    const json rep = json::parse(slurp(out1 / "report.json"));

    const fs::path cfg2 = dir / "echoed.json";
    std::ofstream(cfg2) << rep.at("provenance").at("config").dump(2) << "\n";
    REQUIRE(run_cli(dir, "run --config " + cfg2.string() + " --out " + out2.string())
                .exit_code == 0);
    CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
}

TEST_CASE("config problems exit 2 and say what is wrong", "[cli]") {
    const fs::path dir = scratch("badcfg");
    json j = base_config();
    j["map"].erase("family");
    const fs::path cfg = write_config(dir, j);
    const fs::path out = dir / "out";

    const CliResult r =
        run_cli(dir, "run --config " + cfg.string() + " --out " + out.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("map.family") != std::string::npos);

    const CliResult missing =
        run_cli(dir, "run --config " + (dir / "nope.json").string() + " --out " + out.string());
    CHECK(missing.exit_code == 2);

    const CliResult noargs = run_cli(dir, "run");
    CHECK(noargs.exit_code == 2);
}

TEST_CASE("validate exits 0 on a sound setup and 3 on a designed failure", "[cli]") {
    const fs::path dir = scratch("validate");
    const fs::path cfg = write_config(dir, base_config());
    const fs::path out1 = dir / "a", out2 = dir / "b";

    const CliResult ok =
        run_cli(dir, "validate --config " + cfg.string() + " --out " + out1.string());
    INFO(ok.out);
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("FAIL") == std::string::npos);
    const json vrep = json::parse(slurp(out1 / "validate.json"));
    CHECK(vrep.at("all_pass") == true);

    json bad = base_config();
    bad["windows"] = {{"n_o2", 3}};
    const fs::path cfg2 = dir / "bad.json";
    std::ofstream(cfg2) << bad.dump(2) << "\n";
    const CliResult fail =
        run_cli(dir, "validate --config " + cfg2.string() + " --out " + out2.string());
    CHECK(fail.exit_code == 3);
    CHECK(fail.out.find("FAIL decomposition_residual") != std::string::npos);
}

TEST_CASE("oracle bars shrink with more seeds", "[cli]") {
    const fs::path dir = scratch("oracle");
    json j = base_config();
    j["field"] = {{"type", "sinusoid"},
                  {"amplitude", 1.0},
                  {"wave", {1, 0}},
                  {"direction", {0.0, 1.0}}};
    j["observable"]["wave"] = {1, 0};
    j["oracle"] = {{"orbit_length", 100000}, {"n_seeds", 4}};
    const fs::path cfg4 = write_config(dir, j);
    const fs::path out4 = dir / "a", out16 = dir / "b";
    REQUIRE(run_cli(dir, "oracle --config " + cfg4.string() + " --out " + out4.string())
                .exit_code == 0);

    j["oracle"]["n_seeds"] = 16;
    const fs::path cfg16 = dir / "config16.json";
    std::ofstream(cfg16) << j.dump(2) << "\n";
    REQUIRE(run_cli(dir, "oracle --config " + cfg16.string() + " --out " + out16.string())
                .exit_code == 0);

    const json o4 = json::parse(slurp(out4 / "oracle.json"));
    const json o16 = json::parse(slurp(out16 / "oracle.json"));
    CHECK(o4.at("per_seed").size() == 4);
    CHECK(o16.at("per_seed").size() == 16);
    const double se4 = o4.at("std_error").get<double>();
    const double se16 = o16.at("std_error").get<double>();
    CHECK(se16 < se4);
    CHECK(se4 / se16 > 1.0);
    CHECK(se4 / se16 < 4.0);
}

TEST_CASE("decay writes the versioned series table and a fit", "[cli]") {
    const fs::path dir = scratch("decay");
    json j = base_config();
    j["map"] = {{"family", "perturbed_cat"},
                {"t", 0.05},
                {"direction",
                 {{"type", "sinusoid"},
                  {"amplitude", 1.0},
                  {"wave", {1, 0}},
                  {"direction", {0.0, 1.0}}}}};
    j["quadrature"]["samples"] = 50000;
    j["series_length"] = 12;
    const fs::path cfg = write_config(dir, j);
    const fs::path out = dir / "out";

    const CliResult r =
        run_cli(dir, "decay --config " + cfg.string() + " --out " + out.string());
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("decay slope") != std::string::npos);

    const std::string csv = slurp(out / "decay.csv");
    CHECK(csv.rfind("# s3 csv v1: unstable series terms", 0) == 0);
    CHECK(count_lines(csv) == 2 + 12);

    const json fit = json::parse(slurp(out / "decay.json"));
    CHECK(fit.contains("slope"));
    CHECK(fit.contains("p_value"));
    CHECK(fit.at("provenance").at("config").at("series_length") == 12);
}
