#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selltime/io.hpp"

namespace fs = std::filesystem;
using namespace selltime;

namespace {

struct RunOutcome {
    int exit_code;
    std::string stdout_text;
};

RunOutcome run_cli(const std::string& args, const fs::path& workdir) {
    const fs::path out = workdir / "stdout.txt";
    std::ostringstream cmd;
    cmd << '"' << SELLTIME_BIN << "\" " << args << " > \"" << out.string() << "\" 2>&1";
    const int rc = std::system(cmd.str().c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(rc), ss.str()};
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("selltime_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("list-kernels prints the catalog") {
    const fs::path dir = fresh_dir("list");
    const RunOutcome r = run_cli("list-kernels", dir);
    CHECK(r.exit_code == 0);
    for (const char* name :
         {"shrinking_uniform", "power", "quadratic_tilt", "independent", "ar1"})
        CHECK(r.stdout_text.find(name) != std::string::npos);
}

TEST_CASE("solve writes tables and thresholds") {
    const fs::path dir = fresh_dir("solve");
    const RunOutcome r = run_cli(
        "solve --kernel quadratic_tilt --T 2 --delta 1.0 --n-theta 601 --out \"" +
            (dir / "out").string() + "\"",
        dir);
    CHECK(r.exit_code == 0);

    const auto j = nlohmann::json::parse(slurp(dir / "out" / "thresholds.json"));
    CHECK(j.at("version").get<std::string>() == kToolVersion);
    CHECK(!j.at("config_hash").get<std::string>().empty());
    const double k1 = j.at("thresholds")[0].at("entries")[0].at("k").get<double>();
    CHECK(k1 == doctest::Approx(0.75).epsilon(1e-4));

    const std::string csv = slurp(dir / "out" / "solve_tables.csv");
    CHECK(csv.rfind("# selltime ", 0) == 0);  // version + config hash line
    CHECK(csv.find("t,theta,L,psi,M,q,V\n") != std::string::npos);
    CHECK(csv.find(j.at("config_hash").get<std::string>()) != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
    const fs::path dir = fresh_dir("usage");
    CHECK(run_cli("solve --out \"" + (dir / "o").string() + "\"", dir).exit_code == 2);  // no kernel
    CHECK(run_cli("solve --kernel nope --out \"" + (dir / "o").string() + "\"", dir).exit_code == 2);
    CHECK(run_cli("solve --kernel ar1 --gamma 1.5 --out \"" + (dir / "o").string() + "\"", dir)
              .exit_code == 2);
    CHECK(run_cli("solve --T 0 --kernel power --out \"" + (dir / "o").string() + "\"", dir)
              .exit_code == 2);
}

TEST_CASE("check reports the power-kernel verdicts") {
    const fs::path dir = fresh_dir("check");
    const fs::path cfgp = dir / "cfg.json";
    {
        RunConfig c;
        c.kernel_name = "power";
        c.solve.horizon = 2;
        c.solve.discount = 1.0;
        c.solve.n_theta = 401;
        c.plan.n_pairs = 60;
        c.plan.n_ctx = 4;
        c.out_dir = (dir / "out").string();
        std::ofstream(cfgp) << run_config_to_json(c).dump(2);
    }
    const RunOutcome r = run_cli("check --config \"" + cfgp.string() + "\"", dir);
    CHECK(r.exit_code == 0);  // inconclusive is not a failure

    const auto j = nlohmann::json::parse(slurp(dir / "out" / "ic_report.json"));
    bool im_pass = false, c2_inconclusive = false, tp_pass = false;
    for (const auto& e : j.at("checks")) {
        const std::string name = e.at("name").get<std::string>();
        const std::string status = e.at("status").get<std::string>();
        if (name == "integral_monotonicity") im_pass = status == "pass";
        if (name == "corollary2") c2_inconclusive = status == "inconclusive";
        if (name == "two_period") tp_pass = status == "pass";
    }
    CHECK(im_pass);
    CHECK(c2_inconclusive);
    CHECK(tp_pass);
}

TEST_CASE("simulate with zero paths writes an empty summary") {
    const fs::path dir = fresh_dir("sim0");
    const RunOutcome r = run_cli(
        "simulate --kernel shrinking_uniform --T 2 --n-theta 201 --paths 0 --out \"" +
            (dir / "out").string() + "\"",
        dir);
    CHECK(r.exit_code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "out" / "simulation_summary.json"));
    CHECK(j.at("n_paths").get<int>() == 0);
}

TEST_CASE("simulate output is byte-identical for a fixed seed") {
    // Identical config (including the output directory) must reproduce the
    // files byte for byte.
    const fs::path a = fresh_dir("sim_repro");
    const std::string cmd =
        "simulate --kernel power --T 2 --n-theta 301 --paths 2000 --seed 31415 --out \"" +
        (a / "out").string() + "\"";
    CHECK(run_cli(cmd, a).exit_code == 0);
    const std::string t1 = slurp(a / "out" / "transcripts.csv");
    const std::string s1 = slurp(a / "out" / "simulation_summary.json");
    CHECK(run_cli(cmd, a).exit_code == 0);
    CHECK(slurp(a / "out" / "transcripts.csv") == t1);
    CHECK(slurp(a / "out" / "simulation_summary.json") == s1);
    CHECK(!t1.empty());
}

TEST_CASE("sweep emits the threshold curve") {
    const fs::path dir = fresh_dir("sweep");
    const RunOutcome r = run_cli(
        "sweep --axis delta --values 0,0.5,1 --kernel quadratic_tilt --T 2 --n-theta 401 "
        "--out \"" +
            (dir / "out").string() + "\"",
        dir);
    CHECK(r.exit_code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "out" / "sweep.json"));
    REQUIRE(j.at("points").size() == 3);
    CHECK(j.at("points")[0].at("k1").get<double>() == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(j.at("points")[1].at("k1").get<double>() == doctest::Approx(0.6).epsilon(1e-4));
    CHECK(j.at("points")[2].at("k1").get<double>() == doctest::Approx(0.75).epsilon(1e-4));
    CHECK(j.at("revenue_monotone").get<bool>());
    CHECK(j.at("early_sale_monotone").get<bool>());
    // Plot data files are two-column text.
    const std::string dat = slurp(dir / "out" / "sweep_k1.dat");
    CHECK(dat.find(' ') != std::string::npos);
}

TEST_CASE("run configuration round-trips through json") {
    RunConfig c;
    c.kernel_name = "ar1";
    c.kernel_params = {{"gamma", 0.35}, {"theta_hi", 2.0}};
    c.solve.horizon = 4;
    c.solve.discount = 0.85;
    c.solve.mode = SaleMode::repeated_sales;
    c.solve.n_theta = 123;
    c.sim_paths = 999;
    c.seed = 424242;
    c.sweep_axis = "gamma";
    c.sweep_values = {0.1, 0.2};
    c.check_best_response = true;
    c.plan.n_pairs = 77;
    const nlohmann::json j = run_config_to_json(c);
    const RunConfig back = run_config_from_json(j);
    CHECK(run_config_to_json(back) == j);
    CHECK(config_hash(back) == config_hash(c));

    RunConfig other = c;
    other.seed = 7;
    CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("doubles are printed with round-trip precision") {
    for (double v : {0.1, 1.0 / 3.0, 0.652158, 1e-17, 12345.678901234567}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}
