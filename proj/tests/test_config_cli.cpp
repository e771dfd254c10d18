#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "volheston/config.hpp"

using namespace volheston;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = VOLHESTON_CONFIG_DIR;
const std::string kCli = VOLHESTON_CLI_PATH;

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("volheston_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    fs::path file = dir / "config.toml";
    std::ofstream out(file);
    out << body;
    return file;
}

std::string small_config(const std::string& rho = "-0.7", const std::string& extra_utility = "") {
    return std::string("[model]\n"
                       "d = 1\n"
                       "alpha = [0.8]\n"
                       "beta_kernel = [0.0]\n"
                       "v0 = [0.04]\n"
                       "mu0 = [0.2]\n"
                       "D = [-0.5]\n"
                       "rho = [") +
           rho +
           "]\n"
           "theta = [0.2]\n"
           "sigma_v = [0.3]\n"
           "r = 0.02\n"
           "[jumps]\n"
           "enabled = false\n"
           "intensity = 0.0\n"
           "kappa = 0.0\n"
           "[grid]\n"
           "T = 1.0\n"
           "n = 24\n"
           "[mc]\n"
           "paths = 400\n"
           "seed = 11\n"
           "[utility]\n"
           "kind = \"exponential\"\n"
           "gamma = 0.5\n"
           "zeta = [0.0]\n" +
           extra_utility +
           "[output]\n"
           "dir = \"out\"\n"
           "format = \"csv\"\n";
}

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("load_config: reference file") {
    const ExperimentConfig cfg = load_config(kConfigDir + "/two_asset_rough.toml");
    CHECK(cfg.d == 2);
    CHECK(cfg.alpha == std::vector<double>{0.6, 0.9});
    CHECK(cfg.v0 == std::vector<double>{0.01, 0.03});
    CHECK(cfg.mu0 == std::vector<double>{2.0, 2.5});
    CHECK(cfg.rho == std::vector<double>{-0.7, -0.55});
    CHECK(cfg.theta == std::vector<double>{0.1, 0.1});
    CHECK(cfg.sigma_v == std::vector<double>{0.4, 0.2});
    CHECK(cfg.jumps_enabled);
    CHECK(cfg.jump_intensity == 2.0);
    CHECK(cfg.jump_kappa == 0.05);
    CHECK(cfg.n == 200);
    const ModelParams p = cfg.to_model_params();
    p.validate();
    CHECK(p.kernels[0].alpha == 0.6);
    CHECK(p.D(1, 1) == -0.6);
}

TEST_CASE("load_config: field-level rejection messages") {
    const fs::path dir = temp_dir("cfg");

    SUBCASE("rho out of range names the entry") {
        const fs::path file = write_config(dir, small_config("1.5"));
        try {
            load_config(file.string());
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            bool found = false;
            for (const auto& msg : e.issues)
                if (msg.find("rho[0] out of [-1,1]") != std::string::npos) found = true;
            CHECK(found);
        }
    }

    SUBCASE("zeta above theta^2/(2 gamma) is rejected with the inequality") {
        std::string body = small_config();
        body.replace(body.find("zeta = [0.0]"), std::string("zeta = [0.0]").size(),
                     "zeta = [0.5]");
        const fs::path file = write_config(dir, body);
        try {
            load_config(file.string());
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            bool found = false;
            for (const auto& msg : e.issues)
                if (msg.find("zeta") != std::string::npos &&
                    msg.find("theta_i^2/(2 gamma)") != std::string::npos)
                    found = true;
            CHECK(found);
        }
    }

    SUBCASE("length mismatch names the key") {
        std::string body = small_config();
        body.replace(body.find("theta = [0.2]"), std::string("theta = [0.2]").size(),
                     "theta = [0.2, 0.3]");
        const fs::path file = write_config(dir, body);
        CHECK_THROWS_AS(load_config(file.string()), ConfigError);
    }

    SUBCASE("missing required key is reported") {
        const fs::path file = write_config(dir, "[model]\nd = 1\n");
        CHECK_THROWS_AS(load_config(file.string()), ConfigError);
    }
}

TEST_CASE("config overrides feed the canonical hash") {
    const ExperimentConfig base = load_config(kConfigDir + "/two_asset_rough.toml");
    ConfigOverrides ov;
    ov.seed = 999;
    const ExperimentConfig other = load_config(kConfigDir + "/two_asset_rough.toml", ov);
    CHECK(base.config_hash() != other.config_hash());
    CHECK(base.canonical_string().find("mc.seed=20260810") != std::string::npos);
    CHECK(other.canonical_string().find("mc.seed=999") != std::string::npos);
}

TEST_CASE("CLI: exit codes") {
    const fs::path dir = temp_dir("cli_exit");
    const fs::path file = write_config(dir, small_config());
    const std::string out = (dir / "out").string();

    CHECK(run_cli("solve-riccati --config " + file.string() + " --out " + out) == 0);
    // validation failure: zero paths
    CHECK(run_cli("simulate --config " + file.string() + " --out " + out + " --paths 0") == 2);
    // validation failure: malformed config
    const fs::path bad = write_config(temp_dir("cli_bad"), small_config("2.0"));
    CHECK(run_cli("solve-riccati --config " + bad.string() + " --out " + out) == 2);
    // missing file
    CHECK(run_cli("value --config /nonexistent.toml --out " + out) == 2);
    // numerical failure: power utility past blow-up
    std::string blow = small_config();
    blow.replace(blow.find("kind = \"exponential\""), std::string("kind = \"exponential\"").size(),
                 "kind = \"power\"");
    blow.replace(blow.find("gamma = 0.5"), std::string("gamma = 0.5").size(), "gamma = 0.95");
    blow.replace(blow.find("theta = [0.2]"), std::string("theta = [0.2]").size(), "theta = [2.5]");
    blow.replace(blow.find("sigma_v = [0.3]"), std::string("sigma_v = [0.3]").size(),
                 "sigma_v = [2.5]");
    blow.replace(blow.find("rho = [-0.7]"), std::string("rho = [-0.7]").size(), "rho = [0.9]");
    blow.replace(blow.find("T = 1.0"), std::string("T = 1.0").size(), "T = 6.0");
    blow.replace(blow.find("n = 24"), std::string("n = 24").size(), "n = 300");
    const fs::path blowf = write_config(temp_dir("cli_blow"), blow);
    CHECK(run_cli("value --config " + blowf.string() + " --out " + out) == 3);
}

TEST_CASE("CLI: artifacts have headers and echo the config hash") {
    const fs::path dir = temp_dir("cli_art");
    const fs::path file = write_config(dir, small_config());
    const std::string out = (dir / "out").string();

    REQUIRE(run_cli("solve-riccati --config " + file.string() + " --out " + out) == 0);
    const std::string riccati = slurp(fs::path(out) / "riccati.csv");
    CHECK(riccati.rfind("t,psi_1\n", 0) == 0);

    REQUIRE(run_cli("simulate --config " + file.string() + " --out " + out + " --paths 3") == 0);
    const std::string paths = slurp(fs::path(out) / "paths.csv");
    CHECK(paths.rfind("path_id,k,t,V_1\n", 0) == 0);

    REQUIRE(run_cli("optimal-strategy --config " + file.string() + " --out " + out) == 0);
    CHECK(slurp(fs::path(out) / "strategy.csv").rfind("t,m_1\n", 0) == 0);

    REQUIRE(run_cli("expected-variance --config " + file.string() + " --out " + out) == 0);
    CHECK(slurp(fs::path(out) / "expected_variance.csv").rfind("t,ev_1\n", 0) == 0);

    REQUIRE(run_cli("value --config " + file.string() + " --out " + out) == 0);
    const ExperimentConfig cfg = load_config(file.string());
    const std::string value = slurp(fs::path(out) / "value.json");
    CHECK(value.find("\"config_hash\": \"" + cfg.config_hash() + "\"") != std::string::npos);
    CHECK(value.find("\"strategy_curve\"") != std::string::npos);
    CHECK(value.find("\"y0\"") != std::string::npos);
    CHECK(value.find("\"t_max\": null") != std::string::npos);

    REQUIRE(run_cli("laplace-check --config " + file.string() + " --out " + out +
                    " --c 0.4 --paths 2000") == 0);
    const std::string laplace = slurp(fs::path(out) / "laplace.json");
    for (const char* key : {"formula_value", "mc_estimate", "mc_se", "z_score", "pass"})
        CHECK(laplace.find(std::string("\"") + key + "\"") != std::string::npos);
    CHECK(laplace.find("\"pass\": true") != std::string::npos);

    REQUIRE(run_cli("indifference --config " + file.string() + " --out " + out) == 0);
    CHECK(slurp(fs::path(out) / "indifference.json").find("\"price\"") != std::string::npos);

    REQUIRE(run_cli("convergence --config " + file.string() + " --out " + out) == 0);
    const std::string conv = slurp(fs::path(out) / "convergence.csv");
    CHECK(conv.rfind("n,error\n", 0) == 0);
    CHECK(conv.find("\n50,") != std::string::npos);
}

TEST_CASE("CLI: solve-riccati on the reference config has nonpositive psi columns") {
    const fs::path dir = temp_dir("cli_psi");
    const std::string out = (dir / "out").string();
    REQUIRE(run_cli("solve-riccati --config " + kConfigDir + "/two_asset_rough.toml --out " + out +
                    " --n 50") == 0);
    std::ifstream in(fs::path(out) / "riccati.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,psi_1,psi_2");
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        for (int i = 0; i < 2; ++i) {
            std::getline(ss, cell, ',');
            CHECK(std::stod(cell) <= 0.0);
        }
        ++rows;
    }
    CHECK(rows == 51);
}

TEST_CASE("CLI: byte-identical artifacts for identical config + seed") {
    const fs::path dir = temp_dir("cli_repro");
    const fs::path file = write_config(dir, small_config());
    const std::string out1 = (dir / "out1").string();
    const std::string out2 = (dir / "out2").string();
    const std::string args = " --config " + file.string() + " --paths 50 --seed 42";

    for (const std::string cmd : {"simulate", "value", "laplace-check"}) {
        REQUIRE(run_cli(cmd + args + " --out " + out1) == 0);
        REQUIRE(run_cli(cmd + args + " --out " + out2) == 0);
    }
    for (const auto& entry : fs::directory_iterator(out1)) {
        const std::string name = entry.path().filename().string();
        CHECK(slurp(entry.path()) == slurp(fs::path(out2) / name));
    }
}
