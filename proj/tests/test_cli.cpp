#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "varlasso/io.hpp"

using namespace varlasso;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "varlasso_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("simulate is reproducible") {
    const fs::path a = fresh("sim_a"), b = fresh("sim_b");
    REQUIRE(run({"simulate", "--experiment", "A", "--k", "10", "--T", "40", "--seed", "3", "--out", a}).code == 0);
    REQUIRE(run({"simulate", "--experiment", "A", "--k", "10", "--T", "40", "--seed", "3", "--out", b}).code == 0);
    CHECK(read_file(a / "data.csv") == read_file(b / "data.csv"));
    CHECK(read_file(a / "truth.json") == read_file(b / "truth.json"));
    CHECK(load_dataset(a / "data.csv").T == 40);
}

TEST_CASE("fit and forecast") {
    const fs::path d = fresh("fit");
    REQUIRE(run({"simulate", "--experiment", "A", "--k", "10", "--T", "80", "--out", d}).code == 0);
    const Run f = run({"fit", "--data", d / "data.csv", "--estimators", "lasso,oracle_ols", "--truth",
                       d / "truth.json", "--out", d});
    CHECK(f.code == 0);
    CHECK(f.out.find("equation 10:") != std::string::npos);
    const SystemFit fit = system_fit_from_json(read_file(d / "fit_lasso.json"));
    CHECK(fit.k == 10);
    const Run fc = run({"forecast", "--data", d / "data.csv", "--fit", d / "fit_oracle_ols.json", "--out", d});
    CHECK(fc.code == 0);
    CHECK(fs::exists(d / "forecast.csv"));
}

TEST_CASE("config files and flag precedence") {
    const fs::path d = fresh("config");
    write_file(d / "cfg.json", R"({"experiment": "A", "k": 10, "T": 30, "reps": 2, "estimators": ["lasso"], "format": "json"})");
    CHECK(run({"mc", "--config", d / "cfg.json", "--out", d}).code == 0);
    CHECK(fs::exists(d / "A_10_30.json"));
    CHECK(run({"mc", "--config", d / "cfg.json", "--T", "25", "--out", d}).code == 0);
    CHECK(fs::exists(d / "A_10_25.json"));
    write_file(d / "bad.json", R"({"experiment": "A", "colour": "blue"})");
    CHECK(run({"mc", "--config", d / "bad.json"}).code == cli::kConfigError);
    write_file(d / "broken.json", "{");
    CHECK(run({"mc", "--config", d / "broken.json"}).code == cli::kConfigError);
}

TEST_CASE("exit codes") {
    const fs::path d = fresh("codes");
    CHECK(run({"frobnicate"}).code == cli::kConfigError);
    CHECK(run({"mc", "--no-such-flag", "1"}).code == cli::kConfigError);
    CHECK(run({"mc", "--experiment", "A", "--k", "30", "--out", d}).code == cli::kConfigError);
    CHECK(run({"mc", "--experiment", "Q", "--out", d}).code == cli::kConfigError);
    CHECK(run({"mc", "--experiment", "A", "--estimators", "magic", "--out", d}).code == cli::kConfigError);

    write_file(d / "explosive.json", R"({"k": 1, "p": 1, "coefficients": [1.2], "sigma": [1.0]})");
    CHECK(run({"simulate", "--model", d / "explosive.json", "--out", d}).code == cli::kModelError);

    REQUIRE(run({"simulate", "--experiment", "A", "--k", "10", "--T", "8", "--out", d}).code == 0);
    CHECK(run({"fit", "--data", d / "data.csv", "--estimators", "oracle_ols", "--out", d}).code == cli::kConfigError);
    CHECK(run({"fit", "--data", d / "data.csv", "--estimators", "full_ols", "--out", d}).code == cli::kEstimatorError);

    CHECK(run({"diag", "--data", d / "data.csv", "--truth", d / "truth.json", "--out", d}).code == 0);
    fs::remove(innovations_path(d / "data.csv"));
    CHECK(run({"diag", "--data", d / "data.csv", "--truth", d / "truth.json", "--out", d}).code ==
          cli::kDiagnosticsError);
}

TEST_CASE("diag on simulated replications") {
    const fs::path d = fresh("diag");
    const Run r = run({"diag", "--experiment", "A", "--k", "10", "--T", "100", "--reps", "2", "--out", d});
    REQUIRE(r.code == 0);
    const std::string text = read_file(d / "diag.json");
    CHECK(text.find("\"b_t\"") != std::string::npos);
    CHECK(text.find("\"foc_verdict\"") != std::string::npos);
    CHECK(text.find("\"A_note\"") != std::string::npos);
}

TEST_CASE("mc output does not depend on the thread count") {
    const fs::path a = fresh("mc_a"), b = fresh("mc_b");
    for (const char* fmt : {"csv", "json"}) {
        REQUIRE(run({"mc", "--experiment", "D", "--k", "10", "--T", "40", "--reps", "6", "--threads", "1",
                     "--format", fmt, "--out", a})
                    .code == 0);
        REQUIRE(run({"mc", "--experiment", "D", "--k", "10", "--T", "40", "--reps", "6", "--threads", "4",
                     "--format", fmt, "--out", b})
                    .code == 0);
        const std::string name = std::string("D_10_40.") + fmt;
        CHECK(read_file(a / name) == read_file(b / name));
    }
    CHECK(read_file(a / "D_10_40.first_coef.csv") == read_file(b / "D_10_40.first_coef.csv"));
}
