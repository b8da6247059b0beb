#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "varlasso/io.hpp"
#include "varlasso/mc.hpp"

using namespace varlasso;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "varlasso_io_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("dataset round trip is exact") {
    const Dgp dgp = make_dgp('B', 10);
    const Dataset d = simulate(dgp.model, 30, 4);
    const fs::path csv = scratch("sim.csv");
    save_dataset(d, csv);
    CHECK(fs::exists(meta_path(csv)));
    CHECK(meta_path(csv).filename() == "sim.meta.json");
    CHECK(innovations_path(csv).filename() == "sim.innovations.csv");
    const Dataset back = load_dataset(csv);
    CHECK(back.k == 10);
    CHECK(back.p == 4);
    CHECK(back.T == 30);
    CHECK(back.initial == d.initial);
    CHECK(back.path == d.path);
    REQUIRE(back.innovations);
    CHECK(*back.innovations == *d.innovations);
    CHECK(read_file(csv).rfind("y1,y2,", 0) == 0);
}

TEST_CASE("dataset without innovations drops the sidecar") {
    const Dgp dgp = make_dgp('A', 10);
    Dataset d = simulate(dgp.model, 10, 4);
    const fs::path csv = scratch("bare.csv");
    save_dataset(d, csv);
    d.innovations.reset();
    save_dataset(d, csv);
    CHECK(!fs::exists(innovations_path(csv)));
    CHECK(!load_dataset(csv).innovations);
}

TEST_CASE("malformed datasets are rejected") {
    const fs::path csv = scratch("bad.csv");
    write_file(csv, "y1,y2\n1,2\n3\n");
    write_file(meta_path(csv), R"({"k": 2, "p": 1, "T": 1})");
    CHECK_THROWS_AS(load_dataset(csv), FormatError);
    write_file(csv, "y1,y2\n1,2\n3,abc\n");
    CHECK_THROWS_AS(load_dataset(csv), FormatError);
    write_file(csv, "y1,y2\n1,2\n3,4\n");
    write_file(meta_path(csv), R"({"k": 2, "p": 1, "T": 5})");
    CHECK_THROWS_AS(load_dataset(csv), FormatError);
    write_file(meta_path(csv), "{not json");
    CHECK_THROWS_AS(load_dataset(csv), FormatError);
    CHECK_THROWS_AS(read_file(scratch("missing.csv")), FormatError);
}

TEST_CASE("matrix csv") {
    Matrix M(2, 2);
    M << 0.1, -1e-300, 1.0 / 3.0, 12345.678;
    const Matrix back = matrix_from_csv(matrix_to_csv(M, "x"));
    CHECK(back == M);
    CHECK(matrix_to_csv(M, "x").rfind("x1,x2\n", 0) == 0);
    CHECK_THROWS_AS(matrix_from_csv(""), FormatError);
}

TEST_CASE("model json round trip and strictness") {
    const VarModel m = make_dgp('C', 10).model;
    const VarModel back = model_from_json(model_to_json(m));
    CHECK(back.p() == 5);
    CHECK(back.coefficients() == m.coefficients());
    CHECK(back.sigma() == m.sigma());
    CHECK_THROWS_AS(model_from_json(R"({"k":1,"p":1,"coefficients":[0.5],"sigma":[1],"extra":1})"), FormatError);
    CHECK_THROWS_AS(model_from_json(R"({"k":1,"p":1,"coefficients":[0.5, 1],"sigma":[1]})"), FormatError);
    CHECK_THROWS_AS(model_from_json(R"({"k":1,"p":1,"sigma":[1]})"), FormatError);
}

TEST_CASE("system fit json round trip") {
    const Dgp dgp = make_dgp('A', 10);
    const Dataset d = simulate(dgp.model, 50, 2);
    for (EstimatorTag t : {EstimatorTag::lasso, EstimatorTag::oracle_ols}) {
        const SystemFit fit = fit_system(d, t, &dgp.truth);
        const std::string text = system_fit_to_json(fit);
        const SystemFit back = system_fit_from_json(text);
        CHECK(back.tag == t);
        CHECK(back.coefficients() == fit.coefficients());
        for (std::size_t i = 0; i < fit.equations.size(); ++i) {
            CHECK(back.equations[i].active_set == fit.equations[i].active_set);
            const double a = fit.equations[i].lambda_selected, b = back.equations[i].lambda_selected;
            CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
        }
        CHECK(system_fit_to_json(back) == text);
    }
    CHECK_THROWS_AS(system_fit_from_json(R"({"estimator":"nope","k":1,"p":1,"beta":[0]})"), FormatError);
}
