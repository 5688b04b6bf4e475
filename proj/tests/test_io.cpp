#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "nok/io.hpp"
#include "test_util.hpp"

using namespace nok;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
    void write(const std::string& text) const {
        std::ofstream out(path);
        out << text;
    }
};

}  // namespace

TEST_CASE("load_matrix transposes samples into columns") {
    TempFile f("nok_io_basic.csv");
    f.write("1,2,3,4\n5,6,7,8\n9,10,11,12\n");
    const Eigen::MatrixXd M = load_matrix(f.path);
    REQUIRE(M.rows() == 4);
    REQUIRE(M.cols() == 3);
    CHECK(M(0, 0) == 1.0);
    CHECK(M(3, 0) == 4.0);
    CHECK(M(0, 2) == 9.0);
    CHECK(M(3, 2) == 12.0);
}

TEST_CASE("load_matrix skips a single header row") {
    TempFile f("nok_io_header.csv");
    f.write("x0,x1,x2\n1,2,3\n4,5,6\n");
    const Eigen::MatrixXd M = load_matrix(f.path);
    REQUIRE(M.rows() == 3);
    REQUIRE(M.cols() == 2);
    CHECK(M(2, 1) == 6.0);
}

TEST_CASE("load_matrix rejects malformed input with a location") {
    TempFile f("nok_io_bad.csv");

    SECTION("ragged rows") {
        f.write("1,2,3\n4,5\n");
        CHECK_THROWS_AS(load_matrix(f.path), ParseError);
        try {
            load_matrix(f.path);
        } catch (const ParseError& e) {
            CHECK(e.row == 2);
        }
    }

    SECTION("non-numeric cell after the header") {
        f.write("1,2,3\n4,oops,6\n");
        try {
            load_matrix(f.path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.row == 2);
            CHECK(e.column == 2);
        }
    }

    SECTION("non-finite cell") {
        f.write("1,2\ninf,4\n");
        CHECK_THROWS_AS(load_matrix(f.path), ParseError);
    }

    SECTION("empty file") {
        f.write("");
        CHECK_THROWS_AS(load_matrix(f.path), ParseError);
    }

    SECTION("missing file") {
        CHECK_THROWS_AS(load_matrix("/nonexistent/foo.csv"), IoError);
    }
}

TEST_CASE("save and load round-trip doubles bitwise") {
    std::mt19937_64 rng(3);
    TempFile f("nok_io_roundtrip.csv");
    Eigen::MatrixXd X = nok_test::random_gaussian(5, 7, rng);
    X(0, 0) = 1.0 / 3.0;
    X(1, 1) = 1e-300;
    X(2, 2) = -9.87654321987654321e18;
    save_matrix(f.path, X);
    const Eigen::MatrixXd back = load_matrix(f.path);
    REQUIRE(back.rows() == X.rows());
    REQUIRE(back.cols() == X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        for (Eigen::Index i = 0; i < X.rows(); ++i) REQUIRE(back(i, j) == X(i, j));
}

TEST_CASE("design JSON round trip") {
    const StructuredDesign design = build_design(13, 4);
    const json j = design_to_json(design);
    CHECK(j.at("n") == 13);
    CHECK(j.at("lambda_set") == std::vector<long>{1, 5, 8, 12});
    CHECK(j.at("seed_or_null").is_null());
    const StructuredDesign back = design_from_json(j);
    CHECK((back.matrix() - design.matrix()).norm() == 0.0);

    const StructuredDesign seeded = randomize_design(design, 77);
    const StructuredDesign seeded_back = design_from_json(design_to_json(seeded));
    CHECK((seeded_back.matrix() - seeded.matrix()).norm() == 0.0);

    json corrupted = j;
    corrupted["lambda_set"] = std::vector<long>{1, 2, 3, 4};
    CHECK_THROWS_AS(design_from_json(corrupted), IntegrityError);
}

TEST_CASE("penalty JSON round trip") {
    for (const Penalty& p : {Penalty::l0(0.4), Penalty::l1(0.2), Penalty::mcp(0.3, 2.5),
                             Penalty::capped_l1(0.1, 1.5), Penalty::scad(0.2, 3.7), Penalty::mcp0(0.8),
                             Penalty::nonneg(), Penalty::top_k(4)}) {
        const Penalty back = penalty_from_json(penalty_to_json(p));
        CHECK(back.family == p.family);
        CHECK(back.lambda == p.lambda);
        if (p.family == PenaltyFamily::TopK) CHECK(back.k == p.k);
    }
    CHECK_THROWS_AS(penalty_from_json(nlohmann::json::object()), ParseError);
}

TEST_CASE("run config") {
    SECTION("defaults validate and build") {
        RunConfig cfg;
        cfg.validate();
        const NokConfig ncfg = cfg.make_nok_config();
        CHECK(ncfg.design->n() == 13);
        CHECK(ncfg.input_gain == 1.0);
    }

    SECTION("JSON round trip") {
        RunConfig cfg;
        cfg.n = 29;
        cfg.m = 4;
        cfg.penalty = Penalty::mcp(0.3, 3.0);
        cfg.T = 7;
        cfg.gain_inv_sqrt_n = true;
        cfg.seed = 99;
        const RunConfig back = RunConfig::from_json(cfg.to_json());
        CHECK(back.n == 29);
        CHECK(back.penalty.family == PenaltyFamily::Mcp);
        CHECK(back.gain_inv_sqrt_n);
        CHECK(back.seed == 99);
        const NokConfig ncfg = back.make_nok_config();
        CHECK(ncfg.input_gain == Catch::Approx(1.0 / std::sqrt(58.0)));
    }

    SECTION("cross-field validation at load") {
        nlohmann::json j;
        j["design"] = {{"n", 12}, {"m", 4}};
        CHECK_THROWS_AS(RunConfig::from_json(j), InvalidInputError);
        j["design"] = {{"n", 13}, {"m", 5}};
        CHECK_THROWS_AS(RunConfig::from_json(j), InvalidInputError);
        j = nlohmann::json::object();
        j["input_gain"] = "half";
        CHECK_THROWS_AS(RunConfig::from_json(j), ParseError);
        j = nlohmann::json::object();
        j["input_gain"] = 0.5;
        CHECK_THROWS_AS(RunConfig::from_json(j), ParseError);
    }

    SECTION("corrupted config file reports a parse error") {
        TempFile f("nok_io_corrupt.json");
        f.write("{\"design\": {\"n\": 13,");
        CHECK_THROWS_AS(RunConfig::load(f.path), ParseError);
    }
}

TEST_CASE("reports") {
    SECTION("empty check list is a valid document") {
        const json rep = make_report(RunConfig().to_json(), {});
        CHECK(rep.at("checks").is_array());
        CHECK(rep.at("checks").empty());
        CHECK(rep.at("version") == "1");
        CHECK(rep.contains("traces"));
        CHECK(rep.contains("bounds"));
    }

    SECTION("identical inputs give byte-identical documents") {
        std::vector<CheckResult> checks = {{"monotonic_descent", true, 1.2e-13, 1.5e-10},
                                           {"ksparse_descent", true, 0.0, 1e-10}};
        const json a = make_report(RunConfig().to_json(), checks, json::object(), json::object(), "");
        const json b = make_report(RunConfig().to_json(), checks, json::object(), json::object(), "");
        CHECK(a.dump(2) == b.dump(2));
        CHECK(a.at("checks")[0].at("name") == "monotonic_descent");
        CHECK(a.at("checks")[0].at("passed") == true);
    }

    SECTION("write and reread") {
        TempFile f("nok_io_report.json");
        const json rep = make_report(RunConfig().to_json(), {{"probe", true, 0.0, 1.0}});
        write_report(rep, f.path);
        std::ifstream in(f.path);
        const nlohmann::json back = nlohmann::json::parse(in);
        CHECK(back.at("checks").size() == 1);
        CHECK_THROWS_AS(write_report(rep, "/nonexistent/dir/report.json"), IoError);
    }
}
