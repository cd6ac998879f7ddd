#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "fpanel/errors.hpp"
#include "fpanel/model_io.hpp"
#include "fpanel/rng.hpp"
#include "fpanel/simulation.hpp"

using namespace fpanel;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "fpanel_io_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("load_curves_csv happy path") {
    const fs::path p = temp_dir() / "curves_ok.csv";
    write_file(p,
               "i,t,s,x\n"
               "1,1,0,1\n"
               "1,1,0.5,2\n"
               "1,1,1,3\n");
    auto [grid, x] = load_curves_csv(p);
    CHECK(grid.size() == 3);
    CHECK(grid.points[1] == doctest::Approx(0.5));
    REQUIRE(x.size() == 1);
    CHECK(x[0](0, 0) == doctest::Approx(1.0));
    CHECK(x[0](0, 2) == doctest::Approx(3.0));
}

TEST_CASE("load_curves_csv failures carry locations") {
    SUBCASE("mismatched grids name the offending cell") {
        const fs::path p = temp_dir() / "curves_ragged.csv";
        write_file(p,
                   "i,t,s,x\n"
                   "1,1,0,1\n1,1,1,2\n"
                   "2,1,0,1\n2,1,0.7,5\n2,1,1,2\n");
        try {
            load_curves_csv(p);
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("(i=2,t=1)") != std::string::npos);
        }
    }
    SUBCASE("missing cell") {
        const fs::path p = temp_dir() / "curves_missing.csv";
        write_file(p,
                   "i,t,s,x\n"
                   "1,1,0,1\n1,1,1,2\n"
                   "1,2,0,1\n1,2,1,2\n"
                   "2,1,0,1\n2,1,1,2\n");
        try {
            load_curves_csv(p);
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("missing cell (i=2,t=2)") != std::string::npos);
        }
    }
    SUBCASE("non-numeric field reports its line") {
        const fs::path p = temp_dir() / "curves_nan.csv";
        write_file(p,
                   "i,t,s,x\n"
                   "1,1,0,1\n"
                   "1,1,0.5,abc\n"
                   "1,1,1,3\n");
        try {
            load_curves_csv(p);
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find(":3:") != std::string::npos);
        }
    }
    SUBCASE("bad header") {
        const fs::path p = temp_dir() / "curves_hdr.csv";
        write_file(p, "t,i,s,x\n1,1,0,1\n");
        CHECK_THROWS_AS(load_curves_csv(p), validation_error);
    }
}

TEST_CASE("load_scalars_csv") {
    SUBCASE("minimal panel with one covariate") {
        const fs::path p = temp_dir() / "scalars_ok.csv";
        write_file(p,
                   "i,t,y,z1\n"
                   "1,1,0.5,1\n"
                   "2,1,-0.5,2\n");
        const ScalarData d = load_scalars_csv(p);
        CHECK(d.y.rows() == 2);
        CHECK(d.y.cols() == 1);
        CHECK(d.z[0].cols() == 1);
        CHECK(d.z[0](1, 0) == doctest::Approx(2.0));
    }
    SUBCASE("missing row is reported") {
        const fs::path p = temp_dir() / "scalars_missing.csv";
        write_file(p,
                   "i,t,y\n"
                   "1,1,0.5\n"
                   "2,2,1.5\n"
                   "1,2,2.5\n");
        try {
            load_scalars_csv(p);
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("missing cell (i=2,t=1)") != std::string::npos);
        }
    }
    SUBCASE("duplicate rows are rejected") {
        const fs::path p = temp_dir() / "scalars_dup.csv";
        write_file(p,
                   "i,t,y\n"
                   "1,1,0.5\n"
                   "1,1,0.6\n");
        CHECK_THROWS_AS(load_scalars_csv(p), validation_error);
    }
    SUBCASE("pure functional model without z columns") {
        const fs::path p = temp_dir() / "scalars_p0.csv";
        write_file(p,
                   "i,t,y\n"
                   "1,1,0.5\n"
                   "2,1,1.5\n");
        const ScalarData d = load_scalars_csv(p);
        CHECK(d.z[0].cols() == 0);
    }
}

TEST_CASE("panel dump and reload reproduce the fit exactly") {
    SimConfig config;
    config.scenario = 1;
    config.n = 20;
    config.T = 6;
    config.seed = 5150;
    auto [panel, truth] = dgp_scenario(config, 0);

    const fs::path curves = temp_dir() / "dump_curves.csv";
    const fs::path scalars = temp_dir() / "dump_scalars.csv";
    dump_panel_csv(panel, curves, scalars);
    const Panel loaded = load_panel(curves, scalars);

    CHECK(loaded.n() == panel.n());
    CHECK(loaded.T() == panel.T());
    CHECK(loaded.y == panel.y);
    CHECK(loaded.x[3] == panel.x[3]);
    CHECK(loaded.z[5] == panel.z[5]);

    FitConfig fc;
    fc.m_override = 2;
    const StepOneFit f1 = fit_step1(panel, fc);
    const StepOneFit f2 = fit_step1(loaded, fc);
    for (int t = 0; t < 6; ++t) {
        CHECK(f1.fits[t].alpha_delta == f2.fits[t].alpha_delta);
        CHECK(f1.fits[t].beta_hat == f2.fits[t].beta_hat);
    }
}

namespace {

ModelDocument small_document() {
    SimConfig config;
    config.scenario = 1;
    config.n = 20;
    config.T = 6;
    config.seed = 31;
    auto [panel, truth] = dgp_scenario(config, 0);
    FitConfig fc;
    fc.m_override = 2;
    const StepOneFit step1 = fit_step1(panel, fc);
    const Eigen::MatrixXd delta = delta_matrix(step1, panel.grid);
    const double tau = threshold_tau(20, step1.m_lower, 0.99);
    const RegimePartition part = classify_threshold(delta, tau, 4);
    const RegimeFit refit = refit_regimes(panel, part, step1, 2);
    ModelDocument::ConfigEcho echo;
    echo.p_tau = 0.99;
    echo.m_override = 2;
    echo.seed = 31;
    echo.classifier = "threshold";
    return build_model_document(panel.grid, step1, part, refit, echo);
}

}  // namespace

TEST_CASE("model document round trips byte-identically") {
    const ModelDocument doc = small_document();
    const std::string once = model_to_json(doc);
    const ModelDocument parsed = model_from_json(once);
    const std::string twice = model_to_json(parsed);
    CHECK(once == twice);

    // file indices are 1-based
    CHECK(doc.periods.front().t == 1);
    CHECK(doc.regimes.front().k == 1);
}

TEST_CASE("loader rejects foreign schema majors") {
    const std::string text = model_to_json(small_document());
    const std::string tampered = [&] {
        std::string s = text;
        const auto pos = s.find("\"schema_version\": \"");
        REQUIRE(pos != std::string::npos);
        s[pos + 19] = '9';
        return s;
    }();
    CHECK_THROWS_AS(model_from_json(tampered), validation_error);
    CHECK_THROWS_AS(model_from_json("{not json"), validation_error);
}

TEST_CASE("report serialization carries records and summaries") {
    SimConfig config;
    config.scenario = 1;
    config.n = 25;
    config.T = 9;
    config.reps = 3;
    config.seed = 41;
    config.m_override = 2;
    const SimReport report = run_monte_carlo(config);
    const std::string text = report_to_json(report);
    CHECK(text.find("\"records\"") != std::string::npos);
    CHECK(text.find("\"summary\"") != std::string::npos);
    CHECK(text.find("\"beta_mse\"") != std::string::npos);
    CHECK(text.find("\"threads\"") == std::string::npos);  // not part of the contract
}

TEST_CASE("plot data files") {
    SimConfig config;
    config.scenario = 1;
    config.n = 20;
    config.T = 6;
    config.seed = 61;
    auto [panel, truth] = dgp_scenario(config, 0);
    FitConfig fc;
    fc.m_override = 2;
    const StepOneFit step1 = fit_step1(panel, fc);
    const RegimePartition part = classify_threshold(
        delta_matrix(step1, panel.grid), threshold_tau(20, 2, 0.99), 5);
    const RegimeFit refit = refit_regimes(panel, part, step1, 2);

    const fs::path dir = temp_dir() / "plots";
    write_plot_data(dir, panel.grid, step1, refit);
    CHECK(fs::exists(dir / "alpha_delta_t1.csv"));
    CHECK(fs::exists(dir / "alpha_delta_t6.csv"));
    CHECK(fs::exists(dir / "regime_A1.csv"));
    std::ifstream in(dir / "regime_A1.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "u,value");
}
