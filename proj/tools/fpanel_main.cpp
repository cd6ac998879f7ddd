#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fpanel/classify.hpp"
#include "fpanel/errors.hpp"
#include "fpanel/model_io.hpp"
#include "fpanel/panel.hpp"
#include "fpanel/refit.hpp"
#include "fpanel/simulation.hpp"
#include "fpanel/version.hpp"

namespace {

struct FitArgs {
    std::string curves;
    std::string scalars;
    std::string out;
    std::string plot_data;
    double p_tau = 0.99;
    std::optional<int> k_max;
    std::optional<int> m;
    std::string classifier = "threshold";
    std::uint64_t seed = 1;
};

struct SimulateArgs {
    int scenario = 1;
    int n = 50;
    int T = 50;
    int reps = 200;
    std::uint64_t seed = 1;
    double p_tau = 0.99;
    std::string classifier = "threshold";
    int L = 101;
    std::optional<int> m;
    int threads = 0;
    std::string out;
    std::string dump_data;
};

fpanel::ClassifyMethod parse_classifier(const std::string& name) {
    if (name == "threshold") return fpanel::ClassifyMethod::threshold;
    if (name == "gmm") return fpanel::ClassifyMethod::gmm;
    throw fpanel::validation_error("classifier must be 'threshold' or 'gmm'");
}

int cmd_fit(const FitArgs& args) {
    const fpanel::Panel panel = fpanel::load_panel(args.curves, args.scalars);

    fpanel::FitConfig fc;
    fc.m_override = args.m;
    const fpanel::StepOneFit step1 = fpanel::fit_step1(panel, fc);

    const Eigen::MatrixXd delta = fpanel::delta_matrix(step1, panel.grid);

    fpanel::KMeansConfig km;
    km.seed = args.seed;
    const int k_max = args.k_max
                          ? *args.k_max
                          : fpanel::kmax_calinski_harabasz(step1, panel.grid, 101, 0, km);

    const auto method = parse_classifier(args.classifier);
    fpanel::RegimePartition partition;
    if (method == fpanel::ClassifyMethod::threshold) {
        const double tau = fpanel::threshold_tau(static_cast<int>(panel.n()), step1.m_lower,
                                                 args.p_tau);
        partition = fpanel::classify_threshold(delta, tau, k_max);
    } else {
        fpanel::GmmConfig gc;
        gc.seed = args.seed + 1;
        partition = fpanel::classify_gmm(step1, k_max, gc);
    }

    const fpanel::RegimeFit refit = fpanel::refit_regimes(panel, partition, step1, args.m);

    fpanel::ModelDocument::ConfigEcho echo;
    echo.p_tau = args.p_tau;
    echo.m_override = args.m;
    echo.k_max_override = args.k_max;
    echo.seed = args.seed;
    echo.classifier = args.classifier;
    const fpanel::ModelDocument doc =
        fpanel::build_model_document(panel.grid, step1, partition, refit, echo);
    fpanel::save_model(doc, args.out);

    if (!args.plot_data.empty())
        fpanel::write_plot_data(args.plot_data, panel.grid, step1, refit);

    std::cout << "wrote " << args.out << " (K_hat = " << partition.k_hat() << ", m_lower = "
              << step1.m_lower << ")\n";
    return 0;
}

int cmd_simulate(const SimulateArgs& args) {
    fpanel::SimConfig config;
    config.scenario = args.scenario;
    config.n = args.n;
    config.T = args.T;
    config.reps = args.reps;
    config.seed = args.seed;
    config.p_tau = args.p_tau;
    config.classifier = parse_classifier(args.classifier);
    config.L = args.L;
    config.m_override = args.m;
    config.threads = args.threads;

    const fpanel::SimReport report = fpanel::run_monte_carlo(config);
    fpanel::save_report(report, args.out);

    if (!args.dump_data.empty()) {
        auto [panel, truth] = fpanel::dgp_scenario(config, 0);
        std::filesystem::create_directories(args.dump_data);
        const std::filesystem::path dir(args.dump_data);
        fpanel::dump_panel_csv(panel, dir / "curves.csv", dir / "scalars.csv");
    }

    std::cout << "wrote " << args.out << " (" << report.config.reps << " replications, "
              << report.failures << " failures)\n";
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Partial functional linear panel regression with latent time regimes"};
    app.set_version_flag("--version", fpanel::library_version);
    app.set_config("--config");
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the three-step estimator to CSV data");
    fit_cmd->add_option("--curves", fit.curves, "long-format curve file (i,t,s,x)")
        ->required()
        ->check(CLI::ExistingFile);
    fit_cmd->add_option("--scalars", fit.scalars, "scalar file (i,t,y,z1..zP)")
        ->required()
        ->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", fit.out, "output model JSON")->required();
    fit_cmd->add_option("--p-tau", fit.p_tau, "threshold quantile level")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    int fit_kmax = 0, fit_m = 0;
    auto* kopt = fit_cmd->add_option("--k-max", fit_kmax, "regime-count bound (default: CH index)")
                     ->check(CLI::PositiveNumber);
    auto* mopt = fit_cmd->add_option("--m", fit_m, "fixed truncation level")
                     ->check(CLI::PositiveNumber);
    fit_cmd->add_option("--classifier", fit.classifier, "threshold | gmm")
        ->check(CLI::IsMember({"threshold", "gmm"}));
    fit_cmd->add_option("--seed", fit.seed, "seed for clustering restarts");
    fit_cmd->add_option("--plot-data", fit.plot_data, "directory for u,value plot files");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study of the estimator");
    sim_cmd->add_option("--scenario", sim.scenario, "1 or 2")->required()->check(CLI::Range(1, 2));
    sim_cmd->add_option("--n", sim.n, "cross-section size")->required();
    sim_cmd->add_option("--T", sim.T, "number of periods")->required();
    sim_cmd->add_option("--reps", sim.reps, "replications")->required();
    sim_cmd->add_option("--seed", sim.seed, "master seed")->required();
    sim_cmd->add_option("--p-tau", sim.p_tau, "threshold quantile level")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    sim_cmd->add_option("--classifier", sim.classifier, "threshold | gmm")
        ->check(CLI::IsMember({"threshold", "gmm"}));
    sim_cmd->add_option("--L", sim.L, "grid size")->check(CLI::Range(2, 100000));
    int sim_m = 0;
    auto* smopt = sim_cmd->add_option("--m", sim_m, "fixed truncation level")
                      ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--threads", sim.threads, "worker threads (0 = hardware)");
    sim_cmd->add_option("--out", sim.out, "output report JSON")->required();
    sim_cmd->add_option("--dump-data", sim.dump_data, "directory for replication-0 CSV dump");

    int qdf = 1;
    double qp = 0.5;
    auto* q_cmd = app.add_subcommand("quantile", "Print a chi-squared quantile");
    q_cmd->add_option("--df", qdf, "degrees of freedom")->required()->check(CLI::PositiveNumber);
    q_cmd->add_option("--p", qp, "probability in (0,1)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        if (rc != 0) std::cerr << "error_code=1 detail=usage\n";
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(fit_cmd)) {
            if (kopt->count()) fit.k_max = fit_kmax;
            if (mopt->count()) fit.m = fit_m;
            return cmd_fit(fit);
        }
        if (app.got_subcommand(sim_cmd)) {
            if (smopt->count()) sim.m = sim_m;
            return cmd_simulate(sim);
        }
        if (app.got_subcommand(q_cmd)) {
            std::printf("%.5f\n", fpanel::chi2_quantile(qdf, qp));
            return 0;
        }
    } catch (const fpanel::validation_error& e) {
        std::cerr << "error_code=2 detail=" << e.what() << "\n";
        return 2;
    } catch (const fpanel::numeric_error& e) {
        std::cerr << "error_code=3 detail=" << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error_code=3 detail=" << e.what() << "\n";
        return 3;
    }
    return 1;
}

int main(int argc, char** argv) { return run_cli(argc, argv); }
