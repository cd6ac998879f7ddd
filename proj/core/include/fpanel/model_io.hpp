#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpanel/classify.hpp"
#include "fpanel/panel.hpp"
#include "fpanel/refit.hpp"
#include "fpanel/simulation.hpp"

namespace fpanel {

/// Everything a fit produces, in serializable form.
struct ModelDocument {
    Eigen::VectorXd grid_points;

    struct PeriodRecord {
        int t = 0;  // 1-based in the file
        int m = 0;
        Eigen::VectorXd beta;
        double sigma_eps = 0.0;
        Eigen::VectorXd alpha;
        Eigen::VectorXd alpha_delta;
    };
    std::vector<PeriodRecord> periods;

    struct PartitionRecord {
        std::string method;  // "threshold" | "gmm"
        double tau = 0.0;
        int k_max = 0;
        std::vector<std::vector<int>> regimes;  // 1-based members
    };
    PartitionRecord partition;

    struct RegimeRecord {
        int k = 0;  // 1-based
        std::vector<int> members;  // 1-based
        int m = 0;
        Eigen::VectorXd A;
    };
    std::vector<RegimeRecord> regimes;

    struct ConfigEcho {
        double p_tau = 0.0;
        std::optional<int> m_override;
        std::optional<int> k_max_override;
        std::uint64_t seed = 0;
        std::string classifier;
    };
    ConfigEcho config;
};

ModelDocument build_model_document(const Grid& grid, const StepOneFit& step1,
                                   const RegimePartition& partition, const RegimeFit& refit,
                                   const ModelDocument::ConfigEcho& echo);

std::string model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const std::string& text);

void save_model(const ModelDocument& doc, const std::filesystem::path& path);
ModelDocument load_model(const std::filesystem::path& path);

std::string report_to_json(const SimReport& report);
void save_report(const SimReport& report, const std::filesystem::path& path);

/// Long-format curve file: header `i,t,s,x`, one row per (unit, period,
/// grid point). Every (i,t) must supply values on one shared sorted grid.
std::pair<Grid, std::vector<Eigen::MatrixXd>> load_curves_csv(const std::filesystem::path& path);

/// Scalar file: header `i,t,y,z1..zP`, dense in (i,t).
struct ScalarData {
    Eigen::MatrixXd y;               // n x T
    std::vector<Eigen::MatrixXd> z;  // T of n x P
};
ScalarData load_scalars_csv(const std::filesystem::path& path);

/// Assembles and validates a Panel from the two files.
Panel load_panel(const std::filesystem::path& curves, const std::filesystem::path& scalars);

void dump_panel_csv(const Panel& panel, const std::filesystem::path& curves,
                    const std::filesystem::path& scalars);

/// Writes `u,value` files (one per scaled slope curve and per regime curve)
/// for external plotting.
void write_plot_data(const std::filesystem::path& dir, const Grid& grid,
                     const StepOneFit& step1, const RegimeFit& refit);

}  // namespace fpanel
