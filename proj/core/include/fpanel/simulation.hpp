#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpanel/classify.hpp"
#include "fpanel/panel.hpp"
#include "fpanel/refit.hpp"

namespace fpanel {

struct SimConfig {
    int scenario = 1;  // 1 or 2
    int n = 50;
    int T = 50;
    int reps = 200;
    std::uint64_t seed = 1;
    double p_tau = 0.99;
    ClassifyMethod classifier = ClassifyMethod::threshold;
    int L = 101;                   // grid size
    std::optional<int> m_override;
    int grid_eval_count = 101;     // CH feature grid
    int k_range_max = 0;           // 0 -> T-1
    KMeansConfig kmeans;
    GmmConfig gmm;
    int threads = 0;               // 0 -> hardware concurrency
};

void validate_config(const SimConfig& config);

/// Ground truth behind one simulated panel: the regime layout, the three
/// regime curves on the grid, and the per-period scalar parameters.
struct TruthBundle {
    std::vector<std::vector<int>> partition;  // 3 regimes of 0-based periods
    std::vector<Eigen::VectorXd> curves;      // A_1, A_2, A_3 on the grid
    Eigen::VectorXd beta;                     // T
    Eigen::VectorXd rho;                      // T
};

/// Regime curves evaluated on an arbitrary grid.
Eigen::VectorXd scenario_curve(int scenario, int which, const Grid& grid);

/// Consecutive-thirds regime layout used by both scenarios.
std::vector<std::vector<int>> truth_partition(int T);

/// Draws one panel: curves are finite series in the sine basis with
/// independent Gaussian scores, responses follow the regime model with
/// standard normal covariate and noise. Deterministic in (seed, rep).
std::pair<Panel, TruthBundle> dgp_scenario(const SimConfig& config, std::uint64_t rep);

/// Best injective matching of estimated regimes onto true ones (assignment
/// over the overlap matrix); returns misclassified count / T.
double classification_error(const RegimePartition& est,
                            const std::vector<std::vector<int>>& truth, int T);

/// For each true regime, the index of the aligned estimated regime
/// (falls back to the largest-overlap regime when unmatched).
std::vector<int> align_to_truth(const RegimePartition& est,
                                const std::vector<std::vector<int>>& truth, int T);

/// Maximum-weight assignment on a (rows x cols) score matrix; returns for
/// each row the assigned column or -1. Exact (Hungarian method).
std::vector<int> max_assignment(const Eigen::MatrixXd& score);

/// ||estimate - truth||^2 / ||truth||^2 under the grid quadrature.
double relative_l2_error(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                         const Grid& grid);

struct RepRecord {
    int rep = 0;
    bool failed = false;
    std::string error;
    double beta_mse = 0.0;
    double class_error_threshold = 0.0;
    std::optional<double> class_error_gmm;
    std::array<double, 3> rel_error{};  // per true regime
    int k_hat = 0;
    int k_max = 0;
};

struct MetricSummary {
    double q25 = 0.0, median = 0.0, mean = 0.0, q75 = 0.0, sd = 0.0;
};

struct SimReport {
    SimConfig config;
    std::vector<RepRecord> records;             // one per replication
    std::map<std::string, MetricSummary> summary;  // over non-failed records
    int failures = 0;
};

/// Summary statistics over the non-failed records; recomputable from them.
std::map<std::string, MetricSummary> summarize(const std::vector<RepRecord>& records);

/// Monte Carlo study of the full three-step pipeline. Replications run in
/// independent seeded substreams keyed by (seed, rep), so parallel and
/// serial execution produce identical reports.
SimReport run_monte_carlo(const SimConfig& config);

}  // namespace fpanel
