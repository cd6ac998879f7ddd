#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpanel/panel.hpp"

namespace fpanel {

enum class ClassifyMethod { threshold, gmm };

/// Disjoint period-index sets covering {0..T-1}, with the tuning that
/// produced them.
struct RegimePartition {
    std::vector<std::vector<int>> regimes;  // sorted members, formation order
    ClassifyMethod method = ClassifyMethod::threshold;
    double tau = 0.0;  // threshold used (threshold method only)
    int k_max = 0;

    int k_hat() const { return static_cast<int>(regimes.size()); }
};

/// T x T matrix of squared quadrature distances between scaled slope curves.
Eigen::MatrixXd delta_matrix(const StepOneFit& step1, const Grid& grid);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// chi-squared CDF with df degrees of freedom.
double chi2_cdf(int df, double x);

/// chi-squared quantile via inversion of the regularized incomplete gamma;
/// |F(F^{-1}(p)) - p| < 1e-10 over df 1..10.
double chi2_quantile(int df, double p);

/// (2/n) times the p_tau quantile of chi-squared with m_lower dof.
double threshold_tau(int n, int m_lower, double p_tau);

/// Iterative threshold classification. Each round a pivot is chosen from the
/// unassigned set (the period with the most tau-neighbours, ties to the
/// smallest index) and all periods within tau of it form the next regime.
/// After k_max-1 rounds every remaining period joins one final regime.
RegimePartition classify_threshold(const Eigen::MatrixXd& delta, double tau, int k_max);

struct KMeansConfig {
    int restarts = 10;
    int max_iters = 300;
    std::uint64_t seed = 20240901;
};

/// Lloyd k-means with k-means++ seeding; returns per-point assignments.
/// Empty clusters are reseeded from the farthest point.
std::vector<int> kmeans(const Eigen::MatrixXd& data, int k, const KMeansConfig& config);

/// Calinski-Harabasz choice of the regime-count upper bound: scaled slope
/// curves are sampled on an equidistant grid and clustered for
/// k = 2..min(k_range_max, T-1); returns the k with the largest CH index
/// (ties to the smallest k; a zero within-scatter counts as +infinity).
/// Returns 1 when all vectors coincide. k_range_max <= 0 means T-1.
int kmax_calinski_harabasz(const StepOneFit& step1, const Grid& grid,
                           int grid_eval_count, int k_range_max,
                           const KMeansConfig& kmeans_config);

struct GmmConfig {
    int restarts = 10;
    int max_iters = 500;
    double tol = 1e-8;
    double var_floor = 1e-8;
    std::uint64_t seed = 20240902;
};

/// Gaussian-mixture alternative: diagonal-covariance mixtures fitted by EM
/// to the unscaled coefficient vectors (a_1t..a_{m_lower}t), component count
/// chosen by BIC over K = 1..k_max, periods assigned by maximum posterior.
RegimePartition classify_gmm(const StepOneFit& step1, int k_max, const GmmConfig& config);

}  // namespace fpanel
