#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fpanel/grid.hpp"

namespace fpanel {

/// Panel of n units observed over T periods: per period a functional
/// regressor (n curves on the shared Grid), a scalar response and P >= 0
/// scalar covariates.
struct Panel {
    Grid grid;
    std::vector<Eigen::MatrixXd> x;  // T matrices, each n x L
    Eigen::MatrixXd y;               // n x T
    std::vector<Eigen::MatrixXd> z;  // T matrices, each n x P

    Eigen::Index n() const { return y.rows(); }
    Eigen::Index T() const { return y.cols(); }
    Eigen::Index L() const { return grid.size(); }
    Eigen::Index P() const { return z.empty() ? 0 : z.front().cols(); }
};

/// Validates shapes and finiteness; throws validation_error.
void validate_panel(const Panel& panel);

/// Within-transformed data for one period (cross-sectional means removed).
struct CenteredSlice {
    Eigen::MatrixXd x;  // n x L
    Eigen::VectorXd y;  // n
    Eigen::MatrixXd z;  // n x P
};

/// Removes the per-period fixed effect by subtracting cross-sectional means.
CenteredSlice within_center(const Panel& panel, Eigen::Index t);

/// All periods at once.
std::vector<CenteredSlice> within_center(const Panel& panel);

struct FitConfig {
    std::optional<int> m_override;  // exact truncation level for every period
    std::optional<int> m_min;       // clamp on the eigenvalue-ratio choice
    std::optional<int> m_max;
    int ratio_search_cap = 20;        // combined with n-1 and L-1
    double eigen_floor_rel = 1e-12;   // relative eigenvalue floor
    double rank_tol = 1e-10;          // QR rank-deficiency threshold
};

/// Per-period estimate: FPCA truncation, series coefficients, covariate
/// slopes, residual scale, and (after scale_alpha) the scaled slope curve.
struct PeriodFit {
    int t = 0;  // 0-based period index
    int m = 0;  // truncation level m_t
    EigenSystem eig;
    Eigen::VectorXd a_hat;        // m series coefficients
    Eigen::VectorXd beta_hat;     // P covariate slopes
    Eigen::VectorXd alpha_hat;    // slope curve on the grid
    double sigma_eps = 0.0;       // residual scale, sqrt of mean squared residual
    Eigen::VectorXd alpha_delta;  // scaled slope curve (empty until scale_alpha)
};

struct StepOneFit {
    std::vector<PeriodFit> fits;  // one per period, in period order
    int m_lower = 0;              // min_t m_t

    Eigen::Index T() const { return static_cast<Eigen::Index>(fits.size()); }
};

/// Step-1 regression at one period: FPCA of the centered curves, truncation
/// by the eigenvalue-ratio rule (or override), joint least squares of y^c on
/// [scores | z^c], slope curve assembly and residual scale.
PeriodFit fit_period(const Panel& panel, Eigen::Index t, const FitConfig& config = {});

/// Mean squared residual of a period fit against its centered data.
double residual_variance(const PeriodFit& fit, const CenteredSlice& slice, const Grid& grid);

/// Computes m_lower and fills alpha_delta for every period:
/// alpha_delta_t = sum_{j<=m_lower} (sqrt(lambda_jt)/sigma_t) a_jt phi_jt.
/// Throws numeric_error if any sigma_eps is zero.
StepOneFit scale_alpha(std::vector<PeriodFit> fits, const Grid& grid);

/// fit_period for every t followed by scale_alpha.
StepOneFit fit_step1(const Panel& panel, const FitConfig& config = {});

}  // namespace fpanel
