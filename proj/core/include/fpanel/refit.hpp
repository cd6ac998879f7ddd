#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fpanel/classify.hpp"
#include "fpanel/panel.hpp"

namespace fpanel {

/// Pooled estimate for one regime.
struct RegimeCurveFit {
    std::vector<int> members;  // period indices
    int m = 0;                 // truncation level
    EigenSystem eig;           // eigenpairs of the pooled covariance
    Eigen::VectorXd a_tilde;   // m pooled coefficients
    Eigen::VectorXd A_tilde;   // slope curve on the grid
};

struct RegimeFit {
    std::vector<RegimeCurveFit> regimes;  // aligned with the input partition
};

/// Step-3 pooled estimation. Per regime: curves are centered at the regime
/// mean, the pooled covariance over all n*|G| curves is decomposed, the
/// truncation level comes from the eigenvalue-ratio rule (or override), and
/// coefficients use the Step-1 covariate slopes without re-estimating them.
RegimeFit refit_regimes(const Panel& panel, const RegimePartition& partition,
                        const StepOneFit& step1,
                        std::optional<int> m_override = std::nullopt,
                        const FitConfig& config = {});

}  // namespace fpanel
