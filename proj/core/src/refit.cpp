#include "fpanel/refit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fpanel/errors.hpp"

namespace fpanel {

namespace {

void check_partition(const RegimePartition& partition, Eigen::Index T) {
    std::vector<char> seen(static_cast<std::size_t>(T), 0);
    for (const auto& g : partition.regimes) {
        if (g.empty()) throw validation_error("empty regime in partition");
        for (int t : g) {
            if (t < 0 || t >= T) throw validation_error("period index out of range");
            if (seen[static_cast<std::size_t>(t)]) throw validation_error("period assigned twice");
            seen[static_cast<std::size_t>(t)] = 1;
        }
    }
    for (char s : seen)
        if (!s) throw validation_error("partition does not cover all periods");
}

}  // namespace

RegimeFit refit_regimes(const Panel& panel, const RegimePartition& partition,
                        const StepOneFit& step1, std::optional<int> m_override,
                        const FitConfig& config) {
    const Eigen::Index n = panel.n();
    const Eigen::Index T = panel.T();
    const Eigen::Index L = panel.L();
    if (step1.T() != T) throw validation_error("step-1 fit does not match panel");
    check_partition(partition, T);

    const std::vector<CenteredSlice> centered = within_center(panel);

    RegimeFit out;
    out.regimes.reserve(partition.regimes.size());
    for (std::size_t k = 0; k < partition.regimes.size(); ++k) {
        const auto& members = partition.regimes[k];
        const double count = static_cast<double>(n) * static_cast<double>(members.size());

        // regime mean curve over all (i, t in G)
        Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(L);
        for (int t : members) mu += panel.x[static_cast<std::size_t>(t)].colwise().sum();
        mu /= count;

        // pooled covariance of the regime-centered curves, accumulated per period
        Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(L, L);
        for (int t : members) {
            const Eigen::MatrixXd xcc =
                panel.x[static_cast<std::size_t>(t)].rowwise() - mu;
            kernel.noalias() += xcc.transpose() * xcc;
        }
        kernel /= count;

        EigenSystem eig = eigen_fpca(kernel, panel.grid,
                                     std::min<Eigen::Index>(static_cast<Eigen::Index>(count) - 1, L));

        int m;
        if (m_override) {
            m = *m_override;
            if (m < 1 || m > eig.count())
                throw validation_error("regime " + std::to_string(k + 1) +
                                       ": m override exceeds available eigenpairs");
        } else {
            const int cap = std::min<int>({config.ratio_search_cap,
                                           static_cast<int>(count) - 1,
                                           static_cast<int>(L) - 1});
            const double floor = config.eigen_floor_rel * eig.values[0];
            m = eigenvalue_ratio_select(eig.values, cap, floor);
            if (config.m_min) m = std::max(m, *config.m_min);
            if (config.m_max) m = std::min(m, *config.m_max);
            m = std::min<int>(m, static_cast<int>(eig.count()));
        }
        for (int j = 0; j < m; ++j) {
            if (!(eig.values[j] > 0.0))
                throw numeric_error("regime " + std::to_string(k + 1) +
                                    ": pooled eigenvalue " + std::to_string(j + 1) + " vanishes");
        }

        // a_j = lambda_j^{-1} (n|G|)^{-1} sum_{i,t} <phi_j, X^cc_it>(y^c_it - beta_t' z^c_it)
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
        for (int t : members) {
            const Eigen::MatrixXd xcc =
                panel.x[static_cast<std::size_t>(t)].rowwise() - mu;
            const auto& slice = centered[static_cast<std::size_t>(t)];
            Eigen::VectorXd partial = slice.y;
            if (panel.P() > 0)
                partial -= slice.z * step1.fits[static_cast<std::size_t>(t)].beta_hat;
            const Eigen::MatrixXd scores =
                xcc * panel.grid.weights.asDiagonal() * eig.functions.leftCols(m);
            acc.noalias() += scores.transpose() * partial;
        }

        RegimeCurveFit fit;
        fit.members = members;
        fit.m = m;
        fit.a_tilde = acc.array() / (count * eig.values.head(m).array());
        fit.A_tilde = eig.functions.leftCols(m) * fit.a_tilde;
        fit.eig = std::move(eig);
        out.regimes.push_back(std::move(fit));
    }
    return out;
}

}  // namespace fpanel
