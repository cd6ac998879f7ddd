#include "fpanel/panel.hpp"

#include <cmath>
#include <string>

#include "fpanel/errors.hpp"

namespace fpanel {

void validate_panel(const Panel& panel) {
    const Eigen::Index n = panel.n();
    const Eigen::Index T = panel.T();
    const Eigen::Index L = panel.L();
    if (n < 2) throw validation_error("panel needs n >= 2 units");
    if (T < 1) throw validation_error("panel needs T >= 1 periods");
    if (panel.x.size() != static_cast<std::size_t>(T))
        throw validation_error("curve slices do not match T");
    if (panel.z.size() != static_cast<std::size_t>(T))
        throw validation_error("covariate slices do not match T");
    const Eigen::Index P = panel.P();
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto& X = panel.x[static_cast<std::size_t>(t)];
        const auto& Z = panel.z[static_cast<std::size_t>(t)];
        if (X.rows() != n || X.cols() != L)
            throw validation_error("curve slice " + std::to_string(t + 1) + " has wrong shape");
        if (Z.rows() != n || Z.cols() != P)
            throw validation_error("covariate slice " + std::to_string(t + 1) + " has wrong shape");
        if (!X.allFinite() || !Z.allFinite())
            throw validation_error("non-finite value in period " + std::to_string(t + 1));
    }
    if (!panel.y.allFinite()) throw validation_error("non-finite response value");
}

CenteredSlice within_center(const Panel& panel, Eigen::Index t) {
    const auto& X = panel.x[static_cast<std::size_t>(t)];
    const auto& Z = panel.z[static_cast<std::size_t>(t)];
    CenteredSlice out;
    out.x = X.rowwise() - X.colwise().mean();
    out.y = panel.y.col(t).array() - panel.y.col(t).mean();
    out.z = Z.rowwise() - Z.colwise().mean();
    return out;
}

std::vector<CenteredSlice> within_center(const Panel& panel) {
    std::vector<CenteredSlice> out;
    out.reserve(static_cast<std::size_t>(panel.T()));
    for (Eigen::Index t = 0; t < panel.T(); ++t) out.push_back(within_center(panel, t));
    return out;
}

namespace {

int select_m(const EigenSystem& eig, Eigen::Index n, Eigen::Index L, const FitConfig& config,
             const std::string& where) {
    if (config.m_override) {
        const int m = *config.m_override;
        if (m < 1) throw validation_error(where + ": m override must be positive");
        if (m > eig.count())
            throw validation_error(where + ": m override " + std::to_string(m) +
                                   " exceeds available eigenpairs (" +
                                   std::to_string(eig.count()) + ")");
        return m;
    }
    const int cap = std::min<int>({config.ratio_search_cap, static_cast<int>(n) - 1,
                                   static_cast<int>(L) - 1});
    const double floor = config.eigen_floor_rel * (eig.values.size() ? eig.values[0] : 0.0);
    int m = eigenvalue_ratio_select(eig.values, cap, floor);
    if (config.m_min) m = std::max(m, *config.m_min);
    if (config.m_max) m = std::min(m, *config.m_max);
    m = std::min<int>(m, static_cast<int>(eig.count()));
    return std::max(m, 1);
}

}  // namespace

PeriodFit fit_period(const Panel& panel, Eigen::Index t, const FitConfig& config) {
    const Eigen::Index n = panel.n();
    const Eigen::Index L = panel.L();
    const Eigen::Index P = panel.P();
    const std::string where = "period " + std::to_string(t + 1);

    const CenteredSlice slice = within_center(panel, t);
    const Eigen::MatrixXd kernel = empirical_covariance(slice.x);
    EigenSystem eig = eigen_fpca(kernel, panel.grid, std::min<Eigen::Index>(n - 1, L));

    const int m = select_m(eig, n, L, config, where);
    if (m + P > n - 1)
        throw validation_error(where + ": design too wide (m + P = " + std::to_string(m + P) +
                               " needs n - 1 >= that)");

    // scores xi_ij = <X^c_i, phi_j> under the quadrature
    Eigen::MatrixXd design(n, m + P);
    design.leftCols(m) =
        slice.x * panel.grid.weights.asDiagonal() * eig.functions.leftCols(m);
    if (P > 0) design.rightCols(P) = slice.z;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    const Eigen::MatrixXd& R = qr.matrixR();
    const double r_max = std::abs(R(0, 0));
    const Eigen::Index cols = design.cols();
    const double r_min = std::abs(R(cols - 1, cols - 1));
    if (!(r_min > config.rank_tol * r_max)) {
        // pivoted-out columns sit at the tail of the permutation
        std::string offenders;
        const auto perm = qr.colsPermutation().indices();
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (std::abs(R(c, c)) > config.rank_tol * r_max) continue;
            const Eigen::Index orig = perm[c];
            if (!offenders.empty()) offenders += ", ";
            offenders += orig < m ? "score " + std::to_string(orig + 1)
                                  : "z" + std::to_string(orig - m + 1);
        }
        throw numeric_error(where + ": rank-deficient design (columns: " + offenders + ")");
    }

    const Eigen::VectorXd coef = qr.solve(slice.y);

    PeriodFit fit;
    fit.t = static_cast<int>(t);
    fit.m = m;
    fit.a_hat = coef.head(m);
    fit.beta_hat = coef.tail(P);
    fit.alpha_hat = eig.functions.leftCols(m) * fit.a_hat;
    fit.eig = std::move(eig);
    const Eigen::VectorXd resid = slice.y - design * coef;
    fit.sigma_eps = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
    return fit;
}

double residual_variance(const PeriodFit& fit, const CenteredSlice& slice, const Grid& grid) {
    const Eigen::Index n = slice.y.size();
    const Eigen::VectorXd fitted_fn = slice.x * grid.weights.asDiagonal() * fit.alpha_hat;
    Eigen::VectorXd resid = slice.y - fitted_fn;
    if (slice.z.cols() > 0) resid -= slice.z * fit.beta_hat;
    return resid.squaredNorm() / static_cast<double>(n);
}

StepOneFit scale_alpha(std::vector<PeriodFit> fits, const Grid& grid) {
    if (fits.empty()) throw validation_error("scale_alpha on empty fit list");
    int m_lower = fits.front().m;
    for (const auto& f : fits) m_lower = std::min(m_lower, f.m);
    for (auto& f : fits) {
        if (f.sigma_eps <= 0.0)
            throw numeric_error("degenerate fit at period " + std::to_string(f.t + 1) +
                                " (zero residual scale)");
        Eigen::VectorXd scaled = Eigen::VectorXd::Zero(grid.size());
        for (int j = 0; j < m_lower; ++j) {
            scaled += (std::sqrt(f.eig.values[j]) / f.sigma_eps) * f.a_hat[j] *
                      f.eig.functions.col(j);
        }
        f.alpha_delta = std::move(scaled);
    }
    StepOneFit out;
    out.fits = std::move(fits);
    out.m_lower = m_lower;
    return out;
}

StepOneFit fit_step1(const Panel& panel, const FitConfig& config) {
    validate_panel(panel);
    std::vector<PeriodFit> fits;
    fits.reserve(static_cast<std::size_t>(panel.T()));
    for (Eigen::Index t = 0; t < panel.T(); ++t) fits.push_back(fit_period(panel, t, config));
    return scale_alpha(std::move(fits), panel.grid);
}

}  // namespace fpanel
