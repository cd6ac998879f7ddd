#pragma once

#include <Eigen/Dense>

namespace fpanel {

/// Shared discretization of [0,1]. All curves in a panel live on one Grid;
/// inner products are trapezoid quadrature sums.
struct Grid {
    Eigen::VectorXd points;   // strictly increasing, points[0]=0, points[L-1]=1
    Eigen::VectorXd weights;  // trapezoid weights, sum to 1

    Eigen::Index size() const { return points.size(); }
};

/// Eigenpairs of a discretized covariance operator. Eigenfunctions are
/// stored by column and are orthonormal under the Grid quadrature.
struct EigenSystem {
    Eigen::VectorXd values;     // nonincreasing, >= 0
    Eigen::MatrixXd functions;  // L x J, column j pairs with values[j]

    Eigen::Index count() const { return values.size(); }
};

/// Builds a Grid over [0,1] with trapezoid weights:
/// w_1 = (s_2-s_1)/2, w_l = (s_{l+1}-s_{l-1})/2, w_L = (s_L-s_{L-1})/2.
Grid make_grid(const Eigen::VectorXd& points);

/// Equidistant L-point grid on [0,1].
Grid make_equidistant_grid(Eigen::Index L);

/// Quadrature inner product sum_l w_l f(s_l) g(s_l).
double inner_product(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Grid& grid);

/// Quadrature squared L2 norm.
double squared_norm(const Eigen::VectorXd& f, const Grid& grid);

/// Linear interpolation of a curve given on `grid` at abscissa s in [0,1].
double interpolate(const Eigen::VectorXd& curve, const Grid& grid, double s);

/// K(u_a,u_b) = N^{-1} sum_i X_i(u_a) X_i(u_b) for already-centered curves
/// stored as rows of an N x L matrix.
Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& centered_curves);

/// Solves the discretized eigenequation for a symmetric kernel on the grid:
/// M = W^{1/2} K W^{1/2} is decomposed, eigenvectors are mapped back through
/// W^{-1/2} so the returned eigenfunctions are quadrature-orthonormal.
/// Keeps at most `max_components` pairs with eigenvalue above 1e-12 * lambda_1.
/// Each eigenfunction is normalized so its largest-magnitude value is positive.
EigenSystem eigen_fpca(const Eigen::MatrixXd& kernel, const Grid& grid,
                       Eigen::Index max_components);

/// Eigenvalue-ratio choice of the truncation level: the index l maximizing
/// lambda_l / lambda_{l+1} over 1 <= l < min(search_cap+1, count), skipping
/// denominators below `floor`. Ties go to the smallest l. Returns 1 when
/// fewer than two usable eigenvalues exist.
int eigenvalue_ratio_select(const Eigen::VectorXd& eigenvalues, int search_cap, double floor);

}  // namespace fpanel
