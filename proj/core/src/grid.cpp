#include "fpanel/grid.hpp"

#include <algorithm>
#include <cmath>

#include "fpanel/errors.hpp"

namespace fpanel {

Grid make_grid(const Eigen::VectorXd& points) {
    const Eigen::Index L = points.size();
    if (L < 2) throw validation_error("grid needs at least 2 points");
    if (points[0] != 0.0 || points[L - 1] != 1.0)
        throw validation_error("grid must start at 0 and end at 1");
    for (Eigen::Index l = 1; l < L; ++l) {
        if (!(points[l] > points[l - 1]))
            throw validation_error("grid points must be strictly increasing");
    }
    Eigen::VectorXd w(L);
    w[0] = (points[1] - points[0]) / 2.0;
    for (Eigen::Index l = 1; l + 1 < L; ++l) w[l] = (points[l + 1] - points[l - 1]) / 2.0;
    w[L - 1] = (points[L - 1] - points[L - 2]) / 2.0;
    return Grid{points, std::move(w)};
}

Grid make_equidistant_grid(Eigen::Index L) {
    if (L < 2) throw validation_error("grid needs at least 2 points");
    Eigen::VectorXd pts = Eigen::VectorXd::LinSpaced(L, 0.0, 1.0);
    pts[0] = 0.0;
    pts[L - 1] = 1.0;
    return make_grid(pts);
}

double inner_product(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Grid& grid) {
    if (f.size() != grid.size() || g.size() != grid.size())
        throw validation_error("curve length does not match grid");
    return (grid.weights.array() * f.array() * g.array()).sum();
}

double squared_norm(const Eigen::VectorXd& f, const Grid& grid) {
    return inner_product(f, f, grid);
}

double interpolate(const Eigen::VectorXd& curve, const Grid& grid, double s) {
    if (curve.size() != grid.size())
        throw validation_error("curve length does not match grid");
    const auto& p = grid.points;
    if (s <= p[0]) return curve[0];
    const Eigen::Index L = p.size();
    if (s >= p[L - 1]) return curve[L - 1];
    const double* begin = p.data();
    const double* it = std::upper_bound(begin, begin + L, s);
    const Eigen::Index hi = it - begin;  // first point > s, in [1, L-1]
    const double t = (s - p[hi - 1]) / (p[hi] - p[hi - 1]);
    return (1.0 - t) * curve[hi - 1] + t * curve[hi];
}

Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& centered_curves) {
    const Eigen::Index N = centered_curves.rows();
    if (N == 0) throw validation_error("empirical covariance of zero curves");
    Eigen::MatrixXd K = centered_curves.transpose() * centered_curves;
    K /= static_cast<double>(N);
    return K;
}

EigenSystem eigen_fpca(const Eigen::MatrixXd& kernel, const Grid& grid,
                       Eigen::Index max_components) {
    const Eigen::Index L = grid.size();
    if (kernel.rows() != L || kernel.cols() != L)
        throw validation_error("kernel shape does not match grid");

    const Eigen::ArrayXd sqw = grid.weights.array().sqrt();
    Eigen::MatrixXd M = kernel;
    for (Eigen::Index a = 0; a < L; ++a)
        for (Eigen::Index b = 0; b < L; ++b) M(a, b) *= sqw[a] * sqw[b];
    // enforce exact symmetry against accumulation noise
    M = ((M + M.transpose()) / 2.0).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
    if (solver.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");

    // ascending from Eigen; take from the back
    const Eigen::VectorXd& vals = solver.eigenvalues();
    const Eigen::MatrixXd& vecs = solver.eigenvectors();

    const double lambda1 = std::max(vals[L - 1], 0.0);
    const double floor = 1e-12 * lambda1;
    Eigen::Index keep = 0;
    for (Eigen::Index j = 0; j < L && keep < max_components; ++j) {
        const double lam = vals[L - 1 - j];
        if (lam <= floor && keep > 0) break;
        ++keep;
    }
    if (keep == 0) keep = 1;

    EigenSystem out;
    out.values.resize(keep);
    out.functions.resize(L, keep);
    for (Eigen::Index j = 0; j < keep; ++j) {
        out.values[j] = std::max(vals[L - 1 - j], 0.0);
        Eigen::VectorXd phi = vecs.col(L - 1 - j).array() / sqw;
        Eigen::Index imax = 0;
        phi.array().abs().maxCoeff(&imax);
        if (phi[imax] < 0.0) phi = -phi;
        out.functions.col(j) = phi;
    }
    return out;
}

int eigenvalue_ratio_select(const Eigen::VectorXd& eigenvalues, int search_cap, double floor) {
    const Eigen::Index count = eigenvalues.size();
    int best_l = 1;
    double best_ratio = -1.0;
    const Eigen::Index cap = std::min<Eigen::Index>(search_cap, count - 1);
    for (Eigen::Index l = 1; l <= cap; ++l) {
        const double denom = eigenvalues[l];
        if (!(denom > floor) || denom <= 0.0) break;
        const double ratio = eigenvalues[l - 1] / denom;
        if (ratio > best_ratio * (1.0 + 1e-14)) {
            best_ratio = ratio;
            best_l = static_cast<int>(l);
        }
    }
    return best_l;
}

}  // namespace fpanel
