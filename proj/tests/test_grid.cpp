#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fpanel/errors.hpp"
#include "fpanel/grid.hpp"
#include "fpanel/rng.hpp"

using namespace fpanel;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("make_grid trapezoid weights") {
    const Grid g3 = make_grid(vec({0.0, 0.5, 1.0}));
    CHECK(g3.weights[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(g3.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(g3.weights[2] == doctest::Approx(0.25).epsilon(1e-14));

    const Grid g2 = make_grid(vec({0.0, 1.0}));
    CHECK(g2.weights[0] == doctest::Approx(0.5));
    CHECK(g2.weights[1] == doctest::Approx(0.5));

    const Grid g = make_grid(vec({0.0, 0.25, 1.0}));
    CHECK(g.weights[0] == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(g.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(g.weights[2] == doctest::Approx(0.375).epsilon(1e-14));
}

TEST_CASE("make_grid rejects bad input") {
    CHECK_THROWS_AS(make_grid(vec({0.0})), validation_error);
    CHECK_THROWS_AS(make_grid(vec({0.0, 0.5, 0.5, 1.0})), validation_error);
    CHECK_THROWS_AS(make_grid(vec({0.0, 0.7, 0.4, 1.0})), validation_error);
    CHECK_THROWS_AS(make_grid(vec({0.1, 0.5, 1.0})), validation_error);
    CHECK_THROWS_AS(make_grid(vec({0.0, 0.5, 0.9})), validation_error);
}

TEST_CASE("grid weights always sum to one") {
    Rng rng(7, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const int L = 2 + static_cast<int>(rng.below(60));
        Eigen::VectorXd pts(L);
        pts[0] = 0.0;
        for (int l = 1; l < L - 1; ++l) pts[l] = rng.uniform();
        pts[L - 1] = 1.0;
        std::sort(pts.data() + 1, pts.data() + L - 1);
        bool distinct = true;
        for (int l = 1; l < L; ++l) distinct = distinct && pts[l] > pts[l - 1];
        if (!distinct) continue;
        const Grid g = make_grid(pts);
        CHECK(std::abs(g.weights.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("inner_product basics") {
    const Grid g = make_equidistant_grid(201);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(201);
    CHECK(inner_product(ones, ones, g) == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd f(201), h(201);
    for (int l = 0; l < 201; ++l) {
        const double u = g.points[l];
        f[l] = std::numbers::sqrt2 * std::sin(std::numbers::pi * u / 2.0);
        h[l] = std::numbers::sqrt2 * std::sin(3.0 * std::numbers::pi * u / 2.0);
    }
    CHECK(std::abs(inner_product(f, f, g) - 1.0) < 1e-3);
    CHECK(std::abs(inner_product(f, h, g)) < 1e-3);

    CHECK_THROWS_AS(inner_product(Eigen::VectorXd::Ones(5), ones, g), validation_error);
}

TEST_CASE("trapezoid quadrature exact for linear integrands") {
    const Grid g = make_equidistant_grid(11);
    // f*g of joint degree <= 1: constant times affine
    Eigen::VectorXd c = Eigen::VectorXd::Constant(11, 3.0);
    Eigen::VectorXd affine(11);
    for (int l = 0; l < 11; ++l) affine[l] = 2.0 - 5.0 * g.points[l];
    // integral of 3(2-5u) over [0,1] = 3(2 - 5/2) = -1.5
    CHECK(std::abs(inner_product(c, affine, g) - (-1.5)) < 1e-12);
}

TEST_CASE("interpolate is linear between grid points") {
    const Grid g = make_grid(vec({0.0, 0.4, 1.0}));
    const Eigen::VectorXd curve = vec({1.0, 3.0, -1.0});
    CHECK(interpolate(curve, g, 0.0) == doctest::Approx(1.0));
    CHECK(interpolate(curve, g, 0.2) == doctest::Approx(2.0));
    CHECK(interpolate(curve, g, 0.4) == doctest::Approx(3.0));
    CHECK(interpolate(curve, g, 0.7) == doctest::Approx(1.0));
    CHECK(interpolate(curve, g, 1.0) == doctest::Approx(-1.0));
}

TEST_CASE("empirical_covariance small cases") {
    SUBCASE("single centered curve of zeros") {
        const Eigen::MatrixXd K = empirical_covariance(Eigen::MatrixXd::Zero(1, 4));
        CHECK(K.norm() == 0.0);
    }
    SUBCASE("pair {+f, -f} gives f tensor f") {
        Eigen::MatrixXd curves(2, 3);
        curves.row(0) = vec({1.0, 2.0, -1.0}).transpose();
        curves.row(1) = -curves.row(0);
        const Eigen::MatrixXd K = empirical_covariance(curves);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                CHECK(K(a, b) == doctest::Approx(curves(0, a) * curves(0, b)));
    }
    SUBCASE("no curves is an error") {
        CHECK_THROWS_AS(empirical_covariance(Eigen::MatrixXd(0, 3)), validation_error);
    }
}

namespace {

// curves from the simulation design: X = sum_j theta_j sqrt(2) sin((j-1/2) pi u)
Eigen::MatrixXd draw_sine_curves(int N, const Grid& grid, Rng& rng, int basis = 20) {
    const Eigen::Index L = grid.size();
    Eigen::MatrixXd B(L, basis);
    for (int j = 0; j < basis; ++j)
        for (Eigen::Index l = 0; l < L; ++l)
            B(l, j) = std::numbers::sqrt2 * std::sin((j + 0.5) * std::numbers::pi * grid.points[l]);
    Eigen::MatrixXd theta(N, basis);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < basis; ++j)
            theta(i, j) = rng.normal() / ((j + 0.5) * std::numbers::pi);
    return theta * B.transpose();
}

}  // namespace

TEST_CASE("monte carlo covariance matches analytic score variances") {
    const Grid grid = make_equidistant_grid(101);
    Rng rng(2024, 1, 0);
    Eigen::MatrixXd curves = draw_sine_curves(5000, grid, rng);
    curves.rowwise() -= curves.colwise().mean();
    const Eigen::MatrixXd K = empirical_covariance(curves);

    Eigen::VectorXd phi1(101);
    for (int l = 0; l < 101; ++l)
        phi1[l] = std::numbers::sqrt2 * std::sin(std::numbers::pi * grid.points[l] / 2.0);
    const Eigen::VectorXd Kphi = K * grid.weights.asDiagonal() * phi1;
    const double quad_form = inner_product(phi1, Kphi, grid);
    const double lam1 = 4.0 / (std::numbers::pi * std::numbers::pi);  // 0.405285
    CHECK(std::abs(quad_form - lam1) < 0.05 * lam1);
}

TEST_CASE("eigen_fpca rank-one kernels") {
    const Grid g = make_equidistant_grid(21);
    SUBCASE("constant kernel") {
        const Eigen::MatrixXd K = Eigen::MatrixXd::Ones(21, 21);
        const EigenSystem eig = eigen_fpca(K, g, 21);
        CHECK(eig.values[0] == doctest::Approx(1.0).epsilon(1e-10));
        for (int l = 0; l < 21; ++l)
            CHECK(eig.functions(l, 0) == doctest::Approx(1.0).epsilon(1e-8));
        if (eig.count() > 1) CHECK(eig.values[1] < 1e-10);
    }
    SUBCASE("scaled projector") {
        Eigen::VectorXd f(21);
        for (int l = 0; l < 21; ++l) f[l] = 1.0 + g.points[l];
        f /= std::sqrt(squared_norm(f, g));
        const Eigen::MatrixXd K = 0.3 * f * f.transpose();
        const EigenSystem eig = eigen_fpca(K, g, 21);
        CHECK(eig.values[0] == doctest::Approx(0.3).epsilon(1e-10));
        const double align = std::abs(inner_product(eig.functions.col(0), f, g));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("eigen_fpca orthonormality, reconstruction and trace identity") {
    const Grid g = make_equidistant_grid(41);
    Rng rng(9, 2, 0);
    Eigen::MatrixXd curves = draw_sine_curves(300, g, rng, 12);
    curves.rowwise() -= curves.colwise().mean();
    const Eigen::MatrixXd K = empirical_covariance(curves);
    const EigenSystem eig = eigen_fpca(K, g, g.size());

    for (Eigen::Index a = 0; a < eig.count(); ++a)
        for (Eigen::Index b = 0; b <= a; ++b) {
            const double ip = inner_product(eig.functions.col(a), eig.functions.col(b), g);
            CHECK(std::abs(ip - (a == b ? 1.0 : 0.0)) < 1e-8);
        }

    for (Eigen::Index j = 1; j < eig.count(); ++j) CHECK(eig.values[j] <= eig.values[j - 1]);
    CHECK(eig.values[eig.count() - 1] >= 0.0);

    // weighted Frobenius reconstruction error
    Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(g.size(), g.size());
    for (Eigen::Index j = 0; j < eig.count(); ++j)
        recon += eig.values[j] * eig.functions.col(j) * eig.functions.col(j).transpose();
    double frob = 0.0;
    for (Eigen::Index a = 0; a < g.size(); ++a)
        for (Eigen::Index b = 0; b < g.size(); ++b) {
            const double d = recon(a, b) - K(a, b);
            frob += g.weights[a] * g.weights[b] * d * d;
        }
    CHECK(std::sqrt(frob) < 1e-8);

    // trace identity: sum lambda_j = integral of K(u,u)
    const double trace_quad = (g.weights.array() * K.diagonal().array()).sum();
    CHECK(std::abs(eig.values.sum() - trace_quad) < 1e-8);
}

TEST_CASE("eigen_fpca recovers simulation spectrum") {
    const Grid grid = make_equidistant_grid(101);
    Rng rng(31337, 4, 0);
    Eigen::MatrixXd curves = draw_sine_curves(5000, grid, rng);
    curves.rowwise() -= curves.colwise().mean();
    const EigenSystem eig = eigen_fpca(empirical_covariance(curves), grid, 25);
    const double lam1 = 4.0 / (std::numbers::pi * std::numbers::pi);
    const double lam2 = 4.0 / (9.0 * std::numbers::pi * std::numbers::pi);
    CHECK(std::abs(eig.values[0] - lam1) < 0.05 * lam1);
    CHECK(std::abs(eig.values[1] - lam2) < 0.10 * lam2);
}

TEST_CASE("eigenvalue_ratio_select") {
    CHECK(eigenvalue_ratio_select(Eigen::Vector4d(4.0, 2.0, 1.0, 0.001), 3, 0.0) == 3);
    CHECK(eigenvalue_ratio_select(Eigen::Vector4d(10.0, 1.0, 0.5, 0.25), 3, 0.0) == 1);

    Eigen::VectorXd lam(20);
    for (int j = 0; j < 20; ++j) lam[j] = std::pow((j + 0.5) * std::numbers::pi, -2.0);
    CHECK(eigenvalue_ratio_select(lam, 19, 1e-12 * lam[0]) == 1);

    // fewer than two usable eigenvalues
    CHECK(eigenvalue_ratio_select(Eigen::Vector2d(1.0, 1e-16), 1, 1e-12) == 1);
    CHECK(eigenvalue_ratio_select(Eigen::VectorXd::Constant(1, 2.0), 5, 0.0) == 1);
}
