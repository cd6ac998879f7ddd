#include "fpanel/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fpanel/errors.hpp"
#include "fpanel/rng.hpp"

namespace fpanel {

Eigen::MatrixXd delta_matrix(const StepOneFit& step1, const Grid& grid) {
    const Eigen::Index T = step1.T();
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(T, T);
    for (const auto& f : step1.fits) {
        if (f.alpha_delta.size() != grid.size())
            throw validation_error("scaled slope missing at period " + std::to_string(f.t + 1));
    }
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index s = t + 1; s < T; ++s) {
            const Eigen::VectorXd diff =
                step1.fits[static_cast<std::size_t>(t)].alpha_delta -
                step1.fits[static_cast<std::size_t>(s)].alpha_delta;
            const double d = squared_norm(diff, grid);
            delta(t, s) = d;
            delta(s, t) = d;
        }
    }
    return delta;
}

namespace {

constexpr double kGammaEps = 1e-15;

double gamma_p_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cfrac(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double fac = d * c;
        h *= fac;
        if (std::abs(fac - 1.0) < kGammaEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw validation_error("gamma_p requires a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cfrac(a, x);
}

double chi2_cdf(int df, double x) {
    if (df < 1) throw validation_error("chi2_cdf requires df >= 1");
    if (x <= 0.0) return 0.0;
    return gamma_p(df / 2.0, x / 2.0);
}

double chi2_quantile(int df, double p) {
    if (df < 1) throw validation_error("chi2_quantile requires df >= 1");
    if (!(p > 0.0) || !(p < 1.0)) throw validation_error("chi2_quantile requires 0 < p < 1");

    const double a = df / 2.0;
    double lo = 0.0;
    double hi = std::max(2.0 * df, 2.0);
    for (int i = 0; i < 400 && chi2_cdf(df, hi) < p; ++i) hi *= 2.0;

    const double log_norm = -a * std::numbers::ln2 - std::lgamma(a);
    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double err = chi2_cdf(df, x) - p;
        if (err > 0.0)
            hi = x;
        else
            lo = x;
        if (std::abs(err) < 1e-14) break;
        // Newton step on the CDF, falling back to bisection outside the bracket
        const double log_pdf = (a - 1.0) * std::log(x) - x / 2.0 + log_norm;
        double next = x;
        if (std::isfinite(log_pdf)) {
            const double pdf = std::exp(log_pdf);
            if (pdf > 0.0) next = x - err / pdf;
        }
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        if (next == x) break;
        x = next;
    }
    return x;
}

double threshold_tau(int n, int m_lower, double p_tau) {
    if (n < 2) throw validation_error("threshold_tau requires n >= 2");
    return (2.0 / static_cast<double>(n)) * chi2_quantile(m_lower, p_tau);
}

RegimePartition classify_threshold(const Eigen::MatrixXd& delta, double tau, int k_max) {
    const Eigen::Index T = delta.rows();
    if (delta.cols() != T || T < 1) throw validation_error("distance matrix must be square");
    if (!(tau > 0.0)) throw validation_error("tau must be positive");
    if (k_max < 1) throw validation_error("k_max must be >= 1");

    std::vector<int> remaining(static_cast<std::size_t>(T));
    std::iota(remaining.begin(), remaining.end(), 0);

    RegimePartition out;
    out.method = ClassifyMethod::threshold;
    out.tau = tau;
    out.k_max = k_max;

    while (!remaining.empty()) {
        if (static_cast<int>(out.regimes.size()) == k_max - 1) {
            out.regimes.push_back(remaining);
            break;
        }
        // densest pivot: most tau-neighbours among the unassigned periods
        int pivot = remaining.front();
        int best_count = -1;
        for (int q : remaining) {
            int count = 0;
            for (int s : remaining)
                if (delta(q, s) <= tau) ++count;
            if (count > best_count) {
                best_count = count;
                pivot = q;
            }
        }
        std::vector<int> regime;
        std::vector<int> rest;
        for (int s : remaining) {
            if (delta(pivot, s) <= tau)
                regime.push_back(s);
            else
                rest.push_back(s);
        }
        out.regimes.push_back(std::move(regime));
        remaining = std::move(rest);
    }
    return out;
}

namespace {

// squared Euclidean distances from every row of `data` to `center`
Eigen::VectorXd dist2_to(const Eigen::MatrixXd& data, const Eigen::RowVectorXd& center) {
    return (data.rowwise() - center).rowwise().squaredNorm();
}

struct KMeansRun {
    std::vector<int> assign;
    Eigen::MatrixXd centers;
    double wss = std::numeric_limits<double>::infinity();
};

KMeansRun kmeans_once(const Eigen::MatrixXd& data, int k, int max_iters, Rng& rng) {
    const Eigen::Index T = data.rows();
    const Eigen::Index d = data.cols();

    // k-means++ seeding
    Eigen::MatrixXd centers(k, d);
    centers.row(0) = data.row(static_cast<Eigen::Index>(rng.below(T)));
    Eigen::VectorXd best_d2 = dist2_to(data, centers.row(0));
    for (int c = 1; c < k; ++c) {
        const double total = best_d2.sum();
        Eigen::Index pick;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            pick = T - 1;
            for (Eigen::Index t = 0; t < T; ++t) {
                u -= best_d2[t];
                if (u <= 0.0) {
                    pick = t;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(T));
        }
        centers.row(c) = data.row(pick);
        best_d2 = best_d2.cwiseMin(dist2_to(data, centers.row(c)));
    }

    std::vector<int> assign(static_cast<std::size_t>(T), -1);
    Eigen::VectorXd min_d2(T);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (Eigen::Index t = 0; t < T; ++t) {
            int best = 0;
            double bd = (data.row(t) - centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double dd = (data.row(t) - centers.row(c)).squaredNorm();
                if (dd < bd) {
                    bd = dd;
                    best = c;
                }
            }
            min_d2[t] = bd;
            if (assign[static_cast<std::size_t>(t)] != best) {
                assign[static_cast<std::size_t>(t)] = best;
                changed = true;
            }
        }
        // empty clusters grab the farthest point
        for (int c = 0; c < k; ++c) {
            if (std::find(assign.begin(), assign.end(), c) != assign.end()) continue;
            Eigen::Index far = 0;
            min_d2.maxCoeff(&far);
            assign[static_cast<std::size_t>(far)] = c;
            min_d2[far] = 0.0;
            changed = true;
        }
        if (!changed && iter > 0) break;
        centers.setZero();
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
        for (Eigen::Index t = 0; t < T; ++t) {
            centers.row(assign[static_cast<std::size_t>(t)]) += data.row(t);
            counts[assign[static_cast<std::size_t>(t)]] += 1;
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0) centers.row(c) /= static_cast<double>(counts[c]);
    }

    KMeansRun run;
    run.wss = 0.0;
    for (Eigen::Index t = 0; t < T; ++t)
        run.wss += (data.row(t) - centers.row(assign[static_cast<std::size_t>(t)])).squaredNorm();
    run.assign = std::move(assign);
    run.centers = std::move(centers);
    return run;
}

KMeansRun kmeans_best(const Eigen::MatrixXd& data, int k, const KMeansConfig& config,
                      std::uint64_t stream) {
    KMeansRun best;
    for (int r = 0; r < config.restarts; ++r) {
        Rng rng(config.seed, stream, static_cast<std::uint64_t>(r));
        KMeansRun run = kmeans_once(data, k, config.max_iters, rng);
        if (run.wss < best.wss) best = std::move(run);
    }
    return best;
}

}  // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& data, int k, const KMeansConfig& config) {
    if (k < 1 || k > data.rows()) throw validation_error("kmeans requires 1 <= k <= #points");
    return kmeans_best(data, k, config, 0).assign;
}

int kmax_calinski_harabasz(const StepOneFit& step1, const Grid& grid, int grid_eval_count,
                           int k_range_max, const KMeansConfig& kmeans_config) {
    const Eigen::Index T = step1.T();
    if (T < 2) throw validation_error("kmax selection requires T >= 2");
    if (grid_eval_count < 2) throw validation_error("grid_eval_count must be >= 2");

    Eigen::MatrixXd V(T, grid_eval_count);
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto& curve = step1.fits[static_cast<std::size_t>(t)].alpha_delta;
        if (curve.size() != grid.size())
            throw validation_error("scaled slope missing at period " + std::to_string(t + 1));
        for (int l = 0; l < grid_eval_count; ++l) {
            const double s = static_cast<double>(l) / (grid_eval_count - 1);
            V(t, l) = interpolate(curve, grid, s);
        }
    }

    const Eigen::RowVectorXd vbar = V.colwise().mean();
    const double total_scatter = (V.rowwise() - vbar).rowwise().squaredNorm().sum();
    if (total_scatter <= 1e-28) return 1;  // all profiles coincide

    const int hi = std::min<int>(k_range_max > 0 ? k_range_max : static_cast<int>(T) - 1,
                                 static_cast<int>(T) - 1);
    int best_k = 1;
    double best_ch = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= hi; ++k) {
        const KMeansRun run = kmeans_best(V, k, kmeans_config, static_cast<std::uint64_t>(k));
        double within = run.wss;
        double between = 0.0;
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
        for (int a : run.assign) counts[a] += 1;
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            between +=
                counts[c] * (run.centers.row(c) - vbar).squaredNorm();
        }
        double ch;
        if (within <= 0.0) {
            ch = std::numeric_limits<double>::infinity();
        } else {
            ch = (between / (k - 1)) / (within / (T - k));
        }
        if (ch > best_ch) {
            best_ch = ch;
            best_k = k;
        }
        if (std::isinf(ch)) break;  // no larger k can strictly beat +inf
    }
    return best_k == 1 ? 1 : best_k;
}

namespace {

struct GmmModel {
    Eigen::MatrixXd means;  // K x d
    Eigen::MatrixXd vars;   // K x d
    Eigen::VectorXd weights;
    double loglik = -std::numeric_limits<double>::infinity();
};

double log_normal_diag(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& mean,
                       const Eigen::RowVectorXd& var) {
    double out = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double d = x[j] - mean[j];
        out += -0.5 * (std::log(2.0 * std::numbers::pi * var[j]) + d * d / var[j]);
    }
    return out;
}

GmmModel fit_gmm_once(const Eigen::MatrixXd& data, int K, const GmmConfig& config,
                      const std::vector<int>& init_assign) {
    const Eigen::Index T = data.rows();
    const Eigen::Index d = data.cols();

    GmmModel model;
    model.means = Eigen::MatrixXd::Zero(K, d);
    model.vars = Eigen::MatrixXd::Zero(K, d);
    model.weights = Eigen::VectorXd::Zero(K);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(K);
    for (Eigen::Index t = 0; t < T; ++t) {
        const int c = init_assign[static_cast<std::size_t>(t)];
        model.means.row(c) += data.row(t);
        counts[c] += 1;
    }
    for (int c = 0; c < K; ++c) {
        if (counts[c] > 0) model.means.row(c) /= counts[c];
        model.weights[c] = std::max(counts[c], 1) / static_cast<double>(T);
    }
    model.weights /= model.weights.sum();
    for (Eigen::Index t = 0; t < T; ++t) {
        const int c = init_assign[static_cast<std::size_t>(t)];
        model.vars.row(c) += (data.row(t) - model.means.row(c)).array().square().matrix();
    }
    for (int c = 0; c < K; ++c) {
        if (counts[c] > 0) model.vars.row(c) /= counts[c];
        model.vars.row(c) = model.vars.row(c).cwiseMax(config.var_floor);
    }

    Eigen::MatrixXd resp(T, K);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config.max_iters; ++iter) {
        // E step
        double ll = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < K; ++c) {
                resp(t, c) = std::log(model.weights[c]) +
                             log_normal_diag(data.row(t), model.means.row(c), model.vars.row(c));
                mx = std::max(mx, resp(t, c));
            }
            double sum = 0.0;
            for (int c = 0; c < K; ++c) sum += std::exp(resp(t, c) - mx);
            const double lse = mx + std::log(sum);
            ll += lse;
            for (int c = 0; c < K; ++c) resp(t, c) = std::exp(resp(t, c) - lse);
        }
        if (iter > 0 && ll + config.tol * (1.0 + std::abs(ll)) < prev_ll)
            throw numeric_error("EM log-likelihood decreased");
        model.loglik = ll;
        if (iter > 0 && std::abs(ll - prev_ll) < config.tol * (1.0 + std::abs(ll))) break;
        prev_ll = ll;
        // M step
        for (int c = 0; c < K; ++c) {
            const double nc = resp.col(c).sum();
            if (nc <= 0.0) continue;
            model.weights[c] = nc / static_cast<double>(T);
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
            for (Eigen::Index t = 0; t < T; ++t) mean += resp(t, c) * data.row(t);
            mean /= nc;
            Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
            for (Eigen::Index t = 0; t < T; ++t)
                var += resp(t, c) * (data.row(t) - mean).array().square().matrix();
            var /= nc;
            model.means.row(c) = mean;
            model.vars.row(c) = var.cwiseMax(config.var_floor);
        }
        model.weights /= model.weights.sum();
    }
    return model;
}

}  // namespace

RegimePartition classify_gmm(const StepOneFit& step1, int k_max, const GmmConfig& config) {
    const Eigen::Index T = step1.T();
    if (k_max < 1) throw validation_error("k_max must be >= 1");
    const int d = step1.m_lower;
    Eigen::MatrixXd features(T, d);
    for (Eigen::Index t = 0; t < T; ++t)
        features.row(t) = step1.fits[static_cast<std::size_t>(t)].a_hat.head(d).transpose();

    RegimePartition out;
    out.method = ClassifyMethod::gmm;
    out.tau = 0.0;
    out.k_max = k_max;

    const double spread = (features.rowwise() - features.colwise().mean())
                              .rowwise()
                              .squaredNorm()
                              .sum();
    if (spread <= 1e-28) {
        std::vector<int> all(static_cast<std::size_t>(T));
        std::iota(all.begin(), all.end(), 0);
        out.regimes.push_back(std::move(all));
        return out;
    }

    GmmModel best_model;
    double best_bic = std::numeric_limits<double>::infinity();
    int best_K = 1;
    const int hiK = std::min<int>(k_max, static_cast<int>(T));
    for (int K = 1; K <= hiK; ++K) {
        GmmModel best_run;
        for (int r = 0; r < config.restarts; ++r) {
            KMeansConfig km;
            km.restarts = 1;
            km.seed = config.seed + 7919ULL * static_cast<std::uint64_t>(r);
            std::vector<int> init =
                K == 1 ? std::vector<int>(static_cast<std::size_t>(T), 0)
                       : kmeans(features, K, km);
            GmmModel run = fit_gmm_once(features, K, config, init);
            if (run.loglik > best_run.loglik) best_run = std::move(run);
            if (K == 1) break;  // deterministic, restarts identical
        }
        const int params = 2 * K * d + (K - 1);
        const double bic = -2.0 * best_run.loglik + params * std::log(static_cast<double>(T));
        if (bic < best_bic) {
            best_bic = bic;
            best_K = K;
            best_model = std::move(best_run);
        }
    }

    // assign by maximum posterior
    std::vector<std::vector<int>> classes(static_cast<std::size_t>(best_K));
    for (Eigen::Index t = 0; t < T; ++t) {
        int arg = 0;
        double bestp = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < best_K; ++c) {
            const double lp = std::log(best_model.weights[c]) +
                              log_normal_diag(features.row(t), best_model.means.row(c),
                                              best_model.vars.row(c));
            if (lp > bestp) {
                bestp = lp;
                arg = c;
            }
        }
        classes[static_cast<std::size_t>(arg)].push_back(static_cast<int>(t));
    }
    for (auto& cls : classes)
        if (!cls.empty()) out.regimes.push_back(std::move(cls));
    std::sort(out.regimes.begin(), out.regimes.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

}  // namespace fpanel
