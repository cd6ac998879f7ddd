#include "fpanel/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "fpanel/errors.hpp"
#include "fpanel/rng.hpp"

namespace fpanel {

void validate_config(const SimConfig& config) {
    if (config.scenario != 1 && config.scenario != 2)
        throw validation_error("scenario must be 1 or 2");
    if (config.n < 2) throw validation_error("n must be >= 2");
    if (config.T < 3) throw validation_error("T must be >= 3");
    if (config.reps < 1) throw validation_error("reps must be >= 1");
    if (config.L < 2) throw validation_error("L must be >= 2");
    if (!(config.p_tau > 0.0) || !(config.p_tau < 1.0))
        throw validation_error("p_tau must lie in (0,1)");
    if (config.grid_eval_count < 2) throw validation_error("grid_eval_count must be >= 2");
    if (config.m_override && *config.m_override < 1)
        throw validation_error("m override must be positive");
}

std::vector<std::vector<int>> truth_partition(int T) {
    if (T < 3) throw validation_error("T must be >= 3");
    std::vector<std::vector<int>> part(3);
    const int b1 = T / 3;
    const int b2 = 2 * T / 3;
    for (int t = 0; t < b1; ++t) part[0].push_back(t);
    for (int t = b1; t < b2; ++t) part[1].push_back(t);
    for (int t = b2; t < T; ++t) part[2].push_back(t);
    return part;
}

Eigen::VectorXd scenario_curve(int scenario, int which, const Grid& grid) {
    const Eigen::Index L = grid.size();
    Eigen::VectorXd out(L);
    for (Eigen::Index l = 0; l < L; ++l) {
        const double u = grid.points[l];
        double v = 0.0;
        switch (which) {
            case 0:
                v = scenario == 1
                        ? std::numbers::sqrt2 * std::sin(std::numbers::pi * u / 2.0) -
                              u * u * u / 2.0 +
                              std::sqrt(18.0) * std::sin(3.0 * std::numbers::pi * u / 2.0)
                        : 8.0 * u - 4.0 * u * u - 5.0 * u * u * u + 2.0 * std::sin(8.0 * u);
                break;
            case 1:
                v = -2.0 * u + 8.0 * u * u + 5.0 * u * u * u + 2.0 * std::sin(8.0 * u);
                break;
            case 2:
                v = -2.0 * u + std::cos(6.0 * u);
                break;
            default:
                throw validation_error("curve index must be 0, 1 or 2");
        }
        out[l] = v;
    }
    return out;
}

namespace {

constexpr int kBasisCount = 20;

enum DrawKind : std::uint64_t { kScores = 0, kCovariate = 1, kNoise = 2, kKMeans = 3, kGmm = 4 };

}  // namespace

std::pair<Panel, TruthBundle> dgp_scenario(const SimConfig& config, std::uint64_t rep) {
    validate_config(config);
    const int n = config.n;
    const int T = config.T;

    Grid grid = make_equidistant_grid(config.L);

    TruthBundle truth;
    truth.partition = truth_partition(T);
    for (int k = 0; k < 3; ++k) truth.curves.push_back(scenario_curve(config.scenario, k, grid));
    truth.beta.resize(T);
    truth.rho.resize(T);
    for (int t = 0; t < T; ++t) {
        truth.beta[t] = 5.0 * std::sin((t + 1) / std::numbers::pi);
        truth.rho[t] = 5.0 * std::cos((t + 1) / std::numbers::pi);
    }
    std::vector<int> regime_of(static_cast<std::size_t>(T));
    for (int k = 0; k < 3; ++k)
        for (int t : truth.partition[static_cast<std::size_t>(k)])
            regime_of[static_cast<std::size_t>(t)] = k;

    // basis curves phi_j and score scales sqrt(lambda_j)
    Eigen::MatrixXd basis(config.L, kBasisCount);
    Eigen::VectorXd scale(kBasisCount);
    for (int j = 0; j < kBasisCount; ++j) {
        const double freq = (j + 0.5) * std::numbers::pi;
        for (Eigen::Index l = 0; l < config.L; ++l)
            basis(l, j) = std::numbers::sqrt2 * std::sin(freq * grid.points[l]);
        scale[j] = 1.0 / freq;
    }

    Rng rng_scores(config.seed, rep, kScores);
    Rng rng_z(config.seed, rep, kCovariate);
    Rng rng_eps(config.seed, rep, kNoise);

    Panel panel;
    panel.grid = grid;
    panel.y.resize(n, T);
    panel.x.reserve(static_cast<std::size_t>(T));
    panel.z.reserve(static_cast<std::size_t>(T));
    Eigen::MatrixXd theta(n, kBasisCount);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < kBasisCount; ++j) theta(i, j) = rng_scores.normal() * scale[j];
        Eigen::MatrixXd xt = theta * basis.transpose();  // n x L

        Eigen::MatrixXd zt(n, 1);
        for (int i = 0; i < n; ++i) zt(i, 0) = rng_z.normal();

        const Eigen::VectorXd& alpha = truth.curves[static_cast<std::size_t>(
            regime_of[static_cast<std::size_t>(t)])];
        const Eigen::VectorXd functional = xt * (grid.weights.asDiagonal() * alpha);
        for (int i = 0; i < n; ++i) {
            panel.y(i, t) = truth.rho[t] + functional[i] + truth.beta[t] * zt(i, 0) +
                            rng_eps.normal();
        }
        panel.x.push_back(std::move(xt));
        panel.z.push_back(std::move(zt));
    }
    return {std::move(panel), std::move(truth)};
}

namespace {

/// O(N^3) assignment on a square cost matrix (minimization), potentials form.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
    const int N = static_cast<int>(cost.rows());
    std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0);
    std::vector<int> p(N + 1, 0), way(N + 1, 0);
    for (int i = 1; i <= N; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(N + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(N + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = 0;
            for (int j = 1; j <= N; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= N; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(N), -1);
    for (int j = 1; j <= N; ++j)
        if (p[j] > 0) row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    return row_to_col;
}

Eigen::MatrixXd overlap_matrix(const RegimePartition& est,
                               const std::vector<std::vector<int>>& truth, int T) {
    const int Ke = est.k_hat();
    const int K = static_cast<int>(truth.size());
    std::vector<int> true_of(static_cast<std::size_t>(T), -1);
    for (int k = 0; k < K; ++k)
        for (int t : truth[static_cast<std::size_t>(k)]) true_of[static_cast<std::size_t>(t)] = k;
    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(Ke, K);
    for (int e = 0; e < Ke; ++e)
        for (int t : est.regimes[static_cast<std::size_t>(e)]) {
            const int k = true_of[static_cast<std::size_t>(t)];
            if (k < 0) throw validation_error("true partition does not cover all periods");
            overlap(e, k) += 1.0;
        }
    return overlap;
}

}  // namespace

std::vector<int> max_assignment(const Eigen::MatrixXd& score) {
    const int R = static_cast<int>(score.rows());
    const int C = static_cast<int>(score.cols());
    const int N = std::max(R, C);
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) cost(i, j) = -score(i, j);
    const std::vector<int> assign = hungarian_min(cost);
    std::vector<int> out(static_cast<std::size_t>(R), -1);
    for (int i = 0; i < R; ++i) {
        const int j = assign[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = (j < C) ? j : -1;
    }
    return out;
}

double classification_error(const RegimePartition& est,
                            const std::vector<std::vector<int>>& truth, int T) {
    const Eigen::MatrixXd overlap = overlap_matrix(est, truth, T);
    const std::vector<int> est_to_true = max_assignment(overlap);
    double matched = 0.0;
    for (int e = 0; e < overlap.rows(); ++e) {
        const int k = est_to_true[static_cast<std::size_t>(e)];
        if (k >= 0) matched += overlap(e, k);
    }
    return 1.0 - matched / static_cast<double>(T);
}

std::vector<int> align_to_truth(const RegimePartition& est,
                                const std::vector<std::vector<int>>& truth, int T) {
    const Eigen::MatrixXd overlap = overlap_matrix(est, truth, T);
    const std::vector<int> est_to_true = max_assignment(overlap);
    const int K = static_cast<int>(truth.size());
    std::vector<int> true_to_est(static_cast<std::size_t>(K), -1);
    for (int e = 0; e < overlap.rows(); ++e) {
        const int k = est_to_true[static_cast<std::size_t>(e)];
        if (k >= 0) true_to_est[static_cast<std::size_t>(k)] = e;
    }
    for (int k = 0; k < K; ++k) {
        if (true_to_est[static_cast<std::size_t>(k)] >= 0) continue;
        Eigen::Index arg = 0;
        overlap.col(k).maxCoeff(&arg);
        true_to_est[static_cast<std::size_t>(k)] = static_cast<int>(arg);
    }
    return true_to_est;
}

double relative_l2_error(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                         const Grid& grid) {
    const double denom = squared_norm(truth, grid);
    if (!(denom > 0.0)) throw validation_error("relative error against a zero-norm curve");
    const Eigen::VectorXd diff = estimate - truth;
    return squared_norm(diff, grid) / denom;
}

namespace {

RepRecord run_one(const SimConfig& config, int rep) {
    RepRecord rec;
    rec.rep = rep;
    try {
        auto [panel, truth] = dgp_scenario(config, static_cast<std::uint64_t>(rep));

        FitConfig fc;
        fc.m_override = config.m_override;
        const StepOneFit step1 = fit_step1(panel, fc);

        const Eigen::MatrixXd delta = delta_matrix(step1, panel.grid);

        KMeansConfig km = config.kmeans;
        km.seed = Rng(config.seed, static_cast<std::uint64_t>(rep), kKMeans).next_u64();
        const int k_max = kmax_calinski_harabasz(step1, panel.grid, config.grid_eval_count,
                                                 config.k_range_max, km);
        const double tau = threshold_tau(config.n, step1.m_lower, config.p_tau);
        const RegimePartition part_thr = classify_threshold(delta, tau, k_max);

        rec.k_max = k_max;
        rec.class_error_threshold = classification_error(part_thr, truth.partition, config.T);

        RegimePartition part_used = part_thr;
        if (config.classifier == ClassifyMethod::gmm) {
            GmmConfig gc = config.gmm;
            gc.seed = Rng(config.seed, static_cast<std::uint64_t>(rep), kGmm).next_u64();
            RegimePartition part_gmm = classify_gmm(step1, k_max, gc);
            rec.class_error_gmm = classification_error(part_gmm, truth.partition, config.T);
            part_used = std::move(part_gmm);
        }
        rec.k_hat = part_used.k_hat();

        const RegimeFit refit = refit_regimes(panel, part_used, step1, config.m_override);
        const std::vector<int> aligned = align_to_truth(part_used, truth.partition, config.T);
        for (int k = 0; k < 3; ++k) {
            rec.rel_error[static_cast<std::size_t>(k)] = relative_l2_error(
                refit.regimes[static_cast<std::size_t>(aligned[static_cast<std::size_t>(k)])].A_tilde,
                truth.curves[static_cast<std::size_t>(k)], panel.grid);
        }

        double beta_mse = 0.0;
        for (int t = 0; t < config.T; ++t) {
            const auto& f = step1.fits[static_cast<std::size_t>(t)];
            const double diff = f.beta_hat[0] - truth.beta[t];
            beta_mse += diff * diff;
        }
        rec.beta_mse = beta_mse / static_cast<double>(config.T);
    } catch (const std::exception& ex) {
        rec.failed = true;
        rec.error = ex.what();
    }
    return rec;
}

MetricSummary summarize_values(std::vector<double> values) {
    MetricSummary s;
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double p) {
        const double idx = p * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
        const double w = idx - static_cast<double>(lo);
        return (1.0 - w) * values[lo] + w * values[hi];
    };
    s.q25 = quantile(0.25);
    s.median = quantile(0.5);
    s.q75 = quantile(0.75);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    s.mean = mean;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    s.sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    return s;
}

}  // namespace

std::map<std::string, MetricSummary> summarize(const std::vector<RepRecord>& records) {
    std::vector<double> beta, cls_thr, cls_gmm, e1, e2, e3, khat;
    for (const auto& r : records) {
        if (r.failed) continue;
        beta.push_back(r.beta_mse);
        cls_thr.push_back(r.class_error_threshold);
        if (r.class_error_gmm) cls_gmm.push_back(*r.class_error_gmm);
        e1.push_back(r.rel_error[0]);
        e2.push_back(r.rel_error[1]);
        e3.push_back(r.rel_error[2]);
        khat.push_back(static_cast<double>(r.k_hat));
    }
    std::map<std::string, MetricSummary> out;
    out["beta_mse"] = summarize_values(std::move(beta));
    out["class_error_threshold"] = summarize_values(std::move(cls_thr));
    if (!cls_gmm.empty()) out["class_error_gmm"] = summarize_values(std::move(cls_gmm));
    out["rel_error_a1"] = summarize_values(std::move(e1));
    out["rel_error_a2"] = summarize_values(std::move(e2));
    out["rel_error_a3"] = summarize_values(std::move(e3));
    out["k_hat"] = summarize_values(std::move(khat));
    return out;
}

SimReport run_monte_carlo(const SimConfig& config) {
    validate_config(config);

    SimReport report;
    report.config = config;
    report.records.resize(static_cast<std::size_t>(config.reps));

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers = std::min<int>(config.threads > 0 ? config.threads : static_cast<int>(hw),
                                      config.reps);
    if (workers <= 1) {
        for (int r = 0; r < config.reps; ++r)
            report.records[static_cast<std::size_t>(r)] = run_one(config, r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const int r = next.fetch_add(1);
                    if (r >= config.reps) return;
                    report.records[static_cast<std::size_t>(r)] = run_one(config, r);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (const auto& r : report.records)
        if (r.failed) ++report.failures;
    report.summary = summarize(report.records);
    return report;
}

}  // namespace fpanel
