#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomherd/curvature.hpp"
#include "geomherd/graph.hpp"
#include "geomherd/rng.hpp"
#include "geomherd/trajectory.hpp"

namespace geomherd {

// Classical herding diagnostics computed from the same trajectories the
// geometric pipeline consumes, so the two detector families can be compared
// head-to-head on identical data.

// ---------------------------------------------------------------------------
// Cross-sectional absolute deviation.
// ---------------------------------------------------------------------------

// rows[t] is the cross-section at step t (asset returns by default; agent
// actions when dispersion over agents is wanted). CSAD_t is the mean absolute
// deviation from the cross-sectional mean.
inline std::vector<double> csad_series(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        if (r.empty()) throw std::invalid_argument("csad: empty cross-section");
        double mean = 0.0;
        for (double v : r) mean += v;
        mean /= static_cast<double>(r.size());
        double dev = 0.0;
        for (double v : r) dev += std::abs(v - mean);
        out.push_back(dev / static_cast<double>(r.size()));
    }
    return out;
}

inline const std::vector<std::vector<double>>& asset_return_rows(const ActionTrajectory& traj) {
    if (traj.asset_returns.empty() || traj.asset_returns.front().empty())
        throw std::invalid_argument("csad: trajectory has no asset returns");
    return traj.asset_returns;
}

// ---------------------------------------------------------------------------
// Dispersion-on-market-return regression with HAC (Newey-West) errors.
// ---------------------------------------------------------------------------

struct OlsHacResult {
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd tstat;
    int n = 0;
    int lag = 0;
    double r2 = std::numeric_limits<double>::quiet_NaN();
    bool cov_psd = true;
};

inline int newey_west_lag(int n) {
    return static_cast<int>(std::floor(4.0 * std::pow(n / 100.0, 2.0 / 9.0)));
}

inline OlsHacResult ols_newey_west(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const std::vector<std::string>& names, int lag = -1) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n != y.size()) throw std::invalid_argument("ols: X and y row counts differ");
    if (static_cast<int>(names.size()) != p)
        throw std::invalid_argument("ols: one name per column required");
    if (n <= p) throw std::invalid_argument("ols: more columns than observations");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        // the permutation puts dependent columns last
        std::string bad;
        const auto& perm = qr.colsPermutation().indices();
        for (int j = static_cast<int>(qr.rank()); j < p; ++j) {
            if (!bad.empty()) bad += ", ";
            bad += names[static_cast<std::size_t>(perm[j])];
        }
        throw std::runtime_error("ols: design matrix is rank deficient (columns: " + bad + ")");
    }

    OlsHacResult res;
    res.names = names;
    res.n = n;
    res.beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * res.beta;
    const double y_mean = y.mean();
    const double tss = (y.array() - y_mean).square().sum();
    res.r2 = tss > 0.0 ? 1.0 - resid.squaredNorm() / tss
                       : std::numeric_limits<double>::quiet_NaN();

    res.lag = lag >= 0 ? lag : newey_west_lag(n);
    // S = sum_t e_t^2 x_t x_t' + sum_l w_l sum_{t>l} e_t e_{t-l} (x_t x_{t-l}' + sym)
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
    for (int t = 0; t < n; ++t)
        S += resid[t] * resid[t] * X.row(t).transpose() * X.row(t);
    for (int l = 1; l <= res.lag; ++l) {
        const double w = 1.0 - static_cast<double>(l) / (res.lag + 1.0);
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p, p);
        for (int t = l; t < n; ++t)
            G += resid[t] * resid[t - l] * X.row(t).transpose() * X.row(t - l);
        S += w * (G + G.transpose());
    }
    const Eigen::MatrixXd xtx_inv =
        (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd cov = xtx_inv * S * xtx_inv;
    cov = 0.5 * (cov + cov.transpose());
    res.se.resize(p);
    res.tstat.resize(p);
    for (int j = 0; j < p; ++j) {
        const double v = cov(j, j);
        if (v < 0.0) res.cov_psd = false;
        res.se[j] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
        res.tstat[j] = res.beta[j] / res.se[j];
    }
    return res;
}

// CSAD_t regressed on [1, |R_m|, R_m^2] plus an optional extra regressor
// (the curvature channel, when testing whether geometry adds information).
// A negative, significant quadratic coefficient is the classical herding
// signature.
inline OlsHacResult cck_regress(const std::vector<double>& csad,
                                const std::vector<double>& market_return,
                                const std::vector<double>* extra = nullptr,
                                const std::string& extra_name = "extra") {
    const int T = static_cast<int>(csad.size());
    if (static_cast<int>(market_return.size()) != T)
        throw std::invalid_argument("cck: csad and market series lengths differ");
    if (extra && static_cast<int>(extra->size()) != T)
        throw std::invalid_argument("cck: extra regressor length differs");
    const int p = extra ? 4 : 3;
    Eigen::MatrixXd X(T, p);
    Eigen::VectorXd y(T);
    for (int t = 0; t < T; ++t) {
        const double rm = market_return[static_cast<std::size_t>(t)];
        X(t, 0) = 1.0;
        X(t, 1) = std::abs(rm);
        X(t, 2) = rm * rm;
        if (extra) X(t, 3) = (*extra)[static_cast<std::size_t>(t)];
        y[t] = csad[static_cast<std::size_t>(t)];
    }
    std::vector<std::string> names = {"const", "abs_rm", "rm_sq"};
    if (extra) names.push_back(extra_name);
    return ols_newey_west(X, y, names);
}

// ---------------------------------------------------------------------------
// Buy/sell imbalance herding statistic.
// ---------------------------------------------------------------------------

// Exact adjustment factor E|X/n - p| for X ~ Binomial(n, p), summed termwise
// from Pascal-triangle coefficients and power ladders (exact in floating
// point whenever the individual terms are, e.g. dyadic p on small n).
inline double lsv_adjustment(int n, double p) {
    if (n <= 0) throw std::invalid_argument("lsv_adjustment: n must be positive");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("lsv_adjustment: p outside [0,1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    std::vector<double> coef(static_cast<std::size_t>(n) + 1, 0.0);
    coef[0] = 1.0;
    for (int r = 1; r <= n; ++r)
        for (int x = r; x >= 1; --x) coef[static_cast<std::size_t>(x)] += coef[static_cast<std::size_t>(x - 1)];
    std::vector<double> pp(static_cast<std::size_t>(n) + 1), qq(static_cast<std::size_t>(n) + 1);
    pp[0] = qq[0] = 1.0;
    for (int x = 1; x <= n; ++x) {
        pp[static_cast<std::size_t>(x)] = pp[static_cast<std::size_t>(x - 1)] * p;
        qq[static_cast<std::size_t>(x)] = qq[static_cast<std::size_t>(x - 1)] * (1.0 - p);
    }
    double acc = 0.0;
    for (int x = 0; x <= n; ++x)
        acc += coef[static_cast<std::size_t>(x)] * pp[static_cast<std::size_t>(x)] *
               qq[static_cast<std::size_t>(n - x)] * std::abs(static_cast<double>(x) / n - p);
    return acc;
}

struct LsvPoint {
    int t = 0;        // right edge of the window (simulator step, 1-indexed)
    double h = std::numeric_limits<double>::quiet_NaN();
};

// Per-window herding statistic: each step inside the window contributes
// |b_t/n_t - pbar| - AF(n_t, pbar) where b_t / n_t are buys and active trades
// at that step and pbar is the pooled buy fraction over the whole series.
// Steps with no active trades are skipped; a window with none is missing.
inline std::vector<LsvPoint> lsv_series(const ActionTrajectory& traj, int window,
                                        int stride) {
    if (window < 1 || stride < 1) throw std::invalid_argument("lsv: window and stride must be >= 1");
    const int T = traj.horizon;
    std::vector<int> buys(static_cast<std::size_t>(T)), active(static_cast<std::size_t>(T));
    long long tot_buys = 0, tot_active = 0;
    for (int t = 0; t < T; ++t) {
        int b = 0, a = 0;
        for (int i = 0; i < traj.n_agents; ++i) {
            const int act = traj.action(t, i);
            if (act > 0) ++b;
            if (act != 0) ++a;
        }
        buys[static_cast<std::size_t>(t)] = b;
        active[static_cast<std::size_t>(t)] = a;
        tot_buys += b;
        tot_active += a;
    }
    const double pbar = tot_active > 0 ? static_cast<double>(tot_buys) / tot_active : 0.5;

    // AF depends only on (n, pbar); memoise per active-count
    std::vector<double> af(static_cast<std::size_t>(traj.n_agents) + 1,
                           std::numeric_limits<double>::quiet_NaN());
    std::vector<LsvPoint> out;
    for (int end = window; end <= T; end += stride) {
        double acc = 0.0;
        int cnt = 0;
        for (int t = end - window; t < end; ++t) {
            const int n = active[static_cast<std::size_t>(t)];
            if (n == 0) continue;
            if (!std::isfinite(af[static_cast<std::size_t>(n)]))
                af[static_cast<std::size_t>(n)] = lsv_adjustment(n, pbar);
            const double frac = static_cast<double>(buys[static_cast<std::size_t>(t)]) / n;
            acc += std::abs(frac - pbar) - af[static_cast<std::size_t>(n)];
            ++cnt;
        }
        LsvPoint pt;
        pt.t = end;
        if (cnt > 0) pt.h = acc / cnt;
        out.push_back(pt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rolling price-correlation structure.
// ---------------------------------------------------------------------------

inline double corr_edge_length(double rho) {
    const double v = std::max(0.0, 2.0 * (1.0 - rho));
    return std::sqrt(v);
}

struct PcgPoint {
    int t = 0;
    double mean_all = std::numeric_limits<double>::quiet_NaN();  // price-graph curvature
    double mean_pos = std::numeric_limits<double>::quiet_NaN();
    double frac_neg = std::numeric_limits<double>::quiet_NaN();
    int n_edges = 0;
    double mean_corr = std::numeric_limits<double>::quiet_NaN();
    double mean_abs_corr = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;
};

// Price-correlation graph: nodes are assets, each pair embedded at length
// sqrt(2(1-rho)) from the rolling Pearson correlation of returns, and
// curvature computed with the same lazy-kernel machinery as the agent graph.
// A zero-variance asset makes its pairwise rho undefined (edge dropped);
// rho == 1 collapses the edge to zero length (also dropped); a window whose
// edges all drop is flagged degenerate.
inline std::vector<PcgPoint> price_corr_curvature(const ActionTrajectory& traj, int window,
                                                  int stride,
                                                  const CurvatureParams& params = {}) {
    const int T = static_cast<int>(traj.asset_returns.size());
    const int n_assets = T > 0 ? static_cast<int>(traj.asset_returns.front().size()) : 0;
    if (n_assets < 3) throw std::invalid_argument("price-corr: need at least 3 assets");
    if (window < 3 || stride < 1)
        throw std::invalid_argument("price-corr: window must be >= 3 and stride >= 1");
    auto ret = [&](int t, int a) {
        return traj.asset_returns[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
    };

    std::vector<PcgPoint> out;
    std::vector<double> mean(static_cast<std::size_t>(n_assets));
    std::vector<double> var(static_cast<std::size_t>(n_assets));
    for (int end = window; end <= T; end += stride) {
        PcgPoint pt;
        pt.t = end;
        std::fill(mean.begin(), mean.end(), 0.0);
        for (int t = end - window; t < end; ++t)
            for (int a = 0; a < n_assets; ++a) mean[static_cast<std::size_t>(a)] += ret(t, a);
        for (auto& m : mean) m /= window;
        std::fill(var.begin(), var.end(), 0.0);
        for (int t = end - window; t < end; ++t)
            for (int a = 0; a < n_assets; ++a) {
                const double d = ret(t, a) - mean[static_cast<std::size_t>(a)];
                var[static_cast<std::size_t>(a)] += d * d;
            }

        AgentGraphSnapshot snap;
        snap.t = end;
        snap.n = n_assets;
        double corr_acc = 0.0, abs_acc = 0.0;
        int corr_pairs = 0;
        for (int a = 0; a < n_assets; ++a)
            for (int b = a + 1; b < n_assets; ++b) {
                if (var[static_cast<std::size_t>(a)] <= 0.0 ||
                    var[static_cast<std::size_t>(b)] <= 0.0)
                    continue;
                double cov = 0.0;
                for (int t = end - window; t < end; ++t)
                    cov += (ret(t, a) - mean[static_cast<std::size_t>(a)]) *
                           (ret(t, b) - mean[static_cast<std::size_t>(b)]);
                const double rho = cov / std::sqrt(var[static_cast<std::size_t>(a)] *
                                                   var[static_cast<std::size_t>(b)]);
                corr_acc += rho;
                abs_acc += std::abs(rho);
                ++corr_pairs;
                const double len = corr_edge_length(rho);
                if (len > 0.0) snap.edges.push_back({a, b, len});
            }
        if (corr_pairs > 0) {
            pt.mean_corr = corr_acc / corr_pairs;
            pt.mean_abs_corr = abs_acc / corr_pairs;
        }
        pt.n_edges = static_cast<int>(snap.edges.size());
        if (snap.edges.empty()) {
            pt.degenerate = true;
        } else {
            const auto curv = snapshot_curvature(snap, params);
            const CurvatureSummary sum = summarize(curv, params);
            pt.mean_all = sum.mean_all;
            pt.mean_pos = sum.has_pos ? sum.mean_pos
                                      : std::numeric_limits<double>::quiet_NaN();
            pt.frac_neg = sum.frac_neg;
        }
        out.push_back(pt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mean pairwise mutual information between agent action streams.
// ---------------------------------------------------------------------------

struct MiPoint {
    int t = 0;
    double mean_mi = std::numeric_limits<double>::quiet_NaN();
};

// Plug-in MI (natural log) between the action sequences of each agent pair
// over a trailing window, averaged over pairs.
inline std::vector<MiPoint> action_mi_series(const ActionTrajectory& traj, int window,
                                             int stride) {
    if (window < 2 || stride < 1)
        throw std::invalid_argument("action-mi: window must be >= 2 and stride >= 1");
    const int A = traj.alphabet;
    const int n = traj.n_agents;
    std::vector<MiPoint> out;
    std::vector<double> joint(static_cast<std::size_t>(A) * A);
    std::vector<double> pi(static_cast<std::size_t>(A)), pj(static_cast<std::size_t>(A));
    for (int end = window; end <= traj.horizon; end += stride) {
        double acc = 0.0;
        long long pairs = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                std::fill(joint.begin(), joint.end(), 0.0);
                std::fill(pi.begin(), pi.end(), 0.0);
                std::fill(pj.begin(), pj.end(), 0.0);
                for (int t = end - window; t < end; ++t) {
                    const int a = traj.action(t, i) - traj.action_min;
                    const int b = traj.action(t, j) - traj.action_min;
                    joint[static_cast<std::size_t>(a) * A + b] += 1.0;
                    pi[static_cast<std::size_t>(a)] += 1.0;
                    pj[static_cast<std::size_t>(b)] += 1.0;
                }
                double mi = 0.0;
                for (int a = 0; a < A; ++a)
                    for (int b = 0; b < A; ++b) {
                        const double pab = joint[static_cast<std::size_t>(a) * A + b] / window;
                        if (pab <= 0.0) continue;
                        const double pa = pi[static_cast<std::size_t>(a)] / window;
                        const double pb = pj[static_cast<std::size_t>(b)] / window;
                        mi += pab * std::log(pab / (pa * pb));
                    }
                acc += std::max(0.0, mi);
                ++pairs;
            }
        MiPoint pt;
        pt.t = end;
        if (pairs > 0) pt.mean_mi = acc / static_cast<double>(pairs);
        out.push_back(pt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mean-field consistency check.
// ---------------------------------------------------------------------------

struct MeanFieldPoint {
    double kappa_bar = 0.0;   // squared common-factor loading
    double predicted = 0.0;   // sigma_xi * sqrt(2/pi) * sqrt(1 - kappa_bar)
    double measured = 0.0;    // Monte Carlo CSAD under the factor generator
};

// Under a one-factor return generator r_i = M + xi_i with idiosyncratic
// variance sigma_xi^2 (1 - kappa_bar), the cross-sectional dispersion
// shrinks as sqrt(1 - kappa_bar); this measures that collapse directly.
inline std::vector<MeanFieldPoint> meanfield_csad_check(
    const std::vector<double>& kappa_levels, int n_agents = 1000, int n_steps = 200,
    double sigma_xi = 0.01, std::uint64_t seed = 99) {
    std::vector<MeanFieldPoint> out;
    for (std::size_t li = 0; li < kappa_levels.size(); ++li) {
        const double kb = kappa_levels[li];
        if (!(kb >= 0.0 && kb < 1.0))
            throw std::invalid_argument("meanfield: kappa_bar must lie in [0,1)");
        const double m = std::sqrt(kb);
        const double sd = sigma_xi * std::sqrt(1.0 - kb);
        Rng rng(mix_key(seed, 0xF00DULL, static_cast<std::uint64_t>(li)));
        double acc = 0.0;
        std::vector<double> r(static_cast<std::size_t>(n_agents));
        for (int t = 0; t < n_steps; ++t) {
            double mean = 0.0;
            for (int i = 0; i < n_agents; ++i) {
                r[static_cast<std::size_t>(i)] = m + sd * rng.normal();
                mean += r[static_cast<std::size_t>(i)];
            }
            mean /= n_agents;
            double dev = 0.0;
            for (int i = 0; i < n_agents; ++i) dev += std::abs(r[static_cast<std::size_t>(i)] - mean);
            acc += dev / n_agents;
        }
        MeanFieldPoint pt;
        pt.kappa_bar = kb;
        pt.predicted = sigma_xi * std::sqrt(2.0 / M_PI) * std::sqrt(1.0 - kb);
        pt.measured = acc / n_steps;
        out.push_back(pt);
    }
    return out;
}

}  // namespace geomherd
