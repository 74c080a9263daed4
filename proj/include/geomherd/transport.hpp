#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace geomherd {

// Exact discrete optimal transport between two finitely supported measures,
// solved with the classic spanning-tree transportation simplex. The solver
// returns a vertex solution, so with exact marginals the cost is exact up to
// floating-point rounding in sums/differences of the inputs. Every solve is
// certified: primal feasibility, dual feasibility (no negative reduced cost)
// and complementary slackness are checked before the result is returned.

struct TransportEntry {
    int from = 0;
    int to = 0;
    double mass = 0.0;
};

struct TransportResult {
    double cost = 0.0;
    std::vector<TransportEntry> plan;
    // certification diagnostics
    double marginal_error = 0.0;   // sup-norm violation of the marginals
    double dual_violation = 0.0;   // most negative reduced cost at the end
    double duality_gap = 0.0;      // |primal - dual| at the end
    int pivots = 0;
};

namespace detail {

struct SimplexWorkspace {
    // basis arcs (cells); index into rows/cols
    std::vector<int> arc_row, arc_col;
    std::vector<double> arc_flow;
    std::vector<std::vector<int>> row_arcs, col_arcs;  // node -> incident basic arcs
    std::vector<double> u, v;                          // duals
    std::vector<int> parent_node, parent_arc;          // BFS scratch
    std::vector<signed char> visited;
};

inline void compute_duals(SimplexWorkspace& ws, const std::vector<double>& cost,
                          int m, int n) {
    const double unset = std::numeric_limits<double>::quiet_NaN();
    ws.u.assign(m, unset);
    ws.v.assign(n, unset);
    // basis is a spanning tree over m row nodes and n col nodes; fix u[0]=0
    std::vector<int> stack;
    stack.reserve(m + n);
    ws.u[0] = 0.0;
    stack.push_back(0);  // node ids: rows 0..m-1, cols m..m+n-1
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        const bool is_row = node < m;
        const auto& arcs = is_row ? ws.row_arcs[node] : ws.col_arcs[node - m];
        for (int a : arcs) {
            const int r = ws.arc_row[a];
            const int c = ws.arc_col[a];
            if (is_row) {
                if (std::isnan(ws.v[c])) {
                    ws.v[c] = cost[static_cast<std::size_t>(r) * n + c] - ws.u[r];
                    stack.push_back(m + c);
                }
            } else {
                if (std::isnan(ws.u[r])) {
                    ws.u[r] = cost[static_cast<std::size_t>(r) * n + c] - ws.v[c];
                    stack.push_back(r);
                }
            }
        }
    }
}

}  // namespace detail

// a: source masses (all > 0), b: sink masses (all > 0), cost: dense m*n
// row-major matrix of finite nonnegative costs. Masses must balance within
// `balance_tol`. Throws std::invalid_argument on malformed input and
// std::logic_error if the optimality certificate fails.
inline TransportResult solve_transport(std::vector<double> a, std::vector<double> b,
                                       const std::vector<double>& cost,
                                       double balance_tol = 1e-9) {
    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(b.size());
    if (m == 0 || n == 0) throw std::invalid_argument("transport: empty marginal");
    if (cost.size() != static_cast<std::size_t>(m) * n)
        throw std::invalid_argument("transport: cost matrix shape mismatch");
    double suma = 0.0, sumb = 0.0, cmax = 0.0;
    for (double x : a) {
        if (!(x > 0.0)) throw std::invalid_argument("transport: nonpositive source mass");
        suma += x;
    }
    for (double x : b) {
        if (!(x > 0.0)) throw std::invalid_argument("transport: nonpositive sink mass");
        sumb += x;
    }
    for (double c : cost) {
        if (!std::isfinite(c) || c < 0.0)
            throw std::invalid_argument("transport: cost must be finite and nonnegative");
        cmax = std::max(cmax, c);
    }
    const double scale = std::max(1.0, std::max(suma, sumb));
    if (std::abs(suma - sumb) > balance_tol * scale)
        throw std::invalid_argument("transport: marginals do not balance (|" +
                                    std::to_string(suma) + " - " + std::to_string(sumb) +
                                    "| exceeds tolerance)");
    // exact balance for the tree algebra
    const double fix = suma / sumb;
    for (double& x : b) x *= fix;

    detail::SimplexWorkspace ws;
    ws.row_arcs.assign(m, {});
    ws.col_arcs.assign(n, {});
    const int n_basic = m + n - 1;
    ws.arc_row.reserve(n_basic + 1);
    ws.arc_col.reserve(n_basic + 1);
    ws.arc_flow.reserve(n_basic + 1);

    auto add_arc = [&](int r, int c, double f) {
        const int idx = static_cast<int>(ws.arc_row.size());
        ws.arc_row.push_back(r);
        ws.arc_col.push_back(c);
        ws.arc_flow.push_back(f);
        ws.row_arcs[r].push_back(idx);
        ws.col_arcs[c].push_back(idx);
        return idx;
    };

    // Northwest-corner initial basis: exactly m+n-1 arcs, degenerate arcs kept.
    {
        std::vector<double> ra = a, rb = b;
        int i = 0, j = 0;
        while (true) {
            const double f = std::min(ra[i], rb[j]);
            add_arc(i, j, f);
            ra[i] -= f;
            rb[j] -= f;
            if (i == m - 1 && j == n - 1) break;
            // advance along exactly one axis; on ties prefer the row unless
            // it is exhausted positionally (keeps the count at m+n-1)
            if (ra[i] <= rb[j] && i < m - 1)
                ++i;
            else if (j < n - 1)
                ++j;
            else
                ++i;
        }
    }

    const double enter_tol = 1e-12 * (1.0 + cmax);
    const int soft_limit = 16 * (m + n) + 64;   // after this, switch to Bland's rule
    const int hard_limit = 400 * (m + n) + 20000;
    int pivots = 0;
    // block pricing: scan rows from a rotating cursor and stop early once a
    // candidate has been found and a minimum number of rows examined; a full
    // fruitless rotation certifies optimality, so exactness is unaffected
    const int block_rows = std::max(2, m / 8);
    int cursor = 0;

    std::vector<int> path_arcs;
    path_arcs.reserve(m + n);

    while (true) {
        detail::compute_duals(ws, cost, m, n);
        // entering arc: most negative reduced cost within the price block
        // (Dantzig flavour), or the first one in lexicographic order once
        // past the soft pivot limit (Bland, which cannot cycle)
        int er = -1, ec = -1;
        double best = -enter_tol;
        const bool bland = pivots > soft_limit;
        if (bland) {
            for (int i = 0; i < m && er < 0; ++i) {
                const double ui = ws.u[i];
                const std::size_t base = static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) {
                    const double rc = cost[base + j] - ui - ws.v[j];
                    if (rc < best) {
                        er = i;
                        ec = j;
                        break;
                    }
                }
            }
        } else {
            for (int k = 0, scanned = 0; k < m; ++k, ++scanned) {
                const int i = (cursor + k) % m;
                const double ui = ws.u[i];
                const std::size_t base = static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) {
                    const double rc = cost[base + j] - ui - ws.v[j];
                    if (rc < best) {
                        er = i;
                        ec = j;
                        best = rc;
                    }
                }
                if (er >= 0 && scanned + 1 >= block_rows) break;
            }
            if (er >= 0) cursor = (er + 1) % m;
        }
        if (er < 0) break;  // optimal
        if (++pivots > hard_limit)
            throw std::logic_error("transport: pivot limit exceeded");

        // unique tree path from row-node er to col-node (m+ec)
        ws.parent_node.assign(m + n, -1);
        ws.parent_arc.assign(m + n, -1);
        ws.visited.assign(m + n, 0);
        std::vector<int> queue{er};
        ws.visited[er] = 1;
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const int node = queue[qi];
            if (node == m + ec) break;
            const bool is_row = node < m;
            const auto& arcs = is_row ? ws.row_arcs[node] : ws.col_arcs[node - m];
            for (int aidx : arcs) {
                const int other = is_row ? m + ws.arc_col[aidx] : ws.arc_row[aidx];
                if (!ws.visited[other]) {
                    ws.visited[other] = 1;
                    ws.parent_node[other] = node;
                    ws.parent_arc[other] = aidx;
                    queue.push_back(other);
                }
            }
        }
        path_arcs.clear();
        for (int node = m + ec; node != er; node = ws.parent_node[node]) {
            if (node < 0) throw std::logic_error("transport: basis not connected");
            path_arcs.push_back(ws.parent_arc[node]);
        }
        // entering cell takes +theta; path cells alternate -,+,... starting
        // from the arc incident to the entering row
        std::reverse(path_arcs.begin(), path_arcs.end());
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < path_arcs.size(); p += 2)
            theta = std::min(theta, ws.arc_flow[path_arcs[p]]);
        // leaving arc: lexicographically smallest minimiser (anti-cycling)
        int leave_arc = -1;
        for (std::size_t p = 0; p < path_arcs.size(); p += 2) {
            const int aidx = path_arcs[p];
            if (ws.arc_flow[aidx] != theta) continue;
            if (leave_arc < 0 ||
                ws.arc_row[aidx] < ws.arc_row[leave_arc] ||
                (ws.arc_row[aidx] == ws.arc_row[leave_arc] &&
                 ws.arc_col[aidx] < ws.arc_col[leave_arc]))
                leave_arc = aidx;
        }
        if (leave_arc < 0) throw std::logic_error("transport: no leaving arc");
        for (std::size_t p = 0; p < path_arcs.size(); ++p) {
            const int aidx = path_arcs[p];
            ws.arc_flow[aidx] += (p % 2 == 0) ? -theta : theta;
        }
        // replace leaving arc by entering arc in place
        {
            const int lr = ws.arc_row[leave_arc];
            const int lc = ws.arc_col[leave_arc];
            auto& ra = ws.row_arcs[lr];
            ra.erase(std::find(ra.begin(), ra.end(), leave_arc));
            auto& ca = ws.col_arcs[lc];
            ca.erase(std::find(ca.begin(), ca.end(), leave_arc));
            ws.arc_row[leave_arc] = er;
            ws.arc_col[leave_arc] = ec;
            ws.arc_flow[leave_arc] = theta;
            ws.row_arcs[er].push_back(leave_arc);
            ws.col_arcs[ec].push_back(leave_arc);
        }
    }

    TransportResult res;
    res.pivots = pivots;
    std::vector<double> row_sum(m, 0.0), col_sum(n, 0.0);
    for (std::size_t idx = 0; idx < ws.arc_flow.size(); ++idx) {
        const double f = ws.arc_flow[idx];
        const int r = ws.arc_row[idx];
        const int c = ws.arc_col[idx];
        if (f < -1e-12 * scale) throw std::logic_error("transport: negative flow");
        row_sum[r] += f;
        col_sum[c] += f;
        res.cost += f * cost[static_cast<std::size_t>(r) * n + c];
        if (f > 0.0) res.plan.push_back({r, c, f});
    }
    // --- optimality certificate ---
    double merr = 0.0;
    for (int i = 0; i < m; ++i) merr = std::max(merr, std::abs(row_sum[i] - a[i]));
    for (int j = 0; j < n; ++j) merr = std::max(merr, std::abs(col_sum[j] - b[j]));
    res.marginal_error = merr;
    detail::compute_duals(ws, cost, m, n);
    double worst_rc = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            worst_rc = std::min(worst_rc,
                                cost[static_cast<std::size_t>(i) * n + j] - ws.u[i] - ws.v[j]);
    res.dual_violation = worst_rc;
    double dual_value = 0.0;
    for (int i = 0; i < m; ++i) dual_value += ws.u[i] * a[i];
    for (int j = 0; j < n; ++j) dual_value += ws.v[j] * b[j];
    res.duality_gap = std::abs(dual_value - res.cost);
    const double cert_tol = 1e-9 * (1.0 + cmax) * scale;
    if (merr > 1e-9 * scale || worst_rc < -cert_tol || res.duality_gap > cert_tol)
        throw std::logic_error("transport: optimality certification failed");
    return res;
}

// 1-Wasserstein distance between measures given as (support-id, mass) pairs
// under a caller-supplied metric. Common atoms are cancelled first, which is
// exact for metric costs (d(u,u)=0 plus the triangle inequality).
template <typename Metric>
inline double wasserstein1(const std::vector<int>& sup_a, const std::vector<double>& mass_a,
                           const std::vector<int>& sup_b, const std::vector<double>& mass_b,
                           Metric&& metric, double balance_tol = 1e-9) {
    if (sup_a.size() != mass_a.size() || sup_b.size() != mass_b.size())
        throw std::invalid_argument("wasserstein1: support/mass length mismatch");
    double suma = 0.0, sumb = 0.0;
    for (double x : mass_a) suma += x;
    for (double x : mass_b) sumb += x;
    if (std::abs(suma - sumb) > balance_tol * std::max(1.0, std::max(suma, sumb)))
        throw std::invalid_argument("wasserstein1: marginals do not balance");

    // cancel shared mass atom by atom
    std::vector<int> ra, rb;
    std::vector<double> ma, mb;
    {
        std::vector<std::pair<int, double>> ea(sup_a.size()), eb(sup_b.size());
        for (std::size_t i = 0; i < sup_a.size(); ++i) ea[i] = {sup_a[i], mass_a[i]};
        for (std::size_t i = 0; i < sup_b.size(); ++i) eb[i] = {sup_b[i], mass_b[i]};
        std::sort(ea.begin(), ea.end());
        std::sort(eb.begin(), eb.end());
        std::size_t i = 0, j = 0;
        while (i < ea.size() && j < eb.size()) {
            if (ea[i].first == eb[j].first) {
                const double c = std::min(ea[i].second, eb[j].second);
                ea[i].second -= c;
                eb[j].second -= c;
                if (ea[i].second <= 0.0) ++i;
                if (j < eb.size() && eb[j].second <= 0.0) ++j;
            } else if (ea[i].first < eb[j].first) {
                ++i;
            } else {
                ++j;
            }
        }
        for (auto& [id, mass] : ea)
            if (mass > 0.0) {
                ra.push_back(id);
                ma.push_back(mass);
            }
        for (auto& [id, mass] : eb)
            if (mass > 0.0) {
                rb.push_back(id);
                mb.push_back(mass);
            }
    }
    if (ra.empty() && rb.empty()) return 0.0;  // identical measures
    if (ra.empty() || rb.empty()) {
        // only rounding residue on one side can remain after cancellation
        double residue = 0.0;
        for (double x : ma) residue += x;
        for (double x : mb) residue += x;
        if (residue <= balance_tol) return 0.0;
        throw std::invalid_argument("wasserstein1: marginals do not balance");
    }

    std::vector<double> cost(ra.size() * rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i)
        for (std::size_t j = 0; j < rb.size(); ++j) {
            const double d = metric(ra[i], rb[j]);
            if (!std::isfinite(d))
                throw std::domain_error("wasserstein1: supports not mutually reachable");
            cost[i * rb.size() + j] = d;
        }
    return solve_transport(std::move(ma), std::move(mb), cost, balance_tol).cost;
}

// Entropy-regularised transport cost <pi, C> computed in the log domain with
// epsilon scaling so that very small `reg` values still converge. Returns the
// transport cost of the (near-)feasible entropic plan; as reg -> 0 this
// approaches the exact transport cost from above (up to the entropic bias).
inline double sinkhorn_cost(const std::vector<double>& a, const std::vector<double>& b,
                            const std::vector<double>& cost, double reg,
                            int max_iters = 20000, double tol = 1e-10) {
    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(b.size());
    if (m == 0 || n == 0) throw std::invalid_argument("sinkhorn: empty marginal");
    if (!(reg > 0.0)) throw std::invalid_argument("sinkhorn: reg must be positive");
    if (cost.size() != static_cast<std::size_t>(m) * n)
        throw std::invalid_argument("sinkhorn: cost matrix shape mismatch");
    std::vector<double> loga(m), logb(n);
    for (int i = 0; i < m; ++i) {
        if (!(a[i] > 0.0)) throw std::invalid_argument("sinkhorn: nonpositive mass");
        loga[i] = std::log(a[i]);
    }
    for (int j = 0; j < n; ++j) {
        if (!(b[j] > 0.0)) throw std::invalid_argument("sinkhorn: nonpositive mass");
        logb[j] = std::log(b[j]);
    }
    double cmax = 0.0;
    for (double c : cost) cmax = std::max(cmax, c);

    std::vector<double> f(m, 0.0), g(n, 0.0), scratch(std::max(m, n));
    auto lse = [](const std::vector<double>& xs, int k) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) mx = std::max(mx, xs[i]);
        if (!std::isfinite(mx)) return mx;
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += std::exp(xs[i] - mx);
        return mx + std::log(s);
    };

    // epsilon ladder: halve from a cost-scale start down to `reg`
    std::vector<double> ladder;
    for (double eps = std::max(reg, std::max(cmax, 1e-6)); eps > reg; eps *= 0.5)
        ladder.push_back(eps);
    ladder.push_back(reg);

    double marg_err = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < ladder.size(); ++li) {
        const double eps = ladder[li];
        const bool final_level = (li + 1 == ladder.size());
        const double level_tol = final_level ? tol : std::max(tol, 1e-6);
        const int level_iters = final_level ? max_iters : 200;
        for (int it = 0; it < level_iters; ++it) {
            for (int i = 0; i < m; ++i) {
                const std::size_t base = static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) scratch[j] = (g[j] - cost[base + j]) / eps;
                f[i] = eps * (loga[i] - lse(scratch, n));
            }
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < m; ++i)
                    scratch[i] = (f[i] - cost[static_cast<std::size_t>(i) * n + j]) / eps;
                g[j] = eps * (logb[j] - lse(scratch, m));
            }
            // column marginals are exact after the g update; check rows
            marg_err = 0.0;
            for (int i = 0; i < m; ++i) {
                double s = 0.0;
                const std::size_t base = static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j)
                    s += std::exp((f[i] + g[j] - cost[base + j]) / eps);
                marg_err = std::max(marg_err, std::abs(s - a[i]));
            }
            if (marg_err < level_tol) break;
        }
        if (final_level && marg_err >= level_tol)
            throw std::runtime_error("sinkhorn: failed to converge (marginal gap " +
                                     std::to_string(marg_err) + ")");
    }
    double value = 0.0;
    const double eps = ladder.back();
    for (int i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j)
            value += std::exp((f[i] + g[j] - cost[base + j]) / eps) * cost[base + j];
    }
    return value;
}

}  // namespace geomherd
