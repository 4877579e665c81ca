#pragma once

// Regularization-parameter selection.
//
//  * solve_global: the globally optimal tau from the two-variable program
//        minimize c eps^2 + d eta^2  s.t.  cL + dΛ*Λ >= Q*Q,  c, d >= 0.
//    Along a ray (c, d) = s (1-t, t) the smallest feasible s is the largest
//    generalized eigenvalue of (Q*Q, (1-t)L + tΛ*Λ), so the program collapses
//    to a scalar minimization over t. A staircase walk over a logarithmic
//    (c, d) grid cross-checks the result.
//  * solve_local: the balance point ||L^{1/2} f_tau|| = (eps/eta)||Λ f_tau - y||,
//    found by bisection.
//  * evaluate_gwce_linear / estimate_functional: worst-case error of a given
//    linear recovery map, and the direct construction for scalar Q.

#include <gsor/detail/optimize.hpp>
#include <gsor/error.hpp>
#include <gsor/graph.hpp>
#include <gsor/recovery.hpp>
#include <gsor/spectral.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace gsor {

struct GlobalOptions {
    std::size_t ray_grid = 64;        // coarse samples of the ray parameter
    std::size_t verify_grid = 200;    // per-axis size of the (c, d) check grid
    bool verify = true;
    double multiplier_cap = 1e12;
};

struct GlobalSolution {
    double c_flat = 0.0;
    double d_flat = 0.0;
    double tau_flat = 0.5;
    double gwce_sq_bound = 0.0;        // c_flat eps^2 + d_flat eta^2
    Eigen::MatrixXd recovery_matrix;   // n x n_ℓ matrix of Q ∘ Δ_tau_flat
    double grid_objective = std::numeric_limits<double>::quiet_NaN();
    bool from_grid = false;            // the check grid beat the ray reduction

    double gwce_bound() const { return std::sqrt(gwce_sq_bound); }
};

struct LocalSolution {
    double tau_natural = 0.5;
    Eigen::VectorXd f_hat;
    double balance_residual = 0.0;
    double minimax_value = 0.0;
    bool degenerate = false;
};

struct FunctionalEstimate {
    Eigen::VectorXd weights;  // a_flat, one weight per labeled vertex
    double gwce = 0.0;
};

namespace detail {

inline bool is_zero_matrix(const Eigen::MatrixXd& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

inline double lambda_max_sym(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(m.rows() - 1);
}

/// λ_max(Q M^{-1} Q*) for M = aL + bΛ*Λ, which equals the largest generalized
/// eigenvalue of (Q*Q, M) but only needs an n x n eigenproblem.
inline double ray_scale(const LaplacianBundle& bundle, const LabelSet& labels, const Eigen::MatrixXd& Q, double a,
                        double b) {
    Eigen::LLT<Eigen::MatrixXd> llt(weighted_system(bundle, labels, a, b));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd X = llt.matrixL().solve(Q.transpose());
    const Eigen::MatrixXd G = X.rows() >= X.cols() ? Eigen::MatrixXd(X.transpose() * X)
                                                   : Eigen::MatrixXd(X * X.transpose());
    return std::max(0.0, lambda_max_sym(G));
}

struct GridCandidate {
    double c = 0.0, d = 0.0, objective = std::numeric_limits<double>::infinity();
    std::size_t i = 0, j = 0;
};

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t k = 0; k < n; ++k)
        g[k] = std::exp(n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
    return g;
}

/// Exact minimum of c eps^2 + d eta^2 over feasible points of a c x d grid.
/// Feasibility is monotone in both multipliers, so the boundary is a staircase
/// that can be traced with O(|c| + |d|) eigenvalue evaluations.
inline GridCandidate staircase_minimum(const FeasibilityContext& ctx, const std::vector<double>& cs,
                                       const std::vector<double>& ds, const ModelParams& params) {
    GridCandidate best;
    std::ptrdiff_t j = static_cast<std::ptrdiff_t>(ds.size()) - 1;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        while (j >= 0 && is_feasible(ctx, cs[i], ds[static_cast<std::size_t>(j)])) --j;
        // ds[j + 1] was feasible for some earlier (smaller) c, hence here too.
        const auto jb = static_cast<std::size_t>(j + 1);
        if (jb >= ds.size()) continue;
        const double obj = cs[i] * params.epsilon * params.epsilon + ds[jb] * params.eta * params.eta;
        if (obj < best.objective) best = {cs[i], ds[jb], obj, i, jb};
        if (j < 0) break;
    }
    return best;
}

}  // namespace detail

/// Globally optimal regularization parameter tau_flat = d/(c+d).
inline GlobalSolution solve_global(const LaplacianBundle& bundle, const LabelSet& labels,
                                   const QuantityOfInterest& qoi, const ModelParams& params,
                                   const GlobalOptions& options = {}) {
    params.validate();
    detail::check_observation(bundle, labels);
    const std::size_t N = bundle.size();
    const Eigen::MatrixXd Q = qoi.materialize(N, labels);
    const double e2 = params.epsilon * params.epsilon;
    const double h2 = params.eta * params.eta;

    GlobalSolution sol;
    if (detail::is_zero_matrix(Q)) {
        sol.recovery_matrix = Eigen::MatrixXd::Zero(Q.rows(), static_cast<Eigen::Index>(labels.size()));
        return sol;
    }

    // Interior: rays t = logistic(u).
    auto objective = [&](double u) {
        const auto [a, b] = detail::logistic_weights(u);
        return detail::ray_scale(bundle, labels, Q, a, b) * (a * e2 + b * h2);
    };
    constexpr double u_span = 18.0;
    const std::size_t m = std::max<std::size_t>(options.ray_grid, 3);
    std::vector<double> us(m), gs(m);
    std::size_t best = 0;
    for (std::size_t k = 0; k < m; ++k) {
        us[k] = -u_span + 2.0 * u_span * static_cast<double>(k) / static_cast<double>(m - 1);
        gs[k] = objective(us[k]);
        if (gs[k] < gs[best]) best = k;
    }
    const double lo = us[best == 0 ? 0 : best - 1];
    const double hi = us[std::min(best + 1, m - 1)];
    detail::ScalarMin ray = detail::golden_section(objective, lo, hi, 1e-11);
    if (gs[best] < ray.value) ray = {us[best], gs[best]};

    auto [a_best, b_best] = detail::logistic_weights(ray.x);
    const double s_best = detail::ray_scale(bundle, labels, Q, a_best, b_best);
    if (!std::isfinite(s_best) || s_best > options.multiplier_cap)
        throw InfeasibleError("no feasible multipliers (c, d) below the cap");
    sol.c_flat = a_best * s_best;
    sol.d_flat = b_best * s_best;
    sol.tau_flat = b_best;
    sol.gwce_sq_bound = sol.c_flat * e2 + sol.d_flat * h2;

    // Boundary rays: d = 0 needs Q to vanish on ker(L); c = 0 needs Q to
    // vanish off the labeled coordinates.
    const double c0 = constrained_opnorm(Q, bundle);
    if (std::isfinite(c0) && c0 * c0 * e2 < sol.gwce_sq_bound * (1.0 - 1e-9)) {
        sol.c_flat = c0 * c0;
        sol.d_flat = 0.0;
        sol.tau_flat = 0.0;
        sol.gwce_sq_bound = sol.c_flat * e2;
    }
    Eigen::MatrixXd Ql(Q.rows(), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t k = 0; k < labels.size(); ++k) Ql.col(k) = Q.col(labels[k]);
    if ((Q.cwiseAbs().sum() - Ql.cwiseAbs().sum()) <= 1e-14 * Q.cwiseAbs().sum()) {
        const double d1 = detail::lambda_max_sym(Ql.transpose() * Ql);
        if (d1 * h2 < sol.gwce_sq_bound * (1.0 - 1e-9)) {
            sol.c_flat = 0.0;
            sol.d_flat = d1;
            sol.tau_flat = 1.0;
            sol.gwce_sq_bound = d1 * h2;
        }
    }

    if (options.verify) {
        // Window spanned by the coarse ray samples, then a local refinement.
        const FeasibilityContext ctx(bundle, labels, qoi);
        double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
        double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const auto [a, b] = detail::logistic_weights(us[k]);
            const double s = gs[k] / (a * e2 + b * h2);
            if (!std::isfinite(s) || s <= 0.0) continue;
            cmin = std::min(cmin, a * s);
            cmax = std::max(cmax, a * s);
            dmin = std::min(dmin, b * s);
            dmax = std::max(dmax, b * s);
        }
        if (cmax > 0.0 && dmax > 0.0) {
            const std::size_t g = std::max<std::size_t>(options.verify_grid, 4);
            std::vector<double> cs = detail::log_grid(cmin / 2.0, cmax * 2.0, g);
            std::vector<double> ds = detail::log_grid(dmin / 2.0, dmax * 2.0, g);
            detail::GridCandidate coarse = detail::staircase_minimum(ctx, cs, ds, params);
            if (std::isfinite(coarse.objective)) {
                const std::size_t i0 = coarse.i >= 2 ? coarse.i - 2 : 0, i1 = std::min(coarse.i + 2, g - 1);
                const std::size_t j0 = coarse.j >= 2 ? coarse.j - 2 : 0, j1 = std::min(coarse.j + 2, g - 1);
                detail::GridCandidate fine = detail::staircase_minimum(
                    ctx, detail::log_grid(cs[i0], cs[i1], g), detail::log_grid(ds[j0], ds[j1], g), params);
                if (fine.objective < coarse.objective) coarse = fine;
                sol.grid_objective = coarse.objective;
                if (coarse.objective < sol.gwce_sq_bound * (1.0 - 1e-9)) {
                    sol.c_flat = coarse.c;
                    sol.d_flat = coarse.d;
                    sol.tau_flat = coarse.d / (coarse.c + coarse.d);
                    sol.gwce_sq_bound = coarse.objective;
                    sol.from_grid = true;
                }
            }
        }
    }

    sol.recovery_matrix = Q * regularizer_matrix_closed(bundle, labels, sol.tau_flat);
    return sol;
}

/// Locally near-optimal estimate: f_hat = Δ_tau(y) at the balance point.
inline LocalSolution solve_local(const LaplacianBundle& bundle, const Observation& obs, const ModelParams& params) {
    params.validate();
    detail::check_observation(bundle, obs.labels);
    const Eigen::VectorXd& y = obs.values;
    const double ratio = params.epsilon / params.eta;
    const double tol = 1e-10 * (params.epsilon + params.eta);

    LocalSolution sol;
    auto finish = [&](const Eigen::VectorXd& f) {
        const double energy = bundle.dirichlet_norm(f);
        const double misfit = (obs.labels.restrict(f) - y).norm();
        sol.f_hat = f;
        sol.balance_residual = std::abs(energy - ratio * misfit);
        sol.minimax_value = std::max(energy * energy, ratio * ratio * misfit * misfit);
    };

    if (y.norm() == 0.0) {
        sol.degenerate = true;
        finish(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bundle.size())));
        return sol;
    }
    const Eigen::VectorXd f0 = limit_tau_zero(bundle, obs);
    if ((obs.labels.restrict(f0) - y).norm() <= 1e-12 * (1.0 + y.norm())) {
        // y extends to a componentwise constant signal: every tau reproduces it.
        sol.degenerate = true;
        finish(f0);
        return sol;
    }

    auto balance = [&](double u, Eigen::VectorXd* f_out) {
        const auto [a, b] = detail::logistic_weights(u);
        Eigen::VectorXd f = regularize_weighted(bundle, obs, a, b);
        const double g = bundle.dirichlet_norm(f) - ratio * (obs.labels.restrict(f) - y).norm();
        if (f_out) *f_out = std::move(f);
        return g;
    };

    double lo = -12.0, hi = 12.0;
    double g_lo = balance(lo, nullptr), g_hi = balance(hi, nullptr);
    while (g_lo > 0.0 && lo > -30.0) g_lo = balance(lo -= 6.0, nullptr);
    while (g_hi < 0.0 && hi < 30.0) g_hi = balance(hi += 6.0, nullptr);
    if (g_lo > 0.0 || g_hi < 0.0) {
        // No sign change inside the numerically usable range.
        const double u = std::abs(g_lo) <= std::abs(g_hi) ? lo : hi;
        Eigen::VectorXd f;
        balance(u, &f);
        sol.tau_natural = detail::logistic_weights(u).second;
        sol.degenerate = true;
        finish(f);
        return sol;
    }

    Eigen::VectorXd f;
    double u = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
        u = 0.5 * (lo + hi);
        const double g = balance(u, &f);
        if (std::abs(g) <= tol || (hi - lo) <= 1e-12) break;
        (g < 0.0 ? lo : hi) = u;
    }
    sol.tau_natural = detail::logistic_weights(u).second;
    finish(f);
    return sol;
}

/// Exact global worst-case error of the linear map y -> R y (R: n x n_ℓ) for
/// the quantity Q. With B = Q - RΛ whitened on range(L) as B~,
///     gwce^2 = min_t λ_max( eps^2/(1-t) B~B~* + eta^2/t RR* ),
/// a convex scalar problem (two-constraint S-lemma). Returns +inf when B
/// sees ker(L). eps or eta may be zero here.
inline double evaluate_gwce_linear(const Eigen::MatrixXd& R, const LaplacianBundle& bundle, const LabelSet& labels,
                                   const QuantityOfInterest& qoi, double epsilon, double eta) {
    if (!(epsilon >= 0.0 && eta >= 0.0)) throw InvalidArgument("budgets must be nonnegative");
    labels.check_bounds(bundle.size());
    const Eigen::MatrixXd Q = qoi.materialize(bundle.size(), labels);
    if (R.rows() != Q.rows() || R.cols() != static_cast<Eigen::Index>(labels.size()))
        throw InvalidArgument("recovery matrix must be n x n_labeled");
    Eigen::MatrixXd B = Q;
    for (std::size_t k = 0; k < labels.size(); ++k) B.col(labels[k]) -= R.col(k);
    if (!vanishes_on_kernel(B, bundle)) return std::numeric_limits<double>::infinity();

    const Eigen::MatrixXd Bw = whiten_on_range(B, bundle);
    const Eigen::MatrixXd P = epsilon * epsilon * (Bw * Bw.transpose());
    const Eigen::MatrixXd E = eta * eta * (R * R.transpose());
    if (detail::is_zero_matrix(P)) return std::sqrt(std::max(0.0, detail::lambda_max_sym(E)));
    if (detail::is_zero_matrix(E)) return std::sqrt(std::max(0.0, detail::lambda_max_sym(P)));

    auto h = [&](double u) {
        const auto [a, b] = detail::logistic_weights(u);
        return detail::lambda_max_sym(P / a + E / b);
    };
    constexpr std::size_t m = 41;
    double best_u = 0.0, best_v = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
        const double u = -30.0 + 60.0 * static_cast<double>(k) / static_cast<double>(m - 1);
        const double v = h(u);
        if (v < best_v) best_v = v, best_u = u;
    }
    const double step = 60.0 / static_cast<double>(m - 1);
    const detail::ScalarMin r = detail::golden_section(h, best_u - step, best_u + step, 1e-10);
    return std::sqrt(std::max(0.0, std::min(r.value, best_v)));
}

inline double evaluate_gwce_linear(const Eigen::MatrixXd& R, const LaplacianBundle& bundle, const LabelSet& labels,
                                   const QuantityOfInterest& qoi, const ModelParams& params) {
    params.validate();
    return evaluate_gwce_linear(R, bundle, labels, qoi, params.epsilon, params.eta);
}

/// Globally optimal weights a for estimating <q, f> by <a, y>:
///     minimize eps ||B~(q - Λ*a)|| + eta ||a||  s.t.  <q - Λ*a, 1_C> = 0 per component,
/// with B~ the whitening on range(L). Uses (x + y)^2 = min_t x^2/(1-t) + y^2/t:
/// for fixed t the inner problem is ridge least squares on the constraint
/// null space, and the outer function of t is convex.
inline FunctionalEstimate estimate_functional(const Eigen::VectorXd& q, const LaplacianBundle& bundle,
                                              const LabelSet& labels, const ModelParams& params) {
    params.validate();
    detail::check_observation(bundle, labels);
    const std::size_t N = bundle.size();
    if (static_cast<std::size_t>(q.size()) != N) throw InvalidArgument("functional vector must have N entries");
    const auto nl = static_cast<Eigen::Index>(labels.size());
    const std::size_t K = bundle.num_components;

    // Min-norm particular solution of the component constraints.
    std::vector<double> comp_sum(K, 0.0);
    std::vector<std::size_t> comp_labeled(K, 0);
    for (std::size_t v = 0; v < N; ++v) comp_sum[bundle.component_of[v]] += q(v);
    for (std::size_t v : labels.vertices()) ++comp_labeled[bundle.component_of[v]];
    Eigen::VectorXd a_p(nl);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), nl);
    for (Eigen::Index k = 0; k < nl; ++k) {
        const std::size_t comp = bundle.component_of[labels[k]];
        a_p(k) = comp_sum[comp] / static_cast<double>(comp_labeled[comp]);
        C(comp, k) = 1.0;
    }

    // Orthonormal basis of the constraint null space.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(C.transpose());
    const Eigen::MatrixXd full_q = qr.householderQ() * Eigen::MatrixXd::Identity(nl, nl);
    const Eigen::MatrixXd Z = full_q.rightCols(nl - static_cast<Eigen::Index>(K));

    // First term: ||r0 - A Z w|| in whitened coordinates diag(λ_+^{-1/2}) χ_+^T.
    const Eigen::MatrixXd A =
        whiten_on_range(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N)), bundle)
            .transpose();
    Eigen::MatrixXd Al(A.rows(), nl);
    for (Eigen::Index k = 0; k < nl; ++k) Al.col(k) = A.col(labels[k]);
    const Eigen::VectorXd r0 = A * q - Al * a_p;
    const Eigen::MatrixXd AZ = Al * Z;

    const double e2 = params.epsilon * params.epsilon;
    const double h2 = params.eta * params.eta;
    const double ap2 = a_p.squaredNorm();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(AZ.transpose() * AZ);
    const Eigen::VectorXd sig = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd& V = eig.eigenvectors();
    const Eigen::VectorXd proj = V.transpose() * (AZ.transpose() * r0);

    auto inner = [&](double u, Eigen::VectorXd* w_out) {
        const auto [one_minus_t, t] = detail::logistic_weights(u);
        const double alpha = e2 / one_minus_t, beta = h2 / t;
        Eigen::VectorXd coef(proj.size());
        for (Eigen::Index k = 0; k < proj.size(); ++k) coef(k) = alpha * proj(k) / (alpha * sig(k) + beta);
        const Eigen::VectorXd w = V * coef;
        const double value = alpha * (r0 - AZ * w).squaredNorm() + beta * (ap2 + w.squaredNorm());
        if (w_out) *w_out = w;
        return value;
    };

    Eigen::VectorXd w = Eigen::VectorXd::Zero(Z.cols());
    if (Z.cols() > 0) {
        auto h = [&](double u) { return inner(u, nullptr); };
        constexpr std::size_t m = 61;
        double best_u = 0.0, best_v = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
            const double u = -30.0 + 60.0 * static_cast<double>(k) / static_cast<double>(m - 1);
            const double v = h(u);
            if (v < best_v) best_v = v, best_u = u;
        }
        const double step = 60.0 / static_cast<double>(m - 1);
        detail::ScalarMin r = detail::golden_section(h, best_u - step, best_u + step, 1e-11);
        if (best_v < r.value) r = {best_u, best_v};
        inner(r.x, &w);
    }

    FunctionalEstimate out;
    out.weights = a_p + Z * w;
    const double smooth = (r0 - AZ * w).norm();
    out.gwce = params.epsilon * smooth + params.eta * out.weights.norm();
    return out;
}

}  // namespace gsor
