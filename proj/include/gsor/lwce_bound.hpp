#pragma once

// Upper bound on the local worst-case error
//     lwce(z)^2 = sup{ ||Qf - z||^2 : ||L^{1/2} f|| <= eps, ||Λf - y|| <= eta }
// from the S-procedure: for multipliers c, d >= 0 with S = cL + dΛ*Λ - Q*Q > 0,
//     lwce(z)^2 <= γ(c, d) = ||z||^2 + c eps^2 - d(||y||^2 - eta^2) + w^T S^{-1} w,
// where w = Q*z - dΛ*y. The bound is minimized over (c, d).

#include <gsor/detail/optimize.hpp>
#include <gsor/error.hpp>
#include <gsor/graph.hpp>
#include <gsor/recovery.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace gsor {

struct LwceBoundResult {
    double gamma = std::numeric_limits<double>::infinity();
    double c_star = 0.0;
    double d_star = 0.0;
    bool feasible = false;
};

struct LwceOptions {
    double multiplier_min = 1e-6;
    double multiplier_max = 1e6;
    std::size_t grid = 40;
};

struct LwceCurvePoint {
    double tau = 0.0;
    double gamma = 0.0;
    double c = 0.0;
    double d = 0.0;
};

namespace detail {
inline constexpr double kInf = std::numeric_limits<double>::infinity();
}

/// Precomputes everything about the bound that does not depend on z.
///
/// Unlabeled coordinates are eliminated first: with T(c) = cL - Q*Q, S is
/// positive definite iff T_uu(c) is and θ_min + d > 0 for the eigenvalues θ
/// of M(c) = T_ℓℓ - T_ℓu T_uu^{-1} T_uℓ. For fixed c every γ(c, d) then costs
/// O(n_ℓ).
class LwceProblem {
public:
    LwceProblem(const LaplacianBundle& bundle, const Observation& obs, const QuantityOfInterest& qoi,
                const ModelParams& params, LwceOptions options = {})
        : bundle_(&bundle), obs_(&obs), params_(params), options_(options) {
        params.validate();
        detail::check_observation(bundle, obs.labels);
        if (!(options_.multiplier_min > 0.0 && options_.multiplier_max > options_.multiplier_min) ||
            options_.grid < 2)
            throw InvalidArgument("invalid multiplier grid");
        const std::size_t N = bundle.size();
        Q_ = qoi.materialize(N, obs.labels);
        gram_ = Q_.transpose() * Q_;
        unlabeled_ = obs.labels.complement(N);
        y_sq_ = obs.values.squaredNorm();

        const double a = std::log(options_.multiplier_min), b = std::log(options_.multiplier_max);
        for (std::size_t k = 0; k < options_.grid; ++k) {
            const double c = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(options_.grid - 1));
            cache_.push_back(factor_at(c));
        }
    }

    const Eigen::MatrixXd& qoi_matrix() const noexcept { return Q_; }
    std::size_t qoi_rows() const noexcept { return static_cast<std::size_t>(Q_.rows()); }

    /// γ(c, d) by a dense solve, +inf where S is not positive semidefinite or
    /// w leaves its range.
    double gamma_direct(const Eigen::VectorXd& z, double c, double d) const {
        check_z(z);
        const Eigen::MatrixXd S = constraint(c, d);
        const Eigen::VectorXd w = rhs(z, d);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
        const Eigen::VectorXd& ev = eig.eigenvalues();
        const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
        const double tol = 1e-12 * scale * static_cast<double>(ev.size());
        if (ev(0) < -tol) return detail::kInf;
        const Eigen::VectorXd proj = eig.eigenvectors().transpose() * w;
        double quad = 0.0;
        for (Eigen::Index k = 0; k < ev.size(); ++k) {
            if (ev(k) <= tol) {
                if (std::abs(proj(k)) > 1e-9 * std::max(1.0, w.norm())) return detail::kInf;
                continue;
            }
            quad += proj(k) * proj(k) / ev(k);
        }
        return affine_part(z, c, d) + quad;
    }

    /// λ_min of the certifying block matrix [[S, w], [w^T, γ - ||z||^2 - c eps^2 + d(||y||^2 - eta^2)]].
    double certificate_min_eig(const Eigen::VectorXd& z, double c, double d, double gamma) const {
        check_z(z);
        const auto N = static_cast<Eigen::Index>(bundle_->size());
        Eigen::MatrixXd B(N + 1, N + 1);
        B.topLeftCorner(N, N) = constraint(c, d);
        const Eigen::VectorXd w = rhs(z, d);
        B.topRightCorner(N, 1) = w;
        B.bottomLeftCorner(1, N) = w.transpose();
        B(N, N) = gamma - affine_part(z, c, d);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B, Eigen::EigenvaluesOnly);
        return eig.eigenvalues()(0);
    }

    /// Minimizes γ over the multiplier box: a logarithmic grid in c with the
    /// one-dimensional convex problem in d solved at each node, then a
    /// golden-section refinement in log c around the best node.
    LwceBoundResult bound(const Eigen::VectorXd& z) const {
        check_z(z);
        const Eigen::VectorXd qz = Q_.transpose() * z;
        const double z_sq = z.squaredNorm();
        if (Q_.size() == 0 || Q_.cwiseAbs().maxCoeff() == 0.0) return {z_sq, 0.0, 0.0, true};

        LwceBoundResult best;
        std::size_t best_k = cache_.size();
        for (std::size_t k = 0; k < cache_.size(); ++k) {
            const LwceBoundResult r = minimize_d(cache_[k], qz, z_sq);
            if (r.gamma < best.gamma) best = r, best_k = k;
        }
        if (best_k == cache_.size()) return best;

        const double a = std::log(options_.multiplier_min), b = std::log(options_.multiplier_max);
        const double step = (b - a) / static_cast<double>(options_.grid - 1);
        const double lc = std::log(best.c_star);
        LwceBoundResult refined = best;
        auto f = [&](double log_c) {
            const LwceBoundResult r = minimize_d(factor_at(std::exp(log_c)), qz, z_sq);
            if (r.gamma < refined.gamma) refined = r;
            return r.gamma;
        };
        detail::golden_section(f, std::max(a, lc - step), std::min(b, lc + step), 1e-6);
        return refined;
    }

private:
    struct CFactor {
        double c = 0.0;
        bool usable = false;
        Eigen::LLT<Eigen::MatrixXd> uu;   // T_uu
        Eigen::MatrixXd T_lu;             // n_ℓ x n_u
        Eigen::VectorXd theta;            // eigenvalues of M(c)
        Eigen::MatrixXd U;                // eigenvectors of M(c)
        Eigen::VectorXd Uy;               // U^T y
    };

    void check_z(const Eigen::VectorXd& z) const {
        if (z.size() != Q_.rows()) throw InvalidArgument("z must have one entry per row of Q");
    }

    Eigen::MatrixXd constraint(double c, double d) const {
        Eigen::MatrixXd S = c * bundle_->laplacian - gram_;
        for (std::size_t v : obs_->labels.vertices()) S(v, v) += d;
        return S;
    }

    Eigen::VectorXd rhs(const Eigen::VectorXd& z, double d) const {
        return Q_.transpose() * z - d * obs_->labels.scatter(obs_->values, bundle_->size());
    }

    double affine_part(const Eigen::VectorXd& z, double c, double d) const {
        const double e2 = params_.epsilon * params_.epsilon, h2 = params_.eta * params_.eta;
        return z.squaredNorm() + c * e2 - d * (y_sq_ - h2);
    }

    CFactor factor_at(double c) const {
        CFactor f;
        f.c = c;
        const LabelSet& labels = obs_->labels;
        const auto nu = static_cast<Eigen::Index>(unlabeled_.size());
        const auto nl = static_cast<Eigen::Index>(labels.size());
        auto T = [&](std::size_t i, std::size_t j) { return c * bundle_->laplacian(i, j) - gram_(i, j); };

        Eigen::MatrixXd Tll(nl, nl);
        for (Eigen::Index a = 0; a < nl; ++a)
            for (Eigen::Index b = 0; b < nl; ++b) Tll(a, b) = T(labels[a], labels[b]);
        Eigen::MatrixXd M = Tll;
        if (nu > 0) {
            Eigen::MatrixXd Tuu(nu, nu);
            f.T_lu.resize(nl, nu);
            for (Eigen::Index a = 0; a < nu; ++a) {
                for (Eigen::Index b = 0; b < nu; ++b) Tuu(a, b) = T(unlabeled_[a], unlabeled_[b]);
                for (Eigen::Index k = 0; k < nl; ++k) f.T_lu(k, a) = T(labels[k], unlabeled_[a]);
            }
            f.uu.compute(Tuu);
            if (f.uu.info() != Eigen::Success) return f;
            const Eigen::VectorXd piv = f.uu.matrixLLT().diagonal();
            if (piv.minCoeff() <= 1e-7 * std::sqrt(std::max(1.0, Tuu.diagonal().cwiseAbs().maxCoeff()))) return f;
            M -= f.T_lu * f.uu.solve(Eigen::MatrixXd(f.T_lu.transpose()));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
        f.theta = eig.eigenvalues();
        f.U = eig.eigenvectors();
        f.Uy = f.U.transpose() * obs_->values;
        f.usable = true;
        return f;
    }

    /// γ(c, d) from a cached c-factorization, with qz = Q*z.
    struct PerZ {
        double base = 0.0;      // w_u^T T_uu^{-1} w_u
        Eigen::VectorXd Up;     // U^T p
    };

    PerZ per_z(const CFactor& f, const Eigen::VectorXd& qz) const {
        PerZ out;
        const auto nl = static_cast<Eigen::Index>(obs_->labels.size());
        Eigen::VectorXd p(nl);
        for (Eigen::Index k = 0; k < nl; ++k) p(k) = qz(obs_->labels[k]);
        if (!unlabeled_.empty()) {
            Eigen::VectorXd wu(static_cast<Eigen::Index>(unlabeled_.size()));
            for (std::size_t a = 0; a < unlabeled_.size(); ++a) wu(a) = qz(unlabeled_[a]);
            const Eigen::VectorXd sol = f.uu.solve(wu);
            out.base = wu.dot(sol);
            p -= f.T_lu * sol;
        }
        out.Up = f.U.transpose() * p;
        return out;
    }

    double gamma_at(const CFactor& f, const PerZ& pz, double z_sq, double d) const {
        const double e2 = params_.epsilon * params_.epsilon, h2 = params_.eta * params_.eta;
        const double scale = std::max(1.0, f.theta.cwiseAbs().maxCoeff() + d);
        double quad = pz.base;
        for (Eigen::Index k = 0; k < f.theta.size(); ++k) {
            const double denom = f.theta(k) + d;
            const double num = pz.Up(k) - d * f.Uy(k);
            if (denom <= 1e-12 * scale) {
                if (denom < -1e-12 * scale || std::abs(num) > 1e-9 * (1.0 + std::abs(pz.Up(k)))) return detail::kInf;
                continue;
            }
            quad += num * num / denom;
        }
        return z_sq + f.c * e2 - d * (y_sq_ - h2) + quad;
    }

    LwceBoundResult minimize_d(const CFactor& f, const Eigen::VectorXd& qz, double z_sq) const {
        LwceBoundResult r;
        if (!f.usable) return r;
        const double theta_min = f.theta.size() ? f.theta(0) : 0.0;
        if (-theta_min >= options_.multiplier_max) return r;
        const PerZ pz = per_z(f, qz);

        // Feasible d form an interval (-θ_min, d_max]; γ is convex on it.
        const double d_lo = std::max(options_.multiplier_min, -theta_min * (1.0 + 1e-12) + 1e-300);
        const double a = std::log(d_lo), b = std::log(options_.multiplier_max);
        const std::size_t n = options_.grid;
        double best_ld = a, best_g = detail::kInf;
        for (std::size_t k = 0; k < n; ++k) {
            const double ld = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
            const double g = gamma_at(f, pz, z_sq, std::exp(ld));
            if (g < best_g) best_g = g, best_ld = ld;
        }
        if (!std::isfinite(best_g)) return r;
        const double step = (b - a) / static_cast<double>(n - 1);
        const detail::ScalarMin m = detail::golden_section(
            [&](double ld) { return gamma_at(f, pz, z_sq, std::exp(ld)); }, std::max(a, best_ld - step),
            std::min(b, best_ld + step), 1e-9);
        r.feasible = true;
        r.c_star = f.c;
        if (m.value < best_g) {
            r.gamma = m.value;
            r.d_star = std::exp(m.x);
        } else {
            r.gamma = best_g;
            r.d_star = std::exp(best_ld);
        }
        return r;
    }

    const LaplacianBundle* bundle_;
    const Observation* obs_;
    ModelParams params_;
    LwceOptions options_;
    Eigen::MatrixXd Q_;
    Eigen::MatrixXd gram_;
    std::vector<std::size_t> unlabeled_;
    double y_sq_ = 0.0;
    std::vector<CFactor> cache_;
};

inline LwceBoundResult lwce_upper_bound(const LaplacianBundle& bundle, const Observation& obs,
                                        const QuantityOfInterest& qoi, const Eigen::VectorXd& z,
                                        const ModelParams& params, const LwceOptions& options = {}) {
    return LwceProblem(bundle, obs, qoi, params, options).bound(z);
}

/// Bound evaluated at z = Q f_tau for each tau, in increasing tau order.
inline std::vector<LwceCurvePoint> lwce_curve(const LaplacianBundle& bundle, const Observation& obs,
                                              const QuantityOfInterest& qoi, const ModelParams& params,
                                              std::span<const double> tau_grid, const LwceOptions& options = {}) {
    std::vector<double> taus(tau_grid.begin(), tau_grid.end());
    for (double t : taus) detail::check_tau(t);
    std::sort(taus.begin(), taus.end());
    const LwceProblem problem(bundle, obs, qoi, params, options);
    std::vector<LwceCurvePoint> out;
    out.reserve(taus.size());
    for (double t : taus) {
        const Eigen::VectorXd z = apply_qoi(qoi, regularize(bundle, obs, t), obs.labels);
        const LwceBoundResult r = problem.bound(z);
        out.push_back({t, r.gamma, r.c_star, r.d_star});
    }
    return out;
}

}  // namespace gsor
