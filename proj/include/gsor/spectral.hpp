#pragma once

// Eigenvalue oracles behind the two-variable semidefinite programs: the
// constraint λ_min(cL + dΛ*Λ - Q*Q), generalized extreme eigenvalues and the
// operator norm of B over the unit Dirichlet-energy ball.

#include <gsor/error.hpp>
#include <gsor/graph.hpp>
#include <gsor/recovery.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace gsor {

/// Everything needed to evaluate the constraint matrix cL + dΛ*Λ - Q*Q.
class FeasibilityContext {
public:
    FeasibilityContext(const LaplacianBundle& bundle, const LabelSet& labels, const QuantityOfInterest& qoi)
        : bundle_(&bundle),
          mask_(labels.mask(bundle.size())),
          qoi_matrix_(qoi.materialize(bundle.size(), labels)) {
        gram_ = qoi_matrix_.transpose() * qoi_matrix_;
    }

    const LaplacianBundle& bundle() const noexcept { return *bundle_; }
    const Eigen::VectorXd& mask() const noexcept { return mask_; }
    const Eigen::MatrixXd& qoi_matrix() const noexcept { return qoi_matrix_; }
    /// Q*Q.
    const Eigen::MatrixXd& gram() const noexcept { return gram_; }

    Eigen::MatrixXd constraint_matrix(double c, double d) const {
        Eigen::MatrixXd S = c * bundle_->laplacian - gram_;
        S.diagonal() += d * mask_;
        return S;
    }

private:
    const LaplacianBundle* bundle_;
    Eigen::VectorXd mask_;
    Eigen::MatrixXd qoi_matrix_;
    Eigen::MatrixXd gram_;
};

/// λ_min(cL + dΛ*Λ - Q*Q).
inline double min_eig_constraint(const FeasibilityContext& ctx, double c, double d) {
    if (!(c >= 0.0 && d >= 0.0 && std::isfinite(c) && std::isfinite(d)))
        throw InvalidArgument("multipliers must be finite and nonnegative");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ctx.constraint_matrix(c, d), Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
}

inline double feasibility_tolerance(const FeasibilityContext& ctx, double c, double d) {
    return 1e-9 * (1.0 + c * ctx.bundle().lambda_max() + d);
}

inline bool is_feasible(const FeasibilityContext& ctx, double c, double d) {
    return min_eig_constraint(ctx, c, d) >= -feasibility_tolerance(ctx, c, d);
}

/// Largest λ with A v = λ M v, computed as λ_max(R^{-1} A R^{-T}) with M = R R^T.
inline double max_generalized_eig(const Eigen::MatrixXd& A, const Eigen::MatrixXd& M) {
    if (A.rows() != A.cols() || M.rows() != M.cols() || A.rows() != M.rows())
        throw InvalidArgument("generalized eigenproblem needs square matrices of equal size");
    if (A.rows() == 0) return 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    const double scale = M.diagonal().cwiseAbs().maxCoeff();
    if (llt.info() != Eigen::Success || !(scale > 0.0))
        throw InvalidArgument("generalized eigenproblem: M is not positive definite");
    const Eigen::VectorXd pivots = llt.matrixLLT().diagonal();
    if (pivots.minCoeff() * pivots.minCoeff() <= 1e-14 * scale)
        throw InvalidArgument("generalized eigenproblem: M is not positive definite");
    Eigen::MatrixXd X = llt.matrixL().solve(A);
    Eigen::MatrixXd C = llt.matrixL().solve(X.transpose());
    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(C.rows() - 1);
}

/// B χ_+ diag(λ_+^{-1/2}): the map B expressed on the whitened range of L.
/// Columns index the positive eigenpairs.
inline Eigen::MatrixXd whiten_on_range(const Eigen::MatrixXd& B, const LaplacianBundle& bundle) {
    const Eigen::Index k0 = static_cast<Eigen::Index>(bundle.num_zero_eigenvalues);
    const Eigen::Index kp = static_cast<Eigen::Index>(bundle.size()) - k0;
    Eigen::MatrixXd W = B * bundle.eigenvectors.rightCols(kp);
    for (Eigen::Index k = 0; k < kp; ++k) W.col(k) /= std::sqrt(bundle.eigenvalues(k0 + k));
    return W;
}

/// True when B annihilates ker(L) up to 1e-8 relative to the size of B.
inline bool vanishes_on_kernel(const Eigen::MatrixXd& B, const LaplacianBundle& bundle) {
    const Eigen::Index k0 = static_cast<Eigen::Index>(bundle.num_zero_eigenvalues);
    if (k0 == 0 || B.size() == 0) return true;
    const double leak = (B * bundle.eigenvectors.leftCols(k0)).cwiseAbs().maxCoeff();
    return leak <= 1e-8 * std::max(1.0, B.cwiseAbs().maxCoeff());
}

/// sup{ ||B f|| : ||L^{1/2} f|| <= 1 }, +inf when B sees ker(L).
inline double constrained_opnorm(const Eigen::MatrixXd& B, const LaplacianBundle& bundle) {
    if (B.cols() != static_cast<Eigen::Index>(bundle.size()))
        throw InvalidArgument("constrained_opnorm: column count must equal the vertex count");
    if (!vanishes_on_kernel(B, bundle)) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd W = whiten_on_range(B, bundle);
    if (W.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(W);
    return svd.singularValues()(0);
}

}  // namespace gsor
