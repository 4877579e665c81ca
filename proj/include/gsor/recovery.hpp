#pragma once

// The regularization map f_tau = argmin (1-tau)||L^{1/2} f||^2 + tau||Λf - y||^2,
// its two limits, and the observation / quantity-of-interest types.

#include <gsor/error.hpp>
#include <gsor/graph.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace gsor {

/// Ordered set of distinct labeled vertices V_ℓ. The selection map Λ keeps
/// coordinates in this stored order, so ΛΛ* is the identity.
class LabelSet {
public:
    LabelSet() = default;

    explicit LabelSet(std::vector<std::size_t> vertices) : vertices_(std::move(vertices)) {
        if (vertices_.empty()) throw InvalidArgument("labeled set must be nonempty");
        std::vector<std::size_t> sorted = vertices_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw InvalidArgument("labeled vertices must be distinct");
    }

    std::size_t size() const noexcept { return vertices_.size(); }
    std::span<const std::size_t> vertices() const noexcept { return vertices_; }
    std::size_t operator[](std::size_t k) const { return vertices_[k]; }

    void check_bounds(std::size_t num_vertices) const {
        for (std::size_t v : vertices_)
            if (v >= num_vertices)
                throw InvalidArgument("labeled vertex " + std::to_string(v) + " out of range for " +
                                      std::to_string(num_vertices) + " vertices");
    }

    /// Λf.
    Eigen::VectorXd restrict(const Eigen::VectorXd& f) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
        for (std::size_t k = 0; k < size(); ++k) out(k) = f(vertices_[k]);
        return out;
    }

    /// Λ*y: y scattered into an N-vector, zero elsewhere.
    Eigen::VectorXd scatter(const Eigen::VectorXd& y, std::size_t num_vertices) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_vertices));
        for (std::size_t k = 0; k < size(); ++k) out(vertices_[k]) = y(k);
        return out;
    }

    /// Diagonal of Λ*Λ.
    Eigen::VectorXd mask(std::size_t num_vertices) const {
        return scatter(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(size())), num_vertices);
    }

    /// V_u in increasing order.
    std::vector<std::size_t> complement(std::size_t num_vertices) const {
        std::vector<bool> is_labeled(num_vertices, false);
        for (std::size_t v : vertices_) is_labeled[v] = true;
        std::vector<std::size_t> out;
        out.reserve(num_vertices - std::min(num_vertices, size()));
        for (std::size_t v = 0; v < num_vertices; ++v)
            if (!is_labeled[v]) out.push_back(v);
        return out;
    }

private:
    std::vector<std::size_t> vertices_;
};

/// Labeled vertices together with the observed (noisy) values y.
struct Observation {
    LabelSet labels;
    Eigen::VectorXd values;

    Observation(LabelSet l, Eigen::VectorXd y) : labels(std::move(l)), values(std::move(y)) {
        if (static_cast<std::size_t>(values.size()) != labels.size())
            throw InvalidArgument("observation values must match the labeled set size");
        if (!values.allFinite()) throw InvalidArgument("observation values must be finite");
    }
};

/// Smoothness budget epsilon and label-error budget eta.
struct ModelParams {
    double epsilon = 1.0;
    double eta = 1.0;

    void validate() const {
        if (!(std::isfinite(epsilon) && epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
        if (!(std::isfinite(eta) && eta > 0.0)) throw InvalidArgument("eta must be positive");
    }
};

/// The linear map Q: R^N -> R^n to be estimated.
class QuantityOfInterest {
public:
    struct Unlabeled {};
    struct Full {};
    struct Average {};
    struct Vertex {
        std::size_t index;
    };
    struct Matrix {
        Eigen::MatrixXd map;
    };
    using Variant = std::variant<Unlabeled, Full, Average, Vertex, Matrix>;

    static QuantityOfInterest unlabeled() { return QuantityOfInterest(Unlabeled{}); }
    static QuantityOfInterest full() { return QuantityOfInterest(Full{}); }
    static QuantityOfInterest average() { return QuantityOfInterest(Average{}); }
    static QuantityOfInterest vertex(std::size_t i) { return QuantityOfInterest(Vertex{i}); }
    static QuantityOfInterest matrix(Eigen::MatrixXd m) { return QuantityOfInterest(Matrix{std::move(m)}); }

    /// Parses "unlabeled", "full", "average" or "vertex:<i>".
    static QuantityOfInterest parse(std::string_view text) {
        if (text == "unlabeled") return unlabeled();
        if (text == "full") return full();
        if (text == "average") return average();
        if (text.starts_with("vertex:")) {
            std::string_view digits = text.substr(7);
            std::size_t index = 0;
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
            if (ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty()) return vertex(index);
        }
        throw InvalidArgument("unknown quantity of interest '" + std::string(text) +
                              "' (expected unlabeled|full|average|vertex:i)");
    }

    const Variant& variant() const noexcept { return variant_; }

    /// n x N matrix of Q.
    Eigen::MatrixXd materialize(std::size_t num_vertices, const LabelSet& labels) const {
        const auto N = static_cast<Eigen::Index>(num_vertices);
        return std::visit(
            [&](const auto& q) -> Eigen::MatrixXd {
                using T = std::decay_t<decltype(q)>;
                if constexpr (std::is_same_v<T, Unlabeled>) {
                    const auto rows = labels.complement(num_vertices);
                    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), N);
                    for (std::size_t r = 0; r < rows.size(); ++r) m(r, rows[r]) = 1.0;
                    return m;
                } else if constexpr (std::is_same_v<T, Full>) {
                    return Eigen::MatrixXd::Identity(N, N);
                } else if constexpr (std::is_same_v<T, Average>) {
                    return Eigen::MatrixXd::Constant(1, N, 1.0 / static_cast<double>(num_vertices));
                } else if constexpr (std::is_same_v<T, Vertex>) {
                    if (q.index >= num_vertices) throw InvalidArgument("quantity-of-interest vertex out of range");
                    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1, N);
                    m(0, q.index) = 1.0;
                    return m;
                } else {
                    if (q.map.cols() != N) throw InvalidArgument("quantity-of-interest matrix has wrong column count");
                    return q.map;
                }
            },
            variant_);
    }

private:
    explicit QuantityOfInterest(Variant v) : variant_(std::move(v)) {}
    Variant variant_;
};

inline Eigen::VectorXd apply_qoi(const QuantityOfInterest& q, const Eigen::VectorXd& f, const LabelSet& labels) {
    const auto n = static_cast<std::size_t>(f.size());
    return std::visit(
        [&](const auto& v) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, QuantityOfInterest::Unlabeled>) {
                const auto rows = labels.complement(n);
                Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) out(r) = f(rows[r]);
                return out;
            } else if constexpr (std::is_same_v<T, QuantityOfInterest::Full>) {
                return f;
            } else if constexpr (std::is_same_v<T, QuantityOfInterest::Average>) {
                return Eigen::VectorXd::Constant(1, f.mean());
            } else if constexpr (std::is_same_v<T, QuantityOfInterest::Vertex>) {
                if (v.index >= n) throw InvalidArgument("quantity-of-interest vertex out of range");
                return Eigen::VectorXd::Constant(1, f(v.index));
            } else {
                if (v.map.cols() != f.size()) throw InvalidArgument("dimension mismatch applying quantity of interest");
                return v.map * f;
            }
        },
        q.variant());
}

namespace detail {

inline void check_observation(const LaplacianBundle& bundle, const LabelSet& labels) {
    labels.check_bounds(bundle.size());
    validate_observability(bundle, labels.vertices());
}

/// c L + d Λ*Λ, positive definite under observability when c, d > 0.
inline Eigen::MatrixXd weighted_system(const LaplacianBundle& bundle, const LabelSet& labels, double c, double d) {
    Eigen::MatrixXd A = c * bundle.laplacian;
    for (std::size_t v : labels.vertices()) A(v, v) += d;
    return A;
}

inline Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& A) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw Error("regularization system is not positive definite");
    return llt;
}

inline void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in the open interval (0, 1)");
}

}  // namespace detail

/// Solves (c L + d Λ*Λ) f = d Λ*y, i.e. the regularizer at tau = d/(c+d)
/// expressed through unnormalized weights. Requires c, d > 0.
inline Eigen::VectorXd regularize_weighted(const LaplacianBundle& bundle, const Observation& obs, double c, double d) {
    if (!(c > 0.0 && d > 0.0 && std::isfinite(c) && std::isfinite(d)))
        throw InvalidArgument("regularization weights must be positive and finite");
    detail::check_observation(bundle, obs.labels);
    const Eigen::MatrixXd A = detail::weighted_system(bundle, obs.labels, c, d);
    const auto llt = detail::factor(A);
    const Eigen::VectorXd rhs = d * obs.labels.scatter(obs.values, bundle.size());
    Eigen::VectorXd f = llt.solve(rhs);
    // One step of iterative refinement keeps the normal-equation residual at
    // the 1e-10 level for poorly scaled weights.
    f += llt.solve(rhs - A * f);
    return f;
}

inline Eigen::VectorXd regularize(const LaplacianBundle& bundle, const Observation& obs, double tau) {
    detail::check_tau(tau);
    return regularize_weighted(bundle, obs, 1.0 - tau, tau);
}

/// N x n_ℓ matrix of the linear map y -> f_tau.
inline Eigen::MatrixXd regularizer_matrix(const LaplacianBundle& bundle, const LabelSet& labels, double tau) {
    detail::check_tau(tau);
    detail::check_observation(bundle, labels);
    const auto llt = detail::factor(detail::weighted_system(bundle, labels, 1.0 - tau, tau));
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bundle.size()),
                                                static_cast<Eigen::Index>(labels.size()));
    for (std::size_t k = 0; k < labels.size(); ++k) rhs(labels[k], k) = tau;
    return llt.solve(rhs);
}

/// tau -> 0 limit: the componentwise mean of the observed values.
inline Eigen::VectorXd limit_tau_zero(const LaplacianBundle& bundle, const Observation& obs) {
    detail::check_observation(bundle, obs.labels);
    std::vector<double> sum(bundle.num_components, 0.0);
    std::vector<std::size_t> count(bundle.num_components, 0);
    for (std::size_t k = 0; k < obs.labels.size(); ++k) {
        const std::size_t c = bundle.component_of[obs.labels[k]];
        sum[c] += obs.values(k);
        ++count[c];
    }
    Eigen::VectorXd f(static_cast<Eigen::Index>(bundle.size()));
    for (std::size_t v = 0; v < bundle.size(); ++v) {
        const std::size_t c = bundle.component_of[v];
        f(v) = sum[c] / static_cast<double>(count[c]);
    }
    return f;
}

/// N x n_ℓ matrix of the harmonic (tau -> 1) map: labels copied, unlabeled
/// block solved from L_uu f_u = -L_uℓ y.
inline Eigen::MatrixXd harmonic_matrix(const LaplacianBundle& bundle, const LabelSet& labels) {
    detail::check_observation(bundle, labels);
    const std::size_t N = bundle.size();
    const auto nl = static_cast<Eigen::Index>(labels.size());
    const auto unl = labels.complement(N);
    const auto nu = static_cast<Eigen::Index>(unl.size());

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), nl);
    for (Eigen::Index k = 0; k < nl; ++k) H(labels[k], k) = 1.0;
    if (nu == 0) return H;

    Eigen::MatrixXd Luu(nu, nu), Lul(nu, nl);
    for (Eigen::Index a = 0; a < nu; ++a) {
        for (Eigen::Index b = 0; b < nu; ++b) Luu(a, b) = bundle.laplacian(unl[a], unl[b]);
        for (Eigen::Index k = 0; k < nl; ++k) Lul(a, k) = bundle.laplacian(unl[a], labels[k]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Luu);
    // Observability makes the Dirichlet block L_uu positive definite.
    if (llt.info() != Eigen::Success) throw Error("unlabeled Laplacian block is singular");
    Eigen::MatrixXd Fu = llt.solve(-Lul);
    for (Eigen::Index a = 0; a < nu; ++a) H.row(unl[a]) = Fu.row(a);
    return H;
}

/// Minimizer of ||L^{1/2} f|| subject to Λf = y.
inline Eigen::VectorXd harmonic_interpolate(const LaplacianBundle& bundle, const Observation& obs) {
    return harmonic_matrix(bundle, obs.labels) * obs.values;
}

/// f_tau for tau in the closed interval [0, 1], the endpoints meaning the
/// two limiting maps.
inline Eigen::VectorXd regularize_closed(const LaplacianBundle& bundle, const Observation& obs, double tau) {
    if (tau <= 0.0) return limit_tau_zero(bundle, obs);
    if (tau >= 1.0) return harmonic_interpolate(bundle, obs);
    return regularize(bundle, obs, tau);
}

/// Same as regularizer_matrix but accepts the closed interval.
inline Eigen::MatrixXd regularizer_matrix_closed(const LaplacianBundle& bundle, const LabelSet& labels, double tau) {
    if (tau >= 1.0) return harmonic_matrix(bundle, labels);
    if (tau <= 0.0) {
        detail::check_observation(bundle, labels);
        std::vector<std::size_t> count(bundle.num_components, 0);
        for (std::size_t v : labels.vertices()) ++count[bundle.component_of[v]];
        Eigen::MatrixXd M(static_cast<Eigen::Index>(bundle.size()), static_cast<Eigen::Index>(labels.size()));
        for (std::size_t v = 0; v < bundle.size(); ++v)
            for (std::size_t k = 0; k < labels.size(); ++k)
                M(v, k) = bundle.component_of[v] == bundle.component_of[labels[k]]
                              ? 1.0 / static_cast<double>(count[bundle.component_of[v]])
                              : 0.0;
        return M;
    }
    return regularizer_matrix(bundle, labels, tau);
}

}  // namespace gsor
