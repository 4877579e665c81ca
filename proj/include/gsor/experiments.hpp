#pragma once

// Semi-synthetic experiments: smooth random signals on a fixed graph, noisy
// labels on growing label sets, and the comparison of recovery methods.

#include <gsor/error.hpp>
#include <gsor/graph.hpp>
#include <gsor/io.hpp>
#include <gsor/param_select.hpp>
#include <gsor/random.hpp>
#include <gsor/recovery.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace gsor {

inline constexpr std::uint64_t kSignalStream = 1;
inline constexpr std::uint64_t kLabelStream = 2;
inline constexpr std::uint64_t kNoiseStreamBase = 1000;

/// f = χc with c_k ~ N(0, 1/λ_k) on the nonzero eigenvalues and c_k = 0 on
/// the kernel; no normalization.
inline Eigen::VectorXd synth_signal_raw(const LaplacianBundle& bundle, std::uint64_t seed) {
    Rng rng(seed);
    const auto N = static_cast<Eigen::Index>(bundle.size());
    Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
    for (Eigen::Index k = 0; k < N; ++k)
        if (!bundle.is_zero_eigenvalue(k)) c(k) = rng.normal() / std::sqrt(bundle.eigenvalues(k));
    return bundle.eigenvectors * c;
}

/// Affine map onto [0, 1]; a constant vector maps to zeros.
inline Eigen::VectorXd minmax_normalize(const Eigen::VectorXd& f) {
    if (f.size() == 0) return f;
    const double lo = f.minCoeff(), hi = f.maxCoeff();
    if (!(hi > lo)) return Eigen::VectorXd::Zero(f.size());
    return (f.array() - lo) / (hi - lo);
}

inline Eigen::VectorXd synth_signal(const LaplacianBundle& bundle, std::uint64_t seed) {
    return minmax_normalize(synth_signal_raw(bundle, seed));
}

/// Noise on the labeled vertices with ||e|| = eta. A vector that is zero
/// before scaling (one label under uniform_centered, say) is returned as zero
/// with a warning.
inline Eigen::VectorXd gen_noise(NoiseModel model, double eta, std::uint64_t seed, const LabelSet& labels,
                                 const Eigen::VectorXd& degrees, Warnings* warnings = nullptr) {
    if (!(std::isfinite(eta) && eta > 0.0)) throw InvalidArgument("eta must be positive");
    const auto n = static_cast<Eigen::Index>(labels.size());
    Eigen::VectorXd e(n);
    switch (model) {
        case NoiseModel::uniform_centered: {
            Rng rng(seed);
            for (Eigen::Index k = 0; k < n; ++k) e(k) = rng.uniform();
            e.array() -= e.mean();
            break;
        }
        case NoiseModel::degree_proportional:
            for (Eigen::Index k = 0; k < n; ++k) e(k) = degrees(labels[k]);
            break;
        case NoiseModel::inverse_degree_proportional: {
            std::size_t isolated = 0;
            for (Eigen::Index k = 0; k < n; ++k) {
                const double d = degrees(labels[k]);
                if (d > 0.0) {
                    e(k) = 1.0 / d;
                } else {
                    e(k) = 0.0;
                    ++isolated;
                }
            }
            if (isolated > 0)
                warn(warnings, std::to_string(isolated) + " isolated labeled vertex(es) get zero inverse-degree noise");
            break;
        }
    }
    const double norm = e.norm();
    if (!(norm > 0.0)) {
        warn(warnings, "noise vector is zero before scaling; using e = 0");
        return Eigen::VectorXd::Zero(n);
    }
    return e * (eta / norm);
}

/// n points i/(n+1), i = 1..n.
inline std::vector<double> uniform_tau_grid(std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i + 1) / static_cast<double>(n + 1);
    return g;
}

struct GridSearchResult {
    double tau = 0.0;
    double error = std::numeric_limits<double>::infinity();
};

/// Best tau on the grid for the true prediction error ||Q f_tau - truth||;
/// ties go to the smaller tau. Grid values 0 and 1 mean the limiting maps.
inline GridSearchResult grid_search_best(const LaplacianBundle& bundle, const Observation& obs,
                                         const QuantityOfInterest& qoi, const Eigen::VectorXd& truth,
                                         std::span<const double> tau_grid) {
    if (tau_grid.empty()) throw InvalidArgument("tau grid must not be empty");
    GridSearchResult best;
    for (double tau : tau_grid) {
        if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("tau grid values must lie in [0, 1]");
        const double err = (apply_qoi(qoi, regularize_closed(bundle, obs, tau), obs.labels) - truth).norm();
        if (err < best.error || (err == best.error && tau < best.tau)) best = {tau, err};
    }
    return best;
}

/// One (trial, n_labeled) instance of a label-growth run.
struct InstanceRecord {
    std::size_t trial = 0;
    std::size_t n_labeled = 0;
    std::uint64_t seed = 0;
    double epsilon = 0.0;        // smoothness budget passed to the methods
    double eta = 0.0;            // label-noise budget passed to the methods
    double signal_energy = 0.0;  // ||L^{1/2} f|| of the normalized signal
    double noise_norm = 0.0;
    bool model_consistent = false;  // signal_energy <= epsilon and noise_norm <= eta
};

struct LabelGrowthResult {
    std::vector<ResultRow> rows;
    std::vector<InstanceRecord> instances;
    Warnings warnings;
};

struct RunOptions {
    std::size_t jobs = 1;
};

inline double epsilon_from_rule(const EpsRule& rule, double signal_energy) {
    switch (rule.kind) {
        case EpsRuleKind::literal_squared: return 2.0 * signal_energy * signal_energy;
        case EpsRuleKind::linear_2x: return 2.0 * signal_energy;
        case EpsRuleKind::explicit_value: return rule.value;
    }
    return 0.0;
}

namespace detail {

struct TrialOutput {
    std::vector<ResultRow> rows;
    std::vector<InstanceRecord> instances;
    Warnings warnings;
};

inline bool method_enabled(const RunConfig& cfg, Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

inline TrialOutput run_trial(const RunConfig& cfg, const LaplacianBundle& bundle, std::size_t trial) {
    using Clock = std::chrono::steady_clock;
    TrialOutput out;
    const std::size_t N = bundle.size();
    const std::uint64_t seed = cfg.seed ^ static_cast<std::uint64_t>(trial);
    const std::string tag = "trial " + std::to_string(trial) + ": ";

    const Eigen::VectorXd f = synth_signal(bundle, stream_seed(seed, kSignalStream));
    const double energy = bundle.dirichlet_norm(f);
    const double epsilon = epsilon_from_rule(cfg.eps_rule, energy);
    const double eta_used = cfg.eta * cfg.overestimation_factor;
    if (!(epsilon > 0.0)) {
        warn(&out.warnings, tag + "signal is constant, so epsilon is zero; trial skipped");
        return out;
    }
    const ModelParams params{epsilon, eta_used};
    Rng label_rng(stream_seed(seed, kLabelStream));
    const std::vector<std::size_t> order = label_rng.permutation(N);
    const QuantityOfInterest qoi = QuantityOfInterest::unlabeled();
    const std::vector<double> base_grid = uniform_tau_grid(cfg.tau_grid_size);

    for (std::size_t nl : cfg.n_labeled_grid) {
        LabelSet labels(std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nl)));
        try {
            validate_observability(bundle, labels.vertices());
        } catch (const ObservabilityError& e) {
            warn(&out.warnings, tag + "n_labeled " + std::to_string(nl) + " skipped (" + e.what() + ")");
            continue;
        }
        Warnings noise_warnings;
        const Eigen::VectorXd e =
            gen_noise(cfg.noise_model, cfg.eta, stream_seed(seed, kNoiseStreamBase + nl), labels, bundle.degree,
                      &noise_warnings);
        for (auto& w : noise_warnings) warn(&out.warnings, tag + w);
        const Observation obs(labels, labels.restrict(f) + e);
        const Eigen::VectorXd truth = apply_qoi(qoi, f, labels);

        InstanceRecord rec;
        rec.trial = trial;
        rec.n_labeled = nl;
        rec.seed = seed;
        rec.epsilon = epsilon;
        rec.eta = eta_used;
        rec.signal_energy = energy;
        rec.noise_norm = e.norm();
        rec.model_consistent = energy <= epsilon && rec.noise_norm <= eta_used;
        out.instances.push_back(rec);

        auto row = [&](Method m, double tau, const Eigen::VectorXd& estimate, double bound, Clock::time_point t0) {
            ResultRow r;
            r.n_labeled = nl;
            r.method = to_string(m);
            r.trial = trial;
            r.seed = seed;
            r.tau = tau;
            r.prediction_error = (estimate - truth).norm();
            r.certified_bound = bound;
            r.runtime_ms = cfg.record_runtime
                               ? std::chrono::duration<double, std::milli>(Clock::now() - t0).count()
                               : 0.0;
            return r;
        };

        std::vector<ResultRow> rows;
        if (method_enabled(cfg, Method::global_opt)) {
            const auto t0 = Clock::now();
            const GlobalSolution g = solve_global(bundle, labels, qoi, params);
            rows.push_back(row(Method::global_opt, g.tau_flat, g.recovery_matrix * obs.values, g.gwce_bound(), t0));
        }
        if (method_enabled(cfg, Method::local_opt)) {
            const auto t0 = Clock::now();
            const LocalSolution l = solve_local(bundle, obs, params);
            rows.push_back(row(Method::local_opt, l.tau_natural, apply_qoi(qoi, l.f_hat, labels),
                               std::numeric_limits<double>::quiet_NaN(), t0));
        }
        if (method_enabled(cfg, Method::harmonic)) {
            const auto t0 = Clock::now();
            const Eigen::MatrixXd R = qoi.materialize(N, labels) * harmonic_matrix(bundle, labels);
            const double bound = evaluate_gwce_linear(R, bundle, labels, qoi, params);
            rows.push_back(row(Method::harmonic, 1.0, R * obs.values, bound, t0));
        }
        if (method_enabled(cfg, Method::grid_search)) {
            const auto t0 = Clock::now();
            GridSearchResult best = grid_search_best(bundle, obs, qoi, truth, base_grid);
            // The other methods' parameters are part of the search space, so
            // their realized errors are compared directly.
            for (const ResultRow& r : rows)
                if (r.prediction_error < best.error || (r.prediction_error == best.error && r.tau < best.tau))
                    best = {r.tau, r.prediction_error};
            ResultRow r = row(Method::grid_search, best.tau, truth, std::numeric_limits<double>::quiet_NaN(), t0);
            r.prediction_error = best.error;
            rows.push_back(r);
        }
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    }
    return out;
}

}  // namespace detail

/// Runs every trial of the label-growth protocol. Trial t uses the seed
/// config.seed XOR t; the signal, the label order and the noise at each
/// n_labeled come from separate sub-streams of it. Output does not depend on
/// `jobs`.
inline LabelGrowthResult run_label_growth(const RunConfig& cfg, const LaplacianBundle& bundle,
                                          const RunOptions& options = {}) {
    cfg.validate_for(bundle.size());
    std::vector<detail::TrialOutput> outputs(cfg.trials);
    std::vector<std::exception_ptr> errors(cfg.trials);
    const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, cfg.trials));

    auto work = [&](std::size_t worker) {
        for (std::size_t t = worker; t < cfg.trials; t += jobs) {
            try {
                outputs[t] = detail::run_trial(cfg, bundle, t);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    LabelGrowthResult result;
    for (auto& o : outputs) {
        result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
        result.instances.insert(result.instances.end(), o.instances.begin(), o.instances.end());
        result.warnings.insert(result.warnings.end(), o.warnings.begin(), o.warnings.end());
    }
    sort_rows(result.rows);
    return result;
}

}  // namespace gsor
