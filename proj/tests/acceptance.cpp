// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

using namespace gsor;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct RandomInstance {
    Graph graph;
    LaplacianBundle bundle;
    LabelSet labels;
};

RandomInstance random_instance(Rng& rng, std::size_t n_lo, std::size_t n_hi, double p) {
    const std::size_t n = n_lo + rng.below(n_hi - n_lo + 1);
    Graph g = oracle::random_connected_graph(rng, n, p);
    LaplacianBundle b = build_laplacian(g);
    const std::size_t m = 1 + rng.below(std::max<std::size_t>(1, n - 1));
    LabelSet l = oracle::random_observable_labels(rng, b, m);
    return {std::move(g), std::move(b), std::move(l)};
}

double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
}

// 1. solve_global against the brute-force (c, d) grid.
Outcome sdp_reduction() {
    Rng rng(1001);
    double worst = 0.0, solver_time = 0.0;
    const auto t_all = Clock::now();
    for (int t = 0; t < 50; ++t) {
        const RandomInstance in = random_instance(rng, 3, 30, 0.15);
        const double eps = log_uniform(rng, 0.1, 10.0), eta = log_uniform(rng, 0.1, 10.0);
        const auto qoi = QuantityOfInterest::unlabeled();
        const auto t0 = Clock::now();
        const GlobalSolution s = solve_global(in.bundle, in.labels, qoi, {eps, eta});
        solver_time += seconds_since(t0);
        const auto grid = oracle::sdp_grid(in.graph, in.labels, qoi.materialize(in.bundle.size(), in.labels), eps, eta);
        worst = std::max(worst, std::abs(s.gwce_sq_bound - grid.value) / grid.value);
    }
    return {worst <= 5e-3 && solver_time < 60.0,
            fmt("max rel. diff %.3g (limit 5e-3); solver %.1f s (limit 60 s), with oracle %.1f s", worst, solver_time,
                seconds_since(t_all))};
}

// 2. Two-vertex toy.
Outcome analytic_toy() {
    const Graph g(2, {{0, 1, 1.0}});
    const auto b = build_laplacian(g);
    const LabelSet l(std::vector<std::size_t>{0});
    const auto qoi = QuantityOfInterest::unlabeled();
    const auto grid = oracle::sdp_grid(g, l, qoi.materialize(2, l), 1.0, 1.0);
    const auto s = solve_global(b, l, qoi, {1.0, 1.0});
    const bool ok = std::abs(s.tau_flat - 0.5) <= 1e-6 && std::abs(s.gwce_sq_bound - 4.0) <= 1e-6 &&
                    std::abs(grid.value - 4.0) <= 1e-2;
    return {ok, fmt("tau %.12g, value %.12g, grid oracle %.6g", s.tau_flat, s.gwce_sq_bound, grid.value)};
}

struct ExperimentRuns {
    LaplacianBundle bundle;
    RunConfig config;
    LabelGrowthResult base;
    LabelGrowthResult over;  // overestimation_factor 2, global_opt only
    double seconds = 0.0;
};

const ExperimentRuns& experiment_runs() {
    static const ExperimentRuns runs = [] {
        ExperimentRuns r;
        const auto t0 = Clock::now();
        r.config = load_config(fs::path(GSOR_DATA_DIR) / "lesmis_experiment.json");
        r.bundle = build_laplacian(load_matrix_market(r.config.dataset_path));
        r.base = run_label_growth(r.config, r.bundle);
        RunConfig over = r.config;
        over.overestimation_factor = 2.0;
        over.methods = {Method::global_opt};
        r.over = run_label_growth(over, r.bundle);
        r.seconds = seconds_since(t0);
        return r;
    }();
    return runs;
}

using InstanceKey = std::tuple<std::size_t, std::size_t>;  // (n_labeled, trial)

// 3. Certified bound on every model-consistent experiment instance.
Outcome certified_bound_on_runs() {
    const auto& runs = experiment_runs();
    std::map<InstanceKey, bool> consistent;
    for (const auto& i : runs.base.instances) consistent[{i.n_labeled, i.trial}] = i.model_consistent;
    std::size_t checked = 0, violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : runs.base.rows) {
        if (r.method != "global_opt" || !consistent.at({r.n_labeled, r.trial})) continue;
        ++checked;
        worst = std::max(worst, r.prediction_error - r.certified_bound);
        if (!(r.prediction_error <= r.certified_bound + 1e-8)) ++violations;
    }
    return {checked > 0 && violations == 0,
            fmt("%zu consistent instances, %zu violations, max(error - bound) %.3g; experiment %.0f s", checked,
                violations, worst, runs.seconds)};
}

// 4. Error decomposition inequality at the solved multipliers.
Outcome error_decomposition() {
    Rng rng(1004);
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 20; ++t) {
        const RandomInstance in = random_instance(rng, 3, 25, 0.2);
        const auto qoi = QuantityOfInterest::unlabeled();
        const auto s = solve_global(in.bundle, in.labels, qoi, {log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)});
        const Eigen::MatrixXd Q = qoi.materialize(in.bundle.size(), in.labels);
        for (int k = 0; k < 1000; ++k) {
            const Eigen::VectorXd f = oracle::random_vector(rng, in.bundle.size());
            const Eigen::VectorXd e = oracle::random_vector(rng, in.labels.size());
            const Eigen::VectorXd err = Q * f - s.recovery_matrix * (in.labels.restrict(f) + e);
            const double rhs = s.c_flat * oracle::dirichlet_energy(in.graph, f) + s.d_flat * e.squaredNorm();
            worst = std::min(worst, rhs - err.squaredNorm());
        }
    }
    return {worst >= -1e-8, fmt("min slack %.3g over 20000 pairs (limit -1e-8)", worst)};
}

// 5. The two auxiliary PSD facts.
Outcome psd_identities() {
    Rng rng(1005);
    auto psd = [&](int n, int rank) {
        Eigen::MatrixXd G(n, rank);
        for (auto& x : G.reshaped()) x = rng.normal();
        return Eigen::MatrixXd(G * G.transpose() / rank);
    };
    double worst1 = std::numeric_limits<double>::infinity(), worst2 = worst1;
    for (int t = 0; t < 500; ++t) {
        const int n = 2 + static_cast<int>(rng.below(11));
        const Eigen::MatrixXd A = psd(n, 1 + static_cast<int>(rng.below(n)));
        const Eigen::MatrixXd B = psd(n, n) + 0.01 * Eigen::MatrixXd::Identity(n, n);
        const Eigen::MatrixXd C = psd(n, 1 + static_cast<int>(rng.below(n)));
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, 2 * n), E(2 * n, 2 * n);
        D.topLeftCorner(n, n) = A;
        D.bottomRightCorner(n, n) = B;
        E << A - C, C, C, B - C;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(D - E, Eigen::EigenvaluesOnly);
        worst1 = std::min(worst1, e1.eigenvalues()(0));
        const Eigen::MatrixXd P = A * (A + B).ldlt().solve(B);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(0.5 * (P + P.transpose()), Eigen::EigenvaluesOnly);
        worst2 = std::min(worst2, e2.eigenvalues()(0));
    }
    return {worst1 >= -1e-9 && worst2 >= -1e-9, fmt("min eigenvalues %.3g and %.3g (limit -1e-9)", worst1, worst2)};
}

struct ConsistentInstance {
    RandomInstance base;
    Eigen::VectorXd f0;
    Observation obs;
    ModelParams params;
};

// Data generated from f0 with both budgets strictly above the realized values.
ConsistentInstance consistent_instance(Rng& rng, std::size_t n_lo, std::size_t n_hi) {
    RandomInstance in = random_instance(rng, n_lo, n_hi, 0.4);
    while (in.labels.size() < 2 || in.labels.size() == in.bundle.size()) in = random_instance(rng, n_lo, n_hi, 0.4);
    const Eigen::VectorXd f0 = oracle::random_vector(rng, in.bundle.size());
    const Eigen::VectorXd e = 0.3 * oracle::random_vector(rng, in.labels.size());
    Observation obs(in.labels, in.labels.restrict(f0) + e);
    const ModelParams p{in.bundle.dirichlet_norm(f0) * (1.1 + rng.uniform()), e.norm() * (1.1 + rng.uniform()) + 0.05};
    return {std::move(in), f0, std::move(obs), p};
}

// 6. Local selection: balance, minimax, consistency, near-optimality.
Outcome local_selection() {
    Rng rng(1006);
    double worst_a = 0.0, worst_b = -std::numeric_limits<double>::infinity(), worst_c = worst_b, worst_d = 0.0;
    for (int t = 0; t < 30; ++t) {
        const auto ci = consistent_instance(rng, 3, 25);
        const auto& b = ci.base.bundle;
        const auto s = solve_local(b, ci.obs, ci.params);
        worst_a = std::max(worst_a, s.balance_residual / (ci.params.epsilon + ci.params.eta));
        const double r2 = std::pow(ci.params.epsilon / ci.params.eta, 2);
        double grid_min = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 10000; ++k) {
            const Eigen::VectorXd f = regularize(b, ci.obs, k / 10001.0);
            grid_min = std::min(grid_min, std::max(std::pow(b.dirichlet_norm(f), 2),
                                                   r2 * (ci.base.labels.restrict(f) - ci.obs.values).squaredNorm()));
        }
        worst_b = std::max(worst_b, s.minimax_value - grid_min);
        worst_c = std::max({worst_c, b.dirichlet_norm(s.f_hat) - ci.params.epsilon,
                            (ci.base.labels.restrict(s.f_hat) - ci.obs.values).norm() - ci.params.eta});
    }
    for (int t = 0; t < 10; ++t) {
        const auto ci = consistent_instance(rng, 3, 6);
        const auto qoi = QuantityOfInterest::unlabeled();
        const Eigen::MatrixXd Q = qoi.materialize(ci.base.bundle.size(), ci.base.labels);
        const auto s = solve_local(ci.base.bundle, ci.obs, ci.params);
        const auto pts = oracle::sample_feasible_boundary(rng, ci.base.graph, ci.base.labels, ci.obs.values,
                                                          ci.params.epsilon, ci.params.eta, ci.f0, 100000);
        std::vector<Eigen::VectorXd> images;
        images.reserve(pts.size());
        for (const auto& f : pts) images.push_back(Q * f);
        const Eigen::VectorXd z = Q * s.f_hat;
        double at_fhat = 0.0;
        for (const auto& q : images) at_fhat = std::max(at_fhat, (q - z).norm());
        const double radius = oracle::enclosing_radius(images);
        worst_d = std::max(worst_d, at_fhat / radius);
    }
    const bool ok = worst_a <= 1e-8 && worst_b <= 1e-8 && worst_c <= 1e-8 && worst_d <= 2.1;
    return {ok, fmt("(a) residual/(eps+eta) %.3g (b) minimax - grid min %.3g (c) budget excess %.3g "
                    "(d) ratio %.4g (limit 2.1)",
                    worst_a, worst_b, worst_c, worst_d)};
}

// 7. The local bound dominates sampled errors and carries a PSD certificate.
Outcome bound_dominance() {
    Rng rng(1007);
    double worst_excess = -std::numeric_limits<double>::infinity(), worst_cert = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 50; ++t) {
        const auto ci = consistent_instance(rng, 3, 8);
        const auto qoi = QuantityOfInterest::unlabeled();
        const Eigen::MatrixXd Q = qoi.materialize(ci.base.bundle.size(), ci.base.labels);
        const LwceProblem problem(ci.base.bundle, ci.obs, qoi, ci.params);
        const Eigen::VectorXd z =
            apply_qoi(qoi, regularize(ci.base.bundle, ci.obs, 0.05 + 0.9 * rng.uniform()), ci.base.labels);
        const auto r = problem.bound(z);
        if (!r.feasible) return {false, fmt("instance %d: no feasible multipliers", t)};
        const auto pts = oracle::sample_feasible_boundary(rng, ci.base.graph, ci.base.labels, ci.obs.values,
                                                          ci.params.epsilon, ci.params.eta, ci.f0, 100000);
        for (const auto& f : pts)
            worst_excess = std::max(worst_excess, ((Q * f - z).squaredNorm() - r.gamma) / (1.0 + r.gamma));
        worst_cert = std::min(worst_cert, problem.certificate_min_eig(z, r.c_star, r.d_star, r.gamma));
    }
    return {worst_excess <= 1e-9 && worst_cert >= -1e-8,
            fmt("max (sampled error^2 - bound) / (1 + bound) %.3g (limit 1e-9); min certificate eigenvalue %.3g (limit -1e-8)",
                worst_excess, worst_cert)};
}

// 8. Bound at the locally selected tau against the curve minimum.
Outcome curve_shape() {
    const auto t0 = Clock::now();
    const RunConfig cfg = load_config(fs::path(GSOR_DATA_DIR) / "lesmis_experiment.json");
    const auto b = build_laplacian(load_matrix_market(cfg.dataset_path));
    const auto qoi = QuantityOfInterest::unlabeled();
    const auto grid = uniform_tau_grid(200);
    int passed = 0, run = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t < 20; ++t) {
        const std::uint64_t seed = cfg.seed ^ t;
        const std::size_t nl = cfg.n_labeled_grid[t % cfg.n_labeled_grid.size()];
        const Eigen::VectorXd f = synth_signal(b, stream_seed(seed, kSignalStream));
        const double eps = epsilon_from_rule(cfg.eps_rule, b.dirichlet_norm(f));
        Rng label_rng(stream_seed(seed, kLabelStream));
        const auto order = label_rng.permutation(b.size());
        const LabelSet l(std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nl)));
        const Eigen::VectorXd e = gen_noise(cfg.noise_model, cfg.eta, stream_seed(seed, kNoiseStreamBase + nl), l, b.degree);
        const Observation obs(l, l.restrict(f) + e);
        const ModelParams p{eps, cfg.eta};
        const auto s = solve_local(b, obs, p);
        const LwceProblem problem(b, obs, qoi, p);
        const double at_local = problem.bound(apply_qoi(qoi, s.f_hat, l)).gamma;
        double curve_min = std::numeric_limits<double>::infinity();
        for (const auto& pt : lwce_curve(b, obs, qoi, p, grid)) curve_min = std::min(curve_min, pt.gamma);
        ++run;
        worst = std::max(worst, at_local / curve_min);
        if (at_local <= 2.0 * curve_min) ++passed;
    }
    const double secs = seconds_since(t0);
    return {passed >= 19 && secs < 600.0,
            fmt("%d/%d trials within factor 2 (need 19); worst ratio %.4g; %.0f s (limit 600 s)", passed, run, worst,
                secs)};
}

// 9. Grid search ordering and robustness to an overestimated noise level.
Outcome ordering_and_robustness() {
    const auto& runs = experiment_runs();
    std::map<InstanceKey, std::map<std::string, double>> errors;
    std::map<InstanceKey, double> bound1, bound2;
    for (const auto& r : runs.base.rows) {
        errors[{r.n_labeled, r.trial}][r.method] = r.prediction_error;
        if (r.method == "global_opt") bound1[{r.n_labeled, r.trial}] = r.certified_bound;
    }
    for (const auto& r : runs.over.rows) bound2[{r.n_labeled, r.trial}] = r.certified_bound;
    std::size_t order_violations = 0, robust_violations = 0;
    for (const auto& [key, m] : errors)
        if (!(m.at("grid_search") <= m.at("global_opt") && m.at("grid_search") <= m.at("local_opt")))
            ++order_violations;
    double worst = 0.0;
    for (const auto& [key, b2] : bound2) {
        const double b1 = bound1.at(key);
        worst = std::max(worst, b2 / b1);
        if (!(b2 <= 4.0 * b1 + 1e-8)) ++robust_violations;
    }
    return {order_violations == 0 && robust_violations == 0 && bound2.size() == bound1.size(),
            fmt("%zu instances: %zu ordering violations, %zu robustness violations, max bound(2)/bound(1) %.4g",
                errors.size(), order_violations, robust_violations, worst)};
}

// 10. Energy grows and misfit shrinks with tau.
Outcome monotonicity() {
    Rng rng(1010);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const RandomInstance in = random_instance(rng, 3, 30, 0.2);
        const Observation obs(in.labels, oracle::random_vector(rng, in.labels.size()));
        double prev_energy = -1.0, prev_misfit = std::numeric_limits<double>::infinity();
        for (double tau : uniform_tau_grid(50)) {
            const Eigen::VectorXd f = regularize(in.bundle, obs, tau);
            const double energy = in.bundle.dirichlet_norm(f);
            const double misfit = (in.labels.restrict(f) - obs.values).norm();
            worst = std::max({worst, prev_energy - energy, misfit - prev_misfit});
            prev_energy = energy;
            prev_misfit = misfit;
        }
    }
    return {worst <= 1e-10, fmt("max monotonicity violation %.3g (slack 1e-10)", worst)};
}

// 11. Mean energy of raw synthetic signals.
Outcome synth_statistics() {
    Rng rng(1011);
    const std::vector<std::pair<std::string, LaplacianBundle>> graphs{
        {"lesmis", build_laplacian(load_matrix_market(fs::path(GSOR_DATA_DIR) / "lesmis.mtx"))},
        {"clique_union(3,5)", build_laplacian(build_clique_union(3, 5))},
        {"random N=30", build_laplacian(oracle::random_graph(rng, 30, 0.1))}};
    bool ok = true;
    std::string detail;
    for (const auto& [name, b] : graphs) {
        const double expected = static_cast<double>(b.size() - b.num_components);
        double mean = 0.0;
        for (std::uint64_t k = 0; k < 2000; ++k) mean += std::pow(b.dirichlet_norm(synth_signal_raw(b, 50000 + k)), 2);
        mean /= 2000.0;
        const double rel = std::abs(mean - expected) / expected;
        ok = ok && rel <= 0.05;
        detail += fmt("%s %.4g vs %.0f (%.2f%%); ", name.c_str(), mean, expected, 100 * rel);
    }
    return {ok, detail};
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(GSOR_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 12. Byte-identical experiment output.
Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "gsor_acceptance_determinism";
    fs::create_directories(dir);
    write_file(dir / "cfg.json", R"({"dataset_path": ")" + (fs::path(GSOR_DATA_DIR) / "lesmis.mtx").string() +
                                     R"(", "eta": 2.0, "seed": 11, "n_labeled_grid": [10, 30, 50], "trials": 3})");
    const std::string cfg = (dir / "cfg.json").string();
    const int c1 = run_cli("experiment --config " + cfg + " --out " + (dir / "a.csv").string());
    const int c2 = run_cli("experiment --config " + cfg + " --out " + (dir / "b.csv").string());
    const int c3 = run_cli("experiment --config " + cfg + " --out " + (dir / "c.csv").string() + " --jobs 2");
    bool ok = c1 == 0 && c2 == 0 && c3 == 0;
    std::size_t bytes = 0;
    if (ok) {
        const std::string a = read_file(dir / "a.csv");
        bytes = a.size();
        ok = a == read_file(dir / "b.csv") && a == read_file(dir / "c.csv") && !parse_results_csv(a).empty();
    }
    fs::remove_all(dir);
    return {ok, fmt("exit codes %d %d %d; %zu bytes, runs identical: %s", c1, c2, c3, bytes, ok ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"SDP reduction matches brute-force grid", sdp_reduction},
        {"Two-vertex analytic toy", analytic_toy},
        {"Certified bound on consistent experiment instances", certified_bound_on_runs},
        {"Error decomposition inequality", error_decomposition},
        {"Auxiliary PSD identities", psd_identities},
        {"Local selection suite", local_selection},
        {"Local bound dominance and certificate", bound_dominance},
        {"Bound at local tau vs curve minimum", curve_shape},
        {"Grid-search ordering and overestimation robustness", ordering_and_robustness},
        {"Regularization path monotonicity", monotonicity},
        {"Synthetic signal energy statistics", synth_statistics},
        {"Experiment determinism", determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s [%2zu] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
