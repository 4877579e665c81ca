// gsor: command-line front end.
//
// Exit status: 0 success, 1 invalid input or usage, 2 infeasible program.

#include <gsor/gsor.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Inputs {
    std::string graph;
    std::string labels;
    std::string qoi = "unlabeled";
    double eps = 0.0;
    double eta = 0.0;
};

void print_warnings(const gsor::Warnings& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

gsor::LaplacianBundle load_bundle(const std::string& path) {
    gsor::Warnings warnings;
    gsor::Graph g = gsor::load_matrix_market(path, &warnings);
    print_warnings(warnings);
    return gsor::build_laplacian(g);
}

gsor::Observation load_labels(const std::string& path) { return gsor::parse_labels_csv(gsor::read_file(path)); }

/// Output coordinates of Q: vertex indices when Q selects vertices, row numbers otherwise.
std::vector<std::size_t> qoi_indices(const gsor::QuantityOfInterest& q, std::size_t n_vertices,
                                     const gsor::LabelSet& labels, std::size_t rows) {
    using Q = gsor::QuantityOfInterest;
    if (std::holds_alternative<Q::Unlabeled>(q.variant())) return labels.complement(n_vertices);
    if (const auto* v = std::get_if<Q::Vertex>(&q.variant())) return {v->index};
    std::vector<std::size_t> idx(rows);
    for (std::size_t k = 0; k < rows; ++k) idx[k] = k;
    return idx;
}

std::string vector_csv(const std::vector<std::size_t>& index, const Eigen::VectorXd& v) {
    std::string out = "index,value\n";
    for (std::size_t k = 0; k < index.size(); ++k)
        out += std::to_string(index[k]) + "," + gsor::format_double(v(static_cast<Eigen::Index>(k))) + "\n";
    return out;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty())
        std::cout << text;
    else
        gsor::write_file(out_path, text);
}

std::string kv(const std::string& key, double value) { return key + "=" + gsor::format_double(value) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal recovery of graph signals from noisy partial labels"};
    app.require_subcommand(1);
    Inputs in;
    std::string out_path;

    auto add_graph_labels = [&](CLI::App* sub) {
        sub->add_option("--graph", in.graph, "Matrix Market adjacency file")->required();
        sub->add_option("--labels", in.labels, "CSV with header vertex_index,value")->required();
        sub->add_option("--qoi", in.qoi, "unlabeled | full | average | vertex:i")->capture_default_str();
    };
    auto add_budgets = [&](CLI::App* sub) {
        sub->add_option("--eps", in.eps, "smoothness budget epsilon")->required();
        sub->add_option("--eta", in.eta, "label-noise budget eta")->required();
    };

    double tau = 0.5;
    auto* recover = app.add_subcommand("recover", "Regularized estimate at a fixed tau");
    add_graph_labels(recover);
    recover->add_option("--tau", tau, "regularization parameter in [0, 1]")->required();
    recover->add_option("--out", out_path, "write CSV here instead of stdout");

    auto* global = app.add_subcommand("select-global", "Globally optimal tau and certified error bound");
    add_graph_labels(global);
    add_budgets(global);

    auto* local = app.add_subcommand("select-local", "Locally near-optimal tau and its estimate");
    add_graph_labels(local);
    add_budgets(local);

    std::size_t tau_grid = 200;
    auto* curve = app.add_subcommand("lwce-curve", "Local worst-case error bound along a tau grid");
    add_graph_labels(curve);
    add_budgets(curve);
    curve->add_option("--tau-grid", tau_grid, "number of grid points i/(n+1)")->capture_default_str();
    curve->add_option("--out", out_path, "write CSV here instead of stdout");

    std::string config_path;
    std::size_t jobs = 1;
    auto* experiment = app.add_subcommand("experiment", "Label-growth experiment from a JSON config");
    experiment->add_option("--config", config_path, "run configuration (JSON)")->required();
    experiment->add_option("--out", out_path, "results CSV")->required();
    experiment->add_option("--jobs", jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    std::uint64_t seed = 0;
    bool raw = false;
    auto* synth = app.add_subcommand("synth", "Random smooth signal on a graph");
    synth->add_option("--graph", in.graph, "Matrix Market adjacency file")->required();
    synth->add_option("--seed", seed, "seed")->required();
    synth->add_flag("--raw", raw, "skip the min-max normalization");
    synth->add_option("--out", out_path, "write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            const auto bundle = load_bundle(in.graph);
            const Eigen::VectorXd f =
                raw ? gsor::synth_signal_raw(bundle, seed) : gsor::synth_signal(bundle, seed);
            std::vector<std::size_t> idx(bundle.size());
            for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
            emit(vector_csv(idx, f), out_path);
            return 0;
        }
        if (*experiment) {
            const gsor::RunConfig cfg = gsor::load_config(config_path);
            const auto bundle = load_bundle(cfg.dataset_path);
            const auto result = gsor::run_label_growth(cfg, bundle, {jobs});
            print_warnings(result.warnings);
            gsor::write_file(out_path, gsor::write_results_csv(result.rows));
            return 0;
        }

        const auto bundle = load_bundle(in.graph);
        const gsor::Observation obs = load_labels(in.labels);
        const auto qoi = gsor::QuantityOfInterest::parse(in.qoi);
        gsor::validate_observability(bundle, obs.labels.vertices());
        obs.labels.check_bounds(bundle.size());

        if (*recover) {
            if (!(tau >= 0.0 && tau <= 1.0)) throw gsor::InvalidArgument("tau must lie in [0, 1]");
            const Eigen::VectorXd z = gsor::apply_qoi(qoi, gsor::regularize_closed(bundle, obs, tau), obs.labels);
            emit(vector_csv(qoi_indices(qoi, bundle.size(), obs.labels, static_cast<std::size_t>(z.size())), z),
                 out_path);
            return 0;
        }

        const gsor::ModelParams params{in.eps, in.eta};
        params.validate();
        if (*global) {
            const auto sol = gsor::solve_global(bundle, obs.labels, qoi, params);
            std::cout << kv("c_flat", sol.c_flat) << kv("d_flat", sol.d_flat) << kv("tau", sol.tau_flat)
                      << kv("gwce_sq_bound", sol.gwce_sq_bound) << kv("gwce_bound", sol.gwce_bound());
            return 0;
        }
        if (*local) {
            const auto sol = gsor::solve_local(bundle, obs, params);
            const Eigen::VectorXd z = gsor::apply_qoi(qoi, sol.f_hat, obs.labels);
            std::cout << kv("tau", sol.tau_natural) << kv("balance_residual", sol.balance_residual)
                      << kv("minimax_value", sol.minimax_value) << "degenerate=" << (sol.degenerate ? 1 : 0)
                      << "\n\n"
                      << vector_csv(qoi_indices(qoi, bundle.size(), obs.labels, static_cast<std::size_t>(z.size())),
                                    z);
            return 0;
        }
        if (*curve) {
            if (tau_grid == 0) throw gsor::InvalidArgument("--tau-grid must be positive");
            const auto grid = gsor::uniform_tau_grid(tau_grid);
            emit(gsor::write_curve_csv(gsor::lwce_curve(bundle, obs, qoi, params, grid)), out_path);
            return 0;
        }
    } catch (const gsor::InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
