#pragma once

// Weighted undirected graphs, their dense Laplacian bundle, connectivity and
// the observability condition for a labeled vertex set.

#include <gsor/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace gsor {

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double w = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected graph with each edge stored once as (i, j, w), i < j.
class Graph {
public:
    Graph() = default;

    /// Canonicalizes the edge list: self-loops are dropped and duplicate
    /// pairs have their weights summed (both reported through `warnings`).
    /// Out-of-range indices and negative or non-finite weights throw.
    Graph(std::size_t num_vertices, std::vector<Edge> edges, Warnings* warnings = nullptr)
        : num_vertices_(num_vertices) {
        if (num_vertices == 0) throw InvalidArgument("graph must have at least one vertex");
        std::size_t loops = 0;
        std::vector<Edge> canon;
        canon.reserve(edges.size());
        for (Edge e : edges) {
            if (e.i >= num_vertices || e.j >= num_vertices)
                throw InvalidArgument("edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                                      ") out of range for " + std::to_string(num_vertices) + " vertices");
            if (!std::isfinite(e.w) || e.w < 0.0)
                throw InvalidArgument("edge weight must be finite and nonnegative");
            if (e.i == e.j) {
                ++loops;
                continue;
            }
            if (e.i > e.j) std::swap(e.i, e.j);
            canon.push_back(e);
        }
        if (loops > 0) warn(warnings, "dropped " + std::to_string(loops) + " self-loop(s)");

        std::sort(canon.begin(), canon.end(), [](const Edge& a, const Edge& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        std::size_t merged = 0;
        for (const Edge& e : canon) {
            if (!edges_.empty() && edges_.back().i == e.i && edges_.back().j == e.j) {
                edges_.back().w += e.w;
                ++merged;
            } else {
                edges_.push_back(e);
            }
        }
        if (merged > 0) warn(warnings, "summed weights of " + std::to_string(merged) + " duplicate edge(s)");
    }

    std::size_t num_vertices() const noexcept { return num_vertices_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    const std::vector<std::string>& names() const noexcept { return names_; }
    void set_names(std::vector<std::string> names) {
        if (!names.empty() && names.size() != num_vertices_)
            throw InvalidArgument("vertex name list must match the vertex count");
        names_ = std::move(names);
    }

    Eigen::MatrixXd adjacency() const {
        const auto n = static_cast<Eigen::Index>(num_vertices_);
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
        for (const Edge& e : edges_) {
            W(e.i, e.j) += e.w;
            W(e.j, e.i) += e.w;
        }
        return W;
    }

private:
    std::size_t num_vertices_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::string> names_;
};

struct Components {
    std::size_t count = 0;
    std::vector<std::size_t> component_of;
};

/// Connectivity over edges with positive weight. Components are numbered in
/// order of their smallest vertex.
inline Components connected_components(const Graph& graph) {
    const std::size_t n = graph.num_vertices();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (const Edge& e : graph.edges()) {
        if (e.w <= 0.0) continue;
        std::size_t a = find(e.i), b = find(e.j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    Components out;
    out.component_of.assign(n, 0);
    std::vector<std::size_t> label(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t r = find(v);
        if (label[r] == std::numeric_limits<std::size_t>::max()) label[r] = out.count++;
        out.component_of[v] = label[r];
    }
    return out;
}

struct LaplacianOptions {
    std::size_t dense_limit = 5000;
};

/// L = D - W with its full symmetric eigendecomposition and square root.
/// Immutable once built; safe to share across threads.
struct LaplacianBundle {
    Eigen::MatrixXd laplacian;
    Eigen::VectorXd eigenvalues;   // nondecreasing
    Eigen::MatrixXd eigenvectors;  // orthonormal columns
    Eigen::MatrixXd sqrt_laplacian;
    Eigen::VectorXd degree;
    std::size_t num_components = 0;
    std::vector<std::size_t> component_of;
    double zero_threshold = 0.0;
    std::size_t num_zero_eigenvalues = 0;  // leading eigenvalues <= zero_threshold

    std::size_t size() const noexcept { return static_cast<std::size_t>(laplacian.rows()); }
    double lambda_max() const { return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0; }
    bool is_zero_eigenvalue(Eigen::Index k) const { return eigenvalues(k) <= zero_threshold; }

    /// ||L^{1/2} f||_2.
    double dirichlet_norm(const Eigen::VectorXd& f) const { return (sqrt_laplacian * f).norm(); }
};

inline LaplacianBundle build_laplacian(const Graph& graph, const LaplacianOptions& options = {}) {
    const std::size_t n = graph.num_vertices();
    if (n > options.dense_limit)
        throw GraphTooLarge("graph too large for dense mode: " + std::to_string(n) + " vertices exceeds limit " +
                            std::to_string(options.dense_limit));
    LaplacianBundle b;
    const Eigen::MatrixXd W = graph.adjacency();
    b.degree = W.rowwise().sum();
    b.laplacian = -W;
    b.laplacian.diagonal() += b.degree;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b.laplacian);
    if (eig.info() != Eigen::Success) throw Error("symmetric eigendecomposition of the Laplacian failed");
    b.eigenvalues = eig.eigenvalues();
    b.eigenvectors = eig.eigenvectors();

    const double lmax = std::max(0.0, b.lambda_max());
    b.zero_threshold = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * lmax;
    b.num_zero_eigenvalues = 0;
    Eigen::VectorXd root(b.eigenvalues.size());
    for (Eigen::Index k = 0; k < b.eigenvalues.size(); ++k) {
        if (b.is_zero_eigenvalue(k)) {
            ++b.num_zero_eigenvalues;
            root(k) = 0.0;
        } else {
            root(k) = std::sqrt(b.eigenvalues(k));
        }
    }
    b.sqrt_laplacian = b.eigenvectors * root.asDiagonal() * b.eigenvectors.transpose();

    Components comps = connected_components(graph);
    b.num_components = comps.count;
    b.component_of = std::move(comps.component_of);
    return b;
}

/// Throws ObservabilityError unless every component holds a labeled vertex.
inline void validate_observability(const LaplacianBundle& bundle, std::span<const std::size_t> labeled) {
    if (labeled.empty()) throw InvalidArgument("labeled set must be nonempty");
    std::vector<bool> seen(bundle.num_components, false);
    for (std::size_t v : labeled) {
        if (v >= bundle.size()) throw InvalidArgument("labeled vertex " + std::to_string(v) + " out of range");
        seen[bundle.component_of[v]] = true;
    }
    std::vector<std::size_t> missing;
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (!seen[k]) missing.push_back(k);
    if (!missing.empty()) throw ObservabilityError(std::move(missing));
}

/// K disjoint unweighted complete graphs on n vertices each; L/n is then an
/// orthogonal projector.
inline Graph build_clique_union(std::size_t num_cliques, std::size_t clique_size) {
    if (num_cliques < 1 || clique_size < 2) throw InvalidArgument("clique union needs K >= 1 and n >= 2");
    std::vector<Edge> edges;
    edges.reserve(num_cliques * clique_size * (clique_size - 1) / 2);
    for (std::size_t k = 0; k < num_cliques; ++k) {
        const std::size_t base = k * clique_size;
        for (std::size_t a = 0; a < clique_size; ++a)
            for (std::size_t b = a + 1; b < clique_size; ++b) edges.push_back({base + a, base + b, 1.0});
    }
    return Graph(num_cliques * clique_size, std::move(edges));
}

}  // namespace gsor
