#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace gsor;

namespace {

Graph path3() { return Graph(3, {{0, 1, 1.0}, {1, 2, 1.0}}); }

struct Instance {
    Graph graph;
    LaplacianBundle bundle;
    LabelSet labels;
    Eigen::VectorXd y;
};

Instance random_instance(Rng& rng, std::size_t n_max = 30) {
    const std::size_t n = 3 + rng.below(n_max - 2);
    Graph g = oracle::random_connected_graph(rng, n, 0.2);
    LaplacianBundle b = build_laplacian(g);
    LabelSet labels = oracle::random_observable_labels(rng, b, 1 + rng.below(n - 1));
    Eigen::VectorXd y = oracle::random_vector(rng, labels.size());
    return {std::move(g), std::move(b), std::move(labels), std::move(y)};
}

}  // namespace

TEST(LabelSet, BasicOperations) {
    const LabelSet s(std::vector<std::size_t>{2, 0});
    EXPECT_EQ(s.restrict(Eigen::Vector3d(1, 2, 3)), Eigen::Vector2d(3, 1));
    EXPECT_EQ(s.scatter(Eigen::Vector2d(5, 6), 3), Eigen::Vector3d(6, 0, 5));
    EXPECT_EQ(s.complement(3), (std::vector<std::size_t>{1}));
    EXPECT_THROW(LabelSet(std::vector<std::size_t>{}), InvalidArgument);
    EXPECT_THROW(LabelSet(std::vector<std::size_t>{1, 1}), InvalidArgument);
    EXPECT_THROW(s.check_bounds(2), InvalidArgument);
}

TEST(Qoi, ApplyExamples) {
    const Eigen::Vector3d f(1, 2, 3);
    const LabelSet l0(std::vector<std::size_t>{0});
    EXPECT_DOUBLE_EQ(apply_qoi(QuantityOfInterest::average(), f, l0)(0), 2.0);
    EXPECT_DOUBLE_EQ(apply_qoi(QuantityOfInterest::vertex(2), f, l0)(0), 3.0);
    EXPECT_EQ(apply_qoi(QuantityOfInterest::unlabeled(), f, l0), Eigen::Vector2d(2, 3));
    EXPECT_EQ(apply_qoi(QuantityOfInterest::full(), f, l0), f);
    EXPECT_THROW(apply_qoi(QuantityOfInterest::vertex(3), f, l0), InvalidArgument);
    EXPECT_THROW(apply_qoi(QuantityOfInterest::matrix(Eigen::MatrixXd::Ones(1, 2)), f, l0), InvalidArgument);
}

TEST(Qoi, MaterializeMatchesApply) {
    Rng rng(3);
    const LabelSet l(std::vector<std::size_t>{4, 1});
    const Eigen::VectorXd f = oracle::random_vector(rng, 6);
    for (const auto& q : {QuantityOfInterest::unlabeled(), QuantityOfInterest::full(), QuantityOfInterest::average(),
                          QuantityOfInterest::vertex(5), QuantityOfInterest::matrix(Eigen::MatrixXd::Random(3, 6))})
        EXPECT_LE((q.materialize(6, l) * f - apply_qoi(q, f, l)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Qoi, Parse) {
    EXPECT_TRUE(std::holds_alternative<QuantityOfInterest::Unlabeled>(QuantityOfInterest::parse("unlabeled").variant()));
    EXPECT_EQ(std::get<QuantityOfInterest::Vertex>(QuantityOfInterest::parse("vertex:12").variant()).index, 12u);
    EXPECT_THROW(QuantityOfInterest::parse("vertex:"), InvalidArgument);
    EXPECT_THROW(QuantityOfInterest::parse("vertex:1x"), InvalidArgument);
    EXPECT_THROW(QuantityOfInterest::parse("median"), InvalidArgument);
}

TEST(Regularize, ConstantsAreReproduced) {
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        const Instance in = random_instance(rng);
        const Observation obs(in.labels, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(in.labels.size())));
        for (double tau : {1e-6, 0.3, 0.5, 0.9, 1.0 - 1e-6}) {
            const Eigen::VectorXd f = regularize(in.bundle, obs, tau);
            EXPECT_LE((f.array() - 1.0).abs().maxCoeff(), 1e-9);
        }
    }
}

TEST(Regularize, ZeroDataGivesZero) {
    const auto b = build_laplacian(path3());
    const Observation obs(LabelSet(std::vector<std::size_t>{0, 2}), Eigen::Vector2d::Zero());
    EXPECT_EQ(regularize(b, obs, 0.4), Eigen::Vector3d::Zero());
}

TEST(Regularize, PathMatchesLeastSquaresOracle) {
    const Graph g = path3();
    const auto b = build_laplacian(g);
    const LabelSet l(std::vector<std::size_t>{0, 2});
    const Eigen::Vector2d y(0, 1);
    const Eigen::VectorXd f = regularize(b, Observation(l, y), 0.5);
    EXPECT_LE((f - oracle::regularize_lsq(g, l, y, 0.5)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Regularize, RandomInstancesMatchOracleAndResidual) {
    Rng rng(2);
    for (int t = 0; t < 40; ++t) {
        const Instance in = random_instance(rng);
        const Observation obs(in.labels, in.y);
        const double tau = 0.02 + 0.96 * rng.uniform();
        const Eigen::VectorXd f = regularize(in.bundle, obs, tau);
        EXPECT_LE((f - oracle::regularize_lsq(in.graph, in.labels, in.y, tau)).cwiseAbs().maxCoeff(), 1e-8);
        Eigen::MatrixXd A = (1.0 - tau) * in.bundle.laplacian;
        A.diagonal() += tau * in.labels.mask(in.bundle.size());
        const double residual = (A * f - tau * in.labels.scatter(in.y, in.bundle.size())).norm();
        EXPECT_LE(residual, 1e-10 * (1.0 + in.y.norm()));
    }
}

TEST(Regularize, RejectsBadInput) {
    const auto b = build_laplacian(Graph(4, {{0, 1, 1.0}, {2, 3, 1.0}}));
    const Observation unobserved(LabelSet(std::vector<std::size_t>{0, 1}), Eigen::Vector2d(1, 2));
    EXPECT_THROW(regularize(b, unobserved, 0.5), ObservabilityError);
    const Observation ok(LabelSet(std::vector<std::size_t>{0, 2}), Eigen::Vector2d(1, 2));
    EXPECT_THROW(regularize(b, ok, 0.0), InvalidArgument);
    EXPECT_THROW(regularize(b, ok, 1.0), InvalidArgument);
    EXPECT_THROW(Observation(LabelSet(std::vector<std::size_t>{0}), Eigen::Vector2d(1, 2)), InvalidArgument);
}

TEST(RegularizerMatrix, ColumnsAndProducts) {
    Rng rng(4);
    const Instance in = random_instance(rng);
    const double tau = 0.37;
    const Eigen::MatrixXd M = regularizer_matrix(in.bundle, in.labels, tau);
    const auto nl = static_cast<Eigen::Index>(in.labels.size());
    for (Eigen::Index j = 0; j < nl; ++j) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(nl, j);
        EXPECT_LE((M.col(j) - regularize(in.bundle, Observation(in.labels, e), tau)).cwiseAbs().maxCoeff(), 1e-10);
    }
    for (int k = 0; k < 20; ++k) {
        const Eigen::VectorXd y = oracle::random_vector(rng, in.labels.size());
        EXPECT_LE((M * y - regularize(in.bundle, Observation(in.labels, y), tau)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(RegularizerMatrix, AllLabeledApproachesIdentity) {
    Rng rng(5);
    const Graph g = oracle::random_connected_graph(rng, 8, 0.3);
    const auto b = build_laplacian(g);
    std::vector<std::size_t> all(8);
    for (std::size_t k = 0; k < 8; ++k) all[k] = k;
    const Eigen::MatrixXd M = regularizer_matrix(b, LabelSet(all), 1.0 - 1e-9);
    EXPECT_LE((M - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Regularize, Linearity) {
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        const Instance in = random_instance(rng);
        const Eigen::VectorXd y2 = oracle::random_vector(rng, in.labels.size());
        const double a = rng.normal(), c = rng.normal(), tau = rng.uniform() * 0.98 + 0.01;
        const Eigen::VectorXd lhs = regularize(in.bundle, Observation(in.labels, a * in.y + c * y2), tau);
        const Eigen::VectorXd rhs = a * regularize(in.bundle, Observation(in.labels, in.y), tau) +
                                    c * regularize(in.bundle, Observation(in.labels, y2), tau);
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Regularize, ComponentConstantsAreReproduced) {
    const auto b = build_laplacian(Graph(5, {{0, 1, 1.0}, {1, 2, 2.0}, {3, 4, 1.0}}));
    const Observation obs(LabelSet(std::vector<std::size_t>{0, 2, 4}), Eigen::Vector3d(2, 2, -1));
    Eigen::VectorXd expected(5);
    expected << 2, 2, 2, -1, -1;
    for (double tau : {0.01, 0.5, 0.99}) EXPECT_LE((regularize(b, obs, tau) - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Regularize, MonotoneAlongTau) {
    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
        const Instance in = random_instance(rng);
        const Observation obs(in.labels, in.y);
        double prev_energy = -1.0, prev_misfit = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 50; ++k) {
            const Eigen::VectorXd f = regularize(in.bundle, obs, k / 51.0);
            const double energy = in.bundle.dirichlet_norm(f);
            const double misfit = (in.labels.restrict(f) - in.y).norm();
            EXPECT_GE(energy, prev_energy - 1e-10);
            EXPECT_LE(misfit, prev_misfit + 1e-10);
            prev_energy = energy;
            prev_misfit = misfit;
        }
    }
}

TEST(LimitTauZero, ComponentMeans) {
    const auto b = build_laplacian(Graph(5, {{0, 1, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}}));
    const Observation obs(LabelSet(std::vector<std::size_t>{0, 2, 4}), Eigen::Vector3d(1.0, 3.0, 5.0));
    Eigen::VectorXd expected(5);
    expected << 1, 1, 4, 4, 4;
    EXPECT_EQ(limit_tau_zero(b, obs), expected);
}

TEST(LimitTauZero, ContinuityAtZero) {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const Instance in = random_instance(rng);
        const Observation obs(in.labels, in.y);
        EXPECT_LE((regularize(in.bundle, obs, 1e-6) - limit_tau_zero(in.bundle, obs)).cwiseAbs().maxCoeff(), 1e-3);
    }
}

TEST(Harmonic, PathAndFullLabels) {
    const auto b = build_laplacian(path3());
    const Eigen::VectorXd f = harmonic_interpolate(b, Observation(LabelSet(std::vector<std::size_t>{0, 2}), Eigen::Vector2d(0, 1)));
    EXPECT_LE((f - Eigen::Vector3d(0, 0.5, 1)).cwiseAbs().maxCoeff(), 1e-14);
    const Eigen::Vector3d y(3, -1, 2);
    const Eigen::VectorXd g = harmonic_interpolate(b, Observation(LabelSet(std::vector<std::size_t>{0, 1, 2}), y));
    EXPECT_EQ(g, y);
}

TEST(Harmonic, InterpolatesAndIsTheTauOneLimit) {
    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
        const Instance in = random_instance(rng);
        const Observation obs(in.labels, in.y);
        const Eigen::VectorXd f1 = harmonic_interpolate(in.bundle, obs);
        EXPECT_LE((in.labels.restrict(f1) - in.y).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE((regularize(in.bundle, obs, 1.0 - 1e-8) - f1).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(ClosedInterval, EndpointsUseLimitMaps) {
    Rng rng(10);
    const Instance in = random_instance(rng);
    const Observation obs(in.labels, in.y);
    EXPECT_EQ(regularize_closed(in.bundle, obs, 0.0), limit_tau_zero(in.bundle, obs));
    EXPECT_EQ(regularize_closed(in.bundle, obs, 1.0), harmonic_interpolate(in.bundle, obs));
    EXPECT_LE((regularizer_matrix_closed(in.bundle, in.labels, 0.0) * in.y - limit_tau_zero(in.bundle, obs))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
}
