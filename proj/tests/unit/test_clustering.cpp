#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"

#include "marketstates/clustering.hpp"
#include "marketstates/random.hpp"
#include "oracles.hpp"

using namespace marketstates;

namespace {

PackedSymmetric constant_matrix(std::size_t n, double level)
{
    PackedSymmetric m(n, level);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

/// Groups of matrices at the given off-diagonal levels, with optional jitter.
MatrixCloud planted(const std::vector<double>& levels, std::size_t per_group, double jitter,
                    std::uint64_t seed, std::vector<std::size_t>* truth = nullptr)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, jitter);
    std::vector<PackedSymmetric> ms;
    for (std::size_t i = 0; i < per_group; ++i) {
        for (std::size_t g = 0; g < levels.size(); ++g) {
            auto m = constant_matrix(5, levels[g]);
            if (jitter > 0.0) {
                for (std::size_t a = 0; a < 5; ++a) {
                    for (std::size_t b = a + 1; b < 5; ++b) {
                        m(a, b) += noise(gen);
                    }
                }
            }
            ms.push_back(std::move(m));
            if (truth != nullptr) {
                truth->push_back(g);
            }
        }
    }
    return make_cloud(ms);
}

}  // namespace

TEST_CASE("cloud layout")
{
    auto cloud = planted({0.1, 0.9}, 2, 0.0, 1);
    CHECK(cloud.matrix_dim == 5);
    CHECK(cloud.size() == 4);
    CHECK(cloud.points.rows() == 15);
    CHECK(cloud.matrix(1)(0, 1) == 0.9);
}

TEST_CASE("k = 1 uses the global mean")
{
    auto cloud = planted({0.1, 0.5, 0.9}, 4, 0.02, 5);
    auto c = kmeans(cloud.points, {1, 9, 300, Metric::L1});
    Eigen::VectorXd mean = cloud.points.rowwise().mean();
    CHECK((c.centroids.col(0) - mean).cwiseAbs().maxCoeff() < 1e-14);
    double expect = 0.0;
    for (Eigen::Index e = 0; e < cloud.points.cols(); ++e) {
        expect += (cloud.points.col(e) - mean).cwiseAbs().sum();
    }
    expect /= static_cast<double>(cloud.size());
    CHECK(c.d_intra == doctest::Approx(expect).epsilon(1e-13));
    CHECK(c.converged);
}

TEST_CASE("constant groups are recovered from any seed")
{
    std::vector<std::size_t> truth;
    auto cloud = planted({0.1, 0.5, 0.9}, 6, 0.0, 1, &truth);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto c = kmeans(cloud.points, {3, seed, 300, Metric::L1});
        CHECK(oracle::adjusted_rand(c.assignments, truth) == 1.0);
        CHECK(c.d_intra < 1e-15);
    }
}

TEST_CASE("k = M gives zero spread")
{
    auto cloud = planted({0.1, 0.3, 0.5, 0.7}, 1, 0.0, 1);
    auto c = kmeans(cloud.points, {4, 3, 300, Metric::L1});
    CHECK(c.d_intra == 0.0);
    auto sizes = c.cluster_sizes();
    CHECK(std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 1; }));
}

TEST_CASE("kmeans parameter checks")
{
    auto cloud = planted({0.1, 0.3}, 1, 0.0, 1);
    try {
        kmeans(cloud.points, {3, 0, 300, Metric::L1});
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }
    try {
        kmeans(cloud.points, {0, 0, 300, Metric::L1});
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParameterRange);
    }
}

TEST_CASE("l2 objective never increases")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto cloud = planted({0.2, 0.35, 0.5, 0.65}, 15, 0.1, seed);
        auto c = kmeans(cloud.points, {4, seed, 300, Metric::L2});
        for (std::size_t i = 1; i < c.objective_history.size(); ++i) {
            CHECK(c.objective_history[i] <= c.objective_history[i - 1] * (1 + 1e-12));
        }
    }
}

TEST_CASE("l1 objective on separated data does not increase")
{
    auto cloud = planted({0.1, 0.5, 0.9}, 20, 0.01, 3);
    auto c = kmeans(cloud.points, {3, 4, 300, Metric::L1});
    for (std::size_t i = 1; i < c.objective_history.size(); ++i) {
        CHECK(c.objective_history[i] <= c.objective_history[i - 1] * (1 + 1e-12));
    }
}

TEST_CASE("every cluster is populated")
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto cloud = planted({0.3, 0.31, 0.32}, 5, 0.05, seed);
        auto c = kmeans(cloud.points, {6, seed, 300, Metric::L1});
        for (auto s : c.cluster_sizes()) {
            CHECK(s > 0);
        }
    }
}

TEST_CASE("kmeans is deterministic in its seed")
{
    auto cloud = planted({0.2, 0.4, 0.6}, 10, 0.1, 9);
    auto a = kmeans(cloud.points, {3, 17, 300, Metric::L1});
    auto b = kmeans(cloud.points, {3, 17, 300, Metric::L1});
    CHECK(a.assignments == b.assignments);
    CHECK(a.d_intra == b.d_intra);
}

TEST_CASE("sigma_intra on well separated data is zero")
{
    auto cloud = planted({0.1, 0.5, 0.9}, 10, 0.0, 1);
    auto r = sigma_intra(cloud.points, 3, 20, 5);
    CHECK(r.sigma_intra == 0.0);
    CHECK(r.d_intra.size() == 20);
}

TEST_CASE("sigma_intra equals the population std of the logged runs")
{
    auto cloud = planted({0.3, 0.4, 0.5}, 12, 0.08, 4);
    auto r = sigma_intra(cloud.points, 4, 30, 11);
    const double n = static_cast<double>(r.d_intra.size());
    const double mean = std::accumulate(r.d_intra.begin(), r.d_intra.end(), 0.0) / n;
    double ss = 0.0;
    for (double d : r.d_intra) {
        ss += (d - mean) * (d - mean);
    }
    CHECK(r.mean_d_intra == doctest::Approx(mean).epsilon(1e-13));
    CHECK(r.sigma_intra == doctest::Approx(std::sqrt(ss / n)).epsilon(1e-10));
    CHECK(r.sigma_intra > 0.0);

    auto lo = std::min_element(r.d_intra.begin(), r.d_intra.end());
    CHECK(r.best.d_intra == *lo);
    for (std::size_t i = 0; i < r.d_intra.size(); ++i) {
        CHECK(r.sub_seeds[i] == derive_seed(11, i));
        if (r.d_intra[i] == *lo) {
            CHECK(r.sub_seeds[r.best_restart] <= r.sub_seeds[i]);
        }
    }
}

TEST_CASE("two restarts give half the difference")
{
    auto cloud = planted({0.3, 0.4, 0.5}, 12, 0.08, 4);
    auto r = sigma_intra(cloud.points, 4, 2, 2);
    CHECK(r.sigma_intra == doctest::Approx(std::abs(r.d_intra[0] - r.d_intra[1]) / 2).epsilon(1e-12));
    CHECK_THROWS_AS(sigma_intra(cloud.points, 4, 1, 2), Error);
}

TEST_CASE("sigma_intra does not depend on thread count")
{
    auto cloud = planted({0.3, 0.4, 0.5}, 12, 0.08, 4);
    auto a = sigma_intra(cloud.points, 3, 16, 8, 300, Metric::L1, 1);
    auto b = sigma_intra(cloud.points, 3, 16, 8, 300, Metric::L1, 4);
    CHECK(a.d_intra == b.d_intra);
    CHECK(a.sigma_intra == b.sigma_intra);
    CHECK(a.best.assignments == b.best.assignments);
}

TEST_CASE("grid search respects k_min and records cell errors")
{
    auto cloud = planted({0.1, 0.5, 0.9}, 3, 0.0, 1);
    OptimizeOptions opt;
    opt.epsilon_grid = {0.0};
    opt.k_first = 1;
    opt.k_last = 12;
    opt.k_min_admissible = 2;
    opt.n_init = 5;
    opt.seed = 3;
    auto g = optimize_states(std::vector<MatrixCloud>{cloud}, opt);
    REQUIRE(g.cells.size() == 12);
    CHECK(g.chosen_k >= 2);
    CHECK(g.cells[10].error.has_value());
    CHECK(std::isnan(g.cells[10].sigma_intra));
    CHECK(!g.cells[0].error.has_value());
}

TEST_CASE("grid of one cell")
{
    auto cloud = planted({0.1, 0.9}, 3, 0.05, 2);
    OptimizeOptions opt;
    opt.epsilon_grid = {0.0};
    opt.k_first = opt.k_last = 2;
    opt.n_init = 4;
    auto g = optimize_states(std::vector<MatrixCloud>{cloud}, opt);
    CHECK(g.chosen_k == 2);
    CHECK(g.chosen_epsilon == 0.0);
}

TEST_CASE("no admissible cell")
{
    auto cloud = planted({0.1, 0.9}, 1, 0.0, 2);
    OptimizeOptions opt;
    opt.epsilon_grid = {0.0};
    opt.k_first = 3;
    opt.k_last = 4;
    opt.n_init = 2;
    CHECK_THROWS_AS(optimize_states(std::vector<MatrixCloud>{cloud}, opt), Error);
}

TEST_CASE("states are ordered by mean correlation")
{
    const std::vector<double> levels{0.611, 0.157, 0.433, 0.281, 0.286};
    std::vector<std::size_t> truth;
    auto cloud = planted(levels, 3, 0.0, 1, &truth);
    Clustering c;
    c.k = 5;
    c.assignments = truth;
    auto seq = order_states(c, cloud);
    std::vector<double> expect{0.157, 0.281, 0.286, 0.433, 0.611};
    for (std::size_t s = 0; s < 5; ++s) {
        CHECK(seq.state_means[s] == doctest::Approx(expect[s]).epsilon(1e-12));
    }
    for (std::size_t e = 0; e < truth.size(); ++e) {
        CHECK(seq.state_means[seq.states[e] - 1] == doctest::Approx(levels[truth[e]]).epsilon(1e-12));
    }
}

TEST_CASE("state ordering is invariant to raw labels")
{
    std::vector<std::size_t> truth;
    auto cloud = planted({0.2, 0.6, 0.4}, 4, 0.0, 1, &truth);
    Clustering a;
    a.k = 3;
    a.assignments = truth;
    Clustering b = a;
    const std::vector<std::size_t> perm{2, 0, 1};
    for (auto& x : b.assignments) {
        x = perm[x];
    }
    CHECK(order_states(a, cloud).states == order_states(b, cloud).states);
}

TEST_CASE("single state and tied means")
{
    auto cloud = planted({0.3, 0.3}, 2, 0.0, 1);
    Clustering one;
    one.k = 1;
    one.assignments.assign(cloud.size(), 0);
    auto seq = order_states(one, cloud);
    CHECK(std::all_of(seq.states.begin(), seq.states.end(), [](std::size_t s) { return s == 1; }));

    Clustering two;
    two.k = 2;
    two.assignments = {1, 0, 1, 0};
    Warnings warnings;
    auto tied = order_states(two, cloud, &warnings);
    REQUIRE(!warnings.empty());
    CHECK(warnings[0].code == "TieWarning");
    CHECK(tied.states == std::vector<std::size_t>{2, 1, 2, 1});
}

TEST_CASE("metric names")
{
    CHECK(parse_metric("l1") == Metric::L1);
    CHECK(parse_metric("l2") == Metric::L2);
    CHECK(!parse_metric("cosine").has_value());
    CHECK(to_string(Metric::L1) == "l1");
}
