#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "marketstates/corrmat.hpp"
#include "marketstates/error.hpp"
#include "marketstates/ingest.hpp"

namespace marketstates {

/// A sequence of symmetric matrices flattened to packed columns, one column
/// per epoch. Both Pearson and Guhr sequences are clustered in this form.
struct MatrixCloud {
    std::size_t matrix_dim = 0;
    Eigen::MatrixXd points;  // packed_size(matrix_dim) x epochs
    std::vector<Date> epoch_ends;

    std::size_t size() const noexcept { return static_cast<std::size_t>(points.cols()); }
    PackedSymmetric matrix(std::size_t epoch) const;
};

MatrixCloud make_cloud(const std::vector<CorrMatrix>& matrices);
MatrixCloud make_cloud(const std::vector<GuhrMatrix>& matrices);
MatrixCloud make_cloud(const std::vector<PackedSymmetric>& matrices);

/// Rolling Pearson matrices, power-mapped with `epsilon`, then coarse-grained
/// when `sectors` is given. Streams so the Pearson sequence is never held.
MatrixCloud build_matrix_cloud(const ReturnTable& returns, const EpochSpec& spec,
                               const SectorMap* sectors, double epsilon, unsigned threads = 1,
                               Warnings* warnings = nullptr);

enum class Metric {
    L1,  // the packed-entry L1 distance used throughout; non-textbook with mean centroids
    L2,  // squared Euclidean; classical Lloyd
};

std::string_view to_string(Metric metric) noexcept;
std::optional<Metric> parse_metric(std::string_view text) noexcept;

struct KMeansOptions {
    std::size_t k = 1;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    Metric metric = Metric::L1;
};

struct Clustering {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // raw cluster id per epoch
    Eigen::MatrixXd centroids;             // packed columns
    double d_intra = 0.0;                  // mean L1 distance of each epoch to its centroid
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Objective in the assignment metric after every assignment step.
    std::vector<double> objective_history;

    std::vector<std::size_t> cluster_sizes() const;
};

/// Lloyd iteration from `k` distinct epochs sampled with `options.seed`.
/// Ties in assignment go to the lowest centroid index; an emptied cluster
/// takes the epoch farthest from its own centroid.
Clustering kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options);

struct SigmaIntraResult {
    double mean_d_intra = 0.0;
    double sigma_intra = 0.0;  // population standard deviation over restarts
    std::vector<double> d_intra;
    std::vector<std::uint64_t> sub_seeds;
    std::size_t best_restart = 0;
    Clustering best;
};

/// Runs `n_init` restarts with seeds derive_seed(seed, i). The best run has
/// minimal d_intra, ties broken by the numerically lowest sub-seed.
SigmaIntraResult sigma_intra(const Eigen::MatrixXd& points, std::size_t k, std::size_t n_init,
                             std::uint64_t seed, std::size_t max_iter = 300,
                             Metric metric = Metric::L1, unsigned threads = 1);

struct GridCell {
    std::size_t k = 0;
    double epsilon = 0.0;
    double sigma_intra = 0.0;
    double mean_d_intra = 0.0;
    /// Mean L1 distance of the epsilon's cloud to its own mean (d_intra at k = 1).
    double dispersion = 0.0;
    std::optional<std::string> error;

    /// mean_d_intra as a share of the dispersion; comparable across epsilon.
    double relative_d_intra() const noexcept
    {
        return dispersion > 0.0 ? mean_d_intra / dispersion : mean_d_intra;
    }
};

struct GridResult {
    std::vector<GridCell> cells;  // epsilon-major, then k, in grid order
    std::size_t chosen_k = 0;
    double chosen_epsilon = 0.0;
    std::size_t n_init = 0;
    std::size_t k_min_admissible = 0;
};

struct OptimizeOptions {
    std::vector<double> epsilon_grid;
    std::size_t k_first = 2;
    std::size_t k_last = 8;
    std::size_t k_min_admissible = 0;
    std::size_t n_init = 1000;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    Metric metric = Metric::L1;
    unsigned threads = 1;
};

/// Evaluates sigma_intra on every (k, epsilon) cell and picks the cell with
/// the smallest sigma_intra among error-free cells with k >= k_min_admissible.
/// sigma_intra values equal to within 1e-12 of the cells' mean d_intra count
/// as a tie, resolved by smaller relative d_intra, then smaller k, then
/// smaller epsilon.
GridResult optimize_states(const ReturnTable& returns, const EpochSpec& spec,
                           const SectorMap* sectors, const OptimizeOptions& options,
                           Warnings* warnings = nullptr);

/// Same, on prebuilt clouds (one per epsilon, in grid order).
GridResult optimize_states(const std::vector<MatrixCloud>& clouds, const OptimizeOptions& options);

struct StateSequence {
    std::size_t k = 0;
    std::vector<std::size_t> states;  // 1..k per epoch
    std::vector<Date> epoch_ends;
    std::vector<double> state_means;  // mean average correlation, index = state - 1
    std::vector<std::size_t> raw_to_state;
};

/// Relabels clusters 1..k by ascending mean average correlation of their
/// members. Equal means keep raw-id order and emit a TieWarning.
StateSequence order_states(const Clustering& clustering, const MatrixCloud& cloud,
                           Warnings* warnings = nullptr);

/// Mean of the strict upper triangle of a packed column.
double average_correlation_packed(std::span<const double> packed, std::size_t dim);

}  // namespace marketstates
