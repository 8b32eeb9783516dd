#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "marketstates/clustering.hpp"
#include "marketstates/date.hpp"
#include "marketstates/error.hpp"
#include "marketstates/packed.hpp"

namespace marketstates {

/// Pairwise distances, packed; zero diagonal.
using DistanceMatrix = PackedSymmetric;

/// All pairwise matrix distances of the cloud, filled row-parallel.
DistanceMatrix distance_matrix(const MatrixCloud& cloud, unsigned threads = 1);
DistanceMatrix distance_matrix(const std::vector<PackedSymmetric>& matrices, unsigned threads = 1);

struct Embedding {
    Eigen::MatrixXd coords;            // n x dim, columns by descending eigenvalue
    std::vector<double> eigenvalues;   // the dim leading eigenvalues, before clamping
    /// Share of positive eigenvalue mass held by the kept axes, overall and per axis.
    double captured_fraction = 0.0;
    std::vector<double> axis_fraction;
    /// False when the denominator is the trace of the centred matrix (iterative
    /// path), which understates the positive mass of non-Euclidean inputs.
    bool exact_mass = true;
    std::size_t clamped_axes = 0;
    std::vector<std::size_t> states;   // optional, one per point
    std::vector<Date> epoch_ends;      // optional, one per point

    std::size_t size() const noexcept { return static_cast<std::size_t>(coords.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(coords.cols()); }
};

struct MdsOptions {
    /// Dense eigensolve below this many points; Lanczos at or above it.
    std::size_t dense_limit = 1500;
};

/// Classical (Torgerson) scaling. Axes whose eigenvalue is not positive are
/// zeroed and reported with a DegradedRank warning. Each column is flipped so
/// that its entry of largest magnitude is positive.
Embedding classical_mds(const DistanceMatrix& d, std::size_t dim, Warnings* warnings = nullptr,
                        const MdsOptions& options = {});

/// Leading eigenpairs of a symmetric matrix by Lanczos with full
/// reorthogonalisation. Eigenvalues are returned in descending order.
struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};
EigenPairs top_eigenpairs(const Eigen::MatrixXd& b, std::size_t count);

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    std::size_t state = 0;
    Date epoch_end;
};

/// Coordinates on two 1-based axes.
std::vector<ScatterPoint> project_2d(const Embedding& e, std::size_t axis_a = 1, std::size_t axis_b = 2);

/// `epoch_end,state,x,y,z` table; axes beyond the embedding are written as 0.
std::string embedding_table(const Embedding& e);

/// Standalone SVG scatter, one circle per point coloured by state.
std::string scatter_svg(const std::vector<ScatterPoint>& points, const Embedding& e,
                        std::size_t axis_a = 1, std::size_t axis_b = 2);

}  // namespace marketstates
