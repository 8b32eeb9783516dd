#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "marketstates/clustering.hpp"
#include "marketstates/random.hpp"

namespace marketstates {

/// Row-stochastic matrix of consecutive-epoch state transitions.
/// States are 1-based in sequences and 0-based as matrix indices.
struct TransitionMatrix {
    std::size_t k = 0;
    Eigen::MatrixXd probs;
    Eigen::MatrixXd counts;  // integral values
    std::size_t n_transitions = 0;
    std::vector<bool> dangling;  // rows with no observed transitions, set to uniform
};

/// Wraps a given row-stochastic matrix (no counts). Throws ParameterRange
/// when a row is negative or does not sum to 1 within 1e-9.
TransitionMatrix make_transition_matrix(const Eigen::MatrixXd& probs);

TransitionMatrix transition_matrix(const StateSequence& seq);
TransitionMatrix transition_matrix(std::span<const std::size_t> states, std::size_t k);

/// Keeps every `stride`-th state, starting with the first.
std::vector<std::size_t> subsample(std::span<const std::size_t> states, std::size_t stride);

struct EquilibriumOptions {
    double tolerance = 1e-13;
    std::size_t max_steps = 1'000'000;
    /// Mixing weight toward the uniform chain; 0 disables damping.
    double damping = 0.0;
};

struct EquilibriumVector {
    Eigen::VectorXd pi;
    std::size_t steps = 0;
};

/// Left fixed point by power iteration from the uniform vector.
/// Throws NonErgodic when the iterates do not settle.
EquilibriumVector equilibrium_distribution(const TransitionMatrix& t,
                                           const EquilibriumOptions& options = {});

/// Share of observed transitions with |i - j| <= 1.
double tridiagonality(const TransitionMatrix& t);

/// Draws `length` states (1-based) of the chain `probs` starting at `start`.
std::vector<std::size_t> sample_chain(const Eigen::MatrixXd& probs, std::size_t start,
                                      std::size_t length, Rng& rng);

struct MarkovianityOptions {
    std::size_t replicates = 200;
    double quantile = 0.95;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Two-step consistency test: compares the empirical two-step transition
/// matrix with the square of the fitted one-step matrix. The statistic is the
/// largest per-row total-variation distance; the threshold is a parametric
/// bootstrap quantile of the same statistic under the fitted chain.
struct MarkovianityReport {
    static constexpr const char* kLabel = "necessary condition, per external reference";

    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::vector<double> row_tv;  // NaN for rows without two-step observations
    std::size_t replicates = 0;
};

MarkovianityReport markovianity_check(std::span<const std::size_t> states, std::size_t k,
                                      const MarkovianityOptions& options = {});
MarkovianityReport markovianity_check(const StateSequence& seq,
                                      const MarkovianityOptions& options = {});

}  // namespace marketstates
