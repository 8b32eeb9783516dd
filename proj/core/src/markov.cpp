#include "marketstates/markov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marketstates/error.hpp"
#include "marketstates/parallel.hpp"

namespace marketstates {

namespace {

void check_states(std::span<const std::size_t> states, std::size_t k)
{
    if (k < 1) {
        throw Error(ErrorCode::ParameterRange, "state count must be at least 1");
    }
    for (auto s : states) {
        if (s < 1 || s > k) {
            throw Error(ErrorCode::ParameterRange,
                        "state label " + std::to_string(s) + " outside 1.." + std::to_string(k));
        }
    }
}

/// Row-normalised counts of pairs (s_t, s_{t+lag}). Rows without counts stay zero.
Eigen::MatrixXd lagged_counts(std::span<const std::size_t> states, std::size_t k, std::size_t lag)
{
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                   static_cast<Eigen::Index>(k));
    for (std::size_t t = 0; t + lag < states.size(); ++t) {
        counts(static_cast<Eigen::Index>(states[t] - 1),
               static_cast<Eigen::Index>(states[t + lag] - 1)) += 1.0;
    }
    return counts;
}

struct TwoStep {
    double statistic = 0.0;
    std::vector<double> row_tv;
};

TwoStep two_step_statistic(std::span<const std::size_t> states, std::size_t k)
{
    const TransitionMatrix one = transition_matrix(states, k);
    const Eigen::MatrixXd p2 = one.probs * one.probs;
    const Eigen::MatrixXd c2 = lagged_counts(states, k, 2);

    TwoStep out;
    out.row_tv.assign(k, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) {
        const double total = c2.row(i).sum();
        if (total == 0.0) {
            continue;
        }
        const double tv = 0.5 * (c2.row(i) / total - p2.row(i)).cwiseAbs().sum();
        out.row_tv[static_cast<std::size_t>(i)] = tv;
        out.statistic = std::max(out.statistic, tv);
    }
    return out;
}

}  // namespace

TransitionMatrix make_transition_matrix(const Eigen::MatrixXd& probs)
{
    if (probs.rows() != probs.cols() || probs.rows() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "transition matrix must be square and nonempty");
    }
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        if ((probs.row(i).array() < 0.0).any() || std::abs(probs.row(i).sum() - 1.0) > 1e-9) {
            throw Error(ErrorCode::ParameterRange,
                        "row " + std::to_string(i + 1) + " is not a probability vector");
        }
    }
    TransitionMatrix t;
    t.k = static_cast<std::size_t>(probs.rows());
    t.probs = probs;
    t.counts = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());
    t.dangling.assign(t.k, false);
    return t;
}

TransitionMatrix transition_matrix(std::span<const std::size_t> states, std::size_t k)
{
    if (states.size() < 2) {
        throw Error(ErrorCode::InsufficientSequence, "need at least two states to count transitions");
    }
    check_states(states, k);
    TransitionMatrix t;
    t.k = k;
    t.counts = lagged_counts(states, k, 1);
    t.n_transitions = states.size() - 1;
    t.probs.resize(t.counts.rows(), t.counts.cols());
    t.dangling.assign(k, false);
    for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
        const double total = t.counts.row(i).sum();
        if (total == 0.0) {
            t.probs.row(i).setConstant(1.0 / static_cast<double>(k));
            t.dangling[static_cast<std::size_t>(i)] = true;
        } else {
            t.probs.row(i) = t.counts.row(i) / total;
        }
    }
    return t;
}

TransitionMatrix transition_matrix(const StateSequence& seq)
{
    return transition_matrix(seq.states, seq.k);
}

std::vector<std::size_t> subsample(std::span<const std::size_t> states, std::size_t stride)
{
    if (stride < 1) {
        throw Error(ErrorCode::ParameterRange, "stride must be at least 1");
    }
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < states.size(); t += stride) {
        out.push_back(states[t]);
    }
    return out;
}

EquilibriumVector equilibrium_distribution(const TransitionMatrix& t, const EquilibriumOptions& options)
{
    if (!(options.damping >= 0.0 && options.damping < 1.0)) {
        throw Error(ErrorCode::ParameterRange, "damping must lie in [0, 1)");
    }
    const auto k = static_cast<Eigen::Index>(t.k);
    Eigen::MatrixXd p = t.probs;
    if (options.damping > 0.0) {
        p = (1.0 - options.damping) * p +
            Eigen::MatrixXd::Constant(k, k, options.damping / static_cast<double>(k));
    }

    Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(k, 1.0 / static_cast<double>(k));
    for (std::size_t step = 1; step <= options.max_steps; ++step) {
        Eigen::RowVectorXd next = pi * p;
        next /= next.sum();
        const double change = (next - pi).cwiseAbs().maxCoeff();
        pi = std::move(next);
        if (change < options.tolerance) {
            return {pi.transpose(), step};
        }
    }
    throw Error(ErrorCode::NonErgodic,
                "power iteration did not converge in " + std::to_string(options.max_steps) +
                    " steps; the chain may be periodic (try damping, e.g. 1e-8)");
}

double tridiagonality(const TransitionMatrix& t)
{
    if (t.k < 2) {
        throw Error(ErrorCode::ParameterRange, "tridiagonality needs at least two states");
    }
    double band = 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.counts.cols(); ++j) {
            total += t.counts(i, j);
            if (std::abs(i - j) <= 1) {
                band += t.counts(i, j);
            }
        }
    }
    return total > 0.0 ? band / total : 0.0;
}

std::vector<std::size_t> sample_chain(const Eigen::MatrixXd& probs, std::size_t start,
                                      std::size_t length, Rng& rng)
{
    std::vector<std::size_t> states;
    states.reserve(length);
    std::size_t s = start;
    const Eigen::Index k = probs.cols();
    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0) {
            const double u = rng.uniform();
            double acc = 0.0;
            Eigen::Index next = k - 1;
            for (Eigen::Index j = 0; j < k; ++j) {
                acc += probs(static_cast<Eigen::Index>(s - 1), j);
                if (u < acc) {
                    next = j;
                    break;
                }
            }
            // Guard against rounding in the cumulative sum landing on a zero-probability tail.
            while (next > 0 && probs(static_cast<Eigen::Index>(s - 1), next) == 0.0) {
                --next;
            }
            s = static_cast<std::size_t>(next) + 1;
        }
        states.push_back(s);
    }
    return states;
}

MarkovianityReport markovianity_check(std::span<const std::size_t> states, std::size_t k,
                                      const MarkovianityOptions& options)
{
    if (states.size() < 3) {
        throw Error(ErrorCode::InsufficientSequence, "Markovianity check needs at least three states");
    }
    if (options.replicates < 1 || !(options.quantile > 0.0 && options.quantile <= 1.0)) {
        throw Error(ErrorCode::ParameterRange, "invalid bootstrap settings");
    }
    check_states(states, k);

    const TwoStep observed = two_step_statistic(states, k);
    const TransitionMatrix fitted = transition_matrix(states, k);

    std::vector<double> boot(options.replicates);
    parallel_for(options.replicates, options.threads, [&](std::size_t r) {
        Rng rng(derive_seed(options.seed, r));
        const auto replica = sample_chain(fitted.probs, states.front(), states.size(), rng);
        boot[r] = two_step_statistic(replica, k).statistic;
    });
    std::sort(boot.begin(), boot.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(options.quantile * static_cast<double>(boot.size())));

    MarkovianityReport report;
    report.statistic = observed.statistic;
    report.row_tv = observed.row_tv;
    report.threshold = boot[std::max<std::size_t>(rank, 1) - 1];
    report.pass = report.statistic <= report.threshold;
    report.replicates = options.replicates;
    return report;
}

MarkovianityReport markovianity_check(const StateSequence& seq, const MarkovianityOptions& options)
{
    return markovianity_check(seq.states, seq.k, options);
}

}  // namespace marketstates
