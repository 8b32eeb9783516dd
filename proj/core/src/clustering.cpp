#include "marketstates/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "marketstates/format.hpp"
#include "marketstates/parallel.hpp"
#include "marketstates/random.hpp"

namespace marketstates {

namespace {

double l1(const double* a, const double* b, Eigen::Index n)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        s += std::abs(a[i] - b[i]);
    }
    return s;
}

double sq_l2(const double* a, const double* b, Eigen::Index n)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

class Lloyd {
public:
    Lloyd(const Eigen::MatrixXd& points, const KMeansOptions& options)
        : points_(points), opt_(options), dim_(points.rows()), count_(points.cols())
    {
    }

    Clustering run()
    {
        Clustering result;
        result.k = opt_.k;
        result.seed = opt_.seed;
        centroids_.resize(dim_, static_cast<Eigen::Index>(opt_.k));
        initialise();

        std::vector<std::size_t> current(static_cast<std::size_t>(count_));
        std::vector<std::size_t> next(current.size());
        result.objective_history.push_back(assign(current));

        for (std::size_t iter = 1; iter <= opt_.max_iter; ++iter) {
            update_centroids(current);
            repair_empty(current);
            result.objective_history.push_back(assign(next));
            result.iterations = iter;
            const bool unchanged = next == current;
            current.swap(next);
            if (unchanged) {
                result.converged = true;
                break;
            }
        }

        result.d_intra = 0.0;
        for (Eigen::Index p = 0; p < count_; ++p) {
            result.d_intra += l1(points_.col(p).data(),
                                 centroids_.col(static_cast<Eigen::Index>(current[p])).data(), dim_);
        }
        result.d_intra /= static_cast<double>(count_);
        result.assignments = std::move(current);
        result.centroids = std::move(centroids_);
        return result;
    }

private:
    double distance(const double* a, const double* b) const
    {
        return opt_.metric == Metric::L1 ? l1(a, b, dim_) : sq_l2(a, b, dim_);
    }

    void initialise()
    {
        Rng rng(opt_.seed);
        std::vector<std::size_t> index(static_cast<std::size_t>(count_));
        std::iota(index.begin(), index.end(), 0);
        for (std::size_t c = 0; c < opt_.k; ++c) {
            const std::size_t pick = c + static_cast<std::size_t>(rng.below(index.size() - c));
            std::swap(index[c], index[pick]);
            centroids_.col(static_cast<Eigen::Index>(c)) =
                points_.col(static_cast<Eigen::Index>(index[c]));
        }
    }

    double assign(std::vector<std::size_t>& labels) const
    {
        double objective = 0.0;
        for (Eigen::Index p = 0; p < count_; ++p) {
            const double* x = points_.col(p).data();
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < opt_.k; ++c) {
                const double d = distance(x, centroids_.col(static_cast<Eigen::Index>(c)).data());
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            labels[static_cast<std::size_t>(p)] = best_c;
            objective += best;
        }
        return objective;
    }

    void update_centroids(const std::vector<std::size_t>& labels)
    {
        sizes_.assign(opt_.k, 0);
        centroids_.setZero();
        for (Eigen::Index p = 0; p < count_; ++p) {
            const auto c = labels[static_cast<std::size_t>(p)];
            centroids_.col(static_cast<Eigen::Index>(c)) += points_.col(p);
            ++sizes_[c];
        }
        for (std::size_t c = 0; c < opt_.k; ++c) {
            if (sizes_[c] > 0) {
                centroids_.col(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes_[c]);
            }
        }
    }

    void repair_empty(std::vector<std::size_t>& labels)
    {
        for (std::size_t c = 0; c < opt_.k; ++c) {
            if (sizes_[c] != 0) {
                continue;
            }
            double worst = -1.0;
            Eigen::Index worst_p = -1;
            for (Eigen::Index p = 0; p < count_; ++p) {
                const auto owner = labels[static_cast<std::size_t>(p)];
                if (sizes_[owner] < 2) {
                    continue;
                }
                const double d = distance(points_.col(p).data(),
                                          centroids_.col(static_cast<Eigen::Index>(owner)).data());
                if (d > worst) {
                    worst = d;
                    worst_p = p;
                }
            }
            if (worst_p < 0) {
                continue;
            }
            --sizes_[labels[static_cast<std::size_t>(worst_p)]];
            labels[static_cast<std::size_t>(worst_p)] = c;
            sizes_[c] = 1;
            centroids_.col(static_cast<Eigen::Index>(c)) = points_.col(worst_p);
        }
    }

    const Eigen::MatrixXd& points_;
    const KMeansOptions& opt_;
    Eigen::Index dim_;
    Eigen::Index count_;
    Eigen::MatrixXd centroids_;
    std::vector<std::size_t> sizes_;
};

MatrixCloud cloud_from(const std::vector<const PackedSymmetric*>& matrices,
                       std::vector<Date> epoch_ends)
{
    MatrixCloud cloud;
    if (matrices.empty()) {
        return cloud;
    }
    cloud.matrix_dim = matrices.front()->dim();
    const auto len = static_cast<Eigen::Index>(packed_size(cloud.matrix_dim));
    cloud.points.resize(len, static_cast<Eigen::Index>(matrices.size()));
    for (std::size_t e = 0; e < matrices.size(); ++e) {
        if (matrices[e]->dim() != cloud.matrix_dim) {
            throw Error(ErrorCode::DimensionMismatch, "matrix sequence has mixed dimensions");
        }
        cloud.points.col(static_cast<Eigen::Index>(e)) =
            Eigen::Map<const Eigen::VectorXd>(matrices[e]->packed().data(), len);
    }
    cloud.epoch_ends = std::move(epoch_ends);
    return cloud;
}

template <typename M>
MatrixCloud cloud_from_typed(const std::vector<M>& matrices)
{
    std::vector<const PackedSymmetric*> ptrs;
    std::vector<Date> ends;
    for (const auto& m : matrices) {
        ptrs.push_back(&m.values);
        ends.push_back(m.epoch_end);
    }
    return cloud_from(ptrs, std::move(ends));
}

/// Shifted two-pass population standard deviation; exactly zero when all
/// values are equal.
double population_std(const std::vector<double>& values)
{
    const double origin = values.front();
    double shift_mean = 0.0;
    for (double v : values) {
        shift_mean += v - origin;
    }
    shift_mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        const double d = (v - origin) - shift_mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(values.size()));
}

/// sigma_intra values closer than this fraction of the cells' dispersion are
/// treated as equal when choosing the optimum.
constexpr double kSigmaTieTolerance = 1e-12;

bool better_cell(const GridCell& a, const GridCell& b)
{
    const double tol = kSigmaTieTolerance * std::max(a.mean_d_intra, b.mean_d_intra);
    if (std::abs(a.sigma_intra - b.sigma_intra) > tol) {
        return a.sigma_intra < b.sigma_intra;
    }
    const double ra = a.relative_d_intra();
    const double rb = b.relative_d_intra();
    if (ra != rb) {
        return ra < rb;
    }
    if (a.k != b.k) {
        return a.k < b.k;
    }
    return a.epsilon < b.epsilon;
}

}  // namespace

PackedSymmetric MatrixCloud::matrix(std::size_t epoch) const
{
    const auto col = points.col(static_cast<Eigen::Index>(epoch));
    return PackedSymmetric(matrix_dim, std::vector<double>(col.data(), col.data() + col.size()));
}

MatrixCloud make_cloud(const std::vector<CorrMatrix>& matrices) { return cloud_from_typed(matrices); }
MatrixCloud make_cloud(const std::vector<GuhrMatrix>& matrices) { return cloud_from_typed(matrices); }

MatrixCloud make_cloud(const std::vector<PackedSymmetric>& matrices)
{
    std::vector<const PackedSymmetric*> ptrs;
    for (const auto& m : matrices) {
        ptrs.push_back(&m);
    }
    return cloud_from(ptrs, std::vector<Date>(matrices.size()));
}

MatrixCloud build_matrix_cloud(const ReturnTable& returns, const EpochSpec& spec,
                               const SectorMap* sectors, double epsilon, unsigned threads,
                               Warnings* warnings)
{
    const std::size_t count = epoch_count(returns.rows(), spec);
    std::optional<CoarseGrainer> grainer;
    if (sectors != nullptr) {
        grainer.emplace(returns.tickers, *sectors, warnings);
    }

    MatrixCloud cloud;
    cloud.matrix_dim = grainer ? grainer->sector_count() : returns.cols();
    cloud.points.resize(static_cast<Eigen::Index>(packed_size(cloud.matrix_dim)),
                        static_cast<Eigen::Index>(count));
    cloud.epoch_ends.reserve(count);

    rolling_correlations(
        returns, spec,
        [&](CorrMatrix&& c) {
            // Power map first, then coarse graining.
            const CorrMatrix mapped = power_map(c, epsilon);
            const auto col = static_cast<Eigen::Index>(c.epoch_index);
            if (grainer) {
                const GuhrMatrix g = grainer->apply(mapped);
                cloud.points.col(col) = Eigen::Map<const Eigen::VectorXd>(
                    g.values.packed().data(), cloud.points.rows());
            } else {
                cloud.points.col(col) = Eigen::Map<const Eigen::VectorXd>(
                    mapped.values.packed().data(), cloud.points.rows());
            }
            cloud.epoch_ends.push_back(c.epoch_end);
        },
        threads);
    return cloud;
}

std::string_view to_string(Metric metric) noexcept
{
    return metric == Metric::L1 ? "l1" : "l2";
}

std::optional<Metric> parse_metric(std::string_view text) noexcept
{
    if (text == "l1") {
        return Metric::L1;
    }
    if (text == "l2") {
        return Metric::L2;
    }
    return std::nullopt;
}

std::vector<std::size_t> Clustering::cluster_sizes() const
{
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignments) {
        ++sizes[a];
    }
    return sizes;
}

Clustering kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options)
{
    const auto count = static_cast<std::size_t>(points.cols());
    if (options.k < 1) {
        throw Error(ErrorCode::ParameterRange, "k must be at least 1");
    }
    if (options.max_iter < 1) {
        throw Error(ErrorCode::ParameterRange, "max_iter must be at least 1");
    }
    if (options.k > count) {
        throw Error(ErrorCode::InsufficientData, "k = " + std::to_string(options.k) +
                                                     " exceeds the " + std::to_string(count) +
                                                     " matrices to cluster");
    }
    return Lloyd(points, options).run();
}

SigmaIntraResult sigma_intra(const Eigen::MatrixXd& points, std::size_t k, std::size_t n_init,
                             std::uint64_t seed, std::size_t max_iter, Metric metric,
                             unsigned threads)
{
    if (n_init < 2) {
        throw Error(ErrorCode::ParameterRange, "n_init must be at least 2");
    }
    SigmaIntraResult result;
    result.d_intra.resize(n_init);
    result.sub_seeds.resize(n_init);
    for (std::size_t i = 0; i < n_init; ++i) {
        result.sub_seeds[i] = derive_seed(seed, i);
    }
    parallel_for(n_init, threads, [&](std::size_t i) {
        const KMeansOptions opt{k, result.sub_seeds[i], max_iter, metric};
        result.d_intra[i] = kmeans(points, opt).d_intra;
    });

    result.mean_d_intra =
        std::accumulate(result.d_intra.begin(), result.d_intra.end(), 0.0) / static_cast<double>(n_init);
    result.sigma_intra = population_std(result.d_intra);

    std::size_t best = 0;
    for (std::size_t i = 1; i < n_init; ++i) {
        if (result.d_intra[i] < result.d_intra[best] ||
            (result.d_intra[i] == result.d_intra[best] && result.sub_seeds[i] < result.sub_seeds[best])) {
            best = i;
        }
    }
    result.best_restart = best;
    // Re-running the winner keeps memory flat; kmeans is deterministic in its seed.
    result.best = kmeans(points, KMeansOptions{k, result.sub_seeds[best], max_iter, metric});
    return result;
}

GridResult optimize_states(const std::vector<MatrixCloud>& clouds, const OptimizeOptions& options)
{
    if (options.epsilon_grid.empty() || options.k_first > options.k_last || options.k_first < 1) {
        throw Error(ErrorCode::ParameterRange, "epsilon grid and k range must be nonempty");
    }
    if (clouds.size() != options.epsilon_grid.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one matrix cloud is needed per epsilon");
    }

    GridResult grid;
    grid.n_init = options.n_init;
    grid.k_min_admissible = options.k_min_admissible;
    for (std::size_t e = 0; e < clouds.size(); ++e) {
        const Eigen::MatrixXd& points = clouds[e].points;
        double dispersion = 0.0;
        if (points.cols() > 0) {
            const Eigen::VectorXd mean = points.rowwise().mean();
            for (Eigen::Index c = 0; c < points.cols(); ++c) {
                dispersion += (points.col(c) - mean).cwiseAbs().sum();
            }
            dispersion /= static_cast<double>(points.cols());
        }
        for (std::size_t k = options.k_first; k <= options.k_last; ++k) {
            GridCell cell;
            cell.k = k;
            cell.epsilon = options.epsilon_grid[e];
            cell.dispersion = dispersion;
            try {
                const auto s = sigma_intra(clouds[e].points, k, options.n_init, options.seed,
                                           options.max_iter, options.metric, options.threads);
                cell.sigma_intra = s.sigma_intra;
                cell.mean_d_intra = s.mean_d_intra;
            } catch (const Error& err) {
                cell.sigma_intra = std::numeric_limits<double>::quiet_NaN();
                cell.mean_d_intra = std::numeric_limits<double>::quiet_NaN();
                cell.error = err.what();
            }
            grid.cells.push_back(std::move(cell));
        }
    }

    const GridCell* chosen = nullptr;
    for (const auto& cell : grid.cells) {
        if (cell.error || cell.k < options.k_min_admissible) {
            continue;
        }
        if (chosen == nullptr || better_cell(cell, *chosen)) {
            chosen = &cell;
        }
    }
    if (chosen == nullptr) {
        throw Error(ErrorCode::InsufficientData,
                    "no error-free grid cell with k >= " + std::to_string(options.k_min_admissible));
    }
    grid.chosen_k = chosen->k;
    grid.chosen_epsilon = chosen->epsilon;
    return grid;
}

GridResult optimize_states(const ReturnTable& returns, const EpochSpec& spec,
                           const SectorMap* sectors, const OptimizeOptions& options,
                           Warnings* warnings)
{
    std::vector<MatrixCloud> clouds;
    clouds.reserve(options.epsilon_grid.size());
    for (double eps : options.epsilon_grid) {
        clouds.push_back(build_matrix_cloud(returns, spec, sectors, eps, options.threads,
                                            clouds.empty() ? warnings : nullptr));
    }
    return optimize_states(clouds, options);
}

double average_correlation_packed(std::span<const double> packed, std::size_t dim)
{
    if (dim < 2) {
        throw Error(ErrorCode::ParameterRange, "average correlation needs dimension >= 2");
    }
    double sum = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < dim; ++i) {
        ++k;
        for (std::size_t j = i + 1; j < dim; ++j) {
            sum += packed[k++];
        }
    }
    return sum / (static_cast<double>(dim) * static_cast<double>(dim - 1) / 2.0);
}

StateSequence order_states(const Clustering& clustering, const MatrixCloud& cloud,
                           Warnings* warnings)
{
    const std::size_t k = clustering.k;
    if (clustering.assignments.size() != cloud.size()) {
        throw Error(ErrorCode::DimensionMismatch, "clustering and matrix sequence differ in length");
    }
    std::vector<double> sums(k, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t e = 0; e < cloud.size(); ++e) {
        const auto col = cloud.points.col(static_cast<Eigen::Index>(e));
        const auto c = clustering.assignments[e];
        sums[c] += average_correlation_packed({col.data(), static_cast<std::size_t>(col.size())},
                                              cloud.matrix_dim);
        ++counts[c];
    }
    std::vector<double> means(k);
    for (std::size_t c = 0; c < k; ++c) {
        means[c] = counts[c] > 0 ? sums[c] / static_cast<double>(counts[c])
                                 : std::numeric_limits<double>::infinity();
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return means[a] < means[b]; });
    for (std::size_t i = 1; i < k; ++i) {
        if (means[order[i]] == means[order[i - 1]]) {
            warn(warnings, "TieWarning",
                 "clusters " + std::to_string(order[i - 1]) + " and " + std::to_string(order[i]) +
                     " share mean average correlation " + format_real(means[order[i]]));
        }
    }

    StateSequence seq;
    seq.k = k;
    seq.raw_to_state.resize(k);
    seq.state_means.resize(k);
    for (std::size_t s = 0; s < k; ++s) {
        seq.raw_to_state[order[s]] = s + 1;
        seq.state_means[s] = means[order[s]];
    }
    seq.states.reserve(cloud.size());
    for (auto a : clustering.assignments) {
        seq.states.push_back(seq.raw_to_state[a]);
    }
    seq.epoch_ends = cloud.epoch_ends;
    return seq;
}

}  // namespace marketstates
