#include "marketstates/mds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include <Eigen/Dense>

#include "marketstates/corrmat.hpp"
#include "marketstates/format.hpp"
#include "marketstates/parallel.hpp"
#include "marketstates/random.hpp"

namespace marketstates {

namespace {

constexpr const char* kPalette[8] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                     "#9467bd", "#8c564b", "#e377c2", "#17becf"};

DistanceMatrix fill_distances(std::size_t n, unsigned threads,
                              const std::function<double(std::size_t, std::size_t)>& dist)
{
    if (n < 2) {
        throw Error(ErrorCode::InsufficientData, "distance matrix needs at least two matrices");
    }
    DistanceMatrix d(n, 0.0);
    auto packed = d.packed();
    parallel_for(n, threads, [&](std::size_t i) {
        std::size_t k = packed_index(n, i, i) + 1;
        for (std::size_t j = i + 1; j < n; ++j) {
            packed[k++] = dist(i, j);
        }
    });
    return d;
}

/// Double-centred matrix -1/2 J D^2 J.
Eigen::MatrixXd double_centre(const DistanceMatrix& d)
{
    const auto n = static_cast<Eigen::Index>(d.dim());
    Eigen::MatrixXd sq(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sq(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = d(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            sq(i, j) = v * v;
            sq(j, i) = v * v;
        }
    }
    const Eigen::VectorXd row_mean = sq.rowwise().mean();
    const double grand = row_mean.mean();
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            b(i, j) = -0.5 * (sq(i, j) - row_mean(i) - row_mean(j) + grand);
        }
    }
    return b;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v)
{
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (std::abs(v(i)) > std::abs(v(arg))) {
            arg = i;
        }
    }
    if (v.size() > 0 && v(arg) < 0.0) {
        v = -v;
    }
}

std::string svg_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

DistanceMatrix distance_matrix(const MatrixCloud& cloud, unsigned threads)
{
    const Eigen::Index len = cloud.points.rows();
    return fill_distances(cloud.size(), threads, [&](std::size_t i, std::size_t j) {
        return l1_distance({cloud.points.col(static_cast<Eigen::Index>(i)).data(),
                            static_cast<std::size_t>(len)},
                           {cloud.points.col(static_cast<Eigen::Index>(j)).data(),
                            static_cast<std::size_t>(len)});
    });
}

DistanceMatrix distance_matrix(const std::vector<PackedSymmetric>& matrices, unsigned threads)
{
    for (const auto& m : matrices) {
        if (m.dim() != matrices.front().dim()) {
            throw Error(ErrorCode::DimensionMismatch, "matrix sequence has mixed dimensions");
        }
    }
    return fill_distances(matrices.size(), threads, [&](std::size_t i, std::size_t j) {
        return matrix_distance(matrices[i], matrices[j]);
    });
}

EigenPairs top_eigenpairs(const Eigen::MatrixXd& b, std::size_t count)
{
    const Eigen::Index n = b.rows();
    const auto want = static_cast<Eigen::Index>(count);
    if (want < 1 || want > n) {
        throw Error(ErrorCode::ParameterRange, "requested eigenpair count out of range");
    }
    const double scale = std::max(b.norm(), 1e-300);
    const double tol = 1e-11 * scale;

    Eigen::MatrixXd q_basis(n, std::min<Eigen::Index>(n, 4 * want + 40));
    std::vector<double> alpha;
    std::vector<double> beta;

    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        q(i) = std::sin(0.5 + 1.7 * static_cast<double>(i)) + 0.1;
    }
    q.normalize();
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(n);
    Rng restart_rng(0x5eedULL);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j >= q_basis.cols()) {
            q_basis.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(n, 2 * q_basis.cols()));
        }
        q_basis.col(j) = q;
        Eigen::VectorXd w = b * q;
        const double a = q.dot(w);
        alpha.push_back(a);
        w -= a * q;
        if (j > 0) {
            w -= beta.back() * prev;
        }
        for (int pass = 0; pass < 2; ++pass) {
            const auto basis = q_basis.leftCols(j + 1);
            w -= basis * (basis.transpose() * w);
        }
        const double bnorm = w.norm();
        const Eigen::Index m = j + 1;

        const bool exhausted = bnorm <= 1e-12 * scale;
        if (m >= want && (exhausted || m == n || m % 5 == 0)) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
            for (Eigen::Index i = 0; i < m; ++i) {
                t(i, i) = alpha[static_cast<std::size_t>(i)];
                if (i + 1 < m) {
                    t(i, i + 1) = beta[static_cast<std::size_t>(i)];
                    t(i + 1, i) = beta[static_cast<std::size_t>(i)];
                }
            }
            ritz.compute(t);
            bool converged = true;
            for (Eigen::Index r = 0; r < want; ++r) {
                const double residual = std::abs(bnorm * ritz.eigenvectors()(m - 1, m - 1 - r));
                converged = converged && residual <= tol;
            }
            if (converged || exhausted || m == n) {
                EigenPairs out;
                out.values.resize(want);
                out.vectors.resize(n, want);
                for (Eigen::Index r = 0; r < want; ++r) {
                    out.values(r) = ritz.eigenvalues()(m - 1 - r);
                    out.vectors.col(r) = q_basis.leftCols(m) * ritz.eigenvectors().col(m - 1 - r);
                }
                return out;
            }
        }

        prev = q;
        if (exhausted) {
            // Invariant subspace found before enough Ritz pairs: continue from
            // a fresh direction orthogonal to the basis.
            beta.push_back(0.0);
            Eigen::VectorXd fresh(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                fresh(i) = restart_rng.uniform() - 0.5;
            }
            for (int pass = 0; pass < 2; ++pass) {
                const auto basis = q_basis.leftCols(m);
                fresh -= basis * (basis.transpose() * fresh);
            }
            q = fresh.normalized();
        } else {
            beta.push_back(bnorm);
            q = w / bnorm;
        }
    }
    throw Error(ErrorCode::ParameterRange, "Lanczos iteration ran out of directions");
}

Embedding classical_mds(const DistanceMatrix& d, std::size_t dim, Warnings* warnings,
                        const MdsOptions& options)
{
    const std::size_t n = d.dim();
    if (n < 2) {
        throw Error(ErrorCode::InsufficientData, "MDS needs at least two points");
    }
    if (dim < 1 || dim > n - 1) {
        throw Error(ErrorCode::ParameterRange, "embedding dimension must lie in 1..n-1");
    }
    const Eigen::MatrixXd b = double_centre(d);
    const auto want = static_cast<Eigen::Index>(dim);

    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    double positive_mass = 0.0;
    Embedding e;
    if (n < options.dense_limit) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
        const Eigen::Index last = static_cast<Eigen::Index>(n) - 1;
        values.resize(want);
        vectors.resize(static_cast<Eigen::Index>(n), want);
        for (Eigen::Index r = 0; r < want; ++r) {
            values(r) = eig.eigenvalues()(last - r);
            vectors.col(r) = eig.eigenvectors().col(last - r);
        }
        positive_mass = eig.eigenvalues().cwiseMax(0.0).sum();
        e.exact_mass = true;
    } else {
        EigenPairs pairs = top_eigenpairs(b, dim);
        values = std::move(pairs.values);
        vectors = std::move(pairs.vectors);
        positive_mass = std::max(b.trace(), values.cwiseMax(0.0).sum());
        e.exact_mass = false;
    }

    const double cutoff = 1e-12 * std::max(std::abs(values(0)), values.cwiseAbs().maxCoeff());
    e.coords.resize(static_cast<Eigen::Index>(n), want);
    e.axis_fraction.assign(dim, 0.0);
    for (Eigen::Index r = 0; r < want; ++r) {
        const double lambda = values(r);
        e.eigenvalues.push_back(lambda);
        if (lambda > cutoff) {
            e.coords.col(r) = vectors.col(r) * std::sqrt(lambda);
            fix_sign(e.coords.col(r));
            e.axis_fraction[static_cast<std::size_t>(r)] =
                positive_mass > 0.0 ? lambda / positive_mass : 0.0;
        } else {
            e.coords.col(r).setZero();
            ++e.clamped_axes;
        }
    }
    for (double f : e.axis_fraction) {
        e.captured_fraction += f;
    }
    e.captured_fraction = std::clamp(e.captured_fraction, 0.0, 1.0);
    if (e.clamped_axes > 0) {
        warn(warnings, "DegradedRank",
             std::to_string(e.clamped_axes) + " of " + std::to_string(dim) +
                 " requested axes have no positive eigenvalue and were set to zero");
    }
    return e;
}

std::vector<ScatterPoint> project_2d(const Embedding& e, std::size_t axis_a, std::size_t axis_b)
{
    if (axis_a < 1 || axis_b < 1 || axis_a > e.dim() || axis_b > e.dim() || axis_a == axis_b) {
        throw Error(ErrorCode::AxisOutOfRange, "axes " + std::to_string(axis_a) + "," +
                                                   std::to_string(axis_b) + " invalid for a " +
                                                   std::to_string(e.dim()) + "-d embedding");
    }
    std::vector<ScatterPoint> points(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        points[i].x = e.coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(axis_a - 1));
        points[i].y = e.coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(axis_b - 1));
        points[i].state = i < e.states.size() ? e.states[i] : 0;
        if (i < e.epoch_ends.size()) {
            points[i].epoch_end = e.epoch_ends[i];
        }
    }
    return points;
}

std::string embedding_table(const Embedding& e)
{
    std::string out = "epoch_end,state,x,y,z\n";
    for (std::size_t i = 0; i < e.size(); ++i) {
        out += i < e.epoch_ends.size() ? format_date(e.epoch_ends[i]) : std::string();
        out += ',';
        out += std::to_string(i < e.states.size() ? e.states[i] : 0);
        for (std::size_t a = 0; a < 3; ++a) {
            out += ',';
            out += format_real(a < e.dim() ? e.coords(static_cast<Eigen::Index>(i),
                                                      static_cast<Eigen::Index>(a))
                                           : 0.0);
        }
        out += '\n';
    }
    return out;
}

std::string scatter_svg(const std::vector<ScatterPoint>& points, const Embedding& e,
                        std::size_t axis_a, std::size_t axis_b)
{
    constexpr double size = 640.0;
    constexpr double margin = 56.0;
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    for (const auto& p : points) {
        x_lo = std::min(x_lo, p.x);
        x_hi = std::max(x_hi, p.x);
        y_lo = std::min(y_lo, p.y);
        y_hi = std::max(y_hi, p.y);
    }
    const double x_span = x_hi > x_lo ? x_hi - x_lo : 1.0;
    const double y_span = y_hi > y_lo ? y_hi - y_lo : 1.0;
    const double inner = size - 2.0 * margin;
    auto px = [&](double x) { return margin + (x - x_lo) / x_span * inner; };
    auto py = [&](double y) { return size - margin - (y - y_lo) / y_span * inner; };

    auto axis_label = [&](std::size_t axis) {
        const double f = axis - 1 < e.axis_fraction.size() ? e.axis_fraction[axis - 1] : 0.0;
        return "axis " + std::to_string(axis) + " (" + svg_number(100.0 * f) + "% of positive mass)";
    };

    std::string out =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n"
        "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
    out += "<line x1=\"" + svg_number(margin) + "\" y1=\"" + svg_number(size - margin) + "\" x2=\"" +
           svg_number(size - margin) + "\" y2=\"" + svg_number(size - margin) +
           "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + svg_number(margin) + "\" y1=\"" + svg_number(margin) + "\" x2=\"" +
           svg_number(margin) + "\" y2=\"" + svg_number(size - margin) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"320\" y=\"628\" text-anchor=\"middle\" font-size=\"14\">" + axis_label(axis_a) +
           "</text>\n";
    out += "<text x=\"18\" y=\"320\" text-anchor=\"middle\" font-size=\"14\" "
           "transform=\"rotate(-90 18 320)\">" +
           axis_label(axis_b) + "</text>\n";
    for (const auto& p : points) {
        const char* colour = p.state == 0 ? "#7f7f7f" : kPalette[(p.state - 1) % 8];
        out += "<circle cx=\"" + svg_number(px(p.x)) + "\" cy=\"" + svg_number(py(p.y)) +
               "\" r=\"2\" fill=\"" + colour + "\" fill-opacity=\"0.7\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace marketstates
