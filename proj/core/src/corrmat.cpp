#include "marketstates/corrmat.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <Eigen/Dense>

#include "marketstates/format.hpp"
#include "marketstates/parallel.hpp"

namespace marketstates {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_epsilon(double epsilon)
{
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw Error(ErrorCode::ParameterRange,
                    "power-map epsilon must lie in [0, 1], got " + format_real(epsilon));
    }
}

void check_same_dim(const PackedSymmetric& a, const PackedSymmetric& b)
{
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "matrices of dimension " +
                                                      std::to_string(a.dim()) + " and " +
                                                      std::to_string(b.dim()));
    }
}

CorrMatrix correlate_window(const ReturnTable& returns, std::size_t start, std::size_t length,
                            const Labels& tickers, std::size_t epoch)
{
    const std::size_t n = returns.cols();
    const Eigen::Map<const RowMajor> window(returns.returns.data() + start * n,
                                            static_cast<Eigen::Index>(length),
                                            static_cast<Eigen::Index>(n));

    RowMajor z = window.rowwise() - window.colwise().mean();
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
        const bool constant = (window.col(i).array() == window(0, i)).all();
        const double ss = z.col(i).squaredNorm();
        if (constant || ss == 0.0) {
            throw Error(ErrorCode::DegenerateColumn,
                        "ticker " + returns.tickers[static_cast<std::size_t>(i)] +
                            " has zero variance in epoch " + std::to_string(epoch) +
                            " (return rows " + std::to_string(start) + ".." +
                            std::to_string(start + length - 1) + ", ending " +
                            format_date(returns.dates[start + length - 1]) + ")");
        }
        z.col(i) /= std::sqrt(ss);
    }
    Eigen::MatrixXd c(n, n);
    c.setZero();
    c.selfadjointView<Eigen::Upper>().rankUpdate(z.transpose());

    CorrMatrix out;
    out.values = PackedSymmetric(n);
    out.epoch_end = returns.dates[start + length - 1];
    out.tickers = tickers;
    auto packed = out.values.packed();
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        packed[k++] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            packed[k++] = std::clamp(c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                                     -1.0, 1.0);
        }
    }
    return out;
}

Labels make_labels(const std::vector<std::string>& v)
{
    return std::make_shared<const std::vector<std::string>>(v);
}

}  // namespace

void validate_epoch_spec(const EpochSpec& spec, std::size_t rows)
{
    if (spec.length < 2) {
        throw Error(ErrorCode::ParameterRange, "epoch length must be at least 2");
    }
    if (spec.shift < 1) {
        throw Error(ErrorCode::ParameterRange, "epoch shift must be at least 1");
    }
    if (spec.length > rows) {
        throw Error(ErrorCode::InsufficientData,
                    "epoch length " + std::to_string(spec.length) + " exceeds the " +
                        std::to_string(rows) + " available return rows");
    }
}

std::size_t epoch_count(std::size_t rows, const EpochSpec& spec)
{
    validate_epoch_spec(spec, rows);
    return (rows - spec.length) / spec.shift + 1;
}

CorrMatrix epoch_correlation(const ReturnTable& returns, std::size_t start, const EpochSpec& spec)
{
    validate_epoch_spec(spec, returns.rows());
    if (start + spec.length > returns.rows()) {
        throw Error(ErrorCode::ParameterRange, "window starting at row " + std::to_string(start) +
                                                   " runs past the end of the return table");
    }
    CorrMatrix c = correlate_window(returns, start, spec.length, make_labels(returns.tickers),
                                    start / spec.shift);
    c.epoch_index = start / spec.shift;
    return c;
}

std::vector<CorrMatrix> rolling_correlations(const ReturnTable& returns, const EpochSpec& spec,
                                             unsigned threads)
{
    const std::size_t count = epoch_count(returns.rows(), spec);
    const Labels tickers = make_labels(returns.tickers);
    std::vector<CorrMatrix> out(count);
    parallel_for(count, threads, [&](std::size_t e) {
        out[e] = correlate_window(returns, e * spec.shift, spec.length, tickers, e);
        out[e].epoch_index = e;
    });
    return out;
}

void rolling_correlations(const ReturnTable& returns, const EpochSpec& spec,
                          const std::function<void(CorrMatrix&&)>& sink, unsigned threads)
{
    const std::size_t count = epoch_count(returns.rows(), spec);
    const Labels tickers = make_labels(returns.tickers);
    const std::size_t batch = 8 * static_cast<std::size_t>(resolve_threads(threads));
    std::vector<CorrMatrix> buffer;
    for (std::size_t first = 0; first < count; first += batch) {
        const std::size_t size = std::min(batch, count - first);
        buffer.assign(size, CorrMatrix{});
        parallel_for(size, threads, [&](std::size_t b) {
            const std::size_t e = first + b;
            buffer[b] = correlate_window(returns, e * spec.shift, spec.length, tickers, e);
            buffer[b].epoch_index = e;
        });
        for (auto& c : buffer) {
            sink(std::move(c));
        }
    }
}

double power_map_value(double x, double epsilon)
{
    if (x == 0.0) {
        return 0.0;
    }
    const double mag = std::pow(std::abs(x), 1.0 + epsilon);
    return x < 0.0 ? -mag : mag;
}

CorrMatrix power_map(const CorrMatrix& c, double epsilon)
{
    check_epsilon(epsilon);
    CorrMatrix out = c;
    if (epsilon == 0.0) {
        return out;
    }
    const std::size_t n = c.dim();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out.values(i, j) = power_map_value(c.values(i, j), epsilon);
        }
    }
    return out;
}

GuhrMatrix power_map(const GuhrMatrix& g, double epsilon)
{
    check_epsilon(epsilon);
    GuhrMatrix out = g;
    if (epsilon == 0.0) {
        return out;
    }
    for (double& x : out.values.packed()) {
        x = power_map_value(x, epsilon);
    }
    return out;
}

CoarseGrainer::CoarseGrainer(const std::vector<std::string>& tickers, const SectorMap& sectors,
                             Warnings* warnings)
    : sizes_(sectors.sectors.size(), 0), labels_(make_labels(sectors.sectors))
{
    sector_of_.reserve(tickers.size());
    for (const auto& ticker : tickers) {
        const auto it = sectors.assignment.find(ticker);
        if (it == sectors.assignment.end()) {
            throw Error(ErrorCode::UnmappedTicker, "ticker " + ticker + " has no sector");
        }
        const auto pos = std::lower_bound(sectors.sectors.begin(), sectors.sectors.end(), it->second);
        if (pos == sectors.sectors.end() || *pos != it->second) {
            throw Error(ErrorCode::UnmappedTicker,
                        "sector " + it->second + " of ticker " + ticker + " is not listed");
        }
        const auto s = static_cast<std::size_t>(pos - sectors.sectors.begin());
        sector_of_.push_back(s);
        ++sizes_[s];
    }
    for (std::size_t s = 0; s < sizes_.size(); ++s) {
        if (sizes_[s] == 0) {
            throw Error(ErrorCode::UnmappedTicker,
                        "sector " + sectors.sectors[s] + " has no member among the matrix tickers");
        }
        if (sizes_[s] == 1) {
            warn(warnings, "SingletonSector",
                 "sector " + sectors.sectors[s] +
                     " has a single member; its diagonal block is set to 1");
        }
    }
}

GuhrMatrix CoarseGrainer::apply(const CorrMatrix& c) const
{
    const std::size_t n = c.dim();
    if (n != sector_of_.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "matrix of dimension " + std::to_string(n) + " for a sector layout of " +
                        std::to_string(sector_of_.size()) + " tickers");
    }
    const std::size_t ns = sizes_.size();
    PackedSymmetric sums(ns, 0.0);
    const auto packed = c.values.packed();
    std::size_t k = 0;
    for (std::size_t a = 0; a < n; ++a) {
        ++k;  // self-correlation
        const std::size_t sa = sector_of_[a];
        for (std::size_t b = a + 1; b < n; ++b) {
            sums(sa, sector_of_[b]) += packed[k++];
        }
    }

    GuhrMatrix g;
    g.values = PackedSymmetric(ns);
    g.epoch_end = c.epoch_end;
    g.epoch_index = c.epoch_index;
    g.sectors = labels_;
    for (std::size_t i = 0; i < ns; ++i) {
        // Each unordered stock pair is visited once, so a diagonal block
        // holds half of its n(n-1) off-diagonal entries.
        const double ni = static_cast<double>(sizes_[i]);
        g.values(i, i) = sizes_[i] == 1 ? 1.0 : sums(i, i) / (ni * (ni - 1.0) / 2.0);
        for (std::size_t j = i + 1; j < ns; ++j) {
            g.values(i, j) = sums(i, j) / (ni * static_cast<double>(sizes_[j]));
        }
    }
    return g;
}

GuhrMatrix coarse_grain(const CorrMatrix& c, const SectorMap& sectors, Warnings* warnings)
{
    if (!c.tickers) {
        throw Error(ErrorCode::UnmappedTicker, "correlation matrix carries no ticker labels");
    }
    return CoarseGrainer(*c.tickers, sectors, warnings).apply(c);
}

double l1_distance(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch, "packed vectors of different length");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::abs(a[i] - b[i]);
    }
    return sum;
}

double matrix_distance(const PackedSymmetric& a, const PackedSymmetric& b)
{
    check_same_dim(a, b);
    return l1_distance(a.packed(), b.packed());
}

double matrix_distance(const CorrMatrix& a, const CorrMatrix& b)
{
    return matrix_distance(a.values, b.values);
}

double matrix_distance(const GuhrMatrix& a, const GuhrMatrix& b)
{
    return matrix_distance(a.values, b.values);
}

double average_correlation(const PackedSymmetric& m)
{
    const std::size_t n = m.dim();
    if (n < 2) {
        throw Error(ErrorCode::ParameterRange, "average correlation needs dimension >= 2");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            sum += m(i, j);
        }
    }
    return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

double average_correlation(const CorrMatrix& m) { return average_correlation(m.values); }
double average_correlation(const GuhrMatrix& m) { return average_correlation(m.values); }

std::string dump_matrix(const PackedSymmetric& m, std::size_t epoch_index, const Date& epoch_end)
{
    std::string out = std::to_string(m.dim()) + "," + std::to_string(epoch_index) + "," +
                      format_date(epoch_end) + "\n";
    for (std::size_t i = 0; i < m.dim(); ++i) {
        for (std::size_t j = i; j < m.dim(); ++j) {
            if (j > i) {
                out += ',';
            }
            out += format_real(m(i, j));
        }
        out += '\n';
    }
    return out;
}

MatrixDump parse_matrix_dump(std::string_view text)
{
    const std::size_t eol = text.find('\n');
    const std::string_view header = text.substr(0, eol);
    const std::size_t c1 = header.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : header.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
        throw ParseError(ErrorCode::Parse, 1, 0, "expected 'dim,epoch_index,epoch_end'");
    }
    MatrixDump dump;
    std::size_t dim = 0;
    const auto r1 = std::from_chars(header.data(), header.data() + c1, dim);
    const auto r2 = std::from_chars(header.data() + c1 + 1, header.data() + c2, dump.epoch_index);
    std::string_view date_text = header.substr(c2 + 1);
    while (!date_text.empty() && date_text.back() == '\r') {
        date_text.remove_suffix(1);
    }
    const auto date = parse_date(date_text);
    if (r1.ec != std::errc() || r2.ec != std::errc() || !date) {
        throw ParseError(ErrorCode::Parse, 1, 0, "malformed dump header");
    }
    dump.epoch_end = *date;

    std::vector<double> values;
    values.reserve(packed_size(dim));
    std::size_t pos = eol == std::string_view::npos ? text.size() : eol + 1;
    while (pos < text.size()) {
        while (pos < text.size() && (text[pos] == ',' || text[pos] == '\n' || text[pos] == '\r' ||
                                     text[pos] == ' ')) {
            ++pos;
        }
        if (pos >= text.size()) {
            break;
        }
        double v = 0.0;
        const auto r = std::from_chars(text.data() + pos, text.data() + text.size(), v);
        if (r.ec != std::errc()) {
            throw ParseError(ErrorCode::Parse, 0, 0, "bad value in matrix dump");
        }
        values.push_back(v);
        pos = static_cast<std::size_t>(r.ptr - text.data());
    }
    dump.values = PackedSymmetric(dim, std::move(values));
    return dump;
}

}  // namespace marketstates
