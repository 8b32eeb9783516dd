#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "marketstates/date.hpp"
#include "marketstates/error.hpp"
#include "marketstates/ingest.hpp"
#include "marketstates/packed.hpp"

namespace marketstates {

using Labels = std::shared_ptr<const std::vector<std::string>>;

/// Window of `length` consecutive return rows, advanced by `shift` rows.
struct EpochSpec {
    std::size_t length = 20;
    std::size_t shift = 1;
};

/// Pearson correlation matrix of one epoch. Unit diagonal, entries in [-1, 1].
struct CorrMatrix {
    PackedSymmetric values;
    Date epoch_end;
    std::size_t epoch_index = 0;
    Labels tickers;

    std::size_t dim() const noexcept { return values.dim(); }
};

/// Sector-level coarse-grained matrix. Symmetric; the diagonal holds the mean
/// intra-sector correlation and is generally not 1.
struct GuhrMatrix {
    PackedSymmetric values;
    Date epoch_end;
    std::size_t epoch_index = 0;
    Labels sectors;

    std::size_t dim() const noexcept { return values.dim(); }
};

/// Throws ParameterRange unless length >= 2, shift >= 1 and length <= rows.
void validate_epoch_spec(const EpochSpec& spec, std::size_t rows);

/// floor((rows - length) / shift) + 1.
std::size_t epoch_count(std::size_t rows, const EpochSpec& spec);

/// Pearson correlation of the return rows [start, start + length).
/// Throws DegenerateColumn when a ticker has zero variance in the window.
CorrMatrix epoch_correlation(const ReturnTable& returns, std::size_t start, const EpochSpec& spec);

std::vector<CorrMatrix> rolling_correlations(const ReturnTable& returns, const EpochSpec& spec,
                                             unsigned threads = 1);

/// Streaming variant: calls `sink` once per epoch in epoch order, holding at
/// most one batch of matrices in memory.
void rolling_correlations(const ReturnTable& returns, const EpochSpec& spec,
                          const std::function<void(CorrMatrix&&)>& sink, unsigned threads = 1);

/// sign(x) |x|^(1 + epsilon).
double power_map_value(double x, double epsilon);

/// Applies the power map to every off-diagonal entry (the unit diagonal is kept).
CorrMatrix power_map(const CorrMatrix& c, double epsilon);

/// Applies the power map to every entry, diagonal included.
GuhrMatrix power_map(const GuhrMatrix& g, double epsilon);

/// Block averaging of a correlation matrix over sectors. Precomputes the
/// ticker-to-sector layout once so it can be applied to every epoch.
class CoarseGrainer {
public:
    /// `tickers` gives the row order of the matrices this will be applied to.
    /// Singleton sectors produce a SingletonSector warning in `warnings`.
    CoarseGrainer(const std::vector<std::string>& tickers, const SectorMap& sectors,
                  Warnings* warnings = nullptr);

    GuhrMatrix apply(const CorrMatrix& c) const;

    std::size_t sector_count() const noexcept { return sizes_.size(); }
    const Labels& sectors() const noexcept { return labels_; }

private:
    std::vector<std::size_t> sector_of_;
    std::vector<std::size_t> sizes_;
    Labels labels_;
};

GuhrMatrix coarse_grain(const CorrMatrix& c, const SectorMap& sectors, Warnings* warnings = nullptr);

/// Sum of absolute differences over the packed upper triangle.
double l1_distance(std::span<const double> a, std::span<const double> b);

/// Distance between two matrices of the same kind and dimension. For Pearson
/// matrices the diagonal contributes nothing; for Guhr matrices it is included.
double matrix_distance(const CorrMatrix& a, const CorrMatrix& b);
double matrix_distance(const GuhrMatrix& a, const GuhrMatrix& b);
double matrix_distance(const PackedSymmetric& a, const PackedSymmetric& b);

/// Mean of the strict upper triangle.
double average_correlation(const PackedSymmetric& m);
double average_correlation(const CorrMatrix& m);
double average_correlation(const GuhrMatrix& m);

/// Text dump: `dim,epoch_index,epoch_end`, then one line per matrix row with
/// the upper-triangle entries of that row, 17 significant digits.
std::string dump_matrix(const PackedSymmetric& m, std::size_t epoch_index, const Date& epoch_end);

struct MatrixDump {
    PackedSymmetric values;
    std::size_t epoch_index = 0;
    Date epoch_end;
};

MatrixDump parse_matrix_dump(std::string_view text);

}  // namespace marketstates
