#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "marketstates/corrmat.hpp"
#include "marketstates/ingest.hpp"
#include "marketstates/markov.hpp"

namespace marketstates {

/// Target correlation levels of one regime: `intra` between stocks of the
/// same sector, `inter` between stocks of different sectors.
struct RegimeLevels {
    double intra = 0.0;
    double inter = 0.0;
};

/// A stretch of `days` consecutive trading days spent in regime `regime` (0-based).
struct RegimeSegment {
    std::size_t regime = 0;
    std::size_t days = 0;
};

struct RegimeSpec {
    std::vector<std::size_t> sector_sizes;
    std::vector<RegimeLevels> regimes;
    std::vector<RegimeSegment> schedule;
    double noise_scale = 0.01;  // daily return volatility
    std::size_t epoch_length = 20;
    Date start{std::chrono::year{2006}, std::chrono::January, std::chrono::day{2}};

    std::size_t total_days() const noexcept;
    std::size_t stock_count() const noexcept;
};

/// Throws InvalidRegime for levels outside [0, 1), inter > intra (no
/// factor representation, so PSD is not guaranteed), segments shorter than
/// the epoch length, or unknown regime indices.
void validate_regime_spec(const RegimeSpec& spec);

/// Three regimes over six sectors of ten stocks and 1500 trading days.
RegimeSpec default_regime_spec();

struct SyntheticMarket {
    PriceTable prices;
    std::vector<std::size_t> regime;  // 1-based regime label per price row
    SectorMap sectors;
};

/// Global factor + sector factor + idiosyncratic noise, per regime:
///   r = scale * (sqrt(inter) g + sqrt(intra - inter) f_s + sqrt(1 - intra) e),
/// integrated into prices starting at 100.
SyntheticMarket generate_block_market(const RegimeSpec& spec, std::uint64_t seed);

/// Majority planted regime over the returns of each epoch (ties to the lower
/// label). `day_regime` is indexed by price row; return row t belongs to
/// price row t + 1.
std::vector<std::size_t> epoch_majority_regimes(const std::vector<std::size_t>& day_regime,
                                                const EpochSpec& spec);

/// Chain of `length` states started from the equilibrium distribution of `probs`.
StateSequence generate_markov_sequence(const TransitionMatrix& probs, std::size_t length,
                                       std::uint64_t seed, const EquilibriumOptions& options = {});

std::string regime_truth_table(const std::vector<Date>& dates, const std::vector<std::size_t>& regime);
std::string sector_table(const SectorMap& sectors);

}  // namespace marketstates
