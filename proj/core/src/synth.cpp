#include "marketstates/synth.hpp"

#include <cmath>
#include <cstdio>

#include "marketstates/error.hpp"
#include "marketstates/format.hpp"
#include "marketstates/random.hpp"

namespace marketstates {

std::size_t RegimeSpec::total_days() const noexcept
{
    std::size_t days = 0;
    for (const auto& s : schedule) {
        days += s.days;
    }
    return days;
}

std::size_t RegimeSpec::stock_count() const noexcept
{
    std::size_t n = 0;
    for (auto s : sector_sizes) {
        n += s;
    }
    return n;
}

void validate_regime_spec(const RegimeSpec& spec)
{
    if (spec.sector_sizes.size() < 2) {
        throw Error(ErrorCode::InvalidRegime, "need at least two sectors");
    }
    for (auto size : spec.sector_sizes) {
        if (size < 2) {
            throw Error(ErrorCode::InvalidRegime, "every sector needs at least two stocks");
        }
    }
    if (spec.regimes.empty() || spec.schedule.empty()) {
        throw Error(ErrorCode::InvalidRegime, "need at least one regime and one schedule segment");
    }
    if (!(spec.noise_scale > 0.0) || !std::isfinite(spec.noise_scale)) {
        throw Error(ErrorCode::InvalidRegime, "noise scale must be positive");
    }
    for (std::size_t r = 0; r < spec.regimes.size(); ++r) {
        const auto& lv = spec.regimes[r];
        const std::string which = "regime " + std::to_string(r + 1) + " (intra=" +
                                  format_real(lv.intra) + ", inter=" + format_real(lv.inter) + ")";
        if (!(lv.intra >= 0.0 && lv.intra < 1.0 && lv.inter >= 0.0 && lv.inter < 1.0)) {
            throw Error(ErrorCode::InvalidRegime, which + ": levels must lie in [0, 1)");
        }
        if (lv.inter > lv.intra) {
            throw Error(ErrorCode::InvalidRegime,
                        which + ": inter-sector level above intra-sector level has no factor "
                                "representation and is not guaranteed positive semidefinite");
        }
    }
    for (std::size_t s = 0; s < spec.schedule.size(); ++s) {
        const auto& seg = spec.schedule[s];
        if (seg.regime >= spec.regimes.size()) {
            throw Error(ErrorCode::InvalidRegime,
                        "segment " + std::to_string(s + 1) + " names unknown regime " +
                            std::to_string(seg.regime + 1));
        }
        if (seg.days < spec.epoch_length) {
            throw Error(ErrorCode::InvalidRegime,
                        "segment " + std::to_string(s + 1) + " lasts " + std::to_string(seg.days) +
                            " days, shorter than the epoch length " +
                            std::to_string(spec.epoch_length));
        }
    }
}

RegimeSpec default_regime_spec()
{
    RegimeSpec spec;
    spec.sector_sizes.assign(6, 10);
    spec.regimes = {{0.10, 0.00}, {0.50, 0.25}, {0.90, 0.70}};
    spec.schedule = {{0, 250}, {1, 250}, {2, 200}, {1, 200}, {0, 300}, {2, 300}};
    spec.noise_scale = 0.01;
    spec.epoch_length = 20;
    return spec;
}

SyntheticMarket generate_block_market(const RegimeSpec& spec, std::uint64_t seed)
{
    validate_regime_spec(spec);
    const std::size_t n = spec.stock_count();
    const std::size_t ns = spec.sector_sizes.size();
    const std::size_t days = spec.total_days();

    SyntheticMarket market;
    PriceTable& table = market.prices;

    std::vector<std::size_t> sector_of;
    for (std::size_t s = 0; s < ns; ++s) {
        char label[16];
        std::snprintf(label, sizeof(label), "S%02zu", s + 1);
        for (std::size_t m = 0; m < spec.sector_sizes[s]; ++m) {
            char ticker[16];
            std::snprintf(ticker, sizeof(ticker), "X%04zu", sector_of.size() + 1);
            table.tickers.emplace_back(ticker);
            market.sectors.assignment[ticker] = label;
            ++market.sectors.sizes[label];
            sector_of.push_back(s);
        }
        market.sectors.sectors.emplace_back(label);
    }

    for (const auto& seg : spec.schedule) {
        market.regime.insert(market.regime.end(), seg.days, seg.regime + 1);
    }

    Date date = spec.start;
    table.dates.reserve(days);
    for (std::size_t t = 0; t < days; ++t) {
        table.dates.push_back(date);
        date = next_weekday(date);
    }

    Rng rng(seed);
    table.prices.assign(days * n, 0.0);
    std::vector<double> log_price(n, std::log(100.0));
    std::vector<double> sector_factor(ns);
    for (std::size_t i = 0; i < n; ++i) {
        table.at(0, i) = 100.0;
    }
    for (std::size_t t = 1; t < days; ++t) {
        const RegimeLevels& lv = spec.regimes[market.regime[t] - 1];
        const double w_global = std::sqrt(lv.inter);
        const double w_sector = std::sqrt(lv.intra - lv.inter);
        const double w_idio = std::sqrt(1.0 - lv.intra);
        const double global = rng.normal();
        for (auto& f : sector_factor) {
            f = rng.normal();
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double r = spec.noise_scale * (w_global * global + w_sector * sector_factor[sector_of[i]] +
                                                 w_idio * rng.normal());
            log_price[i] += r;
            table.at(t, i) = std::exp(log_price[i]);
        }
    }
    return market;
}

std::vector<std::size_t> epoch_majority_regimes(const std::vector<std::size_t>& day_regime,
                                                const EpochSpec& spec)
{
    if (day_regime.size() < 2) {
        throw Error(ErrorCode::InsufficientData, "need at least two days of regime labels");
    }
    const std::size_t rows = day_regime.size() - 1;
    const std::size_t count = epoch_count(rows, spec);
    std::size_t labels = 0;
    for (auto r : day_regime) {
        labels = std::max(labels, r);
    }
    std::vector<std::size_t> out(count);
    std::vector<std::size_t> tally(labels + 1);
    for (std::size_t e = 0; e < count; ++e) {
        std::fill(tally.begin(), tally.end(), 0);
        const std::size_t start = e * spec.shift;
        for (std::size_t t = start; t < start + spec.length; ++t) {
            ++tally[day_regime[t + 1]];
        }
        std::size_t best = 1;
        for (std::size_t r = 1; r <= labels; ++r) {
            if (tally[r] > tally[best]) {
                best = r;
            }
        }
        out[e] = best;
    }
    return out;
}

StateSequence generate_markov_sequence(const TransitionMatrix& probs, std::size_t length,
                                       std::uint64_t seed, const EquilibriumOptions& options)
{
    if (length < 1) {
        throw Error(ErrorCode::ParameterRange, "sequence length must be at least 1");
    }
    const EquilibriumVector eq = equilibrium_distribution(probs, options);
    Rng rng(seed);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t start = probs.k;
    for (std::size_t s = 0; s < probs.k; ++s) {
        acc += eq.pi(static_cast<Eigen::Index>(s));
        if (u < acc) {
            start = s + 1;
            break;
        }
    }
    while (start > 1 && eq.pi(static_cast<Eigen::Index>(start - 1)) == 0.0) {
        --start;
    }

    StateSequence seq;
    seq.k = probs.k;
    seq.states = sample_chain(probs.probs, start, length, rng);
    return seq;
}

std::string regime_truth_table(const std::vector<Date>& dates, const std::vector<std::size_t>& regime)
{
    std::string out = "date,regime\n";
    for (std::size_t t = 0; t < dates.size() && t < regime.size(); ++t) {
        out += format_date(dates[t]) + "," + std::to_string(regime[t]) + "\n";
    }
    return out;
}

std::string sector_table(const SectorMap& sectors)
{
    std::string out = "ticker,sector\n";
    for (const auto& [ticker, label] : sectors.assignment) {
        out += ticker + "," + label + "\n";
    }
    return out;
}

}  // namespace marketstates
