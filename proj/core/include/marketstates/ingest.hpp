#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "marketstates/date.hpp"

namespace marketstates {

/// Marker for an absent price.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double price) noexcept { return std::isnan(price); }

/// Daily adjusted closes, row-major: prices[t * tickers.size() + i].
struct PriceTable {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    std::vector<double> prices;

    std::size_t rows() const noexcept { return dates.size(); }
    std::size_t cols() const noexcept { return tickers.size(); }
    double at(std::size_t t, std::size_t i) const noexcept { return prices[t * cols() + i]; }
    double& at(std::size_t t, std::size_t i) noexcept { return prices[t * cols() + i]; }
};

/// Log returns; dates[t] is the date of the later price of each pair.
struct ReturnTable {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    std::vector<double> returns;

    std::size_t rows() const noexcept { return dates.size(); }
    std::size_t cols() const noexcept { return tickers.size(); }
    double at(std::size_t t, std::size_t i) const noexcept { return returns[t * cols() + i]; }
};

struct SectorMap {
    std::map<std::string, std::string> assignment;  // ticker -> sector label
    std::vector<std::string> sectors;               // lexicographic
    std::map<std::string, std::size_t> sizes;

    std::size_t sector_count() const noexcept { return sectors.size(); }
};

struct FilterResult {
    PriceTable table;
    std::vector<std::string> dropped;
};

/// Parses the comma-separated price table format. Throws ParseError with
/// the offending row/column on malformed input.
PriceTable parse_price_table(std::string_view text);
PriceTable load_price_table(const std::filesystem::path& path);

/// Serialises a price table in the format read by parse_price_table.
std::string write_price_table(const PriceTable& table);

/// Drops tickers whose longest MISSING run exceeds `max_gap`, then fills the
/// remaining gaps forward (and a short leading gap backward).
FilterResult filter_stocks(const PriceTable& table, std::size_t max_gap);

ReturnTable log_returns(const PriceTable& table);

SectorMap parse_sector_map(std::string_view text, const std::vector<std::string>& tickers);
SectorMap load_sector_map(const std::filesystem::path& path, const std::vector<std::string>& tickers);

/// Reads a whole file; throws Error(Io) when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace marketstates
