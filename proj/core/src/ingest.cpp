#include "marketstates/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "marketstates/error.hpp"
#include "marketstates/format.hpp"

namespace marketstates {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_cells(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

/// Non-blank lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> split_lines(std::string_view text)
{
    std::vector<std::pair<std::size_t, std::string_view>> lines;
    std::size_t start = 0;
    std::size_t number = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++number;
        const std::string_view line = text.substr(start, end - start);
        if (!trim(line).empty()) {
            lines.emplace_back(number, line);
        }
        start = end + 1;
    }
    return lines;
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PriceTable parse_price_table(std::string_view text)
{
    const auto lines = split_lines(text);
    if (lines.empty()) {
        throw ParseError(ErrorCode::Parse, 1, 0, "empty price table");
    }

    const auto header = split_cells(lines.front().second);
    const std::size_t header_row = lines.front().first;
    if (header.size() < 2 || header.front().empty()) {
        throw ParseError(ErrorCode::Parse, header_row, 0,
                         "header must be a date column followed by at least one ticker");
    }

    const std::size_t file_cols = header.size() - 1;
    std::vector<std::string> file_tickers;
    std::set<std::string, std::less<>> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) {
            throw ParseError(ErrorCode::Parse, header_row, c + 1, "empty ticker name");
        }
        if (!seen.emplace(header[c]).second) {
            throw ParseError(ErrorCode::DuplicateTicker, header_row, c + 1,
                             "duplicate ticker '" + std::string(header[c]) + "'");
        }
        file_tickers.emplace_back(header[c]);
    }

    // Columns are stored in lexicographic ticker order.
    std::vector<std::size_t> order(file_cols);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return file_tickers[a] < file_tickers[b]; });

    PriceTable table;
    table.tickers.reserve(file_cols);
    for (std::size_t c : order) {
        table.tickers.push_back(file_tickers[c]);
    }

    std::vector<double> row_values(file_cols);
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto [row, line] = lines[l];
        const auto cells = split_cells(line);
        if (cells.size() != header.size()) {
            throw ParseError(ErrorCode::Parse, row, 0,
                             "expected " + std::to_string(header.size()) + " cells, found " +
                                 std::to_string(cells.size()));
        }
        const auto date = parse_date(cells[0]);
        if (!date) {
            throw ParseError(ErrorCode::MalformedDate, row, 1,
                             "malformed date '" + std::string(cells[0]) + "'");
        }
        if (!table.dates.empty()) {
            if (*date == table.dates.back()) {
                throw ParseError(ErrorCode::DuplicateDate, row, 1,
                                 "duplicate date " + format_date(*date));
            }
            if (*date < table.dates.back()) {
                throw ParseError(ErrorCode::NonMonotonicDates, row, 1,
                                 "date " + format_date(*date) + " precedes " +
                                     format_date(table.dates.back()));
            }
        }
        table.dates.push_back(*date);

        for (std::size_t c = 0; c < file_cols; ++c) {
            const std::string_view cell = cells[c + 1];
            if (cell.empty()) {
                row_values[c] = kMissing;
                continue;
            }
            double value = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
                !std::isfinite(value)) {
                throw ParseError(ErrorCode::Parse, row, c + 2,
                                 "not a number: '" + std::string(cell) + "'");
            }
            if (value <= 0.0) {
                throw ParseError(ErrorCode::NonPositivePrice, row, c + 2,
                                 "non-positive price " + std::string(cell));
            }
            row_values[c] = value;
        }
        for (std::size_t c : order) {
            table.prices.push_back(row_values[c]);
        }
    }
    return table;
}

PriceTable load_price_table(const std::filesystem::path& path)
{
    return parse_price_table(read_file(path));
}

std::string write_price_table(const PriceTable& table)
{
    std::string out = "date";
    for (const auto& ticker : table.tickers) {
        out += ',';
        out += ticker;
    }
    out += '\n';
    for (std::size_t t = 0; t < table.rows(); ++t) {
        out += format_date(table.dates[t]);
        for (std::size_t i = 0; i < table.cols(); ++i) {
            out += ',';
            if (!is_missing(table.at(t, i))) {
                out += format_real(table.at(t, i));
            }
        }
        out += '\n';
    }
    return out;
}

FilterResult filter_stocks(const PriceTable& table, std::size_t max_gap)
{
    const std::size_t rows = table.rows();
    const std::size_t cols = table.cols();

    std::vector<std::size_t> kept;
    FilterResult result;
    for (std::size_t i = 0; i < cols; ++i) {
        std::size_t run = 0;
        std::size_t longest = 0;
        for (std::size_t t = 0; t < rows; ++t) {
            run = is_missing(table.at(t, i)) ? run + 1 : 0;
            longest = std::max(longest, run);
        }
        // A column that is entirely missing has nothing to fill from.
        if (longest > max_gap || longest == rows) {
            result.dropped.push_back(table.tickers[i]);
        } else {
            kept.push_back(i);
        }
    }
    if (kept.empty()) {
        throw Error(ErrorCode::EmptyUniverse, "no ticker survives the gap filter (max_gap=" +
                                                  std::to_string(max_gap) + ")");
    }

    PriceTable& out = result.table;
    out.dates = table.dates;
    for (std::size_t i : kept) {
        out.tickers.push_back(table.tickers[i]);
    }
    out.prices.resize(rows * kept.size());
    for (std::size_t c = 0; c < kept.size(); ++c) {
        const std::size_t i = kept[c];
        std::size_t first = 0;
        while (is_missing(table.at(first, i))) {
            ++first;
        }
        double last = table.at(first, i);
        for (std::size_t t = 0; t < rows; ++t) {
            const double p = table.at(t, i);
            if (!is_missing(p)) {
                last = p;
            }
            out.at(t, c) = last;
        }
    }
    return result;
}

ReturnTable log_returns(const PriceTable& table)
{
    if (table.rows() < 2) {
        throw Error(ErrorCode::InsufficientData, "need at least two price rows for returns");
    }
    for (std::size_t k = 0; k < table.prices.size(); ++k) {
        if (is_missing(table.prices[k])) {
            const std::size_t t = k / table.cols();
            throw Error(ErrorCode::MissingValues,
                        "price table has a missing entry for " + table.tickers[k % table.cols()] +
                            " on " + format_date(table.dates[t]) + "; run filter_stocks first");
        }
    }

    ReturnTable out;
    out.dates.assign(table.dates.begin() + 1, table.dates.end());
    out.tickers = table.tickers;
    out.returns.resize((table.rows() - 1) * table.cols());
    for (std::size_t t = 0; t + 1 < table.rows(); ++t) {
        for (std::size_t i = 0; i < table.cols(); ++i) {
            out.returns[t * table.cols() + i] = std::log(table.at(t + 1, i)) - std::log(table.at(t, i));
        }
    }
    return out;
}

SectorMap parse_sector_map(std::string_view text, const std::vector<std::string>& tickers)
{
    const auto lines = split_lines(text);
    std::map<std::string, std::string> file_map;
    for (std::size_t l = 0; l < lines.size(); ++l) {
        const auto [row, line] = lines[l];
        const auto cells = split_cells(line);
        if (cells.size() != 2 || cells[0].empty() || cells[1].empty()) {
            throw ParseError(ErrorCode::Parse, row, 0, "expected 'ticker,sector_label'");
        }
        if (l == 0) {
            const std::string first = to_lower(cells[0]);
            if (first == "ticker" || first == "symbol") {
                continue;
            }
        }
        const auto [it, inserted] = file_map.emplace(cells[0], cells[1]);
        if (!inserted && it->second != cells[1]) {
            throw ParseError(ErrorCode::DuplicateTicker, row, 1,
                             "ticker '" + std::string(cells[0]) + "' mapped to both '" +
                                 it->second + "' and '" + std::string(cells[1]) + "'");
        }
    }

    SectorMap map;
    std::vector<std::string> unmapped;
    for (const auto& ticker : tickers) {
        const auto it = file_map.find(ticker);
        if (it == file_map.end()) {
            unmapped.push_back(ticker);
            continue;
        }
        map.assignment[ticker] = it->second;
        ++map.sizes[it->second];
    }
    if (!unmapped.empty()) {
        std::string list;
        for (const auto& t : unmapped) {
            list += (list.empty() ? "" : ", ") + t;
        }
        throw Error(ErrorCode::UnmappedTicker, "tickers without a sector: " + list);
    }
    for (const auto& [label, size] : map.sizes) {
        map.sectors.push_back(label);
    }
    if (map.sectors.size() < 2) {
        throw Error(ErrorCode::ParameterRange, "sector map needs at least two populated sectors");
    }
    return map;
}

SectorMap load_sector_map(const std::filesystem::path& path, const std::vector<std::string>& tickers)
{
    return parse_sector_map(read_file(path), tickers);
}

}  // namespace marketstates
