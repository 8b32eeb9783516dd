#include "app.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "marketstates/clustering.hpp"
#include "marketstates/corrmat.hpp"
#include "marketstates/error.hpp"
#include "marketstates/format.hpp"
#include "marketstates/ingest.hpp"
#include "marketstates/markov.hpp"
#include "marketstates/mds.hpp"
#include "marketstates/random.hpp"
#include "marketstates/synth.hpp"

namespace marketstates::app {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Configuration problems detected before any computation.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json warnings_json(const Warnings& warnings)
{
    json arr = json::array();
    for (const auto& w : warnings) {
        arr.push_back({{"code", w.code}, {"message", w.message}});
    }
    return arr;
}

void report_warnings(const Warnings& warnings)
{
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w.code << ": " << w.message << "\n";
    }
}

std::string pipeline_name(Pipeline p) { return p == Pipeline::Guhr ? "guhr" : "pearson"; }

json config_json(const RunConfig& c)
{
    json j;
    j["prices"] = c.prices.string();
    j["sectors"] = c.sectors ? json(c.sectors->string()) : json(nullptr);
    j["epoch"] = c.epoch;
    j["shift"] = c.shift;
    j["max_gap"] = c.max_gap;
    j["epsilon"] = c.epsilon;
    j["epsilon_grid"] = c.epsilon_grid;
    j["k"] = c.k;
    j["k_range"] = {c.k_first, c.k_last};
    j["k_min"] = c.k_min ? json(*c.k_min) : json(nullptr);
    j["n_init"] = c.n_init;
    j["seed"] = c.seed;
    j["max_iter"] = c.max_iter;
    j["metric"] = c.metric;
    j["pipeline"] = pipeline_name(c.pipeline);
    j["out"] = c.out.string();
    j["stride"] = c.stride;
    j["threads"] = c.threads;
    j["bootstrap"] = c.bootstrap;
    j["damping"] = c.damping;
    j["axes"] = {c.axis_a, c.axis_b};
    j["synth_kind"] = c.synth_kind;
    j["length"] = c.length;
    return j;
}

/// Records config, version, input digests and wall time; the only output
/// that is allowed to differ between identical runs.
class RunMeta {
public:
    RunMeta(std::string command, const RunConfig& config)
        : command_(std::move(command)), config_(config), start_(std::chrono::steady_clock::now())
    {
    }

    void add_input(const std::string& role, const fs::path& path)
    {
        inputs_[role] = {{"path", path.string()}, {"fnv1a64", content_hash(read_file(path))}};
    }

    void write() const
    {
        const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
        const auto now = std::chrono::system_clock::now();
        json j;
        j["command"] = command_;
        j["tool_version"] = kVersion;
        j["config"] = config_json(config_);
        j["inputs"] = inputs_;
        j["wall_time_seconds"] = elapsed.count();
        j["finished_unix_seconds"] =
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
        write_json(config_.out / "run_meta.json", j);
    }

private:
    std::string command_;
    const RunConfig& config_;
    std::chrono::steady_clock::time_point start_;
    json inputs_ = json::object();
};

Metric metric_of(const RunConfig& c)
{
    const auto m = parse_metric(c.metric);
    if (!m) {
        throw ConfigError("--metric must be l1 or l2");
    }
    return *m;
}

void prepare_out(const RunConfig& c)
{
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) {
        throw Error(ErrorCode::Io, "cannot create output directory " + c.out.string());
    }
}

struct Inputs {
    ReturnTable returns;
    std::optional<SectorMap> sectors;
    std::vector<std::string> dropped;
};

Inputs load_inputs(const RunConfig& c, RunMeta& meta)
{
    if (c.prices.empty()) {
        throw ConfigError("--prices is required");
    }
    if (!fs::exists(c.prices)) {
        throw ConfigError("price file not found: " + c.prices.string());
    }
    if (c.pipeline == Pipeline::Guhr && !c.sectors) {
        throw ConfigError("--pipeline guhr requires --sectors");
    }
    if (c.sectors && !fs::exists(*c.sectors)) {
        throw ConfigError("sector file not found: " + c.sectors->string());
    }
    meta.add_input("prices", c.prices);

    Inputs in;
    FilterResult filtered = filter_stocks(load_price_table(c.prices), c.max_gap);
    in.dropped = std::move(filtered.dropped);
    in.returns = log_returns(filtered.table);
    if (c.pipeline == Pipeline::Guhr) {
        meta.add_input("sectors", *c.sectors);
        in.sectors = load_sector_map(*c.sectors, in.returns.tickers);
    }
    return in;
}

struct StatesRun {
    Inputs inputs;
    MatrixCloud cloud;
    Clustering clustering;
    StateSequence states;
    Warnings warnings;
};

StatesRun run_states_pipeline(const RunConfig& c, RunMeta& meta)
{
    const Metric metric = metric_of(c);
    if (c.n_init < 1) {
        throw ConfigError("--n-init must be at least 1");
    }
    StatesRun run;
    run.inputs = load_inputs(c, meta);
    const EpochSpec spec{c.epoch, c.shift};
    run.cloud = build_matrix_cloud(run.inputs.returns, spec,
                                   run.inputs.sectors ? &*run.inputs.sectors : nullptr, c.epsilon,
                                   c.threads, &run.warnings);
    if (c.n_init >= 2) {
        run.clustering =
            sigma_intra(run.cloud.points, c.k, c.n_init, c.seed, c.max_iter, metric, c.threads).best;
    } else {
        run.clustering =
            kmeans(run.cloud.points, KMeansOptions{c.k, derive_seed(c.seed, 0), c.max_iter, metric});
    }
    run.states = order_states(run.clustering, run.cloud, &run.warnings);
    return run;
}

void write_states(const RunConfig& c, const StatesRun& run)
{
    std::string csv = "epoch_end,state\n";
    for (std::size_t e = 0; e < run.states.states.size(); ++e) {
        csv += format_date(run.states.epoch_ends[e]) + "," + std::to_string(run.states.states[e]) + "\n";
    }
    write_text(c.out / "states.csv", csv);

    std::vector<std::size_t> counts(run.states.k, 0);
    for (auto s : run.states.states) {
        ++counts[s - 1];
    }
    json j;
    j["k"] = run.states.k;
    j["epsilon"] = c.epsilon;
    j["pipeline"] = pipeline_name(c.pipeline);
    j["metric"] = c.metric;
    j["epochs"] = run.states.states.size();
    j["state_mean_average_correlation"] = run.states.state_means;
    j["state_counts"] = counts;
    j["d_intra"] = run.clustering.d_intra;
    j["iterations"] = run.clustering.iterations;
    j["converged"] = run.clustering.converged;
    j["seed"] = run.clustering.seed;
    j["dropped_tickers"] = run.inputs.dropped;
    j["warnings"] = warnings_json(run.warnings);
    write_json(c.out / "states_summary.json", j);
}

template <typename Fn>
int guarded(const char* name, Fn&& body)
{
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << name << ": configuration error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return is_validation_error(e.code()) ? kExitValidation : kExitComputation;
    } catch (const std::exception& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return kExitComputation;
    }
}

RegimeSpec load_regime_spec(const fs::path& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("regime spec " + path.string() + ": " + e.what());
    }
    RegimeSpec spec = default_regime_spec();
    try {
        if (j.contains("sector_sizes")) {
            spec.sector_sizes = j.at("sector_sizes").get<std::vector<std::size_t>>();
        }
        if (j.contains("regimes")) {
            spec.regimes.clear();
            for (const auto& r : j.at("regimes")) {
                spec.regimes.push_back({r.at("intra").get<double>(), r.at("inter").get<double>()});
            }
        }
        if (j.contains("schedule")) {
            spec.schedule.clear();
            for (const auto& s : j.at("schedule")) {
                const auto regime = s.at("regime").get<std::size_t>();
                if (regime < 1) {
                    throw ConfigError("schedule regimes are 1-based");
                }
                spec.schedule.push_back({regime - 1, s.at("days").get<std::size_t>()});
            }
        }
        spec.noise_scale = j.value("noise_scale", spec.noise_scale);
        spec.epoch_length = j.value("epoch_length", spec.epoch_length);
        if (j.contains("start")) {
            const auto d = parse_date(j.at("start").get<std::string>());
            if (!d) {
                throw ConfigError("regime spec start date must be YYYY-MM-DD");
            }
            spec.start = *d;
        }
    } catch (const json::exception& e) {
        throw ConfigError("regime spec " + path.string() + ": " + e.what());
    }
    return spec;
}

Eigen::MatrixXd load_probs(const fs::path& path)
{
    try {
        json j = json::parse(read_file(path));
        if (j.is_object()) {
            j = j.at("probs");
        }
        const auto rows = j.get<std::vector<std::vector<double>>>();
        Eigen::MatrixXd p(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size()) {
                throw ConfigError("transition matrix in " + path.string() + " is not square");
            }
            for (std::size_t jx = 0; jx < rows.size(); ++jx) {
                p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jx)) = rows[i][jx];
            }
        }
        return p;
    } catch (const json::exception& e) {
        throw ConfigError("transition matrix " + path.string() + ": " + e.what());
    }
}

json matrix_json(const Eigen::MatrixXd& m, bool integral)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (integral) {
                row.push_back(static_cast<std::uint64_t>(std::llround(m(i, j))));
            } else {
                row.push_back(m(i, j));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::pair<std::size_t, std::size_t> parse_k_range(const std::string& text)
{
    std::size_t sep = text.find("..");
    std::size_t skip = 2;
    if (sep == std::string::npos) {
        sep = text.find_first_of(":-");
        skip = 1;
    }
    try {
        if (sep == std::string::npos) {
            const auto k = static_cast<std::size_t>(std::stoul(text));
            return {k, k};
        }
        const auto a = static_cast<std::size_t>(std::stoul(text.substr(0, sep)));
        const auto b = static_cast<std::size_t>(std::stoul(text.substr(sep + skip)));
        if (a < 1 || a > b) {
            throw ConfigError("k range must satisfy 1 <= first <= last: " + text);
        }
        return {a, b};
    } catch (const std::logic_error&) {
        throw ConfigError("malformed k range: " + text);
    }
}

std::vector<double> parse_epsilon_grid(const std::string& text)
{
    std::vector<double> grid;
    try {
        if (text.find(':') != std::string::npos) {
            std::vector<double> parts;
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ':')) {
                parts.push_back(std::stod(item));
            }
            if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
                throw ConfigError("epsilon grid must be start:stop:step with step > 0");
            }
            const auto steps = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
            for (std::size_t i = 0; i <= steps; ++i) {
                const double v = parts[0] + static_cast<double>(i) * parts[2];
                grid.push_back(std::round(v * 1e12) / 1e12);
            }
        } else {
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) {
                grid.push_back(std::stod(item));
            }
        }
    } catch (const std::logic_error&) {
        throw ConfigError("malformed epsilon grid: " + text);
    }
    if (grid.empty()) {
        throw ConfigError("epsilon grid is empty");
    }
    return grid;
}

int cmd_states(const RunConfig& config)
{
    return guarded("states", [&] {
        RunMeta meta("states", config);
        prepare_out(config);
        const StatesRun run = run_states_pipeline(config, meta);
        report_warnings(run.warnings);
        write_states(config, run);
        meta.write();
    });
}

int cmd_optimize(const RunConfig& config)
{
    return guarded("optimize", [&] {
        if (!config.k_min) {
            throw ConfigError("optimize requires an explicit --k-min");
        }
        RunMeta meta("optimize", config);
        prepare_out(config);
        const Inputs in = load_inputs(config, meta);

        OptimizeOptions opt;
        opt.epsilon_grid = config.epsilon_grid;
        opt.k_first = config.k_first;
        opt.k_last = config.k_last;
        opt.k_min_admissible = *config.k_min;
        opt.n_init = config.n_init;
        opt.seed = config.seed;
        opt.max_iter = config.max_iter;
        opt.metric = metric_of(config);
        opt.threads = config.threads;

        Warnings warnings;
        const GridResult grid = optimize_states(in.returns, EpochSpec{config.epoch, config.shift},
                                                in.sectors ? &*in.sectors : nullptr, opt, &warnings);
        report_warnings(warnings);

        std::string csv = "k,epsilon,sigma_intra,mean_d_intra\n";
        json failures = json::array();
        for (const auto& cell : grid.cells) {
            csv += std::to_string(cell.k) + "," + format_real(cell.epsilon) + "," +
                   format_real(cell.sigma_intra) + "," + format_real(cell.mean_d_intra) + "\n";
            if (cell.error) {
                failures.push_back({{"k", cell.k}, {"epsilon", cell.epsilon}, {"error", *cell.error}});
            }
        }
        write_text(config.out / "sigma_grid.csv", csv);

        const auto chosen = std::find_if(grid.cells.begin(), grid.cells.end(), [&](const GridCell& c) {
            return c.k == grid.chosen_k && c.epsilon == grid.chosen_epsilon;
        });
        json j;
        j["chosen"] = {{"k", grid.chosen_k},
                       {"epsilon", grid.chosen_epsilon},
                       {"sigma_intra", chosen->sigma_intra},
                       {"mean_d_intra", chosen->mean_d_intra}};
        j["k_min_admissible"] = grid.k_min_admissible;
        j["n_init"] = grid.n_init;
        j["pipeline"] = pipeline_name(config.pipeline);
        j["metric"] = config.metric;
        j["failed_cells"] = failures;
        j["dropped_tickers"] = in.dropped;
        j["warnings"] = warnings_json(warnings);
        write_json(config.out / "optimize_summary.json", j);
        meta.write();
    });
}

int cmd_transitions(const RunConfig& config)
{
    return guarded("transitions", [&] {
        RunMeta meta("transitions", config);
        prepare_out(config);
        StatesRun run = run_states_pipeline(config, meta);
        report_warnings(run.warnings);
        write_states(config, run);

        const auto states = subsample(run.states.states, config.stride);
        const TransitionMatrix t = transition_matrix(states, run.states.k);
        EquilibriumOptions eq_opt;
        eq_opt.damping = config.damping;
        const EquilibriumVector eq = equilibrium_distribution(t, eq_opt);

        json j;
        j["k"] = t.k;
        j["stride"] = config.stride;
        j["n_transitions"] = t.n_transitions;
        j["counts"] = matrix_json(t.counts, true);
        j["probs"] = matrix_json(t.probs, false);
        std::vector<std::size_t> dangling;
        for (std::size_t i = 0; i < t.k; ++i) {
            if (t.dangling[i]) {
                dangling.push_back(i + 1);
            }
        }
        j["dangling_states"] = dangling;
        j["equilibrium"] = std::vector<double>(eq.pi.data(), eq.pi.data() + eq.pi.size());
        j["tridiagonality"] = t.k >= 2 ? json(tridiagonality(t)) : json(nullptr);
        if (states.size() >= 3) {
            MarkovianityOptions mopt;
            mopt.replicates = config.bootstrap;
            mopt.seed = config.seed;
            mopt.threads = config.threads;
            const MarkovianityReport rep = markovianity_check(states, t.k, mopt);
            json row_tv = json::array();
            for (double v : rep.row_tv) {
                row_tv.push_back(std::isnan(v) ? json(nullptr) : json(v));
            }
            j["markovianity"] = {{"statistic", rep.statistic},
                                 {"threshold", rep.threshold},
                                 {"pass", rep.pass},
                                 {"row_tv", row_tv},
                                 {"replicates", rep.replicates},
                                 {"criterion", MarkovianityReport::kLabel}};
        } else {
            j["markovianity"] = nullptr;
        }
        write_json(config.out / "transitions.json", j);
        meta.write();
    });
}

int cmd_mds(const RunConfig& config)
{
    return guarded("mds", [&] {
        RunMeta meta("mds", config);
        prepare_out(config);
        const StatesRun run = run_states_pipeline(config, meta);
        write_states(config, run);

        Warnings warnings = run.warnings;
        const DistanceMatrix d = distance_matrix(run.cloud, config.threads);
        const std::size_t dim = std::min<std::size_t>(3, run.cloud.size() - 1);
        Embedding e = classical_mds(d, dim, &warnings);
        e.states = run.states.states;
        e.epoch_ends = run.states.epoch_ends;
        report_warnings(warnings);

        write_text(config.out / "embedding.csv", embedding_table(e));
        const auto points = project_2d(e, config.axis_a, config.axis_b);
        write_text(config.out / "embedding.svg", scatter_svg(points, e, config.axis_a, config.axis_b));

        json j;
        j["eigenvalues"] = e.eigenvalues;
        j["axis_fraction"] = e.axis_fraction;
        j["captured_fraction"] = e.captured_fraction;
        j["exact_mass"] = e.exact_mass;
        j["clamped_axes"] = e.clamped_axes;
        j["warnings"] = warnings_json(warnings);
        write_json(config.out / "embedding_summary.json", j);
        meta.write();
    });
}

int cmd_synth(const RunConfig& config)
{
    return guarded("synth", [&] {
        RunMeta meta("synth", config);
        prepare_out(config);
        if (config.synth_kind == "market") {
            RegimeSpec spec = default_regime_spec();
            if (config.regime_spec) {
                meta.add_input("regime_spec", *config.regime_spec);
                spec = load_regime_spec(*config.regime_spec);
            }
            const SyntheticMarket m = generate_block_market(spec, config.seed);
            write_text(config.out / "prices.csv", write_price_table(m.prices));
            write_text(config.out / "sectors.csv", sector_table(m.sectors));
            write_text(config.out / "regime_truth.csv", regime_truth_table(m.prices.dates, m.regime));
        } else if (config.synth_kind == "markov") {
            if (!config.probs) {
                throw ConfigError("synth --kind markov requires --probs");
            }
            meta.add_input("probs", *config.probs);
            const TransitionMatrix t = make_transition_matrix(load_probs(*config.probs));
            EquilibriumOptions eq_opt;
            eq_opt.damping = config.damping;
            const StateSequence seq = generate_markov_sequence(t, config.length, config.seed, eq_opt);
            std::string csv = "index,state\n";
            for (std::size_t i = 0; i < seq.states.size(); ++i) {
                csv += std::to_string(i) + "," + std::to_string(seq.states[i]) + "\n";
            }
            write_text(config.out / "markov_states.csv", csv);
        } else {
            throw ConfigError("--kind must be market or markov");
        }
        meta.write();
    });
}

namespace {

std::string trim(std::string_view text)
{
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r");
    return std::string(text.substr(first, last - first + 1));
}

/// Replaces `--config FILE` by the file's key=value pairs as flags placed
/// right after the subcommand, so explicit flags given later take effect.
/// `[section]` headers restrict the following keys to that subcommand.
std::vector<std::string> expand_config(std::vector<std::string> args)
{
    std::optional<std::string> path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!path) {
        return args;
    }
    if (!fs::exists(*path)) {
        throw ConfigError("config file not found: " + *path);
    }
    const std::string command = args.size() > 1 ? args[1] : std::string();
    std::vector<std::string> flags;
    std::string section;
    std::istringstream in(read_file(*path));
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') {
            continue;
        }
        if (text.front() == '[' && text.back() == ']') {
            section = trim(std::string_view(text).substr(1, text.size() - 2));
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(*path + ":" + std::to_string(number) + ": expected key=value");
        }
        if (!section.empty() && section != command) {
            continue;
        }
        std::string key = trim(std::string_view(text).substr(0, eq));
        std::string value = trim(std::string_view(text).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        std::replace(key.begin(), key.end(), '_', '-');
        flags.push_back("--" + key);
        flags.push_back(value);
    }
    args.insert(args.begin() + std::min<std::ptrdiff_t>(2, static_cast<std::ptrdiff_t>(args.size())), flags.begin(),
                flags.end());
    return args;
}

}  // namespace

int run(int argc, char** argv)
{
    CLI::App app{"Market-state analysis of rolling correlation matrices"};
    app.set_version_flag("--version", kVersion);
    app.add_option("--config", "key=value configuration file; flags override it");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    RunConfig c;
    std::string sectors;
    std::string k_range;
    std::string epsilon_grid;
    std::string pipeline = "pearson";
    std::string regime_spec;
    std::string probs;
    std::size_t k_min = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--prices", c.prices, "Price table (date,<ticker>,...)");
        sub->add_option("--sectors", sectors, "Sector map (ticker,sector_label)");
        sub->add_option("--epoch", c.epoch, "Epoch length in trading days")->capture_default_str();
        sub->add_option("--shift", c.shift, "Epoch shift in trading days")->capture_default_str();
        sub->add_option("--max-gap", c.max_gap, "Longest tolerated run of missing prices")
            ->capture_default_str();
        sub->add_option("--n-init", c.n_init, "k-means restarts")->capture_default_str();
        sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
        sub->add_option("--max-iter", c.max_iter, "Lloyd iteration cap")->capture_default_str();
        sub->add_option("--metric", c.metric, "Assignment metric: l1 or l2")->capture_default_str();
        sub->add_option("--pipeline", pipeline, "pearson or guhr")->capture_default_str();
        sub->add_option("--out", c.out, "Output directory")->capture_default_str();
        sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
    };
    auto add_state_opts = [&](CLI::App* sub) {
        sub->add_option("--epsilon", c.epsilon, "Power-map exponent")->capture_default_str();
        sub->add_option("--k", c.k, "Number of market states")->capture_default_str();
    };

    CLI::App* states = app.add_subcommand("states", "Cluster epochs into ordered market states");
    add_common(states);
    add_state_opts(states);

    CLI::App* optimize = app.add_subcommand("optimize", "sigma_intra grid over (k, epsilon)");
    add_common(optimize);
    optimize->add_option("--epsilon-grid", epsilon_grid, "start:stop:step or comma list");
    optimize->add_option("--k-range", k_range, "first..last");
    optimize->add_option("--k-min", k_min, "Smallest admissible k for the optimum")->required();

    CLI::App* transitions = app.add_subcommand("transitions", "Transition matrix and Markov checks");
    add_common(transitions);
    add_state_opts(transitions);
    transitions->add_option("--stride", c.stride, "Use every n-th epoch")->capture_default_str();
    transitions->add_option("--bootstrap", c.bootstrap, "Bootstrap replicates")->capture_default_str();
    transitions->add_option("--damping", c.damping, "Equilibrium damping weight")->capture_default_str();

    CLI::App* mds = app.add_subcommand("mds", "Classical MDS embedding and scatter");
    add_common(mds);
    add_state_opts(mds);
    mds->add_option("--axis-a", c.axis_a, "Horizontal axis (1-based)")->capture_default_str();
    mds->add_option("--axis-b", c.axis_b, "Vertical axis (1-based)")->capture_default_str();

    CLI::App* synth = app.add_subcommand("synth", "Generate synthetic markets or Markov chains");
    synth->add_option("--kind", c.synth_kind, "market or markov")->capture_default_str();
    synth->add_option("--regime-spec", regime_spec, "JSON regime specification");
    synth->add_option("--probs", probs, "JSON transition matrix");
    synth->add_option("--length", c.length, "Markov sequence length")->capture_default_str();
    synth->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    synth->add_option("--damping", c.damping, "Equilibrium damping weight")->capture_default_str();
    synth->add_option("--out", c.out, "Output directory")->capture_default_str();

    std::vector<std::string> args(argv, argv + argc);
    try {
        args = expand_config(std::move(args));
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitValidation;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (!sectors.empty()) {
            c.sectors = sectors;
        }
        if (!regime_spec.empty()) {
            c.regime_spec = regime_spec;
        }
        if (!probs.empty()) {
            c.probs = probs;
        }
        if (pipeline == "guhr") {
            c.pipeline = Pipeline::Guhr;
        } else if (pipeline != "pearson") {
            throw ConfigError("--pipeline must be pearson or guhr");
        }
        if (!k_range.empty()) {
            std::tie(c.k_first, c.k_last) = parse_k_range(k_range);
        }
        if (!epsilon_grid.empty()) {
            c.epsilon_grid = parse_epsilon_grid(epsilon_grid);
        }
        if (optimize->parsed()) {
            c.k_min = k_min;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitValidation;
    }

    if (states->parsed()) {
        return cmd_states(c);
    }
    if (optimize->parsed()) {
        return cmd_optimize(c);
    }
    if (transitions->parsed()) {
        return cmd_transitions(c);
    }
    if (mds->parsed()) {
        return cmd_mds(c);
    }
    return cmd_synth(c);
}

}  // namespace marketstates::app
