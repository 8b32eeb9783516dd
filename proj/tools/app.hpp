#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace marketstates::app {

enum class Pipeline { Pearson, Guhr };

/// Everything a subcommand needs; populated from flags and an optional
/// key=value config file (flags win).
struct RunConfig {
    std::filesystem::path prices;
    std::optional<std::filesystem::path> sectors;
    std::size_t epoch = 20;
    std::size_t shift = 1;
    std::size_t max_gap = 2;
    double epsilon = 0.0;
    std::vector<double> epsilon_grid{0.0};
    std::size_t k = 5;
    std::size_t k_first = 2;
    std::size_t k_last = 8;
    std::optional<std::size_t> k_min;
    std::size_t n_init = 1000;
    std::uint64_t seed = 1;
    std::size_t max_iter = 300;
    std::string metric = "l1";
    Pipeline pipeline = Pipeline::Pearson;
    std::filesystem::path out = "out";
    std::size_t stride = 1;
    unsigned threads = 0;

    // transitions
    std::size_t bootstrap = 200;
    double damping = 0.0;

    // mds
    std::size_t axis_a = 1;
    std::size_t axis_b = 2;

    // synth
    std::string synth_kind = "market";
    std::optional<std::filesystem::path> regime_spec;
    std::optional<std::filesystem::path> probs;
    std::size_t length = 10000;
};

/// Parses "a..b", "a:b" or "a-b" into an inclusive range.
std::pair<std::size_t, std::size_t> parse_k_range(const std::string& text);

/// Parses "start:stop:step" (inclusive) or a comma list.
std::vector<double> parse_epsilon_grid(const std::string& text);

int cmd_states(const RunConfig& config);
int cmd_optimize(const RunConfig& config);
int cmd_transitions(const RunConfig& config);
int cmd_mds(const RunConfig& config);
int cmd_synth(const RunConfig& config);

/// Full command line entry point; returns the process exit status.
int run(int argc, char** argv);

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitComputation = 2;

inline constexpr const char* kVersion = "0.1.0";

}  // namespace marketstates::app
