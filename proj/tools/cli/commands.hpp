#pragma once

#include <CLI11.hpp>

namespace dronerid::cli {

// Global flags shared by every subcommand.
struct Globals {
    std::uint64_t seed = 1;
    bool seed_set = false;
};

void register_synth(CLI::App& app, Globals& g);
void register_tfi(CLI::App& app, Globals& g);
void register_detect(CLI::App& app, Globals& g);
void register_correct(CLI::App& app, Globals& g);
void register_decode(CLI::App& app, Globals& g);
void register_eval(CLI::App& app, Globals& g);
void register_sweep(CLI::App& app, Globals& g);
void register_bank(CLI::App& app, Globals& g);

}  // namespace dronerid::cli
