#include <iostream>

#include "commands.hpp"
#include "dronerid/error.hpp"

int main(int argc, char** argv) {
    using namespace dronerid::cli;
    CLI::App app{"Drone broadcast frame detection, box correction and decoding"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random draw")->each([&](const std::string&) { g.seed_set = true; });

    register_synth(app, g);
    register_tfi(app, g);
    register_detect(app, g);
    register_correct(app, g);
    register_decode(app, g);
    register_eval(app, g);
    register_sweep(app, g);
    register_bank(app, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const dronerid::Error& e) {
        std::cerr << "error (" << dronerid::to_string(e.code()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
