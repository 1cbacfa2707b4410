// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <functional>
#include <map>

#include <CLI11.hpp>

#include "mmsound/cli.hpp"
#include "mmsound/parallel.hpp"

namespace mmsound::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Switched-array mmWave channel sounder simulator"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;

    using Handler = std::function<int(const Config&, const Options&, std::ostream&)>;
    const std::map<std::string, std::pair<std::string, Handler>> commands = {
        {"waveform", {"Generate the multitone sounding waveform", cmd_waveform}},
        {"codebook", {"Generate a switching codebook and its timing", cmd_codebook}},
        {"simulate", {"Simulate an acquisition and write the CIR tensor", cmd_simulate}},
        {"estimate", {"Estimate specular and dense parameters from a CIR tensor", cmd_estimate}},
        {"budget", {"Compute the link budget report", cmd_budget}},
        {"ambiguity", {"Doppler ambiguity function of a switching schedule", cmd_ambiguity}},
        {"track", {"Track azimuth AOA across per-snapshot results", cmd_track}},
    };
    std::map<std::string, CLI::Option*> seed_opts;
    for (const auto& [name, info] : commands) {
        auto* sub = app.add_subcommand(name, info.first);
        sub->add_option("--config", opt.config_path, "JSON config file");
        seed_opts[name] = sub->add_option("--seed", seed, "Random seed (overrides the config)");
        sub->add_option("--out", opt.out_dir, "Output directory");
        sub->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
        sub->add_flag("--verbose", opt.verbose, "Verbose output");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kOk : kValidation;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (seed_opts[name]->count() > 0)
        opt.seed = seed;
    set_threads(opt.threads);

    try {
        std::filesystem::create_directories(opt.out_dir);
        const Config cfg = load_config(opt.config_path);
        return commands.at(name).second(cfg, opt, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

} // namespace mmsound::cli
