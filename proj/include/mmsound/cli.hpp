// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsound/arrays.hpp"
#include "mmsound/schedule.hpp"

namespace mmsound::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    unsigned threads = 0;
    bool verbose = false;
};

// Parsed config plus the directory relative paths are resolved against.
struct Config {
    json doc;
    std::string base_dir;
    std::string sha256;

    std::string resolve(const std::string& path) const;
};

Config load_config(const std::string& path);

// Array description shared by simulate and estimate.
struct ArraySetup {
    arrays::ArrayGeometry geometry;
    arrays::Eadf eadf;
};
ArraySetup build_array(const json& spec, double carrier_hz, const Config& cfg);
schedule::FrameSpec frame_from_json(const json& j);

int cmd_waveform(const Config& cfg, const Options& opt, std::ostream& out);
int cmd_codebook(const Config& cfg, const Options& opt, std::ostream& out);
int cmd_simulate(const Config& cfg, const Options& opt, std::ostream& out);
int cmd_estimate(const Config& cfg, const Options& opt, std::ostream& out);
int cmd_budget(const Config& cfg, const Options& opt, std::ostream& out);
int cmd_ambiguity(const Config& cfg, const Options& opt, std::ostream& out);
int cmd_track(const Config& cfg, const Options& opt, std::ostream& out);

// Writes <out_dir>/manifest_<command>.json listing the SHA-256 of each output.
void write_manifest(const std::string& command, const Options& opt, const Config& cfg,
                    const std::vector<std::string>& outputs);

// Entry point shared by the tool and the tests: maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mmsound::cli
