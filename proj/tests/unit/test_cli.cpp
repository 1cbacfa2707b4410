// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmsound/binary_io.hpp"
#include "mmsound/cli.hpp"
#include "support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr)
{
    args.insert(args.begin(), "mmsound");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = mmsound::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text)
        *out_text = out.str();
    return rc;
}

std::string slurp(const fs::path& p) { return mmsound::io::read_text(p.string()); }

// Small two-path simulation plus its estimate config.
fs::path small_simulation(const std::string& name)
{
    const fs::path dir = testing::scratch_dir(name);
    write_json(dir / "scene.json",
               {{"carrier_hz", 28e9},
                {"tones", {{"n_tones", 64}, {"spacing_hz", 500e3}}},
                {"paths",
                 {{{"delay_ns", 20.0}, {"aoa_az_deg", 10.0}, {"aoa_el_deg", 0.0}, {"aod_az_deg", -5.0}, {"aod_el_deg", 0.0},
                   {"gain", {{{1.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {1.0, 0.0}}}}, {"doppler_hz", 15.0}},
                  {{"delay_ns", 45.0}, {"aoa_az_deg", -30.0}, {"aoa_el_deg", 0.0}, {"aod_az_deg", 20.0}, {"aod_el_deg", 0.0},
                   {"gain", {{{0.4, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {0.4, 0.0}}}}}}}});
    const json arr = {{"layout", "upa"}, {"rows", 1}, {"cols", 2}, {"dual_pol", true}, {"eadf", {{"max_error_db", -50}}}};
    write_json(dir / "sim.json", {{"scene", "scene.json"},
                                  {"tx", arr},
                                  {"rx", arr},
                                  {"schedule", {{"mode", "pseudo_random"}}},
                                  {"n_snapshots", 2},
                                  {"noise", {{"snr_db", 25}}},
                                  {"pas", {{"az_step_deg", 10}, {"el_step_deg", 30}}},
                                  {"output_prefix", "small"}});
    write_json(dir / "est.json", {{"simulation", "sim.json"}, {"specular", {{"max_paths", 3}, {"margin_db", 10}}}, {"output_prefix", "small"}});
    return dir;
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("budget prints and writes the link budget")
    {
        const fs::path dir = testing::scratch_dir("cli_budget");
        write_json(dir / "b.json", json::object());
        std::string text;
        REQUIRE(run_cli({"budget", "--config", (dir / "b.json").string(), "--out", dir.string()}, &text) == 0);
        const auto j = json::parse(slurp(dir / "budget.json"));
        CHECK(j["sensitivity_dbm"].get<double>() == doctest::Approx(-79.0));
        CHECK(j["isotropic_sensitivity_dbm"].get<double>() == doctest::Approx(-109.08));
        CHECK(j["max_pathloss_db"].get<double>() == doctest::Approx(152.08));
        CHECK(j["dynamic_range_db"].get<double>() == doctest::Approx(75.0));
        CHECK(text.find("max_pathloss_db") != std::string::npos);
        CHECK(fs::exists(dir / "manifest_budget.json"));
    }

    TEST_CASE("validation failures exit with code 2")
    {
        const fs::path dir = testing::scratch_dir("cli_invalid");
        write_json(dir / "w.json", {{"n_tones", 16}, {"tone_spacing_hz", 0.0}});
        CHECK(run_cli({"waveform", "--config", (dir / "w.json").string(), "--out", dir.string()}) == 2);
        write_json(dir / "b.json", {{"noise_figure", 3}});
        CHECK(run_cli({"budget", "--config", (dir / "b.json").string(), "--out", dir.string()}) == 2);
        CHECK(run_cli({"budget", "--config", (dir / "missing.json").string(), "--out", dir.string()}) == 2);
        CHECK(run_cli({"frobnicate"}) == 2);
        CHECK(run_cli({"codebook", "--config", (dir / "b.json").string(), "--threads", "x"}) == 2);
    }

    TEST_CASE("waveform and codebook commands")
    {
        const fs::path dir = testing::scratch_dir("cli_wave");
        write_json(dir / "w.json", {{"n_tones", 64}, {"tone_spacing_hz", 500e3}, {"phase_rule", "zadoff_chu_quadratic"}, {"output", "wf"}});
        REQUIRE(run_cli({"waveform", "--config", (dir / "w.json").string(), "--out", dir.string()}) == 0);
        const auto meta = json::parse(slurp(dir / "wf.json"));
        CHECK(meta["n_tones"] == 64);
        CHECK(fs::file_size(dir / "wf.bin") == meta["n_samples"].get<std::size_t>() * 8);

        write_json(dir / "c.json", {{"n_tx", 4}, {"n_rx", 4}, {"dual_pol", true}, {"output", "cb.json"}});
        REQUIRE(run_cli({"codebook", "--config", (dir / "c.json").string(), "--seed", "5", "--out", dir.string()}) == 0);
        const auto cb = json::parse(slurp(dir / "cb.json"));
        CHECK(cb.contains("schema_version"));
        const auto man = json::parse(slurp(dir / "manifest_codebook.json"));
        CHECK(man["seed"] == 5);
        CHECK(man["outputs"][0]["sha256"].get<std::string>().size() == 64);
    }

    TEST_CASE("simulate and estimate round trip, with checksum guards")
    {
        const fs::path dir = small_simulation("cli_roundtrip");
        REQUIRE(run_cli({"simulate", "--config", (dir / "sim.json").string(), "--seed", "3", "--out", dir.string()}) == 0);
        for (const char* f : {"small_cir.json", "small_cir.bin", "small_codebook.json", "small_pdp.csv", "small_pas.csv",
                              "small_summary.json", "manifest_simulate.json"})
            CHECK(fs::exists(dir / f));
        REQUIRE(run_cli({"estimate", "--config", (dir / "est.json").string(), "--seed", "3", "--out", dir.string()}) == 0);
        const auto res = json::parse(slurp(dir / "small_result.json"));
        REQUIRE(res["paths"].size() >= 2);
        CHECK(fs::exists(dir / "small_tracks.csv"));

        // The same result twice is one set of persistent tracks.
        write_json(dir / "track.json", {{"results", {"small_result.json", "small_result.json"}}, {"times_s", {0.0, 0.01}}, {"output", "t.csv"}});
        std::string text;
        REQUIRE(run_cli({"track", "--config", (dir / "track.json").string(), "--out", dir.string()}, &text) == 0);
        CHECK(text.find("tracks " + std::to_string(res["paths"].size())) == 0);
        write_json(dir / "track.json", {{"results", {"small_result.json"}}, {"times_s", {0.0}}});
        CHECK(run_cli({"track", "--config", (dir / "track.json").string(), "--out", dir.string()}) == 2);

        // A codebook from another seed no longer matches the tensor header.
        const std::string good_cb = slurp(dir / "small_codebook.json");
        write_json(dir / "c.json", {{"n_tx", 4}, {"n_rx", 4}, {"dual_pol", true}, {"output", "small_codebook.json"}});
        REQUIRE(run_cli({"codebook", "--config", (dir / "c.json").string(), "--seed", "99", "--out", dir.string()}) == 0);
        CHECK(run_cli({"estimate", "--config", (dir / "est.json").string(), "--out", dir.string()}) == 2);
        mmsound::io::write_text((dir / "small_codebook.json").string(), good_cb);

        // A tampered header is rejected.
        auto header = json::parse(slurp(dir / "small_cir.json"));
        header["dims"][3] = header["dims"][3].get<int>() + 1;
        write_json(dir / "small_cir.json", header);
        CHECK(run_cli({"estimate", "--config", (dir / "est.json").string(), "--out", dir.string()}) == 2);
    }

    TEST_CASE("outputs are byte-identical across thread counts")
    {
        const fs::path a = small_simulation("cli_det_a");
        const fs::path b = small_simulation("cli_det_b");
        REQUIRE(run_cli({"simulate", "--config", (a / "sim.json").string(), "--seed", "11", "--threads", "1", "--out", a.string()}) == 0);
        REQUIRE(run_cli({"simulate", "--config", (b / "sim.json").string(), "--seed", "11", "--threads", "0", "--out", b.string()}) == 0);
        for (const char* f : {"small_cir.bin", "small_cir.json", "small_pdp.csv", "small_pas.csv", "manifest_simulate.json"})
            CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
        REQUIRE(run_cli({"simulate", "--config", (b / "sim.json").string(), "--seed", "12", "--out", b.string()}) == 0);
        CHECK(slurp(a / "small_cir.bin") != slurp(b / "small_cir.bin"));
    }
}
