// SPDX-License-Identifier: Apache-2.0
#include <filesystem>

#include "mmsound/binary_io.hpp"
#include "mmsound/checksum.hpp"
#include "mmsound/cli.hpp"
#include "mmsound/json_util.hpp"

namespace mmsound::cli {

namespace fs = std::filesystem;
using namespace jsonutil;

std::string Config::resolve(const std::string& path) const
{
    const fs::path p(path);
    if (p.is_absolute() || base_dir.empty())
        return p.string();
    return (fs::path(base_dir) / p).lexically_normal().string();
}

Config load_config(const std::string& path)
{
    Config c;
    if (path.empty()) {
        c.doc = json::object();
        c.sha256 = sha256_hex(std::string_view("{}"));
        return c;
    }
    require(fs::exists(path), "config file not found: " + path);
    const std::string text = io::read_text(path);
    c.doc = parse(text, "config " + path);
    require(c.doc.is_object(), "config " + path + ": top level must be an object");
    c.base_dir = fs::absolute(path).parent_path().string();
    c.sha256 = sha256_hex(text);
    return c;
}

schedule::FrameSpec frame_from_json(const json& j)
{
    check_keys(j, {"seq_duration_ns", "n_core", "n_margin_head", "n_sync_tail", "guard_ns"}, "frame");
    schedule::FrameSpec f;
    f.seq_duration_ns = get_or<std::int64_t>(j, "seq_duration_ns", f.seq_duration_ns);
    f.n_core = get_or(j, "n_core", f.n_core);
    f.n_margin_head = get_or(j, "n_margin_head", f.n_margin_head);
    f.n_sync_tail = get_or(j, "n_sync_tail", f.n_sync_tail);
    f.guard_ns = get_or<std::int64_t>(j, "guard_ns", f.guard_ns);
    f.validate();
    return f;
}

ArraySetup build_array(const json& spec, double carrier_hz, const Config& cfg)
{
    check_keys(spec, {"layout", "rows", "cols", "dual_pol", "spacing_m", "face_az_deg", "pattern", "calibration", "eadf"}, "array");
    const std::string layout = get_or<std::string>(spec, "layout", "upa");
    const double spacing = get_or(spec, "spacing_m", kSpeedOfLight / carrier_hz / 2.0);
    const int rows = get_or(spec, "rows", 2);
    const int cols = get_or(spec, "cols", 2);
    const bool dual = get_or(spec, "dual_pol", true);
    ArraySetup a;
    if (layout == "upa")
        a.geometry = arrays::ArrayGeometry::upa(rows, cols, spacing, dual, deg2rad(get_or(spec, "face_az_deg", 0.0)));
    else if (layout == "octagon")
        a.geometry = arrays::ArrayGeometry::octagon(rows, cols, spacing, dual);
    else if (layout == "sounder_tx")
        a.geometry = arrays::ArrayGeometry::sounder_tx(carrier_hz);
    else if (layout == "sounder_rx")
        a.geometry = arrays::ArrayGeometry::sounder_rx(carrier_hz);
    else if (layout == "single")
        a.geometry = arrays::ArrayGeometry::single();
    else
        throw ValidationError("array: unknown layout '" + layout + "'");

    arrays::PatternGrid grid;
    if (spec.contains("calibration")) {
        require(!spec.contains("pattern"), "array: give either 'pattern' or 'calibration'");
        grid = arrays::load_calibration(cfg.resolve(get_req<std::string>(spec, "calibration", "array")));
        require(grid.n_elements == a.geometry.size(), "array: calibration element count does not match the layout");
    } else {
        const json pat = get_or(spec, "pattern", json::object());
        check_keys(pat, {"hpbw_az_deg", "hpbw_el_deg", "xpd_db"}, "array.pattern");
        grid = arrays::synth_pattern(get_or(pat, "hpbw_az_deg", 85.0), get_or(pat, "hpbw_el_deg", 50.0), get_or(pat, "xpd_db", 20.0),
                                     a.geometry, {carrier_hz});
    }

    const json e = get_or(spec, "eadf", json::object());
    check_keys(e, {"max_error_db", "el_order", "az_order", "pole_sign"}, "array.eadf");
    arrays::Truncation trunc = arrays::Truncation::full();
    if (e.contains("max_error_db"))
        trunc = arrays::Truncation::bound(get_req<double>(e, "max_error_db", "array.eadf"));
    else if (e.contains("el_order") || e.contains("az_order"))
        trunc = arrays::Truncation::orders(get_or(e, "el_order", -1), get_or(e, "az_order", -1));
    a.eadf = arrays::compute_eadf(grid, trunc, get_or(e, "pole_sign", 1));
    return a;
}

void write_manifest(const std::string& command, const Options& opt, const Config& cfg, const std::vector<std::string>& outputs)
{
    json files = json::array();
    for (const auto& f : outputs)
        files.push_back({{"file", fs::path(f).filename().string()}, {"sha256", sha256_file(f)}});
    json m = {{"command", command}, {"config_sha256", cfg.sha256}, {"outputs", files}};
    if (opt.seed)
        m["seed"] = *opt.seed;
    io::write_text((fs::path(opt.out_dir) / ("manifest_" + command + ".json")).string(), m.dump(2) + "\n");
}

} // namespace mmsound::cli
