// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>

#include <nlohmann/json.hpp>

#include "mmsound/arrays.hpp"
#include "mmsound/binary_io.hpp"
#include "mmsound/checksum.hpp"

namespace mmsound::arrays {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json grid_json(const AngleGrid& g)
{
    return {{"az_step_deg", g.az_step_deg}, {"el_step_deg", g.el_step_deg}, {"el_min_deg", g.el_min_deg}, {"el_max_deg", g.el_max_deg}};
}

AngleGrid grid_from_json(const json& j)
{
    AngleGrid g;
    g.az_step_deg = j.at("az_step_deg").get<double>();
    g.el_step_deg = j.at("el_step_deg").get<double>();
    g.el_min_deg = j.at("el_min_deg").get<double>();
    g.el_max_deg = j.at("el_max_deg").get<double>();
    g.validate();
    return g;
}

std::string element_file(std::size_t e)
{
    char name[32];
    std::snprintf(name, sizeof name, "element_%04zu.bin", e);
    return name;
}

template <typename Fn>
auto parse_or_throw(const std::string& what, Fn&& fn)
{
    try {
        return fn();
    } catch (const json::exception& ex) {
        throw ValidationError(what + ": " + ex.what());
    }
}

} // namespace

void save_calibration(const PatternGrid& grid, const std::string& dir, const std::string& layout)
{
    grid.validate();
    fs::create_directories(dir);
    const std::size_t per_element = 2 * grid.frequencies_hz.size() * grid.slice_size();
    json files = json::array();
    for (std::size_t e = 0; e < grid.n_elements; ++e) {
        const auto bytes = io::encode_cf32(std::span<const cplx>(grid.gains.data() + e * per_element, per_element));
        io::write_bytes((fs::path(dir) / element_file(e)).string(), bytes);
        files.push_back({{"file", element_file(e)}, {"sha256", sha256_hex(bytes)}});
    }
    json header = {{"schema_version", 1},
                   {"layout", layout},
                   {"n_elements", grid.n_elements},
                   {"polarizations", {"H", "V"}},
                   {"frequencies_hz", grid.frequencies_hz},
                   {"grid", grid_json(grid.angles)},
                   {"payload", "cf32 [pol][freq][el][az]"},
                   {"elements", files}};
    io::write_text((fs::path(dir) / "header.json").string(), header.dump(2));
}

PatternGrid load_calibration(const std::string& dir)
{
    const json header = parse_or_throw("calibration header", [&] { return json::parse(io::read_text((fs::path(dir) / "header.json").string())); });
    return parse_or_throw("calibration header", [&] {
        require(header.at("schema_version").get<int>() == 1, "calibration: unsupported schema version");
        PatternGrid g;
        g.angles = grid_from_json(header.at("grid"));
        g.frequencies_hz = header.at("frequencies_hz").get<std::vector<double>>();
        g.n_elements = header.at("n_elements").get<std::size_t>();
        const auto& files = header.at("elements");
        require(files.size() == g.n_elements, "calibration: element file list does not match n_elements");
        const std::size_t per_element = 2 * g.frequencies_hz.size() * g.slice_size();
        g.gains.reserve(per_element * g.n_elements);
        for (std::size_t e = 0; e < g.n_elements; ++e) {
            const auto bytes = io::read_bytes((fs::path(dir) / files[e].at("file").get<std::string>()).string());
            require(sha256_hex(bytes) == files[e].at("sha256").get<std::string>(), "calibration: checksum mismatch for element " + std::to_string(e));
            const CVec v = io::decode_cf32(bytes);
            require(v.size() == per_element, "calibration: element " + std::to_string(e) + " has the wrong sample count");
            g.gains.insert(g.gains.end(), v.begin(), v.end());
        }
        g.validate();
        return g;
    });
}

void save_eadf(const Eadf& eadf, const std::string& base_path)
{
    std::vector<unsigned char> bytes(eadf.coefficients.size() * 16);
    for (std::size_t i = 0; i < eadf.coefficients.size(); ++i) {
        const double iq[2] = {eadf.coefficients[i].real(), eadf.coefficients[i].imag()};
        std::memcpy(bytes.data() + 16 * i, iq, 16);
    }
    io::write_bytes(base_path + ".bin", bytes);
    json header = {{"schema_version", 1},
                   {"n_elements", eadf.n_elements},
                   {"frequencies_hz", eadf.frequencies_hz},
                   {"el_order", eadf.el_order},
                   {"az_order", eadf.az_order},
                   {"pole_sign", eadf.pole_sign},
                   {"source_grid", grid_json(eadf.source_grid)},
                   {"source_checksum", eadf.source_checksum},
                   {"reconstruction_error_db", eadf.reconstruction_error_db},
                   {"payload", "f64 I/Q [element][pol][freq][el_order][az_order]"},
                   {"payload_sha256", sha256_hex(bytes)}};
    io::write_text(base_path + ".json", header.dump(2));
}

Eadf load_eadf(const std::string& base_path)
{
    const json header = parse_or_throw("EADF header", [&] { return json::parse(io::read_text(base_path + ".json")); });
    return parse_or_throw("EADF header", [&] {
        require(header.at("schema_version").get<int>() == 1, "EADF: unsupported schema version");
        Eadf e;
        e.n_elements = header.at("n_elements").get<std::size_t>();
        e.frequencies_hz = header.at("frequencies_hz").get<std::vector<double>>();
        e.el_order = header.at("el_order").get<int>();
        e.az_order = header.at("az_order").get<int>();
        e.pole_sign = header.at("pole_sign").get<int>();
        e.source_grid = grid_from_json(header.at("source_grid"));
        e.source_checksum = header.at("source_checksum").get<std::string>();
        const auto& err = header.at("reconstruction_error_db");
        e.reconstruction_error_db = err.is_null() ? -std::numeric_limits<double>::infinity() : err.get<double>();
        require(e.el_order >= 0 && e.az_order >= 0 && !e.frequencies_hz.empty(), "EADF: invalid header");
        const auto bytes = io::read_bytes(base_path + ".bin");
        require(sha256_hex(bytes) == header.at("payload_sha256").get<std::string>(), "EADF: payload checksum mismatch");
        const std::size_t n = e.n_elements * 2 * e.frequencies_hz.size() * e.n_p() * e.n_q();
        require(bytes.size() == n * 16, "EADF: payload size mismatch");
        e.coefficients.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double iq[2];
            std::memcpy(iq, bytes.data() + 16 * i, 16);
            e.coefficients[i] = {iq[0], iq[1]};
        }
        return e;
    });
}

} // namespace mmsound::arrays
