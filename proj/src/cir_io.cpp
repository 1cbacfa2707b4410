// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "mmsound/binary_io.hpp"
#include "mmsound/checksum.hpp"
#include "mmsound/json_util.hpp"
#include "mmsound/sounder.hpp"

namespace mmsound::sounder {

using namespace jsonutil;

void save_cir(const CirTensor& cir, const std::string& base_path)
{
    cir.validate();
    const auto bytes = io::encode_cf32(cir.values);
    io::write_bytes(base_path + ".bin", bytes);
    const json header = {{"format", "cir_tensor"},
                         {"schema_version", 1},
                         {"dims", {cir.n_snapshots, cir.n_tx, cir.n_rx, cir.n_delay}},
                         {"order", "s,t,r,tau"},
                         {"delay_step_s", cir.delay_step_s},
                         {"tone_spacing_hz", cir.tone_spacing_hz},
                         {"center_freq_hz", cir.center_frequency_hz},
                         {"bandwidth_hz", cir.bandwidth_hz},
                         {"M", cir.n_avg},
                         {"noise_var", cir.noise_var},
                         {"saturated", cir.saturated},
                         {"schedule_checksum", cir.schedule_checksum},
                         {"window", cir.window},
                         {"payload", std::filesystem::path(base_path + ".bin").filename().string()},
                         {"payload_sha256", sha256_hex(bytes)}};
    io::write_text(base_path + ".json", header.dump(2));
}

CirTensor load_cir(const std::string& base_path)
{
    const json h = parse(io::read_text(base_path + ".json"), "CIR header");
    check_keys(h, {"format", "schema_version", "dims", "order", "delay_step_s", "tone_spacing_hz", "center_freq_hz", "bandwidth_hz",
                   "M", "noise_var", "saturated", "schedule_checksum", "window", "payload", "payload_sha256"},
               "CIR header");
    require(get_req<std::string>(h, "format", "CIR header") == "cir_tensor", "CIR header: wrong format tag");
    require(get_req<int>(h, "schema_version", "CIR header") == 1, "CIR header: unsupported schema version");
    require(get_req<std::string>(h, "order", "CIR header") == "s,t,r,tau", "CIR header: unsupported axis order");
    const auto dims = get_req<std::vector<std::size_t>>(h, "dims", "CIR header");
    require(dims.size() == 4, "CIR header: dims must have four entries");
    CirTensor c;
    c.n_snapshots = dims[0];
    c.n_tx = dims[1];
    c.n_rx = dims[2];
    c.n_delay = dims[3];
    c.delay_step_s = get_req<double>(h, "delay_step_s", "CIR header");
    c.tone_spacing_hz = get_req<double>(h, "tone_spacing_hz", "CIR header");
    c.center_frequency_hz = get_req<double>(h, "center_freq_hz", "CIR header");
    c.bandwidth_hz = get_req<double>(h, "bandwidth_hz", "CIR header");
    c.n_avg = get_req<int>(h, "M", "CIR header");
    c.noise_var = get_req<double>(h, "noise_var", "CIR header");
    c.saturated = get_or(h, "saturated", false);
    c.schedule_checksum = get_req<std::string>(h, "schedule_checksum", "CIR header");
    c.window = get_req<std::vector<double>>(h, "window", "CIR header");
    const auto bytes = io::read_bytes(base_path + ".bin");
    require(sha256_hex(bytes) == get_req<std::string>(h, "payload_sha256", "CIR header"), "CIR payload checksum mismatch");
    c.values = io::decode_cf32(bytes);
    c.validate();
    return c;
}

std::string pdp_csv(const std::vector<double>& profile, double delay_step_s)
{
    std::ostringstream os;
    os << std::setprecision(9);
    os << "delay_ns,power_linear,power_db\n";
    for (std::size_t n = 0; n < profile.size(); ++n) {
        const double db = profile[n] > 0.0 ? 10.0 * std::log10(profile[n]) : -400.0;
        os << static_cast<double>(n) * delay_step_s * 1e9 << ',' << profile[n] << ',' << db << '\n';
    }
    return os.str();
}

std::string pas_csv(const PowerAngularSpectrum& s)
{
    std::ostringstream os;
    os << std::setprecision(9);
    os << "az_deg,el_deg,power_linear,power_db\n";
    for (std::size_t j = 0; j < s.el_rad.size(); ++j)
        for (std::size_t i = 0; i < s.az_rad.size(); ++i) {
            const double p = s.power[j * s.az_rad.size() + i];
            os << rad2deg(s.az_rad[i]) << ',' << rad2deg(s.el_rad[j]) << ',' << p << ','
               << (p > 0.0 ? 10.0 * std::log10(p) : -400.0) << '\n';
        }
    return os.str();
}

} // namespace mmsound::sounder
