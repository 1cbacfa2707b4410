// SPDX-License-Identifier: Apache-2.0
#include "mmsound/schedule.hpp"

#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "mmsound/checksum.hpp"

namespace mmsound::schedule {

void FrameSpec::validate() const
{
    require(seq_duration_ns > 0, "frame: sequence duration must be positive");
    require(n_core >= 1, "frame: n_core must be >= 1");
    require(n_margin_head >= 0 && n_sync_tail >= 0, "frame: margin counts must be non-negative");
    require(guard_ns >= 0, "frame: guard time must be non-negative");
}

std::int64_t FrameSpec::frame_duration_ns() const
{
    return static_cast<std::int64_t>(n_margin_head + n_core + n_sync_tail) * seq_duration_ns + guard_ns;
}

double build_frame(const FrameSpec& spec)
{
    spec.validate();
    return spec.frame_duration_s();
}

std::string to_string(Polarization p) { return p == Polarization::H ? "H" : "V"; }

std::string to_string(SwitchMode m) { return m == SwitchMode::Sequential ? "sequential" : "pseudo_random"; }

SwitchMode parse_switch_mode(const std::string& s)
{
    if (s == "sequential")
        return SwitchMode::Sequential;
    if (s == "pseudo_random")
        return SwitchMode::PseudoRandom;
    throw ValidationError("unknown switching mode '" + s + "'");
}

SwitchCodebook gen_codebook(std::uint64_t seed, int n_tx, int n_rx, bool dual_pol, SwitchMode mode)
{
    require(n_tx >= 1 && n_rx >= 1, "codebook: array sizes must be >= 1");
    require(!dual_pol || n_rx % 2 == 0, "codebook: dual polarization needs an even rx feed count");

    // Units that are switched as a block: single feeds, or H/V feed pairs.
    const int rx_units = dual_pol ? n_rx / 2 : n_rx;
    std::vector<std::uint32_t> order(static_cast<std::size_t>(n_tx) * rx_units);
    std::iota(order.begin(), order.end(), 0u);

    if (mode == SwitchMode::PseudoRandom) {
        // Explicit Fisher-Yates with rejection sampling so the permutation is
        // identical on every standard library.
        std::mt19937_64 eng(seed);
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::uint64_t bound = i;
            const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                        std::numeric_limits<std::uint64_t>::max() % bound;
            std::uint64_t r;
            do {
                r = eng();
            } while (r >= limit);
            std::swap(order[i - 1], order[r % bound]);
        }
    }

    SwitchCodebook cb;
    cb.seed = seed;
    cb.n_tx = n_tx;
    cb.n_rx = n_rx;
    cb.dual_pol = dual_pol;
    cb.mode = mode;
    cb.entries.reserve(static_cast<std::size_t>(n_tx) * n_rx);
    for (auto unit : order) {
        const int tx = static_cast<int>(unit) / rx_units;
        const int rxu = static_cast<int>(unit) % rx_units;
        if (dual_pol) {
            cb.entries.push_back({tx, 2 * rxu, Polarization::H});
            cb.entries.push_back({tx, 2 * rxu + 1, Polarization::V});
        } else {
            cb.entries.push_back({tx, rxu, Polarization::V});
        }
    }
    return cb;
}

double SwitchSchedule::entry_time_s(std::size_t snapshot, std::size_t entry) const
{
    const std::int64_t ns = static_cast<std::int64_t>(snapshot) * snapshot_duration_ns + timestamps_ns.at(entry);
    return static_cast<double>(ns) * 1e-9;
}

std::vector<int> SwitchSchedule::entry_lookup() const
{
    std::vector<int> lut(static_cast<std::size_t>(codebook.n_tx) * codebook.n_rx, -1);
    for (std::size_t e = 0; e < codebook.entries.size(); ++e) {
        const auto& en = codebook.entries[e];
        lut[static_cast<std::size_t>(en.tx) * codebook.n_rx + en.rx] = static_cast<int>(e);
    }
    return lut;
}

SwitchSchedule snapshot_timing(const SwitchCodebook& codebook, const FrameSpec& frame)
{
    frame.validate();
    SwitchSchedule s;
    s.codebook = codebook;
    s.frame = frame;
    const std::int64_t step = frame.frame_duration_ns();
    s.timestamps_ns.resize(codebook.entries.size());
    for (std::size_t i = 0; i < s.timestamps_ns.size(); ++i)
        s.timestamps_ns[i] = static_cast<std::int64_t>(i) * step;
    s.snapshot_duration_ns = static_cast<std::int64_t>(codebook.entries.size()) * step;
    return s;
}

double max_unambiguous_doppler(const SwitchSchedule& schedule)
{
    require(schedule.snapshot_duration_ns > 0, "max_unambiguous_doppler: empty schedule");
    return 1.0 / (2.0 * schedule.snapshot_duration_s());
}

std::string codebook_json(const SwitchSchedule& schedule)
{
    nlohmann::ordered_json j;
    const auto& cb = schedule.codebook;
    j["schema_version"] = 1;
    j["prng"] = cb.prng;
    j["seed"] = cb.seed;
    j["mode"] = to_string(cb.mode);
    j["n_tx"] = cb.n_tx;
    j["n_rx"] = cb.n_rx;
    j["dual_pol"] = cb.dual_pol;
    j["frame"] = {{"seq_duration_ns", schedule.frame.seq_duration_ns},
                  {"n_core", schedule.frame.n_core},
                  {"n_margin_head", schedule.frame.n_margin_head},
                  {"n_sync_tail", schedule.frame.n_sync_tail},
                  {"guard_ns", schedule.frame.guard_ns}};
    j["frame_duration_ns"] = schedule.frame.frame_duration_ns();
    j["snapshot_duration_ns"] = schedule.snapshot_duration_ns;
    auto entries = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < cb.entries.size(); ++i) {
        const auto& e = cb.entries[i];
        entries.push_back({{"idx", i}, {"tx", e.tx}, {"rx", e.rx}, {"pol", to_string(e.pol)}, {"t_ns", schedule.timestamps_ns[i]}});
    }
    j["entries"] = std::move(entries);
    return j.dump();
}

SwitchSchedule parse_codebook_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("codebook: invalid JSON: ") + e.what());
    }
    require(j.contains("schema_version"), "codebook: missing schema_version");
    require(j["schema_version"] == 1, "codebook: unsupported schema_version");
    try {
        SwitchCodebook cb;
        cb.prng = j.at("prng").get<std::string>();
        cb.seed = j.at("seed").get<std::uint64_t>();
        cb.mode = parse_switch_mode(j.at("mode").get<std::string>());
        cb.n_tx = j.at("n_tx").get<int>();
        cb.n_rx = j.at("n_rx").get<int>();
        cb.dual_pol = j.at("dual_pol").get<bool>();
        const auto& f = j.at("frame");
        FrameSpec frame{f.at("seq_duration_ns").get<std::int64_t>(), f.at("n_core").get<int>(),
                        f.at("n_margin_head").get<int>(), f.at("n_sync_tail").get<int>(),
                        f.at("guard_ns").get<std::int64_t>()};
        for (const auto& e : j.at("entries")) {
            const auto pol = e.at("pol").get<std::string>();
            require(pol == "H" || pol == "V", "codebook: pol must be H or V");
            cb.entries.push_back({e.at("tx").get<int>(), e.at("rx").get<int>(), pol == "H" ? Polarization::H : Polarization::V});
        }
        auto s = snapshot_timing(cb, frame);
        std::size_t i = 0;
        for (const auto& e : j.at("entries"))
            require(e.at("t_ns").get<std::int64_t>() == s.timestamps_ns[i++], "codebook: timestamps inconsistent with frame");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("codebook: ") + e.what());
    }
}

std::string SwitchSchedule::checksum() const { return sha256_hex(codebook_json(*this)); }

} // namespace mmsound::schedule
