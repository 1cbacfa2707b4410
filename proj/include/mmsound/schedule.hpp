// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmsound/common.hpp"

namespace mmsound::schedule {

// Sounding frame: head margins, M core sequences used for averaging, a sync
// tail, then the switch settling guard. Durations are integer nanoseconds.
struct FrameSpec {
    std::int64_t seq_duration_ns = 2600;
    int n_core = 4;
    int n_margin_head = 2;
    int n_sync_tail = 1;
    std::int64_t guard_ns = 100;

    void validate() const;
    std::int64_t frame_duration_ns() const;
    double frame_duration_s() const { return static_cast<double>(frame_duration_ns()) * 1e-9; }
};

// Builds the frame and returns its duration in seconds.
double build_frame(const FrameSpec& spec);

enum class Polarization : std::uint8_t { H = 0, V = 1 };
enum class SwitchMode { Sequential, PseudoRandom };

std::string to_string(Polarization p);
std::string to_string(SwitchMode m);
SwitchMode parse_switch_mode(const std::string& s);

struct CodebookEntry {
    int tx = 0;
    int rx = 0;
    Polarization pol = Polarization::V;
};

// Ordered switch states of one MIMO snapshot. With dual polarization the rx
// feed index encodes the polarization (rx = 2 * position + pol) and the two
// feeds of one (tx, rx position) pair are always adjacent.
struct SwitchCodebook {
    std::vector<CodebookEntry> entries;
    std::uint64_t seed = 0;
    int n_tx = 0;
    int n_rx = 0;
    bool dual_pol = false;
    SwitchMode mode = SwitchMode::PseudoRandom;
    std::string prng = kPrngName;

    static constexpr const char* kPrngName = "mt19937_64+fisher_yates/v1";
};

SwitchCodebook gen_codebook(std::uint64_t seed, int n_tx, int n_rx, bool dual_pol, SwitchMode mode);

struct SwitchSchedule {
    SwitchCodebook codebook;
    FrameSpec frame;
    std::vector<std::int64_t> timestamps_ns; // per entry, from snapshot start
    std::int64_t snapshot_duration_ns = 0;

    double snapshot_duration_s() const { return static_cast<double>(snapshot_duration_ns) * 1e-9; }
    std::size_t size() const { return codebook.entries.size(); }
    // Acquisition time of entry e in snapshot s, snapshots back to back.
    double entry_time_s(std::size_t snapshot, std::size_t entry) const;
    // Entry index measuring (tx, rx); -1 if not in the codebook.
    std::vector<int> entry_lookup() const; // index tx * n_rx + rx
    std::string checksum() const;
};

SwitchSchedule snapshot_timing(const SwitchCodebook& codebook, const FrameSpec& frame);

// Across-snapshot limit 1 / (2 * snapshot duration).
double max_unambiguous_doppler(const SwitchSchedule& schedule);

std::string codebook_json(const SwitchSchedule& schedule);
SwitchSchedule parse_codebook_json(const std::string& text);

} // namespace mmsound::schedule
