#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vvdlab/equalization.hpp"
#include "vvdlab/modem.hpp"
#include "vvdlab/types.hpp"

namespace vvdlab {

struct ReceiverConfig {
    std::size_t equalizer_taps = kDefaultEqualizerTaps;
    std::optional<std::size_t> u_index;
};

/// Outcome of receiving one packet.
struct PacketResult {
    bool available = false; // false when no estimate could be used
    std::vector<std::uint8_t> psdu;
    ChipVector psdu_chips;
    std::size_t chip_errors = 0;
    bool packet_ok = false;
};

struct Synchronization {
    std::size_t delay = 0;
    double phase = 0.0;
};

/// Timing and mean-phase alignment by correlating against the known SHR waveform over delays [0, max_delay].
Synchronization synchronize(const Waveform& rx, std::size_t max_delay);

/// Reference PSDU bytes recovered from the transmitted chips.
std::vector<std::uint8_t> reference_psdu(const TraceRecord& rec);

/// Decodes an already-aligned waveform and scores it against the record.
PacketResult score_waveform(const Waveform& aligned, const TraceRecord& rec, std::span<const std::uint8_t> truth_psdu);

/// No estimation or equalization: synchronization only.
PacketResult decode_standard(const TraceRecord& rec);

/// ZF-equalizes with the supplied estimate; an absent estimate yields an unavailable, failed packet.
PacketResult decode_with_estimate(const TraceRecord& rec, const std::optional<Cir>& estimate, const ReceiverConfig& cfg = {});

} // namespace vvdlab
