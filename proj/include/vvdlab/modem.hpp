#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vvdlab/types.hpp"

namespace vvdlab::modem {

inline constexpr std::size_t kChipsPerSymbol = 32;
inline constexpr std::size_t kSymbolCount = 16;
inline constexpr std::size_t kPsduBytes = 127;
inline constexpr std::size_t kPsduChips = kPsduBytes * 2 * kChipsPerSymbol; // 8128
inline constexpr std::size_t kPsduBits = kPsduBytes * 8;                    // 1016
inline constexpr std::size_t kPreambleBytes = 4;
inline constexpr std::uint8_t kSfd = 0xA7;
inline constexpr std::size_t kShrChips = (kPreambleBytes + 1) * 2 * kChipsPerSymbol; // 320

using Sequence = std::array<std::uint8_t, kChipsPerSymbol>;

/// Symbol-to-chip map of the 2450 MHz O-QPSK PHY.
class PnTable {
public:
    /// The table from IEEE Std 802.15.4 (2450 MHz band, 32-chip PN sequences).
    static const PnTable& ieee802154();

    explicit PnTable(const std::array<Sequence, kSymbolCount>& sequences);

    const Sequence& sequence(std::size_t symbol) const { return sequences_.at(symbol); }
    const std::array<Sequence, kSymbolCount>& sequences() const noexcept { return sequences_; }

    /// Smallest Hamming distance between two distinct sequences.
    std::size_t min_distance() const noexcept { return min_distance_; }

private:
    std::array<Sequence, kSymbolCount> sequences_;
    std::size_t min_distance_ = 0;
};

std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Spreads any byte string, low nibble of each byte first.
ChipVector spread_bytes(std::span<const std::uint8_t> bytes, const PnTable& table = PnTable::ieee802154());

/// Spreads a 127-byte PSDU into 8128 chips.
ChipVector spread(std::span<const std::uint8_t> psdu, const PnTable& table = PnTable::ieee802154());

struct Despread {
    std::uint8_t symbol = 0;
    /// Best minus second-best bipolar correlation; 0 on a tie.
    int margin = 0;
};

/// Hard-decision correlation against all 16 sequences. Ties go to the lowest symbol.
Despread despread(std::span<const std::uint8_t> chips, const PnTable& table = PnTable::ieee802154());

/// Samples of one half-sine chip pulse.
std::vector<double> half_sine_pulse(std::size_t samples_per_chip);

/// Delay of the Q rail in samples.
inline std::size_t q_offset(std::size_t samples_per_chip) noexcept { return samples_per_chip / 2; }

/// Number of samples modulate() emits for n_chips chips.
std::size_t waveform_length(std::size_t n_chips, std::size_t samples_per_chip);

/// O-QPSK with half-sine shaping: even chips on I, odd chips on Q delayed half a chip.
Waveform modulate(std::span<const std::uint8_t> chips, std::size_t samples_per_chip = kDefaultSamplesPerChip);

/// Matched half-sine filter sampled once per chip; a chip is 1 iff its correlation is positive.
/// Emits two chips per whole chip slot in the waveform; Q samples past the end count as zero.
ChipVector demodulate(const Waveform& w);

/// Preamble (4 zero bytes) and SFD, spread like the PSDU.
const ChipVector& shr_chips();

struct Frame {
    std::vector<std::uint8_t> psdu;
    ChipVector psdu_chips;

    /// SHR chips followed by PSDU chips.
    ChipVector all_chips() const;
};

Frame build_frame(std::span<const std::uint8_t> psdu, const PnTable& table = PnTable::ieee802154());

struct DecodedFrame {
    std::vector<std::uint8_t> psdu;
    std::vector<Despread> symbols;
    /// Per-chip error flags, filled only when a reference was supplied.
    ChipVector chip_errors;
    std::size_t chip_error_count = 0;
};

/// Despreads 8128 PSDU chips into 127 bytes.
DecodedFrame decode_frame(std::span<const std::uint8_t> chips,
                          std::optional<std::span<const std::uint8_t>> reference = std::nullopt,
                          const PnTable& table = PnTable::ieee802154());

} // namespace vvdlab::modem
