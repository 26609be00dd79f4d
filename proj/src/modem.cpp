#include "vvdlab/modem.hpp"

#include <cmath>
#include <numbers>
#include <string_view>

namespace vvdlab::modem {

namespace {

// IEEE Std 802.15.4-2003, Table 24 (2450 MHz PHY), chips c0..c31 left to right.
// Symbols 1-7 are 4-chip cyclic shifts of symbol 0; 8-15 invert the odd chips of 0-7.
constexpr std::array<std::string_view, kSymbolCount> kIeeeChips{
    "11011001110000110101001000101110", "11101101100111000011010100100010",
    "00101110110110011100001101010010", "00100010111011011001110000110101",
    "01010010001011101101100111000011", "00110101001000101110110110011100",
    "11000011010100100010111011011001", "10011100001101010010001011101101",
    "10001100100101100000011101111011", "10111000110010010110000001110111",
    "01111011100011001001011000000111", "01110111101110001100100101100000",
    "00000111011110111000110010010110", "01100000011101111011100011001001",
    "10010110000001110111101110001100", "11001001011000000111011110111000",
};

std::array<Sequence, kSymbolCount> parse_table()
{
    std::array<Sequence, kSymbolCount> out{};
    for (std::size_t s = 0; s < kSymbolCount; ++s) {
        for (std::size_t c = 0; c < kChipsPerSymbol; ++c) {
            out[s][c] = kIeeeChips[s][c] == '1' ? 1 : 0;
        }
    }
    return out;
}

int correlate(std::span<const std::uint8_t> chips, const Sequence& seq)
{
    return static_cast<int>(kChipsPerSymbol) - 2 * static_cast<int>(hamming_distance(chips, seq));
}

} // namespace

PnTable::PnTable(const std::array<Sequence, kSymbolCount>& sequences) : sequences_(sequences)
{
    min_distance_ = kChipsPerSymbol;
    for (std::size_t a = 0; a < kSymbolCount; ++a) {
        for (std::size_t b = a + 1; b < kSymbolCount; ++b) {
            min_distance_ = std::min(min_distance_, hamming_distance(sequences_[a], sequences_[b]));
        }
    }
    if (min_distance_ == 0) {
        throw ArgumentError("PN sequences must be pairwise distinct");
    }
}

const PnTable& PnTable::ieee802154()
{
    static const PnTable table(parse_table());
    return table;
}

std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b)
{
    if (a.size() != b.size()) {
        throw ArgumentError("hamming_distance needs equal lengths");
    }
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += ((a[i] != 0) != (b[i] != 0)) ? 1 : 0;
    }
    return d;
}

ChipVector spread_bytes(std::span<const std::uint8_t> bytes, const PnTable& table)
{
    ChipVector chips;
    chips.reserve(bytes.size() * 2 * kChipsPerSymbol);
    for (auto byte : bytes) {
        for (int nibble : {byte & 0x0F, byte >> 4}) {
            const auto& seq = table.sequence(static_cast<std::size_t>(nibble));
            chips.insert(chips.end(), seq.begin(), seq.end());
        }
    }
    return chips;
}

ChipVector spread(std::span<const std::uint8_t> psdu, const PnTable& table)
{
    if (psdu.size() != kPsduBytes) {
        throw ArgumentError("PSDU must be exactly 127 bytes, got " + std::to_string(psdu.size()));
    }
    return spread_bytes(psdu, table);
}

Despread despread(std::span<const std::uint8_t> chips, const PnTable& table)
{
    if (chips.size() != kChipsPerSymbol) {
        throw ArgumentError("despread needs exactly 32 chips, got " + std::to_string(chips.size()));
    }
    int best = -1000;
    int second = -1000;
    std::uint8_t best_symbol = 0;
    for (std::size_t s = 0; s < kSymbolCount; ++s) {
        const int score = correlate(chips, table.sequence(s));
        if (score > best) {
            second = best;
            best = score;
            best_symbol = static_cast<std::uint8_t>(s);
        } else if (score > second) {
            second = score;
        }
    }
    return {best_symbol, best - second};
}

std::vector<double> half_sine_pulse(std::size_t samples_per_chip)
{
    std::vector<double> p(samples_per_chip);
    for (std::size_t n = 0; n < samples_per_chip; ++n) {
        p[n] = std::sin(std::numbers::pi * (static_cast<double>(n) + 0.5) / static_cast<double>(samples_per_chip));
    }
    return p;
}

std::size_t waveform_length(std::size_t n_chips, std::size_t samples_per_chip)
{
    if (n_chips == 0) {
        return 0;
    }
    return (n_chips / 2) * samples_per_chip + q_offset(samples_per_chip);
}

Waveform modulate(std::span<const std::uint8_t> chips, std::size_t samples_per_chip)
{
    if (samples_per_chip == 0) {
        throw ArgumentError("samples_per_chip must be at least 1");
    }
    if (chips.size() % 2 != 0) {
        throw ArgumentError("O-QPSK needs an even chip count");
    }
    const auto pulse = half_sine_pulse(samples_per_chip);
    const auto off = q_offset(samples_per_chip);
    Waveform w;
    w.samples_per_chip = samples_per_chip;
    w.samples.assign(waveform_length(chips.size(), samples_per_chip), Complex{});
    for (std::size_t k = 0; k < chips.size() / 2; ++k) {
        const double i_amp = chips[2 * k] ? 1.0 : -1.0;
        const double q_amp = chips[2 * k + 1] ? 1.0 : -1.0;
        const std::size_t base = k * samples_per_chip;
        for (std::size_t n = 0; n < samples_per_chip; ++n) {
            w.samples[base + n] += Complex(i_amp * pulse[n], 0.0);
            w.samples[base + off + n] += Complex(0.0, q_amp * pulse[n]);
        }
    }
    return w;
}

ChipVector demodulate(const Waveform& w)
{
    const std::size_t spc = w.samples_per_chip;
    if (spc == 0) {
        throw ArgumentError("samples_per_chip must be at least 1");
    }
    if (w.samples.size() < spc) {
        throw ArgumentError("waveform shorter than one chip");
    }
    const auto pulse = half_sine_pulse(spc);
    const auto off = q_offset(spc);
    const std::size_t pairs = w.samples.size() / spc;
    ChipVector chips(2 * pairs);
    for (std::size_t k = 0; k < pairs; ++k) {
        const std::size_t base = k * spc;
        double i_acc = 0.0;
        double q_acc = 0.0;
        for (std::size_t n = 0; n < spc; ++n) {
            i_acc += w.samples[base + n].real() * pulse[n];
            const std::size_t qi = base + off + n;
            if (qi < w.samples.size()) {
                q_acc += w.samples[qi].imag() * pulse[n];
            }
        }
        chips[2 * k] = i_acc > 0.0 ? 1 : 0;
        chips[2 * k + 1] = q_acc > 0.0 ? 1 : 0;
    }
    return chips;
}

const ChipVector& shr_chips()
{
    static const ChipVector chips = [] {
        std::array<std::uint8_t, kPreambleBytes + 1> shr{0, 0, 0, 0, kSfd};
        return spread_bytes(shr);
    }();
    return chips;
}

ChipVector Frame::all_chips() const
{
    ChipVector out = shr_chips();
    out.insert(out.end(), psdu_chips.begin(), psdu_chips.end());
    return out;
}

Frame build_frame(std::span<const std::uint8_t> psdu, const PnTable& table)
{
    Frame f;
    f.psdu.assign(psdu.begin(), psdu.end());
    f.psdu_chips = spread(psdu, table);
    return f;
}

DecodedFrame decode_frame(std::span<const std::uint8_t> chips, std::optional<std::span<const std::uint8_t>> reference,
                          const PnTable& table)
{
    if (chips.size() != kPsduChips) {
        throw ArgumentError("decode_frame needs 8128 chips, got " + std::to_string(chips.size()));
    }
    if (reference && reference->size() != kPsduChips) {
        throw ArgumentError("reference must hold 8128 chips");
    }
    DecodedFrame out;
    out.psdu.resize(kPsduBytes);
    out.symbols.reserve(2 * kPsduBytes);
    for (std::size_t b = 0; b < kPsduBytes; ++b) {
        const auto lo = despread(chips.subspan(2 * b * kChipsPerSymbol, kChipsPerSymbol), table);
        const auto hi = despread(chips.subspan((2 * b + 1) * kChipsPerSymbol, kChipsPerSymbol), table);
        out.psdu[b] = static_cast<std::uint8_t>(lo.symbol | (hi.symbol << 4));
        out.symbols.push_back(lo);
        out.symbols.push_back(hi);
    }
    if (reference) {
        out.chip_errors.resize(kPsduChips);
        for (std::size_t i = 0; i < kPsduChips; ++i) {
            const bool err = (chips[i] != 0) != ((*reference)[i] != 0);
            out.chip_errors[i] = err ? 1 : 0;
            out.chip_error_count += err ? 1 : 0;
        }
    }
    return out;
}

} // namespace vvdlab::modem
