#include "vvdlab/receiver.hpp"

#include <cmath>

#include "vvdlab/estimation.hpp"

namespace vvdlab {

namespace {

const Waveform& shr_waveform(std::size_t spc)
{
    // One cached waveform per oversampling factor in practical use.
    thread_local std::size_t cached_spc = 0;
    thread_local Waveform cached;
    if (cached_spc != spc) {
        cached = modem::modulate(modem::shr_chips(), spc);
        cached_spc = spc;
    }
    return cached;
}

} // namespace

Synchronization synchronize(const Waveform& rx, std::size_t max_delay)
{
    const std::size_t spc = rx.samples_per_chip;
    const auto& shr = shr_waveform(spc);
    const std::size_t m = known_preamble_samples(spc);
    Synchronization best;
    double best_mag = -1.0;
    for (std::size_t d = 0; d <= max_delay && d + m <= rx.size(); ++d) {
        Complex acc{};
        for (std::size_t n = 0; n < m; ++n) {
            acc += rx.samples[d + n] * std::conj(shr.samples[n]);
        }
        const double mag = std::abs(acc);
        if (mag > best_mag) {
            best_mag = mag;
            best.delay = d;
            best.phase = std::arg(acc);
        }
    }
    return best;
}

std::vector<std::uint8_t> reference_psdu(const TraceRecord& rec)
{
    return modem::decode_frame(rec.tx_chips).psdu;
}

PacketResult score_waveform(const Waveform& aligned, const TraceRecord& rec, std::span<const std::uint8_t> truth_psdu)
{
    auto chips = modem::demodulate(aligned);
    const std::size_t end = modem::kShrChips + modem::kPsduChips;
    if (chips.size() < end) {
        chips.resize(end, 0);
    }
    const std::span<const std::uint8_t> psdu_chips(chips.data() + modem::kShrChips, modem::kPsduChips);
    const auto decoded = modem::decode_frame(psdu_chips, std::span<const std::uint8_t>(rec.tx_chips));
    PacketResult out;
    out.available = true;
    out.psdu = decoded.psdu;
    out.psdu_chips.assign(psdu_chips.begin(), psdu_chips.end());
    out.chip_errors = decoded.chip_error_count;
    out.packet_ok = std::equal(out.psdu.begin(), out.psdu.end(), truth_psdu.begin(), truth_psdu.end());
    return out;
}

PacketResult decode_standard(const TraceRecord& rec)
{
    const std::size_t max_delay = rec.rx_waveform.size() - std::min(rec.rx_waveform.size(), rec.tx_waveform.size());
    const auto sync = synchronize(rec.rx_waveform, max_delay);
    Waveform aligned;
    aligned.samples_per_chip = rec.rx_waveform.samples_per_chip;
    const Complex derotate = std::polar(1.0, -sync.phase);
    aligned.samples.reserve(rec.rx_waveform.size() - sync.delay);
    for (std::size_t i = sync.delay; i < rec.rx_waveform.size(); ++i) {
        aligned.samples.push_back(rec.rx_waveform.samples[i] * derotate);
    }
    const auto truth = reference_psdu(rec);
    return score_waveform(aligned, rec, truth);
}

PacketResult decode_with_estimate(const TraceRecord& rec, const std::optional<Cir>& estimate, const ReceiverConfig& cfg)
{
    if (!estimate) {
        PacketResult out;
        out.chip_errors = modem::kPsduChips;
        return out;
    }
    PacketResult failed;
    failed.available = true;
    failed.chip_errors = modem::kPsduChips;
    Equalizer eq;
    try {
        eq = design_zf(*estimate, cfg.equalizer_taps, cfg.u_index);
    } catch (const SingularityError&) {
        return failed;
    }
    const auto truth = reference_psdu(rec);
    return score_waveform(equalize(rec.rx_waveform, eq), rec, truth);
}

} // namespace vvdlab
