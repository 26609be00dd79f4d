#include "vvdlab/types.hpp"

#include <limits>
#include <numeric>

namespace vvdlab {

Cir::Cir(std::vector<Complex> taps, std::size_t pre_cursor) : taps_(std::move(taps)), pre_cursor_(pre_cursor)
{
    if (taps_.empty()) {
        throw ArgumentError("Cir needs at least one tap");
    }
    if (pre_cursor_ >= taps_.size()) {
        throw ArgumentError("Cir pre-cursor count must be below the tap count");
    }
    for (const auto& t : taps_) {
        if (!is_finite(t)) {
            throw ArgumentError("Cir taps must be finite");
        }
    }
}

Cir Cir::zeros(std::size_t n_taps, std::size_t pre_cursor)
{
    return Cir(std::vector<Complex>(n_taps), pre_cursor);
}

Cir Cir::impulse(std::size_t n_taps, std::size_t pre_cursor)
{
    std::vector<Complex> taps(n_taps);
    if (pre_cursor < n_taps) {
        taps[pre_cursor] = 1.0;
    }
    return Cir(std::move(taps), pre_cursor);
}

double Cir::energy() const noexcept
{
    return std::accumulate(taps_.begin(), taps_.end(), 0.0, [](double acc, Complex c) { return acc + std::norm(c); });
}

double Waveform::mean_power() const noexcept
{
    if (samples.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (const auto& s : samples) {
        acc += std::norm(s);
    }
    return acc / static_cast<double>(samples.size());
}

namespace {

void check_waveform(const Waveform& w, const TraceMetadata& metadata, const std::string& field)
{
    if (w.samples.empty()) {
        throw ValidationError(field, "waveform is empty");
    }
    if (w.samples_per_chip != metadata.samples_per_chip) {
        throw ValidationError(field, "samples_per_chip differs from the set header");
    }
    for (const auto& s : w.samples) {
        if (!is_finite(s)) {
            throw ValidationError(field, "non-finite sample");
        }
    }
}

} // namespace

void validate(const TraceRecord& record, const TraceMetadata& metadata)
{
    if (record.true_cir.size() != metadata.n_taps) {
        throw ValidationError("true_cir", "tap count differs from the set header");
    }
    if (record.true_cir.pre_cursor() >= record.true_cir.size()) {
        throw ValidationError("true_cir", "pre-cursor count out of range");
    }
    for (const auto& t : record.true_cir.taps()) {
        if (!is_finite(t)) {
            throw ValidationError("true_cir", "non-finite tap");
        }
    }
    if (record.tx_chips.size() % 32 != 0) {
        throw ValidationError("tx_chips", "chip count is not a whole number of 32-chip symbols");
    }
    for (auto c : record.tx_chips) {
        if (c > 1) {
            throw ValidationError("tx_chips", "chip value other than 0/1");
        }
    }
    check_waveform(record.tx_waveform, metadata, "tx_waveform");
    check_waveform(record.rx_waveform, metadata, "rx_waveform");
    if (record.rx_waveform.size() != record.tx_waveform.size() + metadata.n_taps - 1) {
        throw ValidationError("rx_waveform", "length must equal tx length + N - 1");
    }
    if (!std::isfinite(record.phase_offset_rad)) {
        throw ValidationError("phase_offset_rad", "not finite");
    }
    if (std::isnan(record.snr_db) || record.snr_db == -std::numeric_limits<double>::infinity()) {
        throw ValidationError("snr_db", "must be a number or +inf");
    }
}

void validate(const TraceSet& set)
{
    if (set.metadata.n_taps == 0) {
        throw ValidationError("n_taps", "must be positive");
    }
    if (set.metadata.samples_per_chip == 0) {
        throw ValidationError("samples_per_chip", "must be positive");
    }
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        validate(set.records[i], set.metadata);
        if (i > 0 && set.records[i].timestamp_ms <= set.records[i - 1].timestamp_ms) {
            throw ValidationError("timestamp_ms", "timestamps must be strictly increasing");
        }
    }
}

} // namespace vvdlab
