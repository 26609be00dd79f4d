#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vvdlab {

using Complex = std::complex<double>;
using ChipVector = std::vector<std::uint8_t>;

/// Default FIR length of every channel estimate.
inline constexpr std::size_t kDefaultTaps = 11;
/// Default index of the main tap (taps 6-8 dominate when counted from 1).
inline constexpr std::size_t kDefaultPreCursor = 5;
inline constexpr std::size_t kDefaultSamplesPerChip = 4;
inline constexpr std::int64_t kBlockIntervalMs = 100;

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by linear solvers when the system is rank deficient.
class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& detail)
        : std::runtime_error("invalid " + field + ": " + detail), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

inline bool is_finite(Complex c) noexcept
{
    return std::isfinite(c.real()) && std::isfinite(c.imag());
}

/// Complex FIR channel impulse response with a nominal main-tap index.
class Cir {
public:
    Cir() = default;
    explicit Cir(std::vector<Complex> taps, std::size_t pre_cursor = kDefaultPreCursor);

    static Cir zeros(std::size_t n_taps = kDefaultTaps, std::size_t pre_cursor = kDefaultPreCursor);
    /// Unit impulse at the main tap.
    static Cir impulse(std::size_t n_taps = kDefaultTaps, std::size_t pre_cursor = kDefaultPreCursor);

    std::size_t size() const noexcept { return taps_.size(); }
    std::size_t pre_cursor() const noexcept { return pre_cursor_; }
    const std::vector<Complex>& taps() const noexcept { return taps_; }
    Complex operator[](std::size_t i) const { return taps_[i]; }

    double energy() const noexcept;

    friend bool operator==(const Cir&, const Cir&) = default;

private:
    std::vector<Complex> taps_;
    std::size_t pre_cursor_ = 0;
};

struct Waveform {
    std::vector<Complex> samples;
    std::size_t samples_per_chip = kDefaultSamplesPerChip;

    std::size_t size() const noexcept { return samples.size(); }
    double mean_power() const noexcept;

    friend bool operator==(const Waveform&, const Waveform&) = default;
};

/// One transmission: what was sent, what arrived, and the channel in between.
struct TraceRecord {
    std::int64_t seq_no = 0;
    std::int64_t timestamp_ms = 0;
    ChipVector tx_chips;  // PSDU chips, one 0/1 value per entry
    Waveform tx_waveform; // full frame: preamble, SFD and PSDU
    Waveform rx_waveform;
    Cir true_cir;
    double phase_offset_rad = 0.0;
    double snr_db = 0.0;
    std::optional<std::int64_t> scene_id;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct TraceMetadata {
    std::uint32_t sample_rate_hz = 8'000'000;
    std::uint32_t n_taps = kDefaultTaps;
    std::uint32_t samples_per_chip = kDefaultSamplesPerChip;
    std::uint64_t seed = 0;

    friend bool operator==(const TraceMetadata&, const TraceMetadata&) = default;
};

struct TraceSet {
    std::int64_t set_id = 0;
    TraceMetadata metadata;
    std::vector<TraceRecord> records;

    friend bool operator==(const TraceSet&, const TraceSet&) = default;
};

struct EstimateRecord {
    std::int64_t seq_no = 0;
    std::string technique;
    std::optional<Cir> cir; // empty when the estimate is unavailable

    bool available() const noexcept { return cir.has_value(); }

    friend bool operator==(const EstimateRecord&, const EstimateRecord&) = default;
};

/// Throws ValidationError naming the offending field.
void validate(const TraceRecord& record, const TraceMetadata& metadata);
void validate(const TraceSet& set);

} // namespace vvdlab
