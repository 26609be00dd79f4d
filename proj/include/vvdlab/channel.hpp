#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "vvdlab/types.hpp"

namespace vvdlab {

using Rng = std::mt19937_64;

/// Pass as snr_db to disable noise.
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct ChannelConfig {
    std::size_t n_taps = kDefaultTaps;
    std::size_t pre_cursor = kDefaultPreCursor;
    std::size_t samples_per_chip = kDefaultSamplesPerChip;
    double snr_db = 15.0;
    /// Per-block standard deviation of the phase random walk (synthetic).
    double phase_drift_std_rad = 0.05;
    std::int64_t block_interval_ms = kBlockIntervalMs;
    std::uint64_t rng_seed = 1;
    /// Relative innovation power per tap; empty selects default_tap_profile().
    std::vector<double> tap_profile;
    /// Starting channel; when absent the AR chain is burned in from zero.
    std::optional<Cir> initial_cir;
};

/// Decaying power profile around the main tap, main tap = 1.
std::vector<double> default_tap_profile(std::size_t n_taps, std::size_t pre_cursor);

/// AR(p) model h[k] = sum_i phi_i h[k-i] + w[k], w ~ CN(0, process_noise_var).
class ArModel {
public:
    /// Rejects non-stationary coefficients (companion spectral radius >= 1).
    ArModel(std::vector<Complex> phi, double process_noise_var);

    static ArModel real(std::initializer_list<double> phi, double process_noise_var);

    std::size_t order() const noexcept { return phi_.size(); }
    const std::vector<Complex>& phi() const noexcept { return phi_; }
    double process_noise_var() const noexcept { return process_noise_var_; }

    /// Largest eigenvalue magnitude of the companion matrix.
    double spectral_radius() const;

private:
    std::vector<Complex> phi_;
    double process_noise_var_ = 0.0;
};

double companion_spectral_radius(std::span<const Complex> phi);

Complex complex_gaussian(Rng& rng, double variance);

/// Full linear convolution with a block-constant channel; |out| = |tx| + N - 1.
Waveform apply_channel(const Waveform& tx, const Cir& h);

/// Complex AWGN at the given SNR against the measured input power. +inf returns the input.
Waveform add_awgn(const Waveform& w, double snr_db, Rng& rng);

Waveform apply_phase_offset(const Waveform& w, double theta_rad);

/// One AR step per tap. history[0] is the most recent CIR; tap l gets innovation
/// variance process_noise_var * tap_scale[l] (1 when tap_scale is empty).
Cir evolve_cir(std::span<const Cir> history, const ArModel& model, Rng& rng, std::span<const double> tap_scale = {});

using PsduSource = std::function<std::vector<std::uint8_t>(std::int64_t seq_no, Rng& rng)>;

/// Uniform random payload bytes.
PsduSource random_psdu_source();

/// Per-packet channel and phase supplied by the caller; used by generate_trace and the scene generator.
struct PacketChannel {
    Cir cir;
    double phase_offset_rad = 0.0;
};

TraceRecord synthesize_packet(std::int64_t seq_no, std::int64_t timestamp_ms, const PacketChannel& channel,
                              std::span<const std::uint8_t> psdu, const ChannelConfig& cfg, Rng& rng);

/// Block-fading AR trace: evolve CIR, modulate a frame, apply channel, phase walk, AWGN.
TraceSet generate_trace(const ChannelConfig& cfg, const ArModel& model, std::size_t n_packets,
                        const PsduSource& psdu_source = random_psdu_source(), std::int64_t set_id = 0);

} // namespace vvdlab
