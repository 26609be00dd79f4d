#pragma once

#include <optional>
#include <vector>

#include "vvdlab/types.hpp"

namespace vvdlab {

inline constexpr std::size_t kDefaultEqualizerTaps = 21;

/// FIR zero-forcing equalizer; convolving the channel with `taps` approximates a unit impulse at u_index.
struct Equalizer {
    std::vector<Complex> taps;
    std::size_t u_index = 0;
    /// ||u - H c|| achieved at design time.
    double residual = 0.0;
};

/// Centered target position for a channel of n_taps and an equalizer of length.
std::size_t centered_u_index(std::size_t n_taps, std::size_t length);

/// LS zero-forcing design: minimizes ||u - H c|| where H is the (L + N - 1) x L convolution matrix of h.
Equalizer design_zf(const Cir& h, std::size_t length = kDefaultEqualizerTaps, std::optional<std::size_t> u_index = std::nullopt);

/// Convolves with the equalizer and drops the first u_index samples; output length equals input length.
Waveform equalize(const Waveform& w, const Equalizer& e);

} // namespace vvdlab
