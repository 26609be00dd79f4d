#include "vvdlab/equalization.hpp"

#include <cmath>

#include "vvdlab/estimation.hpp"

namespace vvdlab {

std::size_t centered_u_index(std::size_t n_taps, std::size_t length)
{
    return (length + n_taps - 1) / 2;
}

Equalizer design_zf(const Cir& h, std::size_t length, std::optional<std::size_t> u_index)
{
    if (length == 0) {
        throw ArgumentError("equalizer length must be at least 1");
    }
    const std::size_t rows = length + h.size() - 1;
    const std::size_t target = u_index.value_or(centered_u_index(h.size(), length));
    if (target >= rows) {
        throw ArgumentError("u_index must be below L + N - 1 = " + std::to_string(rows));
    }
    const ConvolutionMatrix big_h(h.taps(), length);
    std::vector<Complex> u(rows);
    u[target] = 1.0;
    const Eigen::VectorXcd c = least_squares(big_h.matrix(), u);

    Equalizer e;
    e.taps.assign(c.data(), c.data() + c.size());
    e.u_index = target;
    const Eigen::Map<const Eigen::VectorXcd> u_vec(u.data(), static_cast<Eigen::Index>(rows));
    e.residual = (u_vec - big_h.matrix() * c).norm();
    for (const auto& t : e.taps) {
        if (!is_finite(t)) {
            throw SingularityError("equalizer design produced non-finite taps");
        }
    }
    return e;
}

Waveform equalize(const Waveform& w, const Equalizer& e)
{
    Waveform out;
    out.samples_per_chip = w.samples_per_chip;
    out.samples.assign(w.size(), Complex{});
    // out[n] = sum_j c[j] w[n + u - j]
    for (std::size_t j = 0; j < e.taps.size(); ++j) {
        const Complex c = e.taps[j];
        for (std::size_t n = 0; n < w.size(); ++n) {
            const std::size_t src_plus_j = n + e.u_index;
            if (src_plus_j < j) {
                continue;
            }
            const std::size_t src = src_plus_j - j;
            if (src >= w.size()) {
                break;
            }
            out.samples[n] += c * w.samples[src];
        }
    }
    return out;
}

} // namespace vvdlab
