#include "vvdlab/channel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Eigenvalues>

#include "vvdlab/modem.hpp"

namespace vvdlab {

std::vector<double> default_tap_profile(std::size_t n_taps, std::size_t pre_cursor)
{
    std::vector<double> profile(n_taps);
    for (std::size_t l = 0; l < n_taps; ++l) {
        if (l < pre_cursor) {
            profile[l] = std::exp(-static_cast<double>(pre_cursor - l) / 0.7);
        } else {
            profile[l] = std::exp(-static_cast<double>(l - pre_cursor) / 1.5);
        }
    }
    return profile;
}

double companion_spectral_radius(std::span<const Complex> phi)
{
    const auto p = static_cast<Eigen::Index>(phi.size());
    if (p == 0) {
        return 0.0;
    }
    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        companion(0, i) = phi[static_cast<std::size_t>(i)];
    }
    for (Eigen::Index i = 1; i < p; ++i) {
        companion(i, i - 1) = 1.0;
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

ArModel::ArModel(std::vector<Complex> phi, double process_noise_var) : phi_(std::move(phi)), process_noise_var_(process_noise_var)
{
    if (phi_.empty()) {
        throw ArgumentError("AR order must be at least 1");
    }
    if (!(process_noise_var_ >= 0.0) || !std::isfinite(process_noise_var_)) {
        throw ArgumentError("process noise variance must be finite and nonnegative");
    }
    for (const auto& c : phi_) {
        if (!is_finite(c)) {
            throw ArgumentError("AR coefficients must be finite");
        }
    }
    // phi = [1] is the frozen channel; allow it only without innovation.
    const double rho = companion_spectral_radius(phi_);
    const bool frozen = process_noise_var_ == 0.0 && rho <= 1.0 + 1e-12;
    if (rho >= 1.0 && !frozen) {
        throw ArgumentError("AR coefficients are not stationary (spectral radius " + std::to_string(rho) + ")");
    }
}

ArModel ArModel::real(std::initializer_list<double> phi, double process_noise_var)
{
    std::vector<Complex> c(phi.begin(), phi.end());
    return ArModel(std::move(c), process_noise_var);
}

double ArModel::spectral_radius() const
{
    return companion_spectral_radius(phi_);
}

Complex complex_gaussian(Rng& rng, double variance)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
    const double re = normal(rng);
    const double im = normal(rng);
    return {re, im};
}

Waveform apply_channel(const Waveform& tx, const Cir& h)
{
    for (const auto& t : h.taps()) {
        if (!is_finite(t)) {
            throw ArgumentError("channel taps must be finite");
        }
    }
    Waveform out;
    out.samples_per_chip = tx.samples_per_chip;
    if (tx.samples.empty()) {
        return out;
    }
    const std::size_t n = h.size();
    out.samples.assign(tx.size() + n - 1, Complex{});
    for (std::size_t l = 0; l < n; ++l) {
        const Complex tap = h[l];
        if (tap == Complex{}) {
            continue;
        }
        for (std::size_t m = 0; m < tx.size(); ++m) {
            out.samples[m + l] += tap * tx.samples[m];
        }
    }
    return out;
}

Waveform add_awgn(const Waveform& w, double snr_db, Rng& rng)
{
    if (w.samples.empty()) {
        throw ArgumentError("add_awgn needs a nonempty waveform");
    }
    if (std::isnan(snr_db)) {
        throw ArgumentError("SNR must not be NaN");
    }
    if (snr_db == kNoiselessSnr) {
        return w;
    }
    const double power = w.mean_power();
    if (power == 0.0) {
        throw ArgumentError("cannot set a finite SNR on a zero-power waveform");
    }
    const double noise_var = power / std::pow(10.0, snr_db / 10.0);
    std::normal_distribution<double> normal(0.0, std::sqrt(noise_var / 2.0));
    Waveform out = w;
    for (auto& s : out.samples) {
        const double re = normal(rng);
        const double im = normal(rng);
        s += Complex(re, im);
    }
    return out;
}

Waveform apply_phase_offset(const Waveform& w, double theta_rad)
{
    if (!std::isfinite(theta_rad)) {
        throw ArgumentError("phase offset must be finite");
    }
    const Complex rot = std::polar(1.0, theta_rad);
    Waveform out = w;
    for (auto& s : out.samples) {
        s *= rot;
    }
    return out;
}

Cir evolve_cir(std::span<const Cir> history, const ArModel& model, Rng& rng, std::span<const double> tap_scale)
{
    if (history.size() != model.order()) {
        throw ArgumentError("evolve_cir needs exactly p = " + std::to_string(model.order()) + " past CIRs, got " +
                            std::to_string(history.size()));
    }
    const std::size_t n = history.front().size();
    for (const auto& h : history) {
        if (h.size() != n) {
            throw ArgumentError("history CIRs differ in length");
        }
    }
    if (!tap_scale.empty() && tap_scale.size() != n) {
        throw ArgumentError("tap_scale length must match the tap count");
    }
    std::vector<Complex> taps(n);
    for (std::size_t l = 0; l < n; ++l) {
        Complex acc{};
        for (std::size_t i = 0; i < model.order(); ++i) {
            acc += model.phi()[i] * history[i][l];
        }
        const double scale = tap_scale.empty() ? 1.0 : tap_scale[l];
        const double var = model.process_noise_var() * scale;
        taps[l] = acc + (var > 0.0 ? complex_gaussian(rng, var) : Complex{});
    }
    return Cir(std::move(taps), history.front().pre_cursor());
}

PsduSource random_psdu_source()
{
    return [](std::int64_t, Rng& rng) {
        std::uniform_int_distribution<int> byte(0, 255);
        std::vector<std::uint8_t> psdu(modem::kPsduBytes);
        for (auto& b : psdu) {
            b = static_cast<std::uint8_t>(byte(rng));
        }
        return psdu;
    };
}

TraceRecord synthesize_packet(std::int64_t seq_no, std::int64_t timestamp_ms, const PacketChannel& channel,
                              std::span<const std::uint8_t> psdu, const ChannelConfig& cfg, Rng& rng)
{
    const auto frame = modem::build_frame(psdu);
    TraceRecord rec;
    rec.seq_no = seq_no;
    rec.timestamp_ms = timestamp_ms;
    rec.tx_chips = frame.psdu_chips;
    rec.tx_waveform = modem::modulate(frame.all_chips(), cfg.samples_per_chip);
    const auto faded = apply_channel(rec.tx_waveform, channel.cir);
    rec.rx_waveform = add_awgn(apply_phase_offset(faded, channel.phase_offset_rad), cfg.snr_db, rng);
    rec.true_cir = channel.cir;
    rec.phase_offset_rad = channel.phase_offset_rad;
    rec.snr_db = cfg.snr_db;
    return rec;
}

TraceSet generate_trace(const ChannelConfig& cfg, const ArModel& model, std::size_t n_packets, const PsduSource& psdu_source,
                        std::int64_t set_id)
{
    if (cfg.n_taps == 0 || cfg.pre_cursor >= cfg.n_taps) {
        throw ArgumentError("invalid tap configuration");
    }
    if (std::isnan(cfg.snr_db)) {
        throw ArgumentError("SNR must not be NaN");
    }
    const auto profile = cfg.tap_profile.empty() ? default_tap_profile(cfg.n_taps, cfg.pre_cursor) : cfg.tap_profile;
    if (profile.size() != cfg.n_taps) {
        throw ArgumentError("tap profile length must match n_taps");
    }

    Rng rng(cfg.rng_seed);
    TraceSet set;
    set.set_id = set_id;
    set.metadata.n_taps = static_cast<std::uint32_t>(cfg.n_taps);
    set.metadata.samples_per_chip = static_cast<std::uint32_t>(cfg.samples_per_chip);
    set.metadata.seed = cfg.rng_seed;

    std::deque<Cir> history;
    if (cfg.initial_cir) {
        if (cfg.initial_cir->size() != cfg.n_taps) {
            throw ArgumentError("initial CIR length must match n_taps");
        }
        history.assign(model.order(), *cfg.initial_cir);
    } else {
        history.assign(model.order(), Cir::zeros(cfg.n_taps, cfg.pre_cursor));
        const double rho = model.spectral_radius();
        const auto burn_in = static_cast<std::size_t>(std::clamp(20.0 / std::max(1.0 - rho, 1e-3), 100.0, 20000.0));
        for (std::size_t i = 0; i < burn_in; ++i) {
            std::vector<Cir> h(history.begin(), history.end());
            history.push_front(evolve_cir(h, model, rng, profile));
            history.pop_back();
        }
    }

    std::normal_distribution<double> drift(0.0, cfg.phase_drift_std_rad > 0.0 ? cfg.phase_drift_std_rad : 1.0);
    double phase = 0.0;
    set.records.reserve(n_packets);
    for (std::size_t k = 0; k < n_packets; ++k) {
        if (k > 0) {
            std::vector<Cir> h(history.begin(), history.end());
            history.push_front(evolve_cir(h, model, rng, profile));
            history.pop_back();
            if (cfg.phase_drift_std_rad > 0.0) {
                phase += drift(rng);
            }
        }
        const auto seq = static_cast<std::int64_t>(k);
        const auto psdu = psdu_source(seq, rng);
        set.records.push_back(
            synthesize_packet(seq, seq * cfg.block_interval_ms, PacketChannel{history.front(), phase}, psdu, cfg, rng));
    }
    return set;
}

} // namespace vvdlab
