#include "vvdlab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "vvdlab/modem.hpp"
#include "vvdlab/receiver.hpp"

namespace vvdlab {

// ---------------------------------------------------------------------------
// Least squares

ConvolutionMatrix::ConvolutionMatrix(std::span<const Complex> x, std::size_t cols)
{
    if (x.empty() || cols == 0) {
        throw ArgumentError("convolution matrix needs a nonempty sequence and at least one column");
    }
    const auto m = static_cast<Eigen::Index>(x.size());
    const auto n = static_cast<Eigen::Index>(cols);
    m_ = Eigen::MatrixXcd::Zero(m + n - 1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) {
            m_(i + j, j) = x[static_cast<std::size_t>(i)];
        }
    }
}

ConvolutionMatrix ConvolutionMatrix::head(std::size_t rows) const
{
    if (rows == 0 || static_cast<Eigen::Index>(rows) > m_.rows()) {
        throw ArgumentError("head row count out of range");
    }
    ConvolutionMatrix out;
    out.m_ = m_.topRows(static_cast<Eigen::Index>(rows));
    return out;
}

Eigen::VectorXcd ConvolutionMatrix::apply(std::span<const Complex> v) const
{
    if (static_cast<Eigen::Index>(v.size()) != m_.cols()) {
        throw ArgumentError("vector length must equal the column count");
    }
    const Eigen::Map<const Eigen::VectorXcd> vec(v.data(), m_.cols());
    return m_ * vec;
}

ConvolutionMatrix build_convolution_matrix(std::span<const Complex> x, std::size_t n_taps)
{
    if (x.size() < n_taps) {
        throw ArgumentError("need at least as many known samples (" + std::to_string(x.size()) + ") as taps (" +
                            std::to_string(n_taps) + ")");
    }
    return ConvolutionMatrix(x, n_taps);
}

Eigen::VectorXcd least_squares(const Eigen::MatrixXcd& a, std::span<const Complex> b)
{
    if (static_cast<Eigen::Index>(b.size()) != a.rows()) {
        throw ArgumentError("right-hand side length " + std::to_string(b.size()) + " does not match " +
                            std::to_string(a.rows()) + " rows");
    }
    // Unpivoted blocked QR is markedly faster on tall pilot matrices; rank is judged from diag(R).
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
    const auto n = std::min(a.rows(), a.cols());
    const Eigen::VectorXd diag = qr.matrixQR().diagonal().head(n).cwiseAbs();
    const double tol = diag.maxCoeff() * static_cast<double>(std::max(a.rows(), a.cols())) * 1e-13;
    const auto rank = (diag.array() > tol).count();
    if (a.rows() < a.cols() || rank < a.cols() || !(diag.maxCoeff() > 0.0)) {
        throw SingularityError("least-squares system is rank deficient (rank " + std::to_string(rank) + " < " +
                               std::to_string(a.cols()) + ")");
    }
    const Eigen::Map<const Eigen::VectorXcd> rhs(b.data(), a.rows());
    return qr.solve(rhs);
}

Cir ls_estimate(const ConvolutionMatrix& x, std::span<const Complex> y, std::size_t pre_cursor)
{
    const Eigen::VectorXcd h = least_squares(x.matrix(), y);
    return Cir(std::vector<Complex>(h.data(), h.data() + h.size()), pre_cursor);
}

Cir ground_truth_estimate(const TraceRecord& rec)
{
    const auto n = rec.true_cir.size();
    const auto x = build_convolution_matrix(rec.tx_waveform.samples, n);
    return ls_estimate(x, rec.rx_waveform.samples, rec.true_cir.pre_cursor());
}

std::size_t known_preamble_samples(std::size_t samples_per_chip)
{
    return (modem::kShrChips / 2) * samples_per_chip;
}

Cir genie_estimate(const TraceRecord& rec)
{
    const auto n = rec.true_cir.size();
    const auto m = std::min(known_preamble_samples(rec.tx_waveform.samples_per_chip), rec.tx_waveform.size());
    const std::span<const Complex> known(rec.tx_waveform.samples.data(), m);
    const auto x = build_convolution_matrix(known, n).head(m);
    return ls_estimate(x, std::span<const Complex>(rec.rx_waveform.samples.data(), m), rec.true_cir.pre_cursor());
}

// ---------------------------------------------------------------------------
// Preamble detection

PreambleDetector always_detect()
{
    return [](const TraceRecord&) { return true; };
}

PreambleDetector never_detect()
{
    return [](const TraceRecord&) { return false; };
}

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

PreambleDetector bernoulli_detector(double failure_probability, std::uint64_t seed)
{
    if (!(failure_probability >= 0.0 && failure_probability <= 1.0)) {
        throw ArgumentError("failure probability must lie in [0, 1]");
    }
    return [failure_probability, seed](const TraceRecord& rec) {
        const auto h = mix(seed ^ mix(static_cast<std::uint64_t>(rec.seq_no)));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        return u >= failure_probability;
    };
}

PreambleDetector margin_detector(double min_mean_margin)
{
    return [min_mean_margin](const TraceRecord& rec) {
        const auto& shr = modem::shr_chips();
        const std::size_t max_delay = rec.rx_waveform.size() - rec.tx_waveform.size();
        const auto sync = synchronize(rec.rx_waveform, max_delay);
        const std::size_t spc = rec.rx_waveform.samples_per_chip;
        const std::size_t needed = modem::waveform_length(shr.size(), spc);
        if (sync.delay + needed > rec.rx_waveform.size()) {
            return false;
        }
        Waveform head;
        head.samples_per_chip = spc;
        const Complex derotate = std::polar(1.0, -sync.phase);
        head.samples.reserve(needed);
        for (std::size_t i = 0; i < needed; ++i) {
            head.samples.push_back(rec.rx_waveform.samples[sync.delay + i] * derotate);
        }
        const auto chips = modem::demodulate(head);
        double margin_sum = 0.0;
        const std::size_t n_symbols = shr.size() / modem::kChipsPerSymbol;
        for (std::size_t s = 0; s < n_symbols; ++s) {
            const std::span<const std::uint8_t> got(chips.data() + s * modem::kChipsPerSymbol, modem::kChipsPerSymbol);
            const std::span<const std::uint8_t> want(shr.data() + s * modem::kChipsPerSymbol, modem::kChipsPerSymbol);
            const auto d = modem::despread(got);
            if (d.symbol != modem::despread(want).symbol) {
                return false;
            }
            margin_sum += d.margin;
        }
        return margin_sum / static_cast<double>(n_symbols) >= min_mean_margin;
    };
}

EstimateRecord preamble_estimate(const TraceRecord& rec, const PreambleDetector& detector)
{
    EstimateRecord out;
    out.seq_no = rec.seq_no;
    out.technique = "preamble";
    if (detector(rec)) {
        out.cir = genie_estimate(rec);
    }
    return out;
}

std::optional<Cir> previous_estimate(std::span<const TimedCir> history, std::int64_t now_ms, std::int64_t age_ms)
{
    const std::int64_t target = now_ms - age_ms;
    const auto it = std::lower_bound(history.begin(), history.end(), target,
                                     [](const TimedCir& t, std::int64_t ts) { return t.timestamp_ms < ts; });
    if (it == history.end() || it->timestamp_ms != target) {
        return std::nullopt;
    }
    return it->cir;
}

// ---------------------------------------------------------------------------
// Yule-Walker

YuleWalkerSolution yule_walker(std::span<const double> r)
{
    if (r.size() < 2) {
        throw ArgumentError("Yule-Walker needs r[0..p] with p >= 1");
    }
    if (!(r[0] > 0.0)) {
        throw ArgumentError("r[0] must be positive");
    }
    const auto p = static_cast<Eigen::Index>(r.size() - 1);
    Eigen::MatrixXd big_r(p, p);
    Eigen::VectorXd rhs(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        rhs(i) = r[static_cast<std::size_t>(i + 1)] / r[0];
        for (Eigen::Index j = 0; j < p; ++j) {
            big_r(i, j) = r[static_cast<std::size_t>(std::abs(i - j))] / r[0];
        }
    }
    YuleWalkerSolution out;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(big_r);
    const double min_pivot = ldlt.vectorD().cwiseAbs().minCoeff();
    if (ldlt.info() != Eigen::Success || min_pivot < 1e-12) {
        big_r.diagonal().array() += 1e-9;
        ldlt.compute(big_r);
        out.regularized = true;
    }
    const Eigen::VectorXd phi = ldlt.solve(rhs);
    out.phi.assign(phi.data(), phi.data() + phi.size());
    return out;
}

ArFit fit_ar(std::span<const std::vector<Cir>> sequences, std::size_t order)
{
    if (order == 0) {
        throw ArgumentError("AR order must be at least 1");
    }
    std::size_t n_taps = 0;
    std::size_t total = 0;
    for (const auto& seq : sequences) {
        if (seq.empty()) {
            continue;
        }
        if (n_taps == 0) {
            n_taps = seq.front().size();
        }
        for (const auto& h : seq) {
            if (h.size() != n_taps) {
                throw ArgumentError("training CIRs differ in length");
            }
        }
        total += seq.size();
    }
    if (n_taps == 0 || total <= order) {
        throw ArgumentError("training sequence must be longer than the AR order");
    }

    // Biased autocorrelation per tap, pooled over sequences without crossing their boundaries.
    std::vector<double> phi_sum(order, 0.0);
    std::size_t fitted_taps = 0;
    bool regularized = false;
    for (std::size_t l = 0; l < n_taps; ++l) {
        std::vector<double> r(order + 1, 0.0);
        for (const auto& seq : sequences) {
            for (std::size_t lag = 0; lag <= order; ++lag) {
                for (std::size_t k = lag; k < seq.size(); ++k) {
                    r[lag] += (seq[k][l] * std::conj(seq[k - lag][l])).real();
                }
            }
        }
        for (auto& v : r) {
            v /= static_cast<double>(total);
        }
        if (!(r[0] > 0.0)) {
            continue;
        }
        const auto sol = yule_walker(r);
        regularized = regularized || sol.regularized;
        for (std::size_t i = 0; i < order; ++i) {
            phi_sum[i] += sol.phi[i];
        }
        ++fitted_taps;
    }
    if (fitted_taps == 0) {
        throw ArgumentError("every training tap is identically zero");
    }
    std::vector<Complex> phi(order);
    for (std::size_t i = 0; i < order; ++i) {
        phi[i] = phi_sum[i] / static_cast<double>(fitted_taps);
    }

    std::vector<double> tap_noise(n_taps, 0.0);
    std::size_t residual_count = 0;
    for (const auto& seq : sequences) {
        for (std::size_t k = order; k < seq.size(); ++k) {
            for (std::size_t l = 0; l < n_taps; ++l) {
                Complex pred{};
                for (std::size_t i = 0; i < order; ++i) {
                    pred += phi[i] * seq[k - 1 - i][l];
                }
                tap_noise[l] += std::norm(seq[k][l] - pred);
            }
            ++residual_count;
        }
    }
    double mean_noise = 0.0;
    if (residual_count > 0) {
        for (auto& v : tap_noise) {
            v /= static_cast<double>(residual_count);
            mean_noise += v;
        }
        mean_noise /= static_cast<double>(n_taps);
    }

    // Averaging stationary per-tap solutions can still land on the boundary; shrink until stationary.
    double rho = companion_spectral_radius(phi);
    while (rho >= 1.0 - 1e-9) {
        for (auto& c : phi) {
            c *= 0.999;
        }
        rho = companion_spectral_radius(phi);
        regularized = true;
    }
    return ArFit{ArModel(std::move(phi), mean_noise), std::move(tap_noise), regularized};
}

// ---------------------------------------------------------------------------
// Kalman tracking

KalmanState KalmanState::initial(const ArModel& model, std::size_t n_taps, std::size_t pre_cursor, double observation_noise,
                                 double initial_covariance)
{
    if (n_taps == 0 || pre_cursor >= n_taps) {
        throw ArgumentError("invalid tap configuration");
    }
    if (!(observation_noise > 0.0) || !(initial_covariance >= 0.0)) {
        throw ArgumentError("observation noise must be positive and initial covariance nonnegative");
    }
    const auto p = static_cast<Eigen::Index>(model.order());
    KalmanState s;
    s.pre_cursor = pre_cursor;
    s.companion = Eigen::MatrixXcd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        s.companion(0, i) = model.phi()[static_cast<std::size_t>(i)];
    }
    for (Eigen::Index i = 1; i < p; ++i) {
        s.companion(i, i - 1) = 1.0;
    }
    s.observation_noise = Eigen::MatrixXcd::Identity(p, p) * observation_noise;
    s.process_noise = Eigen::MatrixXcd::Zero(p, p);
    s.process_noise(0, 0) = model.process_noise_var();
    s.taps.resize(n_taps);
    for (auto& t : s.taps) {
        t.state = Eigen::VectorXcd::Zero(p);
        t.covariance = Eigen::MatrixXcd::Identity(p, p) * initial_covariance;
    }
    return s;
}

namespace {

double min_eigenvalue(const Eigen::MatrixXcd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

void check_psd(const Eigen::MatrixXcd& p)
{
    const double scale = std::max(1.0, p.diagonal().real().cwiseAbs().maxCoeff());
    const double min_eig = min_eigenvalue(p);
    if (min_eig < -1e-10 * scale || !std::isfinite(min_eig)) {
        throw std::runtime_error("Kalman covariance lost positive semidefiniteness (min eigenvalue " +
                                 std::to_string(min_eig) + ")");
    }
}

} // namespace

double KalmanState::min_covariance_eigenvalue() const
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : taps) {
        m = std::min(m, min_eigenvalue(t.covariance));
    }
    return m;
}

KalmanStep kalman_step(const KalmanState& state, const Cir& observation)
{
    if (observation.size() != state.taps.size()) {
        throw ArgumentError("observation tap count does not match the filter");
    }
    const auto p = state.companion.rows();
    const Eigen::MatrixXcd identity = Eigen::MatrixXcd::Identity(p, p);
    KalmanStep out{state, Cir::zeros(state.taps.size(), state.pre_cursor)};
    std::vector<Complex> predicted(state.taps.size());

    for (std::size_t l = 0; l < state.taps.size(); ++l) {
        TapFilter& tap = out.state.taps[l];
        tap.observed.insert(tap.observed.begin(), observation[l]);
        if (tap.observed.size() > static_cast<std::size_t>(p)) {
            tap.observed.pop_back();
        }
        // Stacked observation of the last p perfect estimates; repeat the oldest until p are seen.
        Eigen::VectorXcd z(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            const auto idx = std::min(static_cast<std::size_t>(i), tap.observed.size() - 1);
            z(i) = tap.observed[idx];
        }

        const Eigen::MatrixXcd s = tap.covariance + state.observation_noise;
        // K = P (P + U)^-1, with both factors Hermitian.
        const Eigen::MatrixXcd gain = s.ldlt().solve(tap.covariance).adjoint();
        const Eigen::VectorXcd current = tap.state + gain * (z - tap.state);
        const Eigen::MatrixXcd p_current = (identity - gain) * tap.covariance;

        tap.state = state.companion * current;
        Eigen::MatrixXcd p_next = state.companion * p_current * state.companion.adjoint() + state.process_noise;
        tap.covariance = (p_next + p_next.adjoint()) / 2.0;
        check_psd(tap.covariance);
        predicted[l] = tap.state(0);
    }
    out.state.steps = state.steps + 1;
    out.prediction = Cir(std::move(predicted), state.pre_cursor);
    return out;
}

// ---------------------------------------------------------------------------
// Phase correction and the combined policy

PhaseCorrection phase_correct(const Cir& h_new, const Cir& h_ref)
{
    if (h_new.size() != h_ref.size()) {
        throw ArgumentError("phase_correct needs equal tap counts");
    }
    Complex inner{};
    for (std::size_t i = 0; i < h_new.size(); ++i) {
        inner += h_new[i] * std::conj(h_ref[i]);
    }
    PhaseCorrection out;
    if (inner == Complex{}) {
        out.degenerate = true;
        out.rotated = h_new;
        return out;
    }
    out.theta = std::arg(inner);
    const Complex back = std::polar(1.0, -out.theta);
    std::vector<Complex> taps(h_new.taps());
    for (auto& t : taps) {
        t *= back;
    }
    out.rotated = Cir(std::move(taps), h_new.pre_cursor());
    return out;
}

EstimateRecord combined_estimate(const TraceRecord& rec, const PreambleDetector& detector, const Cir& blind)
{
    EstimateRecord out = preamble_estimate(rec, detector);
    out.technique = "combined";
    if (!out.cir) {
        out.cir = phase_correct(blind, genie_estimate(rec)).rotated;
    }
    return out;
}

} // namespace vvdlab
