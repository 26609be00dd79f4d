#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vvdlab/channel.hpp"
#include "vvdlab/types.hpp"

namespace vvdlab {

/// Zero-padded Toeplitz matrix of a sequence: entry (i, j) = x[i - j], size (M + cols - 1) x cols.
class ConvolutionMatrix {
public:
    ConvolutionMatrix(std::span<const Complex> x, std::size_t cols);

    /// Keeps the first `rows` rows (those fully determined by x when rows <= M).
    ConvolutionMatrix head(std::size_t rows) const;

    Eigen::Index rows() const noexcept { return m_.rows(); }
    Eigen::Index cols() const noexcept { return m_.cols(); }
    const Eigen::MatrixXcd& matrix() const noexcept { return m_; }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    /// X * v, i.e. the convolution of x with v.
    Eigen::VectorXcd apply(std::span<const Complex> v) const;

private:
    ConvolutionMatrix() = default;
    Eigen::MatrixXcd m_;
};

/// The (M + N - 1) x N pilot matrix; requires M >= N.
ConvolutionMatrix build_convolution_matrix(std::span<const Complex> x, std::size_t n_taps);

/// Minimizes ||b - A v|| through Householder QR. Throws SingularityError if A is rank deficient.
Eigen::VectorXcd least_squares(const Eigen::MatrixXcd& a, std::span<const Complex> b);

/// LS channel estimate; |y| must equal X.rows().
Cir ls_estimate(const ConvolutionMatrix& x, std::span<const Complex> y, std::size_t pre_cursor = kDefaultPreCursor);

/// LS over the entire packet with every transmitted sample known.
Cir ground_truth_estimate(const TraceRecord& rec);

/// Samples at the head of a frame that depend only on preamble and SFD chips.
std::size_t known_preamble_samples(std::size_t samples_per_chip);

/// LS over the preamble/SFD samples only.
Cir genie_estimate(const TraceRecord& rec);

inline constexpr double kDefaultDetectorMargin = 16.0;

using PreambleDetector = std::function<bool(const TraceRecord&)>;

PreambleDetector always_detect();
PreambleDetector never_detect();
/// Fails independently per packet with the given probability; decision is a pure function of (seed, seq_no).
PreambleDetector bernoulli_detector(double failure_probability, std::uint64_t seed);
/// Standard (unequalized) reception of preamble and SFD: detected iff every SHR symbol despreads
/// correctly and the mean correlation margin reaches the threshold.
PreambleDetector margin_detector(double min_mean_margin = kDefaultDetectorMargin);

EstimateRecord preamble_estimate(const TraceRecord& rec, const PreambleDetector& detector);

struct TimedCir {
    std::int64_t timestamp_ms = 0;
    Cir cir;
};

/// The estimate recorded exactly age_ms before now_ms, if the history holds one.
/// History must be sorted by timestamp.
std::optional<Cir> previous_estimate(std::span<const TimedCir> history, std::int64_t now_ms, std::int64_t age_ms);

/// Yule-Walker solve for autocorrelation coefficients r[0..p] (r[0] normalizes).
struct YuleWalkerSolution {
    std::vector<double> phi;
    bool regularized = false;
};

YuleWalkerSolution yule_walker(std::span<const double> r);

struct ArFit {
    ArModel model;
    /// Residual innovation power per tap.
    std::vector<double> tap_noise_var;
    /// Set when any per-tap Yule-Walker matrix needed diagonal loading.
    bool regularized = false;
};

/// Fits one shared real AR(p) across taps: per-tap Yule-Walker solutions averaged.
/// Each inner vector is one contiguous CIR sequence (e.g. one training set).
ArFit fit_ar(std::span<const std::vector<Cir>> sequences, std::size_t order);

/// Per-tap Kalman filter over the stacked state [h[k], ..., h[k-p+1]].
struct TapFilter {
    Eigen::VectorXcd state;        // predicted state for the next observation
    Eigen::MatrixXcd covariance;   // predicted error covariance
    std::vector<Complex> observed; // last p observations, newest first
};

struct KalmanState {
    Eigen::MatrixXcd companion;
    Eigen::MatrixXcd observation_noise; // U
    Eigen::MatrixXcd process_noise;     // Q
    std::vector<TapFilter> taps;
    std::size_t pre_cursor = kDefaultPreCursor;
    std::size_t steps = 0;

    static KalmanState initial(const ArModel& model, std::size_t n_taps, std::size_t pre_cursor = kDefaultPreCursor,
                               double observation_noise = 1e-8, double initial_covariance = 1.0);

    /// Smallest eigenvalue over every tap's covariance.
    double min_covariance_eigenvalue() const;
};

struct KalmanStep {
    KalmanState state;
    Cir prediction; // estimate for the next block
};

/// Update with the current observation, then predict one block ahead.
/// Throws std::runtime_error if a covariance loses positive semidefiniteness.
KalmanStep kalman_step(const KalmanState& state, const Cir& observation);

struct PhaseCorrection {
    double theta = 0.0;
    Cir rotated;
    /// Inner product was zero; theta forced to 0.
    bool degenerate = false;
};

/// Mean phase of h_new relative to h_ref, and h_new rotated back onto h_ref.
PhaseCorrection phase_correct(const Cir& h_new, const Cir& h_ref);

/// Preamble LS when detected; otherwise the blind estimate phase-aligned to the known preamble samples.
EstimateRecord combined_estimate(const TraceRecord& rec, const PreambleDetector& detector, const Cir& blind);

} // namespace vvdlab
