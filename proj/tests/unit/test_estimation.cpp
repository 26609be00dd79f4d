#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "vvdlab/estimation.hpp"
#include "vvdlab/metrics.hpp"
#include "vvdlab/modem.hpp"

using namespace vvdlab;

namespace {

std::vector<Complex> as_vector(const Eigen::VectorXcd& v)
{
    return {v.data(), v.data() + v.size()};
}

TraceSet ar_trace(std::uint64_t seed, std::size_t n, double snr_db = 15.0)
{
    ChannelConfig cfg;
    cfg.rng_seed = seed;
    cfg.snr_db = snr_db;
    return generate_trace(cfg, ArModel::real({0.9}, 0.01), n);
}

} // namespace

TEST_CASE("convolution matrix: printed 5x3 layout and N = 1")
{
    const std::vector<Complex> x{{1, 0}, {2, 0}, {3, 0}};
    const auto m = build_convolution_matrix(x, 3);
    REQUIRE(m.rows() == 5);
    REQUIRE(m.cols() == 3);
    const double expect[5][3] = {{1, 0, 0}, {2, 1, 0}, {3, 2, 1}, {0, 3, 2}, {0, 0, 3}};
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(m(i, j) == Complex(expect[i][j], 0));
        }
    }
    const auto col = build_convolution_matrix(x, 1);
    REQUIRE(col.rows() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(col(i, 0) == x[static_cast<std::size_t>(i)]);
    }
    CHECK_THROWS_AS(build_convolution_matrix(x, 4), ArgumentError);
}

TEST_CASE("convolution matrix product equals direct convolution")
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto x = oracle::random_complex(20 + t, rng);
        const auto h = oracle::random_complex(1 + t % 11, rng);
        const auto got = as_vector(build_convolution_matrix(x, h.size()).apply(h));
        const auto want = oracle::convolve(x, h);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            REQUIRE(std::abs(got[i] - want[i]) < 1e-12);
        }
    }
}

TEST_CASE("ls_estimate: exact recovery, zero input, rank deficiency")
{
    std::mt19937_64 rng(2);
    const auto x = oracle::random_complex(64, rng);
    const auto h = oracle::random_complex(11, rng);
    const auto X = build_convolution_matrix(x, 11);
    const auto y = as_vector(X.apply(h));
    const auto est = ls_estimate(X, y);
    for (std::size_t i = 0; i < 11; ++i) {
        CHECK(std::abs(est[i] - h[i]) <= 1e-10);
    }
    const std::vector<Complex> zero(y.size());
    CHECK(ls_estimate(X, zero).energy() == 0.0);

    const std::vector<Complex> silent(64, Complex{});
    CHECK_THROWS_AS(ls_estimate(build_convolution_matrix(silent, 11), zero), SingularityError);
    CHECK_THROWS_AS(ls_estimate(X, std::vector<Complex>(3)), ArgumentError);
}

TEST_CASE("ls_estimate matches the normal-equations oracle and is first-order optimal")
{
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto x = oracle::random_complex(64, rng);
        const auto X = build_convolution_matrix(x, 11);
        const auto y = oracle::random_complex(static_cast<std::size_t>(X.rows()), rng);
        const auto est = ls_estimate(X, y);
        const Eigen::Map<const Eigen::VectorXcd> yv(y.data(), X.rows());
        const Eigen::VectorXcd want = oracle::normal_equations(X.matrix(), yv);
        for (std::size_t i = 0; i < 11; ++i) {
            REQUIRE(std::abs(est[i] - want(static_cast<Eigen::Index>(i))) <= 1e-9);
        }
        if (t < 5) {
            auto cost = [&](const std::vector<Complex>& h) { return (yv - X.matrix() * Eigen::Map<const Eigen::VectorXcd>(h.data(), 11)).squaredNorm(); };
            const double base = cost(est.taps());
            for (std::size_t i = 0; i < 11; ++i) {
                for (Complex eps : {Complex(1e-4, 0), Complex(-1e-4, 0), Complex(0, 1e-4), Complex(0, -1e-4)}) {
                    auto h = est.taps();
                    h[i] += eps;
                    CHECK(cost(h) >= base);
                }
            }
        }
    }
}

TEST_CASE("ground truth and genie recover the channel of a noiseless packet")
{
    ChannelConfig cfg;
    cfg.snr_db = kNoiselessSnr;
    cfg.phase_drift_std_rad = 0.0;
    cfg.rng_seed = 4;
    const auto t = generate_trace(cfg, ArModel::real({0.9}, 0.01), 2);
    for (const auto& r : t.records) {
        const auto gt = ground_truth_estimate(r);
        const auto genie = genie_estimate(r);
        const auto pre = preamble_estimate(r, always_detect());
        REQUIRE(pre.available());
        for (std::size_t i = 0; i < 11; ++i) {
            CHECK(std::abs(gt[i] - r.true_cir[i]) <= 1e-10);
            CHECK(std::abs(genie[i] - gt[i]) <= 1e-8);
            CHECK(std::abs((*pre.cir)[i] - gt[i]) <= 1e-8);
        }
    }
    CHECK(known_preamble_samples(4) == 640);
}

TEST_CASE("preamble estimate: forced failure and noisier than ground truth")
{
    const auto t = ar_trace(5, 500, 5.0);
    CHECK_FALSE(preamble_estimate(t.records[0], never_detect()).available());

    std::vector<Cir> pre;
    std::vector<Cir> truth;
    std::vector<Cir> gt;
    for (const auto& r : t.records) {
        pre.push_back(genie_estimate(r));
        gt.push_back(ground_truth_estimate(r));
        truth.push_back(r.true_cir);
    }
    // Phase drift rotates both estimates identically, so compare against the rotated truth.
    std::vector<Cir> rotated;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        std::vector<Complex> taps(truth[k].taps());
        for (auto& c : taps) {
            c *= std::polar(1.0, t.records[k].phase_offset_rad);
        }
        rotated.emplace_back(taps, 5);
    }
    CHECK(mse(pre, rotated) > mse(gt, rotated));
}

TEST_CASE("detectors")
{
    const auto t = ar_trace(6, 200);
    const auto b1 = bernoulli_detector(0.3, 99);
    const auto b2 = bernoulli_detector(0.3, 99);
    std::size_t fails = 0;
    for (const auto& r : t.records) {
        CHECK(b1(r) == b2(r));
        fails += !b1(r);
    }
    CHECK(fails > 30);
    CHECK(fails < 90);
    CHECK_THROWS_AS(bernoulli_detector(1.5, 1), ArgumentError);

    ChannelConfig clean;
    clean.snr_db = kNoiselessSnr;
    clean.rng_seed = 6;
    clean.initial_cir = Cir::impulse();
    const auto ideal = generate_trace(clean, ArModel::real({1.0}, 0.0), 3);
    for (const auto& r : ideal.records) {
        CHECK(margin_detector()(r));
        CHECK_FALSE(margin_detector(65.0)(r)); // bipolar margins never exceed 64
    }
}

TEST_CASE("margin detector fails more often as SNR drops")
{
    std::size_t previous = 0;
    for (double snr : {20.0, 0.0, -6.0}) {
        const auto t = ar_trace(7, 80, snr);
        const auto d = margin_detector();
        std::size_t fails = 0;
        for (const auto& r : t.records) {
            fails += !d(r);
        }
        CAPTURE(snr);
        CHECK(fails >= previous);
        previous = fails;
    }
    CHECK(previous > 60);
}

TEST_CASE("previous_estimate: exact age lookup")
{
    std::vector<TimedCir> hist;
    for (int k = 0; k < 10; ++k) {
        hist.push_back({100 * k, Cir::impulse(11, 5)});
    }
    CHECK_FALSE(previous_estimate(hist, 0, 100).has_value());
    CHECK(previous_estimate(hist, 500, 100).has_value());
    CHECK_FALSE(previous_estimate(hist, 450, 100).has_value());
    CHECK_FALSE(previous_estimate(hist, 300, 500).has_value());
}

TEST_CASE("Yule-Walker identities")
{
    const std::vector<double> r1{1.0, 0.73};
    CHECK(yule_walker(r1).phi[0] == 0.73);

    // AR(2) autocorrelation from the closed form: rho1 = phi1 / (1 - phi2), rho2 = phi1 rho1 + phi2.
    const double p1 = 0.5;
    const double p2 = 0.3;
    const double rho1 = p1 / (1.0 - p2);
    const std::vector<double> r2{2.0, 2.0 * rho1, 2.0 * (p1 * rho1 + p2)};
    const auto sol = yule_walker(r2);
    CHECK(sol.phi[0] == doctest::Approx(p1).epsilon(1e-12));
    CHECK(sol.phi[1] == doctest::Approx(p2).epsilon(1e-12));
    CHECK_FALSE(sol.regularized);

    const std::vector<double> singular{1.0, 1.0, 1.0};
    CHECK(yule_walker(singular).regularized);
}

TEST_CASE("fit_ar: AR(1) round trip and white sequence")
{
    Rng rng(8);
    const auto model = ArModel::real({0.9}, 0.01);
    std::vector<Cir> hist{Cir::zeros()};
    std::vector<Cir> seq;
    for (int k = 0; k < 10'100; ++k) {
        hist[0] = evolve_cir(hist, model, rng);
        if (k >= 100) {
            seq.push_back(hist[0]);
        }
    }
    const std::vector<std::vector<Cir>> data{seq};
    const auto fit = fit_ar(data, 1);
    CHECK(fit.model.phi()[0].real() >= 0.88);
    CHECK(fit.model.phi()[0].real() <= 0.92);
    for (double v : fit.tap_noise_var) {
        CHECK(v == doctest::Approx(0.01).epsilon(0.1));
    }

    std::vector<Cir> white;
    for (int k = 0; k < 10'000; ++k) {
        std::vector<Complex> taps(11);
        for (auto& c : taps) {
            c = complex_gaussian(rng, 1.0);
        }
        white.emplace_back(taps, 5);
    }
    const std::vector<std::vector<Cir>> wd{white};
    CHECK(std::abs(fit_ar(wd, 1).model.phi()[0]) < 0.05);

    const std::vector<std::vector<Cir>> tiny{{Cir::impulse()}};
    CHECK_THROWS_AS(fit_ar(tiny, 1), ArgumentError);
}

TEST_CASE("Kalman: frozen channel fixed point")
{
    std::mt19937_64 src(9);
    const Cir h(oracle::random_complex(11, src), 5);
    auto state = KalmanState::initial(ArModel::real({1.0}, 0.0), 11, 5, 1e-12);
    Cir prediction = Cir::zeros();
    for (int k = 0; k < 50; ++k) {
        auto step = kalman_step(state, h);
        state = std::move(step.state);
        prediction = step.prediction;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < 11; ++i) {
        err += std::norm(prediction[i] - h[i]);
    }
    CHECK(std::sqrt(err) < 1e-6);
}

TEST_CASE("Kalman: one-step MSE tracks the scalar Riccati oracle and P stays PSD")
{
    const double phi = 0.9;
    const double q = 0.01;
    const double r = 0.02;
    Rng rng(10);
    const auto model = ArModel::real({phi}, q);
    auto state = KalmanState::initial(model, 11, 5, r);
    std::vector<Cir> hist{Cir::zeros()};
    for (int k = 0; k < 200; ++k) {
        hist[0] = evolve_cir(hist, model, rng);
    }
    std::optional<Cir> prediction;
    double acc = 0.0;
    std::size_t n = 0;
    double min_eig = 1.0;
    for (int k = 0; k < 10'000; ++k) {
        hist[0] = evolve_cir(hist, model, rng);
        if (prediction && k >= 100) {
            for (std::size_t l = 0; l < 11; ++l) {
                acc += std::norm((*prediction)[l] - hist[0][l]);
                ++n;
            }
        }
        std::vector<Complex> obs(11);
        for (std::size_t l = 0; l < 11; ++l) {
            obs[l] = hist[0][l] + complex_gaussian(rng, r);
        }
        auto step = kalman_step(state, Cir(obs, 5));
        state = std::move(step.state);
        prediction = step.prediction;
        min_eig = std::min(min_eig, state.min_covariance_eigenvalue());
    }
    const double measured = acc / static_cast<double>(n);
    const double oracle_var = oracle::riccati_prediction_variance(phi, q, r);
    CHECK(std::abs(measured - oracle_var) <= 0.05 * oracle_var);
    CHECK(state.taps[0].covariance(0, 0).real() == doctest::Approx(oracle_var).epsilon(1e-6));
    CHECK(min_eig >= -1e-10);
}

TEST_CASE("Kalman AR(2) covariance stays Hermitian PSD over 10^4 steps")
{
    Rng rng(11);
    const auto model = ArModel::real({0.6, 0.25}, 0.01);
    auto state = KalmanState::initial(model, 11, 5);
    std::vector<Cir> hist{Cir::zeros(), Cir::zeros()};
    for (int k = 0; k < 10'000; ++k) {
        const auto next = evolve_cir(hist, model, rng);
        hist[1] = hist[0];
        hist[0] = next;
        state = kalman_step(state, next).state;
        REQUIRE(state.min_covariance_eigenvalue() >= -1e-10);
        REQUIRE((state.taps[3].covariance - state.taps[3].covariance.adjoint()).norm() == 0.0);
    }
}

TEST_CASE("phase correction: exact rotations and grid oracle")
{
    std::mt19937_64 rng(12);
    const auto ref = oracle::random_complex(11, rng);
    std::vector<Complex> rot(ref);
    for (auto& c : rot) {
        c *= std::polar(1.0, 0.7);
    }
    const auto pc = phase_correct(Cir(rot, 5), Cir(ref, 5));
    CHECK(std::abs(pc.theta - 0.7) <= 1e-10);
    for (std::size_t i = 0; i < 11; ++i) {
        CHECK(std::abs(pc.rotated[i] - ref[i]) <= 1e-10);
    }
    CHECK(phase_correct(Cir(ref, 5), Cir(ref, 5)).theta == 0.0);

    const auto zero = phase_correct(Cir::zeros(), Cir(ref, 5));
    CHECK(zero.degenerate);
    CHECK(zero.theta == 0.0);

    const int grid = 10'000;
    for (int t = 0; t < 20; ++t) {
        const auto a = oracle::random_complex(11, rng);
        const auto b = oracle::random_complex(11, rng);
        const double theta = phase_correct(Cir(a, 5), Cir(b, 5)).theta;
        const double best = oracle::grid_rotation(a, b, grid);
        CHECK(std::abs(oracle::wrap_angle(theta - best)) <= 2.0 * std::numbers::pi / grid);
    }
}

TEST_CASE("combined policy")
{
    const auto t = ar_trace(13, 20);
    const Cir blind = t.records[0].true_cir;
    for (const auto& r : t.records) {
        const auto hit = combined_estimate(r, always_detect(), blind);
        CHECK(*hit.cir == *preamble_estimate(r, always_detect()).cir);
        const auto miss = combined_estimate(r, never_detect(), blind);
        REQUIRE(miss.available());
        CHECK(*miss.cir == phase_correct(blind, genie_estimate(r)).rotated);
    }
}
