#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vvdlab/channel.hpp"
#include "vvdlab/modem.hpp"

using namespace vvdlab;
using namespace vvdlab::modem;

namespace {

std::vector<std::uint8_t> random_psdu(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<std::uint8_t> p(kPsduBytes);
    for (auto& b : p) {
        b = static_cast<std::uint8_t>(byte(rng));
    }
    return p;
}

} // namespace

TEST_CASE("PN table: golden first sequences and distance structure")
{
    const auto& t = PnTable::ieee802154();
    // Symbol 0 and 1 from the 2450 MHz table, c0 first.
    const Sequence s0{1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1, 0};
    const Sequence s1{1, 1, 1, 0, 1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0};
    CHECK(t.sequence(0) == s0);
    CHECK(t.sequence(1) == s1);
    // Symbols 8-15 invert the odd chips of 0-7.
    for (std::size_t s = 0; s < 8; ++s) {
        for (std::size_t c = 0; c < kChipsPerSymbol; ++c) {
            const std::uint8_t expect = c % 2 ? 1 - t.sequence(s)[c] : t.sequence(s)[c];
            CHECK(t.sequence(s + 8)[c] == expect);
        }
    }
    std::size_t dmin = 32;
    for (std::size_t a = 0; a < kSymbolCount; ++a) {
        for (std::size_t b = a + 1; b < kSymbolCount; ++b) {
            dmin = std::min(dmin, hamming_distance(t.sequence(a), t.sequence(b)));
        }
    }
    CHECK(dmin > 0);
    CHECK(t.min_distance() == dmin);
    CHECK(dmin == 12);
}

TEST_CASE("spread: constant input, nibble order, length")
{
    const auto& t = PnTable::ieee802154();
    const std::vector<std::uint8_t> zeros(kPsduBytes, 0);
    const auto chips = spread(zeros);
    REQUIRE(chips.size() == kPsduChips);
    for (std::size_t s = 0; s < 254; ++s) {
        CHECK(std::equal(t.sequence(0).begin(), t.sequence(0).end(), chips.begin() + static_cast<long>(s * 32)));
    }

    const std::vector<std::uint8_t> one{0x10};
    const auto two = spread_bytes(one);
    REQUIRE(two.size() == 64);
    CHECK(std::equal(t.sequence(0).begin(), t.sequence(0).end(), two.begin()));
    CHECK(std::equal(t.sequence(1).begin(), t.sequence(1).end(), two.begin() + 32));

    CHECK_THROWS_AS(spread(std::vector<std::uint8_t>(126)), ArgumentError);
}

TEST_CASE("despread: exact sequences, ties, and argument checks")
{
    const auto& t = PnTable::ieee802154();
    const auto d7 = despread(t.sequence(7));
    CHECK(d7.symbol == 7);
    // best = 32; runner-up correlation 32 - 2 d where d is the nearest other sequence.
    std::size_t nearest = 32;
    for (std::size_t s = 0; s < kSymbolCount; ++s) {
        if (s != 7) {
            nearest = std::min(nearest, hamming_distance(t.sequence(7), t.sequence(s)));
        }
    }
    CHECK(d7.margin == static_cast<int>(2 * nearest));

    const std::vector<std::uint8_t> zeros(32, 0);
    const auto dz = despread(zeros);
    const auto again = despread(zeros);
    CHECK(dz.symbol == again.symbol);
    CHECK(dz.margin == again.margin);
    if (dz.margin == 0) {
        // lowest index among the tied maxima
        int best = -100;
        for (std::size_t s = 0; s < kSymbolCount; ++s) {
            best = std::max(best, 32 - 2 * static_cast<int>(hamming_distance(zeros, t.sequence(s))));
        }
        std::size_t first = 0;
        while (32 - 2 * static_cast<int>(hamming_distance(zeros, t.sequence(first))) != best) {
            ++first;
        }
        CHECK(dz.symbol == first);
    }
    CHECK_THROWS_AS(despread(std::vector<std::uint8_t>(31)), ArgumentError);
}

TEST_CASE("despread corrects every single and double chip error")
{
    const auto& t = PnTable::ieee802154();
    for (std::size_t s = 0; s < kSymbolCount; ++s) {
        for (std::size_t i = 0; i < 32; ++i) {
            for (std::size_t j = i; j < 32; ++j) {
                auto c = t.sequence(s);
                c[i] ^= 1;
                if (j != i) {
                    c[j] ^= 1;
                }
                REQUIRE(despread(c).symbol == s);
            }
        }
    }
}

TEST_CASE("modulate: definitional placement and amplitude bound")
{
    const std::vector<std::uint8_t> chips{1, 1};
    const auto w = modulate(chips, 4);
    REQUIRE(w.size() == 6);
    const auto p = half_sine_pulse(4);
    for (std::size_t n = 0; n < 6; ++n) {
        const double i = n < 4 ? p[n] : 0.0;
        const double q = n >= 2 ? p[n - 2] : 0.0;
        CHECK(w.samples[n].real() == doctest::Approx(i));
        CHECK(w.samples[n].imag() == doctest::Approx(q));
    }
    CHECK_THROWS_AS(modulate(std::vector<std::uint8_t>{1, 0, 1}, 4), ArgumentError);

    std::mt19937_64 rng(3);
    const auto frame = build_frame(random_psdu(rng));
    const auto wf = modulate(frame.all_chips(), 4);
    for (const auto& s : wf.samples) {
        CHECK(std::abs(s) <= std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("demodulate inverts modulate over random chip vectors")
{
    std::mt19937_64 rng(11);
    std::bernoulli_distribution bit(0.5);
    for (int trial = 0; trial < 1000; ++trial) {
        ChipVector c(2 * (1 + trial % 50));
        for (auto& x : c) {
            x = bit(rng) ? 1 : 0;
        }
        const std::size_t spc = 1 + static_cast<std::size_t>(trial % 3) * 2 + 1; // 2, 4, 6
        REQUIRE(demodulate(modulate(c, spc)) == c);
    }
}

TEST_CASE("demodulate: degenerate inputs")
{
    Waveform zero{std::vector<Complex>(16), 4};
    const auto chips = demodulate(zero);
    CHECK(chips.size() == 8);
    CHECK(std::all_of(chips.begin(), chips.end(), [](auto c) { return c == 0; }));
    CHECK_THROWS_AS(demodulate(Waveform{std::vector<Complex>(3), 4}), ArgumentError);
}

TEST_CASE("loopback at 20 dB keeps chip errors below 1e-3")
{
    std::mt19937_64 rng(21);
    std::bernoulli_distribution bit(0.5);
    ChipVector c(100'000);
    for (auto& x : c) {
        x = bit(rng) ? 1 : 0;
    }
    Rng noise(4);
    const auto rx = add_awgn(modulate(c, 4), 20.0, noise);
    const auto got = demodulate(rx);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        errors += got[i] != c[i];
    }
    CHECK(static_cast<double>(errors) / static_cast<double>(c.size()) < 1e-3);
}

TEST_CASE("frames: SHR layout and decode")
{
    const auto& shr = shr_chips();
    CHECK(shr.size() == kShrChips);
    const auto& t = PnTable::ieee802154();
    // 8 zero symbols, then SFD 0xA7 low nibble (7) first, then 0xA.
    CHECK(std::equal(t.sequence(0).begin(), t.sequence(0).end(), shr.begin() + 7 * 32));
    CHECK(std::equal(t.sequence(7).begin(), t.sequence(7).end(), shr.begin() + 8 * 32));
    CHECK(std::equal(t.sequence(0xA).begin(), t.sequence(0xA).end(), shr.begin() + 9 * 32));

    std::mt19937_64 rng(8);
    const auto psdu = random_psdu(rng);
    const auto f = build_frame(psdu);
    CHECK(f.all_chips().size() == kShrChips + kPsduChips);
    const auto d = decode_frame(f.psdu_chips);
    CHECK(d.psdu == psdu);
    CHECK(d.symbols.size() == 254);
    CHECK_THROWS_AS(decode_frame(ChipVector(100)), ArgumentError);
}

TEST_CASE("decode tolerates two flips per symbol and counts chip errors against 8128")
{
    std::mt19937_64 rng(13);
    const auto psdu = random_psdu(rng);
    const auto f = build_frame(psdu);
    auto noisy = f.psdu_chips;
    std::uniform_int_distribution<std::size_t> pos(0, 31);
    std::size_t flipped = 0;
    for (std::size_t s = 0; s < 254; ++s) {
        const auto a = pos(rng);
        auto b = pos(rng);
        while (b == a) {
            b = pos(rng);
        }
        noisy[s * 32 + a] ^= 1;
        noisy[s * 32 + b] ^= 1;
        flipped += 2;
    }
    const auto d = decode_frame(noisy, f.psdu_chips);
    CHECK(d.psdu == psdu);
    CHECK(d.chip_error_count == flipped);
    CHECK(d.chip_errors.size() == kPsduChips);
}

TEST_CASE("full-frame loopback over random payloads")
{
    std::mt19937_64 rng(17);
    for (int i = 0; i < 50; ++i) {
        const auto psdu = random_psdu(rng);
        const auto f = build_frame(psdu);
        const auto chips = demodulate(modulate(f.all_chips(), 4));
        const std::span<const std::uint8_t> body(chips.data() + kShrChips, kPsduChips);
        const auto d = decode_frame(body, f.psdu_chips);
        REQUIRE(d.psdu == psdu);
        REQUIRE(d.chip_error_count == 0);
    }
}
