#include <doctest.h>

#include <cstring>
#include <sstream>

#include "vvdlab/scene.hpp"

using namespace vvdlab;
using namespace vvdlab::scene;

namespace {

SceneState los_only()
{
    SceneState s;
    s.blocker = {100.0, 100.0};
    return s;
}

std::size_t main_tap_count(const Cir& h)
{
    std::size_t nonzero = 0;
    for (const auto& t : h.taps()) {
        nonzero += std::abs(t) > 0.0;
    }
    return nonzero;
}

} // namespace

TEST_CASE("geometry helpers")
{
    CHECK(distance({0, 0}, {3, 4}) == 5.0);
    CHECK(segment_distance({5, 2}, {0, 0}, {10, 0}) == 2.0);
    CHECK(segment_distance({-3, 4}, {0, 0}, {10, 0}) == 5.0);
    CHECK(segment_distance({1, 1}, {0, 0}, {0, 0}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("LoS-only scene gives a single tap at the main index")
{
    const auto h = scene_to_cir(los_only());
    CHECK(main_tap_count(h) == 1);
    CHECK(std::abs(h[h.pre_cursor()]) == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("scene_to_cir is a pure function of the state")
{
    const auto s = default_scene();
    CHECK(scene_to_cir(s) == scene_to_cir(s));
    SceneState same = s;
    CHECK(scene_to_cir(same) == scene_to_cir(s));
}

TEST_CASE("blocking the LoS reduces the main tap")
{
    SceneState open = default_scene();
    open.blocker = {6.0, 4.0};
    SceneState blocked = open;
    blocked.blocker = {6.0, 0.1};
    const auto a = scene_to_cir(open);
    const auto b = scene_to_cir(blocked);
    CHECK(std::abs(b[b.pre_cursor()]) < std::abs(a[a.pre_cursor()]));
}

TEST_CASE("blockage factor sweep scales the blocked LoS amplitude")
{
    SceneState blocked = los_only();
    blocked.blocker = {6.0, 0.0};
    double previous = -1.0;
    for (double factor : {0.0, 0.1, 0.2, 0.5, 1.0}) {
        MultipathConfig cfg;
        cfg.blockage_factor = factor;
        const auto h = scene_to_cir(blocked, cfg);
        CHECK(std::abs(h[h.pre_cursor()]) == doctest::Approx(factor / 12.0));
        CHECK(std::abs(h[h.pre_cursor()]) > previous);
        previous = std::abs(h[h.pre_cursor()]);
    }
}

TEST_CASE("blockage monotonicity along an approach to the LoS segment")
{
    double previous = INFINITY;
    for (double y : {3.0, 1.0, 0.5, 0.3, 0.0}) {
        SceneState s = los_only();
        s.blocker = {6.0, y};
        const auto paths = trace_paths(s, {});
        const double mag = std::abs(paths.front().gain);
        CHECK(mag <= previous);
        previous = mag;
    }
}

TEST_CASE("degenerate geometry is rejected")
{
    SceneState s = default_scene();
    s.rx = s.tx;
    CHECK_THROWS_AS(scene_to_cir(s), ArgumentError);
}

TEST_CASE("render_depth: background, locality, range")
{
    SceneState outside = default_scene();
    outside.blocker = {100.0, 100.0};
    const auto bg = render_depth(outside);
    for (std::size_t r = 0; r < kDepthRows; ++r) {
        for (std::size_t c = 0; c < kDepthCols; ++c) {
            REQUIRE(bg.at(r, c) == background_depth(r, c));
        }
    }

    SceneState a = default_scene();
    a.blocker = {3.0, 1.0};
    SceneState b = a;
    b.blocker = {9.0, -2.0};
    const auto ta = render_depth(a);
    const auto tb = render_depth(b);
    for (std::size_t r = 0; r < kDepthRows; ++r) {
        for (std::size_t c = 0; c < kDepthCols; ++c) {
            const bool disc = on_blocker_disc(a, r, c) || on_blocker_disc(b, r, c);
            if (!disc) {
                REQUIRE(ta.at(r, c) == tb.at(r, c));
            }
        }
    }
    CHECK(ta != tb);
    CHECK(render_depth(a) == ta);

    Rng rng(3);
    std::uniform_real_distribution<double> ux(-10.0, 25.0);
    std::uniform_real_distribution<double> uy(-10.0, 10.0);
    std::size_t out_of_range = 0;
    for (int i = 0; i < 10'000; ++i) {
        SceneState s = default_scene();
        s.blocker = {ux(rng), uy(rng)};
        s.blocker_radius = 0.2 + std::abs(uy(rng)) / 10.0;
        for (double v : render_depth(s).values) {
            out_of_range += !(v >= 0.0 && v <= 1.0);
        }
    }
    CHECK(out_of_range == 0);
}

TEST_CASE("blocker walk stays in its rectangle")
{
    BlockerWalk walk;
    walk.step_std_m = 3.0;
    Rng rng(4);
    Point p = walk.start;
    for (int i = 0; i < 5000; ++i) {
        p = advance(walk, p, rng);
        REQUIRE(p.x >= walk.x_min);
        REQUIRE(p.x <= walk.x_max);
        REQUIRE(p.y >= walk.y_min);
        REQUIRE(p.y <= walk.y_max);
    }
}

TEST_CASE("scene traces: frames, ids, determinism, static blocker")
{
    SceneTraceConfig scfg;
    ChannelConfig cfg;
    cfg.rng_seed = 5;
    const auto a = generate_scene_trace(scfg, cfg, 6, 2);
    const auto b = generate_scene_trace(scfg, cfg, 6, 2);
    CHECK(a.trace == b.trace);
    CHECK(a.frames == b.frames);
    REQUIRE(a.frames.size() == 18);
    CHECK(frame_offsets_ms() == std::array<std::int64_t, 3>{0, 33, 67});
    for (std::size_t k = 0; k < a.trace.records.size(); ++k) {
        const auto& rec = a.trace.records[k];
        REQUIRE(rec.scene_id.has_value());
        const auto& frame = a.frames[static_cast<std::size_t>(*rec.scene_id)];
        CHECK(frame.block_aligned);
        CHECK(frame.block_seq_no == rec.seq_no);
        CHECK(frame.timestamp_ms == rec.timestamp_ms);
        CHECK_FALSE(a.frames[static_cast<std::size_t>(*rec.scene_id) + 1].block_aligned);
    }
    CHECK_NOTHROW(validate(a.trace));

    SceneTraceConfig still = scfg;
    still.walk.step_std_m = 0.0;
    still.perturbation_rel = 0.0;
    ChannelConfig quiet = cfg;
    quiet.phase_drift_std_rad = 0.0;
    const auto s = generate_scene_trace(still, quiet, 5);
    for (const auto& rec : s.trace.records) {
        CHECK(rec.true_cir == s.trace.records.front().true_cir);
    }
}

TEST_CASE("blocker crossing the LoS dips the main tap")
{
    SceneState base = default_scene();
    const MultipathConfig mp;
    std::vector<double> mags;
    for (double y = 3.0; y >= -3.0; y -= 0.25) {
        SceneState s = base;
        s.blocker = {6.0, y};
        const bool on_los = std::abs(y) < s.blocker_radius;
        const auto paths = trace_paths(s, mp);
        CHECK(paths.front().blocked == on_los);
        mags.push_back(std::abs(paths.front().gain));
    }
    CHECK(*std::min_element(mags.begin(), mags.end()) == doctest::Approx(0.2 / 12.0));
    CHECK(mags.front() == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("depth files round-trip and reject out-of-range values")
{
    SceneTraceConfig scfg;
    ChannelConfig cfg;
    const auto t = generate_scene_trace(scfg, cfg, 2);
    std::ostringstream os(std::ios::binary);
    const auto n = write_depth(t.frames, os);
    CHECK(n == os.str().size());
    CHECK(n == 8 + 4 + 4 + 4 + 8 + t.frames.size() * (8 + 8 + 8 + 1 + kDepthRows * kDepthCols * 8));
    std::istringstream is(os.str(), std::ios::binary);
    CHECK(read_depth(is) == t.frames);

    auto bytes = os.str();
    const double bad = 1.5;
    std::memcpy(bytes.data() + 28 + 25, &bad, sizeof bad);
    std::istringstream corrupt(bytes, std::ios::binary);
    CHECK_THROWS_AS(read_depth(corrupt), ValidationError);
    std::istringstream truncated(os.str().substr(0, 100), std::ios::binary);
    CHECK_THROWS_AS(read_depth(truncated), ParseError);
}
