#include "vvdlab/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "binary_io.hpp"
#include "vvdlab/modem.hpp"

namespace vvdlab::scene {

double distance(Point a, Point b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double segment_distance(Point p, Point a, Point b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) {
        return distance(p, a);
    }
    const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    return distance(p, Point{a.x + t * dx, a.y + t * dy});
}

SceneState default_scene()
{
    SceneState s;
    s.reflectors = {{6.0, 15.0}, {6.0, -25.0}, {30.0, 20.0}, {-20.0, 30.0}, {45.0, -30.0}};
    return s;
}

namespace {

void check_point(Point p, const char* what)
{
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ArgumentError(std::string(what) + " position must be finite");
    }
}

void check_scene(const SceneState& s)
{
    check_point(s.tx, "tx");
    check_point(s.rx, "rx");
    check_point(s.blocker, "blocker");
    for (const auto& r : s.reflectors) {
        check_point(r, "reflector");
    }
    if (!(s.blocker_radius > 0.0) || !std::isfinite(s.blocker_radius)) {
        throw ArgumentError("blocker radius must be positive");
    }
}

} // namespace

std::vector<PathComponent> trace_paths(const SceneState& s, const MultipathConfig& cfg)
{
    check_scene(s);
    if (distance(s.tx, s.rx) == 0.0) {
        throw ArgumentError("tx and rx coincide");
    }
    if (cfg.n_taps == 0 || cfg.pre_cursor >= cfg.n_taps) {
        throw ArgumentError("invalid tap configuration");
    }
    const double spacing = cfg.tap_spacing_s();
    const double los_delay = distance(s.tx, s.rx) / kSpeedOfLight;

    auto make = [&](double length, bool blocked) {
        PathComponent c;
        c.length_m = length;
        c.delay_s = length / kSpeedOfLight;
        c.blocked = blocked;
        const double amp = (1.0 / length) * (blocked ? cfg.blockage_factor : 1.0);
        c.gain = std::polar(amp, -2.0 * std::numbers::pi * cfg.carrier_hz * c.delay_s);
        const double offset = std::round((c.delay_s - los_delay) / spacing);
        c.tap = cfg.pre_cursor + static_cast<std::size_t>(std::max(0.0, offset));
        return c;
    };
    auto blocked = [&](Point a, Point b) { return segment_distance(s.blocker, a, b) < s.blocker_radius; };

    std::vector<PathComponent> paths;
    paths.push_back(make(distance(s.tx, s.rx), blocked(s.tx, s.rx)));
    for (const auto& r : s.reflectors) {
        const double len = distance(s.tx, r) + distance(r, s.rx);
        if (len == 0.0) {
            continue;
        }
        paths.push_back(make(len, blocked(s.tx, r) || blocked(r, s.rx)));
    }
    return paths;
}

Cir scene_to_cir(const SceneState& s, const MultipathConfig& cfg)
{
    std::vector<Complex> taps(cfg.n_taps);
    for (const auto& p : trace_paths(s, cfg)) {
        if (p.tap < cfg.n_taps) {
            taps[p.tap] += p.gain;
        }
    }
    return Cir(std::move(taps), cfg.pre_cursor);
}

Point pixel_center(std::size_t row, std::size_t col, const Viewport& vp)
{
    const double x = vp.x_min + (static_cast<double>(col) + 0.5) * (vp.x_max - vp.x_min) / static_cast<double>(kDepthCols);
    // Row 0 is the far edge of the view.
    const double y = vp.y_max - (static_cast<double>(row) + 0.5) * (vp.y_max - vp.y_min) / static_cast<double>(kDepthRows);
    return {x, y};
}

bool on_blocker_disc(const SceneState& s, std::size_t row, std::size_t col, const Viewport& vp)
{
    return distance(pixel_center(row, col, vp), s.blocker) <= s.blocker_radius;
}

double background_depth(std::size_t row, std::size_t /*col*/)
{
    // Floor plane: nearer (brighter) toward the bottom rows, capped below the blocker intensity range.
    return 0.1 + 0.3 * static_cast<double>(row) / static_cast<double>(kDepthRows - 1);
}

DepthTensor render_depth(const SceneState& s, const Viewport& vp)
{
    check_scene(s);
    DepthTensor t;
    const double proximity = 1.0 - std::clamp(distance(s.blocker, vp.camera) / vp.max_range, 0.0, 1.0);
    const double disc = 0.6 + 0.4 * proximity;
    for (std::size_t r = 0; r < kDepthRows; ++r) {
        for (std::size_t c = 0; c < kDepthCols; ++c) {
            t.values[r * kDepthCols + c] = on_blocker_disc(s, r, c, vp) ? disc : background_depth(r, c);
        }
    }
    return t;
}

Point advance(const BlockerWalk& walk, Point p, Rng& rng)
{
    std::normal_distribution<double> step(0.0, walk.step_std_m);
    auto reflect = [](double v, double lo, double hi) {
        if (hi <= lo) {
            return lo;
        }
        const double span = hi - lo;
        double u = std::fmod(v - lo, 2.0 * span);
        if (u < 0.0) {
            u += 2.0 * span;
        }
        return lo + (u <= span ? u : 2.0 * span - u);
    };
    const double dx = step(rng);
    const double dy = step(rng);
    return {reflect(p.x + dx, walk.x_min, walk.x_max), reflect(p.y + dy, walk.y_min, walk.y_max)};
}

std::array<std::int64_t, 3> frame_offsets_ms()
{
    // 100/3 ms rounded to the nearest millisecond.
    return {0, 33, 67};
}

SceneTrace generate_scene_trace(const SceneTraceConfig& scfg, const ChannelConfig& cfg, std::size_t n_packets,
                                std::int64_t set_id)
{
    if (scfg.multipath.n_taps != cfg.n_taps || scfg.multipath.pre_cursor != cfg.pre_cursor ||
        scfg.multipath.samples_per_chip != cfg.samples_per_chip) {
        throw ArgumentError("multipath and channel configurations disagree on taps or oversampling");
    }
    Rng rng(cfg.rng_seed);
    SceneTrace out;
    out.trace.set_id = set_id;
    out.trace.metadata.n_taps = static_cast<std::uint32_t>(cfg.n_taps);
    out.trace.metadata.samples_per_chip = static_cast<std::uint32_t>(cfg.samples_per_chip);
    out.trace.metadata.seed = cfg.rng_seed;

    // One extra position so the last block's intermediate frames can interpolate.
    std::vector<Point> positions;
    positions.reserve(n_packets + 1);
    Point p = scfg.walk.start;
    for (std::size_t k = 0; k <= n_packets; ++k) {
        if (k > 0) {
            p = advance(scfg.walk, p, rng);
        }
        positions.push_back(p);
    }

    const double los_amp = 1.0 / distance(scfg.scene.tx, scfg.scene.rx);
    const double perturb_var = std::pow(scfg.perturbation_rel * los_amp, 2.0);
    std::normal_distribution<double> drift(0.0, cfg.phase_drift_std_rad > 0.0 ? cfg.phase_drift_std_rad : 1.0);
    const auto psdu_source = random_psdu_source();
    const auto offsets = frame_offsets_ms();
    double phase = 0.0;

    for (std::size_t k = 0; k < n_packets; ++k) {
        SceneState state = scfg.scene;
        state.blocker = positions[k];
        const Cir clean = scene_to_cir(state, scfg.multipath);
        std::vector<Complex> taps(clean.taps());
        if (perturb_var > 0.0) {
            for (auto& t : taps) {
                t += complex_gaussian(rng, perturb_var);
            }
        }
        if (k > 0 && cfg.phase_drift_std_rad > 0.0) {
            phase += drift(rng);
        }
        const auto seq = static_cast<std::int64_t>(k);
        const auto block_ts = seq * cfg.block_interval_ms;
        const auto psdu = psdu_source(seq, rng);
        auto rec = synthesize_packet(seq, block_ts, PacketChannel{Cir(std::move(taps), cfg.pre_cursor), phase}, psdu, cfg, rng);
        rec.scene_id = static_cast<std::int64_t>(out.frames.size());
        out.trace.records.push_back(std::move(rec));

        for (std::size_t f = 0; f < offsets.size(); ++f) {
            const double frac = static_cast<double>(f) / static_cast<double>(offsets.size());
            SceneState frame_state = scfg.scene;
            frame_state.blocker = {positions[k].x + frac * (positions[k + 1].x - positions[k].x),
                                   positions[k].y + frac * (positions[k + 1].y - positions[k].y)};
            DepthFrame frame;
            frame.scene_id = static_cast<std::int64_t>(out.frames.size());
            frame.timestamp_ms = block_ts + offsets[f];
            frame.block_seq_no = seq;
            frame.block_aligned = f == 0;
            frame.tensor = render_depth(frame_state, scfg.viewport);
            out.frames.push_back(std::move(frame));
        }
    }
    positions.pop_back();
    out.blocker_positions = std::move(positions);
    return out;
}

namespace {

constexpr std::array<char, 8> kDepthMagic{'V', 'V', 'D', 'D', 'E', 'P', 'T', 'H'};

} // namespace

std::uint64_t write_depth(const std::vector<DepthFrame>& frames, std::ostream& out)
{
    detail::LeWriter w(out);
    w.bytes(kDepthMagic.data(), kDepthMagic.size());
    w.u32(kDepthFormatVersion);
    w.u32(static_cast<std::uint32_t>(kDepthRows));
    w.u32(static_cast<std::uint32_t>(kDepthCols));
    w.u64(frames.size());
    for (const auto& f : frames) {
        if (f.tensor.values.size() != kDepthRows * kDepthCols) {
            throw ValidationError("tensor", "shape must be 50 x 90");
        }
        w.i64(f.scene_id);
        w.i64(f.timestamp_ms);
        w.i64(f.block_seq_no);
        w.u8(f.block_aligned ? 1 : 0);
        for (double v : f.tensor.values) {
            w.f64(v);
        }
    }
    out.flush();
    if (!out) {
        throw IoError("flush failed after " + std::to_string(w.count()) + " bytes");
    }
    return w.count();
}

std::vector<DepthFrame> read_depth(std::istream& in)
{
    detail::LeReader r(in);
    std::array<char, 8> magic{};
    r.bytes(magic.data(), magic.size(), "magic");
    if (magic != kDepthMagic) {
        throw ParseError("bad magic, expected VVDDEPTH", 0);
    }
    const auto version = r.u32("version");
    if (version != kDepthFormatVersion) {
        throw ParseError("unsupported depth version " + std::to_string(version), 8);
    }
    const auto rows = r.u32("rows");
    const auto cols = r.u32("cols");
    if (rows != kDepthRows || cols != kDepthCols) {
        throw ValidationError("tensor", "shape must be 50 x 90");
    }
    const auto count_at = r.offset();
    const auto count = r.u64("frame count");
    if (count > (std::uint64_t{1} << 32)) {
        throw ParseError("implausible frame count", count_at);
    }
    std::vector<DepthFrame> frames;
    for (std::uint64_t i = 0; i < count; ++i) {
        DepthFrame f;
        f.scene_id = r.i64("scene_id");
        f.timestamp_ms = r.i64("timestamp_ms");
        f.block_seq_no = r.i64("block_seq_no");
        const auto flag_at = r.offset();
        const auto aligned = r.u8("block_aligned");
        if (aligned > 1) {
            throw ParseError("block_aligned must be 0 or 1", flag_at);
        }
        f.block_aligned = aligned == 1;
        for (auto& v : f.tensor.values) {
            v = r.f64("tensor");
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("tensor", "value outside [0, 1]");
            }
        }
        frames.push_back(std::move(f));
    }
    if (!r.at_end()) {
        throw ParseError("trailing bytes after last frame", r.offset());
    }
    return frames;
}

std::uint64_t write_depth_file(const std::vector<DepthFrame>& frames, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return write_depth(frames, out);
}

std::vector<DepthFrame> read_depth_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return read_depth(in);
}

} // namespace vvdlab::scene
