#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "vvdlab/channel.hpp"
#include "vvdlab/types.hpp"

namespace vvdlab::scene {

inline constexpr std::size_t kDepthRows = 50;
inline constexpr std::size_t kDepthCols = 90;
inline constexpr double kSpeedOfLight = 299'792'458.0;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

double distance(Point a, Point b);
/// Shortest distance from p to the segment [a, b].
double segment_distance(Point p, Point a, Point b);

struct SceneState {
    Point tx{0.0, 0.0};
    Point rx{12.0, 0.0};
    std::vector<Point> reflectors;
    Point blocker{6.0, 4.0};
    double blocker_radius = 0.4;

    friend bool operator==(const SceneState&, const SceneState&) = default;
};

/// Transmitter, receiver and scatterers of the default synthetic hall.
SceneState default_scene();

struct MultipathConfig {
    std::size_t n_taps = kDefaultTaps;
    std::size_t pre_cursor = kDefaultPreCursor;
    std::size_t samples_per_chip = kDefaultSamplesPerChip;
    double carrier_hz = 2.45e9;
    double chip_rate_hz = 2.0e6;
    /// Amplitude multiplier for a path whose segments pass within the blocker radius (synthetic).
    double blockage_factor = 0.2;

    double tap_spacing_s() const { return 1.0 / (chip_rate_hz * static_cast<double>(samples_per_chip)); }
};

struct PathComponent {
    double length_m = 0.0;
    double delay_s = 0.0;
    Complex gain;
    bool blocked = false;
    std::size_t tap = 0;
};

/// LoS first, then one single-bounce path per reflector.
std::vector<PathComponent> trace_paths(const SceneState& s, const MultipathConfig& cfg);

/// Bins every path onto the sampled FIR grid relative to the LoS delay (nearest tap).
Cir scene_to_cir(const SceneState& s, const MultipathConfig& cfg = {});

struct Viewport {
    double x_min = -4.0;
    double x_max = 16.0;
    double y_min = -6.0;
    double y_max = 6.0;
    Point camera{6.0, -8.0};
    double max_range = 20.0;
};

/// Row-major 50 x 90 grid of normalized inverse depth in [0, 1].
struct DepthTensor {
    std::vector<double> values = std::vector<double>(kDepthRows * kDepthCols, 0.0);

    double at(std::size_t row, std::size_t col) const { return values[row * kDepthCols + col]; }

    friend bool operator==(const DepthTensor&, const DepthTensor&) = default;
};

/// World coordinates of a pixel center.
Point pixel_center(std::size_t row, std::size_t col, const Viewport& vp = {});
bool on_blocker_disc(const SceneState& s, std::size_t row, std::size_t col, const Viewport& vp = {});
double background_depth(std::size_t row, std::size_t col);

/// Static background plus the blocker as a filled disc whose intensity grows with camera proximity.
DepthTensor render_depth(const SceneState& s, const Viewport& vp = {});

/// Bounded random walk of the single mobile blocker inside a rectangle.
struct BlockerWalk {
    Point start{6.0, 3.0};
    double x_min = 0.0;
    double x_max = 12.0;
    double y_min = -5.0;
    double y_max = 5.0;
    /// Per-block step standard deviation in meters.
    double step_std_m = 0.3;
};

/// Next position: Gaussian step, reflected back into the rectangle.
Point advance(const BlockerWalk& walk, Point p, Rng& rng);

struct DepthFrame {
    std::int64_t scene_id = 0;
    std::int64_t timestamp_ms = 0;
    std::int64_t block_seq_no = 0;
    bool block_aligned = false;
    DepthTensor tensor;

    friend bool operator==(const DepthFrame&, const DepthFrame&) = default;
};

struct SceneTraceConfig {
    SceneState scene = default_scene();
    BlockerWalk walk;
    MultipathConfig multipath;
    Viewport viewport;
    /// Std of the complex Gaussian added to each tap, relative to the LoS amplitude 1/d (synthetic).
    double perturbation_rel = 0.01;
};

struct SceneTrace {
    TraceSet trace;
    std::vector<DepthFrame> frames;
    std::vector<Point> blocker_positions; // one per block
};

/// Millisecond offsets of the three camera frames inside a 100 ms block (33.3 ms rounded).
std::array<std::int64_t, 3> frame_offsets_ms();

/// Per block: advance the blocker, derive the CIR from geometry, synthesize a packet; three depth frames per block,
/// the first block-aligned and referenced by the record's scene_id.
SceneTrace generate_scene_trace(const SceneTraceConfig& scfg, const ChannelConfig& cfg, std::size_t n_packets,
                                std::int64_t set_id = 0);

inline constexpr std::uint32_t kDepthFormatVersion = 1;

std::uint64_t write_depth(const std::vector<DepthFrame>& frames, std::ostream& out);
std::vector<DepthFrame> read_depth(std::istream& in);
std::uint64_t write_depth_file(const std::vector<DepthFrame>& frames, const std::filesystem::path& path);
std::vector<DepthFrame> read_depth_file(const std::filesystem::path& path);

} // namespace vvdlab::scene
