#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vvdlab/channel.hpp"
#include "vvdlab/estimation.hpp"
#include "vvdlab/metrics.hpp"
#include "vvdlab/receiver.hpp"
#include "vvdlab/scene.hpp"

namespace vvdlab::harness {

/// One cross-validation split over 1-based set ids.
struct SetCombination {
    int number = 0;
    std::vector<int> train_ids;
    int validation_id = 0;
    int test_id = 0;
};

/// For n_sets = 15 the published assignment table; otherwise test i with validation (i mod n) + 1.
std::vector<SetCombination> make_combinations(int n_sets = 15);

enum class TraceSource { Generate, Scene, Files };

struct DetectorSpec {
    enum class Kind { Margin, Bernoulli, Always, Never } kind = Kind::Margin;
    double parameter = kDefaultDetectorMargin; // margin threshold or failure probability
};

DetectorSpec parse_detector(const std::string& text);
std::string to_string(const DetectorSpec& d);

struct RunConfig {
    std::vector<std::string> techniques{"standard", "ground_truth", "preamble", "genie", "aged_100ms", "aged_500ms",
                                        "kalman_ar1", "combined_kalman_ar1"};
    TraceSource source = TraceSource::Generate;
    std::filesystem::path trace_dir;
    std::filesystem::path vvd_dir;
    int n_sets = 15;
    std::size_t n_packets = 400;
    std::uint64_t seed = 1;
    ChannelConfig channel;
    std::vector<double> ar_phi{0.9};
    double process_noise_var = 0.01;
    scene::SceneTraceConfig scene;
    DetectorSpec detector;
    std::size_t kalman_skip = 200;
    ReceiverConfig receiver;
    /// When false only MSE is computed; PER, CER and BER are reported as NaN.
    bool score_decoding = true;
    /// Worker threads; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

/// Throws std::invalid_argument naming the offending setting.
void validate(const RunConfig& cfg);

/// Per-set seed derived from the run seed.
std::uint64_t set_seed(std::uint64_t run_seed, int set_id);

std::string trace_filename(int set_id);
std::string depth_filename(int set_id);
std::string estimate_filename(int set_id, const std::string& name);

struct SetData {
    TraceSet trace;
    std::vector<Cir> ground_truth;
    std::vector<std::vector<std::uint8_t>> truth_psdus;
};

/// Synthesizes (or reads) the trace of set `set_id`; scene sources also fill `frames` when given.
TraceSet make_trace(const RunConfig& cfg, int set_id, std::vector<scene::DepthFrame>* frames = nullptr);

/// Generates (or reads) set `set_id` and computes its ground-truth estimates.
SetData load_set(const RunConfig& cfg, int set_id);

struct TechniqueResult {
    std::vector<std::optional<Cir>> estimates;
    std::size_t first_scored = 0;
    bool has_mse = true;
};

/// Per-packet estimates of one technique on a test set. `training` holds the ground-truth
/// sequences of the training sets (used by Kalman techniques).
TechniqueResult estimate_technique(const std::string& technique, const SetData& test, std::span<const std::vector<Cir>> training,
                                   const RunConfig& cfg);

MetricsReport score_technique(const std::string& technique, const SetData& test, const TechniqueResult& result,
                              const RunConfig& cfg);

struct ComparisonRow {
    int combination = 0;
    MetricsReport report;
};

struct ComparisonResult {
    std::vector<ComparisonRow> rows;

    /// Mean of a metric ("per", "cer", "ber", "mse") across combinations for one technique.
    double mean(const std::string& technique, const std::string& metric) const;
};

ComparisonResult run_comparison(const RunConfig& cfg);

/// Long format: combination,technique,metric,value.
std::string comparison_csv(const ComparisonResult& result);
std::string comparison_json(const ComparisonResult& result, const RunConfig& cfg);

struct AgingRow {
    int set_id = 0; // 0 marks the across-set mean
    std::string technique;
    AgingPoint point;
};

struct AgingConfig {
    RunConfig run;
    std::vector<std::string> techniques{"ground_truth", "genie"};
    AgingOptions options{default_aging_ages_ms(), true, {}};
    /// Sets included in the sweep (1-based ids).
    std::vector<int> set_ids{1};
};

std::vector<AgingRow> run_aging(const AgingConfig& cfg);
/// Columns: set,technique,age_ms,mse,per,n_packets.
std::string aging_csv(const std::vector<AgingRow>& rows);

/// Number formatting used by every artifact: shortest round-trip representation.
std::string format_number(double v);

} // namespace vvdlab::harness
