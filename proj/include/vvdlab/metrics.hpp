#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vvdlab/receiver.hpp"
#include "vvdlab/types.hpp"

namespace vvdlab {

struct MetricsReport {
    std::string technique;
    std::int64_t set_id = 0;
    double per = 0.0;
    double cer = 0.0;
    double ber = 0.0; // auxiliary, over 1016 PSDU bits per packet
    double mse = 0.0;
    std::size_t n_packets = 0;
    std::size_t packet_errors = 0;
    std::size_t chip_errors = 0;
};

/// Unavailable (nullopt) decodes count as erroneous packets.
double packet_error_rate(std::span<const std::optional<std::vector<std::uint8_t>>> decoded,
                         std::span<const std::vector<std::uint8_t>> truth);

/// Unavailable streams count every chip as erroneous. Each stream must hold 8128 chips.
double chip_error_rate(std::span<const std::optional<ChipVector>> decided, std::span<const ChipVector> truth);

double bit_error_rate(std::span<const std::optional<std::vector<std::uint8_t>>> decoded,
                      std::span<const std::vector<std::uint8_t>> truth);

/// Mean of |h - h_hat|^2 over packets and taps, summed pairwise for a deterministic result.
double mse(std::span<const Cir> estimates, std::span<const Cir> truths);

/// Summation helper shared by the metric reductions.
double pairwise_sum(std::span<const double> values);

/// Aggregates per-packet receiver outcomes into a report; a missing mse_value is reported as NaN.
MetricsReport summarize(std::string technique, std::int64_t set_id, std::span<const PacketResult> packets,
                        std::span<const std::vector<std::uint8_t>> truth_psdus, std::optional<double> mse_value);

struct AgingPoint {
    std::int64_t age_ms = 0;
    double mse = 0.0;
    double per = 0.0;
    std::size_t n_packets = 0;
};

struct AgingOptions {
    std::vector<std::int64_t> ages_ms;
    bool score_per = true;
    ReceiverConfig receiver;
};

/// Standard sweep from 0.1 s to 20 s.
std::vector<std::int64_t> default_aging_ages_ms();

/// For every age, scores packet k with the estimate produced age_ms earlier. All ages are
/// scored over the same packets (those at least max(age) into the trace). PER is NaN when not scored.
std::vector<AgingPoint> aging_sweep(std::span<const TraceRecord> trace, std::span<const std::optional<Cir>> estimates,
                                    std::span<const Cir> ground_truth, const AgingOptions& options);

} // namespace vvdlab
