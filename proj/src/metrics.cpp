#include "vvdlab/metrics.hpp"

#include <algorithm>
#include <bit>
#include <limits>

#include "vvdlab/modem.hpp"

namespace vvdlab {

namespace {

void require_same_count(std::size_t a, std::size_t b)
{
    if (a != b) {
        throw ArgumentError("metric inputs differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
    if (a == 0) {
        throw ArgumentError("metric needs at least one packet");
    }
}

double pairwise_sum_impl(const double* v, std::size_t n)
{
    if (n <= 8) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += v[i];
        }
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_impl(v, half) + pairwise_sum_impl(v + half, n - half);
}

} // namespace

double pairwise_sum(std::span<const double> values)
{
    return pairwise_sum_impl(values.data(), values.size());
}

double packet_error_rate(std::span<const std::optional<std::vector<std::uint8_t>>> decoded,
                         std::span<const std::vector<std::uint8_t>> truth)
{
    require_same_count(decoded.size(), truth.size());
    std::size_t errors = 0;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        errors += (!decoded[i] || *decoded[i] != truth[i]) ? 1 : 0;
    }
    return static_cast<double>(errors) / static_cast<double>(decoded.size());
}

double chip_error_rate(std::span<const std::optional<ChipVector>> decided, std::span<const ChipVector> truth)
{
    require_same_count(decided.size(), truth.size());
    std::size_t errors = 0;
    for (std::size_t i = 0; i < decided.size(); ++i) {
        if (truth[i].size() != modem::kPsduChips) {
            throw ArgumentError("each packet must carry 8128 chips");
        }
        if (!decided[i]) {
            errors += modem::kPsduChips;
            continue;
        }
        if (decided[i]->size() != modem::kPsduChips) {
            throw ArgumentError("each packet must carry 8128 chips");
        }
        for (std::size_t c = 0; c < modem::kPsduChips; ++c) {
            errors += ((*decided[i])[c] != 0) != (truth[i][c] != 0) ? 1 : 0;
        }
    }
    return static_cast<double>(errors) / (static_cast<double>(modem::kPsduChips) * static_cast<double>(decided.size()));
}

double bit_error_rate(std::span<const std::optional<std::vector<std::uint8_t>>> decoded,
                      std::span<const std::vector<std::uint8_t>> truth)
{
    require_same_count(decoded.size(), truth.size());
    std::size_t errors = 0;
    std::size_t bits = 0;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        bits += truth[i].size() * 8;
        if (!decoded[i]) {
            errors += truth[i].size() * 8;
            continue;
        }
        if (decoded[i]->size() != truth[i].size()) {
            throw ArgumentError("decoded and reference PSDUs differ in length");
        }
        for (std::size_t b = 0; b < truth[i].size(); ++b) {
            errors += static_cast<std::size_t>(std::popcount(static_cast<unsigned>((*decoded[i])[b] ^ truth[i][b])));
        }
    }
    return static_cast<double>(errors) / static_cast<double>(bits);
}

double mse(std::span<const Cir> estimates, std::span<const Cir> truths)
{
    require_same_count(estimates.size(), truths.size());
    const std::size_t n = truths.front().size();
    std::vector<double> per_packet;
    per_packet.reserve(estimates.size());
    std::vector<double> taps(n);
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        if (estimates[k].size() != n || truths[k].size() != n) {
            throw ArgumentError("all CIRs must share one tap count");
        }
        for (std::size_t l = 0; l < n; ++l) {
            taps[l] = std::norm(truths[k][l] - estimates[k][l]);
        }
        per_packet.push_back(pairwise_sum(taps));
    }
    return pairwise_sum(per_packet) / (static_cast<double>(estimates.size()) * static_cast<double>(n));
}

MetricsReport summarize(std::string technique, std::int64_t set_id, std::span<const PacketResult> packets,
                        std::span<const std::vector<std::uint8_t>> truth_psdus, std::optional<double> mse_value)
{
    require_same_count(packets.size(), truth_psdus.size());
    MetricsReport r;
    r.technique = std::move(technique);
    r.set_id = set_id;
    r.n_packets = packets.size();
    std::vector<std::optional<std::vector<std::uint8_t>>> decoded;
    decoded.reserve(packets.size());
    for (const auto& p : packets) {
        r.packet_errors += p.packet_ok ? 0 : 1;
        r.chip_errors += p.chip_errors;
        decoded.push_back(p.available ? std::optional(p.psdu) : std::nullopt);
    }
    r.per = static_cast<double>(r.packet_errors) / static_cast<double>(r.n_packets);
    r.cer = static_cast<double>(r.chip_errors) / (static_cast<double>(modem::kPsduChips) * static_cast<double>(r.n_packets));
    r.ber = bit_error_rate(decoded, truth_psdus);
    r.mse = mse_value.value_or(std::numeric_limits<double>::quiet_NaN());
    return r;
}

std::vector<std::int64_t> default_aging_ages_ms()
{
    return {100, 200, 300, 500, 1000, 2000, 3000, 5000, 7000, 10000, 15000, 20000};
}

std::vector<AgingPoint> aging_sweep(std::span<const TraceRecord> trace, std::span<const std::optional<Cir>> estimates,
                                    std::span<const Cir> ground_truth, const AgingOptions& options)
{
    if (trace.size() != estimates.size() || trace.size() != ground_truth.size()) {
        throw ArgumentError("trace, estimates and ground truth must align");
    }
    if (options.ages_ms.empty()) {
        throw ArgumentError("aging sweep needs at least one age");
    }
    if (trace.size() < 2) {
        throw ArgumentError("aging sweep needs at least two packets");
    }
    const std::int64_t interval = trace[1].timestamp_ms - trace[0].timestamp_ms;
    if (interval <= 0) {
        throw ArgumentError("trace timestamps must increase");
    }
    std::int64_t max_lag = 0;
    for (auto age : options.ages_ms) {
        if (age < 0 || age % interval != 0) {
            throw ArgumentError("age " + std::to_string(age) + " ms is not a multiple of the block interval");
        }
        max_lag = std::max(max_lag, age / interval);
    }
    if (static_cast<std::size_t>(max_lag) >= trace.size()) {
        throw ArgumentError("trace too short for the maximum age");
    }
    const auto start = static_cast<std::size_t>(max_lag);
    std::vector<std::vector<std::uint8_t>> truth_psdus;
    if (options.score_per) {
        for (std::size_t k = start; k < trace.size(); ++k) {
            truth_psdus.push_back(reference_psdu(trace[k]));
        }
    }

    std::vector<AgingPoint> curve;
    for (auto age : options.ages_ms) {
        const auto lag = static_cast<std::size_t>(age / interval);
        AgingPoint pt;
        pt.age_ms = age;
        std::vector<double> sq;
        std::size_t scored = 0;
        std::size_t packet_errors = 0;
        std::size_t idx = 0;
        for (std::size_t k = start; k < trace.size(); ++k, ++idx) {
            const auto& est = estimates[k - lag];
            if (est) {
                for (std::size_t l = 0; l < ground_truth[k].size(); ++l) {
                    sq.push_back(std::norm(ground_truth[k][l] - (*est)[l]));
                }
                ++scored;
            }
            if (options.score_per) {
                const auto res = decode_with_estimate(trace[k], est, options.receiver);
                packet_errors += res.packet_ok && std::equal(res.psdu.begin(), res.psdu.end(), truth_psdus[idx].begin(),
                                                             truth_psdus[idx].end())
                                     ? 0
                                     : 1;
            }
        }
        pt.n_packets = trace.size() - start;
        pt.mse = scored > 0 ? pairwise_sum(sq) / static_cast<double>(sq.size()) : std::numeric_limits<double>::quiet_NaN();
        pt.per = options.score_per ? static_cast<double>(packet_errors) / static_cast<double>(pt.n_packets)
                                   : std::numeric_limits<double>::quiet_NaN();
        curve.push_back(pt);
    }
    return curve;
}

} // namespace vvdlab
