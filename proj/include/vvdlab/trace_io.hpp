#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "vvdlab/types.hpp"

namespace vvdlab {

inline constexpr std::uint32_t kTraceFormatVersion = 1;
inline constexpr std::uint32_t kEstimateFormatVersion = 1;

// Byte layouts are documented in docs/file_formats.md.

/// Serializes a validated TraceSet; returns the number of bytes written.
std::uint64_t write_trace(const TraceSet& set, std::ostream& out);
/// Parses and validates; never returns a partially read set.
TraceSet read_trace(std::istream& in);

std::uint64_t write_estimates(const std::vector<EstimateRecord>& records, std::ostream& out);
std::vector<EstimateRecord> read_estimates(std::istream& in);

std::uint64_t write_trace_file(const TraceSet& set, const std::filesystem::path& path);
TraceSet read_trace_file(const std::filesystem::path& path);
std::uint64_t write_estimates_file(const std::vector<EstimateRecord>& records, const std::filesystem::path& path);
std::vector<EstimateRecord> read_estimates_file(const std::filesystem::path& path);

} // namespace vvdlab
