#include "vvdlab/trace_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "binary_io.hpp"

namespace vvdlab {

namespace {

constexpr std::array<char, 8> kTraceMagic{'V', 'V', 'D', 'T', 'R', 'A', 'C', 'E'};
constexpr std::array<char, 8> kEstimateMagic{'V', 'V', 'D', 'E', 'S', 'T', 'I', 'M'};

// Guards allocation on corrupt length fields.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void read_magic(detail::LeReader& r, const std::array<char, 8>& magic)
{
    std::array<char, 8> got{};
    const auto at = r.offset();
    r.bytes(got.data(), got.size(), "magic");
    if (got != magic) {
        throw ParseError("bad magic, expected " + std::string(magic.data(), magic.size()), at);
    }
}

void write_samples(detail::LeWriter& w, const std::vector<Complex>& samples)
{
    w.u64(samples.size());
    for (const auto& s : samples) {
        w.complex(s);
    }
}

std::vector<Complex> read_samples(detail::LeReader& r, std::string_view what)
{
    const auto at = r.offset();
    const auto n = r.u64(what);
    if (n > kMaxElements) {
        throw ParseError("implausible " + std::string(what) + " length", at);
    }
    std::vector<Complex> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
        out.push_back(r.complex(what));
    }
    return out;
}

void write_taps(detail::LeWriter& w, const Cir& cir)
{
    for (const auto& t : cir.taps()) {
        w.complex(t);
    }
}

Cir read_cir(detail::LeReader& r, std::size_t n_taps, std::size_t pre_cursor, const std::string& field)
{
    std::vector<Complex> taps;
    taps.reserve(n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) {
        taps.push_back(r.complex(field));
    }
    if (n_taps == 0) {
        throw ValidationError(field, "zero taps");
    }
    if (pre_cursor >= n_taps) {
        throw ValidationError(field, "pre-cursor count out of range");
    }
    for (const auto& t : taps) {
        if (!is_finite(t)) {
            throw ValidationError(field, "non-finite tap");
        }
    }
    return Cir(std::move(taps), pre_cursor);
}

void write_record(detail::LeWriter& w, const TraceRecord& rec)
{
    w.i64(rec.seq_no);
    w.i64(rec.timestamp_ms);
    w.f64(rec.phase_offset_rad);
    w.f64(rec.snr_db);
    w.u8(rec.scene_id ? 1 : 0);
    w.i64(rec.scene_id.value_or(0));
    w.u32(static_cast<std::uint32_t>(rec.true_cir.pre_cursor()));
    write_taps(w, rec.true_cir);

    w.u64(rec.tx_chips.size());
    std::vector<std::uint8_t> packed((rec.tx_chips.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < rec.tx_chips.size(); ++i) {
        if (rec.tx_chips[i] != 0) {
            packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        }
    }
    if (!packed.empty()) {
        w.bytes(packed.data(), packed.size());
    }
    write_samples(w, rec.tx_waveform.samples);
    write_samples(w, rec.rx_waveform.samples);
}

TraceRecord read_record(detail::LeReader& r, const TraceMetadata& md)
{
    TraceRecord rec;
    rec.seq_no = r.i64("seq_no");
    rec.timestamp_ms = r.i64("timestamp_ms");
    rec.phase_offset_rad = r.f64("phase_offset_rad");
    rec.snr_db = r.f64("snr_db");
    const auto flag_at = r.offset();
    const auto has_scene = r.u8("scene flag");
    const auto scene_id = r.i64("scene_id");
    if (has_scene > 1) {
        throw ParseError("scene flag must be 0 or 1", flag_at);
    }
    if (has_scene == 0 && scene_id != 0) {
        throw ValidationError("scene_id", "set while the scene flag is clear");
    }
    if (has_scene == 1) {
        rec.scene_id = scene_id;
    }
    const auto pre_cursor = r.u32("pre_cursor");
    rec.true_cir = read_cir(r, md.n_taps, pre_cursor, "true_cir");

    const auto chips_at = r.offset();
    const auto n_chips = r.u64("chip count");
    if (n_chips > kMaxElements) {
        throw ParseError("implausible chip count", chips_at);
    }
    std::vector<std::uint8_t> packed(static_cast<std::size_t>((n_chips + 7) / 8));
    if (!packed.empty()) {
        r.bytes(packed.data(), packed.size(), "tx_chips");
    }
    rec.tx_chips.resize(static_cast<std::size_t>(n_chips));
    for (std::size_t i = 0; i < rec.tx_chips.size(); ++i) {
        rec.tx_chips[i] = (packed[i / 8] >> (i % 8)) & 1u;
    }
    if (n_chips % 8 != 0 && (packed.back() >> (n_chips % 8)) != 0) {
        throw ValidationError("tx_chips", "nonzero padding bits");
    }
    rec.tx_waveform = Waveform{read_samples(r, "tx_waveform"), md.samples_per_chip};
    rec.rx_waveform = Waveform{read_samples(r, "rx_waveform"), md.samples_per_chip};
    return rec;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return in;
}

} // namespace

std::uint64_t write_trace(const TraceSet& set, std::ostream& out)
{
    validate(set);
    detail::LeWriter w(out);
    w.bytes(kTraceMagic.data(), kTraceMagic.size());
    w.u32(kTraceFormatVersion);
    w.u32(set.metadata.n_taps);
    w.u32(set.metadata.samples_per_chip);
    w.u32(set.metadata.sample_rate_hz);
    w.i64(set.set_id);
    w.u64(set.metadata.seed);
    w.u64(set.records.size());
    for (const auto& rec : set.records) {
        write_record(w, rec);
    }
    out.flush();
    if (!out) {
        throw IoError("flush failed after " + std::to_string(w.count()) + " bytes");
    }
    return w.count();
}

TraceSet read_trace(std::istream& in)
{
    detail::LeReader r(in);
    read_magic(r, kTraceMagic);
    const auto version_at = r.offset();
    const auto version = r.u32("version");
    if (version != kTraceFormatVersion) {
        throw ParseError("unsupported trace version " + std::to_string(version), version_at);
    }
    TraceSet set;
    set.metadata.n_taps = r.u32("n_taps");
    set.metadata.samples_per_chip = r.u32("samples_per_chip");
    set.metadata.sample_rate_hz = r.u32("sample_rate_hz");
    set.set_id = r.i64("set_id");
    set.metadata.seed = r.u64("seed");
    const auto count_at = r.offset();
    const auto count = r.u64("record count");
    if (count > kMaxElements) {
        throw ParseError("implausible record count", count_at);
    }
    if (set.metadata.n_taps == 0) {
        throw ValidationError("n_taps", "must be positive");
    }
    if (set.metadata.samples_per_chip == 0) {
        throw ValidationError("samples_per_chip", "must be positive");
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        set.records.push_back(read_record(r, set.metadata));
    }
    if (!r.at_end()) {
        throw ParseError("trailing bytes after last record", r.offset());
    }
    validate(set);
    return set;
}

std::uint64_t write_estimates(const std::vector<EstimateRecord>& records, std::ostream& out)
{
    detail::LeWriter w(out);
    w.bytes(kEstimateMagic.data(), kEstimateMagic.size());
    w.u32(kEstimateFormatVersion);
    w.u32(0);
    w.u64(records.size());
    for (const auto& rec : records) {
        w.i64(rec.seq_no);
        w.u32(static_cast<std::uint32_t>(rec.technique.size()));
        if (!rec.technique.empty()) {
            w.bytes(rec.technique.data(), rec.technique.size());
        }
        w.u8(rec.available() ? 1 : 0);
        if (rec.cir) {
            w.u32(static_cast<std::uint32_t>(rec.cir->size()));
            w.u32(static_cast<std::uint32_t>(rec.cir->pre_cursor()));
            write_taps(w, *rec.cir);
        }
    }
    out.flush();
    if (!out) {
        throw IoError("flush failed after " + std::to_string(w.count()) + " bytes");
    }
    return w.count();
}

std::vector<EstimateRecord> read_estimates(std::istream& in)
{
    detail::LeReader r(in);
    read_magic(r, kEstimateMagic);
    const auto version_at = r.offset();
    const auto version = r.u32("version");
    if (version != kEstimateFormatVersion) {
        throw ParseError("unsupported estimate version " + std::to_string(version), version_at);
    }
    const auto reserved_at = r.offset();
    if (r.u32("reserved") != 0) {
        throw ParseError("reserved header field must be zero", reserved_at);
    }
    const auto count_at = r.offset();
    const auto count = r.u64("record count");
    if (count > kMaxElements) {
        throw ParseError("implausible record count", count_at);
    }
    std::vector<EstimateRecord> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        EstimateRecord rec;
        rec.seq_no = r.i64("seq_no");
        const auto len_at = r.offset();
        const auto len = r.u32("technique length");
        if (len > 4096) {
            throw ParseError("implausible technique tag length", len_at);
        }
        rec.technique.resize(len);
        if (len > 0) {
            r.bytes(rec.technique.data(), len, "technique");
        }
        const auto flag_at = r.offset();
        const auto available = r.u8("available flag");
        if (available > 1) {
            throw ParseError("available flag must be 0 or 1", flag_at);
        }
        if (available == 1) {
            const auto n_taps = r.u32("n_taps");
            if (n_taps > 65536) {
                throw ParseError("implausible tap count", r.offset() - 4);
            }
            const auto pre_cursor = r.u32("pre_cursor");
            rec.cir = read_cir(r, n_taps, pre_cursor, "cir");
        }
        out.push_back(std::move(rec));
    }
    if (!r.at_end()) {
        throw ParseError("trailing bytes after last record", r.offset());
    }
    return out;
}

std::uint64_t write_trace_file(const TraceSet& set, const std::filesystem::path& path)
{
    auto out = open_out(path);
    return write_trace(set, out);
}

TraceSet read_trace_file(const std::filesystem::path& path)
{
    auto in = open_in(path);
    return read_trace(in);
}

std::uint64_t write_estimates_file(const std::vector<EstimateRecord>& records, const std::filesystem::path& path)
{
    auto out = open_out(path);
    return write_estimates(records, out);
}

std::vector<EstimateRecord> read_estimates_file(const std::filesystem::path& path)
{
    auto in = open_in(path);
    return read_estimates(in);
}

} // namespace vvdlab
