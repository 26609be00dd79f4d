#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vvdlab/equalization.hpp"
#include "vvdlab/estimation.hpp"
#include "vvdlab/harness.hpp"
#include "vvdlab/modem.hpp"
#include "vvdlab/scene.hpp"
#include "vvdlab/trace_io.hpp"

namespace py = pybind11;
using namespace vvdlab;

namespace {

using ComplexArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <class T>
py::array_t<T> to_array(const std::vector<T>& v)
{
    return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

template <class T>
std::vector<T> to_vector(const py::array_t<T, py::array::c_style | py::array::forcecast>& a)
{
    if (a.ndim() != 1) {
        throw py::value_error("expected a 1-D array");
    }
    return {a.data(), a.data() + a.size()};
}

py::dict record_dict(const TraceRecord& r)
{
    py::dict d;
    d["seq_no"] = r.seq_no;
    d["timestamp_ms"] = r.timestamp_ms;
    d["tx_chips"] = to_array(r.tx_chips);
    d["tx_waveform"] = to_array(r.tx_waveform.samples);
    d["rx_waveform"] = to_array(r.rx_waveform.samples);
    d["true_cir"] = to_array(r.true_cir.taps());
    d["pre_cursor"] = r.true_cir.pre_cursor();
    d["phase_offset_rad"] = r.phase_offset_rad;
    d["snr_db"] = r.snr_db;
    d["scene_id"] = r.scene_id ? py::cast(*r.scene_id) : py::none();
    return d;
}

py::dict trace_dict(const TraceSet& t)
{
    py::dict d;
    d["set_id"] = t.set_id;
    d["sample_rate_hz"] = t.metadata.sample_rate_hz;
    d["n_taps"] = t.metadata.n_taps;
    d["samples_per_chip"] = t.metadata.samples_per_chip;
    d["seed"] = t.metadata.seed;
    py::list records;
    for (const auto& r : t.records) {
        records.append(record_dict(r));
    }
    d["records"] = records;
    return d;
}

harness::RunConfig run_config(const std::string& source, std::uint64_t seed, int n_sets, std::size_t n_packets,
                              double snr_db, std::vector<double> phi, std::optional<std::vector<std::string>> techniques,
                              const std::string& detector, std::size_t kalman_skip, std::size_t equalizer_taps,
                              bool score_decoding, const std::filesystem::path& trace_dir,
                              const std::filesystem::path& vvd_dir)
{
    harness::RunConfig cfg;
    if (source == "generate") {
        cfg.source = harness::TraceSource::Generate;
    } else if (source == "scene") {
        cfg.source = harness::TraceSource::Scene;
    } else if (source == "files") {
        cfg.source = harness::TraceSource::Files;
    } else {
        throw py::value_error("source must be 'generate', 'scene' or 'files'");
    }
    cfg.seed = seed;
    cfg.n_sets = n_sets;
    cfg.n_packets = n_packets;
    cfg.channel.snr_db = snr_db;
    cfg.ar_phi = std::move(phi);
    if (techniques) {
        cfg.techniques = *techniques;
    }
    cfg.detector = harness::parse_detector(detector);
    cfg.kalman_skip = kalman_skip;
    cfg.receiver.equalizer_taps = equalizer_taps;
    cfg.score_decoding = score_decoding;
    cfg.trace_dir = trace_dir;
    cfg.vvd_dir = vvd_dir;
    harness::validate(cfg);
    return cfg;
}

} // namespace

PYBIND11_MODULE(_vvdlab, m)
{
    m.doc() = "Channel-estimation lab core: modem, LS/ZF, trace files and the comparison harness.";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);

    m.attr("PSDU_BYTES") = modem::kPsduBytes;
    m.attr("PSDU_CHIPS") = modem::kPsduChips;
    m.attr("DEPTH_SHAPE") = py::make_tuple(scene::kDepthRows, scene::kDepthCols);

    // modem
    m.def(
        "spread", [](const ByteArray& psdu) { return to_array(modem::spread(to_vector(psdu))); }, py::arg("psdu"),
        "127 PSDU bytes -> 8128 chips (low nibble first).");
    m.def(
        "despread",
        [](const ByteArray& chips) {
            const auto d = modem::despread(to_vector(chips));
            return py::make_tuple(d.symbol, d.margin);
        },
        py::arg("chips"), "32 chips -> (symbol, correlation margin).");
    m.def(
        "modulate",
        [](const ByteArray& chips, std::size_t spc) { return to_array(modem::modulate(to_vector(chips), spc).samples); },
        py::arg("chips"), py::arg("samples_per_chip") = kDefaultSamplesPerChip);
    m.def(
        "demodulate",
        [](const ComplexArray& samples, std::size_t spc) {
            return to_array(modem::demodulate(Waveform{to_vector(samples), spc}));
        },
        py::arg("samples"), py::arg("samples_per_chip") = kDefaultSamplesPerChip);

    // estimation / equalization
    m.def(
        "ls_estimate",
        [](const ComplexArray& x, const ComplexArray& y, std::size_t n_taps, std::size_t pre_cursor) {
            const auto xs = to_vector(x);
            const auto ys = to_vector(y);
            py::gil_scoped_release release;
            return ls_estimate(ConvolutionMatrix(xs, n_taps), ys, pre_cursor).taps();
        },
        py::arg("x"), py::arg("y"), py::arg("n_taps") = kDefaultTaps, py::arg("pre_cursor") = kDefaultPreCursor,
        "LS channel estimate from pilot x and received y (len(y) == len(x) + n_taps - 1).");
    m.def(
        "design_zf",
        [](const ComplexArray& h, std::size_t length, std::optional<std::size_t> u_index) {
            const auto e = design_zf(Cir(to_vector(h), 0), length, u_index);
            return py::make_tuple(to_array(e.taps), e.u_index, e.residual);
        },
        py::arg("h"), py::arg("length") = kDefaultEqualizerTaps, py::arg("u_index") = py::none(),
        "Zero-forcing equalizer -> (taps, u_index, residual).");
    m.def(
        "phase_correct",
        [](const ComplexArray& h_new, const ComplexArray& h_ref) {
            const auto p = phase_correct(Cir(to_vector(h_new), 0), Cir(to_vector(h_ref), 0));
            return py::make_tuple(p.theta, to_array(p.rotated.taps()));
        },
        py::arg("h_new"), py::arg("h_ref"), "Removes the mean phase of h_new relative to h_ref -> (theta, rotated).");

    // file formats
    m.def(
        "read_trace", [](const std::filesystem::path& p) { return trace_dict(read_trace_file(p)); }, py::arg("path"));
    m.def(
        "read_estimates",
        [](const std::filesystem::path& p) {
            py::list out;
            for (const auto& e : read_estimates_file(p)) {
                py::dict d;
                d["seq_no"] = e.seq_no;
                d["technique"] = e.technique;
                d["cir"] = e.cir ? py::object(to_array(e.cir->taps())) : py::none();
                d["pre_cursor"] = e.cir ? py::cast(e.cir->pre_cursor()) : py::none();
                out.append(d);
            }
            return out;
        },
        py::arg("path"), "Records as dicts; 'cir' is None for unavailable estimates.");
    m.def(
        "write_estimates",
        [](const std::filesystem::path& p, const py::iterable& records) {
            std::vector<EstimateRecord> recs;
            for (const auto& item : records) {
                const auto d = item.cast<py::dict>();
                EstimateRecord r;
                r.seq_no = d["seq_no"].cast<std::int64_t>();
                r.technique = d["technique"].cast<std::string>();
                if (d.contains("cir") && !d["cir"].is_none()) {
                    const std::size_t pre = d.contains("pre_cursor") ? d["pre_cursor"].cast<std::size_t>() : kDefaultPreCursor;
                    r.cir = Cir(to_vector(d["cir"].cast<ComplexArray>()), pre);
                }
                recs.push_back(std::move(r));
            }
            return write_estimates_file(recs, p);
        },
        py::arg("path"), py::arg("records"), "Writes dicts with seq_no, technique, cir (None = unavailable); returns bytes written.");
    m.def(
        "read_depth",
        [](const std::filesystem::path& p) {
            py::list out;
            for (const auto& f : scene::read_depth_file(p)) {
                py::dict d;
                d["scene_id"] = f.scene_id;
                d["timestamp_ms"] = f.timestamp_ms;
                d["block_seq_no"] = f.block_seq_no;
                d["block_aligned"] = f.block_aligned;
                py::array_t<double> t({scene::kDepthRows, scene::kDepthCols});
                std::copy(f.tensor.values.begin(), f.tensor.values.end(), t.mutable_data());
                d["depth"] = t;
                out.append(d);
            }
            return out;
        },
        py::arg("path"), "Depth frames with a (50, 90) float64 tensor each.");

    // harness
    m.def(
        "set_combinations",
        [](int n) {
            py::list out;
            for (const auto& c : harness::make_combinations(n)) {
                py::dict d;
                d["number"] = c.number;
                d["train"] = c.train_ids;
                d["validation"] = c.validation_id;
                d["test"] = c.test_id;
                out.append(d);
            }
            return out;
        },
        py::arg("n_sets") = 15);
    m.def(
        "generate_trace",
        [](std::uint64_t seed, int set_id, std::size_t n_packets, double snr_db, std::vector<double> phi,
           const std::string& source) {
            auto cfg = run_config(source, seed, 3, n_packets, snr_db, std::move(phi), std::vector<std::string>{"ground_truth"},
                                  "margin", 0, kDefaultEqualizerTaps, true, {}, {});
            TraceSet t;
            {
                py::gil_scoped_release release;
                t = harness::make_trace(cfg, set_id);
            }
            return trace_dict(t);
        },
        py::arg("seed") = 1, py::arg("set_id") = 1, py::arg("n_packets") = 20, py::arg("snr_db") = 15.0,
        py::arg("phi") = std::vector<double>{0.9}, py::arg("source") = "generate",
        "The exact trace the CLI would generate for (seed, set_id).");

    const auto run_args = [](auto... extra) {
        return std::make_tuple(py::arg("source") = "generate", py::arg("seed") = 1, py::arg("n_sets") = 15,
                               py::arg("n_packets") = 400, py::arg("snr_db") = 15.0,
                               py::arg("phi") = std::vector<double>{0.9}, py::arg("techniques") = py::none(),
                               py::arg("detector") = "margin", py::arg("kalman_skip") = 200,
                               py::arg("equalizer_taps") = kDefaultEqualizerTaps, py::arg("score_decoding") = true,
                               py::arg("trace_dir") = std::filesystem::path{}, py::arg("vvd_dir") = std::filesystem::path{},
                               extra...);
    };
    std::apply(
        [&](auto... args) {
            m.def(
                "compare",
                [](const std::string& source, std::uint64_t seed, int n_sets, std::size_t n_packets, double snr_db,
                   std::vector<double> phi, std::optional<std::vector<std::string>> techniques, const std::string& detector,
                   std::size_t kalman_skip, std::size_t equalizer_taps, bool score_decoding,
                   const std::filesystem::path& trace_dir, const std::filesystem::path& vvd_dir) {
                    const auto cfg = run_config(source, seed, n_sets, n_packets, snr_db, std::move(phi), techniques,
                                                detector, kalman_skip, equalizer_taps, score_decoding, trace_dir, vvd_dir);
                    std::string csv, json;
                    {
                        py::gil_scoped_release release;
                        const auto res = harness::run_comparison(cfg);
                        csv = harness::comparison_csv(res);
                        json = harness::comparison_json(res, cfg);
                    }
                    return py::make_tuple(csv, json);
                },
                args..., "Cross-validated comparison -> (long-format CSV, JSON summary), identical to the CLI output.");
        },
        run_args());
    std::apply(
        [&](auto... args) {
            m.def(
                "aging",
                [](const std::string& source, std::uint64_t seed, int n_sets, std::size_t n_packets, double snr_db,
                   std::vector<double> phi, std::optional<std::vector<std::string>> techniques, const std::string& detector,
                   std::size_t kalman_skip, std::size_t equalizer_taps, bool score_decoding,
                   const std::filesystem::path& trace_dir, const std::filesystem::path& vvd_dir, std::vector<int> set_ids,
                   std::optional<std::vector<std::int64_t>> ages_ms) {
                    harness::AgingConfig cfg;
                    if (techniques) {
                        cfg.techniques = *techniques;
                    }
                    cfg.run = run_config(source, seed, n_sets, n_packets, snr_db, std::move(phi), cfg.techniques, detector,
                                         kalman_skip, equalizer_taps, score_decoding, trace_dir, vvd_dir);
                    cfg.set_ids = std::move(set_ids);
                    if (ages_ms) {
                        cfg.options.ages_ms = *ages_ms;
                    }
                    cfg.options.score_per = score_decoding;
                    cfg.options.receiver = cfg.run.receiver;
                    py::gil_scoped_release release;
                    return harness::aging_csv(harness::run_aging(cfg));
                },
                args..., "Aging sweep -> CSV (set,technique,age_ms,mse,per,n_packets).");
        },
        run_args(py::arg("set_ids") = std::vector<int>{1}, py::arg("ages_ms") = py::none()));
}
