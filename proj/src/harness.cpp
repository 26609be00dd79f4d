#include "vvdlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "vvdlab/trace_io.hpp"

namespace vvdlab::harness {

namespace {

// Rows of the published cross-validation table: {validation, test}; training is the remainder.
constexpr std::array<std::array<int, 2>, 15> kPublishedSplits{{
    {6, 8},  {11, 15}, {14, 9}, {5, 2},  {12, 4}, {10, 1}, {9, 6},  {13, 3},
    {8, 5},  {4, 7},   {3, 10}, {7, 11}, {13, 12}, {2, 13}, {1, 14},
}};

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

bool starts_with(const std::string& s, const std::string& prefix)
{
    return s.rfind(prefix, 0) == 0;
}

std::optional<std::size_t> parse_kalman_order(const std::string& technique, const std::string& prefix)
{
    if (!starts_with(technique, prefix)) {
        return std::nullopt;
    }
    const auto digits = technique.substr(prefix.size());
    std::size_t p = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), p);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || p == 0) {
        throw std::invalid_argument("bad AR order in technique '" + technique + "'");
    }
    return p;
}

std::optional<std::int64_t> parse_age(const std::string& technique)
{
    if (!starts_with(technique, "aged_") || technique.size() < 8 || technique.substr(technique.size() - 2) != "ms") {
        return std::nullopt;
    }
    const auto digits = technique.substr(5, technique.size() - 7);
    std::int64_t age = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), age);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || age <= 0) {
        throw std::invalid_argument("bad age in technique '" + technique + "'");
    }
    return age;
}

std::optional<std::string> vvd_name(const std::string& technique)
{
    for (const std::string prefix : {"combined_vvd_", "vvd_"}) {
        if (starts_with(technique, prefix)) {
            const auto name = technique.substr(prefix.size());
            if (name.empty()) {
                throw std::invalid_argument("technique '" + technique + "' needs a name");
            }
            return name;
        }
    }
    return std::nullopt;
}

bool is_known_technique(const std::string& t)
{
    return t == "standard" || t == "ground_truth" || t == "preamble" || t == "genie" || t == "combined_ground_truth" ||
           parse_age(t) || parse_kalman_order(t, "kalman_ar") || parse_kalman_order(t, "combined_kalman_ar") || vvd_name(t);
}

PreambleDetector make_detector(const DetectorSpec& spec, std::uint64_t seed)
{
    switch (spec.kind) {
    case DetectorSpec::Kind::Margin:
        return margin_detector(spec.parameter);
    case DetectorSpec::Kind::Bernoulli:
        return bernoulli_detector(spec.parameter, seed);
    case DetectorSpec::Kind::Always:
        return always_detect();
    case DetectorSpec::Kind::Never:
        return never_detect();
    }
    throw std::logic_error("unhandled detector kind");
}

std::vector<std::optional<Cir>> kalman_predictions(std::span<const Cir> ground_truth, std::span<const std::vector<Cir>> training,
                                                   std::size_t order)
{
    if (ground_truth.empty()) {
        return {};
    }
    const auto fit = fit_ar(training, order);
    auto state = KalmanState::initial(fit.model, ground_truth.front().size(), ground_truth.front().pre_cursor());
    std::vector<std::optional<Cir>> out(ground_truth.size());
    for (std::size_t k = 0; k + 1 < ground_truth.size(); ++k) {
        auto step = kalman_step(state, ground_truth[k]);
        out[k + 1] = std::move(step.prediction);
        state = std::move(step.state);
    }
    return out;
}

std::vector<std::optional<Cir>> load_vvd(const RunConfig& cfg, const SetData& test, const std::string& name)
{
    const auto path = cfg.vvd_dir / estimate_filename(static_cast<int>(test.trace.set_id), name);
    if (!std::filesystem::exists(path)) {
        throw std::invalid_argument("missing estimate file " + path.string());
    }
    const auto records = read_estimates_file(path);
    std::map<std::int64_t, const EstimateRecord*> by_seq;
    for (const auto& r : records) {
        by_seq[r.seq_no] = &r;
    }
    std::vector<std::optional<Cir>> out;
    out.reserve(test.trace.records.size());
    for (const auto& rec : test.trace.records) {
        const auto it = by_seq.find(rec.seq_no);
        out.push_back(it != by_seq.end() ? it->second->cir : std::nullopt);
    }
    return out;
}

std::vector<std::optional<Cir>> combine(const RunConfig& cfg, const SetData& test, std::span<const std::optional<Cir>> blind)
{
    const auto detector = make_detector(cfg.detector, set_seed(cfg.seed, static_cast<int>(test.trace.set_id)));
    std::vector<std::optional<Cir>> out;
    out.reserve(blind.size());
    for (std::size_t k = 0; k < blind.size(); ++k) {
        const auto& rec = test.trace.records[k];
        if (blind[k]) {
            out.push_back(combined_estimate(rec, detector, *blind[k]).cir);
        } else {
            out.push_back(preamble_estimate(rec, detector).cir);
        }
    }
    return out;
}

} // namespace

std::vector<SetCombination> make_combinations(int n_sets)
{
    if (n_sets < 3) {
        throw std::invalid_argument("cross-validation needs at least 3 sets");
    }
    std::vector<SetCombination> out;
    for (int i = 1; i <= n_sets; ++i) {
        SetCombination c;
        c.number = i;
        if (n_sets == 15) {
            c.validation_id = kPublishedSplits[static_cast<std::size_t>(i - 1)][0];
            c.test_id = kPublishedSplits[static_cast<std::size_t>(i - 1)][1];
        } else {
            c.test_id = i;
            c.validation_id = i % n_sets + 1;
        }
        for (int s = 1; s <= n_sets; ++s) {
            if (s != c.validation_id && s != c.test_id) {
                c.train_ids.push_back(s);
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

DetectorSpec parse_detector(const std::string& text)
{
    DetectorSpec d;
    const auto colon = text.find(':');
    const auto kind = text.substr(0, colon);
    const auto param = colon == std::string::npos ? std::string() : text.substr(colon + 1);
    auto number = [&](double fallback) {
        if (param.empty()) {
            return fallback;
        }
        std::size_t used = 0;
        const double v = std::stod(param, &used);
        if (used != param.size()) {
            throw std::invalid_argument("bad detector parameter '" + param + "'");
        }
        return v;
    };
    if (kind == "margin") {
        d.kind = DetectorSpec::Kind::Margin;
        d.parameter = number(kDefaultDetectorMargin);
    } else if (kind == "bernoulli") {
        d.kind = DetectorSpec::Kind::Bernoulli;
        d.parameter = number(0.0);
        if (d.parameter < 0.0 || d.parameter > 1.0) {
            throw std::invalid_argument("bernoulli failure probability must lie in [0, 1]");
        }
    } else if (kind == "always") {
        d.kind = DetectorSpec::Kind::Always;
    } else if (kind == "never") {
        d.kind = DetectorSpec::Kind::Never;
    } else {
        throw std::invalid_argument("unknown detector '" + text + "' (margin[:T], bernoulli:P, always, never)");
    }
    return d;
}

std::string to_string(const DetectorSpec& d)
{
    switch (d.kind) {
    case DetectorSpec::Kind::Margin:
        return "margin:" + format_number(d.parameter);
    case DetectorSpec::Kind::Bernoulli:
        return "bernoulli:" + format_number(d.parameter);
    case DetectorSpec::Kind::Always:
        return "always";
    case DetectorSpec::Kind::Never:
        return "never";
    }
    return "unknown";
}

std::uint64_t set_seed(std::uint64_t run_seed, int set_id)
{
    std::uint64_t z = run_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(set_id);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string trace_filename(int set_id)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "set%02d.vvdtrace", set_id);
    return buf;
}

std::string depth_filename(int set_id)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "set%02d.vvddepth", set_id);
    return buf;
}

std::string estimate_filename(int set_id, const std::string& name)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "set%02d_", set_id);
    return std::string(buf) + name + ".vvdest";
}

void validate(const RunConfig& cfg)
{
    if (cfg.techniques.empty()) {
        throw std::invalid_argument("at least one technique is required");
    }
    for (const auto& t : cfg.techniques) {
        if (!is_known_technique(t)) {
            throw std::invalid_argument("unknown technique '" + t + "'");
        }
    }
    if (cfg.n_sets < 3) {
        throw std::invalid_argument("n_sets must be at least 3");
    }
    if (cfg.source != TraceSource::Files && cfg.n_packets == 0) {
        throw std::invalid_argument("n_packets must be positive");
    }
    const bool needs_kalman = std::any_of(cfg.techniques.begin(), cfg.techniques.end(), [](const std::string& t) {
        return starts_with(t, "kalman_ar") || starts_with(t, "combined_kalman_ar");
    });
    if (needs_kalman && cfg.source != TraceSource::Files && cfg.n_packets <= cfg.kalman_skip) {
        throw std::invalid_argument("n_packets must exceed kalman_skip (" + std::to_string(cfg.kalman_skip) + ")");
    }
    if (cfg.source == TraceSource::Generate) {
        std::vector<Complex> phi(cfg.ar_phi.begin(), cfg.ar_phi.end());
        ArModel(phi, cfg.process_noise_var); // throws on non-stationary phi
    }
    for (const auto& t : cfg.techniques) {
        if (const auto name = vvd_name(t)) {
            for (int s = 1; s <= cfg.n_sets; ++s) {
                const auto path = cfg.vvd_dir / estimate_filename(s, *name);
                if (!std::filesystem::exists(path)) {
                    throw std::invalid_argument("missing estimate file " + path.string() + " for technique '" + t + "'");
                }
            }
        }
    }
    if (cfg.source == TraceSource::Files) {
        for (int s = 1; s <= cfg.n_sets; ++s) {
            const auto path = cfg.trace_dir / trace_filename(s);
            if (!std::filesystem::exists(path)) {
                throw std::invalid_argument("missing trace file " + path.string());
            }
        }
    }
}

TraceSet make_trace(const RunConfig& cfg, int set_id, std::vector<scene::DepthFrame>* frames)
{
    if (cfg.source == TraceSource::Files) {
        return read_trace_file(cfg.trace_dir / trace_filename(set_id));
    }
    ChannelConfig ch = cfg.channel;
    ch.rng_seed = set_seed(cfg.seed, set_id);
    if (cfg.source == TraceSource::Scene) {
        auto st = scene::generate_scene_trace(cfg.scene, ch, cfg.n_packets, set_id);
        if (frames) {
            *frames = std::move(st.frames);
        }
        return std::move(st.trace);
    }
    std::vector<Complex> phi(cfg.ar_phi.begin(), cfg.ar_phi.end());
    return generate_trace(ch, ArModel(phi, cfg.process_noise_var), cfg.n_packets, random_psdu_source(), set_id);
}

SetData load_set(const RunConfig& cfg, int set_id)
{
    SetData data;
    data.trace = make_trace(cfg, set_id);
    data.ground_truth.reserve(data.trace.records.size());
    data.truth_psdus.reserve(data.trace.records.size());
    for (const auto& rec : data.trace.records) {
        data.ground_truth.push_back(ground_truth_estimate(rec));
        data.truth_psdus.push_back(reference_psdu(rec));
    }
    return data;
}

TechniqueResult estimate_technique(const std::string& technique, const SetData& test, std::span<const std::vector<Cir>> training,
                                   const RunConfig& cfg)
{
    const auto& records = test.trace.records;
    TechniqueResult out;
    out.estimates.resize(records.size());

    if (technique == "standard") {
        out.has_mse = false;
    } else if (technique == "ground_truth") {
        std::copy(test.ground_truth.begin(), test.ground_truth.end(), out.estimates.begin());
    } else if (technique == "genie") {
        for (std::size_t k = 0; k < records.size(); ++k) {
            out.estimates[k] = genie_estimate(records[k]);
        }
    } else if (technique == "preamble") {
        const auto detector = make_detector(cfg.detector, set_seed(cfg.seed, static_cast<int>(test.trace.set_id)));
        for (std::size_t k = 0; k < records.size(); ++k) {
            out.estimates[k] = preamble_estimate(records[k], detector).cir;
        }
    } else if (technique == "combined_ground_truth") {
        std::vector<std::optional<Cir>> blind(test.ground_truth.begin(), test.ground_truth.end());
        out.estimates = combine(cfg, test, blind);
    } else if (const auto age = parse_age(technique)) {
        std::vector<TimedCir> history;
        history.reserve(records.size());
        for (std::size_t k = 0; k < records.size(); ++k) {
            history.push_back({records[k].timestamp_ms, test.ground_truth[k]});
        }
        for (std::size_t k = 0; k < records.size(); ++k) {
            out.estimates[k] = previous_estimate(history, records[k].timestamp_ms, *age);
        }
    } else if (const auto p = parse_kalman_order(technique, "kalman_ar")) {
        out.estimates = kalman_predictions(test.ground_truth, training, *p);
        out.first_scored = cfg.kalman_skip;
    } else if (const auto pc = parse_kalman_order(technique, "combined_kalman_ar")) {
        out.estimates = combine(cfg, test, kalman_predictions(test.ground_truth, training, *pc));
        out.first_scored = cfg.kalman_skip;
    } else if (const auto name = vvd_name(technique)) {
        auto vvd = load_vvd(cfg, test, *name);
        out.estimates = starts_with(technique, "combined_") ? combine(cfg, test, vvd) : std::move(vvd);
    } else {
        throw std::invalid_argument("unknown technique '" + technique + "'");
    }
    out.first_scored = std::min(out.first_scored, records.size());
    return out;
}

MetricsReport score_technique(const std::string& technique, const SetData& test, const TechniqueResult& result,
                              const RunConfig& cfg)
{
    const auto& records = test.trace.records;
    if (result.first_scored >= records.size()) {
        throw std::invalid_argument("no packets left to score for technique '" + technique + "'");
    }
    std::vector<Cir> est;
    std::vector<Cir> truth;
    for (std::size_t k = result.first_scored; k < records.size(); ++k) {
        if (result.has_mse && result.estimates[k]) {
            est.push_back(*result.estimates[k]);
            truth.push_back(test.ground_truth[k]);
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double m = result.has_mse && !est.empty() ? mse(est, truth) : nan;
    const std::size_t n = records.size() - result.first_scored;

    if (!cfg.score_decoding) {
        MetricsReport r;
        r.technique = technique;
        r.set_id = test.trace.set_id;
        r.per = r.cer = r.ber = nan;
        r.mse = m;
        r.n_packets = n;
        return r;
    }
    std::vector<PacketResult> packets;
    packets.reserve(n);
    for (std::size_t k = result.first_scored; k < records.size(); ++k) {
        packets.push_back(technique == "standard" ? decode_standard(records[k])
                                                  : decode_with_estimate(records[k], result.estimates[k], cfg.receiver));
    }
    const std::span<const std::vector<std::uint8_t>> truths(test.truth_psdus.data() + result.first_scored, n);
    return summarize(technique, test.trace.set_id, packets, truths, m);
}

double ComparisonResult::mean(const std::string& technique, const std::string& metric) const
{
    std::vector<double> values;
    for (const auto& row : rows) {
        if (row.report.technique != technique) {
            continue;
        }
        const auto& r = row.report;
        if (metric == "per") {
            values.push_back(r.per);
        } else if (metric == "cer") {
            values.push_back(r.cer);
        } else if (metric == "ber") {
            values.push_back(r.ber);
        } else if (metric == "mse") {
            values.push_back(r.mse);
        } else {
            throw std::invalid_argument("unknown metric '" + metric + "'");
        }
    }
    if (values.empty()) {
        throw std::invalid_argument("no rows for technique '" + technique + "'");
    }
    return pairwise_sum(values) / static_cast<double>(values.size());
}

ComparisonResult run_comparison(const RunConfig& cfg)
{
    validate(cfg);
    const auto combos = make_combinations(cfg.n_sets);
    std::vector<SetData> sets(static_cast<std::size_t>(cfg.n_sets));
    parallel_for(sets.size(), cfg.threads, [&](std::size_t i) { sets[i] = load_set(cfg, static_cast<int>(i) + 1); });

    std::vector<std::vector<MetricsReport>> per_combo(combos.size());
    parallel_for(combos.size(), cfg.threads, [&](std::size_t c) {
        const auto& combo = combos[c];
        std::vector<std::vector<Cir>> training;
        for (int id : combo.train_ids) {
            training.push_back(sets[static_cast<std::size_t>(id - 1)].ground_truth);
        }
        const auto& test = sets[static_cast<std::size_t>(combo.test_id - 1)];
        for (const auto& t : cfg.techniques) {
            const auto result = estimate_technique(t, test, training, cfg);
            per_combo[c].push_back(score_technique(t, test, result, cfg));
        }
    });

    ComparisonResult out;
    for (std::size_t c = 0; c < combos.size(); ++c) {
        for (auto& r : per_combo[c]) {
            out.rows.push_back({combos[c].number, std::move(r)});
        }
    }
    return out;
}

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string comparison_csv(const ComparisonResult& result)
{
    std::ostringstream os;
    os << "combination,technique,metric,value\n";
    for (const auto& row : result.rows) {
        const auto& r = row.report;
        const std::pair<const char*, double> metrics[] = {
            {"per", r.per}, {"cer", r.cer}, {"ber", r.ber}, {"mse", r.mse}, {"n_packets", static_cast<double>(r.n_packets)}};
        for (const auto& [name, value] : metrics) {
            os << row.combination << ',' << r.technique << ',' << name << ',' << format_number(value) << '\n';
        }
    }
    return os.str();
}

std::string comparison_json(const ComparisonResult& result, const RunConfig& cfg)
{
    using nlohmann::ordered_json;
    auto num = [](double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); };
    ordered_json j;
    j["seed"] = cfg.seed;
    j["n_sets"] = cfg.n_sets;
    j["detector"] = to_string(cfg.detector);
    j["kalman_skip"] = cfg.kalman_skip;
    j["equalizer_taps"] = cfg.receiver.equalizer_taps;
    ordered_json summary = ordered_json::object();
    for (const auto& t : cfg.techniques) {
        summary[t] = {{"per", num(result.mean(t, "per"))},
                      {"cer", num(result.mean(t, "cer"))},
                      {"ber", num(result.mean(t, "ber"))},
                      {"mse", num(result.mean(t, "mse"))}};
    }
    j["mean_over_combinations"] = summary;
    ordered_json rows = ordered_json::array();
    for (const auto& row : result.rows) {
        const auto& r = row.report;
        rows.push_back({{"combination", row.combination},
                        {"technique", r.technique},
                        {"test_set", r.set_id},
                        {"n_packets", r.n_packets},
                        {"per", num(r.per)},
                        {"cer", num(r.cer)},
                        {"ber", num(r.ber)},
                        {"mse", num(r.mse)}});
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

std::vector<AgingRow> run_aging(const AgingConfig& cfg)
{
    RunConfig run = cfg.run;
    run.techniques = cfg.techniques;
    validate(run);
    for (const auto& t : cfg.techniques) {
        if (starts_with(t, "kalman_ar") || starts_with(t, "combined_kalman_ar") || t == "standard") {
            throw std::invalid_argument("technique '" + t + "' is not supported by the aging sweep");
        }
    }
    if (cfg.set_ids.empty()) {
        throw std::invalid_argument("aging needs at least one set");
    }
    std::vector<SetData> sets(cfg.set_ids.size());
    parallel_for(sets.size(), run.threads, [&](std::size_t i) { sets[i] = load_set(run, cfg.set_ids[i]); });

    std::vector<std::vector<AgingRow>> per_set(sets.size());
    parallel_for(sets.size(), run.threads, [&](std::size_t i) {
        for (const auto& t : cfg.techniques) {
            const auto result = estimate_technique(t, sets[i], {}, run);
            const auto curve = aging_sweep(sets[i].trace.records, result.estimates, sets[i].ground_truth, cfg.options);
            for (const auto& pt : curve) {
                per_set[i].push_back({cfg.set_ids[i], t, pt});
            }
        }
    });

    std::vector<AgingRow> rows;
    for (auto& v : per_set) {
        rows.insert(rows.end(), v.begin(), v.end());
    }
    for (const auto& t : cfg.techniques) {
        for (auto age : cfg.options.ages_ms) {
            std::vector<double> mses;
            std::vector<double> pers;
            std::size_t n = 0;
            for (const auto& r : rows) {
                if (r.set_id != 0 && r.technique == t && r.point.age_ms == age) {
                    mses.push_back(r.point.mse);
                    pers.push_back(r.point.per);
                    n += r.point.n_packets;
                }
            }
            AgingRow mean_row{0, t, {age, pairwise_sum(mses) / static_cast<double>(mses.size()),
                                     pairwise_sum(pers) / static_cast<double>(pers.size()), n}};
            rows.push_back(mean_row);
        }
    }
    return rows;
}

std::string aging_csv(const std::vector<AgingRow>& rows)
{
    std::ostringstream os;
    os << "set,technique,age_ms,mse,per,n_packets\n";
    for (const auto& r : rows) {
        os << (r.set_id == 0 ? std::string("mean") : std::to_string(r.set_id)) << ',' << r.technique << ','
           << r.point.age_ms << ',' << format_number(r.point.mse) << ',' << format_number(r.point.per) << ','
           << r.point.n_packets << '\n';
    }
    return os.str();
}

} // namespace vvdlab::harness
