#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vvdlab/harness.hpp"
#include "vvdlab/scene.hpp"
#include "vvdlab/trace_io.hpp"

namespace fs = std::filesystem;
using namespace vvdlab;

namespace {

// Flags shared by every verb that builds traces.
struct CommonFlags {
    harness::RunConfig run;
    std::string source = "generate";
    std::string detector = "margin";
    std::string techniques;
};

void add_common(CLI::App& cmd, CommonFlags& f, bool with_techniques)
{
    auto& r = f.run;
    cmd.add_option("--seed", r.seed, "Run seed; every per-set seed derives from it")->capture_default_str();
    cmd.add_option("--sets", r.n_sets, "Number of trace sets")->capture_default_str();
    cmd.add_option("--packets", r.n_packets, "Packets per synthesized set (one per 100 ms block)")->capture_default_str();
    cmd.add_option("--source", f.source, "generate | scene | files")
        ->check(CLI::IsMember({"generate", "scene", "files"}))
        ->capture_default_str();
    cmd.add_option("--trace-dir", r.trace_dir, "Directory holding setNN.vvdtrace (source=files)");
    cmd.add_option("--vvd-dir", r.vvd_dir, "Directory holding setNN_<name>.vvdest for vvd_* techniques");
    cmd.add_option("--snr", r.channel.snr_db, "SNR in dB")->capture_default_str();
    cmd.add_option("--phi", r.ar_phi, "AR coefficients of the synthetic channel")
        ->delimiter(',')->capture_default_str();
    cmd.add_option("--process-noise", r.process_noise_var, "AR innovation variance")->capture_default_str();
    cmd.add_option("--phase-drift", r.channel.phase_drift_std_rad, "Per-block phase random-walk std (rad)")
        ->capture_default_str();
    cmd.add_option("--blockage", r.scene.multipath.blockage_factor, "Amplitude factor of blocked paths (source=scene)")
        ->capture_default_str();
    cmd.add_option("--eq-taps", r.receiver.equalizer_taps, "Zero-forcing equalizer length L")->capture_default_str();
    cmd.add_option("--detector", f.detector, "margin[:T] | bernoulli:P | always | never")->capture_default_str();
    cmd.add_option("--kalman-skip", r.kalman_skip, "Packets skipped when scoring Kalman techniques")->capture_default_str();
    cmd.add_option("--threads", r.threads, "Worker threads (0 = all cores)")->capture_default_str();
    if (with_techniques) {
        cmd.add_option("--techniques", f.techniques, "Comma-separated technique list");
    }
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

void finish(CommonFlags& f)
{
    auto& r = f.run;
    r.source = f.source == "files" ? harness::TraceSource::Files
             : f.source == "scene" ? harness::TraceSource::Scene
                                   : harness::TraceSource::Generate;
    r.detector = harness::parse_detector(f.detector);
    if (!f.techniques.empty()) {
        r.techniques = split_list(f.techniques);
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

int cmd_generate(CommonFlags& f, const fs::path& out_dir)
{
    finish(f);
    if (f.run.source == harness::TraceSource::Files) {
        throw std::invalid_argument("generate needs --source generate or scene");
    }
    f.run.techniques = {"ground_truth"};
    f.run.kalman_skip = 0;
    harness::validate(f.run);
    fs::create_directories(out_dir);
    for (int s = 1; s <= f.run.n_sets; ++s) {
        std::vector<scene::DepthFrame> frames;
        const auto trace = harness::make_trace(f.run, s, &frames);
        write_trace_file(trace, out_dir / harness::trace_filename(s));
        if (f.run.source == harness::TraceSource::Scene) {
            scene::write_depth_file(frames, out_dir / harness::depth_filename(s));
        }
        std::cout << harness::trace_filename(s) << ": " << trace.records.size() << " packets\n";
    }
    return 0;
}

int cmd_estimate(CommonFlags& f, const fs::path& out_dir)
{
    finish(f);
    if (f.techniques.empty()) {
        f.run.techniques = {"ground_truth", "preamble", "genie"};
    }
    for (const auto& t : f.run.techniques) {
        if (t == "standard" || t.rfind("vvd_", 0) == 0 || t.rfind("combined_vvd_", 0) == 0) {
            throw std::invalid_argument("technique '" + t + "' produces no estimate file");
        }
    }
    harness::validate(f.run);
    fs::create_directories(out_dir);

    std::vector<harness::SetData> sets;
    for (int s = 1; s <= f.run.n_sets; ++s) {
        sets.push_back(harness::load_set(f.run, s));
    }
    for (std::size_t i = 0; i < sets.size(); ++i) {
        // Kalman models are fitted on every other set.
        std::vector<std::vector<Cir>> training;
        for (std::size_t j = 0; j < sets.size(); ++j) {
            if (j != i) {
                training.push_back(sets[j].ground_truth);
            }
        }
        const int id = static_cast<int>(i) + 1;
        for (const auto& t : f.run.techniques) {
            const auto result = harness::estimate_technique(t, sets[i], training, f.run);
            std::vector<EstimateRecord> recs;
            for (std::size_t k = 0; k < result.estimates.size(); ++k) {
                recs.push_back({sets[i].trace.records[k].seq_no, t, result.estimates[k]});
            }
            write_estimates_file(recs, out_dir / harness::estimate_filename(id, t));
        }
    }
    std::cout << "wrote " << sets.size() * f.run.techniques.size() << " estimate files to " << out_dir.string() << '\n';
    return 0;
}

// Table cells only; artifacts keep the shortest round-trip form.
std::string cell(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    std::ostringstream os;
    os << std::setprecision(5) << v;
    return os.str();
}

void print_means(const harness::ComparisonResult& res, const std::vector<std::string>& techniques)
{
    std::cout << std::left << std::setw(24) << "technique" << std::right;
    for (const char* m : {"per", "cer", "ber", "mse"}) {
        std::cout << std::setw(14) << m;
    }
    std::cout << '\n';
    for (const auto& t : techniques) {
        std::cout << std::left << std::setw(24) << t << std::right;
        for (const char* m : {"per", "cer", "ber", "mse"}) {
            std::cout << std::setw(14) << cell(res.mean(t, m));
        }
        std::cout << '\n';
    }
}

int cmd_compare(CommonFlags& f, const fs::path& csv, const fs::path& json, bool mse_only, bool quiet)
{
    finish(f);
    f.run.score_decoding = !mse_only;
    harness::validate(f.run);
    const auto res = harness::run_comparison(f.run);
    if (!csv.empty()) {
        write_text(csv, harness::comparison_csv(res));
    }
    if (!json.empty()) {
        write_text(json, harness::comparison_json(res, f.run));
    }
    if (!quiet) {
        print_means(res, f.run.techniques);
    }
    return 0;
}

int cmd_aging(CommonFlags& f, const std::vector<int>& set_ids, const std::vector<std::int64_t>& ages, bool no_per,
              const fs::path& csv)
{
    finish(f);
    harness::AgingConfig cfg;
    if (!f.techniques.empty()) {
        cfg.techniques = f.run.techniques;
    }
    cfg.run = f.run;
    cfg.run.techniques = cfg.techniques;
    cfg.run.kalman_skip = 0;
    if (!set_ids.empty()) {
        cfg.set_ids = set_ids;
    }
    if (!ages.empty()) {
        cfg.options.ages_ms = ages;
    }
    cfg.options.score_per = !no_per;
    cfg.options.receiver = f.run.receiver;
    const auto text = harness::aging_csv(harness::run_aging(cfg));
    if (csv.empty()) {
        std::cout << text;
    } else {
        write_text(csv, text);
    }
    return 0;
}

// Summarizes a long-format comparison CSV: mean, min and max per technique and metric.
int cmd_report(const fs::path& input, const fs::path& json_out)
{
    std::ifstream in(input);
    if (!in) {
        throw IoError("cannot read " + input.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "combination,technique,metric,value") {
        throw std::invalid_argument(input.string() + " is not a comparison CSV");
    }
    struct Acc {
        double sum = 0.0, lo = INFINITY, hi = -INFINITY;
        std::size_t n = 0;
    };
    std::map<std::string, std::map<std::string, Acc>> acc;
    std::vector<std::string> order;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        const auto fields = split_list(line);
        if (fields.size() != 4) {
            throw std::invalid_argument("malformed row at line " + std::to_string(lineno));
        }
        if (!acc.count(fields[1])) {
            order.push_back(fields[1]);
        }
        auto& a = acc[fields[1]][fields[2]];
        if (fields[3] == "nan") {
            continue;
        }
        const double v = std::stod(fields[3]);
        a.sum += v;
        a.lo = std::min(a.lo, v);
        a.hi = std::max(a.hi, v);
        ++a.n;
    }
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    std::cout << std::left << std::setw(24) << "technique" << std::setw(8) << "metric" << std::right << std::setw(14)
              << "mean" << std::setw(14) << "min" << std::setw(14) << "max" << '\n';
    for (const auto& t : order) {
        for (const char* m : {"per", "cer", "ber", "mse"}) {
            const auto it = acc[t].find(m);
            if (it == acc[t].end()) {
                continue;
            }
            const auto& a = it->second;
            const double mean = a.n ? a.sum / static_cast<double>(a.n) : NAN;
            const auto fmt = [&](double v) { return a.n ? cell(v) : std::string("nan"); };
            std::cout << std::left << std::setw(24) << t << std::setw(8) << m << std::right << std::setw(14) << fmt(mean)
                      << std::setw(14) << fmt(a.lo) << std::setw(14) << fmt(a.hi) << '\n';
            if (a.n) {
                j[t][m] = {{"mean", mean}, {"min", a.lo}, {"max", a.hi}, {"n", a.n}};
            } else {
                j[t][m] = nullptr;
            }
        }
    }
    if (!json_out.empty()) {
        write_text(json_out, j.dump(2) + "\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"vvdlab: channel-estimation lab for an O-QPSK/DSSS link"};
    app.require_subcommand(1);

    CommonFlags gen_flags, est_flags, cmp_flags, age_flags;
    fs::path gen_out = "traces", est_out = "estimates", csv_out, json_out, aging_csv, report_in, report_json;
    bool mse_only = false, quiet = false, no_per = false;
    std::vector<int> aging_sets;
    std::vector<std::int64_t> aging_ages;
    std::uint64_t report_seed = 0;

    auto* gen = app.add_subcommand("generate", "Synthesize trace sets (.vvdtrace, plus .vvddepth for scene traces)");
    add_common(*gen, gen_flags, false);
    gen->add_option("-o,--out", gen_out, "Output directory")->capture_default_str();

    auto* est = app.add_subcommand("estimate", "Run estimators and write one .vvdest per set and technique");
    add_common(*est, est_flags, true);
    est->add_option("-o,--out", est_out, "Output directory")->capture_default_str();

    auto* cmp = app.add_subcommand("compare", "Cross-validated comparison over all set combinations");
    add_common(*cmp, cmp_flags, true);
    cmp->add_option("--csv", csv_out, "Long-format CSV output");
    cmp->add_option("--json", json_out, "JSON summary output");
    cmp->add_flag("--mse-only", mse_only, "Skip decoding; report MSE only");
    cmp->add_flag("-q,--quiet", quiet, "Do not print the summary table");

    auto* age = app.add_subcommand("aging", "MSE/PER versus estimate age");
    add_common(*age, age_flags, true);
    age->add_option("--set-ids", aging_sets, "Sets to sweep (1-based)")->delimiter(',');
    age->add_option("--ages", aging_ages, "Ages in ms (default 100 ms .. 20 s)")->delimiter(',');
    age->add_flag("--no-per", no_per, "Skip decoding; MSE only");
    age->add_option("--csv", aging_csv, "CSV output (stdout when omitted)");

    auto* rep = app.add_subcommand("report", "Summarize a comparison CSV");
    rep->add_option("input", report_in, "Comparison CSV")->required();
    rep->add_option("--json", report_json, "Write the summary as JSON");
    rep->add_option("--seed", report_seed, "Accepted for symmetry; the report is deterministic");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            return cmd_generate(gen_flags, gen_out);
        }
        if (*est) {
            return cmd_estimate(est_flags, est_out);
        }
        if (*cmp) {
            return cmd_compare(cmp_flags, csv_out, json_out, mse_only, quiet);
        }
        if (*age) {
            return cmd_aging(age_flags, aging_sets, aging_ages, no_per, aging_csv);
        }
        return cmd_report(report_in, report_json);
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
