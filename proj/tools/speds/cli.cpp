#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "speds/error.hpp"

namespace speds::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "speds_out";
    std::size_t threads = 0;
};

std::string format(const char* fmt, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, x);
    return buf;
}

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    template <class Writer>
    void write(const std::string& name, Writer&& writer) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
        writer(os);
        files_.push_back(name);
    }

    void summary(Json doc, std::ostream& out) {
        doc["files"] = files_;
        files_.push_back("summary.json");
        std::ofstream os(dir_ / "summary.json", std::ios::binary);
        if (!os) throw ConfigError("cannot write summary.json");
        os << doc.dump(2) << '\n';
        out << "wrote " << files_.size() << " file(s) to " << dir_.string() << '\n';
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

Json header(const RunConfig& rc) {
    Json j;
    j["command"] = rc.command;
    j["preset"] = rc.preset;
    j["seed"] = rc.seed;
    return j;
}

void run_emission_pattern(const RunConfig& rc, Outputs& files, std::ostream& out) {
    const auto& c = *rc.emission_pattern;
    dipole::EmissionOptions opt;
    opt.threads = rc.threads;
    const auto spectrum = dipole::emission_pattern(c.geometry, c.angular_resolution_deg, opt);
    files.write("emission_pattern.csv", [&](std::ostream& os) { dipole::write_csv(os, spectrum); });

    Json j = header(rc);
    j["geometry"] = c.geometry_kind;
    if (c.design) {
        const auto& d = *c.design;
        j["design"] = {{"bottom_periods", d.bottom_periods},
                       {"top_periods", d.top_periods},
                       {"cavity_order", d.cavity_order},
                       {"dipole_depth_below_surface", d.dipole_depth_below_surface}};
    }
    j["angular_resolution_deg"] = spectrum.resolution_deg;
    j["total_power"] = spectrum.total_power;
    j["guided_power"] = spectrum.guided_power;
    j["radiated_top"] = spectrum.radiated_top();
    j["radiated_bottom"] = spectrum.radiated_bottom();
    Json eff = Json::array();
    for (double na : c.numerical_apertures) {
        const double eta = dipole::collection_efficiency(spectrum, na);
        eff.push_back({{"numerical_aperture", na}, {"efficiency", eta}});
        out << "collection efficiency NA=" << format("%.2f", na) << ": " << format("%.3f", 100.0 * eta) << "%\n";
    }
    j["collection_efficiency"] = eff;
    out << "total power " << format("%.6f", spectrum.total_power) << ", guided " << format("%.6f", spectrum.guided_power)
        << '\n';
    files.summary(j, out);
}

void run_cavity_sweep(const RunConfig& rc, Outputs& files, std::ostream& out) {
    const auto& c = *rc.cavity_sweep;
    cavity::SweepOptions opt;
    opt.angular_resolution_deg = c.angular_resolution_deg;
    opt.emission.threads = rc.threads;

    std::vector<cavity::SweepResult> sweeps;
    if (c.kind == CavitySweepConfig::Kind::BottomMirror) {
        sweeps = cavity::sweep_bottom_mirror(c.max_periods, c.numerical_apertures, opt);
    } else {
        sweeps.push_back(cavity::optimize_top_mirror(c.bottom_periods, c.max_top, c.numerical_aperture, opt));
    }

    Json j = header(rc);
    Json list = Json::array();
    for (const auto& s : sweeps) {
        files.write(cavity::csv_filename(s), [&](std::ostream& os) { cavity::write_csv(os, s); });
        list.push_back({{"preset", s.preset},
                        {"parameter", s.parameter},
                        {"numerical_aperture", s.numerical_aperture},
                        {"parameter_values", s.parameter_values},
                        {"efficiencies", s.efficiencies},
                        {"argmax", s.best_parameter()},
                        {"best_efficiency", s.best_efficiency()}});
        out << s.preset << " NA=" << format("%.2f", s.numerical_aperture) << ": best " << s.parameter << " = "
            << s.best_parameter() << ", efficiency " << format("%.3f", 100.0 * s.best_efficiency()) << "%\n";
    }
    j["sweeps"] = list;
    files.summary(j, out);
}

Json line_counts(const qd::EmissionRecord& record) {
    Json j;
    for (auto l : {qd::Line::X, qd::Line::X2, qd::Line::Charged}) j[std::string(qd::to_string(l))] = record.count(l);
    return j;
}

Json lines_json(const std::vector<qd::Line>& lines) {
    Json j = Json::array();
    for (auto l : lines) j.push_back(std::string(qd::to_string(l)));
    return j;
}

void run_hbt(const RunConfig& rc, Outputs& files, std::ostream& out) {
    auto c = *rc.hbt;
    const auto& src = c.source;
    const auto record = src.is_laser ? qd::simulate_laser(src.laser, qd::derive_seed(rc.seed, 10))
                                     : qd::simulate(src.model, src.drive, qd::derive_seed(rc.seed, 10));
    const double duration_s = record.duration_ns * 1e-9;

    std::size_t photons_a = 0;
    for (const auto& e : record.events) {
        if (std::find(c.lines_a.begin(), c.lines_a.end(), e.line) != c.lines_a.end()) ++photons_a;
    }
    const double expected_signal_cps =
        static_cast<double>(photons_a) * c.detectors.efficiency * c.detectors.splitter_ratio / duration_s;
    if (c.noise_to_signal) {
        const double noise = *c.noise_to_signal * expected_signal_cps;
        if (noise < c.detectors.dark_rate_cps) {
            throw ConfigError("config field 'noise_matching': dark_rate_cps alone exceeds the requested noise level");
        }
        c.detectors.background_rate_cps = noise - c.detectors.dark_rate_cps;
    }

    const auto streams = correlation::detect(record, c.detectors, c.lines_a, c.lines_b, qd::derive_seed(rc.seed, 20));
    auto hist = correlation::correlate(streams, c.window_ns, c.bin_ns, rc.threads);
    hist.mode = c.lines_a == c.lines_b ? correlation::CorrelationMode::Auto : correlation::CorrelationMode::Cross;
    hist.lines_a = c.lines_a;
    hist.lines_b = c.lines_b;
    files.write("histogram.csv", [&](std::ostream& os) { correlation::write_csv(os, hist); });
    if (c.write_events) files.write("events.csv", [&](std::ostream& os) { qd::write_csv(os, record); });

    const double signal_cps = static_cast<double>(streams.signal_a) / duration_s;
    const double closed_form =
        correlation::g2_zero_closed_form(signal_cps, c.detectors.dark_rate_cps, c.detectors.background_rate_cps);

    Json j = header(rc);
    j["mode"] = hist.mode == correlation::CorrelationMode::Auto ? "auto" : "cross";
    j["lines_a"] = lines_json(c.lines_a);
    j["lines_b"] = lines_json(c.lines_b);
    Json s;
    s["kind"] = src.is_laser ? "laser" : "quantum_dot";
    s["pulsed"] = src.pulsed();
    if (src.pulsed()) s["repetition_rate_mhz"] = src.repetition_rate_mhz();
    s["duration_ns"] = record.duration_ns;
    s["emitted"] = line_counts(record);
    j["source"] = s;
    j["detectors"] = {{"efficiency", c.detectors.efficiency},
                      {"dark_rate_cps", c.detectors.dark_rate_cps},
                      {"background_rate_cps", c.detectors.background_rate_cps},
                      {"timing_jitter_ps", c.detectors.timing_jitter_ps},
                      {"splitter_ratio", c.detectors.splitter_ratio},
                      {"dead_time_ns", c.detectors.dead_time_ns}};
    j["detections"] = {{"arm_a", streams.a.size()},
                       {"arm_b", streams.b.size()},
                       {"signal_a", streams.signal_a},
                       {"signal_b", streams.signal_b}};
    j["rates_cps"] = {{"signal", signal_cps},
                      {"dark", c.detectors.dark_rate_cps},
                      {"background", c.detectors.background_rate_cps}};
    j["correlation"] = {{"window_ns", hist.window_ns}, {"bin_ns", hist.bin_ns}, {"coincidences", hist.total()}};

    correlation::Estimate g2{};
    std::string method;
    if (src.pulsed()) {
        const auto areas = correlation::peak_area_analysis(hist, src.repetition_rate_mhz(), c.m_far, c.peak_window_ns);
        files.write("peak_areas.csv", [&](std::ostream& os) { correlation::write_csv(os, areas); });
        g2 = {areas.area_at(0), areas.error_at(0)};
        method = "central_peak_area";
        Json near = Json::array();
        for (int m = -3; m <= 3; ++m) {
            near.push_back({{"m", m}, {"area", areas.area_at(m)}, {"standard_error", areas.error_at(m)}});
        }
        j["peak_areas"] = {{"m_far", areas.m_far},
                           {"window_ns", areas.window_ns},
                           {"normalization", areas.normalization},
                           {"near", near}};
        out << "peak areas:";
        for (int m = -3; m <= 3; ++m) out << " [" << m << "] " << format("%.3f", areas.area_at(m));
        out << '\n';
    } else {
        g2 = correlation::g2_at_zero(hist);
        method = "zero_delay_bin";
    }
    j["g2_zero"] = {{"estimate", g2.value}, {"standard_error", g2.standard_error}, {"method", method}};
    j["g2_zero_closed_form"] = closed_form;
    out << "g2(0) estimate " << format("%.4f", g2.value) << " +/- " << format("%.4f", g2.standard_error) << " ("
        << method << "), closed form " << format("%.4f", closed_form) << '\n';

    if (!src.is_laser && src.pulsed()) {
        Json per_period;
        for (auto l : {qd::Line::X, qd::Line::X2, qd::Line::Charged}) {
            per_period[std::string(qd::to_string(l))] = qd::photons_per_period(record, src.drive, l);
        }
        j["photons_per_period"] = per_period;
    }
    if (c.decay) {
        const auto& d = *c.decay;
        const auto profile = qd::decay_profile(record, src.drive, d.line, d.bin_ps);
        files.write("decay_profile.csv", [&](std::ostream& os) {
            os.precision(12);
            os << "t_ns,counts\n";
            for (std::size_t i = 0; i < profile.counts.size(); ++i) {
                os << profile.bin_centre(i) << ',' << profile.counts[i] << '\n';
            }
        });
        const auto fit = qd::fit_decay(profile, d.fit_start_ns, d.fit_end_ns);
        j["decay_fit"] = {{"line", std::string(qd::to_string(d.line))},
                          {"fit_start_ns", d.fit_start_ns},
                          {"fit_end_ns", d.fit_end_ns},
                          {"tau_ns", fit.tau_ns},
                          {"standard_error_ns", fit.standard_error_ns},
                          {"events", fit.events}};
        out << "fitted decay time (" << qd::to_string(d.line) << ") " << format("%.4f", fit.tau_ns) << " +/- "
            << format("%.4f", fit.standard_error_ns) << " ns\n";
    }
    files.summary(j, out);
}

void run_throughput(const RunConfig& rc, Outputs& files, std::ostream& out) {
    const auto& c = *rc.throughput;
    const double ratio = qd::throughput_ratio(c.collection_gain, c.rate_gain, c.qe_factor);
    Json j = header(rc);
    Json rate = {{"value", c.rate_gain}, {"source", c.rate_source}};
    if (c.rate_source == "repetition_rates") {
        rate["repetition_rate_mhz"] = c.repetition_rate_mhz;
        rate["reference_rate_mhz"] = c.reference_rate_mhz;
    }
    Json qe = {{"value", c.qe_factor}, {"source", c.qe_source}};
    if (c.qe_source == "truncation") {
        qe["emission_window_ns"] = c.emission_window_ns;
        qe["lifetime_ns"] = c.lifetime_ns;
    }
    j["factors"] = {{"collection_gain", {{"value", c.collection_gain}, {"source", "given"}}},
                    {"rate_gain", rate},
                    {"qe_factor", qe}};
    j["throughput_ratio"] = ratio;
    out << "collection gain:   " << format("%.6g", c.collection_gain) << '\n';
    out << "rate gain:         " << format("%.6g", c.rate_gain) << '\n';
    out << "QE factor:         " << format("%.6g", c.qe_factor) << '\n';
    out << "throughput ratio:  " << format("%.4g", ratio) << '\n';
    files.summary(j, out);
}

Json load_document(const Options& o) {
    if (!o.preset.empty()) {
        const auto& all = presets();
        const auto it = std::find_if(all.begin(), all.end(), [&](const Preset& p) { return p.name == o.preset; });
        if (it == all.end()) {
            std::string names;
            for (const auto& p : all) names += (names.empty() ? "" : ", ") + std::string(p.name);
            throw ConfigError("unknown preset '" + o.preset + "' (available: " + names + ")");
        }
        return Json::parse(it->json);
    }
    std::ifstream in(o.config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + o.config_path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config file '" + o.config_path + "' is not valid JSON: " + e.what());
    }
}

int execute(const std::string& command, const Options& o, std::ostream& out) {
    const Json doc = load_document(o);
    auto rc = parse_config(doc, command);
    rc.preset = o.preset;
    if (o.seed) rc.seed = *o.seed;
    if (o.threads) rc.threads = o.threads;

    Outputs files(o.out_dir);
    if (command == "emission-pattern") run_emission_pattern(rc, files, out);
    if (command == "cavity-sweep") run_cavity_sweep(rc, files, out);
    if (command == "hbt" || command == "cross-corr") run_hbt(rc, files, out);
    if (command == "throughput") run_throughput(rc, files, out);
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Single-photon-emitting-diode design simulator", "speds"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Options o;
    bool list_presets = false;
    app.add_flag("--list-presets", list_presets, "List the built-in presets and exit");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"emission-pattern", "Angular emission pattern and collection efficiency of a dipole in a planar cavity"},
        {"cavity-sweep", "Collection efficiency versus Bragg-mirror periods"},
        {"hbt", "Quantum-dot source, detectors and auto-correlation with peak-area analysis"},
        {"cross-corr", "Cross-correlation between two emission lines"},
        {"throughput", "Single-photon throughput gain from its factors"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        auto* cfg = sub->add_option("--config", o.config_path, "JSON configuration file");
        auto* pre = sub->add_option("--preset", o.preset, "Built-in preset name");
        cfg->excludes(pre);
        sub->add_option("--seed", o.seed, "Random seed (overrides the config)");
        sub->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        if (std::find(args.begin(), args.end(), "--list-presets") != args.end()) {
            for (const auto& p : presets()) {
                const auto cmd = Json::parse(p.json).value("command", std::string("?"));
                out << p.name << "  (" << cmd << ")\n";
            }
            return kSuccess;
        }
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    if (o.config_path.empty() == o.preset.empty()) {
        err << "speds " << command << ": give exactly one of --config or --preset\n";
        return kUsageError;
    }
    try {
        return execute(command, o, out);
    } catch (const ConfigError& e) {
        err << "speds " << command << ": " << e.what() << '\n';
        return kUsageError;
    } catch (const InvalidInput& e) {
        err << "speds " << command << ": invalid input: " << e.what() << '\n';
        return kUsageError;
    } catch (const UnsupportedInput& e) {
        err << "speds " << command << ": unsupported input: " << e.what() << '\n';
        return kUsageError;
    } catch (const NumericalFailure& e) {
        err << "speds " << command << ": numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "speds " << command << ": internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

}  // namespace speds::cli
