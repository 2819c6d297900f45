#include "config.hpp"

#include <cmath>
#include <set>
#include <utility>

#include "speds/error.hpp"

namespace speds::cli {

namespace {

// Typed access to one JSON object; remembers which keys were read so that
// unknown keys can be reported.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "expected a JSON object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key, double fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(key, "expected a finite number");
        return x;
    }

    std::optional<double> optional_number(const std::string& key) {
        if (!has(key)) {
            take(key);
            return std::nullopt;
        }
        return number(key, 0.0);
    }

    long long integer(const std::string& key, long long fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<long long>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
            fail(key, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) fail(key, "expected a non-empty array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    optics::Complex index(const std::string& key, optics::Complex fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (v.is_number()) return {v.get<double>(), 0.0};
        if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
            return {v[0].get<double>(), v[1].get<double>()};
        }
        fail(key, "expected a number or a [real, imag] pair");
    }

    std::vector<qd::Line> lines(const std::string& key, std::vector<qd::Line> fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        std::vector<qd::Line> out;
        auto one = [&](const Json& x) {
            if (!x.is_string()) fail(key, "expected a line name or an array of line names");
            try {
                out.push_back(qd::parse_line(x.get<std::string>()));
            } catch (const InvalidInput& e) {
                fail(key, e.what());
            }
        };
        if (v.is_array()) {
            for (const auto& x : v) one(x);
        } else {
            one(v);
        }
        if (out.empty()) fail(key, "expected at least one line");
        return out;
    }

    Reader child(const std::string& key) {
        take(key);
        if (!has(key)) fail(key, "missing object");
        return Reader(j_.at(key), join(key));
    }

    const Json& raw(const std::string& key) {
        take(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) fail(key, "unknown field");
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError("config field '" + join(key) + "': " + what);
    }

    [[nodiscard]] std::string join(const std::string& key) const {
        if (key.empty()) return path_.empty() ? std::string("<root>") : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    bool take(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Runs a module validator and reports its message against a config path.
template <class Fn>
void check(const std::string& path, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        throw ConfigError("config field '" + path + "': " + e.what());
    }
}

optics::LayerStack parse_stack(Reader r, optics::Complex host) {
    optics::LayerStack s;
    s.entry_index = host;
    s.exit_index = r.index("exit_index", host);
    if (r.has("layers")) {
        const auto& layers = r.raw("layers");
        if (!layers.is_array()) r.fail("layers", "expected an array");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Reader l(layers[i], r.join("layers") + "[" + std::to_string(i) + "]");
            optics::Layer layer;
            layer.thickness_nm = l.number("thickness_nm", 0.0);
            layer.refractive_index = l.index("index", {0.0, 0.0});
            l.finish();
            s.layers.push_back(layer);
        }
    }
    r.finish();
    return s;
}

cavity::CavityDesign parse_design(Reader& r) {
    cavity::CavityDesign d;
    d.bottom_periods = static_cast<int>(r.integer("bottom_periods", d.bottom_periods));
    d.top_periods = static_cast<int>(r.integer("top_periods", d.top_periods));
    d.cavity_order = r.number("cavity_order", d.cavity_order);
    d.dipole_depth_below_surface = r.number("dipole_depth_below_surface", d.dipole_depth_below_surface);
    d.numerical_aperture = r.number("numerical_aperture", d.numerical_aperture);
    d.design_wavelength_nm = r.number("design_wavelength_nm", d.design_wavelength_nm);
    d.n_high = r.number("n_high", d.n_high);
    d.n_low = r.number("n_low", d.n_low);
    return d;
}

double parse_resolution(Reader& r) {
    const double res = r.number("angular_resolution_deg", 0.5);
    if (!(res > 0.0 && res <= 0.5)) r.fail("angular_resolution_deg", "must lie in (0, 0.5]");
    return res;
}

void check_apertures(Reader& r, const std::string& key, const std::vector<double>& nas) {
    for (double na : nas) {
        if (!(na > 0.0 && na <= 1.0)) r.fail(key, "numerical apertures must lie in (0, 1]");
    }
}

EmissionPatternConfig parse_emission_pattern(Reader& root) {
    EmissionPatternConfig c;
    c.angular_resolution_deg = parse_resolution(root);
    c.numerical_apertures = root.numbers("numerical_apertures", c.numerical_apertures);
    check_apertures(root, "numerical_apertures", c.numerical_apertures);

    auto g = root.child("geometry");
    c.geometry_kind = g.string("kind", "cavity");
    if (c.geometry_kind == "cavity") {
        auto d = parse_design(g);
        g.finish();
        check(g.join(""), [&] { d.validate(); });
        c.design = d;
        c.geometry = cavity::to_geometry(d);
    } else if (c.geometry_kind == "custom") {
        auto& src = c.geometry.source;
        src.vacuum_wavelength_nm = g.number("wavelength_nm", optics::materials::kDesignWavelengthNm);
        src.host_index = g.index("host_index", {optics::materials::kGaAs, 0.0});
        src.distance_to_upper_stack_nm = g.number("distance_to_upper_nm", 0.0);
        src.distance_to_lower_stack_nm = g.number("distance_to_lower_nm", 0.0);
        c.geometry.upper = g.has("upper") ? parse_stack(g.child("upper"), src.host_index)
                                          : optics::LayerStack{src.host_index, {}, src.host_index};
        c.geometry.lower = g.has("lower") ? parse_stack(g.child("lower"), src.host_index)
                                          : optics::LayerStack{src.host_index, {}, src.host_index};
        g.finish();
        check(g.join(""), [&] { dipole::validate(c.geometry); });
    } else {
        g.fail("kind", "expected \"cavity\" or \"custom\"");
    }
    return c;
}

CavitySweepConfig parse_cavity_sweep(Reader& root) {
    CavitySweepConfig c;
    const auto kind = root.string("sweep", "bottom_mirror");
    c.angular_resolution_deg = parse_resolution(root);
    if (kind == "bottom_mirror") {
        c.kind = CavitySweepConfig::Kind::BottomMirror;
        c.max_periods = static_cast<int>(root.integer("max_periods", c.max_periods));
        if (c.max_periods < 1) root.fail("max_periods", "must be >= 1");
        if (c.max_periods < 12) root.fail("max_periods", "the bottom-mirror sweep needs max_periods >= 12");
        c.numerical_apertures = root.numbers("numerical_apertures", c.numerical_apertures);
        check_apertures(root, "numerical_apertures", c.numerical_apertures);
    } else if (kind == "top_mirror") {
        c.kind = CavitySweepConfig::Kind::TopMirror;
        c.bottom_periods = static_cast<int>(root.integer("bottom_periods", c.bottom_periods));
        if (c.bottom_periods < 0) root.fail("bottom_periods", "must be >= 0");
        c.max_top = static_cast<int>(root.integer("max_top", c.max_top));
        if (c.max_top < 1) root.fail("max_top", "must be >= 1");
        c.numerical_aperture = root.number("numerical_aperture", c.numerical_aperture);
        check_apertures(root, "numerical_aperture", {c.numerical_aperture});
    } else {
        root.fail("sweep", "expected \"bottom_mirror\" or \"top_mirror\"");
    }
    return c;
}

qd::QDModel parse_model(Reader r) {
    qd::QDModel m;
    m.tau_x_ns = r.number("tau_x_ns", m.tau_x_ns);
    m.tau_x2_ns = r.number("tau_x2_ns", m.tau_x2_ns);
    m.capture_rate_per_ns = r.number("capture_rate_per_ns", m.capture_rate_per_ns);
    m.shelve_probability = r.number("shelve_probability", m.shelve_probability);
    m.unshelve_rate_per_ns = r.number("unshelve_rate_per_ns", m.unshelve_rate_per_ns);
    m.sweep_rate_per_ns = r.number("sweep_rate_per_ns", m.sweep_rate_per_ns);
    m.max_excitons = static_cast<int>(r.integer("max_excitons", m.max_excitons));
    m.charged_lifetime_ns = r.number("charged_lifetime_ns", m.charged_lifetime_ns);
    r.finish();
    check(r.join(""), [&] { m.validate(); });
    return m;
}

qd::DriveProgram parse_drive(Reader r) {
    qd::DriveProgram d;
    const auto mode = r.string("mode", "pulsed");
    if (mode == "dc") {
        d.mode = qd::DriveMode::DC;
    } else if (mode == "pulsed") {
        d.mode = qd::DriveMode::Pulsed;
    } else {
        r.fail("mode", "expected \"dc\" or \"pulsed\"");
    }
    d.repetition_rate_mhz = r.number("repetition_rate_mhz", d.repetition_rate_mhz);
    d.pulse_width_ps = r.number("pulse_width_ps", d.pulse_width_ps);
    try {
        d.sweep_out = qd::parse_regime(r.string("sweep_out", "none"));
    } catch (const InvalidInput& e) {
        r.fail("sweep_out", e.what());
    }
    d.emission_window_ns = r.number("emission_window_ns", d.emission_window_ns);
    d.duration_ns = r.number("duration_ns", d.duration_ns);
    r.finish();
    check(r.join(""), [&] { d.validate(); });
    return d;
}

SourceConfig parse_source(Reader r) {
    SourceConfig s;
    const auto kind = r.string("kind", "quantum_dot");
    if (kind == "quantum_dot") {
        s.model = parse_model(r.child("model"));
        s.drive = parse_drive(r.child("drive"));
    } else if (kind == "laser") {
        s.is_laser = true;
        auto& l = s.laser;
        l.repetition_rate_mhz = r.number("repetition_rate_mhz", l.repetition_rate_mhz);
        l.mean_photons_per_pulse = r.number("mean_photons_per_pulse", l.mean_photons_per_pulse);
        l.pulse_width_ps = r.number("pulse_width_ps", l.pulse_width_ps);
        l.duration_ns = r.number("duration_ns", l.duration_ns);
        check(r.join(""), [&] { l.validate(); });
    } else {
        r.fail("kind", "expected \"quantum_dot\" or \"laser\"");
    }
    r.finish();
    return s;
}

correlation::DetectorPair parse_detectors(Reader r) {
    correlation::DetectorPair d;
    d.efficiency = r.number("efficiency", d.efficiency);
    d.dark_rate_cps = r.number("dark_rate_cps", d.dark_rate_cps);
    d.background_rate_cps = r.number("background_rate_cps", d.background_rate_cps);
    d.timing_jitter_ps = r.number("timing_jitter_ps", d.timing_jitter_ps);
    d.splitter_ratio = r.number("splitter_ratio", d.splitter_ratio);
    d.dead_time_ns = r.number("dead_time_ns", d.dead_time_ns);
    r.finish();
    check(r.join(""), [&] { d.validate(); });
    return d;
}

HbtConfig parse_hbt(Reader& root, bool cross) {
    HbtConfig c;
    c.source = parse_source(root.child("source"));
    c.detectors = root.has("detectors") ? parse_detectors(root.child("detectors")) : correlation::DetectorPair{};

    if (root.has("noise_matching")) {
        auto n = root.child("noise_matching");
        const auto ratio = n.optional_number("noise_to_signal");
        const auto target = n.optional_number("target_g2");
        n.finish();
        if (ratio.has_value() == target.has_value()) {
            n.fail("", "give exactly one of noise_to_signal or target_g2");
        }
        if (ratio) {
            if (!(*ratio >= 0.0)) n.fail("noise_to_signal", "must be >= 0");
            c.noise_to_signal = *ratio;
        } else {
            if (!(*target >= 0.0 && *target < 1.0)) n.fail("target_g2", "must lie in [0, 1)");
            c.noise_to_signal = correlation::noise_to_signal_for_g2(*target);
        }
    }

    if (cross) {
        c.lines_a = root.lines("line_a", {qd::Line::X2});
        c.lines_b = root.lines("line_b", {qd::Line::X});
    } else {
        c.lines_a = root.lines("lines", {qd::Line::X});
        c.lines_b = c.lines_a;
    }

    const bool pulsed = c.source.pulsed();
    const double period = pulsed ? 1e3 / c.source.repetition_rate_mhz() : 0.0;
    if (root.has("correlation")) {
        auto k = root.child("correlation");
        c.window_ns = k.number("window_ns", 0.0);
        c.bin_ns = k.number("bin_ns", 0.0);
        k.finish();
        if (c.window_ns < 0.0) k.fail("window_ns", "must be > 0");
        if (c.bin_ns < 0.0) k.fail("bin_ns", "must be > 0");
    }
    if (c.window_ns == 0.0) c.window_ns = pulsed ? 50.0 * period : 100.0;
    if (c.bin_ns == 0.0) c.bin_ns = c.window_ns / 1000.0;
    if (c.bin_ns > c.window_ns / 50.0 * (1.0 + 1e-12)) {
        root.fail("correlation.bin_ns", "must be <= window_ns / 50");
    }

    if (root.has("peak_areas")) {
        auto p = root.child("peak_areas");
        c.m_far = static_cast<int>(p.integer("m_far", c.m_far));
        c.peak_window_ns = p.number("window_ns", 0.0);
        p.finish();
        if (c.m_far < 1) p.fail("m_far", "must be >= 1");
        if (pulsed && c.peak_window_ns > period * (1.0 + 1e-12)) {
            p.fail("window_ns", "exceeds the period, so peak windows would overlap");
        }
        if (c.peak_window_ns < 0.0) p.fail("window_ns", "must be >= 0");
    }
    if (pulsed) {
        const double w = c.peak_window_ns > 0.0 ? c.peak_window_ns : period;
        if (c.window_ns < c.m_far * period + 0.5 * w) {
            root.fail("correlation.window_ns", "must reach peak m_far (>= (m_far + 0.5) periods)");
        }
    }
    if (c.window_ns >= c.source.duration_ns()) root.fail("correlation.window_ns", "must be shorter than the run");

    if (root.has("decay")) {
        auto d = root.child("decay");
        DecayConfig dc;
        const auto ls = d.lines("line", {qd::Line::X});
        if (ls.size() != 1) d.fail("line", "expected a single line");
        dc.line = ls.front();
        dc.bin_ps = d.number("bin_ps", dc.bin_ps);
        dc.fit_start_ns = d.number("fit_start_ns", dc.fit_start_ns);
        dc.fit_end_ns = d.number("fit_end_ns", dc.fit_end_ns);
        d.finish();
        if (!pulsed || c.source.is_laser) d.fail("", "decay analysis needs a pulsed quantum-dot source");
        if (!(dc.bin_ps > 0.0)) d.fail("bin_ps", "must be > 0");
        if (dc.fit_end_ns == 0.0) dc.fit_end_ns = period;
        if (!(dc.fit_start_ns >= 0.0 && dc.fit_end_ns > dc.fit_start_ns && dc.fit_end_ns <= period + 1e-9)) {
            d.fail("", "need 0 <= fit_start_ns < fit_end_ns <= period");
        }
        c.decay = dc;
    }
    c.write_events = root.boolean("write_events", false);
    return c;
}

ThroughputConfig parse_throughput(Reader& root) {
    ThroughputConfig c;
    c.collection_gain = root.number("collection_gain", c.collection_gain);
    if (root.has("rate_gain") && (root.has("repetition_rate_mhz") || root.has("reference_rate_mhz"))) {
        root.fail("rate_gain", "give either rate_gain or repetition_rate_mhz with reference_rate_mhz");
    }
    if (root.has("repetition_rate_mhz") || root.has("reference_rate_mhz")) {
        c.rate_source = "repetition_rates";
        c.repetition_rate_mhz = root.number("repetition_rate_mhz", 0.0);
        c.reference_rate_mhz = root.number("reference_rate_mhz", 0.0);
        if (!(c.repetition_rate_mhz > 0.0)) root.fail("repetition_rate_mhz", "must be > 0");
        if (!(c.reference_rate_mhz > 0.0)) root.fail("reference_rate_mhz", "must be > 0");
        c.rate_gain = c.repetition_rate_mhz / c.reference_rate_mhz;
    } else {
        c.rate_gain = root.number("rate_gain", c.rate_gain);
    }
    if (root.has("qe_factor") && (root.has("emission_window_ns") || root.has("lifetime_ns"))) {
        root.fail("qe_factor", "give either qe_factor or emission_window_ns with lifetime_ns");
    }
    if (root.has("emission_window_ns") || root.has("lifetime_ns")) {
        c.qe_source = "truncation";
        c.emission_window_ns = root.number("emission_window_ns", 0.0);
        c.lifetime_ns = root.number("lifetime_ns", 0.0);
        if (!(c.emission_window_ns > 0.0)) root.fail("emission_window_ns", "must be > 0");
        if (!(c.lifetime_ns > 0.0)) root.fail("lifetime_ns", "must be > 0");
        c.qe_factor = qd::truncation_factor(c.emission_window_ns, c.lifetime_ns);
    } else {
        c.qe_factor = root.number("qe_factor", c.qe_factor);
    }
    for (auto [key, value] : {std::pair{"collection_gain", c.collection_gain}, std::pair{"rate_gain", c.rate_gain},
                              std::pair{"qe_factor", c.qe_factor}}) {
        if (!(value > 0.0)) root.fail(key, "must be > 0");
    }
    return c;
}

}  // namespace

RunConfig parse_config(const Json& document, const std::string& command) {
    Reader root(document, "");
    RunConfig rc;
    rc.command = root.string("command", command);
    if (rc.command != command) {
        root.fail("command", "config is for '" + rc.command + "', not '" + command + "'");
    }
    root.string("description", "");
    rc.seed = root.unsigned_integer("seed", rc.seed);
    rc.threads = static_cast<std::size_t>(root.unsigned_integer("threads", 0));

    if (command == "emission-pattern") {
        rc.emission_pattern = parse_emission_pattern(root);
    } else if (command == "cavity-sweep") {
        rc.cavity_sweep = parse_cavity_sweep(root);
    } else if (command == "hbt") {
        rc.hbt = parse_hbt(root, false);
    } else if (command == "cross-corr") {
        rc.hbt = parse_hbt(root, true);
    } else if (command == "throughput") {
        rc.throughput = parse_throughput(root);
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    root.finish();
    return rc;
}

}  // namespace speds::cli
