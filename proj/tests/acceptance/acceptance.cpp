// One line per acceptance criterion; exit status 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles/optics_oracle.hpp"
#include "cli.hpp"
#include "config.hpp"
#include "speds/cavity.hpp"
#include "speds/correlation.hpp"
#include "speds/dipole.hpp"
#include "speds/multilayer.hpp"
#include "speds/qd_source.hpp"

namespace fs = std::filesystem;
using namespace speds;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [not met]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

cli::RunConfig preset(const std::string& name) {
    for (const auto& p : cli::presets()) {
        if (p.name == name) {
            const auto doc = cli::Json::parse(p.json);
            return cli::parse_config(doc, doc.at("command").get<std::string>());
        }
    }
    throw std::runtime_error("missing preset " + name);
}

struct HbtRun {
    correlation::DetectionStreams streams;
    correlation::CorrelationHistogram histogram;
    qd::EmissionRecord record;
};

// Same pipeline as the hbt command, including noise matching.
HbtRun run_hbt(cli::HbtConfig c, std::uint64_t seed) {
    HbtRun out;
    const auto& src = c.source;
    out.record = src.is_laser ? qd::simulate_laser(src.laser, qd::derive_seed(seed, 10))
                              : qd::simulate(src.model, src.drive, qd::derive_seed(seed, 10));
    if (c.noise_to_signal) {
        std::size_t photons = 0;
        for (const auto& e : out.record.events) {
            if (std::find(c.lines_a.begin(), c.lines_a.end(), e.line) != c.lines_a.end()) ++photons;
        }
        const double rs = static_cast<double>(photons) * c.detectors.efficiency * c.detectors.splitter_ratio /
                          (out.record.duration_ns * 1e-9);
        c.detectors.background_rate_cps = *c.noise_to_signal * rs - c.detectors.dark_rate_cps;
    }
    out.streams = correlation::detect(out.record, c.detectors, c.lines_a, c.lines_b, qd::derive_seed(seed, 20));
    out.histogram = correlation::correlate(out.streams, c.window_ns, c.bin_ns);
    return out;
}

std::pair<double, double> region(const correlation::CorrelationHistogram& h, double lo, double hi) {
    double c = 0.0, e = 0.0;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double t = h.bin_centre(i);
        if (t < lo || t > hi) continue;
        c += static_cast<double>(h.counts[i]);
        e += h.poisson_expectation(i);
    }
    return {c, e};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int code = cli::run(args, o, e);
    if (out) *out = o.str();
    return code;
}

bool same_tree(const fs::path& a, const fs::path& b) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++n;
        if (slurp(e.path()) != slurp(b / e.path().filename())) return false;
    }
    std::size_t m = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++m;
    return n == m && n > 0;
}

Verdict bare_surface() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const double analytic = dipole::analytic_no_cavity_efficiency(3.5, 0.5);
    const double closed = oracle::no_cavity_efficiency(3.5, 0.5);
    const auto c = preset("fig6a_no_cavity").emission_pattern.value();
    const auto s = dipole::emission_pattern(c.geometry, c.angular_resolution_deg);
    const double numeric = dipole::collection_efficiency(s, 0.5);
    const double elapsed = seconds_since(t0);
    v.require(std::abs(100.0 * analytic - 0.5) < 0.05 && std::abs(analytic - closed) < 1e-4,
              fmt("closed form %.3f%% (oracle %.3f%%)", 100.0 * analytic, 100.0 * closed));
    v.require(std::abs(numeric - analytic) < 0.1 * analytic, fmt("numeric pattern %.3f%%", 100.0 * numeric));
    v.require(elapsed < 10.0, fmt("%.1f s", elapsed));
    return v;
}

Verdict bottom_mirror_sweep() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = cavity::sweep_bottom_mirror(25, {0.5}).front();
    const double elapsed = seconds_since(t0);
    bool monotone = true;
    for (std::size_t n = 3; n < r.efficiencies.size(); ++n) monotone = monotone && r.efficiencies[n] >= r.efficiencies[n - 1];
    const double e12 = r.efficiencies[12], e20 = r.efficiencies[20], e25 = r.efficiencies[25];
    v.require(monotone, "nondecreasing from N = 2");
    v.require(std::abs(e20 - e25) < 0.0005, fmt("|eta(20) - eta(25)| = %.4f pt", 100.0 * std::abs(e20 - e25)));
    v.require(std::abs(e25 - 0.08) <= 0.01, fmt("asymptote %.2f%% (eta(12) %.2f%%)", 100.0 * e25, 100.0 * e12));
    v.require(elapsed < 300.0, fmt("%.1f s", elapsed));
    return v;
}

Verdict cavity_pattern() {
    Verdict v;
    const auto a = preset("fig6a_no_cavity").emission_pattern.value();
    const auto b = preset("fig6b_cavity").emission_pattern.value();
    const auto bare = dipole::emission_pattern(a.geometry, a.angular_resolution_deg);
    const auto cav = dipole::emission_pattern(b.geometry, b.angular_resolution_deg);
    const double eta = dipole::collection_efficiency(cav, 0.5);
    v.require(std::abs(eta - 0.07) <= 0.01, fmt("eta(0.5) = %.2f%%", 100.0 * eta));
    const double down_bare = bare.integrate(150.0, 180.0);
    const double down_cav = cav.integrate(150.0, 180.0);
    v.require(down_bare >= 10.0 * down_cav,
              fmt("power in [150,180] deg: %.4f vs %.4f without mirror (%.1fx suppression, need 10x)", down_cav,
                  down_bare, down_bare / down_cav));
    // power travelling along the layers: guided plus radiated within 5 deg of grazing
    const double side_bare = bare.guided_power + bare.integrate(85.0, 95.0);
    const double side_cav = cav.guided_power + cav.integrate(85.0, 95.0);
    v.require(side_cav > 2.0 * side_bare,
              fmt("in-plane power (guided + [85,95] deg): %.4f vs %.4f without mirror", side_cav, side_bare));
    return v;
}

Verdict top_mirror() {
    Verdict v;
    const auto c = preset("top_mirror_optimum").cavity_sweep.value();
    const auto r = cavity::optimize_top_mirror(c.bottom_periods, c.max_top, c.numerical_aperture);
    const auto bare = preset("fig6a_no_cavity").emission_pattern.value();
    const double eta0 =
        dipole::collection_efficiency(dipole::emission_pattern(bare.geometry, bare.angular_resolution_deg), 0.5);
    const double factor = r.best_efficiency() / eta0;
    v.require(r.best_parameter() == 4, fmt("argmax %.0f top periods", r.best_parameter()));
    v.require(std::abs(r.best_efficiency() - 0.118) <= 0.015, fmt("eta = %.2f%%", 100.0 * r.best_efficiency()));
    v.require(std::abs(factor - 24.0) <= 4.0, fmt("improvement %.1fx", factor));
    return v;
}

Verdict noise_formula() {
    Verdict v;
    auto base = preset("dc_eq1_075").hbt.value();
    int within = 0;
    double worst = 0.0;
    std::string items;
    for (double x : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const auto t0 = std::chrono::steady_clock::now();
        auto c = base;
        c.noise_to_signal = x;
        const auto r = run_hbt(c, 1000 + static_cast<std::uint64_t>(x * 100));
        const double d_s = r.record.duration_ns * 1e-9;
        const double rs = static_cast<double>(r.streams.signal_a) / d_s;
        const double noise = static_cast<double>(r.streams.a.size() - r.streams.signal_a) / d_s;
        const double closed = correlation::g2_zero_closed_form(rs, noise, 0.0);
        const auto g = correlation::g2_at_zero(r.histogram);
        const double z = std::abs(g.value - closed) / g.standard_error;
        within += z < 3.0;
        worst = std::max(worst, seconds_since(t0));
        items += fmt(" %.3f/%.3f", g.value, closed);
    }
    v.require(within == 5, "DC settings measured/closed:" + items);
    v.require(worst < 120.0, fmt("slowest setting %.1f s", worst));

    const auto pc = preset("fig2_pulsed_011");
    const auto& h = pc.hbt.value();
    const auto r = run_hbt(h, pc.seed);
    const auto areas = correlation::peak_area_analysis(r.histogram, h.source.repetition_rate_mhz(), h.m_far);
    v.require(std::abs(areas.area_at(0) - 0.11) < 3.0 * areas.error_at(0),
              fmt("pulsed noise-matched central peak %.3f +/- %.3f (target 0.11)", areas.area_at(0),
                  areas.error_at(0)));
    return v;
}

Verdict cascade_and_exclusion() {
    Verdict v;
    const auto cc = preset("fig7c_cascade");
    const auto cas = run_hbt(cc.hbt.value(), cc.seed).histogram;
    const auto [cp, ep] = region(cas, 0.05, 1.5);
    const auto [cn, en] = region(cas, -1.5, -0.05);
    v.require(cp > ep + 3.0 * std::sqrt(ep), fmt("cascade tau>0: g2 %.2f", cp / ep));
    v.require(cn < en - 3.0 * std::sqrt(en), fmt("cascade tau<0: g2 %.2f", cn / en));

    const auto ce = preset("fig7d_exclusion");
    const auto exc = run_hbt(ce.hbt.value(), ce.seed).histogram;
    const auto [xp, yp] = region(exc, 0.0, 0.3);
    const auto [xn, yn] = region(exc, -0.3, 0.0);
    v.require(xp < yp - 3.0 * std::sqrt(yp) && xn < yn - 3.0 * std::sqrt(yn),
              fmt("exclusion dip on both sides of zero: g2 %.2f (tau>0) %.2f (tau<0)", xp / yp, xn / yn));
    return v;
}

Verdict sweep_out_timing() {
    Verdict v;
    const auto c8 = preset("fig8_conventional");
    const auto& h = c8.hbt.value();
    const auto rec = qd::simulate(h.source.model, h.source.drive, qd::derive_seed(c8.seed, 10));
    const auto& d = h.decay.value();
    const auto fit = qd::fit_decay(qd::decay_profile(rec, h.source.drive, d.line, d.bin_ps), d.fit_start_ns, d.fit_end_ns);
    v.require(std::abs(fit.tau_ns - 2.1) <= 0.05 * 2.1, fmt("fitted decay %.3f +/- %.3f ns", fit.tau_ns, fit.standard_error_ns));

    const auto low = preset("fig8_low_jitter").hbt.value();
    auto ratio = [&](qd::QDModel m, qd::Line line) {
        auto open = low.source.drive;
        open.sweep_out = qd::SweepOutRegime::None;
        open.emission_window_ns = 0.0;
        m.shelve_probability = 0.0;
        const auto a = qd::simulate(m, open, 91);
        const auto b = qd::simulate(m, low.source.drive, 92);
        return qd::photons_per_period(b, low.source.drive, line) / qd::photons_per_period(a, open, line);
    };
    auto single = low.source.model;
    single.max_excitons = 1;
    const double rx = ratio(single, qd::Line::X);
    const double rx2 = ratio(low.source.model, qd::Line::X2);
    const double window = low.source.drive.emission_window_ns;
    v.require(std::abs(rx - 0.20) <= 0.02,
              fmt("exciton yield ratio %.3f (closed form %.3f)", rx, qd::truncation_factor(window, 2.1)));
    v.require(std::abs(rx2 - 0.5) <= 0.05,
              fmt("biexciton yield ratio %.3f (closed form %.3f)", rx2, qd::truncation_factor(window, 0.68)));
    return v;
}

Verdict shelving_control() {
    Verdict v;
    for (const char* name : {"fig10_shelving_500mhz", "fig10_full_reset_500mhz"}) {
        const auto c = preset(name);
        const auto& h = c.hbt.value();
        const auto r = run_hbt(h, c.seed);
        const auto a = correlation::peak_area_analysis(r.histogram, h.source.repetition_rate_mhz(), h.m_far,
                                                       h.peak_window_ns);
        if (h.source.drive.sweep_out == qd::SweepOutRegime::None) {
            bool ok = true;
            for (int m : {-2, -1, 1, 2}) ok = ok && a.area_at(m) < 0.9;
            v.require(ok, fmt("no sweep-out: areas at m=1,2: %.3f %.3f (mirror %.3f)", a.area_at(1), a.area_at(2),
                              a.area_at(-1)));
        } else {
            double worst = 0.0;
            for (int m = 1; m < h.m_far; ++m) {
                worst = std::max({worst, std::abs(a.area_at(m) - 1.0), std::abs(a.area_at(-m) - 1.0)});
            }
            v.require(worst < 0.05, fmt("full reset: largest side-peak deviation %.3f", worst));
        }
    }
    return v;
}

Verdict throughput() {
    Verdict v;
    const auto dir = fs::temp_directory_path() / "speds_acceptance_throughput";
    std::string out;
    const int code = run_cli({"throughput", "--preset", "throughput_nominal", "--out", dir.string()}, &out);
    fs::remove_all(dir);
    const bool itemized = out.find("collection gain:   10\n") != std::string::npos &&
                          out.find("rate gain:         13.4\n") != std::string::npos &&
                          out.find("QE factor:         0.5\n") != std::string::npos;
    const bool prints67 = out.find("throughput ratio:  67\n") != std::string::npos;
    const double ratio = qd::throughput_ratio(10.0, 13.4, 0.5);
    v.require(code == 0 && itemized, "factors itemized");
    v.require(prints67, fmt("prints %.4g", ratio));
    v.require(std::abs(ratio - 65.0) <= 0.05 * 65.0, fmt("%.1f%% from 65", 100.0 * std::abs(ratio - 65.0) / 65.0));
    return v;
}

Verdict determinism_and_conservation() {
    Verdict v;
    const auto root = fs::temp_directory_path() / "speds_acceptance_determinism";
    fs::remove_all(root);
    bool identical = true;
    for (const auto& [cmd, name] : std::vector<std::pair<std::string, std::string>>{
             {"hbt", "fig9_1ghz"}, {"cross-corr", "fig7d_exclusion"}, {"emission-pattern", "fig6b_cavity"}}) {
        const auto a = root / (name + "_a"), b = root / (name + "_b");
        identical = identical && run_cli({cmd, "--preset", name, "--out", a.string(), "--threads", "1"}) == 0 &&
                    run_cli({cmd, "--preset", name, "--out", b.string()}) == 0 && same_tree(a, b);
    }
    fs::remove_all(root);
    const auto c = preset("fig9_1ghz").hbt.value();
    identical = identical && qd::simulate(c.source.model, c.source.drive, 5) == qd::simulate(c.source.model, c.source.drive, 5);
    v.require(identical, "byte-identical reruns");

    auto stack = optics::build_bragg({3.5, 0.0}, {2.95, 0.0}, 900.0, 12);
    stack.entry_index = {3.5, 0.0};
    stack.exit_index = {1.0, 0.0};
    stack.layers.push_back({137.0, {3.5, 0.0}});
    double worst = 0.0;
    int points = 0;
    for (auto pol : {optics::Polarization::TE, optics::Polarization::TM}) {
        for (int i = 0; i < 50; ++i) {
            const double theta = 89.0 * i / 49.0 * M_PI / 180.0;
            const auto p = optics::power_coefficients(stack, optics::PlaneWaveQuery::at_angle(900.0, 3.5, theta, pol));
            worst = std::max(worst, std::abs(p.reflectance + p.transmittance - 1.0));
            ++points;
        }
    }
    v.require(points == 100 && worst < 1e-10, fmt("max |R+T-1| = %.1e over %.0f points", worst, points));

    const auto s = dipole::emission_pattern(dipole::homogeneous_geometry({3.5, 0.0}, 900.0), 0.5);
    v.require(std::abs(s.total_power - 1.0) < 1e-4, fmt("free dipole power %.7f", s.total_power));
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"bare-surface efficiency, closed form and numeric", bare_surface},
        {"bottom-mirror sweep saturates near 8%", bottom_mirror_sweep},
        {"12-period mirror pattern", cavity_pattern},
        {"top-mirror optimum", top_mirror},
        {"noise-diluted zero-delay coincidences", noise_formula},
        {"cascade and exclusion signatures", cascade_and_exclusion},
        {"decay fit and sweep-out yield", sweep_out_timing},
        {"shelving versus full reset side peaks", shelving_control},
        {"throughput arithmetic", throughput},
        {"determinism and conservation", determinism_and_conservation},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        failures += !v.pass;
        std::printf("criterion %2zu %s  %s: %s (%.1f s)\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    v.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
