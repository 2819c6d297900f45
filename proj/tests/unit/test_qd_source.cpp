#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "../oracles/master_equation.hpp"
#include "../support/stats.hpp"
#include "speds/error.hpp"
#include "speds/qd_source.hpp"

using namespace speds;
using namespace speds::qd;

namespace {

DriveProgram pulsed(double rate_mhz, double width_ps, SweepOutRegime regime, double window_ns, double duration_ns) {
    DriveProgram d;
    d.mode = DriveMode::Pulsed;
    d.repetition_rate_mhz = rate_mhz;
    d.pulse_width_ps = width_ps;
    d.sweep_out = regime;
    d.emission_window_ns = window_ns;
    d.duration_ns = duration_ns;
    return d;
}

DriveProgram dc(double duration_ns) {
    DriveProgram d;
    d.mode = DriveMode::DC;
    d.duration_ns = duration_ns;
    return d;
}

std::vector<bool> emitted_per_period(const EmissionRecord& r, const DriveProgram& d, Line line) {
    std::vector<bool> out(d.periods(), false);
    for (const auto& e : r.events) {
        const auto k = static_cast<std::size_t>(e.time_ns / d.period_ns());
        if (e.line == line && k < out.size()) out[k] = true;
    }
    return out;
}

}  // namespace

TEST_CASE("no capture, no photons") {
    QDModel m;
    m.capture_rate_per_ns = 0.0;
    CHECK(simulate(m, pulsed(80, 300, SweepOutRegime::None, 0, 1e4), 1).events.empty());
    CHECK(simulate(m, dc(1e4), 1).events.empty());
}

TEST_CASE("short pulses with full reset give at most one exciton photon per period") {
    QDModel m;
    m.capture_rate_per_ns = 5000.0;
    m.shelve_probability = 0.0;
    const auto d = pulsed(80, 1.0, SweepOutRegime::FullReset, 10.0, 1.25e6);
    const auto r = simulate(m, d, 4);
    std::map<std::size_t, std::vector<double>> per_period;
    for (const auto& e : r.events) {
        if (e.line == Line::X) per_period[static_cast<std::size_t>(e.time_ns / d.period_ns())].push_back(e.time_ns);
    }
    // a second photon needs re-injection, so the first one must fall inside the pulse
    std::size_t doubles = 0;
    for (const auto& [k, times] : per_period) {
        CHECK(times.size() <= 2);
        if (times.size() < 2) continue;
        ++doubles;
        CHECK(times.front() - static_cast<double>(k) * d.period_ns() < d.pulse_width_ns());
    }
    CHECK(per_period.size() > 90000);
    CHECK(doubles < per_period.size() / 1000);
}

TEST_CASE("records are reproducible, ordered and inside the run") {
    const QDModel m;
    const auto d = pulsed(500, 300, SweepOutRegime::None, 0, 2e4);
    const auto a = simulate(m, d, 42);
    const auto b = simulate(m, d, 42);
    const auto c = simulate(m, d, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.duration_ns == d.duration_ns);
    CHECK(std::is_sorted(a.events.begin(), a.events.end(),
                         [](const EmissionEvent& x, const EmissionEvent& y) { return x.time_ns < y.time_ns; }));
    for (const auto& e : a.events) {
        CHECK(e.time_ns >= 0.0);
        CHECK(e.time_ns <= d.duration_ns);
    }
}

TEST_CASE("ensembles do not depend on the thread count") {
    const QDModel m;
    const auto d = pulsed(80, 300, SweepOutRegime::ElectronsOnly, 2.0, 5e3);
    const auto one = simulate_ensemble(m, d, 9, 8, 1);
    const auto many = simulate_ensemble(m, d, 9, 8, 4);
    CHECK(one == many);
    CHECK(one[0] == simulate(m, d, derive_seed(9, 1000)));
    CHECK_FALSE(one[0] == one[1]);
}

TEST_CASE("cascade ordering: each biexciton photon is followed by an exciton photon") {
    QDModel m;
    m.capture_rate_per_ns = 50.0;
    const auto d = pulsed(80, 100, SweepOutRegime::None, 0, 2e5);
    const auto r = simulate(m, d, 21);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < r.events.size(); ++i) {
        if (r.events[i].line != Line::X2) continue;
        std::size_t j = i + 1;
        while (j < r.events.size() && r.events[j].line != Line::X && r.events[j].line != Line::X2) ++j;
        if (j == r.events.size()) continue;
        if (r.events[j].line == Line::X2) {
            // re-excitation X -> X2 needs injection after the first photon
            const double first = r.events[i].time_ns / d.period_ns();
            const double second = r.events[j].time_ns / d.period_ns();
            const double phase = std::fmod(r.events[i].time_ns, d.period_ns());
            CHECK((phase < d.pulse_width_ns() || std::floor(second) > std::floor(first)));
        }
        ++checked;
    }
    CHECK(checked > 10000);
}

TEST_CASE("DC waiting times between exciton photons follow the master equation") {
    const oracle::DotRates rates{2.1, 0.68, 2.0, 0.2, 0.3, 2};
    QDModel m;
    m.tau_x_ns = rates.tau_x_ns;
    m.tau_x2_ns = rates.tau_x2_ns;
    m.capture_rate_per_ns = rates.capture_per_ns;
    m.shelve_probability = rates.shelve_probability;
    m.unshelve_rate_per_ns = rates.unshelve_per_ns;
    const auto r = simulate(m, dc(7e5), 77);

    std::vector<double> waits;
    double last = -1.0;
    for (const auto& e : r.events) {
        if (e.line != Line::X) continue;
        if (last >= 0.0) waits.push_back(e.time_ns - last);
        last = e.time_ns;
    }
    REQUIRE(waits.size() > 100000);

    const double bin = 0.25;
    const std::size_t bins = 160;
    const auto first = oracle::dot_first_emission(rates);
    const auto traj = first.trajectory(oracle::after_x_emission(rates), bin, bins, 50);
    std::vector<double> expected(bins + 1), observed(bins + 1, 0.0);
    const double n = static_cast<double>(waits.size());
    for (std::size_t i = 0; i < bins; ++i) expected[i] = n * (traj[i + 1][oracle::kSink] - traj[i][oracle::kSink]);
    expected[bins] = n * (1.0 - traj[bins][oracle::kSink]);
    for (double w : waits) observed[std::min(bins, static_cast<std::size_t>(w / bin))] += 1.0;

    const auto chi = teststats::pearson(observed, expected);
    CHECK(chi.p_value > 1e-3);

    double mean = 0.0, sq = 0.0;
    for (double w : waits) {
        mean += w;
        sq += w * w;
    }
    mean /= n;
    const double sd = std::sqrt(sq / n - mean * mean);
    const auto full = oracle::dot_generator(rates);
    const auto ss = full.stationary(400.0, 40000);
    const double expected_mean = 1.0 / (ss[oracle::kX] / rates.tau_x_ns);
    CHECK(std::abs(mean - expected_mean) < 3.0 * sd / std::sqrt(n));
}

TEST_CASE("without sweep-out the exciton decay fits the radiative lifetime") {
    QDModel m;
    m.max_excitons = 1;
    m.shelve_probability = 0.0;
    m.capture_rate_per_ns = 100.0;
    const auto d = pulsed(80, 50, SweepOutRegime::None, 0, 2e6);
    const auto r = simulate(m, d, 5);
    const auto profile = decay_profile(r, d, Line::X, 10.0);
    CHECK(profile.total() == r.count(Line::X));
    const auto fit = fit_decay(profile, 1.0, 12.0);
    CHECK(std::abs(fit.tau_ns - 2.1) < 3.0 * fit.standard_error_ns);
    CHECK(std::abs(fit.tau_ns - 2.1) < 0.05 * 2.1);
}

TEST_CASE("decay fit recovers the lifetime of an exact exponential histogram") {
    DecayProfile p;
    p.period_ns = 12.5;
    p.bin_ns = 0.01;
    for (std::size_t i = 0; i < 1250; ++i) {
        p.counts.push_back(static_cast<std::uint64_t>(std::llround(1e6 * std::exp(-p.bin_centre(i) / 1.7))));
    }
    const auto fit = fit_decay(p, 2.0, 10.0);
    CHECK(fit.tau_ns == doctest::Approx(1.7).epsilon(2e-3));
    CHECK(fit.standard_error_ns > 0.0);
    CHECK_THROWS_AS((void)fit_decay(p, 5.0, 4.0), InvalidInput);
    DecayProfile empty = p;
    std::fill(empty.counts.begin(), empty.counts.end(), 0);
    CHECK_THROWS_AS((void)fit_decay(empty, 0.0, 12.0), NumericalFailure);
}

TEST_CASE("full reset truncates emission to the window and scales the yield") {
    QDModel m;
    m.max_excitons = 1;
    m.shelve_probability = 0.0;
    m.capture_rate_per_ns = 100.0;
    m.sweep_rate_per_ns = 1000.0;
    const auto open = pulsed(80, 50, SweepOutRegime::None, 0, 2.5e6);
    const auto cut = pulsed(80, 50, SweepOutRegime::FullReset, 0.47, 2.5e6);
    const auto a = simulate(m, open, 1);
    const auto b = simulate(m, cut, 2);
    const double ratio = photons_per_period(b, cut, Line::X) / photons_per_period(a, open, Line::X);
    CHECK(std::abs(ratio - truncation_factor(0.47, 2.1)) < 0.005);

    const auto profile = decay_profile(b, cut, Line::X, 10.0);
    std::uint64_t late = 0;
    for (std::size_t i = 0; i < profile.counts.size(); ++i) {
        if (profile.bin_centre(i) > 0.52) late += profile.counts[i];
    }
    CHECK(static_cast<double>(late) < 1e-3 * static_cast<double>(profile.total()));
}

TEST_CASE("shelving leaves a memory between periods that full reset erases") {
    QDModel m;
    m.capture_rate_per_ns = 20.0;
    m.shelve_probability = 0.9;
    m.unshelve_rate_per_ns = 0.25;
    auto conditional = [&](SweepOutRegime regime, double window, std::uint64_t seed) {
        const auto d = pulsed(500, 300, regime, window, 2e6);
        const auto e = emitted_per_period(simulate(m, d, seed), d, Line::X);
        double any = 0.0, pairs = 0.0, given = 0.0;
        for (std::size_t k = 0; k + 1 < e.size(); ++k) {
            any += e[k];
            if (e[k]) {
                given += 1.0;
                pairs += e[k + 1];
            }
        }
        const double p = any / static_cast<double>(e.size() - 1);
        return std::tuple{p, pairs / given, given};
    };
    const auto [p_none, c_none, n_none] = conditional(SweepOutRegime::None, 0.0, 3);
    CHECK(c_none < p_none - 5.0 * std::sqrt(p_none * (1.0 - p_none) / n_none));

    const auto [p_reset, c_reset, n_reset] = conditional(SweepOutRegime::FullReset, 1.0, 4);
    CHECK(std::abs(c_reset - p_reset) < 3.0 * std::sqrt(p_reset * (1.0 - p_reset) / n_reset));
}

TEST_CASE("attenuated laser emits Poissonian pulses") {
    LaserSource l;
    l.mean_photons_per_pulse = 0.3;
    l.duration_ns = 1.25e6;
    const auto r = simulate_laser(l, 8);
    const double pulses = 1e5;
    const double n = static_cast<double>(r.events.size());
    CHECK(std::abs(n - 0.3 * pulses) < 3.0 * std::sqrt(0.3 * pulses));
    for (const auto& e : r.events) CHECK(std::fmod(e.time_ns, 12.5) <= 0.05 + 1e-9);
    CHECK(simulate_laser(l, 8) == r);
}

TEST_CASE("throughput and truncation arithmetic") {
    CHECK(throughput_ratio(10.0, 13.4, 0.5) == doctest::Approx(67.0));
    CHECK(throughput_ratio(1.0, 1.0, 1.0) == 1.0);
    CHECK(throughput_ratio(10.0, 1070.0 / 80.0, 0.5) == doctest::Approx(66.875));
    CHECK_THROWS_AS((void)throughput_ratio(0.0, 1.0, 1.0), InvalidInput);
    CHECK_THROWS_AS((void)throughput_ratio(1.0, -2.0, 1.0), InvalidInput);
    CHECK(truncation_factor(0.47, 2.1) == doctest::Approx(1.0 - std::exp(-0.47 / 2.1)).epsilon(1e-14));
    CHECK(truncation_factor(0.47, 2.1) == doctest::Approx(0.20).epsilon(0.01 / 0.2));
    CHECK(truncation_factor(0.47, 0.68) == doctest::Approx(0.5).epsilon(0.02 / 0.5));
}

TEST_CASE("names, CSV and seeds") {
    for (auto l : {Line::X, Line::X2, Line::Charged}) CHECK(parse_line(to_string(l)) == l);
    for (auto g : {SweepOutRegime::None, SweepOutRegime::ElectronsOnly, SweepOutRegime::FullReset}) {
        CHECK(parse_regime(to_string(g)) == g);
    }
    CHECK_THROWS_AS((void)parse_line("XX"), InvalidInput);
    CHECK_THROWS_AS((void)parse_regime("partial"), InvalidInput);

    EmissionRecord r;
    r.events = {{1.5, Line::X2}, {2.25, Line::X}};
    std::ostringstream os;
    write_csv(os, r);
    CHECK(os.str() == "time_ns,line\n1.5,X2\n2.25,X\n");

    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("invalid models and drives") {
    QDModel m;
    m.tau_x_ns = 0.0;
    CHECK_THROWS_AS(m.validate(), InvalidInput);
    m = QDModel{};
    m.shelve_probability = 1.5;
    CHECK_THROWS_AS(m.validate(), InvalidInput);
    m = QDModel{};
    m.max_excitons = 3;
    CHECK_THROWS_AS(m.validate(), InvalidInput);

    CHECK_THROWS_AS((void)simulate(QDModel{}, pulsed(80, 300, SweepOutRegime::None, 0, 10.0), 1), InvalidInput);
    CHECK_THROWS_AS(pulsed(80, 12500, SweepOutRegime::None, 0, 1e4).validate(), InvalidInput);
    CHECK_THROWS_AS(pulsed(80, 300, SweepOutRegime::FullReset, 0.1, 1e4).validate(), InvalidInput);
    CHECK_THROWS_AS(pulsed(80, 300, SweepOutRegime::FullReset, 13.0, 1e4).validate(), InvalidInput);
    CHECK_THROWS_AS((void)decay_profile(EmissionRecord{}, dc(1e3), Line::X, 10.0), InvalidInput);

    const auto empty = decay_profile(EmissionRecord{}, pulsed(80, 300, SweepOutRegime::None, 0, 1e4), Line::X, 10.0);
    CHECK(empty.total() == 0);
    CHECK(empty.counts.size() == 1250);
}
