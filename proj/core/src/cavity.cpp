#include "speds/cavity.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>

#include "speds/error.hpp"
#include "speds/parallel.hpp"

namespace speds::cavity {

namespace {

bool is_half_multiple(double x) {
    const double twice = 2.0 * x;
    return std::abs(twice - std::round(twice)) < 1e-9;
}

}  // namespace

void CavityDesign::validate() const {
    if (bottom_periods < 0) throw InvalidInput("cavity design: bottom_periods must be >= 0");
    if (top_periods < 0) throw InvalidInput("cavity design: top_periods must be >= 0");
    if (!(cavity_order > 0.0) || !is_half_multiple(cavity_order)) {
        throw InvalidInput("cavity design: cavity_order must be a positive multiple of 0.5");
    }
    if (!(dipole_depth_below_surface >= 0.0) || dipole_depth_below_surface > cavity_order) {
        throw InvalidInput("cavity design: dipole_depth_below_surface must lie within the cavity");
    }
    if (!(numerical_aperture > 0.0 && numerical_aperture <= 1.0)) {
        throw InvalidInput("cavity design: numerical_aperture must lie in (0, 1]");
    }
    if (!(design_wavelength_nm > 0.0) || !std::isfinite(design_wavelength_nm)) {
        throw InvalidInput("cavity design: design_wavelength_nm must be finite and > 0");
    }
    if (!(n_high > 1.0) || !(n_low > 0.0) || n_low >= n_high) {
        throw InvalidInput("cavity design: require n_high > n_low > 0 and n_high > 1");
    }
}

CavityDesign fig5_geometry(int bottom_periods) {
    CavityDesign d;
    d.bottom_periods = bottom_periods;
    d.top_periods = 0;
    d.cavity_order = 3.0;
    d.dipole_depth_below_surface = 2.0;
    return d;
}

CavityDesign no_cavity_geometry() { return fig5_geometry(0); }

CavityDesign top_mirror_geometry(int bottom_periods, int top_periods) {
    CavityDesign d;
    d.bottom_periods = bottom_periods;
    d.top_periods = top_periods;
    d.cavity_order = 1.0;
    d.dipole_depth_below_surface = 0.5;
    return d;
}

dipole::EmissionGeometry to_geometry(const CavityDesign& design) {
    design.validate();
    using optics::Complex;
    const Complex high{design.n_high, 0.0};
    const Complex low{design.n_low, 0.0};
    const double wavelength_in_high = design.design_wavelength_nm / design.n_high;

    dipole::EmissionGeometry g;
    g.source.vacuum_wavelength_nm = design.design_wavelength_nm;
    g.source.host_index = high;
    g.source.distance_to_upper_stack_nm = design.dipole_depth_below_surface * wavelength_in_high;
    g.source.distance_to_lower_stack_nm = design.dipole_height_above_mirror() * wavelength_in_high;

    // Seen from the spacer both mirrors start with the low-index layer, which
    // puts an antinode at each mirror face.
    g.upper = optics::build_bragg(high, low, design.design_wavelength_nm, design.top_periods);
    g.upper.entry_index = high;
    g.upper.exit_index = Complex(optics::materials::kAir, 0.0);

    g.lower = optics::build_bragg(high, low, design.design_wavelength_nm, design.bottom_periods);
    g.lower.entry_index = high;
    g.lower.exit_index = high;
    return g;
}

double design_efficiency(const CavityDesign& design, const SweepOptions& options) {
    const auto spectrum = dipole::emission_pattern(to_geometry(design), options.angular_resolution_deg, options.emission);
    return dipole::collection_efficiency(spectrum, design.numerical_aperture);
}

std::size_t first_argmax(const std::vector<double>& values) {
    if (values.empty()) throw InvalidInput("first_argmax: empty sequence");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::vector<SweepResult> sweep_bottom_mirror(int max_periods, const std::vector<double>& numerical_apertures,
                                             const SweepOptions& options) {
    if (max_periods < 12) throw InvalidInput("sweep_bottom_mirror: max_periods must be >= 12");
    if (numerical_apertures.empty()) throw InvalidInput("sweep_bottom_mirror: no numerical apertures given");
    for (double na : numerical_apertures) {
        if (!(na > 0.0 && na <= 1.0)) throw InvalidInput("sweep_bottom_mirror: numerical aperture outside (0, 1]");
    }

    // The spectrum does not depend on NA, so each mirror is solved once.
    // Points run in parallel with single-threaded solves inside.
    const auto count = static_cast<std::size_t>(max_periods) + 1;
    auto inner = options.emission;
    inner.threads = 1;
    const auto spectra = parallel_map(
        count,
        [&](std::size_t n) {
            return dipole::emission_pattern(to_geometry(fig5_geometry(static_cast<int>(n))),
                                            options.angular_resolution_deg, inner);
        },
        options.emission.threads);

    std::vector<SweepResult> results;
    for (double na : numerical_apertures) {
        SweepResult r;
        r.preset = "fig5_geometry";
        r.parameter = "bottom_periods";
        r.numerical_aperture = na;
        for (std::size_t n = 0; n < count; ++n) {
            r.parameter_values.push_back(static_cast<int>(n));
            r.efficiencies.push_back(dipole::collection_efficiency(spectra[n], na));
        }
        r.argmax = first_argmax(r.efficiencies);
        results.push_back(std::move(r));
    }
    return results;
}

SweepResult optimize_top_mirror(int bottom_periods, int max_top, double numerical_aperture,
                                const SweepOptions& options) {
    if (bottom_periods < 0) throw InvalidInput("optimize_top_mirror: bottom_periods must be >= 0");
    if (max_top < 0) throw InvalidInput("optimize_top_mirror: max_top must be >= 0");

    SweepResult r;
    r.preset = "top_mirror_geometry";
    r.parameter = "top_periods";
    r.numerical_aperture = numerical_aperture;
    auto inner = options;
    inner.emission.threads = 1;
    const auto count = static_cast<std::size_t>(max_top) + 1;
    r.efficiencies = parallel_map(
        count,
        [&](std::size_t m) {
            auto design = top_mirror_geometry(bottom_periods, static_cast<int>(m));
            design.numerical_aperture = numerical_aperture;
            return design_efficiency(design, inner);
        },
        options.emission.threads);
    for (std::size_t m = 0; m < count; ++m) r.parameter_values.push_back(static_cast<int>(m));
    r.argmax = first_argmax(r.efficiencies);
    return r;
}

void write_csv(std::ostream& os, const SweepResult& sweep) {
    os << std::setprecision(12);
    os << "parameter,efficiency\n";
    for (std::size_t i = 0; i < sweep.parameter_values.size(); ++i) {
        os << sweep.parameter_values[i] << ',' << sweep.efficiencies[i] << '\n';
    }
}

std::string csv_filename(const SweepResult& sweep) {
    char na[16];
    std::snprintf(na, sizeof na, "%.2f", sweep.numerical_aperture);
    return "cavity_sweep_" + sweep.preset + "_na" + na + ".csv";
}

}  // namespace speds::cavity
