#pragma once

// Far-field emission of a horizontal (in-plane) electric dipole embedded in a
// planar structure, computed by angular-spectrum decomposition.
//
// The dipole sits in a homogeneous host layer. `upper` is the structure seen
// looking up from the dipole plane (entry = host, exit = top half-space) and
// `lower` the structure looking down (entry = host, exit = substrate). Each
// in-plane wavevector is parameterized by the host-medium angle alpha,
// u = sin(alpha) = k_par/(n_host*k0). With R_t, R_b the stack reflections
// referred to the dipole plane and D = 1 - R_t*R_b, the azimuth-averaged power
// per d(alpha), normalized to the same dipole in an unbounded host, is
//
//   dissipated = 3/4 sin(a) Re[ (1+R_t)(1+R_b)/D |TE  + cos^2(a) (1-R_t)(1-R_b)/D |TM ]
//   up flux    = 3/8 sin(a) [ |1+R_b|^2/|D|^2 T_up |TE + cos^2(a) |1-R_b|^2/|D|^2 T_up |TM ]
//
// and symmetrically for the down flux. Angles in the returned spectrum are
// polar angles about the growth axis: 0 is straight up into the top
// half-space, 180 straight down into the substrate.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "speds/multilayer.hpp"

namespace speds::dipole {

using optics::Complex;
using optics::LayerStack;

struct DipoleSource {
    double vacuum_wavelength_nm = optics::materials::kDesignWavelengthNm;
    Complex host_index{optics::materials::kGaAs, 0.0};
    double distance_to_upper_stack_nm = 0.0;
    double distance_to_lower_stack_nm = 0.0;
};

struct EmissionGeometry {
    LayerStack upper;
    LayerStack lower;
    DipoleSource source;
};

// Homogeneous host everywhere: no interfaces.
[[nodiscard]] EmissionGeometry homogeneous_geometry(Complex host_index, double vacuum_wavelength_nm);

struct AngularPowerSpectrum {
    // Bin centres in degrees; bins are contiguous, of width resolution_deg, and
    // tile [0, 180] with 90 on a bin edge.
    std::vector<double> theta_deg;
    // Bin-averaged power per radian of polar angle, in units of the unbounded
    // host-medium dipole power.
    std::vector<double> power_density;
    double resolution_deg = 0.0;
    double guided_power = 0.0;  // dissipated but radiated into neither half-space
    double total_power = 0.0;   // all power dissipated by the dipole

    // Power in [lo_deg, hi_deg]; partially covered bins count pro rata.
    [[nodiscard]] double integrate(double lo_deg, double hi_deg) const;
    [[nodiscard]] double radiated_top() const { return integrate(0.0, 90.0); }
    [[nodiscard]] double radiated_bottom() const { return integrate(90.0, 180.0); }
};

struct EmissionOptions {
    // Extinction added to every layer index; turns bound-mode poles into
    // finite peaks. Half-spaces and the host are left lossless.
    double regularization = 1e-6;
    double relative_tolerance = 1e-10;
    double absolute_tolerance = 1e-13;
    std::size_t max_subdivisions = 50000;  // per adaptive integral
    std::size_t pole_scan_points = 16384;
    std::size_t threads = 0;            // 0 = hardware concurrency
};

// Geometry checks shared by the solver entry points. Throws InvalidInput or
// UnsupportedInput.
void validate(const EmissionGeometry& geometry);

// Dissipated power only (no angular spectrum).
[[nodiscard]] double total_power(const EmissionGeometry& geometry, const EmissionOptions& options = {});

// Angular power spectrum. angular_resolution_deg must lie in (0, 0.5].
[[nodiscard]] AngularPowerSpectrum emission_pattern(const EmissionGeometry& geometry,
                                                    double angular_resolution_deg,
                                                    const EmissionOptions& options = {});

// Fraction of total power leaving into the top half-space within the cone
// asin(NA). NA in (0, 1].
[[nodiscard]] double collection_efficiency(const AngularPowerSpectrum& spectrum, double numerical_aperture);

// Closed form for a dipole under a bare high-index/air interface: normal-
// incidence transmission times the fraction of the in-plane dipole pattern
// inside the escape cone asin(NA/n).
[[nodiscard]] double analytic_no_cavity_efficiency(double n, double numerical_aperture);

// CSV with columns theta_deg,power_density; guided_power and total_power are
// recorded as leading '#' comment lines.
void write_csv(std::ostream& os, const AngularPowerSpectrum& spectrum);

}  // namespace speds::dipole
