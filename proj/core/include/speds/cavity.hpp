#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "speds/dipole.hpp"

namespace speds::cavity {

// Planar GaAs cavity between an optional top Bragg mirror and a bottom Bragg
// mirror on a GaAs substrate. Lengths in units of the design wavelength inside
// GaAs. Without a top mirror the cavity top is the GaAs/air surface.
struct CavityDesign {
    int bottom_periods = 12;
    int top_periods = 0;
    double cavity_order = 3.0;               // spacer length, positive multiple of 0.5
    double dipole_depth_below_surface = 2.0; // measured from the top of the spacer
    double numerical_aperture = 0.5;
    double design_wavelength_nm = optics::materials::kDesignWavelengthNm;
    double n_high = optics::materials::kGaAs;
    double n_low = optics::materials::kAlAs;

    [[nodiscard]] double dipole_height_above_mirror() const { return cavity_order - dipole_depth_below_surface; }
    void validate() const;
};

// Dipole 2 wavelengths below the surface, 1 wavelength above the bottom mirror.
[[nodiscard]] CavityDesign fig5_geometry(int bottom_periods = 12);
// Same surface depth with no bottom mirror at all.
[[nodiscard]] CavityDesign no_cavity_geometry();
// One-wavelength cavity with the dipole at its centre.
[[nodiscard]] CavityDesign top_mirror_geometry(int bottom_periods = 12, int top_periods = 0);

[[nodiscard]] dipole::EmissionGeometry to_geometry(const CavityDesign& design);

struct SweepResult {
    std::string preset;
    std::string parameter;  // "bottom_periods" or "top_periods"
    double numerical_aperture = 0.0;
    std::vector<int> parameter_values;
    std::vector<double> efficiencies;
    std::size_t argmax = 0;  // first maximum, i.e. ties go to fewer periods

    [[nodiscard]] double best_efficiency() const { return efficiencies.at(argmax); }
    [[nodiscard]] int best_parameter() const { return parameter_values.at(argmax); }
};

struct SweepOptions {
    double angular_resolution_deg = 0.5;
    dipole::EmissionOptions emission;
};

// Collection efficiency of one design at its own numerical aperture.
[[nodiscard]] double design_efficiency(const CavityDesign& design, const SweepOptions& options = {});

// Efficiency versus bottom-mirror periods 0..max_periods in the fig5 geometry,
// one result per numerical aperture. max_periods >= 12.
[[nodiscard]] std::vector<SweepResult> sweep_bottom_mirror(int max_periods,
                                                           const std::vector<double>& numerical_apertures,
                                                           const SweepOptions& options = {});

// Efficiency versus top-mirror periods 0..max_top in the one-wavelength cavity.
[[nodiscard]] SweepResult optimize_top_mirror(int bottom_periods, int max_top, double numerical_aperture = 0.5,
                                              const SweepOptions& options = {});

// Index of the first maximum.
[[nodiscard]] std::size_t first_argmax(const std::vector<double>& values);

// "parameter,efficiency" rows.
void write_csv(std::ostream& os, const SweepResult& sweep);
// File name carrying the preset and aperture, e.g. cavity_sweep_fig5_geometry_na0.50.csv
[[nodiscard]] std::string csv_filename(const SweepResult& sweep);

}  // namespace speds::cavity
