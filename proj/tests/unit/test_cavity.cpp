#include <doctest.h>

#include <sstream>

#include "speds/cavity.hpp"
#include "speds/error.hpp"

using namespace speds;
using namespace speds::cavity;

TEST_CASE("dipole position is consistent with the cavity length") {
    for (const auto& d : {fig5_geometry(12), top_mirror_geometry(12, 4), no_cavity_geometry()}) {
        const auto g = to_geometry(d);
        const double wl = d.design_wavelength_nm / d.n_high;
        CHECK(g.source.distance_to_upper_stack_nm + g.source.distance_to_lower_stack_nm ==
              doctest::Approx(d.cavity_order * wl));
        CHECK(g.upper.exit_index == optics::Complex(1.0, 0.0));
        CHECK(g.lower.exit_index == optics::Complex(d.n_high, 0.0));
        CHECK(g.lower.layers.size() == 2 * static_cast<std::size_t>(d.bottom_periods));
        CHECK(g.upper.layers.size() == 2 * static_cast<std::size_t>(d.top_periods));
    }
    const auto fig5 = fig5_geometry(7);
    CHECK(fig5.cavity_order == 3.0);
    CHECK(fig5.dipole_depth_below_surface == 2.0);
    CHECK(fig5.dipole_height_above_mirror() == 1.0);
    const auto top = top_mirror_geometry(12, 3);
    CHECK(top.cavity_order == 1.0);
    CHECK(top.dipole_depth_below_surface == 0.5);
}

TEST_CASE("a zero-period mirror is no mirror") {
    const double none = design_efficiency(no_cavity_geometry());
    const double zero = design_efficiency(fig5_geometry(0));
    CHECK(std::abs(none - zero) < 0.003);
}

TEST_CASE("top mirror with zero periods reduces to the bottom-mirror-only cavity") {
    const auto sweep = optimize_top_mirror(12, 1);
    auto design = top_mirror_geometry(12, 0);
    CHECK(sweep.efficiencies[0] == doctest::Approx(design_efficiency(design)).epsilon(1e-12));
    CHECK(sweep.parameter == "top_periods");
    CHECK(sweep.parameter_values == std::vector<int>{0, 1});
}

TEST_CASE("top-mirror optimum is stable under tighter quadrature and falls off beyond it") {
    const auto base = optimize_top_mirror(12, 8, 0.5);
    SweepOptions tight;
    tight.emission.relative_tolerance /= 4.0;
    tight.emission.absolute_tolerance /= 4.0;
    const auto refined = optimize_top_mirror(12, 8, 0.5, tight);
    CHECK(base.best_parameter() == refined.best_parameter());
    for (std::size_t m = base.argmax + 2; m + 1 < base.efficiencies.size(); ++m) {
        CHECK(base.efficiencies[m + 1] < base.efficiencies[m]);
    }
    CHECK(base.efficiencies[base.argmax + 2] < base.efficiencies[base.argmax + 1]);
}

TEST_CASE("argmax takes the first of equal maxima") {
    CHECK(first_argmax({0.1, 0.3, 0.3, 0.2}) == 1);
    CHECK(first_argmax({0.5}) == 0);
    CHECK_THROWS_AS((void)first_argmax({}), InvalidInput);
}

TEST_CASE("sweep CSV and file names") {
    SweepResult r;
    r.preset = "fig5_geometry";
    r.parameter = "bottom_periods";
    r.numerical_aperture = 0.5;
    r.parameter_values = {0, 1};
    r.efficiencies = {0.25, 0.5};
    r.argmax = 1;
    std::ostringstream os;
    write_csv(os, r);
    CHECK(os.str() == "parameter,efficiency\n0,0.25\n1,0.5\n");
    CHECK(csv_filename(r) == "cavity_sweep_fig5_geometry_na0.50.csv");
    CHECK(r.best_parameter() == 1);
    CHECK(r.best_efficiency() == 0.5);
}

TEST_CASE("invalid cavity designs") {
    auto d = fig5_geometry(12);
    d.cavity_order = 1.25;
    CHECK_THROWS_AS(d.validate(), InvalidInput);
    d = fig5_geometry(12);
    d.dipole_depth_below_surface = 3.5;
    CHECK_THROWS_AS(d.validate(), InvalidInput);
    d = fig5_geometry(-1);
    CHECK_THROWS_AS(d.validate(), InvalidInput);
    d = fig5_geometry(12);
    d.numerical_aperture = 0.0;
    CHECK_THROWS_AS(d.validate(), InvalidInput);
    d = fig5_geometry(12);
    d.n_low = 3.6;
    CHECK_THROWS_AS((void)to_geometry(d), InvalidInput);
    CHECK_THROWS_AS((void)sweep_bottom_mirror(11, {0.5}), InvalidInput);
    CHECK_THROWS_AS((void)sweep_bottom_mirror(12, {1.5}), InvalidInput);
    CHECK_THROWS_AS((void)optimize_top_mirror(12, -1), InvalidInput);
}
