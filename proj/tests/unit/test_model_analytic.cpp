#include "../oracle.hpp"

#include "cimpc/analytic.hpp"
#include "cimpc/core_model.hpp"
#include "cimpc/smallsignal.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

using namespace cimpc;

namespace {

oracle::Ideal ideal(const ConverterParams& p, double v_aux) {
    return {p.v_bat, p.n_ratio, p.l_e, p.f_sw, v_aux};
}

OperatingPoint op_for(const ConverterParams& p, double v_aux) {
    return {p.v_bat / 0.5, v_aux, p.period()};
}

}  // namespace

TEST_CASE("parameter validation reports every bad field") {
    ConverterParams p = table2_defaults().params;
    CHECK(validate(p).ok());
    p.l_e = -1.0;
    p.c_aux = 0.0;
    const auto r = validate(p);
    CHECK(r.errors.size() == 2);
    CHECK_THROWS_AS(require_valid(p, {0.5, 0.1}), ValidationError);
}

TEST_CASE("command validation: bounds and the off-nominal duty warning") {
    const ConverterParams p = table2_defaults().params;
    CHECK_FALSE(validate(p, {0.5, 0.26}).ok());
    CHECK_FALSE(validate(p, {0.5, -0.01}).ok());
    CHECK_FALSE(validate(p, {1.0, 0.1}).ok());
    CHECK(validate(p, {0.5, 0.25}).ok());
    CHECK(validate(p, {0.5, 0.1}).warnings.empty());
    const auto off = validate(p, {0.53, 0.1});
    CHECK(off.ok());
    CHECK(off.warnings.size() == 1);
}

TEST_CASE("nominal sets carry the documented component values") {
    const auto t2 = table2_defaults();
    CHECK(t2.params.n_ratio == doctest::Approx(2.0 / 9.0));
    CHECK(t2.params.l_mag == doctest::Approx(4.92e-3));
    CHECK(t2.params.l_e == doctest::Approx(64e-6));
    CHECK(t2.params.period() == doctest::Approx(20e-6));
    CHECK(t2.op.v_out == doctest::Approx(80.0));
    CHECK(t2.op.v_aux == doctest::Approx(15.0));
    const auto t3 = table3_defaults();
    CHECK(t3.params.l_e == doctest::Approx(53.3e-6));
    CHECK(t3.op.v_aux == doctest::Approx(14.0));
}

TEST_CASE("region slopes follow KVL across the leakage inductor") {
    const auto set = table2_defaults();
    const auto& p = set.params;
    const auto op = op_for(p, 15.0);
    const auto c = analytic::region_coefficients(p, op);
    const auto o = ideal(p, 15.0);
    CHECK(c.a_slope == doctest::Approx(oracle::slope(o, 0.01, 0.5, 0.15)).epsilon(1e-12));
    CHECK(c.b_slope == doctest::Approx(oracle::slope(o, 0.30, 0.5, 0.15)).epsilon(1e-12));
    CHECK(c.a_slope == doctest::Approx(373264.0).epsilon(1e-5));
    CHECK(c.b_slope == doctest::Approx(-95486.0).epsilon(1e-5));
}

TEST_CASE("region schedule durations and bridge signs") {
    const OperatingPoint op{80.0, 15.0, 20e-6};
    const auto s = analytic::region_schedule({0.5, 0.15}, op);
    CHECK(s[0].duration == doctest::Approx(3e-6));
    CHECK(s[1].duration == doctest::Approx(7e-6));
    CHECK(s[2].duration == doctest::Approx(3e-6));
    CHECK(s[3].duration == doctest::Approx(7e-6));
    for (int k = 0; k < 4; ++k) {
        const double tau_mid = (k == 0 ? 0.075 : k == 1 ? 0.325 : k == 2 ? 0.575 : 0.825);
        CHECK(s[k].bridge_sign == oracle::bridge_sign(tau_mid, 0.5, 0.15));
    }
}

TEST_CASE("boundary currents match brute-force integration closed by symmetry") {
    const auto& p = table2_defaults().params;
    for (double phi : {0.05, 0.15, 0.24}) {
        CAPTURE(phi);
        const auto o = ideal(p, 15.0);
        const int n = 200000;
        const auto w = oracle::current_wave(o, 0.5, phi, oracle::symmetric_i0(o, phi, n), n);
        const auto bc = analytic::boundary_currents(p, {0.5, phi}, op_for(p, 15.0));
        const auto at = [&](double tau) { return w[static_cast<std::size_t>(std::lround(tau * n))]; };
        CHECK(bc.i1 == doctest::Approx(at(0.0)).epsilon(1e-6));
        CHECK(bc.i2 == doctest::Approx(at(phi)).epsilon(1e-6));
        CHECK(bc.i3 == doctest::Approx(at(0.5)).epsilon(1e-6));
        CHECK(bc.i4 == doctest::Approx(at(0.5 + phi)).epsilon(1e-6));
        CHECK(at(1.0) == doctest::Approx(at(0.0)).epsilon(1e-6));
    }
    const auto bc = analytic::boundary_currents(p, {0.5, 0.15}, op_for(p, 15.0));
    CHECK(bc.i1 == doctest::Approx(-0.2257).epsilon(5e-4));
    CHECK(bc.i2 == doctest::Approx(0.8941).epsilon(5e-4));
}

TEST_CASE("boundary currents off nominal duty raise the flux imbalance") {
    const auto& p = table2_defaults().params;
    const OperatingPoint op{p.v_bat / 0.47, 15.0, p.period()};
    CHECK_THROWS_AS(analytic::boundary_currents(p, {0.53, 0.15}, op), analytic::FluxImbalanceError);
    const double inc = analytic::period_increment(p, {0.53, 0.15}, op);
    const auto c = analytic::region_coefficients(p, op);
    CHECK(inc == doctest::Approx(c.b_slope * p.period() * (2 * 0.53 - 1)).epsilon(1e-9));
    const auto chained = analytic::boundary_currents_from_i1(p, {0.53, 0.15}, op, -0.2);
    CHECK(chained.i1 == doctest::Approx(-0.2));
    CHECK(chained.i2 == doctest::Approx(-0.2 + c.a_slope * 0.15 * p.period()));
}

TEST_CASE("auxiliary power matches the numerically averaged bridge power") {
    const auto& p = table2_defaults().params;
    const auto op = op_for(p, 15.0);
    const auto o = ideal(p, 15.0);
    for (double phi : {0.02, 0.05, 0.10, 0.15, 0.20, 0.24}) {
        CAPTURE(phi);
        const double ref = oracle::aux_power(o, phi);
        CHECK(analytic::aux_power(p, {0.5, phi}, op) == doctest::Approx(ref).epsilon(1e-6));
        const double i1 = analytic::boundary_currents(p, {0.5, phi}, op).i1;
        CHECK(analytic::aux_power_from_regions(p, {0.5, phi}, op, i1) ==
              doctest::Approx(ref).epsilon(1e-6));
        CHECK(analytic::aux_power(p, {0.5, phi}, op, i1) == doctest::Approx(ref).epsilon(1e-6));
        CHECK(analytic::aux_power_expanded(p.n_ratio, p.l_e, p.v_bat, 15.0, p.period(), {0.5, phi}) ==
              doctest::Approx(ref).epsilon(1e-6));
    }
    CHECK(analytic::aux_power(p, {0.5, 0.15}, op) == doctest::Approx(4.375).epsilon(1e-9));
    CHECK(analytic::aux_power(p, {0.5, 0.05}, op) == doctest::Approx(1.875).epsilon(1e-9));
}

TEST_CASE("power curve peaks at the phase-shift limit") {
    const auto& p = table2_defaults().params;
    const auto curve =
        analytic::power_curve(p, op_for(p, 15.0), 0.5, {0.0, 0.05, 0.1, 0.15, 0.2, 0.25});
    REQUIRE(curve.size() == 6);
    CHECK(curve.front().power == doctest::Approx(0.0));
    for (std::size_t k = 1; k < curve.size(); ++k) CHECK(curve[k].power > curve[k - 1].power);
}

TEST_CASE("power sensitivity is the derivative of the averaged power") {
    const auto& p = table2_defaults().params;
    const auto o = ideal(p, 15.0);
    const double h = 1e-4;
    for (double phi : {0.05, 0.15, 0.2}) {
        const double fd = (oracle::aux_power(o, phi + h) - oracle::aux_power(o, phi - h)) / (2 * h);
        CHECK(analytic::power_sensitivity(p, {0.5, phi}, op_for(p, 15.0)) ==
              doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("boost plant constants follow the averaged boost model") {
    const auto& p = table2_defaults().params;
    const auto plant = smallsignal::boost_plant(p, 0.5, 40.0);
    const double off = 0.5;
    CHECK(plant.omega_rhp == doctest::Approx(40.0 * off * off / p.l_mag));
    CHECK(plant.omega_n == doctest::Approx(off / std::sqrt(p.l_mag * p.c_out)));
    CHECK(plant.dc_gain == doctest::Approx(p.v_bat / (off * off)));
    CHECK(std::abs(smallsignal::gvd(plant, 1e-9)) == doctest::Approx(plant.dc_gain).epsilon(1e-9));
    // RHP zero adds 90 degrees of lag to the pole pair: -270 wraps to +90.
    const auto hf = smallsignal::gvd(plant, 1e6);
    CHECK(std::arg(hf) > 0.0);
}

TEST_CASE("main loop crosses over at unity loop gain") {
    const auto chain = smallsignal::design_chain(table2_defaults());
    const auto& m = chain.main;
    CHECK(m.omega_c == doctest::Approx(chain.boost.omega_rhp / 5.0).epsilon(1e-12));
    CHECK(m.omega_z == doctest::Approx(m.omega_c / 10.0).epsilon(1e-12));
    const auto loop = smallsignal::gvd(chain.boost, m.omega_c) * smallsignal::pi_response(m, m.omega_c);
    CHECK(std::abs(loop) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.ki == doctest::Approx(m.kp * m.omega_z).epsilon(1e-12));
}

TEST_CASE("auxiliary plant and loop") {
    const auto chain = smallsignal::design_chain(table2_defaults());
    const auto& p = table2_defaults().params;
    const auto o = ideal(p, 15.0);
    const double h = 1e-4;
    const double k_phi = (oracle::aux_power(o, 0.15 + h) - oracle::aux_power(o, 0.15 - h)) / (2 * h);
    CHECK(chain.aux.k_phi == doctest::Approx(k_phi).epsilon(1e-4));
    CHECK(chain.aux.dc_gain == doctest::Approx(k_phi / 15.0 * 7.5).epsilon(1e-4));
    CHECK(chain.aux.pole == doctest::Approx(1.0 / (7.5 * p.c_aux)));
    CHECK(chain.aux_loop.omega_c == doctest::Approx(chain.main.omega_c / 10.0).epsilon(1e-12));
    const auto loop = smallsignal::gaux(chain.aux, chain.aux_loop.omega_c) *
                      smallsignal::pi_response(chain.aux_loop, chain.aux_loop.omega_c);
    CHECK(std::abs(loop) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(chain.separation.pass);
}

TEST_CASE("published constants lookup") {
    CHECK(smallsignal::published_constant("omega_rhp") == doctest::Approx(2028.0));
    CHECK(std::isnan(smallsignal::published_constant("no_such_constant")));
    const auto report = smallsignal::design_report(smallsignal::design_chain(table2_defaults()), true);
    CHECK(report.find("omega_rhp") != std::string::npos);
}

TEST_CASE("analytic identities at d = 0.5") {
    const auto& p = table2_defaults().params;
    const auto op = op_for(p, 15.0);
    // Mirrored phase shifts transfer the same power over [0, d].
    for (double phi : {0.02, 0.1, 0.2}) {
        CHECK(analytic::aux_power_expanded(p.n_ratio, p.l_e, p.v_bat, 15.0, p.period(), {0.5, phi}) ==
              doctest::Approx(analytic::aux_power_expanded(p.n_ratio, p.l_e, p.v_bat, 15.0,
                                                            p.period(), {0.5, 0.5 - phi})));
    }
    // The I1 term of the general form vanishes, whatever I1 is supplied.
    for (double i1 : {-3.0, -0.1, 0.0, 0.7, 5.0}) {
        CHECK(analytic::aux_power(p, {0.5, 0.12}, op, i1) ==
              doctest::Approx(analytic::aux_power(p, {0.5, 0.12}, op)).epsilon(1e-12));
    }
    // Linear segments: each regional average is the mean of its end values.
    const auto bc = analytic::boundary_currents(p, {0.5, 0.15}, op);
    CHECK(bc.i_avg[0] == doctest::Approx(0.5 * (bc.i1 + bc.i2)));
    CHECK(bc.i_avg[1] == doctest::Approx(0.5 * (bc.i2 + bc.i3)));
    CHECK(bc.i_avg[2] == doctest::Approx(0.5 * (bc.i3 + bc.i4)));
    CHECK(bc.i_avg[3] == doctest::Approx(0.5 * (bc.i4 + bc.i1)));
    CHECK(bc.i3 == doctest::Approx(-bc.i1));
    CHECK(bc.i4 == doctest::Approx(-bc.i2));
    // With no auxiliary voltage both slopes collapse to N V_bat / L_e.
    const auto c0 = analytic::region_coefficients(p, {80.0, 0.0, p.period()});
    CHECK(c0.a_slope == doctest::Approx(p.n_ratio * p.v_bat / p.l_e));
    CHECK(c0.b_slope == doctest::Approx(c0.a_slope));
}
