#include "cimpc/analysis.hpp"
#include "cimpc/control.hpp"
#include "cimpc/experiments.hpp"
#include "cimpc/scenario.hpp"
#include "cimpc/smallsignal.hpp"
#include "cimpc/waveform.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

using namespace cimpc;

namespace {

Waveform sine_wave(double t0, double dt, std::size_t n, double mean, double amp, double period) {
    Waveform w(t0, dt, {"x"});
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + static_cast<double>(i) * dt;
        const double v = mean + amp * std::sin(2.0 * std::numbers::pi * t / period);
        w.append(std::span<const double>(&v, 1));
    }
    return w;
}

scenario::ScenarioConfig parse(const std::string& text) {
    std::istringstream in(text);
    return scenario::parse_scenario(in, "test");
}

}  // namespace

TEST_CASE("PI step: proportional plus backward-Euler integral") {
    const smallsignal::LoopDesign g{0.0, 0.0, 1.0, 10.0};
    const auto s = control::make_pi_state(-5.0, 5.0, 0.0);
    const auto r = control::pi_step(g, 1.0, 0.9, s, 0.01);
    CHECK(r.state.integrator == doctest::Approx(0.01));
    CHECK(r.output == doctest::Approx(0.11));
    CHECK_FALSE(r.state.saturated);
}

TEST_CASE("PI step: conditional integration prevents windup") {
    const smallsignal::LoopDesign g{0.0, 0.0, 1.0, 10.0};
    auto s = control::make_pi_state(0.0, 0.25, 0.2);
    for (int k = 0; k < 100; ++k) s = control::pi_step(g, 10.0, 0.0, s, 0.01).state;
    CHECK(s.saturated);
    CHECK(s.output == 0.25);
    CHECK(s.integrator == doctest::Approx(0.2));
    // The clamp releases as soon as the error reverses.
    const auto r = control::pi_step(g, 0.0, 0.01, s, 0.01);
    CHECK(r.output < 0.25);
    CHECK_FALSE(r.state.saturated);
}

TEST_CASE("loop wrappers clamp to their actuator ranges") {
    const smallsignal::LoopDesign g{0.0, 0.0, 1.0, 0.0};
    const auto duty = control::main_loop_step(g, 100.0, 0.0, control::make_pi_state(0, 1, 0.5), 1e-3);
    CHECK(duty.output == control::kDutyMax);
    const auto phi = control::aux_loop_step(g, 100.0, 0.0, control::make_pi_state(0, 1, 0.1), 1e-3);
    CHECK(phi.output == kPhaseShiftLimit);
    const auto low = control::aux_loop_step(g, 0.0, 100.0, control::make_pi_state(0, 1, 0.1), 1e-3);
    CHECK(low.output == 0.0);
}

TEST_CASE("aux current loop crosses over where the voltage loop does") {
    const auto chain = smallsignal::design_chain(table2_defaults());
    const auto c = control::design_aux_current_loop(chain.aux, 15.0, chain.aux_loop);
    CHECK(c.kp == 0.0);
    // Integrator ki/s times the algebraic gain k_phi/v_aux has unit magnitude at w_c.
    CHECK(c.ki * chain.aux.k_phi / 15.0 / chain.aux_loop.omega_c == doctest::Approx(1.0));
}

TEST_CASE("supervisor: passive start, activation and reference steps") {
    control::SupervisorPlan plan{80.0, 13.0, false, {}};
    plan.events.push_back({0.3, control::EventKind::enable_active, 0.0, sim::Port::aux});
    plan.events.push_back({0.9, control::EventKind::aux_ref, 14.0, sim::Port::aux});
    plan.events.push_back({1.0, control::EventKind::load, 20.0, sim::Port::main});
    CHECK_NOTHROW(control::validate_plan(plan));
    auto out = control::supervisor_step(plan, 0.1);
    CHECK(out.mode == BridgeMode::passive);
    out = control::supervisor_step(plan, 0.5);
    CHECK(out.mode == BridgeMode::active);
    CHECK(out.aux_ref == 13.0);
    out = control::supervisor_step(plan, 1.2);
    CHECK(out.aux_ref == 14.0);
    CHECK(out.r_load.value() == 20.0);
    const auto loads = control::load_events(plan);
    REQUIRE(loads.size() == 1);
    CHECK(loads[0].port == sim::Port::main);
    CHECK(loads[0].ohms == 20.0);
}

TEST_CASE("supervisor plan validation") {
    control::SupervisorPlan plan{80.0, 13.0, false, {}};
    plan.events.push_back({0.2, control::EventKind::aux_ref, 14.0, sim::Port::aux});
    plan.events.push_back({0.3, control::EventKind::enable_active, 0.0, sim::Port::aux});
    CHECK_THROWS_AS(control::validate_plan(plan), std::invalid_argument);
    plan.events = {{0.5, control::EventKind::load, 10.0, sim::Port::aux},
                   {0.4, control::EventKind::load, 10.0, sim::Port::aux}};
    CHECK_THROWS_AS(control::validate_plan(plan), std::invalid_argument);
    plan.events = {{0.5, control::EventKind::load, -1.0, sim::Port::aux}};
    CHECK_THROWS_AS(control::validate_plan(plan), std::invalid_argument);
}

TEST_CASE("closed-loop controller presets the duty integrator") {
    const auto set = table2_defaults();
    control::ClosedLoopConfig cfg;
    const auto chain = smallsignal::design_chain(set);
    cfg.main = chain.main;
    cfg.aux = chain.aux_loop;
    cfg.plan = {80.0, 15.0, false, {}};
    control::ClosedLoopController c(set.params, cfg);
    CHECK(c.main_state().integrator == doctest::Approx(0.5));
    sim::PeriodInput in;
    in.last_mean = {1.0, 0.0, 80.0, 15.0, 40.0};
    const auto cmd = c.on_period(in);
    CHECK(cmd.cmd.d == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(cmd.mode == BridgeMode::active);
    CHECK(c.telemetry_names().size() == 8);
    cfg.phi_max = 0.3;
    CHECK_THROWS(control::ClosedLoopController(set.params, cfg));
}

TEST_CASE("ripple, rms and periodicity on a synthetic waveform") {
    const double period = 1e-3;
    const auto w = sine_wave(0.0, period / 100, 3000, 10.0, 0.5, period);
    const analysis::TimeWindow win{0.0, 0.03};
    CHECK(analysis::mean(w, "x", win) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(analysis::rms_ac(w, "x", win) == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-6));
    CHECK(analysis::peak_to_peak(w, "x", win) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(analysis::measure_ripple(w, "x", win, period) == doctest::Approx(10.0).epsilon(1e-3));
    CHECK(analysis::periodicity_error(w, "x", win, period) < 1e-9);
    CHECK_THROWS_AS(analysis::measure_ripple(w, "x", {0.0, 0.01}, period), analysis::AnalysisError);
}

TEST_CASE("average power rounds to whole periods and warns") {
    const double period = 1e-3;
    const auto w = sine_wave(0.0, period / 100, 3000, 2.0, 1.0, period);
    const auto exact = analysis::average_power(w, "x", {0.0, 0.01}, period);
    CHECK(exact.warning.empty());
    CHECK(exact.watts == doctest::Approx(2.0).epsilon(1e-9));
    const auto rounded = analysis::average_power(w, "x", {0.0, 0.01049}, period);
    CHECK_FALSE(rounded.warning.empty());
    CHECK(rounded.periods == 10.0);
}

TEST_CASE("settling metrics after a step") {
    Waveform w(0.0, 0.01, {"v"});
    for (int i = 0; i < 100; ++i) {
        const double t = i * 0.01;
        const double v = t < 0.2 ? 10.0 : 10.0 - 2.0 * std::exp(-(t - 0.2) / 0.05);
        w.append(std::span<const double>(&v, 1));
    }
    const auto m = analysis::settling(w, "v", 10.0, 0.2, 1.0, 0.01);
    CHECK(m.peak_deviation == doctest::Approx(-2.0));
    CHECK(m.peak_time == doctest::Approx(0.2));
    // 2 exp(-t/0.05) < 0.1 after t = 0.05 ln 20 = 0.1498 s
    CHECK(m.recovery_time == doctest::Approx(0.15).epsilon(0.01));
    analysis::AnalysisReport r;
    r.checks.push_back({"a", true, ""});
    r.checks.push_back({"b", false, "why"});
    CHECK_FALSE(r.passed());
    CHECK(r.to_text().find("FAIL b  (why)") != std::string::npos);
}

TEST_CASE("waveform CSV round trip") {
    Waveform w(0.5, 0.25, {"a", "b"});
    for (int i = 0; i < 4; ++i) {
        const double row[2] = {1.0 * i, -0.5 * i};
        w.append(row);
    }
    std::stringstream ss;
    write_csv(ss, w);
    const auto r = read_csv(ss);
    CHECK(r.size() == 4);
    CHECK(r.t0() == doctest::Approx(0.5));
    CHECK(r.dt() == doctest::Approx(0.25));
    CHECK(r.channel("b")[3] == doctest::Approx(-1.5));
    const auto [first, last] = w.window(0.75, 1.25);
    CHECK(first == 1);
    CHECK(last == 3);
}

TEST_CASE("scenario parsing: defaults, overrides, comments") {
    const auto empty = parse("");
    CHECK(empty.base == "table2");
    CHECK(empty.control_mode == scenario::ControlMode::closed);
    const auto c = parse(
        "; comment line\n"
        "[params]\nbase = table3\nr_aux = 100   ; inline comment\nr_le = 0.1\n"
        "[control]\naux_ref = 13\nstart = passive\n"
        "[events]\nact = 0.3 enable_active\nstep = 0.9 aux_ref 14\n"
        "[run]\nduration = 1.0\n"
        "[windows]\nlate = 0.9 1.0\n");
    CHECK(c.base == "table3");
    CHECK(c.set.params.r_aux == 100.0);
    CHECK(c.network.parasitics.r_le == 0.1);
    CHECK(c.loop.plan.aux_ref == 13.0);
    CHECK(c.loop.plan.events.size() == 2);
    CHECK(c.windows.size() == 1);
    CHECK(c.duration == 1.0);
}

TEST_CASE("scenario parsing: errors name the line") {
    auto fails_with = [](const std::string& text, const std::string& needle) {
        try {
            parse(text);
        } catch (const scenario::ScenarioError& e) {
            CAPTURE(e.what());
            return std::string(e.what()).find(needle) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_with("[params]\nbogus = 1\n", "test:2"));
    CHECK(fails_with("[params]\nbogus = 1\n", "unknown key"));
    CHECK(fails_with("[nope]\n", "unknown section"));
    CHECK(fails_with("[control]\nphi_max = 0.3\n", "phi_max"));
    CHECK(fails_with("[params]\nl_e = abc\n", "expected a number"));
    CHECK(fails_with("[run]\nduration = 0.1\n[events]\na = 0.0995 aux_load 5\n", "duration"));
    CHECK(fails_with("[events]\na = 0.1 aux_load 5\nb = 0.05 aux_load 6\n[run]\nduration=1\n",
                     "time order"));
    CHECK(fails_with("[control]\nmode = open\n[events]\na = 0.1 aux_ref 5\n[run]\nduration=1\n",
                     "open-loop"));
    CHECK(fails_with("[run]\ndt = 1e-7\n", "dt"));
    CHECK(fails_with("[windows]\nw = 0.1 0.5\n", "window"));
}

TEST_CASE("every bundled scenario loads") {
    for (const auto& entry : std::filesystem::directory_iterator(scenario::bundled_path(""))) {
        if (entry.path().extension() != ".scenario") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(scenario::load_scenario(entry.path().string()));
    }
}

TEST_CASE("experiment registry and design study") {
    CHECK(experiments::experiment_names().size() == 9);
    CHECK(experiments::is_experiment("fig3-openloop"));
    CHECK_FALSE(experiments::is_experiment("fig99"));
    CHECK_THROWS(experiments::run_experiment("fig99"));
    const auto r = experiments::run_experiment("table2-design");
    CHECK(r.report.passed());
    CHECK(r.metrics.at("main_dc_gain") == 160.0);
}

TEST_CASE("command-line overrides") {
    auto c = scenario::load_scenario(scenario::bundled_path("fig7.scenario"));
    experiments::ExperimentOptions o;
    o.duration = 0.38;
    CHECK_THROWS(experiments::apply_overrides(c, o));
    o.duration = 0.6;
    o.decimation = 10;
    experiments::apply_overrides(c, o);
    CHECK(c.duration == 0.6);
    CHECK(c.decimation == 10);
    for (const auto& w : c.windows) CHECK(w.window.t_end <= 0.6);
}
