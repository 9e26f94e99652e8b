#pragma once

// Scenario files: sectioned key = value text read with Boost.PropertyTree's
// INI reader. Full-line comments start with ';' or '#'; a trailing
// " ; ..." or " # ..." after a value is stripped as well. Every key is
// optional; an empty file is the table2 set under static references.
//
//   [params]   base = table2|table3, any ConverterParams field by name,
//              r_le, v_diode, r_bat_source, leg = synchronous|diode,
//              bridge_duty = track|half, dead_time
//   [control]  mode = closed|open, main_ref, aux_ref, aux_mode = voltage|current,
//              main_loop = on|off, d, phi, bridge = active|passive,
//              start = active|passive, phi_max, duty_min, duty_max,
//              initial_duty, kp_main, ki_main, kp_aux, ki_aux
//   [events]   <label> = <time> <kind> <value>, kind one of enable_active,
//              aux_ref, main_ref, main_load, aux_load; listed in time order
//   [run]      duration, dt, decimation, record_from, integrator = rk4|exact,
//              hold_v_out, hold_v_aux, initial = default|periodic,
//              i_mag0, i_le0, v_out0, v_aux0
//   [windows]  <name> = <t_begin> <t_end>, steady-state measurement windows

#include "cimpc/analysis.hpp"
#include "cimpc/control.hpp"
#include "cimpc/core_model.hpp"
#include "cimpc/simulator.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cimpc::scenario {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ControlMode { closed, open };
enum class InitialMode { standard, periodic };

struct NamedWindow {
    std::string name;
    analysis::TimeWindow window;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::string base = "table2";
    NominalSet set;  // parameters after overrides, nominal command and operating point

    sim::NetworkOptions network;
    ScheduleOptions schedule;

    ControlMode control_mode = ControlMode::closed;
    ModulationCommand open_cmd;  // open-loop command; d doubles as the forced duty
    BridgeMode open_bridge = BridgeMode::active;
    control::ClosedLoopConfig loop;

    double duration = 0.2;
    double dt = 0.0;
    std::size_t decimation = 100;
    double record_from = 0.0;
    sim::Integrator integrator = sim::Integrator::rk4;
    InitialMode initial = InitialMode::standard;
    std::optional<double> i_mag0, i_le0, v_out0, v_aux0;

    std::vector<NamedWindow> windows;
    std::vector<std::string> warnings;
};

/// Table2 set, closed loop, references at the nominal operating point.
ScenarioConfig default_scenario();

ScenarioConfig parse_scenario(std::istream& in, const std::string& name);
ScenarioConfig load_scenario(const std::string& path);

/// Path of a scenario file bundled with the sources.
std::string bundled_path(const std::string& file_name);

/// Steady periodic start at d = 0.5: i_le at its region I boundary value,
/// i_mag at its valley for the load current, outputs at the operating point.
sim::StateVector periodic_start(const ConverterParams& params, const ModulationCommand& cmd,
                                const OperatingPoint& op, bool active);

sim::SimulationOptions simulation_options(const ScenarioConfig& config);

sim::SimulationResult run_scenario(const ScenarioConfig& config);

/// Generic report: per-window means, ripple and port powers, and settling
/// after each plan event.
analysis::AnalysisReport summarize(const ScenarioConfig& config,
                                   const sim::SimulationResult& result);

/// Human-readable dump of the resolved configuration.
std::string describe(const ScenarioConfig& config);

}  // namespace cimpc::scenario
