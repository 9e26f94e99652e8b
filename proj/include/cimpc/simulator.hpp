#pragma once

// Fixed-step time-domain simulation of the converter. The control side is
// sampled once per switching period: a Controller is asked for (d, phi) and
// the bridge mode at every period start, and its answer is held for exactly
// one period. Gate edges are snapped to the integration grid.

#include "cimpc/core_model.hpp"
#include "cimpc/modulation.hpp"
#include "cimpc/network.hpp"
#include "cimpc/waveform.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cimpc::sim {

/// What a controller sees at the start of each switching period.
struct PeriodInput {
    std::size_t period_index = 0;
    double t = 0.0;
    StateVector sample;      // instantaneous state at the period boundary
    StateVector last_mean;   // state averaged over the previous period
    double i_aux_last_mean;  // bridge output current averaged over the previous period
};

struct PeriodCommand {
    ModulationCommand cmd;
    BridgeMode mode = BridgeMode::active;
};

class Controller {
public:
    virtual ~Controller() = default;
    virtual PeriodCommand on_period(const PeriodInput& in) = 0;
    /// Extra channels appended to the recorded waveforms.
    virtual std::vector<std::string> telemetry_names() const { return {}; }
    virtual void telemetry(std::span<double> out) const { (void)out; }
};

/// Holds a fixed command.
class FixedController final : public Controller {
public:
    FixedController(ModulationCommand cmd, BridgeMode mode) : command_{cmd, mode} {}
    PeriodCommand on_period(const PeriodInput&) override { return command_; }

private:
    PeriodCommand command_;
};

enum class Port { main, aux };

struct LoadEvent {
    double t = 0.0;
    Port port = Port::main;
    double ohms = 0.0;
};

struct SimulationOptions {
    double dt = 0.0;         // s; 0 selects T/2000
    double duration = 0.0;   // s
    NetworkOptions network;
    ScheduleOptions schedule;  // mode is overridden by the controller each period
    Integrator integrator = Integrator::rk4;
    StateVector initial;
    bool initial_set = false;  // false: initial_state(params)

    std::size_t decimation = 100;   // trace keeps every n-th step
    double record_from = 0.0;       // trace starts at this time
    bool record_trace = true;
};

/// trace: instantaneous channels every `decimation` steps.
/// cycles: one row per switching period; for each channel X the period mean
/// as "X" and "X:min", "X:max", "X:rms".
struct SimulationResult {
    Waveform trace;
    Waveform cycles;
    StateVector final_state;
    std::size_t steps = 0;
    double dt = 0.0;
    double period = 0.0;
};

/// Base channel names recorded for every run (before controller telemetry).
const std::vector<std::string>& base_channels();

inline constexpr int kDefaultStepsPerPeriod = 2000;
inline constexpr int kMinStepsPerPeriod = 1000;

SimulationResult run_with_controller(const ConverterParams& params, Controller& controller,
                                     std::vector<LoadEvent> events,
                                     const SimulationOptions& options);

SimulationResult run_open_loop(const ConverterParams& params, const ModulationCommand& cmd,
                               BridgeMode mode, const SimulationOptions& options);

/// Advances one grid step, splitting it at diode current zero crossings.
StateVec advance(const SwitchState& gates, const StateVec& x, double dt,
                 const ConverterParams& params, const NetworkOptions& options,
                 Integrator method = Integrator::rk4);

}  // namespace cimpc::sim
