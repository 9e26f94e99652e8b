#pragma once

// Discrete PI loops executed once per switching period, the operating-mode
// supervisor, and a closed-loop controller that plugs both into the simulator.

#include "cimpc/core_model.hpp"
#include "cimpc/simulator.hpp"
#include "cimpc/smallsignal.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cimpc::control {

using smallsignal::LoopDesign;

struct PiState {
    double integrator = 0.0;
    double output = 0.0;
    double u_min = 0.0;
    double u_max = 1.0;
    bool saturated = false;
};

struct PiResult {
    double output = 0.0;
    PiState state;
};

PiState make_pi_state(double u_min, double u_max, double integrator = 0.0);

/// Backward-Euler PI with conditional integration: the integrator holds its
/// value while the output is clamped and the error pushes further into the
/// clamp. The integrator itself never leaves [u_min, u_max].
PiResult pi_step(const LoopDesign& gains, double ref, double meas, const PiState& state,
                 double dt);

inline constexpr double kDutyMin = 0.1;
inline constexpr double kDutyMax = 0.9;

/// Main loop: v_out error to duty, clamped to [kDutyMin, kDutyMax].
PiResult main_loop_step(const LoopDesign& gains, double ref_v_out, double meas_v_out,
                        const PiState& state, double dt);

enum class AuxMode { voltage, current };

/// Auxiliary loop: phase shift clamped to [0, kPhaseShiftLimit]. In voltage
/// mode ref/meas are volts, in current mode amperes of bridge output current.
PiResult aux_loop_step(const LoopDesign& gains, double ref, double meas, const PiState& state,
                       double dt);

/// Integral-only current loop on the algebraic phi -> i_aux gain, crossing
/// over at the auxiliary voltage loop frequency.
LoopDesign design_aux_current_loop(const smallsignal::AuxPlant& aux, double v_aux,
                                   const LoopDesign& voltage_loop);

enum class EventKind { enable_active, aux_ref, main_ref, load };

struct SupervisorEvent {
    double t = 0.0;
    EventKind kind = EventKind::load;
    double value = 0.0;  // V, A or ohm
    sim::Port port = sim::Port::aux;  // load events only
};

struct SupervisorPlan {
    double main_ref = 0.0;  // V
    double aux_ref = 0.0;   // V in voltage mode, A in current mode
    bool start_passive = false;  // implied by any enable_active event
    std::vector<SupervisorEvent> events;
};

/// Throws std::invalid_argument on unsorted events, non-positive loads, or an
/// auxiliary reference step before active rectification is enabled.
void validate_plan(const SupervisorPlan& plan);

struct SupervisorOutput {
    BridgeMode mode = BridgeMode::active;
    double main_ref = 0.0;
    double aux_ref = 0.0;
    std::optional<double> r_load;  // latest main load event, if any
    std::optional<double> r_aux;   // latest auxiliary load event, if any
};

/// Plans without an enable event run active from t = 0 unless start_passive.
SupervisorOutput supervisor_step(const SupervisorPlan& plan, double t);

/// Load events of the plan in the simulator's form.
std::vector<sim::LoadEvent> load_events(const SupervisorPlan& plan);

struct ClosedLoopConfig {
    LoopDesign main;
    LoopDesign aux;
    AuxMode aux_mode = AuxMode::voltage;
    SupervisorPlan plan;
    double duty_min = kDutyMin;
    double duty_max = kDutyMax;
    double phi_max = kPhaseShiftLimit;
    std::optional<double> forced_duty;  // main loop open, d held
    std::optional<double> initial_duty;  // main integrator preset; default 1 - v_bat/ref
};

/// Both loops plus supervisor, sampling the previous period's mean.
/// Telemetry: ref, e, u, sat for each loop ("main:*", "aux:*").
class ClosedLoopController final : public sim::Controller {
public:
    ClosedLoopController(const ConverterParams& params, ClosedLoopConfig config);

    sim::PeriodCommand on_period(const sim::PeriodInput& in) override;
    std::vector<std::string> telemetry_names() const override;
    void telemetry(std::span<double> out) const override;

    const PiState& main_state() const { return main_; }
    const PiState& aux_state() const { return aux_; }

private:
    ConverterParams params_;
    ClosedLoopConfig config_;
    PiState main_;
    PiState aux_;
    double main_ref_ = 0.0;
    double main_err_ = 0.0;
    double aux_ref_ = 0.0;
    double aux_err_ = 0.0;
    bool was_active_ = false;
};

}  // namespace cimpc::control
