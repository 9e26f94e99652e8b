#include "cimpc/control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cimpc::control {

PiState make_pi_state(double u_min, double u_max, double integrator) {
    if (!(u_min < u_max)) throw std::invalid_argument("PI limits must satisfy min < max");
    PiState s;
    s.u_min = u_min;
    s.u_max = u_max;
    s.integrator = std::clamp(integrator, u_min, u_max);
    s.output = s.integrator;
    return s;
}

PiResult pi_step(const LoopDesign& gains, double ref, double meas, const PiState& state,
                 double dt) {
    const double e = ref - meas;
    PiState next = state;
    double integ = state.integrator + gains.ki * e * dt;
    double u = gains.kp * e + integ;
    const bool high = u > state.u_max;
    const bool low = u < state.u_min;
    if ((high && e > 0.0) || (low && e < 0.0)) {
        integ = state.integrator;
        u = gains.kp * e + integ;
    }
    next.integrator = std::clamp(integ, state.u_min, state.u_max);
    next.saturated = u > state.u_max || u < state.u_min;
    next.output = std::clamp(u, state.u_min, state.u_max);
    return {next.output, next};
}

PiResult main_loop_step(const LoopDesign& gains, double ref_v_out, double meas_v_out,
                        const PiState& state, double dt) {
    PiState s = state;
    s.u_min = std::max(s.u_min, kDutyMin);
    s.u_max = std::min(s.u_max, kDutyMax);
    return pi_step(gains, ref_v_out, meas_v_out, s, dt);
}

PiResult aux_loop_step(const LoopDesign& gains, double ref, double meas, const PiState& state,
                       double dt) {
    PiState s = state;
    s.u_min = std::max(s.u_min, 0.0);
    s.u_max = std::min(s.u_max, kPhaseShiftLimit);
    return pi_step(gains, ref, meas, s, dt);
}

LoopDesign design_aux_current_loop(const smallsignal::AuxPlant& aux, double v_aux,
                                   const LoopDesign& voltage_loop) {
    if (!(v_aux > 0.0) || aux.k_phi == 0.0) {
        throw std::invalid_argument("current loop needs v_aux > 0 and a non-zero k_phi");
    }
    const double gain = aux.k_phi / v_aux;  // A per p.u.
    LoopDesign d;
    d.omega_c = voltage_loop.omega_c;
    d.omega_z = 0.0;
    d.kp = 0.0;
    d.ki = d.omega_c / gain;
    return d;
}

void validate_plan(const SupervisorPlan& plan) {
    double last = -INFINITY;
    std::optional<double> enable_t;
    for (const auto& e : plan.events) {
        if (!(e.t >= 0.0) || !std::isfinite(e.t)) {
            throw std::invalid_argument("event times must be finite and non-negative");
        }
        if (e.t < last) throw std::invalid_argument("supervisor events are not time-sorted");
        last = e.t;
        if (e.kind == EventKind::enable_active && !enable_t) enable_t = e.t;
        if (e.kind == EventKind::load && !(e.value > 0.0)) {
            throw std::invalid_argument("load events need a positive resistance");
        }
    }
    if (enable_t) {
        for (const auto& e : plan.events) {
            if (e.kind == EventKind::aux_ref && e.t < *enable_t) {
                std::ostringstream os;
                os << "auxiliary reference step at t=" << e.t
                   << " precedes active rectification at t=" << *enable_t;
                throw std::invalid_argument(os.str());
            }
        }
    }
}

SupervisorOutput supervisor_step(const SupervisorPlan& plan, double t) {
    SupervisorOutput out;
    out.main_ref = plan.main_ref;
    out.aux_ref = plan.aux_ref;
    const bool has_enable = std::any_of(plan.events.begin(), plan.events.end(), [](const auto& e) {
        return e.kind == EventKind::enable_active;
    });
    out.mode = has_enable || plan.start_passive ? BridgeMode::passive : BridgeMode::active;
    for (const auto& e : plan.events) {
        if (e.t > t) break;
        switch (e.kind) {
            case EventKind::enable_active:
                out.mode = BridgeMode::active;
                break;
            case EventKind::aux_ref:
                out.aux_ref = e.value;
                break;
            case EventKind::main_ref:
                out.main_ref = e.value;
                break;
            case EventKind::load:
                (e.port == sim::Port::main ? out.r_load : out.r_aux) = e.value;
                break;
        }
    }
    return out;
}

std::vector<sim::LoadEvent> load_events(const SupervisorPlan& plan) {
    std::vector<sim::LoadEvent> out;
    for (const auto& e : plan.events) {
        if (e.kind == EventKind::load) out.push_back({e.t, e.port, e.value});
    }
    return out;
}

ClosedLoopController::ClosedLoopController(const ConverterParams& params,
                                           ClosedLoopConfig config)
    : params_(params), config_(std::move(config)) {
    validate_plan(config_.plan);
    if (!(config_.phi_max > 0.0 && config_.phi_max <= kPhaseShiftLimit)) {
        throw std::invalid_argument("phi_max must lie in (0, 0.25]");
    }
    const double ref = config_.plan.main_ref;
    const double d0 = config_.forced_duty.value_or(
        config_.initial_duty.value_or(ref > params_.v_bat ? 1.0 - params_.v_bat / ref : 0.5));
    main_ = make_pi_state(config_.duty_min, config_.duty_max, d0);
    aux_ = make_pi_state(0.0, config_.phi_max, 0.0);
}

sim::PeriodCommand ClosedLoopController::on_period(const sim::PeriodInput& in) {
    const double dt = params_.period();
    const SupervisorOutput sup = supervisor_step(config_.plan, in.t);
    main_ref_ = sup.main_ref;
    aux_ref_ = sup.aux_ref;

    sim::PeriodCommand cmd;
    cmd.mode = sup.mode;

    main_err_ = main_ref_ - in.last_mean.v_out;
    if (config_.forced_duty) {
        main_.output = *config_.forced_duty;
        main_.saturated = false;
    } else {
        main_ = pi_step(config_.main, main_ref_, in.last_mean.v_out, main_, dt).state;
    }
    cmd.cmd.d = main_.output;

    const bool active = sup.mode == BridgeMode::active;
    const double meas =
        config_.aux_mode == AuxMode::voltage ? in.last_mean.v_aux : in.i_aux_last_mean;
    aux_err_ = aux_ref_ - meas;
    if (active) {
        // The first active period starts from a fresh integrator.
        if (!was_active_) aux_ = make_pi_state(0.0, config_.phi_max, 0.0);
        aux_ = pi_step(config_.aux, aux_ref_, meas, aux_, dt).state;
        cmd.cmd.phi = aux_.output;
    } else {
        aux_ = make_pi_state(0.0, config_.phi_max, 0.0);
        cmd.cmd.phi = 0.0;
    }
    was_active_ = active;
    return cmd;
}

std::vector<std::string> ClosedLoopController::telemetry_names() const {
    return {"main:ref", "main:e", "main:u", "main:sat", "aux:ref", "aux:e", "aux:u", "aux:sat"};
}

void ClosedLoopController::telemetry(std::span<double> out) const {
    out[0] = main_ref_;
    out[1] = main_err_;
    out[2] = main_.output;
    out[3] = main_.saturated ? 1.0 : 0.0;
    out[4] = aux_ref_;
    out[5] = aux_err_;
    out[6] = aux_.output;
    out[7] = aux_.saturated ? 1.0 : 0.0;
}

}  // namespace cimpc::control
