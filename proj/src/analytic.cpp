#include "cimpc/analytic.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace cimpc::analytic {

namespace {

constexpr double kNominalDutyTol = 1e-12;

bool is_nominal_duty(double d) { return std::abs(d - 0.5) <= kNominalDutyTol; }

std::string imbalance_message(double residual) {
    std::ostringstream os;
    os << "leakage current does not close over one period at d != 0.5 (residual "
       << residual << " A)";
    return os.str();
}

void require_power_inputs(const ConverterParams& params, const ModulationCommand& cmd) {
    require_valid(params, cmd);
}

}  // namespace

FluxImbalanceError::FluxImbalanceError(double residual)
    : std::domain_error(imbalance_message(residual)), residual_(residual) {}

RegionCoefficients region_coefficients(const ConverterParams& params, const OperatingPoint& op) {
    const double np = params.n_ratio * params.v_bat;
    return RegionCoefficients{(np + op.v_aux) / params.l_e, (np - op.v_aux) / params.l_e};
}

RegionSchedule region_schedule(const ModulationCommand& cmd, const OperatingPoint& op) {
    const double t = op.t_period;
    return RegionSchedule{{
        {cmd.phi * t, -1},
        {(cmd.d - cmd.phi) * t, +1},
        {cmd.phi * t, +1},
        {(1.0 - cmd.phi - cmd.d) * t, -1},
    }};
}

double period_increment(const ConverterParams& params, const ModulationCommand& cmd,
                        const OperatingPoint& op) {
    const auto k = region_coefficients(params, op);
    const auto regions = region_schedule(cmd, op);
    const double slopes[4] = {k.a_slope, k.b_slope, -k.a_slope, -k.b_slope};
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) sum += slopes[i] * regions[i].duration;
    return sum;
}

BoundaryCurrents boundary_currents_from_i1(const ConverterParams& params,
                                           const ModulationCommand& cmd,
                                           const OperatingPoint& op, double i1) {
    const auto k = region_coefficients(params, op);
    const double t = op.t_period;
    const double rise_a = k.a_slope * cmd.phi * t;
    const double rise_b = k.b_slope * (cmd.d - cmd.phi) * t;

    BoundaryCurrents bc;
    bc.i1 = i1;
    bc.i2 = i1 + rise_a;
    bc.i3 = i1 + rise_a + rise_b;
    bc.i4 = i1 + rise_b;
    bc.i_avg = {
        i1 + rise_a / 2.0,
        i1 + rise_a + rise_b / 2.0,
        i1 + rise_b + rise_a / 2.0,
        i1 + rise_b / 2.0,
    };
    return bc;
}

BoundaryCurrents boundary_currents(const ConverterParams& params, const ModulationCommand& cmd,
                                   const OperatingPoint& op) {
    if (!is_nominal_duty(cmd.d)) throw FluxImbalanceError(period_increment(params, cmd, op));
    const auto k = region_coefficients(params, op);
    const double t = op.t_period;
    // I3 = -I1 with I3 = I1 + A*phi*T + B*(d-phi)*T
    const double i1 = -(k.a_slope * cmd.phi * t + k.b_slope * (cmd.d - cmd.phi) * t) / 2.0;
    return boundary_currents_from_i1(params, cmd, op, i1);
}

double aux_power(const ConverterParams& params, const ModulationCommand& cmd,
                 const OperatingPoint& op) {
    if (!is_nominal_duty(cmd.d)) {
        throw std::domain_error(
            "closed-form auxiliary power needs an explicit I1 when d != 0.5");
    }
    require_power_inputs(params, cmd);
    const double nvb = params.n_ratio * params.v_bat;
    const double v_aux = op.v_aux;
    const double d = cmd.d;
    const double phi = cmd.phi;
    return v_aux * (d - phi) / (params.l_e * params.f_sw) *
           (2.0 * nvb * phi + (nvb - v_aux) / 2.0 * (2.0 * d - 1.0));
}

double aux_power(const ConverterParams& params, const ModulationCommand& cmd,
                 const OperatingPoint& op, double i1) {
    require_power_inputs(params, cmd);
    const double nvb = params.n_ratio * params.v_bat;
    const double v_aux = op.v_aux;
    const double d = cmd.d;
    const double phi = cmd.phi;
    const double closed = v_aux * (d - phi) / (params.l_e * params.f_sw) *
                          (2.0 * nvb * phi + (nvb - v_aux) / 2.0 * (2.0 * d - 1.0));
    return closed + v_aux * i1 * (2.0 * d - 1.0);
}

double aux_power_from_regions(const ConverterParams& params, const ModulationCommand& cmd,
                              const OperatingPoint& op, double i1) {
    const auto bc = boundary_currents_from_i1(params, cmd, op, i1);
    const auto regions = region_schedule(cmd, op);
    double charge = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        charge += regions[i].bridge_sign * bc.i_avg[i] * regions[i].duration;
    }
    return op.v_aux * charge / op.t_period;
}

double aux_power_expanded(double n_ratio, double l_e, double v_p, double v_s, double t_period,
                          const ModulationCommand& cmd) {
    const double d = cmd.d;
    const double phi = cmd.phi;
    return v_s * t_period * (d - phi) / l_e *
           (2.0 * n_ratio * v_p * phi + (n_ratio * v_p - v_s) / 2.0 * (2.0 * d - 1.0));
}

std::vector<PowerSample> power_curve(const ConverterParams& params, const OperatingPoint& op,
                                     double d, const std::vector<double>& phi_grid) {
    std::vector<PowerSample> out;
    out.reserve(phi_grid.size());
    for (double phi : phi_grid) {
        out.push_back({phi, aux_power(params, ModulationCommand{d, phi}, op)});
    }
    return out;
}

double power_sensitivity(const ConverterParams& params, const ModulationCommand& cmd_at_phi0,
                         const OperatingPoint& op) {
    return 2.0 * params.n_ratio * params.v_bat * op.v_aux / (params.l_e * params.f_sw) *
           (cmd_at_phi0.d - 2.0 * cmd_at_phi0.phi);
}

}  // namespace cimpc::analytic
