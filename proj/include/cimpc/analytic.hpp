#pragma once

// Closed-form four-region description of the leakage-inductor current and
// the auxiliary-port power it carries.
//
// Per switching period the primary winding sees +V_p for dT and -V_p for the
// rest, and the secondary bridge applies the same square wave delayed by phi*T.
// That splits the period into four linear regions with slopes +A, +B, -A, -B:
//
//   A = (N V_p + V_s) / L_e,   B = (N V_p - V_s) / L_e
//
// Positive power flows into the auxiliary port.

#include "cimpc/core_model.hpp"

#include <array>
#include <stdexcept>
#include <vector>

namespace cimpc::analytic {

struct RegionCoefficients {
    double a_slope = 0.0;  // A/s
    double b_slope = 0.0;  // A/s
};

struct RegionWindow {
    double duration = 0.0;  // s
    int bridge_sign = 0;    // sign of the voltage the bridge applies, as a multiple of V_s
};

using RegionSchedule = std::array<RegionWindow, 4>;

struct BoundaryCurrents {
    double i1 = 0.0;
    double i2 = 0.0;
    double i3 = 0.0;
    double i4 = 0.0;
    std::array<double, 4> i_avg{};  // regional averages, Regions I..IV
};

/// Raised when the four region increments do not close over one period.
class FluxImbalanceError : public std::domain_error {
public:
    explicit FluxImbalanceError(double residual);
    /// Sum of the four current increments, B*T*(2d-1), in amperes.
    double residual() const { return residual_; }

private:
    double residual_;
};

/// V_p is the battery voltage, V_s the auxiliary voltage of the operating point.
RegionCoefficients region_coefficients(const ConverterParams& params, const OperatingPoint& op);

/// Durations phi*T, (d-phi)*T, phi*T, (1-phi-d)*T with bridge signs -, +, +, -.
RegionSchedule region_schedule(const ModulationCommand& cmd, const OperatingPoint& op);

/// Sum of the four per-region current increments over one period.
double period_increment(const ConverterParams& params, const ModulationCommand& cmd,
                        const OperatingPoint& op);

/// Boundary currents for a given I1 (valid for any d).
BoundaryCurrents boundary_currents_from_i1(const ConverterParams& params,
                                           const ModulationCommand& cmd,
                                           const OperatingPoint& op, double i1);

/// Steady-state boundary currents at d = 0.5, closing the system with the
/// half-wave symmetry I3 = -I1. Throws FluxImbalanceError for d != 0.5.
BoundaryCurrents boundary_currents(const ConverterParams& params, const ModulationCommand& cmd,
                                   const OperatingPoint& op);

/// Closed-form auxiliary power in terms of V_bat, V_aux and f. Requires d = 0.5,
/// where the I1 term of the general expression vanishes.
double aux_power(const ConverterParams& params, const ModulationCommand& cmd,
                 const OperatingPoint& op);

/// General-duty auxiliary power; the caller supplies I1 because the region
/// analysis does not determine it off-nominal.
double aux_power(const ConverterParams& params, const ModulationCommand& cmd,
                 const OperatingPoint& op, double i1);

/// Power assembled from the regional average currents and the bridge signs.
double aux_power_from_regions(const ConverterParams& params, const ModulationCommand& cmd,
                              const OperatingPoint& op, double i1);

/// Expanded form in the generic winding voltages V_p, V_s and period T.
double aux_power_expanded(double n_ratio, double l_e, double v_p, double v_s, double t_period,
                          const ModulationCommand& cmd);

struct PowerSample {
    double phi = 0.0;
    double power = 0.0;
};

/// Evaluates aux_power over a phase-shift grid at duty d.
std::vector<PowerSample> power_curve(const ConverterParams& params, const OperatingPoint& op,
                                     double d, const std::vector<double>& phi_grid);

/// d(P)/d(phi) at phi0 for d = 0.5 (small-signal gain of the power stage).
double power_sensitivity(const ConverterParams& params, const ModulationCommand& cmd_at_phi0,
                         const OperatingPoint& op);

}  // namespace cimpc::analytic
