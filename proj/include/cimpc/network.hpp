#pragma once

// Piecewise-affine model of the switched converter circuit.
//
// Coupled inductor: magnetizing inductance l_mag across the primary winding,
// an ideal transformer of ratio n_ratio, and the leakage inductance l_e in
// series with the secondary loop. The primary winding carries
// i_mag + n_ratio * i_le.
//
//   v_p = v_node            (M1 conducting)
//   v_p = v_node - v_out    (M2 channel or its diode conducting)
//   l_mag di_mag/dt = v_p
//   l_e   di_le/dt  = n_ratio v_p - v_s - r_le i_le
//   c_out dv_out/dt = [upper leg] (i_mag + n_ratio i_le) - v_out / r_load
//   c_aux dv_aux/dt = s i_le - v_aux / r_aux,   v_s = s v_aux, s in {-1, 0, +1}
//
// For a fixed conduction pattern this is dx/dt = M x + b.

#include "cimpc/core_model.hpp"
#include "cimpc/modulation.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace cimpc::sim {

inline constexpr int kStateSize = 5;
using StateVec = Eigen::Matrix<double, kStateSize, 1>;
using StateMat = Eigen::Matrix<double, kStateSize, kStateSize>;
using StateRow = Eigen::Matrix<double, 1, kStateSize>;

enum StateIndex : int { kIMag = 0, kILe = 1, kVOut = 2, kVAux = 3, kVNode = 4 };

struct StateVector {
    double i_mag = 0.0;       // A, primary magnetizing current
    double i_le = 0.0;        // A, secondary leakage-inductor current
    double v_out = 0.0;       // V
    double v_aux = 0.0;       // V
    double v_bat_node = 0.0;  // V, battery terminal (constant unless c_bat > 0)

    StateVec to_vec() const;
    static StateVector from_vec(const StateVec& x);
};

/// Default initial conditions: outputs pre-charged as in the idle circuit,
/// v_out = v_bat through the boost path, v_aux = 0, currents 0.
StateVector initial_state(const ConverterParams& params);

/// Non-ideal elements, all zero by default.
struct Parasitics {
    double r_le = 0.0;          // ohm, series resistance of the secondary loop
    double v_diode = 0.0;       // V, forward drop per bridge diode
    double r_bat_source = 0.0;  // ohm, battery source resistance feeding c_bat
};

struct NetworkOptions {
    LegMode leg = LegMode::synchronous;
    bool hold_v_out = false;  // main port clamped to its initial value
    bool hold_v_aux = false;  // auxiliary port clamped to its initial value
    Parasitics parasitics;
};

enum class LegConduction { low, high, blocked };
enum class BridgeConduction { gated_pos, gated_neg, diode_pos, diode_neg, blocked };

/// Affine expression r * x + c.
struct AffineExpr {
    StateRow row = StateRow::Zero();
    double offset = 0.0;
    double eval(const StateVec& x) const { return row.dot(x) + offset; }
};

struct AffineModel {
    StateMat m = StateMat::Zero();
    StateVec b = StateVec::Zero();
    LegConduction leg = LegConduction::low;
    BridgeConduction bridge = BridgeConduction::blocked;
    bool leg_gated = false;
    AffineExpr v_p;      // primary winding voltage
    AffineExpr v_s;      // bridge terminal voltage
    int bridge_sign = 0; // current delivered to the aux node is bridge_sign * i_le

    StateVec derivative(const StateVec& x) const { return m * x + b; }
};

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Primary winding (= battery) current.
inline double primary_current(const ConverterParams& p, const StateVec& x) {
    return x[kIMag] + p.n_ratio * x[kILe];
}

/// Builds the affine model for the present gates and state. Ungated devices
/// are resolved with the ideal-diode complementarity rule: a diode conducts
/// while its current is positive or would become positive, and blocks while
/// reverse biased.
AffineModel resolve_network(const SwitchState& gates, const StateVector& state,
                            const ConverterParams& params, const NetworkOptions& options);

AffineModel resolve_network(const SwitchState& gates, const StateVec& x,
                            const ConverterParams& params, const NetworkOptions& options);

/// Model for an explicit conduction pattern (no consistency check).
AffineModel build_model(LegConduction leg, BridgeConduction bridge, bool leg_gated,
                        const ConverterParams& params, const NetworkOptions& options);

/// resolve_network with the per-pattern models memoized; set_params clears
/// the memo.
class NetworkResolver {
public:
    NetworkResolver(const ConverterParams& params, const NetworkOptions& options);

    const AffineModel& resolve(const SwitchState& gates, const StateVec& x);
    const AffineModel& model(LegConduction leg, BridgeConduction bridge, bool leg_gated);

    void set_params(const ConverterParams& params);
    const ConverterParams& params() const { return params_; }
    const NetworkOptions& options() const { return options_; }

private:
    ConverterParams params_;
    NetworkOptions options_;
    std::array<std::optional<AffineModel>, 3 * 5 * 2> cache_;
};

enum class Integrator { rk4, exact };

/// One fixed step of dx/dt = M x + b. rk4 is fourth order; exact uses the
/// matrix exponential of the augmented system.
StateVec integrate_step(const AffineModel& model, const StateVec& x, double dt,
                        Integrator method = Integrator::rk4);

StateVector integrate_step(const AffineModel& model, const StateVector& state, double dt,
                           Integrator method = Integrator::rk4);

}  // namespace cimpc::sim
