#include "cimpc/network.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace cimpc::sim {

namespace {

// Currents below this magnitude count as zero for diode decisions.
constexpr double kZeroCurrent = 1e-9;

StateRow unit(int i) {
    StateRow r = StateRow::Zero();
    r[i] = 1.0;
    return r;
}

bool is_diode(BridgeConduction c) {
    return c == BridgeConduction::diode_pos || c == BridgeConduction::diode_neg;
}

int bridge_sign_of(BridgeConduction c) {
    switch (c) {
        case BridgeConduction::gated_pos:
        case BridgeConduction::diode_pos:
            return +1;
        case BridgeConduction::gated_neg:
        case BridgeConduction::diode_neg:
            return -1;
        case BridgeConduction::blocked:
            return 0;
    }
    return 0;
}

struct Candidate {
    LegConduction leg;
    bool leg_gated;
    bool leg_zero;  // chosen at zero current, needs a derivative/bias check
};

struct BridgeCandidate {
    BridgeConduction bridge;
    bool zero;
};

bool consistent(const AffineModel& m, const Candidate& leg, const BridgeCandidate& br,
                const StateVec& x, const ConverterParams& p, const NetworkOptions& o) {
    const StateVec dx = m.derivative(x);
    if (leg.leg_zero) {
        const double dip = dx[kIMag] + p.n_ratio * dx[kILe];
        switch (leg.leg) {
            case LegConduction::high:
                if (!(dip > 0.0)) return false;
                break;
            case LegConduction::low:
                if (!(dip < 0.0)) return false;
                break;
            case LegConduction::blocked: {
                const double v_sw = x[kVNode] - m.v_p.eval(x);
                if (v_sw > x[kVOut] || v_sw < 0.0) return false;
                break;
            }
        }
    }
    if (br.zero) {
        const double drop = 2.0 * o.parasitics.v_diode;
        switch (br.bridge) {
            case BridgeConduction::diode_pos:
                if (!(dx[kILe] > 0.0)) return false;
                break;
            case BridgeConduction::diode_neg:
                if (!(dx[kILe] < 0.0)) return false;
                break;
            case BridgeConduction::blocked: {
                const double drive = p.n_ratio * m.v_p.eval(x);
                if (std::abs(drive) > x[kVAux] + drop) return false;
                break;
            }
            default:
                break;
        }
    }
    return true;
}

}  // namespace

StateVec StateVector::to_vec() const {
    StateVec x;
    x << i_mag, i_le, v_out, v_aux, v_bat_node;
    return x;
}

StateVector StateVector::from_vec(const StateVec& x) {
    return StateVector{x[kIMag], x[kILe], x[kVOut], x[kVAux], x[kVNode]};
}

StateVector initial_state(const ConverterParams& params) {
    return StateVector{0.0, 0.0, params.v_bat, 0.0, params.v_bat};
}

AffineModel build_model(LegConduction leg, BridgeConduction bridge, bool leg_gated,
                        const ConverterParams& p, const NetworkOptions& o) {
    AffineModel m;
    m.leg = leg;
    m.bridge = bridge;
    m.leg_gated = leg_gated;
    m.bridge_sign = bridge_sign_of(bridge);

    const double n = p.n_ratio;
    const double r = o.parasitics.r_le;
    const double drop = is_diode(bridge) ? 2.0 * o.parasitics.v_diode : 0.0;

    AffineExpr v_br;
    if (bridge != BridgeConduction::blocked) {
        v_br.row = m.bridge_sign * unit(kVAux);
        v_br.offset = m.bridge_sign * drop;
    }

    switch (leg) {
        case LegConduction::low:
            m.v_p.row = unit(kVNode);
            break;
        case LegConduction::high:
            m.v_p.row = unit(kVNode) - unit(kVOut);
            break;
        case LegConduction::blocked:
            // i_mag + n i_le held at zero: the winding voltage settles where
            // both inductor branches change current in proportion.
            if (bridge != BridgeConduction::blocked) {
                const double k = (n / p.l_e) / (1.0 / p.l_mag + n * n / p.l_e);
                m.v_p.row = k * (v_br.row + r * unit(kILe));
                m.v_p.offset = k * v_br.offset;
            }
            break;
    }

    if (bridge == BridgeConduction::blocked) {
        m.v_s.row = n * m.v_p.row;
        m.v_s.offset = n * m.v_p.offset;
    } else {
        m.v_s = v_br;
    }

    m.m.row(kIMag) = m.v_p.row / p.l_mag;
    m.b[kIMag] = m.v_p.offset / p.l_mag;

    if (bridge != BridgeConduction::blocked) {
        m.m.row(kILe) = (n * m.v_p.row - v_br.row - r * unit(kILe)) / p.l_e;
        m.b[kILe] = (n * m.v_p.offset - v_br.offset) / p.l_e;
    }

    if (!o.hold_v_out) {
        StateRow row = -unit(kVOut) / p.r_load;
        if (leg == LegConduction::high) row += unit(kIMag) + n * unit(kILe);
        m.m.row(kVOut) = row / p.c_out;
    }

    if (!o.hold_v_aux) {
        m.m.row(kVAux) = (m.bridge_sign * unit(kILe) - unit(kVAux) / p.r_aux) / p.c_aux;
    }

    if (p.c_bat > 0.0 && o.parasitics.r_bat_source > 0.0) {
        const double g = 1.0 / o.parasitics.r_bat_source;
        m.m.row(kVNode) = (-g * unit(kVNode) - unit(kIMag) - n * unit(kILe)) / p.c_bat;
        m.b[kVNode] = g * p.v_bat / p.c_bat;
    }
    return m;
}

NetworkResolver::NetworkResolver(const ConverterParams& params, const NetworkOptions& options)
    : params_(params), options_(options) {}

void NetworkResolver::set_params(const ConverterParams& params) {
    params_ = params;
    for (auto& entry : cache_) entry.reset();
}

const AffineModel& NetworkResolver::model(LegConduction leg, BridgeConduction bridge,
                                          bool leg_gated) {
    const auto key = (static_cast<std::size_t>(leg) * 5 + static_cast<std::size_t>(bridge)) * 2 +
                     (leg_gated ? 1 : 0);
    auto& slot = cache_[key];
    if (!slot) slot = build_model(leg, bridge, leg_gated, params_, options_);
    return *slot;
}

const AffineModel& NetworkResolver::resolve(const SwitchState& gates, const StateVec& x) {
    const ConverterParams& p = params_;
    Candidate legs[3];
    int n_legs = 0;
    if (gates.m1) {
        legs[n_legs++] = {LegConduction::low, true, false};
    } else if (gates.m2) {
        legs[n_legs++] = {LegConduction::high, true, false};
    } else {
        const double ip = primary_current(p, x);
        if (ip > kZeroCurrent) {
            legs[n_legs++] = {LegConduction::high, false, false};
        } else if (ip < -kZeroCurrent) {
            legs[n_legs++] = {LegConduction::low, false, false};
        } else {
            legs[n_legs++] = {LegConduction::high, false, true};
            legs[n_legs++] = {LegConduction::low, false, true};
            legs[n_legs++] = {LegConduction::blocked, false, true};
        }
    }

    BridgeCandidate bridges[3];
    int n_bridges = 0;
    if (gates.bridge_polarity > 0) {
        bridges[n_bridges++] = {BridgeConduction::gated_pos, false};
    } else if (gates.bridge_polarity < 0) {
        bridges[n_bridges++] = {BridgeConduction::gated_neg, false};
    } else {
        const double ile = x[kILe];
        if (ile > kZeroCurrent) {
            bridges[n_bridges++] = {BridgeConduction::diode_pos, false};
        } else if (ile < -kZeroCurrent) {
            bridges[n_bridges++] = {BridgeConduction::diode_neg, false};
        } else {
            bridges[n_bridges++] = {BridgeConduction::diode_pos, true};
            bridges[n_bridges++] = {BridgeConduction::diode_neg, true};
            bridges[n_bridges++] = {BridgeConduction::blocked, true};
        }
    }

    for (int i = 0; i < n_legs; ++i) {
        for (int j = 0; j < n_bridges; ++j) {
            const AffineModel& m = model(legs[i].leg, bridges[j].bridge, legs[i].leg_gated);
            if (consistent(m, legs[i], bridges[j], x, p, options_)) return m;
        }
    }
    std::ostringstream os;
    os << "no consistent conduction pattern (i_mag=" << x[kIMag] << ", i_le=" << x[kILe]
       << ", v_out=" << x[kVOut] << ", v_aux=" << x[kVAux] << ")";
    throw SimulationError(os.str());
}

AffineModel resolve_network(const SwitchState& gates, const StateVec& x,
                            const ConverterParams& p, const NetworkOptions& o) {
    NetworkResolver resolver(p, o);
    return resolver.resolve(gates, x);
}

AffineModel resolve_network(const SwitchState& gates, const StateVector& state,
                            const ConverterParams& params, const NetworkOptions& options) {
    return resolve_network(gates, state.to_vec(), params, options);
}

StateVec integrate_step(const AffineModel& model, const StateVec& x, double dt,
                        Integrator method) {
    StateVec next;
    if (method == Integrator::rk4) {
        const StateVec k1 = model.derivative(x);
        const StateVec k2 = model.derivative(x + 0.5 * dt * k1);
        const StateVec k3 = model.derivative(x + 0.5 * dt * k2);
        const StateVec k4 = model.derivative(x + dt * k3);
        next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } else {
        Eigen::Matrix<double, kStateSize + 1, kStateSize + 1> aug;
        aug.setZero();
        aug.topLeftCorner<kStateSize, kStateSize>() = model.m * dt;
        aug.topRightCorner<kStateSize, 1>() = model.b * dt;
        const Eigen::Matrix<double, kStateSize + 1, kStateSize + 1> e = aug.exp();
        next = e.topLeftCorner<kStateSize, kStateSize>() * x + e.topRightCorner<kStateSize, 1>();
    }
    if (!next.allFinite()) {
        std::ostringstream os;
        os << "non-finite state after integration step (dt=" << dt << ")";
        throw SimulationError(os.str());
    }
    return next;
}

StateVector integrate_step(const AffineModel& model, const StateVector& state, double dt,
                           Integrator method) {
    return StateVector::from_vec(integrate_step(model, state.to_vec(), dt, method));
}

}  // namespace cimpc::sim
