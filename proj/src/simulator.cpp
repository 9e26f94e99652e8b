#include "cimpc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cimpc::sim {

namespace {

enum Channel : std::size_t {
    kChIMag,
    kChILe,
    kChVOut,
    kChVAux,
    kChVNode,
    kChVp,
    kChVs,
    kChIIn,
    kChIBridge,
    kChICaux,
    kChPIn,
    kChPMain,
    kChPAux,
    kChPMainLoad,
    kChPAuxLoad,
    kChPLoss,
    kChD,
    kChPhi,
    kChActive,
    kBaseChannelCount
};

constexpr int kMaxCrossingSplits = 4;

double zero_crossing_fraction(double before, double after) {
    return before / (before - after);
}

StateVec step_with_crossings(NetworkResolver& resolver, const AffineModel& model,
                             const SwitchState& gates, const StateVec& x, double dt,
                             Integrator method, int depth, bool* split = nullptr) {
    StateVec next = integrate_step(model, x, dt, method);
    if (depth >= kMaxCrossingSplits) return next;

    const ConverterParams& p = resolver.params();
    double theta = 2.0;
    bool zero_leg = false;
    if (!model.leg_gated && model.leg != LegConduction::blocked) {
        const double ip0 = primary_current(p, x);
        const double ip1 = primary_current(p, next);
        const bool crossed = model.leg == LegConduction::high ? (ip0 >= 0.0 && ip1 < 0.0)
                                                              : (ip0 <= 0.0 && ip1 > 0.0);
        if (crossed) {
            theta = zero_crossing_fraction(ip0, ip1);
            zero_leg = true;
        }
    }
    const double i0 = x[kILe];
    const double i1 = next[kILe];
    const bool bridge_crossed =
        (model.bridge == BridgeConduction::diode_pos && i0 >= 0.0 && i1 < 0.0) ||
        (model.bridge == BridgeConduction::diode_neg && i0 <= 0.0 && i1 > 0.0);
    bool zero_bridge = false;
    if (bridge_crossed) {
        const double th = zero_crossing_fraction(i0, i1);
        if (th < theta) {
            theta = th;
            zero_leg = false;
        }
        zero_bridge = th <= theta;
    }
    if (!(theta <= 1.0)) return next;

    if (split) *split = true;
    theta = std::clamp(theta, 0.0, 1.0);
    StateVec mid = theta > 0.0 ? integrate_step(model, x, theta * dt, method) : x;
    if (zero_bridge) mid[kILe] = 0.0;
    if (zero_leg) mid[kIMag] = -p.n_ratio * mid[kILe];
    const double rest = (1.0 - theta) * dt;
    if (rest <= 0.0) return mid;
    const AffineModel& after = resolver.resolve(gates, mid);
    return step_with_crossings(resolver, after, gates, mid, rest, method, depth + 1, split);
}

void fill_channels(double* ch, const AffineModel& m, const StateVec& x, const ConverterParams& p,
                   const NetworkOptions& o, const PeriodCommand& cmd) {
    const double i_in = primary_current(p, x);
    const double i_bridge = m.bridge_sign * x[kILe];
    const double v_out = x[kVOut];
    const double v_aux = x[kVAux];
    ch[kChIMag] = x[kIMag];
    ch[kChILe] = x[kILe];
    ch[kChVOut] = v_out;
    ch[kChVAux] = v_aux;
    ch[kChVNode] = x[kVNode];
    ch[kChVp] = m.v_p.eval(x);
    ch[kChVs] = m.v_s.eval(x);
    ch[kChIIn] = i_in;
    ch[kChIBridge] = i_bridge;
    ch[kChICaux] = i_bridge - v_aux / p.r_aux;
    ch[kChPIn] = x[kVNode] * i_in;
    ch[kChPMain] = m.leg == LegConduction::high ? v_out * i_in : 0.0;
    ch[kChPAux] = v_aux * i_bridge;
    ch[kChPMainLoad] = v_out * v_out / p.r_load;
    ch[kChPAuxLoad] = v_aux * v_aux / p.r_aux;
    const bool diode = m.bridge == BridgeConduction::diode_pos ||
                       m.bridge == BridgeConduction::diode_neg;
    ch[kChPLoss] = o.parasitics.r_le * x[kILe] * x[kILe] +
                   (diode ? 2.0 * o.parasitics.v_diode * std::abs(x[kILe]) : 0.0);
    ch[kChD] = cmd.cmd.d;
    ch[kChPhi] = cmd.cmd.phi;
    ch[kChActive] = cmd.mode == BridgeMode::active ? 1.0 : 0.0;
}

struct CycleAccumulator {
    std::vector<double> sum, sumsq, lo, hi;
    std::size_t count = 0;

    explicit CycleAccumulator(std::size_t n) : sum(n), sumsq(n), lo(n), hi(n) { reset(); }

    void reset() {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(sumsq.begin(), sumsq.end(), 0.0);
        std::fill(lo.begin(), lo.end(), std::numeric_limits<double>::infinity());
        std::fill(hi.begin(), hi.end(), -std::numeric_limits<double>::infinity());
        count = 0;
    }

    void add(const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum[i] += v[i];
            sumsq[i] += v[i] * v[i];
            lo[i] = std::min(lo[i], v[i]);
            hi[i] = std::max(hi[i], v[i]);
        }
        ++count;
    }

    double mean(std::size_t i) const { return sum[i] / static_cast<double>(count); }

    // Row layout matches cycle_names(): per channel mean, min, max, rms.
    void row(std::vector<double>& out) const {
        const std::size_t n = sum.size();
        out.resize(4 * n);
        const double c = static_cast<double>(count);
        for (std::size_t i = 0; i < n; ++i) {
            out[4 * i] = sum[i] / c;
            out[4 * i + 1] = lo[i];
            out[4 * i + 2] = hi[i];
            out[4 * i + 3] = std::sqrt(std::max(0.0, sumsq[i] / c));
        }
    }
};

std::vector<std::string> cycle_names(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    out.reserve(4 * names.size());
    for (const auto& n : names) {
        out.push_back(n);
        out.push_back(n + ":min");
        out.push_back(n + ":max");
        out.push_back(n + ":rms");
    }
    return out;
}

std::size_t steps_per_period(double period, double& dt) {
    if (dt <= 0.0) dt = period / kDefaultStepsPerPeriod;
    const double ratio = period / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-6 * rounded) {
        std::ostringstream os;
        os << "dt must divide the switching period evenly (T/dt = " << ratio << ")";
        throw std::invalid_argument(os.str());
    }
    if (rounded < kMinStepsPerPeriod) {
        std::ostringstream os;
        os << "dt must not exceed T/" << kMinStepsPerPeriod << " (T/dt = " << rounded << ")";
        throw std::invalid_argument(os.str());
    }
    dt = period / rounded;
    return static_cast<std::size_t>(rounded);
}

ModulationCommand sanitize(ModulationCommand cmd) {
    cmd.d = std::clamp(cmd.d, 1e-6, 1.0 - 1e-6);
    cmd.phi = std::clamp(cmd.phi, 0.0, kPhaseShiftLimit);
    return cmd;
}

}  // namespace

const std::vector<std::string>& base_channels() {
    static const std::vector<std::string> names = {
        "i_mag", "i_le", "v_out", "v_aux", "v_bat_node", "v_p", "v_s",
        "i_in", "i_bridge", "i_caux", "p_in", "p_main", "p_aux", "p_main_load",
        "p_aux_load", "p_loss", "d", "phi", "active",
    };
    return names;
}

StateVec advance(const SwitchState& gates, const StateVec& x, double dt,
                 const ConverterParams& params, const NetworkOptions& options,
                 Integrator method) {
    NetworkResolver resolver(params, options);
    const AffineModel& model = resolver.resolve(gates, x);
    return step_with_crossings(resolver, model, gates, x, dt, method, 0);
}

SimulationResult run_with_controller(const ConverterParams& params, Controller& controller,
                                     std::vector<LoadEvent> events,
                                     const SimulationOptions& options) {
    require_valid(params, ModulationCommand{0.5, 0.0});
    if (!(options.duration > 0.0)) throw std::invalid_argument("duration must be positive");
    if (options.decimation == 0) throw std::invalid_argument("decimation must be >= 1");

    const double period = params.period();
    double dt = options.dt;
    const std::size_t n_steps = steps_per_period(period, dt);
    const auto n_periods =
        static_cast<std::size_t>(std::ceil(options.duration / period - 1e-9));

    std::stable_sort(events.begin(), events.end(),
                     [](const LoadEvent& a, const LoadEvent& b) { return a.t < b.t; });
    for (const auto& e : events) {
        if (!(e.ohms > 0.0)) throw std::invalid_argument("load event resistance must be positive");
    }

    std::vector<std::string> names = base_channels();
    const auto telemetry_names = controller.telemetry_names();
    names.insert(names.end(), telemetry_names.begin(), telemetry_names.end());
    const std::size_t n_base = kBaseChannelCount;
    const std::size_t n_channels = names.size();

    SimulationResult result;
    result.dt = dt;
    result.period = period;
    const auto first_trace_step = static_cast<std::size_t>(
        std::max(0.0, std::ceil(options.record_from / dt - 1e-9)));
    const std::size_t trace_start =
        (first_trace_step + options.decimation - 1) / options.decimation * options.decimation;
    result.trace = Waveform(static_cast<double>(trace_start) * dt,
                            dt * static_cast<double>(options.decimation), names);
    result.cycles = Waveform(0.0, period, cycle_names(names));
    result.cycles.reserve(n_periods);

    ConverterParams live = params;
    NetworkResolver resolver(live, options.network);
    StateVec x = (options.initial_set ? options.initial : initial_state(params)).to_vec();

    std::vector<double> channels(n_channels, 0.0);
    std::vector<double> end_channels(n_channels, 0.0);
    std::vector<double> telemetry(telemetry_names.size(), 0.0);
    std::vector<double> cycle_row;
    CycleAccumulator acc(n_channels);

    StateVector last_mean = StateVector::from_vec(x);
    double last_i_aux = 0.0;
    std::size_t next_event = 0;
    std::size_t global_step = 0;
    OperatingPoint op{0.0, 0.0, period};

    std::vector<std::pair<std::size_t, SwitchState>> edges;
    for (std::size_t k_period = 0; k_period < n_periods; ++k_period) {
        const double t_start = static_cast<double>(global_step) * dt;
        PeriodInput in{k_period, t_start, StateVector::from_vec(x), last_mean, last_i_aux};
        PeriodCommand cmd = controller.on_period(in);
        cmd.cmd = sanitize(cmd.cmd);
        controller.telemetry(telemetry);
        std::copy(telemetry.begin(), telemetry.end(), channels.begin() + n_base);

        ScheduleOptions sched = options.schedule;
        sched.mode = cmd.mode;
        const GateSchedule schedule = build_schedule(cmd.cmd, op, sched);
        edges.clear();
        for (const auto& e : schedule.edges) {
            const auto k = static_cast<std::size_t>(
                std::min<long long>(std::llround(e.t / dt), static_cast<long long>(n_steps)));
            if (!edges.empty() && edges.back().first == k) {
                edges.back().second = e.state;
            } else {
                edges.emplace_back(k, e.state);
            }
        }

        acc.reset();
        std::size_t edge_idx = 0;
        SwitchState gates = edges.front().second;
        for (std::size_t k = 0; k < n_steps; ++k, ++global_step) {
            while (edge_idx < edges.size() && edges[edge_idx].first <= k) {
                gates = edges[edge_idx].second;
                ++edge_idx;
            }
            while (next_event < events.size() &&
                   std::llround(events[next_event].t / dt) <= static_cast<long long>(global_step)) {
                const auto& e = events[next_event++];
                if (e.port == Port::main) {
                    live.r_load = e.ohms;
                } else {
                    live.r_aux = e.ohms;
                }
                resolver.set_params(live);
            }

            const AffineModel& model = resolver.resolve(gates, x);
            if (options.record_trace && global_step >= trace_start &&
                global_step % options.decimation == 0) {
                fill_channels(channels.data(), model, x, live, options.network, cmd);
                result.trace.append(channels);
            }
            bool split = false;
            const StateVec next =
                step_with_crossings(resolver, model, gates, x, dt, options.integrator, 0, &split);
            if (!split) {
                const StateVec mid = 0.5 * (x + next);
                fill_channels(channels.data(), model, mid, live, options.network, cmd);
            } else {
                // A commutation inside the step: average the two ends, each
                // under its own conduction state.
                fill_channels(channels.data(), model, x, live, options.network, cmd);
                fill_channels(end_channels.data(), resolver.resolve(gates, next), next, live,
                              options.network, cmd);
                for (std::size_t i = 0; i < n_base; ++i) {
                    channels[i] = 0.5 * (channels[i] + end_channels[i]);
                }
            }
            acc.add(channels);
            x = next;
        }

        acc.row(cycle_row);
        result.cycles.append(cycle_row);
        last_mean = StateVector{acc.mean(kChIMag), acc.mean(kChILe), acc.mean(kChVOut),
                                acc.mean(kChVAux), acc.mean(kChVNode)};
        last_i_aux = acc.mean(kChIBridge);
    }

    result.final_state = StateVector::from_vec(x);
    result.steps = global_step;
    return result;
}

SimulationResult run_open_loop(const ConverterParams& params, const ModulationCommand& cmd,
                               BridgeMode mode, const SimulationOptions& options) {
    require_valid(params, cmd);
    FixedController controller(cmd, mode);
    return run_with_controller(params, controller, {}, options);
}

}  // namespace cimpc::sim
