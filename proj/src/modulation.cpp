#include "cimpc/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace cimpc {

namespace {

double wrap(double t, double period) {
    double r = std::fmod(t, period);
    if (r < 0.0) r += period;
    return r;
}

// Gate pattern as a function of the in-period offset. Only evaluated strictly
// inside the intervals between breakpoints, so boundary rounding never matters.
struct PatternFn {
    double period;
    double d;
    double phi;
    ScheduleOptions opt;

    bool in_dead_window(double t, double edge) const {
        const double since = wrap(t - edge, period);
        return since < opt.dead_time;
    }

    SwitchState operator()(double t) const {
        SwitchState s;
        const double on_end = d * period;
        s.m1 = t < on_end && t >= opt.dead_time;
        s.m2 = opt.leg == LegMode::synchronous && t >= on_end + opt.dead_time;

        if (opt.mode == BridgeMode::passive) return s;

        const double bridge_duty = opt.bridge_duty == BridgeDuty::half ? 0.5 : d;
        const double rise = phi * period;
        const double fall = wrap((phi + bridge_duty) * period, period);
        const bool high = wrap(t - rise, period) < bridge_duty * period;
        if (in_dead_window(t, rise) || in_dead_window(t, fall)) return s;
        s.bridge_polarity = high ? +1 : -1;
        s.q1 = s.q4 = high;
        s.q2 = s.q3 = !high;
        return s;
    }
};

}  // namespace

GateSchedule build_schedule(const ModulationCommand& cmd, const OperatingPoint& op,
                            const ScheduleOptions& options) {
    if (!(op.t_period > 0.0)) throw std::domain_error("build_schedule: period must be positive");
    if (!(cmd.d > 0.0 && cmd.d < 1.0)) throw std::domain_error("build_schedule: d outside (0, 1)");
    if (!(cmd.phi >= 0.0 && cmd.phi <= kPhaseShiftLimit)) {
        throw std::domain_error("build_schedule: phi outside [0, 0.25]");
    }
    const double period = op.t_period;
    const PatternFn pattern{period, cmd.d, cmd.phi, options};

    const double bridge_duty = options.bridge_duty == BridgeDuty::half ? 0.5 : cmd.d;
    const double td = options.dead_time;
    std::vector<double> marks = {0.0, td, cmd.d * period, cmd.d * period + td};
    if (options.mode == BridgeMode::active) {
        const double rise = cmd.phi * period;
        const double fall = wrap((cmd.phi + bridge_duty) * period, period);
        for (double m : {rise, rise + td, fall, fall + td}) marks.push_back(wrap(m, period));
    }
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
    marks.erase(std::remove_if(marks.begin(), marks.end(),
                               [&](double m) { return m < 0.0 || m >= period; }),
                marks.end());

    GateSchedule schedule;
    schedule.period = period;
    schedule.cmd = cmd;
    schedule.options = options;
    for (std::size_t i = 0; i < marks.size(); ++i) {
        const double next = i + 1 < marks.size() ? marks[i + 1] : period;
        if (next <= marks[i]) continue;
        const SwitchState s = pattern(0.5 * (marks[i] + next));
        if (!schedule.edges.empty() && schedule.edges.back().state == s) continue;
        schedule.edges.push_back({marks[i], s});
    }
    return schedule;
}

SwitchState state_at(const GateSchedule& schedule, double t) {
    if (t < 0.0) throw std::domain_error("state_at: t must be non-negative");
    const double offset = wrap(t, schedule.period);
    auto it = std::upper_bound(schedule.edges.begin(), schedule.edges.end(), offset,
                               [](double v, const GateEdge& e) { return v < e.t; });
    if (it == schedule.edges.begin()) return schedule.edges.back().state;
    return std::prev(it)->state;
}

Region region_of(double t, const ModulationCommand& cmd, const OperatingPoint& op) {
    if (cmd.phi > cmd.d || cmd.d + cmd.phi > 1.0) {
        throw std::domain_error("region_of: phi must not exceed d or 1 - d");
    }
    const double tau = wrap(t, op.t_period) / op.t_period;
    if (tau < cmd.phi) return Region::I;
    if (tau < cmd.d) return Region::II;
    if (tau < cmd.d + cmd.phi) return Region::III;
    return Region::IV;
}

int region_bridge_sign(Region region) {
    return (region == Region::II || region == Region::III) ? +1 : -1;
}

void write_schedule_csv(std::ostream& os, const GateSchedule& schedule) {
    os << "t,m1,m2,q1,q2,q3,q4,polarity\n";
    os << std::setprecision(17);
    for (const auto& e : schedule.edges) {
        const auto& s = e.state;
        os << e.t << ',' << s.m1 << ',' << s.m2 << ',' << s.q1 << ',' << s.q2 << ',' << s.q3
           << ',' << s.q4 << ',' << s.bridge_polarity << '\n';
    }
}

}  // namespace cimpc
