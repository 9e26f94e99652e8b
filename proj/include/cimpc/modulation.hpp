#pragma once

// Gate schedules for the main leg (M1/M2) and the secondary full bridge
// (Q1..Q4). Both stages run at one common switching frequency; the bridge
// pattern is the primary square wave delayed by phi*T (outer phase shift).
// Time zero of every period is the rising edge of M1. Intervals are
// left-closed: a state applies from its edge up to, not including, the next.

#include "cimpc/core_model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cimpc {

enum class BridgeMode { passive, active };

/// Synchronous: M2 gated complementary to M1. Diode: M2 replaced by a diode.
enum class LegMode { synchronous, diode };

/// Secondary bridge duty. track_primary reproduces the primary duty d;
/// half keeps a 50% bridge whose rising edge is delayed by phi*T.
enum class BridgeDuty { track_primary, half };

struct SwitchState {
    bool m1 = false;
    bool m2 = false;
    bool q1 = false;
    bool q2 = false;
    bool q3 = false;
    bool q4 = false;
    /// Bridge terminal voltage as a multiple of V_aux imposed by the gates;
    /// 0 when no bridge pair is gated (diodes decide).
    int bridge_polarity = 0;

    bool leg_gated() const { return m1 || m2; }
    bool operator==(const SwitchState&) const = default;
};

struct GateEdge {
    double t = 0.0;  // offset within the period, s
    SwitchState state;
};

struct ScheduleOptions {
    BridgeMode mode = BridgeMode::active;
    LegMode leg = LegMode::synchronous;
    BridgeDuty bridge_duty = BridgeDuty::track_primary;
    double dead_time = 0.0;  // s, inserted before every turn-on
};

struct GateSchedule {
    double period = 0.0;
    ModulationCommand cmd;
    ScheduleOptions options;
    std::vector<GateEdge> edges;  // sorted, first edge at t = 0
};

GateSchedule build_schedule(const ModulationCommand& cmd, const OperatingPoint& op,
                            const ScheduleOptions& options = {});

inline GateSchedule build_schedule(const ModulationCommand& cmd, const OperatingPoint& op,
                                   BridgeMode mode) {
    ScheduleOptions options;
    options.mode = mode;
    return build_schedule(cmd, op, options);
}

/// Switch state at absolute time t >= 0 (evaluated at t mod T).
SwitchState state_at(const GateSchedule& schedule, double t);

enum class Region { I = 1, II = 2, III = 3, IV = 4 };

/// Region of the four-region leakage-current description containing t mod T.
Region region_of(double t, const ModulationCommand& cmd, const OperatingPoint& op);

/// Bridge sign during a region: I and IV apply -V_s, II and III apply +V_s.
int region_bridge_sign(Region region);

/// Edge list as CSV: t,m1,m2,q1,q2,q3,q4,polarity
void write_schedule_csv(std::ostream& os, const GateSchedule& schedule);

}  // namespace cimpc
