#pragma once

// Steady-state and transient metrics on recorded waveforms.

#include "cimpc/waveform.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace cimpc::analysis {

struct TimeWindow {
    double t_begin = 0.0;
    double t_end = 0.0;
    double length() const { return t_end - t_begin; }
};

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kMinRipplePeriods = 20.0;

/// 100 * (max - min) / mean over the window. The window must span at least
/// kMinRipplePeriods switching periods; a mean within 1e-9 of zero relative to
/// the channel peak is rejected.
double measure_ripple(const Waveform& w, const std::string& channel, const TimeWindow& window,
                      double period);

/// Ripple from a per-period record holding "X", "X:min" and "X:max" columns:
/// the extremes are those of every integration step inside the window.
double cycle_ripple(const Waveform& cycles, const std::string& channel, const TimeWindow& window);

/// RMS over the window from the per-period "X:rms" column.
double cycle_rms(const Waveform& cycles, const std::string& channel, const TimeWindow& window);

/// max |x(t + T) - x(t)| over the window divided by max |x|, from a trace
/// whose sample spacing divides the period.
double periodicity_error(const Waveform& trace, const std::string& channel,
                         const TimeWindow& window, double period);

/// Window mean of a channel.
double mean(const Waveform& w, const std::string& channel, const TimeWindow& window);
double rms(const Waveform& w, const std::string& channel, const TimeWindow& window);
double rms_ac(const Waveform& w, const std::string& channel, const TimeWindow& window);
double peak_to_peak(const Waveform& w, const std::string& channel, const TimeWindow& window);

struct PowerResult {
    double watts = 0.0;
    double periods = 0.0;  // whole periods actually averaged
    std::string warning;   // set when the window was rounded
};

/// Mean of the instantaneous power channel over a whole number of periods
/// starting at window.t_begin. Non-integer windows are rounded to the nearest
/// period count and reported in the warning.
PowerResult average_power(const Waveform& w, const std::string& power_channel,
                          const TimeWindow& window, double period);

struct SettlingMetrics {
    double setpoint = 0.0;
    double peak_deviation = 0.0;   // signed, largest |x - setpoint| after the event
    double peak_time = 0.0;
    double recovery_time = -1.0;   // time after the event to re-enter and stay in band; -1 = never
};

/// Settling of a (cycle-averaged) channel after an event at t_event, against
/// a band of +/- band_fraction * setpoint.
SettlingMetrics settling(const Waveform& w, const std::string& channel, double setpoint,
                         double t_event, double t_end, double band_fraction);

struct RippleEntry {
    std::string channel;
    double percent = 0.0;
};

struct PowerEntry {
    std::string port;
    double watts = 0.0;
};

struct EventEntry {
    std::string label;
    std::string channel;
    SettlingMetrics metrics;
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct AnalysisReport {
    std::string title;
    std::vector<RippleEntry> ripple;
    std::vector<PowerEntry> powers;
    std::vector<EventEntry> events;
    std::vector<Check> checks;
    std::vector<std::string> notes;

    bool passed() const;
    std::string to_text() const;
};

}  // namespace cimpc::analysis
