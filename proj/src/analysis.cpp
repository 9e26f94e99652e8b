#include "cimpc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace cimpc::analysis {

namespace {

std::span<const double> slice(const Waveform& w, const std::string& channel,
                              const TimeWindow& window) {
    if (!(window.t_end > window.t_begin)) throw AnalysisError("empty analysis window");
    const auto [first, last] = w.window(window.t_begin, window.t_end);
    if (last <= first) throw AnalysisError("analysis window holds no samples of " + channel);
    return w.channel(channel).subspan(first, last - first);
}

}  // namespace

double mean(const Waveform& w, const std::string& channel, const TimeWindow& window) {
    const auto s = slice(w, channel, window);
    double sum = 0.0;
    for (double v : s) sum += v;
    return sum / static_cast<double>(s.size());
}

double rms(const Waveform& w, const std::string& channel, const TimeWindow& window) {
    const auto s = slice(w, channel, window);
    double sum = 0.0;
    for (double v : s) sum += v * v;
    return std::sqrt(sum / static_cast<double>(s.size()));
}

double rms_ac(const Waveform& w, const std::string& channel, const TimeWindow& window) {
    const double m = mean(w, channel, window);
    const auto s = slice(w, channel, window);
    double sum = 0.0;
    for (double v : s) sum += (v - m) * (v - m);
    return std::sqrt(sum / static_cast<double>(s.size()));
}

double peak_to_peak(const Waveform& w, const std::string& channel, const TimeWindow& window) {
    const auto s = slice(w, channel, window);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    return *hi - *lo;
}

double measure_ripple(const Waveform& w, const std::string& channel, const TimeWindow& window,
                      double period) {
    if (window.length() < kMinRipplePeriods * period * (1.0 - 1e-9)) {
        std::ostringstream os;
        os << "ripple window of " << window.length() / period << " periods is shorter than "
           << kMinRipplePeriods;
        throw AnalysisError(os.str());
    }
    const auto s = slice(w, channel, window);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double m = mean(w, channel, window);
    const double scale = std::max(std::abs(*lo), std::abs(*hi));
    if (std::abs(m) <= 1e-9 * scale || m == 0.0) {
        throw AnalysisError("ripple undefined for near-zero mean of " + channel);
    }
    return 100.0 * (*hi - *lo) / m;
}

double cycle_ripple(const Waveform& cycles, const std::string& channel,
                    const TimeWindow& window) {
    const double period = cycles.dt();
    if (window.length() < kMinRipplePeriods * period * (1.0 - 1e-9)) {
        std::ostringstream os;
        os << "ripple window of " << window.length() / period << " periods is shorter than "
           << kMinRipplePeriods;
        throw AnalysisError(os.str());
    }
    const auto lo = slice(cycles, channel + ":min", window);
    const auto hi = slice(cycles, channel + ":max", window);
    const double m = mean(cycles, channel, window);
    const double vmin = *std::min_element(lo.begin(), lo.end());
    const double vmax = *std::max_element(hi.begin(), hi.end());
    const double scale = std::max(std::abs(vmin), std::abs(vmax));
    if (m == 0.0 || std::abs(m) <= 1e-9 * scale) {
        throw AnalysisError("ripple undefined for near-zero mean of " + channel);
    }
    return 100.0 * (vmax - vmin) / m;
}

double cycle_rms(const Waveform& cycles, const std::string& channel, const TimeWindow& window) {
    const auto s = slice(cycles, channel + ":rms", window);
    double sum = 0.0;
    for (double v : s) sum += v * v;
    return std::sqrt(sum / static_cast<double>(s.size()));
}

double periodicity_error(const Waveform& trace, const std::string& channel,
                         const TimeWindow& window, double period) {
    const double ratio = period / trace.dt();
    const auto stride = static_cast<std::size_t>(std::llround(ratio));
    if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-6 * ratio) {
        throw AnalysisError("trace spacing does not divide the period");
    }
    const auto s = slice(trace, channel, window);
    if (s.size() <= stride) throw AnalysisError("periodicity window shorter than one period");
    double diff = 0.0;
    double peak = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        peak = std::max(peak, std::abs(s[i]));
        if (i + stride < s.size()) diff = std::max(diff, std::abs(s[i + stride] - s[i]));
    }
    return peak > 0.0 ? diff / peak : 0.0;
}

PowerResult average_power(const Waveform& w, const std::string& power_channel,
                          const TimeWindow& window, double period) {
    PowerResult r;
    const double exact = window.length() / period;
    double n = std::round(exact);
    if (n < 1.0) n = 1.0;
    if (std::abs(exact - n) > 1e-6) {
        std::ostringstream os;
        os << "window of " << exact << " periods rounded to " << n;
        r.warning = os.str();
    }
    r.periods = n;
    r.watts = mean(w, power_channel, {window.t_begin, window.t_begin + n * period});
    return r;
}

SettlingMetrics settling(const Waveform& w, const std::string& channel, double setpoint,
                         double t_event, double t_end, double band_fraction) {
    const auto [first, last] = w.window(t_event, t_end);
    if (last <= first) throw AnalysisError("settling window holds no samples");
    const auto x = w.channel(channel);
    const double band = std::abs(setpoint) * band_fraction;
    SettlingMetrics m;
    m.setpoint = setpoint;
    std::size_t last_outside = first;
    bool any_outside = false;
    for (std::size_t i = first; i < last; ++i) {
        const double dev = x[i] - setpoint;
        if (std::abs(dev) > std::abs(m.peak_deviation)) {
            m.peak_deviation = dev;
            m.peak_time = w.time(i);
        }
        if (std::abs(dev) > band) {
            last_outside = i;
            any_outside = true;
        }
    }
    if (!any_outside) {
        m.recovery_time = 0.0;
    } else if (last_outside + 1 < last) {
        m.recovery_time = w.time(last_outside + 1) - t_event;
    }
    return m;
}

bool AnalysisReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string AnalysisReport::to_text() const {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "# " << title << '\n';
    if (!ripple.empty()) {
        os << "\n[ripple %]\n";
        for (const auto& r : ripple) os << r.channel << " = " << r.percent << '\n';
    }
    if (!powers.empty()) {
        os << "\n[power W]\n";
        for (const auto& p : powers) os << p.port << " = " << p.watts << '\n';
    }
    if (!events.empty()) {
        os << "\n[events]\n";
        for (const auto& e : events) {
            os << e.label << ": " << e.channel << " setpoint " << e.metrics.setpoint
               << " peak_dev " << e.metrics.peak_deviation << " at " << e.metrics.peak_time
               << " s, recovery ";
            if (e.metrics.recovery_time < 0.0) {
                os << "none";
            } else {
                os << e.metrics.recovery_time << " s";
            }
            os << '\n';
        }
    }
    if (!notes.empty()) {
        os << "\n[notes]\n";
        for (const auto& n : notes) os << n << '\n';
    }
    if (!checks.empty()) {
        os << "\n[checks]\n";
        for (const auto& c : checks) {
            os << (c.pass ? "PASS " : "FAIL ") << c.name;
            if (!c.detail.empty()) os << "  (" << c.detail << ')';
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace cimpc::analysis
