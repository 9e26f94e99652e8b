#pragma once

// Converter parameter model: electrical constants of both stages, the two
// control variables, and the operating point they are evaluated at.

#include <stdexcept>
#include <string>
#include <vector>

namespace cimpc {

/// Electrical constants of the coupled-inductor multi-port converter.
///
/// n_ratio is secondary turns over primary turns (a 9:2 winding gives 2/9).
/// l_mag is the primary-side magnetizing inductance, which plays the boost
/// inductor role; l_e is the series (leakage) inductance of the secondary loop.
struct ConverterParams {
    double v_bat = 0.0;    // V
    double n_ratio = 0.0;  // secondary / primary
    double l_mag = 0.0;    // H
    double l_e = 0.0;      // H
    double c_out = 0.0;    // F
    double c_aux = 0.0;    // F
    double c_bat = 0.0;    // F, 0 = ideal source
    double f_sw = 0.0;     // Hz
    double r_load = 0.0;   // ohm, main port
    double r_aux = 0.0;    // ohm, auxiliary port

    double period() const { return 1.0 / f_sw; }
};

/// Duty ratio of M1 and outer phase shift of the secondary bridge, both per-unit.
struct ModulationCommand {
    double d = 0.5;
    double phi = 0.0;
};

inline constexpr double kPhaseShiftLimit = 0.25;
inline constexpr double kDutyWarnBand = 0.01;

struct OperatingPoint {
    double v_out = 0.0;     // V
    double v_aux = 0.0;     // V
    double t_period = 0.0;  // s
};

/// Parameter set bundled with its nominal command and operating point.
struct NominalSet {
    ConverterParams params;
    ModulationCommand cmd;
    OperatingPoint op;
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return errors.empty(); }
    std::string summary() const;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

ValidationReport validate(const ConverterParams& params, const ModulationCommand& cmd);
ValidationReport validate(const ConverterParams& params);

/// Throws ValidationError when validate() reports hard failures.
void require_valid(const ConverterParams& params, const ModulationCommand& cmd);

/// Simulation parameter set: 40 V battery, 9:2 winding, 64 uH leakage,
/// 4.92 mH magnetizing, 50 kHz, 80 V / 15 V outputs.
NominalSet table2_defaults();

/// Hardware prototype parameter set: 53.3 uH leakage, 5.7 mH magnetizing,
/// 14 V auxiliary reference.
NominalSet table3_defaults();

/// Operating point at the nominal 50% duty for a given auxiliary voltage.
OperatingPoint nominal_operating_point(const ConverterParams& params, double v_aux);

}  // namespace cimpc
