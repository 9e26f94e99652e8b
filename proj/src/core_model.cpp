#include "cimpc/core_model.hpp"

#include <cmath>
#include <sstream>

namespace cimpc {

namespace {

void require_positive(ValidationReport& report, const char* name, double value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        std::ostringstream os;
        os << name << " must be strictly positive (got " << value << ")";
        report.errors.push_back(os.str());
    }
}

}  // namespace

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& e : errors) os << "error: " << e << '\n';
    for (const auto& w : warnings) os << "warning: " << w << '\n';
    return os.str();
}

ValidationError::ValidationError(ValidationReport report)
    : std::runtime_error("invalid converter configuration:\n" + report.summary()),
      report_(std::move(report)) {}

ValidationReport validate(const ConverterParams& p) {
    ValidationReport report;
    require_positive(report, "v_bat", p.v_bat);
    require_positive(report, "n_ratio", p.n_ratio);
    require_positive(report, "l_mag", p.l_mag);
    require_positive(report, "l_e", p.l_e);
    require_positive(report, "c_out", p.c_out);
    require_positive(report, "c_aux", p.c_aux);
    require_positive(report, "f_sw", p.f_sw);
    require_positive(report, "r_load", p.r_load);
    require_positive(report, "r_aux", p.r_aux);
    if (!(p.c_bat >= 0.0) || !std::isfinite(p.c_bat)) {
        report.errors.push_back("c_bat must be non-negative");
    }
    return report;
}

ValidationReport validate(const ConverterParams& params, const ModulationCommand& cmd) {
    ValidationReport report = validate(params);
    if (!(cmd.d > 0.0 && cmd.d < 1.0)) {
        std::ostringstream os;
        os << "duty ratio d must lie in (0, 1) (got " << cmd.d << ")";
        report.errors.push_back(os.str());
    }
    if (!(cmd.phi >= 0.0 && cmd.phi <= kPhaseShiftLimit)) {
        std::ostringstream os;
        os << "phase shift phi must lie in [0, " << kPhaseShiftLimit
           << "] p.u. (got " << cmd.phi << ")";
        report.errors.push_back(os.str());
    }
    if (report.ok() && std::abs(cmd.d - 0.5) > kDutyWarnBand) {
        std::ostringstream os;
        os << "duty ratio " << cmd.d
           << " deviates from 0.5; auxiliary operation is asymmetric and degraded";
        report.warnings.push_back(os.str());
    }
    return report;
}

void require_valid(const ConverterParams& params, const ModulationCommand& cmd) {
    auto report = validate(params, cmd);
    if (!report.ok()) throw ValidationError(std::move(report));
}

OperatingPoint nominal_operating_point(const ConverterParams& params, double v_aux) {
    return OperatingPoint{2.0 * params.v_bat, v_aux, 1.0 / params.f_sw};
}

NominalSet table2_defaults() {
    ConverterParams p;
    p.v_bat = 40.0;
    p.n_ratio = 2.0 / 9.0;
    p.l_mag = 4.92e-3;
    p.l_e = 64e-6;
    p.c_out = 156e-6;
    p.c_aux = 97e-6;
    p.c_bat = 0.0;
    p.f_sw = 50e3;
    p.r_load = 40.0;
    // 30 W at 15 V
    p.r_aux = 7.5;
    return NominalSet{p, ModulationCommand{0.5, 0.15}, nominal_operating_point(p, 15.0)};
}

NominalSet table3_defaults() {
    ConverterParams p;
    p.v_bat = 40.0;
    p.n_ratio = 2.0 / 9.0;
    p.l_mag = 5.7e-3;
    p.l_e = 53.3e-6;
    p.c_out = 160e-6;
    p.c_aux = 100e-6;
    p.c_bat = 0.0;
    p.f_sw = 50e3;
    p.r_load = 40.0;
    // 30 W at 14 V
    p.r_aux = 14.0 * 14.0 / 30.0;
    return NominalSet{p, ModulationCommand{0.5, 0.15}, nominal_operating_point(p, 14.0)};
}

}  // namespace cimpc
