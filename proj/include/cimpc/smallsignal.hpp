#pragma once

// Small-signal plants of both stages and the PI designs built on them.
//
// Main stage: ideal CCM boost control-to-output model with the magnetizing
// inductance as the boost inductor,
//
//   G_vd(s) = G_d0 (1 - s/w_rhp) / (1 + s/(Q w_n) + (s/w_n)^2)
//
// Auxiliary stage: the phase-shift sensitivity of the auxiliary power,
// referred to the output voltage through the R_aux || C_aux port.
//
// Both loops use PI(s) = kp (1 + w_z/s) with kp chosen for exact unity loop
// gain at the crossover frequency.

#include "cimpc/core_model.hpp"

#include <complex>
#include <string>

namespace cimpc::smallsignal {

struct BoostPlant {
    double dc_gain = 0.0;    // V per unit duty
    double omega_n = 0.0;    // rad/s
    double q_factor = 0.0;
    double omega_rhp = 0.0;  // rad/s
};

struct AuxPlant {
    double k_phi = 0.0;    // W per p.u. phase shift
    double dc_gain = 0.0;  // V per p.u. phase shift
    double pole = 0.0;     // rad/s
    bool zero_gain_warning = false;
};

struct LoopDesign {
    double omega_c = 0.0;  // rad/s
    double omega_z = 0.0;  // rad/s
    double kp = 0.0;
    double ki = 0.0;
};

inline constexpr double kMainCrossoverDivisor = 5.0;   // w_c = w_rhp / 5
inline constexpr double kZeroDecade = 10.0;            // w_z = w_c / 10
inline constexpr double kBandwidthSeparation = 10.0;   // w_c,aux = w_c,main / 10

BoostPlant boost_plant(const ConverterParams& params, double duty, double r_load);

std::complex<double> gvd(const BoostPlant& plant, double omega);
double gvd_magnitude(const BoostPlant& plant, double omega);

std::complex<double> gaux(const AuxPlant& plant, double omega);

/// PI(jw) = kp (1 + w_z/(jw))
std::complex<double> pi_response(const LoopDesign& loop, double omega);

LoopDesign design_main_loop(const BoostPlant& plant);

/// Phase-shift plant at phi0 for d = 0.5 and the given auxiliary voltage.
AuxPlant aux_plant(const ConverterParams& params, const ModulationCommand& cmd_at_phi0,
                   const OperatingPoint& op, double r_aux);

LoopDesign design_aux_loop(const AuxPlant& aux, const LoopDesign& main);

struct BandwidthReport {
    double ratio = 0.0;
    bool pass = false;
};

/// Main/auxiliary crossover ratio, passing within 10 +/- 5%.
BandwidthReport bandwidth_separation_report(const LoopDesign& main, const LoopDesign& aux);

/// Full design chain for one parameter set.
struct DesignChain {
    BoostPlant boost;
    LoopDesign main;
    AuxPlant aux;
    LoopDesign aux_loop;
    BandwidthReport separation;
};

DesignChain design_chain(const NominalSet& set);

/// Published simulation-model value of a report quantity (omega_n,
/// omega_rhp, omega_c_main, kp_main, ...); NaN when none exists.
double published_constant(const std::string& name);

/// Plain-text report of every plant constant and gain with its deviation from
/// the published simulation-model constants.
std::string design_report(const DesignChain& chain, bool compare_to_published);

}  // namespace cimpc::smallsignal
