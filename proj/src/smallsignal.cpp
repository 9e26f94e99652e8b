#include "cimpc/smallsignal.hpp"

#include "cimpc/analytic.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cimpc::smallsignal {

namespace {

using cd = std::complex<double>;

// Published simulation-model design constants.
struct Published {
    const char* name;
    double value;
};
constexpr Published kPublished[] = {
    {"omega_n", 562.9},      {"omega_rhp", 2028.0},   {"omega_c_main", 405.2},
    {"omega_z_main", 40.52}, {"omega_c_aux", 40.52},  {"omega_z_aux", 4.052},
    {"main_dc_gain", 160.0}, {"aux_dc_gain", 8.333},  {"kp_main", 0.00297},
    {"ki_main", 0.1203},     {"kp_aux", 0.1201},      {"ki_aux", 0.4866},
};

LoopDesign unity_crossover(double omega_c, cd plant_at_crossover) {
    LoopDesign loop;
    loop.omega_c = omega_c;
    loop.omega_z = omega_c / kZeroDecade;
    const double pi_shape = std::abs(cd(1.0, 0.0) + loop.omega_z / cd(0.0, omega_c));
    loop.kp = 1.0 / (std::abs(plant_at_crossover) * pi_shape);
    loop.ki = loop.kp * loop.omega_z;
    return loop;
}

}  // namespace

BoostPlant boost_plant(const ConverterParams& params, double duty, double r_load) {
    if (!(duty > 0.0 && duty < 1.0)) throw std::domain_error("boost_plant: duty must be in (0, 1)");
    if (!(r_load > 0.0)) throw std::domain_error("boost_plant: r_load must be positive");
    const double off = 1.0 - duty;
    BoostPlant plant;
    plant.omega_rhp = r_load * off * off / params.l_mag;
    plant.omega_n = off / std::sqrt(params.l_mag * params.c_out);
    plant.q_factor = off * r_load * std::sqrt(params.c_out / params.l_mag);
    plant.dc_gain = params.v_bat / (off * off);
    return plant;
}

std::complex<double> gvd(const BoostPlant& plant, double omega) {
    const cd s(0.0, omega);
    const cd num = 1.0 - s / plant.omega_rhp;
    const cd den = 1.0 + s / (plant.q_factor * plant.omega_n) +
                   (s / plant.omega_n) * (s / plant.omega_n);
    return plant.dc_gain * num / den;
}

double gvd_magnitude(const BoostPlant& plant, double omega) {
    if (!(omega > 0.0)) throw std::domain_error("gvd_magnitude: omega must be positive");
    return std::abs(gvd(plant, omega));
}

std::complex<double> gaux(const AuxPlant& plant, double omega) {
    return plant.dc_gain / (1.0 + cd(0.0, omega) / plant.pole);
}

std::complex<double> pi_response(const LoopDesign& loop, double omega) {
    return loop.kp * (1.0 + loop.omega_z / cd(0.0, omega));
}

LoopDesign design_main_loop(const BoostPlant& plant) {
    const double omega_c = plant.omega_rhp / kMainCrossoverDivisor;
    return unity_crossover(omega_c, gvd(plant, omega_c));
}

AuxPlant aux_plant(const ConverterParams& params, const ModulationCommand& cmd_at_phi0,
                   const OperatingPoint& op, double r_aux) {
    if (std::abs(cmd_at_phi0.d - 0.5) > 1e-12) {
        throw std::domain_error("aux_plant: linearization requires d = 0.5");
    }
    if (!(cmd_at_phi0.phi >= 0.0 && cmd_at_phi0.phi <= kPhaseShiftLimit)) {
        throw std::domain_error("aux_plant: phi0 outside [0, 0.25]");
    }
    if (!(r_aux > 0.0) || !(op.v_aux > 0.0)) {
        throw std::domain_error("aux_plant: r_aux and v_aux must be positive");
    }
    AuxPlant plant;
    plant.k_phi = analytic::power_sensitivity(params, cmd_at_phi0, op);
    plant.dc_gain = plant.k_phi / op.v_aux * r_aux;
    plant.pole = 1.0 / (r_aux * params.c_aux);
    plant.zero_gain_warning = std::abs(cmd_at_phi0.d - 2.0 * cmd_at_phi0.phi) < 1e-9;
    return plant;
}

LoopDesign design_aux_loop(const AuxPlant& aux, const LoopDesign& main) {
    const double omega_c = main.omega_c / kBandwidthSeparation;
    return unity_crossover(omega_c, gaux(aux, omega_c));
}

BandwidthReport bandwidth_separation_report(const LoopDesign& main, const LoopDesign& aux) {
    BandwidthReport r;
    r.ratio = main.omega_c / aux.omega_c;
    r.pass = std::abs(r.ratio - kBandwidthSeparation) <= 0.05 * kBandwidthSeparation;
    return r;
}

DesignChain design_chain(const NominalSet& set) {
    DesignChain chain;
    chain.boost = boost_plant(set.params, set.cmd.d, set.params.r_load);
    chain.main = design_main_loop(chain.boost);
    chain.aux = aux_plant(set.params, set.cmd, set.op, set.params.r_aux);
    chain.aux_loop = design_aux_loop(chain.aux, chain.main);
    chain.separation = bandwidth_separation_report(chain.main, chain.aux_loop);
    return chain;
}

double published_constant(const std::string& name) {
    for (const auto& p : kPublished) {
        if (name == p.name) return p.value;
    }
    return std::nan("");
}

std::string design_report(const DesignChain& c, bool compare_to_published) {
    struct Row {
        std::string name;
        double value;
    };
    const Row rows[] = {
        {"omega_n", c.boost.omega_n},         {"q_factor", c.boost.q_factor},
        {"omega_rhp", c.boost.omega_rhp},     {"main_dc_gain", c.boost.dc_gain},
        {"omega_c_main", c.main.omega_c},     {"omega_z_main", c.main.omega_z},
        {"kp_main", c.main.kp},               {"ki_main", c.main.ki},
        {"k_phi", c.aux.k_phi},               {"aux_dc_gain", c.aux.dc_gain},
        {"aux_pole", c.aux.pole},             {"omega_c_aux", c.aux_loop.omega_c},
        {"omega_z_aux", c.aux_loop.omega_z},  {"kp_aux", c.aux_loop.kp},
        {"ki_aux", c.aux_loop.ki},            {"bandwidth_ratio", c.separation.ratio},
    };
    std::ostringstream os;
    os << std::setprecision(6);
    os << "quantity,computed" << (compare_to_published ? ",published,delta_pct" : "") << '\n';
    for (const auto& row : rows) {
        os << row.name << ',' << row.value;
        if (compare_to_published) {
            const double ref = published_constant(row.name);
            if (std::isnan(ref)) {
                os << ",,";
            } else {
                os << ',' << ref << ',' << 100.0 * (row.value - ref) / ref;
            }
        }
        os << '\n';
    }
    os << "bandwidth_separation," << (c.separation.pass ? "pass" : "fail") << '\n';
    if (c.aux.zero_gain_warning) os << "warning,aux plant gain collapses at phi0 = d/2\n";
    return os.str();
}

}  // namespace cimpc::smallsignal
