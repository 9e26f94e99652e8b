#pragma once

// Test-side reference computations. They use only circuit laws (KVL across
// the leakage inductor, ideal square-wave winding voltages) and brute-force
// quadrature, never the library's closed forms.

#include <cmath>
#include <vector>

namespace oracle {

struct Ideal {
    double v_bat, n, l_e, f_sw, v_aux;
};

// Bridge terminal voltage sign at normalised time tau in [0, 1): the primary
// square wave is +V_bat on [0, d), and the bridge pattern is the primary
// pattern delayed by phi.
inline int primary_sign(double tau, double d) { return tau < d ? +1 : -1; }
inline int bridge_sign(double tau, double d, double phi) {
    double shifted = tau - phi;
    if (shifted < 0.0) shifted += 1.0;
    return shifted < d ? +1 : -1;
}

// Leakage current slope from KVL: L_e di/dt = N v_p - v_s, with v_p = +/-V_bat
// seen through the magnetizing branch (symmetric at d = 0.5).
inline double slope(const Ideal& c, double tau, double d, double phi) {
    return (c.n * c.v_bat * primary_sign(tau, d) - c.v_aux * bridge_sign(tau, d, phi)) / c.l_e;
}

// i_le over one period sampled at n + 1 points, starting from i0.
inline std::vector<double> current_wave(const Ideal& c, double d, double phi, double i0,
                                        int n = 200000) {
    const double T = 1.0 / c.f_sw;
    std::vector<double> i(n + 1);
    i[0] = i0;
    for (int k = 0; k < n; ++k) {
        const double tau = (k + 0.5) / n;
        i[k + 1] = i[k] + slope(c, tau, d, phi) * T / n;
    }
    return i;
}

// Steady-state start value closed by half-wave symmetry i(T/2) = -i(0).
inline double symmetric_i0(const Ideal& c, double phi, int n = 200000) {
    const auto w = current_wave(c, 0.5, phi, 0.0, n);
    return -0.5 * w[n / 2];
}

// Mean power into the auxiliary source: v_aux * bridge_sign * i_le averaged.
inline double aux_power(const Ideal& c, double phi, int n = 200000) {
    const auto w = current_wave(c, 0.5, phi, symmetric_i0(c, phi, n), n);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double tau = (k + 0.5) / n;
        sum += c.v_aux * bridge_sign(tau, 0.5, phi) * 0.5 * (w[k] + w[k + 1]);
    }
    return sum / n;
}

}  // namespace oracle
