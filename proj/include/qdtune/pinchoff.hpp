#pragma once

// 1D gate-characterization analysis: normalization, Gaussian smoothing,
// tanh model fitting and transition-voltage extraction.
//
// The model is f(x, a, b, c) = a * (1 + tanh(b*x + c)) with x the gate
// voltage normalized to [0, 1] over the sweep window. The transition
// voltage v_T is the setpoint of highest moving-window variance, v_L the
// zero-current intercept of the tangent at v_T, and v_H the setpoint
// minimizing the second finite difference of the current.

#include <array>
#include <string>
#include <vector>

#include "qdtune/device.hpp"

namespace qd {

struct PinchoffFit {
    double a = 0.0;              // amplitude (half of the saturation level)
    double b = 0.0;              // slope in normalized-x units
    double c = 0.0;              // offset
    double residual_norm = 0.0;  // RMS of (data - fit)
    double v_L = 0.0;            // lower bound of the transition region (volts)
    double v_T = 0.0;            // transition voltage (volts)
    double v_H = 0.0;            // upper bound of the transition region (volts)
    double A_L = 0.0;            // mean current over the cut-off region
    double A_H = 0.0;            // mean current over the saturation region
    bool degraded = false;       // fit did not converge; values are best-so-far
};

using FeatureVector = std::array<double, 4>;  // [a, b, residual_norm, A_L]

// Divide currents by a_max and sort points ascending in voltage.
// Throws std::invalid_argument when a_max <= 0, lengths mismatch or n < 8.
Trace normalize_and_canonicalize(const std::vector<double>& raw_setpoints,
                                 const std::vector<double>& raw_currents, double a_max,
                                 Gate gate = Gate::TB);

// Gaussian kernel convolution, truncated at 4 sigma, reflect padding.
Trace smooth(const Trace& trace, double sigma_samples);

// Damped Gauss-Newton fit with multi-start initialization. Never throws on
// bad data; a non-converged fit is returned with degraded = true.
PinchoffFit fit_tanh(const Trace& trace);

// (v_L, v_T, v_H), each clamped to the sweep window.
// Throws std::invalid_argument when the variance window does not fit.
std::array<double, 3> extract_voltages(const Trace& trace);

// Full analysis of a canonicalized trace: smooth, fit, extract, averages.
PinchoffFit analyze(const Trace& canonical, double smoothing_sigma = 2.0);

FeatureVector features(const PinchoffFit& fit);

std::string trace_to_csv(const Trace& trace);

inline constexpr double kDefaultSmoothingSigma = 2.0;
inline constexpr int kVarianceWindow = 5;

}  // namespace qd
