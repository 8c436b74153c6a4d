#include "qdtune/pinchoff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace qd {

namespace {

struct FitCore {
    double a = 0.0, b = 0.0, c = 0.0;
    double sse = std::numeric_limits<double>::infinity();
    bool converged = false;
};

double model(double x, double a, double b, double c) { return a * (1.0 + std::tanh(b * x + c)); }

double sse_of(const std::vector<double>& xs, const std::vector<double>& ys, double a, double b,
              double c) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = model(xs[i], a, b, c) - ys[i];
        s += e * e;
    }
    return s;
}

// Levenberg-Marquardt on (a, b, c). 3x3 normal equations solved directly.
FitCore lm_fit(const std::vector<double>& xs, const std::vector<double>& ys, double a0, double b0,
               double c0) {
    const std::size_t n = xs.size();
    double a = a0, b = b0, c = c0;
    double sse = sse_of(xs, ys, a, b, c);
    double lambda = 1e-3;
    bool converged = false;

    for (int iter = 0; iter < 200; ++iter) {
        double jtj[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        double jte[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const double u = b * xs[i] + c;
            const double th = std::tanh(u);
            const double sech2 = 1.0 - th * th;
            const double e = a * (1.0 + th) - ys[i];
            const double j[3] = {1.0 + th, a * sech2 * xs[i], a * sech2};
            for (int r = 0; r < 3; ++r) {
                jte[r] += j[r] * e;
                for (int s = r; s < 3; ++s) jtj[r][s] += j[r] * j[s];
            }
        }
        jtj[1][0] = jtj[0][1];
        jtj[2][0] = jtj[0][2];
        jtj[2][1] = jtj[1][2];

        const double gnorm = std::sqrt(jte[0] * jte[0] + jte[1] * jte[1] + jte[2] * jte[2]);
        if (gnorm < 1e-12 * (1.0 + sse)) {
            converged = true;
            break;
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
            double m[3][4];
            for (int r = 0; r < 3; ++r) {
                for (int s = 0; s < 3; ++s) m[r][s] = jtj[r][s];
                m[r][r] += lambda * std::max(jtj[r][r], 1e-12);
                m[r][3] = -jte[r];
            }
            // Gaussian elimination with partial pivoting.
            bool singular = false;
            for (int col = 0; col < 3; ++col) {
                int piv = col;
                for (int r = col + 1; r < 3; ++r) {
                    if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
                }
                if (std::fabs(m[piv][col]) < 1e-300) {
                    singular = true;
                    break;
                }
                std::swap(m[col], m[piv]);
                for (int r = col + 1; r < 3; ++r) {
                    const double f = m[r][col] / m[col][col];
                    for (int s = col; s < 4; ++s) m[r][s] -= f * m[col][s];
                }
            }
            if (singular) {
                lambda *= 10.0;
                continue;
            }
            double delta[3];
            for (int r = 2; r >= 0; --r) {
                double acc = m[r][3];
                for (int s = r + 1; s < 3; ++s) acc -= m[r][s] * delta[s];
                delta[r] = acc / m[r][r];
            }
            const double na = a + delta[0], nb = b + delta[1], nc = c + delta[2];
            const double nsse = sse_of(xs, ys, na, nb, nc);
            if (nsse < sse) {
                const double rel = (sse - nsse) / std::max(sse, 1e-300);
                a = na;
                b = nb;
                c = nc;
                sse = nsse;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (rel < 1e-14 || sse < 1e-24) {
                    converged = true;
                }
            } else {
                lambda *= 4.0;
            }
        }
        if (!stepped) {
            converged = true;  // damping exhausted: local minimum
            break;
        }
        if (converged) break;
    }
    return {a, b, c, sse, converged};
}

}  // namespace

Trace normalize_and_canonicalize(const std::vector<double>& raw_setpoints,
                                 const std::vector<double>& raw_currents, double a_max,
                                 Gate gate) {
    if (!(a_max > 0.0)) throw std::invalid_argument("a_max must be positive");
    if (raw_setpoints.size() != raw_currents.size()) {
        throw std::invalid_argument("setpoints and currents must have the same length");
    }
    if (raw_setpoints.size() < 8) throw std::invalid_argument("trace needs at least 8 points");

    std::vector<std::size_t> order(raw_setpoints.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return raw_setpoints[i] < raw_setpoints[j];
    });
    Trace t;
    t.gate = gate;
    t.setpoints.reserve(order.size());
    t.currents.reserve(order.size());
    for (std::size_t i : order) {
        t.setpoints.push_back(raw_setpoints[i]);
        t.currents.push_back(raw_currents[i] / a_max);
    }
    return t;
}

Trace smooth(const Trace& trace, double sigma_samples) {
    if (!(sigma_samples > 0.0)) throw std::invalid_argument("sigma must be positive");
    const int n = static_cast<int>(trace.currents.size());
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_samples)));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma_samples * sigma_samples));
        norm += kernel[k + radius];
    }
    for (double& w : kernel) w /= norm;

    Trace out = trace;
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            int idx = i + k;
            // reflect padding: ... c b a | a b c ... | c b a
            while (idx < 0 || idx >= n) {
                if (idx < 0) idx = -idx - 1;
                if (idx >= n) idx = 2 * n - idx - 1;
            }
            acc += kernel[k + radius] * trace.currents[idx];
        }
        out.currents[i] = acc;
    }
    return out;
}

PinchoffFit fit_tanh(const Trace& trace) {
    const std::size_t n = trace.setpoints.size();
    const double v_lo = trace.setpoints.front();
    const double v_hi = trace.setpoints.back();
    const double span = std::max(v_hi - v_lo, 1e-12);
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = (trace.setpoints[i] - v_lo) / span;
    const auto& ys = trace.currents;

    const auto [mn_it, mx_it] = std::minmax_element(ys.begin(), ys.end());
    const double mn = *mn_it, mx = *mx_it;
    const double a0 = 0.5 * (mx - mn);
    const double half = 0.5 * (mx + mn);
    double x_half = 0.5;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double gap = std::fabs(ys[i] - half);
        if (gap < best_gap) {
            best_gap = gap;
            x_half = xs[i];
        }
    }

    FitCore best;
    for (double b0 : {4.0, 10.0, 25.0}) {
        const FitCore fc = lm_fit(xs, ys, a0, b0, -b0 * x_half);
        if (fc.sse < best.sse || (fc.converged && !best.converged && fc.sse < best.sse * 1.0001)) {
            best = fc;
        }
    }

    PinchoffFit fit;
    fit.a = std::fabs(best.a);  // amplitude reported non-negative
    if (best.a < 0.0) {
        fit.b = -best.b;
        fit.c = -best.c;
    } else {
        fit.b = best.b;
        fit.c = best.c;
    }
    fit.residual_norm = std::sqrt(best.sse / static_cast<double>(n));
    fit.degraded = !best.converged;
    return fit;
}

std::array<double, 3> extract_voltages(const Trace& trace) {
    const int n = static_cast<int>(trace.setpoints.size());
    if (n < kVarianceWindow) throw std::invalid_argument("variance window larger than trace");
    const auto& xs = trace.setpoints;
    const auto& ys = trace.currents;
    const double v_lo = xs.front();
    const double v_hi = xs.back();
    const int hw = kVarianceWindow / 2;

    // v_T: centre of the 5-sample window with the highest variance.
    int i_t = hw;
    double best_var = -1.0;
    for (int i = hw; i < n - hw; ++i) {
        double mean = 0.0;
        for (int k = -hw; k <= hw; ++k) mean += ys[i + k];
        mean /= kVarianceWindow;
        double var = 0.0;
        for (int k = -hw; k <= hw; ++k) {
            const double d = ys[i + k] - mean;
            var += d * d;
        }
        if (var > best_var) {
            best_var = var;
            i_t = i;
        }
    }
    const double v_t = xs[i_t];

    // v_L: zero-current intercept of the tangent at v_T.
    const double slope = (ys[i_t + 1] - ys[i_t - 1]) / (xs[i_t + 1] - xs[i_t - 1]);
    double v_l;
    if (std::fabs(slope) < 1e-12) {
        v_l = v_lo;
    } else {
        v_l = v_t - ys[i_t] / slope;
    }
    v_l = std::clamp(v_l, v_lo, v_hi);

    // v_H: minimum of the second divided difference.
    int i_h = 1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 1; i < n - 1; ++i) {
        const double d2 = 2.0 *
                          ((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) -
                           (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])) /
                          (xs[i + 1] - xs[i - 1]);
        if (d2 < best_d2) {
            best_d2 = d2;
            i_h = i;
        }
    }
    const double v_h = std::clamp(xs[i_h], v_lo, v_hi);

    return {v_l, v_t, v_h};
}

PinchoffFit analyze(const Trace& canonical, double smoothing_sigma) {
    const Trace sm = smooth(canonical, smoothing_sigma);
    PinchoffFit fit = fit_tanh(sm);
    const auto [v_l, v_t, v_h] = extract_voltages(sm);
    fit.v_L = v_l;
    fit.v_T = v_t;
    fit.v_H = v_h;

    double low_sum = 0.0, high_sum = 0.0;
    int low_n = 0, high_n = 0;
    for (std::size_t i = 0; i < sm.setpoints.size(); ++i) {
        if (sm.setpoints[i] <= v_l + 1e-12) {
            low_sum += sm.currents[i];
            ++low_n;
        }
        if (sm.setpoints[i] >= v_h - 1e-12) {
            high_sum += sm.currents[i];
            ++high_n;
        }
    }
    fit.A_L = low_n > 0 ? low_sum / low_n : sm.currents.front();
    fit.A_H = high_n > 0 ? high_sum / high_n : sm.currents.back();
    return fit;
}

FeatureVector features(const PinchoffFit& fit) {
    return {fit.a, fit.b, fit.residual_norm, fit.A_L};
}

std::string trace_to_csv(const Trace& trace) {
    std::string out = "setpoint,current\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.setpoints.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", trace.setpoints[i], trace.currents[i]);
        out += buf;
    }
    return out;
}

}  // namespace qd
