#include "qdtune/chargemap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace qd {

std::vector<double> plan_setpoints(double v_lo, double v_hi, const ChargeMapConfig& cfg) {
    if (!(v_lo < v_hi)) throw std::invalid_argument("empty setpoint range");
    const double span = v_hi - v_lo;
    const int refined = static_cast<int>(std::ceil(span / cfg.delta_v_max - 1e-9)) + 1;
    const int n = std::max(cfg.base_points, refined);
    std::vector<double> pts(n);
    for (int i = 0; i < n; ++i) {
        pts[i] = i == n - 1 ? v_hi : v_lo + span * static_cast<double>(i) / (n - 1);
    }
    return pts;
}

BoundaryStats boundary_averages(const CurrentMap& map) {
    if (map.nx() < 2 || map.ny() < 2) throw std::invalid_argument("map must be at least 2x2");
    BoundaryStats s;
    for (std::size_t iy = 0; iy < map.ny(); ++iy) {
        s.left += map.at(iy, 0);
        s.right += map.at(iy, map.nx() - 1);
    }
    s.left /= static_cast<double>(map.ny());
    s.right /= static_cast<double>(map.ny());
    for (std::size_t ix = 0; ix < map.nx(); ++ix) {
        s.bottom += map.at(0, ix);
        s.top += map.at(map.ny() - 1, ix);
    }
    s.bottom /= static_cast<double>(map.nx());
    s.top /= static_cast<double>(map.nx());
    return s;
}

namespace {

PlungerAction pick_action(double low_side, double high_side, double lo, double hi) {
    if (low_side > hi) return PlungerAction::Decrease;
    if (high_side < lo) return PlungerAction::Increase;
    if (high_side > hi) return PlungerAction::Decrease;
    if (low_side < lo) return PlungerAction::Increase;
    return PlungerAction::Keep;
}

// Shift both endpoints; returns false when no movement is possible.
bool apply_shift(VoltageInterval& range, PlungerAction action, double step,
                 const VoltageInterval& safety) {
    if (action == PlungerAction::Keep) return true;
    const double want = action == PlungerAction::Increase ? step : -step;
    double shift = want;
    if (range.hi + shift > safety.hi) shift = safety.hi - range.hi;
    if (range.lo + shift < safety.lo) shift = safety.lo - range.lo;
    if (std::fabs(shift) < 1e-12) return false;
    range.lo += shift;
    range.hi += shift;
    return true;
}

}  // namespace

RangeUpdate adjust_ranges(const BoundaryStats& stats, VoltageInterval lp_range,
                          VoltageInterval rp_range, const ChargeMapConfig& cfg,
                          const VoltageInterval& lp_safety, const VoltageInterval& rp_safety,
                          double a_max) {
    const double lo = cfg.window_low * a_max;
    const double hi = cfg.window_high * a_max;
    RangeUpdate u;
    u.stats = stats;

    const bool in_window = stats.left >= lo && stats.left <= hi && stats.right >= lo &&
                           stats.right <= hi && stats.bottom >= lo && stats.bottom <= hi &&
                           stats.top >= lo && stats.top <= hi;
    if (in_window) {
        u.lp_range = lp_range;
        u.rp_range = rp_range;
        u.terminated = StopReason::InWindow;
        return u;
    }

    u.lp_action = pick_action(stats.left, stats.right, lo, hi);
    u.rp_action = pick_action(stats.bottom, stats.top, lo, hi);

    const bool lp_ok = apply_shift(lp_range, u.lp_action, cfg.shift_step, lp_safety);
    const bool rp_ok = apply_shift(rp_range, u.rp_action, cfg.shift_step, rp_safety);
    u.lp_range = lp_range;
    u.rp_range = rp_range;
    if (!lp_ok || !rp_ok) u.terminated = StopReason::SafetyLimit;
    return u;
}

CurrentMap resample_map(const CurrentMap& map, const ChargeMapConfig& cfg) {
    const double pitch = cfg.segment_size / cfg.pixel_side;
    const double x0 = map.xs.front(), y0 = map.ys.front();
    const double span_x = map.xs.back() - x0;
    const double span_y = map.ys.back() - y0;
    const int npx = std::max(1, static_cast<int>(std::floor(span_x / pitch + 1e-9)));
    const int npy = std::max(1, static_cast<int>(std::floor(span_y / pitch + 1e-9)));

    const auto interp_axis = [](const std::vector<double>& axis, double v, std::size_t& i0,
                                double& frac) {
        if (v <= axis.front()) {
            i0 = 0;
            frac = 0.0;
            return;
        }
        if (v >= axis.back()) {
            i0 = axis.size() - 2;
            frac = 1.0;
            return;
        }
        const auto it = std::upper_bound(axis.begin(), axis.end(), v);
        i0 = static_cast<std::size_t>(it - axis.begin()) - 1;
        frac = (v - axis[i0]) / (axis[i0 + 1] - axis[i0]);
    };

    CurrentMap out;
    out.x_gate = map.x_gate;
    out.y_gate = map.y_gate;
    out.a_max = map.a_max;
    out.xs.resize(npx);
    out.ys.resize(npy);
    out.values.resize(static_cast<std::size_t>(npx) * npy);
    for (int j = 0; j < npx; ++j) out.xs[j] = x0 + (j + 0.5) * pitch;
    for (int j = 0; j < npy; ++j) out.ys[j] = y0 + (j + 0.5) * pitch;
    for (int jy = 0; jy < npy; ++jy) {
        std::size_t iy;
        double fy;
        interp_axis(map.ys, out.ys[jy], iy, fy);
        for (int jx = 0; jx < npx; ++jx) {
            std::size_t ix;
            double fx;
            interp_axis(map.xs, out.xs[jx], ix, fx);
            const double v00 = map.at(iy, ix), v01 = map.at(iy, ix + 1);
            const double v10 = map.at(iy + 1, ix), v11 = map.at(iy + 1, ix + 1);
            out.values[static_cast<std::size_t>(jy) * npx + jx] =
                (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
        }
    }
    return out;
}

AcquireResult acquire_diagram(DeviceSession& dev, VoltageInterval lp_range,
                              VoltageInterval rp_range, const ChargeMapConfig& cfg,
                              int max_adjust_iters) {
    AcquireResult result;
    for (;;) {
        const std::vector<double> xs = plan_setpoints(lp_range.lo, lp_range.hi, cfg);
        const std::vector<double> ys = plan_setpoints(rp_range.lo, rp_range.hi, cfg);
        result.raw_map = dev.sweep_2d(Gate::LP, Gate::RP, lp_range, rp_range,
                                      static_cast<int>(xs.size()), static_cast<int>(ys.size()));
        result.lp_range = lp_range;
        result.rp_range = rp_range;
        if (static_cast<int>(result.history.size()) >= max_adjust_iters) {
            result.exit = StopReason::MaxIters;
            break;
        }
        const RangeUpdate u =
            adjust_ranges(boundary_averages(result.raw_map), lp_range, rp_range, cfg,
                          dev.safety()[static_cast<int>(Gate::LP)],
                          dev.safety()[static_cast<int>(Gate::RP)], dev.a_max());
        result.history.push_back(u);
        if (u.terminated) {
            result.exit = *u.terminated;
            break;
        }
        lp_range = u.lp_range;
        rp_range = u.rp_range;
    }
    result.map = resample_map(result.raw_map, cfg);
    return result;
}

std::vector<Segment> segment_map(const CurrentMap& resampled, const ChargeMapConfig& cfg,
                                 const std::string& source_id) {
    const int side = cfg.pixel_side;
    const int tiles_x = static_cast<int>(resampled.nx()) / side;
    const int tiles_y = static_cast<int>(resampled.ny()) / side;
    const double pitch = cfg.segment_size / side;
    std::vector<Segment> out;
    out.reserve(static_cast<std::size_t>(std::max(0, tiles_x * tiles_y)));
    const double x_corner = resampled.xs.empty() ? 0.0 : resampled.xs.front() - 0.5 * pitch;
    const double y_corner = resampled.ys.empty() ? 0.0 : resampled.ys.front() - 0.5 * pitch;
    const double a_max = resampled.a_max > 0 ? resampled.a_max : 1.0;
    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            Segment s;
            s.origin_lp = x_corner + tx * cfg.segment_size;
            s.origin_rp = y_corner + ty * cfg.segment_size;
            s.source_id = source_id;
            s.pixels.resize(static_cast<std::size_t>(side) * side);
            for (int py = 0; py < side; ++py) {
                for (int px = 0; px < side; ++px) {
                    s.pixels[static_cast<std::size_t>(py) * side + px] =
                        resampled.at(static_cast<std::size_t>(ty * side + py),
                                     static_cast<std::size_t>(tx * side + px)) /
                        a_max;
                }
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<Regime> assess_segments(const std::vector<Segment>& segments,
                                    const ml::Model& single_dot_quality,
                                    const ml::Model& double_dot_quality,
                                    const ml::Model& regime) {
    std::vector<Regime> out;
    out.reserve(segments.size());
    for (const Segment& s : segments) {
        const bool sd_good = single_dot_quality.predict_raw(s.pixels) == 1;
        const bool dd_good = double_dot_quality.predict_raw(s.pixels) == 1;
        if (!sd_good && !dd_good) {
            out.push_back(Regime::NoDot);
        } else if (sd_good && !dd_good) {
            out.push_back(Regime::SingleDot);
        } else if (!sd_good && dd_good) {
            out.push_back(Regime::DoubleDot);
        } else {
            out.push_back(regime.predict_raw(s.pixels) == 1 ? Regime::DoubleDot
                                                            : Regime::SingleDot);
        }
    }
    return out;
}

std::string map_to_csv(const CurrentMap& map) {
    std::string out;
    char buf[64];
    out += "# x: " + gate_name(map.x_gate) + ", y: " + gate_name(map.y_gate) + "\n";
    out += "y\\x";
    for (double x : map.xs) {
        std::snprintf(buf, sizeof(buf), ",%.17g", x);
        out += buf;
    }
    out += "\n";
    for (std::size_t iy = 0; iy < map.ny(); ++iy) {
        std::snprintf(buf, sizeof(buf), "%.17g", map.ys[iy]);
        out += buf;
        for (std::size_t ix = 0; ix < map.nx(); ++ix) {
            std::snprintf(buf, sizeof(buf), ",%.17g", map.at(iy, ix));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace qd
