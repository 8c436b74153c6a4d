#include "qdtune/device.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace qd {

namespace {

const std::array<std::string, kNumGates> kGateNames = {"TB", "LB", "CB", "RB", "LP", "RP"};

double logistic_t(double u, double center, double width) {
    return 0.5 * (1.0 + std::tanh((u - center) / width));
}

// 1 below lo, 0 above hi, smooth cubic in between.
double smooth_gate(double t, double lo, double hi) {
    if (t <= lo) return 1.0;
    if (t >= hi) return 0.0;
    const double x = (t - lo) / (hi - lo);
    return 1.0 - x * x * (3.0 - 2.0 * x);
}

bool is_lower_gate(Gate g) { return g != Gate::TB; }

}  // namespace

const std::string& gate_name(Gate g) { return kGateNames[static_cast<int>(g)]; }

Gate gate_from_name(const std::string& name) {
    for (int i = 0; i < kNumGates; ++i) {
        if (kGateNames[i] == name) return static_cast<Gate>(i);
    }
    throw std::invalid_argument("unknown gate name: " + name);
}

const std::string& regime_name(Regime r) {
    static const std::array<std::string, 3> names = {"no_dot", "single_dot", "double_dot"};
    return names[static_cast<int>(r)];
}

void DeviceLayout::validate() const {
    for (const auto& iv : safety) {
        if (!(iv.lo < iv.hi)) throw std::invalid_argument("safety range must have lo < hi");
    }
    if (!(noise_floor > 0.0)) throw std::invalid_argument("noise floor must be positive");
}

bool FaultProfile::any() const {
    if (dead_channel) return true;
    for (bool u : unresponsive) {
        if (u) return true;
    }
    return false;
}

double DevicePhysics::transmission(Gate g, const Voltages& v) const {
    const int gi = static_cast<int>(g);
    // An unresponsive electrode acts as if grounded, both for its own
    // constriction and for every cross-coupling term it feeds.
    Voltages va = v;
    for (int i = 0; i < kNumGates; ++i) {
        if (faults.unresponsive[i]) va[i] = 0.0;
    }
    double u = va[gi] + tb_coupling[gi] * va[static_cast<int>(Gate::TB)];
    for (int h = 0; h < kNumGates; ++h) {
        if (h == gi || h == static_cast<int>(Gate::TB)) continue;
        u += cross[gi][h] * (va[h] - layout.safety[h].hi);
    }
    double c = center[gi];
    if (is_lower_gate(g)) c += pinchoff_offset;
    return logistic_t(u, c, width[gi]);
}

double DevicePhysics::kappa(double v_cb) const {
    if (faults.unresponsive[static_cast<int>(Gate::CB)]) v_cb = 0.0;
    return 0.5 * (1.0 + std::tanh((v_cb - kappa_center) / kappa_width));
}

namespace {

// Ground state and first excited state of U over integer occupancies near
// the continuous minimum. Returns {U_min, U_second, N1, N2}.
struct OccMin {
    double u1 = 0.0;
    double u2 = 0.0;
    int n1 = 0;
    int n2 = 0;
};

OccMin minimize_double(const DevicePhysics& p, double f1, double f2) {
    const double det = p.charging1 * p.charging2 - p.charging_m * p.charging_m;
    const double n1c = (p.charging2 * f1 - p.charging_m * f2) / det;
    const double n2c = (p.charging1 * f2 - p.charging_m * f1) / det;
    const int lo1 = std::max(0, static_cast<int>(std::floor(n1c)) - 2);
    const int lo2 = std::max(0, static_cast<int>(std::floor(n2c)) - 2);
    const int hi1 = std::max(0, static_cast<int>(std::ceil(n1c)) + 2);
    const int hi2 = std::max(0, static_cast<int>(std::ceil(n2c)) + 2);
    OccMin out;
    out.u1 = std::numeric_limits<double>::infinity();
    out.u2 = std::numeric_limits<double>::infinity();
    for (int n1 = lo1; n1 <= hi1; ++n1) {
        for (int n2 = lo2; n2 <= hi2; ++n2) {
            const double u = 0.5 * p.charging1 * n1 * n1 + 0.5 * p.charging2 * n2 * n2 +
                             p.charging_m * n1 * n2 - n1 * f1 - n2 * f2;
            if (u < out.u1) {
                out.u2 = out.u1;
                out.u1 = u;
                out.n1 = n1;
                out.n2 = n2;
            } else if (u < out.u2) {
                out.u2 = u;
            }
        }
    }
    return out;
}

OccMin minimize_single(const DevicePhysics& p, double fs) {
    const double nc = fs / p.charging_s;
    const int lo = std::max(0, static_cast<int>(std::floor(nc)) - 2);
    const int hi = std::max(0, static_cast<int>(std::ceil(nc)) + 2);
    OccMin out;
    out.u1 = std::numeric_limits<double>::infinity();
    out.u2 = std::numeric_limits<double>::infinity();
    for (int n = lo; n <= hi; ++n) {
        const double u = 0.5 * p.charging_s * n * n - n * fs;
        if (u < out.u1) {
            out.u2 = out.u1;
            out.u1 = u;
            out.n1 = n;
        } else if (u < out.u2) {
            out.u2 = u;
        }
    }
    return out;
}

double dot_potential1(const DevicePhysics& p, double v_lp, double v_rp) {
    return p.lever1_lp * (v_lp - p.plunger1_origin) + p.lever1_rp * (v_rp - p.plunger1_origin);
}

double dot_potential2(const DevicePhysics& p, double v_lp, double v_rp) {
    return p.lever2_lp * (v_lp - p.plunger2_origin) + p.lever2_rp * (v_rp - p.plunger2_origin);
}

double dot_potential_s(const DevicePhysics& p, double v_lp, double v_rp) {
    return p.lever_s_lp * (v_lp - p.plunger_s_origin) + p.lever_s_rp * (v_rp - p.plunger_s_origin);
}

}  // namespace

std::pair<int, int> DevicePhysics::double_dot_occupancy(double v_lp, double v_rp) const {
    const OccMin m = minimize_double(*this, dot_potential1(*this, v_lp, v_rp),
                                     dot_potential2(*this, v_lp, v_rp));
    return {m.n1, m.n2};
}

int DevicePhysics::single_dot_occupancy(double v_lp, double v_rp) const {
    return minimize_single(*this, dot_potential_s(*this, v_lp, v_rp)).n1;
}

double noiseless_current(const DevicePhysics& p, const Voltages& v) {
    if (p.faults.dead_channel) return 0.0;

    double envelope = 1.0;
    for (Gate g : {Gate::LB, Gate::CB, Gate::RB, Gate::LP, Gate::RP}) {
        envelope *= p.transmission(g, v);
    }

    const double t_lb = p.transmission(Gate::LB, v);
    const double t_rb = p.transmission(Gate::RB, v);
    const double confinement = smooth_gate(t_lb, 0.35, 0.85) * smooth_gate(t_rb, 0.35, 0.85);

    double r_pattern = 1.0;
    if (confinement > 0.0) {
        const double v_lp = v[static_cast<int>(Gate::LP)];
        const double v_rp = v[static_cast<int>(Gate::RP)];
        const OccMin dd =
            minimize_double(p, dot_potential1(p, v_lp, v_rp), dot_potential2(p, v_lp, v_rp));
        const OccMin sd = minimize_single(p, dot_potential_s(p, v_lp, v_rp));
        const double r_dd = std::exp(-(dd.u2 - dd.u1) / p.thermal_broadening);
        const double r_sd = std::exp(-(sd.u2 - sd.u1) / p.thermal_broadening);
        const double k = p.kappa(v[static_cast<int>(Gate::CB)]);
        r_pattern = (1.0 - k) * r_dd + k * r_sd;
    }
    const double r_eff = 1.0 - confinement * (1.0 - r_pattern);

    return p.saturation * envelope * r_eff;
}

Regime oracle_regime(const DevicePhysics& p, const Voltages& v) {
    if (p.faults.dead_channel) return Regime::NoDot;
    const double t_lb = p.transmission(Gate::LB, v);
    const double t_rb = p.transmission(Gate::RB, v);
    const bool barriers_tunneling = t_lb >= kOracleBarrierTmin && t_lb <= kOracleBarrierTmax &&
                                    t_rb >= kOracleBarrierTmin && t_rb <= kOracleBarrierTmax;
    if (!barriers_tunneling) return Regime::NoDot;

    const double v_lp = v[static_cast<int>(Gate::LP)];
    const double v_rp = v[static_cast<int>(Gate::RP)];
    const double k = p.kappa(v[static_cast<int>(Gate::CB)]);
    if (k < kKappaSplit) {
        const auto [n1, n2] = p.double_dot_occupancy(v_lp, v_rp);
        if (std::min(n1, n2) >= kOracleOccupancyMin &&
            std::max(n1, n2) <= kOracleOccupancyMax) {
            return Regime::DoubleDot;
        }
        return Regime::NoDot;
    }
    if (k >= kKappaMerge) {
        const int ns = p.single_dot_occupancy(v_lp, v_rp);
        if (ns >= kOracleOccupancyMin && ns <= kOracleOccupancyMax) return Regime::SingleDot;
        return Regime::NoDot;
    }
    return Regime::NoDot;
}

DevicePhysics new_random_device(std::uint64_t seed, const std::optional<FaultProfile>& faults) {
    Rng rng(seed ^ 0x51ab9cd1f2e30a47ULL);
    DevicePhysics p;
    p.seed = seed;
    for (auto& iv : p.layout.safety) iv = {-3.0, 0.3};
    p.layout.noise_floor = 0.02;

    // Lower-barrier constrictions share a device-level base with per-gate
    // jitter; the spread keeps every barrier pinchable at TB = safety lo.
    const double base_center = rng.uniform(-3.88, -3.72);
    const double base_gamma = rng.uniform(0.56, 0.62);
    for (Gate g : kLowerBarriers) {
        const int i = static_cast<int>(g);
        p.center[i] = base_center + rng.uniform(-0.06, 0.06);
        p.tb_coupling[i] = base_gamma + rng.uniform(-0.02, 0.02);
        p.width[i] = (g == Gate::CB) ? rng.uniform(0.17, 0.22) : rng.uniform(0.11, 0.16);
    }
    for (Gate g : kPlungers) {
        const int i = static_cast<int>(g);
        p.center[i] = rng.uniform(-4.05, -3.82);
        p.tb_coupling[i] = rng.uniform(0.66, 0.74);
        p.width[i] = rng.uniform(0.12, 0.18);
    }

    // Cross-capacitances between lower gates. Positive entries only: a more
    // negative neighbour always helps deplete, which keeps every barrier
    // sweep monotone.
    auto set_cross = [&](Gate a, Gate b, double lo, double hi) {
        p.cross[static_cast<int>(a)][static_cast<int>(b)] = rng.uniform(lo, hi);
    };
    set_cross(Gate::LB, Gate::CB, 0.1, 0.16);
    set_cross(Gate::RB, Gate::CB, 0.1, 0.16);
    set_cross(Gate::LB, Gate::RB, 0.004, 0.012);
    set_cross(Gate::RB, Gate::LB, 0.004, 0.012);
    set_cross(Gate::CB, Gate::LB, 0.015, 0.03);
    set_cross(Gate::CB, Gate::RB, 0.015, 0.03);
    set_cross(Gate::LB, Gate::LP, 0.01, 0.03);
    set_cross(Gate::RB, Gate::RP, 0.01, 0.03);
    set_cross(Gate::LP, Gate::LB, 0.1, 0.16);
    set_cross(Gate::LP, Gate::CB, 0.1, 0.16);
    set_cross(Gate::LP, Gate::RB, 0.03, 0.07);
    set_cross(Gate::RP, Gate::RB, 0.1, 0.16);
    set_cross(Gate::RP, Gate::CB, 0.1, 0.16);
    set_cross(Gate::RP, Gate::LB, 0.03, 0.07);

    p.charging1 = rng.uniform(0.02, 0.032);
    p.charging2 = rng.uniform(0.02, 0.032);
    p.charging_m = rng.uniform(0.18, 0.32) * std::min(p.charging1, p.charging2);
    p.lever1_lp = rng.uniform(0.58, 0.72);
    p.lever1_rp = rng.uniform(0.13, 0.2);
    p.lever2_rp = rng.uniform(0.58, 0.72);
    p.lever2_lp = rng.uniform(0.13, 0.2);
    p.plunger1_origin = rng.uniform(-3.4, -3.1);
    p.plunger2_origin = p.plunger1_origin + rng.uniform(-0.1, 0.1);

    p.charging_s = rng.uniform(0.013, 0.019);
    p.lever_s_lp = rng.uniform(0.36, 0.48);
    p.lever_s_rp = p.lever_s_lp + rng.uniform(-0.05, 0.05);
    p.plunger_s_origin = rng.uniform(-3.4, -3.1);

    const int cb = static_cast<int>(Gate::CB);
    p.kappa_center = p.center[cb] + p.tb_coupling[cb] * 1.9 + rng.uniform(0.12, 0.24);
    p.kappa_width = rng.uniform(0.18, 0.26);

    p.thermal_broadening = 0.01;
    p.saturation = 1.0;
    p.noise_sigma = 0.005;
    if (faults) p.faults = *faults;
    return p;
}

DeviceSession::DeviceSession(DevicePhysics physics, bool noiseless)
    : physics_(std::move(physics)),
      safety_(physics_.layout.safety),
      noise_(physics_.seed ^ 0x7c3a1d2b9f60e845ULL),
      noiseless_(noiseless) {
    physics_.layout.validate();
    state_.fill(0.0);
    for (int i = 0; i < kNumGates; ++i) {
        if (!safety_[i].contains(0.0)) state_[i] = safety_[i].clamp(0.0);
    }
}

void DeviceSession::check(Gate g, double v) {
    const auto& iv = safety_[static_cast<int>(g)];
    if (!iv.contains(v)) {
        ++safety_violations_;
        throw SafetyViolation(gate_name(g) + " = " + std::to_string(v) +
                              " outside safety range [" + std::to_string(iv.lo) + ", " +
                              std::to_string(iv.hi) + "]");
    }
}

void DeviceSession::set_voltage(Gate g, double v) {
    check(g, v);
    state_[static_cast<int>(g)] = v;
}

void DeviceSession::set_all(const Voltages& v) {
    for (int i = 0; i < kNumGates; ++i) check(static_cast<Gate>(i), v[i]);
    state_ = v;
}

void DeviceSession::set_all_to_safe_max() {
    for (int i = 0; i < kNumGates; ++i) state_[i] = safety_[i].hi;
}

void DeviceSession::shift_safety_ranges(double delta) {
    for (auto& iv : safety_) {
        iv.lo += delta;
        iv.hi += delta;
    }
    for (int i = 0; i < kNumGates; ++i) state_[i] = safety_[i].clamp(state_[i]);
}

double DeviceSession::current_with_noise() {
    double i = noiseless_current(physics_, state_);
    if (!noiseless_) {
        i += noise_.gauss(0.0, physics_.noise_sigma);
        if (physics_.drift_enabled) {
            // Slow random-walk drift, advanced once per measurement.
            drift_state_ += noise_.gauss(0.0, physics_.drift_amplitude * 0.01);
            i += drift_state_;
        }
    }
    const double hi = physics_.saturation * (1.0 + 6.0 * physics_.noise_sigma);
    return std::clamp(i, 0.0, hi);
}

double DeviceSession::measure() {
    ++measurements_;
    return current_with_noise();
}

Trace DeviceSession::sweep_1d(Gate g, double v_from, double v_to, int n_points) {
    if (n_points < 2) throw std::invalid_argument("sweep_1d needs at least 2 points");
    check(g, v_from);
    check(g, v_to);
    const Voltages saved = state_;
    Trace t;
    t.gate = g;
    t.setpoints.reserve(n_points);
    t.currents.reserve(n_points);
    for (int i = 0; i < n_points; ++i) {
        const double v = i == n_points - 1
                             ? v_to
                             : v_from + (v_to - v_from) * static_cast<double>(i) / (n_points - 1);
        set_voltage(g, v);
        t.setpoints.push_back(v);
        t.currents.push_back(measure());
    }
    state_ = saved;
    ++n_1d_;
    return t;
}

CurrentMap DeviceSession::sweep_2d(Gate x, Gate y, VoltageInterval range_x,
                                   VoltageInterval range_y, int n_x, int n_y) {
    if (n_x < 2 || n_y < 2) throw std::invalid_argument("sweep_2d needs at least 2x2 points");
    check(x, range_x.lo);
    check(x, range_x.hi);
    check(y, range_y.lo);
    check(y, range_y.hi);
    const Voltages saved = state_;
    CurrentMap m;
    m.x_gate = x;
    m.y_gate = y;
    m.a_max = a_max_;
    m.xs.resize(n_x);
    m.ys.resize(n_y);
    for (int i = 0; i < n_x; ++i) {
        m.xs[i] = i == n_x - 1
                      ? range_x.hi
                      : range_x.lo + range_x.span() * static_cast<double>(i) / (n_x - 1);
    }
    for (int j = 0; j < n_y; ++j) {
        m.ys[j] = j == n_y - 1
                      ? range_y.hi
                      : range_y.lo + range_y.span() * static_cast<double>(j) / (n_y - 1);
    }
    m.values.resize(static_cast<std::size_t>(n_x) * n_y);
    for (int j = 0; j < n_y; ++j) {
        set_voltage(y, m.ys[j]);
        for (int i = 0; i < n_x; ++i) {
            set_voltage(x, m.xs[i]);
            m.values[static_cast<std::size_t>(j) * n_x + i] = measure();
        }
    }
    state_ = saved;
    ++n_2d_;
    return m;
}

namespace {

using nlohmann::json;

json interval_to_json(const VoltageInterval& iv) { return json{{"lo", iv.lo}, {"hi", iv.hi}}; }

VoltageInterval interval_from_json(const json& j) {
    return {j.at("lo").get<double>(), j.at("hi").get<double>()};
}

}  // namespace

std::string physics_to_json(const DevicePhysics& p) {
    json j;
    j["schema"] = "qdtune-device-v1";
    j["seed"] = p.seed;
    json safety = json::array();
    for (int i = 0; i < kNumGates; ++i) {
        json g = interval_to_json(p.layout.safety[i]);
        g["gate"] = gate_name(static_cast<Gate>(i));
        safety.push_back(g);
    }
    j["layout"] = {{"safety", safety}, {"noise_floor", p.layout.noise_floor}};
    j["center"] = p.center;
    j["width"] = p.width;
    j["tb_coupling"] = p.tb_coupling;
    json cross = json::array();
    for (const auto& row : p.cross) cross.push_back(row);
    j["cross"] = cross;
    j["charging"] = {{"e1", p.charging1}, {"e2", p.charging2}, {"em", p.charging_m},
                     {"es", p.charging_s}};
    j["levers"] = {{"d1_lp", p.lever1_lp}, {"d1_rp", p.lever1_rp}, {"d2_lp", p.lever2_lp},
                   {"d2_rp", p.lever2_rp}, {"s_lp", p.lever_s_lp}, {"s_rp", p.lever_s_rp}};
    j["origins"] = {{"d1", p.plunger1_origin}, {"d2", p.plunger2_origin},
                    {"s", p.plunger_s_origin}};
    j["kappa"] = {{"center", p.kappa_center}, {"width", p.kappa_width}};
    j["thermal_broadening"] = p.thermal_broadening;
    j["saturation"] = p.saturation;
    j["noise_sigma"] = p.noise_sigma;
    j["drift"] = {{"enabled", p.drift_enabled}, {"amplitude", p.drift_amplitude}};
    j["pinchoff_offset"] = p.pinchoff_offset;
    j["faults"] = {{"dead_channel", p.faults.dead_channel},
                   {"unresponsive", p.faults.unresponsive}};
    return j.dump(2);
}

DevicePhysics physics_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != "qdtune-device-v1") {
        throw std::invalid_argument("unsupported device fixture schema");
    }
    DevicePhysics p;
    p.seed = j.at("seed").get<std::uint64_t>();
    const json& layout = j.at("layout");
    for (const auto& g : layout.at("safety")) {
        const Gate gate = gate_from_name(g.at("gate").get<std::string>());
        p.layout.safety[static_cast<int>(gate)] = interval_from_json(g);
    }
    p.layout.noise_floor = layout.at("noise_floor").get<double>();
    p.center = j.at("center").get<std::array<double, kNumGates>>();
    p.width = j.at("width").get<std::array<double, kNumGates>>();
    p.tb_coupling = j.at("tb_coupling").get<std::array<double, kNumGates>>();
    for (int i = 0; i < kNumGates; ++i) {
        p.cross[i] = j.at("cross").at(i).get<std::array<double, kNumGates>>();
    }
    const json& ch = j.at("charging");
    p.charging1 = ch.at("e1").get<double>();
    p.charging2 = ch.at("e2").get<double>();
    p.charging_m = ch.at("em").get<double>();
    p.charging_s = ch.at("es").get<double>();
    const json& lev = j.at("levers");
    p.lever1_lp = lev.at("d1_lp").get<double>();
    p.lever1_rp = lev.at("d1_rp").get<double>();
    p.lever2_lp = lev.at("d2_lp").get<double>();
    p.lever2_rp = lev.at("d2_rp").get<double>();
    p.lever_s_lp = lev.at("s_lp").get<double>();
    p.lever_s_rp = lev.at("s_rp").get<double>();
    const json& org = j.at("origins");
    p.plunger1_origin = org.at("d1").get<double>();
    p.plunger2_origin = org.at("d2").get<double>();
    p.plunger_s_origin = org.at("s").get<double>();
    p.kappa_center = j.at("kappa").at("center").get<double>();
    p.kappa_width = j.at("kappa").at("width").get<double>();
    p.thermal_broadening = j.at("thermal_broadening").get<double>();
    p.saturation = j.at("saturation").get<double>();
    p.noise_sigma = j.at("noise_sigma").get<double>();
    p.drift_enabled = j.at("drift").at("enabled").get<bool>();
    p.drift_amplitude = j.at("drift").at("amplitude").get<double>();
    p.pinchoff_offset = j.at("pinchoff_offset").get<double>();
    p.faults.dead_channel = j.at("faults").at("dead_channel").get<bool>();
    p.faults.unresponsive =
        j.at("faults").at("unresponsive").get<std::array<bool, kNumGates>>();
    return p;
}

}  // namespace qd
