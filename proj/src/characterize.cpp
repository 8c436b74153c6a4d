#include "qdtune/characterize.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace qd {

const std::string& verdict_name(Verdict v) {
    static const std::string names[] = {"failed_iqa", "broken", "working"};
    return names[static_cast<int>(v)];
}

std::optional<double> initial_quality_assessment(DeviceSession& dev,
                                                 const CharacterizeConfig& cfg) {
    Voltages v;
    for (int i = 0; i < kNumGates; ++i) {
        v[i] = cfg.iqa_mode == IqaMode::AllZero ? dev.safety()[i].clamp(0.0) : dev.safety()[i].hi;
    }
    dev.set_all(v);
    const double current = dev.measure();
    if (current > dev.noise_floor()) {
        dev.record_a_max(current);
        return current;
    }
    return std::nullopt;
}

GateResult characterize_gate(DeviceSession& dev, Gate g, const CharacterizeConfig& cfg,
                             const ml::Model& pinch_model) {
    const auto& range = dev.safety()[static_cast<int>(g)];
    const Trace raw = dev.sweep_1d(g, range.hi, range.lo, cfg.trace_points);  // high to low
    GateResult r;
    r.trace = normalize_and_canonicalize(raw.setpoints, raw.currents, dev.a_max(), g);
    r.fit = analyze(r.trace, cfg.smoothing_sigma);
    r.good = pinch_model.predict_raw({features(r.fit).begin(), features(r.fit).end()}) == 1;
    return r;
}

CharacterizationReport characterize_device(DeviceSession& dev, const CharacterizeConfig& cfg,
                                           const ml::Model& pinch_model) {
    CharacterizationReport report;
    const long n0 = dev.n_1d();

    const std::optional<double> a_max = initial_quality_assessment(dev, cfg);
    if (!a_max) {
        report.verdict = Verdict::FailedIqa;
        report.failure_reason = "no current above the noise floor";
        return report;
    }
    report.a_max = *a_max;

    // All gates to their upper limits, top barrier to its lower limit. A
    // signal drop below the threshold indicates offset charges; raise the top
    // barrier until the signal recovers and shift all safety ranges up.
    dev.set_all_to_safe_max();
    const auto& tb_safety = dev.safety()[static_cast<int>(Gate::TB)];
    double tb = tb_safety.lo;
    dev.set_voltage(Gate::TB, tb);
    while (dev.measure() < cfg.signal_threshold * report.a_max) {
        tb += cfg.tb_step;
        if (tb > tb_safety.hi) {
            report.verdict = Verdict::Broken;
            report.failure_reason = "top-barrier raise exhausted its safety range";
            report.n_1d = dev.n_1d() - n0;
            return report;
        }
        dev.set_voltage(Gate::TB, tb);
        ++report.tb_raise_steps;
    }
    if (report.tb_raise_steps > 0) {
        dev.shift_safety_ranges(cfg.safety_shift);
        report.safety_shifted = true;
    }
    report.tb_voltage = dev.voltage(Gate::TB);

    for (Gate g : {Gate::LB, Gate::CB, Gate::RB, Gate::LP, Gate::RP}) {
        report.gates[g] = characterize_gate(dev, g, cfg, pinch_model);
        if (!report.gates[g].good) report.broken_gates.push_back(gate_name(g));
    }
    report.verdict = report.broken_gates.empty() ? Verdict::Working : Verdict::Broken;
    if (report.verdict == Verdict::Broken) report.failure_reason = "bad gate response";
    report.n_1d = dev.n_1d() - n0;
    return report;
}

void establish_tb_valid_range(DeviceSession& dev, const CharacterizeConfig& cfg,
                              const ml::Model& pinch_model, CharacterizationReport& report) {
    if (report.verdict != Verdict::Working) {
        throw std::logic_error("valid-range scan requires a working verdict");
    }
    const long n0 = dev.n_1d();
    const auto& tb_safety = dev.safety()[static_cast<int>(Gate::TB)];

    // A barrier responds well when the classifier calls the trace good and
    // the cut-off current sits below the noise floor.
    const auto responds = [&](Gate g) {
        const GateResult r = characterize_gate(dev, g, cfg, pinch_model);
        return r.good && r.fit.A_L < dev.noise_floor();
    };

    std::vector<Gate> remaining(kLowerBarriers.begin(), kLowerBarriers.end());
    Gate last_barrier = Gate::LB;
    std::optional<double> v_valid_min;
    const double scan_start = std::min(0.0, tb_safety.hi);
    for (double tb = scan_start; tb >= tb_safety.lo - 1e-9; tb -= cfg.tb_scan_step) {
        const double tb_clamped = std::max(tb, tb_safety.lo);
        dev.set_all_to_safe_max();
        dev.set_voltage(Gate::TB, tb_clamped);
        for (auto it = remaining.begin(); it != remaining.end();) {
            if (responds(*it)) {
                last_barrier = *it;
                it = remaining.erase(it);
            } else {
                ++it;
            }
        }
        if (remaining.empty()) {
            v_valid_min = tb_clamped;
            break;
        }
    }
    report.n_1d += dev.n_1d() - n0;
    if (!v_valid_min) {
        report.verdict = Verdict::Broken;
        report.failure_reason = "barriers cannot deplete within the top-barrier range";
        return;
    }

    // Upper end: the last barrier to pinch off goes to its lower limit and
    // the top barrier itself is characterized; its v_L is the upper bound.
    const long n1 = dev.n_1d();
    dev.set_all_to_safe_max();
    dev.set_voltage(last_barrier, dev.safety()[static_cast<int>(last_barrier)].lo);
    const GateResult tb_result = characterize_gate(dev, Gate::TB, cfg, pinch_model);
    report.n_1d += dev.n_1d() - n1;
    dev.set_all_to_safe_max();

    const double v_valid_max = tb_result.fit.v_L;
    if (!(*v_valid_min < v_valid_max)) {
        report.verdict = Verdict::Broken;
        report.failure_reason = "degenerate top-barrier valid range";
        return;
    }
    report.tb_valid_range = VoltageInterval{*v_valid_min, v_valid_max};
}

std::string CharacterizationReport::to_json() const {
    nlohmann::json j;
    j["a_max"] = a_max;
    j["verdict"] = verdict_name(verdict);
    j["broken_gates"] = broken_gates;
    if (!failure_reason.empty()) j["failure_reason"] = failure_reason;
    j["n_1d"] = n_1d;
    j["tb_voltage"] = tb_voltage;
    j["tb_raise_steps"] = tb_raise_steps;
    j["safety_shifted"] = safety_shifted;
    if (tb_valid_range) {
        j["tb_valid_range"] = {{"lo", tb_valid_range->lo}, {"hi", tb_valid_range->hi}};
    }
    nlohmann::json gates_json;
    for (const auto& [g, r] : gates) {
        gates_json[gate_name(g)] = {{"good", r.good},
                                    {"a", r.fit.a},
                                    {"b", r.fit.b},
                                    {"residual", r.fit.residual_norm},
                                    {"v_L", r.fit.v_L},
                                    {"v_T", r.fit.v_T},
                                    {"v_H", r.fit.v_H},
                                    {"A_L", r.fit.A_L},
                                    {"A_H", r.fit.A_H},
                                    {"degraded", r.fit.degraded}};
    }
    j["gates"] = gates_json;
    return j.dump(2);
}

}  // namespace qd
