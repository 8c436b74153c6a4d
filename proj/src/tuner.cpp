#include "qdtune/tuner.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace qd {

const std::string& stage_name(TunerStage s) {
    static const std::string names[] = {"init",          "set_tb",   "char_cb",
                                        "char_outer",    "char_plungers", "charge_diagram",
                                        "classify",      "done",     "failed"};
    return names[static_cast<int>(s)];
}

const std::set<std::pair<TunerStage, TunerStage>>& allowed_transitions() {
    using S = TunerStage;
    static const std::set<std::pair<S, S>> edges = {
        {S::Init, S::SetTB},
        {S::SetTB, S::CharCB},
        {S::SetTB, S::Failed},
        {S::CharCB, S::CharOuter},
        {S::CharCB, S::SetTB},
        {S::CharCB, S::Failed},
        {S::CharOuter, S::CharPlungers},
        {S::CharOuter, S::SetTB},
        {S::CharOuter, S::Failed},
        {S::CharPlungers, S::ChargeDiagram},
        {S::CharPlungers, S::CharOuter},
        {S::CharPlungers, S::SetTB},
        {S::CharPlungers, S::Failed},
        {S::ChargeDiagram, S::Classify},
        {S::ChargeDiagram, S::CharOuter},
        {S::ChargeDiagram, S::SetTB},
        {S::ChargeDiagram, S::Failed},
        {S::Classify, S::Done},
        {S::Classify, S::CharPlungers},
        {S::Classify, S::SetTB},
        {S::Classify, S::Failed},
    };
    return edges;
}

double voltage_delta(double v, const VoltageInterval& valid_range, DeltaDirection direction,
                     const TunerConfig& cfg) {
    const double tilde = direction == DeltaDirection::TooLow ? 0.5 * (valid_range.hi - v)
                                                             : 0.5 * (v - valid_range.lo);
    const double delta = std::min(cfg.delta_max, std::max(tilde, cfg.delta_min));
    const double moved = direction == DeltaDirection::TooLow ? v + delta : v - delta;
    return valid_range.clamp(moved);
}

double choose_top_barrier(const VoltageInterval& tb_valid_range, const TunerConfig& cfg) {
    return tb_valid_range.hi - cfg.tb_init_fraction * tb_valid_range.span();
}

std::optional<double> central_barrier_setpoint(const GateResult& cb, double a_max,
                                               const TunerConfig& cfg) {
    const double level = cfg.cb_level * a_max;
    const double v_lo = cb.trace.setpoints.front();
    const double v_hi = cb.trace.setpoints.back();

    if (!cb.fit.degraded && cb.fit.a > 0.0) {
        // Trace currents are normalized by a_max, so solve a(1+tanh(bx+c)) = cb_level.
        const double arg = cfg.cb_level / cb.fit.a - 1.0;
        if (arg > -1.0 && arg < 1.0 && std::fabs(cb.fit.b) > 1e-9) {
            const double x = (std::atanh(arg) - cb.fit.c) / cb.fit.b;
            const double v = v_lo + x * (v_hi - v_lo);
            if (v >= v_lo && v <= v_hi) return v;
        }
    }
    // Nearest-sample crossing: smallest |I - level| among samples bracketing it.
    const double level_norm = cfg.cb_level;  // normalized currents
    double best_gap = std::numeric_limits<double>::infinity();
    std::optional<double> best;
    bool above = false, below = false;
    for (std::size_t i = 0; i < cb.trace.setpoints.size(); ++i) {
        const double cur = cb.trace.currents[i];
        (cur >= level_norm ? above : below) = true;
        const double gap = std::fabs(cur - level_norm);
        if (gap < best_gap) {
            best_gap = gap;
            best = cb.trace.setpoints[i];
        }
    }
    if (!(above && below)) return std::nullopt;  // level never crossed
    (void)level;
    return best;
}

double outer_barrier_setpoint(const PinchoffFit& fit, const TunerConfig& cfg) {
    return fit.v_L + cfg.outer_fraction * (fit.v_H - fit.v_L);
}

namespace {

struct Runner {
    DeviceSession& dev;
    const TunerConfig& cfg;
    const ModelSet& models;
    const VoltageInterval tb_valid;
    TuningResult result;
    TunerStage stage = TunerStage::Init;
    int step = 0;
    long n1d_start = 0, n2d_start = 0;

    double tb = 0.0;
    bool tb_initialized = false;
    std::optional<DeltaDirection> tb_direction;

    std::optional<GateResult> cb_char;
    double cb_voltage = 0.0;
    std::optional<GateResult> lb_char, rb_char;
    std::optional<PinchoffFit> lp_fit, rp_fit;
    int plunger_retries = 0;
    std::optional<std::pair<Gate, DeltaDirection>> outer_adjust;  // set by diagram failures

    std::optional<AcquireResult> last_acquire;
    int extra_remaining = 0;
    bool target_seen = false;
    int best_count = 0;
    Voltages best_voltages{};
    Regime best_regime = Regime::NoDot;

    explicit Runner(DeviceSession& d, const TunerConfig& c, const ModelSet& m,
                    VoltageInterval valid)
        : dev(d), cfg(c), models(m), tb_valid(valid) {
        extra_remaining = cfg.extra_iterations_after_success;
    }

    void log(TunerStage to, const std::string& note) {
        ActionLogEntry e;
        e.step = step++;
        e.from = stage;
        e.to = to;
        e.n_1d = dev.n_1d() - n1d_start;
        e.n_2d = dev.n_2d() - n2d_start;
        e.voltages = dev.voltages();
        e.note = note;
        e.oracle = regime_name(dev.oracle());
        result.log.push_back(std::move(e));
        stage = to;
    }

    long used_2d() const { return dev.n_2d() - n2d_start; }
    bool budget_left(long needed = 1) const {
        return used_2d() + needed <= cfg.max_2d;
    }
    bool sweep_budget_left() const {
        // Derived cap on 1D work so stalled runs terminate.
        return dev.n_1d() - n1d_start < 8L * cfg.max_2d + 16;
    }

    GateResult characterize(Gate g) {
        return characterize_gate(dev, g, cfg.characterize, models.pinchoff);
    }

    DeltaDirection trace_failure_direction(const PinchoffFit& fit) const {
        // Saturated response (cut-off unreachable): channel too open.
        // Dead or vanishing response: channel too closed.
        const bool saturated = fit.A_L > 0.4 * 2.0 * fit.a || fit.A_H > 0.5;
        return saturated && fit.a > 0.01 ? DeltaDirection::TooHigh : DeltaDirection::TooLow;
    }

    void request_tb(DeltaDirection dir, TunerStage from_note, const std::string& why) {
        tb_direction = dir;
        (void)from_note;
        log(TunerStage::SetTB, why);
    }

    bool near(double v, double bound, double margin) const {
        return std::fabs(v - bound) < margin;
    }

    // --- stages ---

    void run() {
        dev.set_all_to_safe_max();
        dev.record_a_max(dev.measure());
        log(TunerStage::SetTB, "initialized; saturation current recorded");

        while (stage != TunerStage::Done && stage != TunerStage::Failed) {
            if (!sweep_budget_left()) {
                log(TunerStage::Failed, "1D sweep budget exhausted");
                break;
            }
            switch (stage) {
                case TunerStage::SetTB: do_set_tb(); break;
                case TunerStage::CharCB: do_char_cb(); break;
                case TunerStage::CharOuter: do_char_outer(); break;
                case TunerStage::CharPlungers: do_char_plungers(); break;
                case TunerStage::ChargeDiagram: do_diagram(); break;
                case TunerStage::Classify: do_classify(); break;
                default: log(TunerStage::Failed, "unexpected stage"); break;
            }
        }
        finalize();
    }

    void do_set_tb() {
        double next;
        if (!tb_initialized) {
            next = choose_top_barrier(tb_valid, cfg);
            tb_initialized = true;
        } else if (tb_direction) {
            next = voltage_delta(tb, tb_valid, *tb_direction, cfg);
        } else {
            next = tb;
        }
        tb = next;
        dev.set_voltage(Gate::TB, tb);
        log(TunerStage::CharCB, "top barrier at " + std::to_string(tb));
    }

    void do_char_cb() {
        // Characterized with the lower gates open.
        for (Gate g : {Gate::LB, Gate::CB, Gate::RB, Gate::LP, Gate::RP}) {
            dev.set_voltage(g, dev.safety()[static_cast<int>(g)].hi);
        }
        cb_char = characterize(Gate::CB);
        const std::optional<double> v = central_barrier_setpoint(*cb_char, dev.a_max(), cfg);
        if (!v) {
            const double top = *std::max_element(cb_char->trace.currents.begin(),
                                                 cb_char->trace.currents.end());
            request_tb(top < cfg.cb_level ? DeltaDirection::TooLow : DeltaDirection::TooHigh,
                       stage, "no crossing at the target level");
            return;
        }
        cb_voltage = *v;
        dev.set_voltage(Gate::CB, cb_voltage);
        log(TunerStage::CharOuter, "central barrier at " + std::to_string(cb_voltage));
    }

    void do_char_outer() {
        if (outer_adjust) {
            // Diagram-driven adjustment of one outer barrier; no new sweeps.
            const auto [gate, dir] = *outer_adjust;
            outer_adjust.reset();
            const PinchoffFit& fit = gate == Gate::LB ? lb_char->fit : rb_char->fit;
            const VoltageInterval window{fit.v_L, fit.v_H};
            const double now = dev.voltage(gate);
            const double next = voltage_delta(now, window, dir, cfg);
            const auto& safety = dev.safety()[static_cast<int>(gate)];
            if (near(next, safety.lo, cfg.outer_safety_margin) ||
                near(next, safety.hi, cfg.outer_safety_margin)) {
                request_tb(near(next, safety.lo, cfg.outer_safety_margin)
                               ? DeltaDirection::TooHigh
                               : DeltaDirection::TooLow,
                           stage, gate_name(gate) + " adjustment hit its safety margin");
                return;
            }
            dev.set_voltage(gate, next);
            log(TunerStage::CharPlungers, gate_name(gate) + " adjusted to " + std::to_string(next));
            return;
        }

        // Characterize each outer barrier with the other fully open.
        dev.set_voltage(Gate::LB, dev.safety()[static_cast<int>(Gate::LB)].hi);
        dev.set_voltage(Gate::RB, dev.safety()[static_cast<int>(Gate::RB)].hi);
        lb_char = characterize(Gate::LB);
        rb_char = characterize(Gate::RB);
        for (const auto& [g, r] : {std::pair{Gate::LB, &*lb_char}, {Gate::RB, &*rb_char}}) {
            if (!r->good) {
                request_tb(trace_failure_direction(r->fit), stage,
                           gate_name(g) + " response not usable");
                return;
            }
        }
        const double v_lb = outer_barrier_setpoint(lb_char->fit, cfg);
        const double v_rb = outer_barrier_setpoint(rb_char->fit, cfg);
        for (const auto& [g, v] : {std::pair{Gate::LB, v_lb}, {Gate::RB, v_rb}}) {
            const auto& safety = dev.safety()[static_cast<int>(g)];
            if (near(v, safety.lo, cfg.outer_safety_margin) ||
                near(v, safety.hi, cfg.outer_safety_margin)) {
                request_tb(near(v, safety.lo, cfg.outer_safety_margin) ? DeltaDirection::TooHigh
                                                                       : DeltaDirection::TooLow,
                           stage, gate_name(g) + " setpoint within its safety margin");
                return;
            }
        }
        dev.set_voltage(Gate::LB, v_lb);
        dev.set_voltage(Gate::RB, v_rb);
        plunger_retries = 0;
        log(TunerStage::CharPlungers, "outer barriers set");
    }

    void do_char_plungers() {
        dev.set_voltage(Gate::LP, dev.safety()[static_cast<int>(Gate::LP)].hi);
        dev.set_voltage(Gate::RP, dev.safety()[static_cast<int>(Gate::RP)].hi);
        const GateResult lp = characterize(Gate::LP);
        const GateResult rp = characterize(Gate::RP);
        const bool lp_ok = lp.good, rp_ok = rp.good;
        if (lp_ok && rp_ok) {
            lp_fit = lp.fit;
            rp_fit = rp.fit;
            log(TunerStage::ChargeDiagram, "plunger windows established");
            return;
        }
        if (!lp_ok && !rp_ok) {
            request_tb(trace_failure_direction(lp.fit), stage, "both plunger responses unusable");
            return;
        }
        if (plunger_retries >= 1) {
            request_tb(trace_failure_direction((lp_ok ? rp : lp).fit), stage,
                       "plunger characterization failed after retry");
            return;
        }
        ++plunger_retries;
        const Gate bad_plunger = lp_ok ? Gate::RP : Gate::LP;
        outer_adjust = {{bad_plunger == Gate::LP ? Gate::LB : Gate::RB,
                         trace_failure_direction((lp_ok ? rp : lp).fit)}};
        log(TunerStage::CharOuter, gate_name(bad_plunger) + " response unusable; adjusting its barrier");
    }

    void do_diagram() {
        if (!budget_left()) {
            log(TunerStage::Failed, "2D measurement budget exhausted");
            return;
        }
        const long room = cfg.max_2d - used_2d();
        const int adjust_allowance =
            static_cast<int>(std::min<long>(cfg.max_adjust_iters, room - 1));
        VoltageInterval lp_window{lp_fit->v_L, lp_fit->v_H};
        VoltageInterval rp_window{rp_fit->v_L, rp_fit->v_H};
        last_acquire = acquire_diagram(dev, lp_window, rp_window, cfg.chargemap, adjust_allowance);
        if (last_acquire->exit == StopReason::SafetyLimit) {
            // The plunger that could not shift points at its neighbouring
            // outer barrier: a blocked increase means too little current.
            const RangeUpdate& u = last_acquire->history.back();
            const auto blocked = [&](PlungerAction a, const VoltageInterval& range,
                                     const VoltageInterval& safety) {
                return (a == PlungerAction::Increase && range.hi >= safety.hi - 1e-9) ||
                       (a == PlungerAction::Decrease && range.lo <= safety.lo + 1e-9);
            };
            Gate plunger = Gate::LP;
            PlungerAction action = u.lp_action;
            if (!blocked(u.lp_action, u.lp_range, dev.safety()[static_cast<int>(Gate::LP)]) &&
                blocked(u.rp_action, u.rp_range, dev.safety()[static_cast<int>(Gate::RP)])) {
                plunger = Gate::RP;
                action = u.rp_action;
            }
            const DeltaDirection dir = action == PlungerAction::Increase ? DeltaDirection::TooLow
                                                                         : DeltaDirection::TooHigh;
            outer_adjust = {{plunger == Gate::LP ? Gate::LB : Gate::RB, dir}};
            log(TunerStage::CharOuter, "plunger range pinned at its safety limit");
            return;
        }
        log(TunerStage::Classify, "diagram acquired");
    }

    void do_classify() {
        const std::vector<Segment> segments = segment_map(last_acquire->map, cfg.chargemap);
        const std::vector<Regime> labels =
            assess_segments(segments, models.single_dot, models.double_dot, models.regime);
        int n_target = 0, n_other_dot = 0;
        const Regime other =
            cfg.target == Regime::DoubleDot ? Regime::SingleDot : Regime::DoubleDot;
        for (Regime r : labels) {
            n_target += r == cfg.target;
            n_other_dot += r == other;
        }

        if (n_target > 0) {
            target_seen = true;
            if (n_target > best_count) {
                best_count = n_target;
                best_voltages = dev.voltages();
                best_voltages[static_cast<int>(Gate::LP)] =
                    0.5 * (last_acquire->lp_range.lo + last_acquire->lp_range.hi);
                best_voltages[static_cast<int>(Gate::RP)] =
                    0.5 * (last_acquire->rp_range.lo + last_acquire->rp_range.hi);
                best_regime = cfg.target;
            }
            if (extra_remaining <= 0 || !budget_left()) {
                log(TunerStage::Done, "target regime held");
                return;
            }
            --extra_remaining;
            nudge_cb_toward_target();
            return;
        }

        if (n_other_dot > 0) {
            // A good dot of the wrong kind steers the central barrier.
            const DeltaDirection dir = cfg.target == Regime::DoubleDot ? DeltaDirection::TooHigh
                                                                       : DeltaDirection::TooLow;
            const VoltageInterval window{cb_char->fit.v_L, cb_char->fit.v_H};
            const double next = voltage_delta(cb_voltage, window, dir, cfg);
            const auto& safety = dev.safety()[static_cast<int>(Gate::CB)];
            if (near(next, safety.lo, cfg.cb_safety_margin) ||
                near(next, safety.hi, cfg.cb_safety_margin)) {
                request_tb(near(next, safety.lo, cfg.cb_safety_margin) ? DeltaDirection::TooHigh
                                                                       : DeltaDirection::TooLow,
                           stage, "central barrier at its safety margin");
                return;
            }
            cb_voltage = next;
            dev.set_voltage(Gate::CB, cb_voltage);
            log(TunerStage::CharPlungers, "central barrier moved to " + std::to_string(next));
            return;
        }

        // No good dot anywhere: restart from a different top barrier.
        double mean = 0.0;
        for (double v : last_acquire->raw_map.values) mean += v;
        mean /= static_cast<double>(last_acquire->raw_map.values.size());
        request_tb(mean < cfg.low_signal * dev.a_max() ? DeltaDirection::TooLow
                                                       : DeltaDirection::TooHigh,
                   stage, "no good dot in the diagram");
    }

    void nudge_cb_toward_target() {
        const DeltaDirection dir = cfg.target == Regime::DoubleDot ? DeltaDirection::TooHigh
                                                                   : DeltaDirection::TooLow;
        const VoltageInterval window{cb_char->fit.v_L, cb_char->fit.v_H};
        const double next = voltage_delta(cb_voltage, window, dir, cfg);
        const auto& safety = dev.safety()[static_cast<int>(Gate::CB)];
        if (!near(next, safety.lo, cfg.cb_safety_margin) &&
            !near(next, safety.hi, cfg.cb_safety_margin)) {
            cb_voltage = next;
            dev.set_voltage(Gate::CB, cb_voltage);
        }
        log(TunerStage::CharPlungers, "refining after success");
    }

    void finalize() {
        result.success = target_seen && stage == TunerStage::Done;
        result.n_1d = dev.n_1d() - n1d_start;
        result.n_2d = dev.n_2d() - n2d_start;
        if (result.success) {
            dev.set_all(best_voltages);
            result.classifier_regime = best_regime;
            result.best_target_segments = best_count;
        }
        result.final_voltages = dev.voltages();
        result.oracle_regime = dev.oracle();
    }
};

}  // namespace

TuningResult run_tuning(DeviceSession& dev, const CharacterizationReport& report,
                        const TunerConfig& cfg, const ModelSet& models) {
    if (report.verdict != Verdict::Working || !report.tb_valid_range) {
        TuningResult r;
        r.success = false;
        r.final_voltages = dev.voltages();
        ActionLogEntry e;
        e.from = TunerStage::Init;
        e.to = TunerStage::Failed;
        e.note = "device not working; tuning refused";
        e.voltages = dev.voltages();
        e.oracle = regime_name(dev.oracle());
        r.log.push_back(std::move(e));
        r.oracle_regime = dev.oracle();
        return r;
    }
    Runner runner(dev, cfg, models, *report.tb_valid_range);
    runner.n1d_start = dev.n_1d();
    runner.n2d_start = dev.n_2d();
    runner.run();
    return runner.result;
}

std::string TuningResult::to_json() const {
    nlohmann::json j;
    j["success"] = success;
    j["classifier_regime"] = regime_name(classifier_regime);
    j["oracle_regime"] = regime_name(oracle_regime);
    j["best_target_segments"] = best_target_segments;
    j["n_1d"] = n_1d;
    j["n_2d"] = n_2d;
    nlohmann::json volts;
    for (int i = 0; i < kNumGates; ++i) volts[gate_name(static_cast<Gate>(i))] = final_voltages[i];
    j["final_voltages"] = volts;
    nlohmann::json log_json = nlohmann::json::array();
    for (const ActionLogEntry& e : log) {
        nlohmann::json v;
        for (int i = 0; i < kNumGates; ++i) v[gate_name(static_cast<Gate>(i))] = e.voltages[i];
        log_json.push_back({{"step", e.step},
                            {"from", stage_name(e.from)},
                            {"to", stage_name(e.to)},
                            {"n_1d", e.n_1d},
                            {"n_2d", e.n_2d},
                            {"voltages", v},
                            {"note", e.note},
                            {"oracle", e.oracle}});
    }
    j["log"] = log_json;
    return j.dump(2);
}

}  // namespace qd
