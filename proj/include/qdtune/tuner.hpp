#pragma once

// Stage 2: closed-loop dot tuning. A state machine walks the device from
// fully open to the target regime: top barrier from its valid range, central
// barrier to a fixed fraction of the saturation current, outer barriers to a
// fraction of their transition windows, plunger windows from their own
// characterizations, then charge diagrams classified segment by segment.

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qdtune/characterize.hpp"
#include "qdtune/chargemap.hpp"
#include "qdtune/device.hpp"
#include "qdtune/ml/model.hpp"

namespace qd {

struct TunerConfig {
    Regime target = Regime::DoubleDot;
    double tb_init_fraction = 0.25;     // down from the top of the TB valid range
    double cb_level = 0.75;             // x A_max crossing for the central barrier
    double outer_fraction = 1.0 / 3.0;  // up from v_L within [v_L, v_H]
    double delta_min = 0.05;            // volts, voltage_delta clamp
    double delta_max = 0.1;
    double outer_safety_margin = 0.1;   // volts
    double cb_safety_margin = 0.05;     // volts
    double low_signal = 0.15;           // x A_max; reinit direction threshold
    int max_2d = 20;                    // total 2D sweep budget
    int extra_iterations_after_success = 2;
    int max_adjust_iters = 10;          // per-diagram boundary adjustments
    CharacterizeConfig characterize;    // 1D sweep settings
    ChargeMapConfig chargemap;
};

enum class TunerStage {
    Init,
    SetTB,
    CharCB,
    CharOuter,
    CharPlungers,
    ChargeDiagram,
    Classify,
    Done,
    Failed
};
const std::string& stage_name(TunerStage s);

// Legal edges of the tuning state machine.
const std::set<std::pair<TunerStage, TunerStage>>& allowed_transitions();

enum class DeltaDirection { TooLow, TooHigh };

// New gate voltage from the bounded half-distance rule, clamped to the range.
double voltage_delta(double v, const VoltageInterval& valid_range, DeltaDirection direction,
                     const TunerConfig& cfg);

double choose_top_barrier(const VoltageInterval& tb_valid_range, const TunerConfig& cfg);

// Voltage where the fitted trace crosses cb_level * a_max; nearest-sample
// fallback for degraded fits. Empty when there is no crossing.
std::optional<double> central_barrier_setpoint(const GateResult& cb, double a_max,
                                               const TunerConfig& cfg);

// outer_fraction of the way up the barrier's own transition window.
double outer_barrier_setpoint(const PinchoffFit& fit, const TunerConfig& cfg);

struct ModelSet {
    ml::Model pinchoff;
    ml::Model single_dot;
    ml::Model double_dot;
    ml::Model regime;
};

struct ActionLogEntry {
    int step = 0;            // logical timestamp
    TunerStage from = TunerStage::Init;
    TunerStage to = TunerStage::Init;
    long n_1d = 0;           // session counters after the step
    long n_2d = 0;
    Voltages voltages{};
    std::string note;
    std::string oracle;      // simulator ground truth at these voltages
};

struct TuningResult {
    bool success = false;
    Regime classifier_regime = Regime::NoDot;  // best diagram's assessment
    Regime oracle_regime = Regime::NoDot;      // ground truth at final voltages
    int best_target_segments = 0;
    long n_1d = 0;
    long n_2d = 0;
    Voltages final_voltages{};
    std::vector<ActionLogEntry> log;

    std::string to_json() const;
};

TuningResult run_tuning(DeviceSession& dev, const CharacterizationReport& report,
                        const TunerConfig& cfg, const ModelSet& models);

}  // namespace qd
