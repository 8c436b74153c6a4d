#pragma once

// Stage 1: initial quality assessment, per-gate characterization with the
// top-barrier protocol, device verdict and top-barrier valid-range
// establishment.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qdtune/device.hpp"
#include "qdtune/ml/model.hpp"
#include "qdtune/pinchoff.hpp"

namespace qd {

enum class IqaMode { AllZero, AllSafeMax };

struct CharacterizeConfig {
    IqaMode iqa_mode = IqaMode::AllSafeMax;
    double signal_threshold = 0.8;  // x A_max; top barrier raised below this
    double tb_step = 0.2;           // volts per top-barrier raise
    double safety_shift = 0.5;      // volts; applied when offset charges detected
    double tb_scan_step = 0.2;      // volts per valid-range scan step
    int trace_points = 133;         // setpoints per 1D characterization sweep
    double smoothing_sigma = 2.0;   // samples
};

enum class Verdict { FailedIqa, Broken, Working };
const std::string& verdict_name(Verdict v);

struct GateResult {
    Trace trace;          // canonicalized, normalized
    PinchoffFit fit;
    bool good = false;
};

struct CharacterizationReport {
    double a_max = 0.0;
    Verdict verdict = Verdict::FailedIqa;
    std::vector<std::string> broken_gates;
    std::string failure_reason;
    std::map<Gate, GateResult> gates;
    std::optional<VoltageInterval> tb_valid_range;
    double tb_voltage = 0.0;        // top-barrier position used for the sweeps
    int tb_raise_steps = 0;         // raises applied before characterization
    bool safety_shifted = false;
    long n_1d = 0;                  // 1D sweeps consumed by this stage

    std::string to_json() const;
};

// Measure the saturation current at the configured bias point. Returns the
// measured A_max on pass (current above the noise floor).
std::optional<double> initial_quality_assessment(DeviceSession& dev,
                                                 const CharacterizeConfig& cfg);

// Sweep one gate over its full active range (high to low) with every other
// gate untouched; normalize, smooth, fit and classify.
GateResult characterize_gate(DeviceSession& dev, Gate g, const CharacterizeConfig& cfg,
                             const ml::Model& pinch_model);

// Full stage-1 run: i.q.a., top-barrier protocol, the five lower-gate sweeps
// and the verdict.
CharacterizationReport characterize_device(DeviceSession& dev, const CharacterizeConfig& cfg,
                                           const ml::Model& pinch_model);

// Scan the top barrier downward from zero, characterizing the remaining
// barriers each step, to establish [v_valid_min, v_valid_max] for TB.
// Updates report.tb_valid_range (or marks the device broken).
void establish_tb_valid_range(DeviceSession& dev, const CharacterizeConfig& cfg,
                              const ml::Model& pinch_model, CharacterizationReport& report);

}  // namespace qd
