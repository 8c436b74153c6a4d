#pragma once

// Charge stability diagram acquisition: setpoint planning, boundary-average
// range adjustment, resampling to a fixed pixel pitch, segmentation into
// fixed-size tiles and combined classification of each tile.

#include <optional>
#include <string>
#include <vector>

#include "qdtune/device.hpp"
#include "qdtune/ml/model.hpp"

namespace qd {

struct ChargeMapConfig {
    int base_points = 50;           // minimum setpoints per axis
    double delta_v_max = 0.005;     // volts; refine when the step exceeds this
    double window_low = 0.004;      // x A_max
    double window_high = 0.1;       // x A_max
    double segment_size = 0.05;     // volts per tile
    int pixel_side = 28;            // pixels per tile side
    double shift_step = 0.05;       // volts per range adjustment
};

std::vector<double> plan_setpoints(double v_lo, double v_hi, const ChargeMapConfig& cfg);

struct BoundaryStats {
    double left = 0, right = 0, bottom = 0, top = 0;
};

BoundaryStats boundary_averages(const CurrentMap& map);

enum class PlungerAction { Keep, Decrease, Increase };
enum class StopReason { InWindow, SafetyLimit, MaxIters };

struct RangeUpdate {
    PlungerAction lp_action = PlungerAction::Keep;
    PlungerAction rp_action = PlungerAction::Keep;
    VoltageInterval lp_range;
    VoltageInterval rp_range;
    BoundaryStats stats;
    std::optional<StopReason> terminated;
};

// Applies the boundary rules to the measured map. All four boundary means
// inside [window_low, window_high] * a_max terminates with InWindow; a shift
// that cannot move at all terminates with SafetyLimit.
RangeUpdate adjust_ranges(const BoundaryStats& stats, VoltageInterval lp_range,
                          VoltageInterval rp_range, const ChargeMapConfig& cfg,
                          const VoltageInterval& lp_safety, const VoltageInterval& rp_safety,
                          double a_max);

// Bilinear resample onto a cell-centered grid with pitch segment_size/pixel_side.
CurrentMap resample_map(const CurrentMap& map, const ChargeMapConfig& cfg);

struct AcquireResult {
    CurrentMap map;        // resampled final map
    CurrentMap raw_map;    // final map as measured
    std::vector<RangeUpdate> history;
    StopReason exit = StopReason::MaxIters;
    VoltageInterval lp_range;
    VoltageInterval rp_range;
};

AcquireResult acquire_diagram(DeviceSession& dev, VoltageInterval lp_range,
                              VoltageInterval rp_range, const ChargeMapConfig& cfg,
                              int max_adjust_iters);

struct Segment {
    double origin_lp = 0.0;  // lower-left corner of the tile (volts)
    double origin_rp = 0.0;
    std::vector<double> pixels;  // pixel_side^2, row-major, normalized by a_max
    std::string source_id;
};

// Complete tiles only; trailing partial tiles are dropped.
std::vector<Segment> segment_map(const CurrentMap& resampled, const ChargeMapConfig& cfg,
                                 const std::string& source_id = "");

// Combination rule over the three binary models: both qualities bad -> NoDot,
// exactly one good -> that regime, both good -> the regime model decides
// (label 1 = double dot).
std::vector<Regime> assess_segments(const std::vector<Segment>& segments,
                                    const ml::Model& single_dot_quality,
                                    const ml::Model& double_dot_quality,
                                    const ml::Model& regime);

std::string map_to_csv(const CurrentMap& map);

}  // namespace qd
