#pragma once

// Synthetic labeled corpora for the four classification tasks, generated
// from seeded simulator fixtures. Good examples come from configurations
// verified by construction (and by the regime oracle for segments); bad
// examples cover flat, saturated, partial, noisy, smeared and off-regime
// measurements.

#include <cstdint>
#include <string>
#include <vector>

#include "qdtune/ml/dataset.hpp"

namespace qd {

enum class DatasetKind { Pinchoff, SingleDot, DoubleDot, Regime };
const std::string& dataset_kind_name(DatasetKind k);
DatasetKind dataset_kind_from_name(const std::string& name);

struct DatagenOptions {
    int count_per_class = 2000;
    int trace_points = 133;
    double noise_sigma = 0.005;
};

// count_per_class must be at least 10. Records are deterministic in
// (kind, options, seed).
std::vector<ml::DataRecord> generate_dataset(DatasetKind kind, const DatagenOptions& options,
                                             std::uint64_t seed);

}  // namespace qd
