#pragma once

#include <cstdint>
#include <vector>

#include "qdtune/ml/classifiers.hpp"
#include "qdtune/ml/dataset.hpp"
#include "qdtune/ml/preprocess.hpp"

namespace qd::ml {

struct ConfusionMatrix {
    double tp = 0, fp = 0, fn = 0, tn = 0;
    double total() const { return tp + fp + fn + tn; }
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted);
double accuracy(const ConfusionMatrix& cm);

struct EvalReport {
    double acc_mean = 0.0;
    double acc_std = 0.0;
    ConfusionMatrix cm_mean;
    int n_redraws = 0;
    int train_size = 0;
    int test_size = 0;

    Json to_json() const;
};

// One redraw: balanced subset (min class size from each class), shuffled,
// 80/20 split. Preprocessing is fitted on the training rows only.
EvalReport evaluate_redraws(const Dataset& data, Family family, const Json& hyper,
                            const PreprocessSpec& spec, int n_redraws, std::uint64_t seed);

struct GridSearchResult {
    Json best_hyper;
    double best_accuracy = 0.0;
    int evaluated = 0;
};

// Exhaustive search over `grid` on one fixed seeded split; ties keep the
// earliest grid entry.
GridSearchResult grid_search(const Dataset& data, Family family, const std::vector<Json>& grid,
                             const PreprocessSpec& spec, std::uint64_t seed);

struct FluctuationPoint {
    int n_redraws = 0;
    double acc_mean = 0.0;
    double acc_std = 0.0;
};

std::vector<FluctuationPoint> redraw_fluctuation_sweep(const Dataset& data, Family family,
                                                       const Json& hyper,
                                                       const PreprocessSpec& spec,
                                                       const std::vector<int>& n_list,
                                                       std::uint64_t master_seed);

// Hyperparameter grids used by the benchmarking command, one per family.
std::vector<Json> default_grid(Family family);

}  // namespace qd::ml
