#include "qdtune/ml/eval.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qdtune/rng.hpp"

namespace qd::ml {

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.empty() || truth.size() != predicted.size()) {
        throw std::invalid_argument("label vectors must be non-empty and equal length");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1) {
            (predicted[i] == 1 ? cm.tp : cm.fn) += 1.0;
        } else {
            (predicted[i] == 1 ? cm.fp : cm.tn) += 1.0;
        }
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const double total = cm.total();
    if (total <= 0.0) throw std::invalid_argument("empty confusion matrix");
    return (cm.tp + cm.tn) / total;
}

Json EvalReport::to_json() const {
    return Json{{"accuracy_mean", acc_mean},
                {"accuracy_std", acc_std},
                {"confusion", {{"tp", cm_mean.tp}, {"fp", cm_mean.fp}, {"fn", cm_mean.fn},
                               {"tn", cm_mean.tn}}},
                {"n_redraws", n_redraws},
                {"train_size", train_size},
                {"test_size", test_size}};
}

namespace {

struct SplitIdx {
    std::vector<int> train;
    std::vector<int> test;
};

// Balanced subset (min class size from each class), shuffle, 80/20 split.
SplitIdx balanced_split(const Dataset& data, Rng& rng) {
    std::vector<int> idx0, idx1;
    for (std::size_t i = 0; i < data.y.size(); ++i) {
        (data.y[i] == 1 ? idx1 : idx0).push_back(static_cast<int>(i));
    }
    if (idx0.size() < 5 || idx1.size() < 5) {
        throw std::invalid_argument("each class needs at least 5 examples");
    }
    const std::size_t m = std::min(idx0.size(), idx1.size());
    rng.shuffle(idx0);
    rng.shuffle(idx1);
    std::vector<int> pool;
    pool.reserve(2 * m);
    pool.insert(pool.end(), idx0.begin(), idx0.begin() + m);
    pool.insert(pool.end(), idx1.begin(), idx1.begin() + m);
    rng.shuffle(pool);
    const std::size_t n_train = (2 * m * 8) / 10;
    SplitIdx s;
    s.train.assign(pool.begin(), pool.begin() + n_train);
    s.test.assign(pool.begin() + n_train, pool.end());
    return s;
}

struct SingleEval {
    ConfusionMatrix cm;
    double acc = 0.0;
};

SingleEval run_split(const Eigen::MatrixXd& represented, const Dataset& data, Family family,
                     const Json& hyper, const PreprocessSpec& spec, const SplitIdx& s,
                     std::uint64_t seed) {
    Eigen::MatrixXd train_x(static_cast<Eigen::Index>(s.train.size()), represented.cols());
    std::vector<int> train_y(s.train.size());
    for (std::size_t i = 0; i < s.train.size(); ++i) {
        train_x.row(static_cast<Eigen::Index>(i)) = represented.row(s.train[i]);
        train_y[i] = data.y[s.train[i]];
    }
    Eigen::MatrixXd test_x(static_cast<Eigen::Index>(s.test.size()), represented.cols());
    std::vector<int> test_y(s.test.size());
    for (std::size_t i = 0; i < s.test.size(); ++i) {
        test_x.row(static_cast<Eigen::Index>(i)) = represented.row(s.test[i]);
        test_y[i] = data.y[s.test[i]];
    }

    // PCA is fitted on the training rows only.
    if (spec.pca_components) {
        const PcaBasis basis = pca_fit(train_x, *spec.pca_components);
        train_x = pca_project(basis, train_x);
        test_x = pca_project(basis, test_x);
    }

    auto clf = make_classifier(family, hyper);
    clf->fit(train_x, train_y, seed);
    const std::vector<int> pred = clf->predict_all(test_x);
    SingleEval out;
    out.cm = confusion_matrix(test_y, pred);
    out.acc = accuracy(out.cm);
    return out;
}

}  // namespace

EvalReport evaluate_redraws(const Dataset& data, Family family, const Json& hyper,
                            const PreprocessSpec& spec, int n_redraws, std::uint64_t seed) {
    if (n_redraws < 1) throw std::invalid_argument("need at least one redraw");
    // The per-row representation is split-independent; build it once.
    const Eigen::MatrixXd represented = represent(data.X, spec.representation);

    std::vector<double> accs;
    accs.reserve(n_redraws);
    ConfusionMatrix cm_sum;
    EvalReport report;
    for (int r = 0; r < n_redraws; ++r) {
        Rng rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(r) + 1);
        const SplitIdx s = balanced_split(data, rng);
        report.train_size = static_cast<int>(s.train.size());
        report.test_size = static_cast<int>(s.test.size());
        const SingleEval e =
            run_split(represented, data, family, hyper, spec, s, seed + 7919ULL * (r + 1));
        accs.push_back(e.acc);
        cm_sum.tp += e.cm.tp;
        cm_sum.fp += e.cm.fp;
        cm_sum.fn += e.cm.fn;
        cm_sum.tn += e.cm.tn;
    }
    const double n = static_cast<double>(n_redraws);
    report.n_redraws = n_redraws;
    report.acc_mean = std::accumulate(accs.begin(), accs.end(), 0.0) / n;
    double var = 0.0;
    for (double a : accs) var += (a - report.acc_mean) * (a - report.acc_mean);
    report.acc_std = std::sqrt(var / n);
    report.cm_mean = {cm_sum.tp / n, cm_sum.fp / n, cm_sum.fn / n, cm_sum.tn / n};
    return report;
}

GridSearchResult grid_search(const Dataset& data, Family family, const std::vector<Json>& grid,
                             const PreprocessSpec& spec, std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("empty hyperparameter grid");
    const Eigen::MatrixXd represented = represent(data.X, spec.representation);
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 1);
    const SplitIdx s = balanced_split(data, rng);  // one fixed split for all cells

    GridSearchResult result;
    for (const Json& h : grid) {
        const SingleEval e = run_split(represented, data, family, h, spec, s, seed);
        ++result.evaluated;
        if (e.acc > result.best_accuracy + 1e-15 || result.best_hyper.is_null()) {
            result.best_accuracy = e.acc;
            result.best_hyper = h;
        }
    }
    return result;
}

std::vector<FluctuationPoint> redraw_fluctuation_sweep(const Dataset& data, Family family,
                                                       const Json& hyper,
                                                       const PreprocessSpec& spec,
                                                       const std::vector<int>& n_list,
                                                       std::uint64_t master_seed) {
    std::vector<FluctuationPoint> curve;
    curve.reserve(n_list.size());
    for (int n : n_list) {
        const EvalReport r = evaluate_redraws(data, family, hyper, spec, n, master_seed);
        curve.push_back({n, r.acc_mean, r.acc_std});
    }
    return curve;
}

std::vector<Json> default_grid(Family family) {
    std::vector<Json> grid;
    switch (family) {
        case Family::DecisionTree:
            for (const char* crit : {"gini", "entropy"}) {
                for (int leaf : {1, 2, 3}) {
                    for (int split : {2, 6}) {
                        for (const char* splitter : {"best", "random"}) {
                            grid.push_back({{"criterion", crit},
                                            {"min_samples_leaf", leaf},
                                            {"min_samples_split", split},
                                            {"splitter", splitter}});
                        }
                    }
                }
            }
            break;
        case Family::RandomForest:
            for (const char* crit : {"gini", "entropy"}) {
                for (int leaf : {1, 2}) {
                    for (int split : {2, 6}) {
                        for (int trees : {10, 100}) {
                            grid.push_back({{"criterion", crit},
                                            {"min_samples_leaf", leaf},
                                            {"min_samples_split", split},
                                            {"n_estimators", trees},
                                            {"max_features", "sqrt"}});
                        }
                    }
                }
            }
            break;
        case Family::Knn:
            for (int k : {2, 5, 10}) {
                for (const char* w : {"uniform", "distance"}) {
                    for (double p : {1.0, 2.0, 3.0}) {
                        grid.push_back({{"n_neighbors", k}, {"weights", w}, {"p", p}});
                    }
                }
            }
            break;
        case Family::LogisticRegression:
            for (double c : {0.1, 1.0, 100.0, 1000.0}) {
                for (bool intercept : {true, false}) {
                    grid.push_back(
                        {{"c", c}, {"fit_intercept", intercept}, {"max_iter", 1000}});
                }
            }
            break;
        case Family::Mlp:
            for (int hidden : {100, 200, 300}) {
                for (double alpha : {1e-4, 1e-3, 1e-1}) {
                    for (int batch : {100, 200, 300}) {
                        grid.push_back({{"hidden_layer_sizes", std::vector<int>{hidden}},
                                        {"alpha", alpha},
                                        {"batch_size", batch}});
                    }
                }
            }
            break;
    }
    return grid;
}

}  // namespace qd::ml
