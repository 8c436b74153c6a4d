#pragma once

#include <memory>
#include <string>

#include "qdtune/ml/classifiers.hpp"
#include "qdtune/ml/dataset.hpp"
#include "qdtune/ml/preprocess.hpp"

namespace qd::ml {

// A trained classifier bundled with its fitted preprocessing, so that raw
// rows (trace features or segment pixels) can be classified directly.
class Model {
public:
    Model() = default;
    Model(Family family, Json hyper, std::unique_ptr<Classifier> clf, FittedPreprocess prep);

    Family family() const { return family_; }
    const Json& hyper() const { return hyper_; }
    const FittedPreprocess& preprocess() const { return prep_; }
    const Classifier& classifier() const { return *clf_; }

    int predict_raw(const std::vector<double>& raw_row) const;
    std::vector<int> predict_raw_rows(const Eigen::MatrixXd& raw) const;

    Json to_json() const;
    static Model from_json(const Json& j);
    void save(const std::string& path) const;
    static Model load(const std::string& path);

private:
    Family family_ = Family::DecisionTree;
    Json hyper_;
    std::unique_ptr<Classifier> clf_;
    FittedPreprocess prep_;
};

// Fit preprocessing on the full training set, then train. For the paper-style
// protocol with held-out evaluation use evaluate_redraws instead.
Model train_model(const Dataset& data, Family family, const Json& hyper,
                  const PreprocessSpec& spec, std::uint64_t seed);

}  // namespace qd::ml
