#pragma once

// Five binary classifier families, implemented from scratch. Hyperparameters
// travel as JSON objects so that grid search and serialization share one
// schema. Ties everywhere resolve toward label 0.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace qd::ml {

using Json = nlohmann::json;

enum class Family { DecisionTree, RandomForest, Knn, LogisticRegression, Mlp };
const std::string& family_name(Family f);
Family family_from_name(const std::string& name);

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual void fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t seed) = 0;
    virtual int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const = 0;
    virtual Json params_to_json() const = 0;
    virtual void params_from_json(const Json& j) = 0;
    virtual Eigen::Index expected_cols() const = 0;

    std::vector<int> predict_all(const Eigen::MatrixXd& X) const;
};

// Factory. `hyper` may specify any subset of the family's fields; the rest
// take defaults. Unknown keys are rejected.
std::unique_ptr<Classifier> make_classifier(Family family, const Json& hyper);

// Normalized hyperparameters (defaults filled in) for reporting.
Json canonical_hyper(Family family, const Json& hyper);

}  // namespace qd::ml
