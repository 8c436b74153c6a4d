#include <numeric>

#include "classifiers_impl.hpp"

namespace qd::ml::detail {

RandomForestClassifier::RandomForestClassifier(const Json& hyper) {
    check_keys(hyper, {"n_estimators", "criterion", "max_depth", "min_samples_split",
                       "min_samples_leaf", "max_features"},
               "random_forest");
    Json tree_part = hyper;
    tree_part.erase("n_estimators");
    if (!tree_part.contains("max_features")) tree_part["max_features"] = "sqrt";
    tree_h_ = TreeHyper::parse(tree_part);
    n_estimators_ = hyper.value("n_estimators", 100);
    if (n_estimators_ < 1) throw std::invalid_argument("n_estimators must be positive");
}

void RandomForestClassifier::fit(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                 std::uint64_t seed) {
    cols_ = X.cols();
    trees_.clear();
    trees_.reserve(n_estimators_);
    Rng rng(seed ^ 0x1f83d9abfb41bd6bULL);
    const int n = static_cast<int>(X.rows());
    for (int t = 0; t < n_estimators_; ++t) {
        std::vector<int> rows(n);
        for (int i = 0; i < n; ++i) rows[i] = static_cast<int>(rng.below(n));  // bootstrap
        trees_.push_back(build_tree(X, y, rows, tree_h_, rng));
    }
}

int RandomForestClassifier::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != cols_) throw std::invalid_argument("row width mismatch");
    long votes = 0;
    for (const auto& t : trees_) votes += tree_predict(t, row);
    return 2 * votes > static_cast<long>(trees_.size()) ? 1 : 0;  // tie -> 0
}

Json RandomForestClassifier::params_to_json() const {
    Json trees = Json::array();
    for (const auto& t : trees_) {
        Json nodes = Json::array();
        for (const TreeNode& n : t) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
        }
        trees.push_back(std::move(nodes));
    }
    return Json{{"cols", cols_}, {"trees", trees}};
}

void RandomForestClassifier::params_from_json(const Json& j) {
    cols_ = j.at("cols").get<Eigen::Index>();
    trees_.clear();
    for (const auto& t : j.at("trees")) {
        std::vector<TreeNode> nodes;
        for (const auto& n : t) {
            nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                             n.at(3).get<int>(), n.at(4).get<int>()});
        }
        trees_.push_back(std::move(nodes));
    }
}

}  // namespace qd::ml::detail
