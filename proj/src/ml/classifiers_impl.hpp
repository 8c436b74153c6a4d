#pragma once

// Internal classifier definitions shared between the family translation
// units and the factory.

#include <cstdint>
#include <vector>

#include "qdtune/ml/classifiers.hpp"
#include "qdtune/rng.hpp"

namespace qd::ml::detail {

void check_keys(const Json& hyper, const std::vector<std::string>& allowed,
                const std::string& family);

// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;       // -1 for leaves
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;
};

struct TreeHyper {
    std::string criterion = "gini";       // gini | entropy
    int max_depth = 0;                    // 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    std::string max_features = "all";     // all | sqrt | log2
    std::string splitter = "best";        // best | random

    static TreeHyper parse(const Json& j);
    Json to_json() const;
};

// CART-style binary tree on rows referenced by index.
std::vector<TreeNode> build_tree(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                 const std::vector<int>& rows, const TreeHyper& h, Rng& rng);
int tree_predict(const std::vector<TreeNode>& nodes,
                 const Eigen::Ref<const Eigen::RowVectorXd>& row);

class DecisionTreeClassifier final : public Classifier {
public:
    explicit DecisionTreeClassifier(const Json& hyper);
    void fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t seed) override;
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const override;
    Json params_to_json() const override;
    void params_from_json(const Json& j) override;
    Eigen::Index expected_cols() const override { return cols_; }
    const TreeHyper& hyper() const { return h_; }

private:
    TreeHyper h_;
    std::vector<TreeNode> nodes_;
    Eigen::Index cols_ = 0;
};

class RandomForestClassifier final : public Classifier {
public:
    explicit RandomForestClassifier(const Json& hyper);
    void fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t seed) override;
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const override;
    Json params_to_json() const override;
    void params_from_json(const Json& j) override;
    Eigen::Index expected_cols() const override { return cols_; }

private:
    TreeHyper tree_h_;
    int n_estimators_ = 100;
    std::vector<std::vector<TreeNode>> trees_;
    Eigen::Index cols_ = 0;
};

class KnnClassifier final : public Classifier {
public:
    explicit KnnClassifier(const Json& hyper);
    void fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t seed) override;
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const override;
    Json params_to_json() const override;
    void params_from_json(const Json& j) override;
    Eigen::Index expected_cols() const override { return train_x_.cols(); }

private:
    int k_ = 5;
    std::string weights_ = "uniform";  // uniform | distance
    double p_ = 2.0;                   // Minkowski order
    Eigen::MatrixXd train_x_;
    std::vector<int> train_y_;
};

class LogisticRegressionClassifier final : public Classifier {
public:
    explicit LogisticRegressionClassifier(const Json& hyper);
    void fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t seed) override;
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const override;
    Json params_to_json() const override;
    void params_from_json(const Json& j) override;
    Eigen::Index expected_cols() const override { return w_.size(); }

private:
    double c_ = 1.0;               // inverse regularization strength
    std::string penalty_ = "l2";   // l2 | none
    bool fit_intercept_ = true;
    int max_iter_ = 500;
    double lr_ = 0.1;
    Eigen::VectorXd w_;
    double b_ = 0.0;
};

class MlpClassifier final : public Classifier {
public:
    explicit MlpClassifier(const Json& hyper);
    void fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t seed) override;
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const override;
    Json params_to_json() const override;
    void params_from_json(const Json& j) override;
    Eigen::Index expected_cols() const override;

private:
    double forward(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

    std::vector<int> hidden_ = {100};
    std::string activation_ = "relu";  // relu | logistic | tanh
    double alpha_ = 1e-4;              // L2 penalty
    int batch_size_ = 100;
    double lr_ = 0.05;
    double momentum_ = 0.9;
    int max_iter_ = 150;               // epochs
    std::vector<Eigen::MatrixXd> w_;   // layer weights (in x out)
    std::vector<Eigen::RowVectorXd> bias_;
};

}  // namespace qd::ml::detail
