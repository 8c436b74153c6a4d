#include <algorithm>
#include <cmath>

#include "classifiers_impl.hpp"

namespace qd::ml::detail {

KnnClassifier::KnnClassifier(const Json& hyper) {
    check_keys(hyper, {"n_neighbors", "weights", "p"}, "knn");
    k_ = hyper.value("n_neighbors", 5);
    weights_ = hyper.value("weights", std::string("uniform"));
    p_ = hyper.value("p", 2.0);
    if (k_ < 1) throw std::invalid_argument("n_neighbors must be positive");
    if (weights_ != "uniform" && weights_ != "distance") {
        throw std::invalid_argument("weights must be uniform or distance");
    }
    if (!(p_ >= 1.0)) throw std::invalid_argument("p must be >= 1");
}

void KnnClassifier::fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t) {
    train_x_ = X;
    train_y_ = y;
}

int KnnClassifier::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != train_x_.cols()) throw std::invalid_argument("row width mismatch");
    const int n = static_cast<int>(train_x_.rows());
    const int k = std::min(k_, n);

    std::vector<std::pair<double, int>> dist(n);
    if (p_ == 2.0) {
        for (int i = 0; i < n; ++i) {
            dist[i] = {(train_x_.row(i) - row).norm(), i};
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const auto diff = (train_x_.row(i) - row).cwiseAbs();
            double acc = 0.0;
            for (Eigen::Index c = 0; c < diff.size(); ++c) acc += std::pow(diff(c), p_);
            dist[i] = {std::pow(acc, 1.0 / p_), i};
        }
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    double w1 = 0.0, w0 = 0.0;
    for (int i = 0; i < k; ++i) {
        const auto& [d, idx] = dist[i];
        double w = 1.0;
        if (weights_ == "distance") {
            if (d <= 0.0) return train_y_[idx];  // exact match dominates
            w = 1.0 / d;
        }
        (train_y_[idx] == 1 ? w1 : w0) += w;
    }
    return w1 > w0 ? 1 : 0;  // tie -> 0
}

Json KnnClassifier::params_to_json() const {
    Json x = Json::array();
    for (Eigen::Index r = 0; r < train_x_.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < train_x_.cols(); ++c) row.push_back(train_x_(r, c));
        x.push_back(std::move(row));
    }
    return Json{{"x", x}, {"y", train_y_}};
}

void KnnClassifier::params_from_json(const Json& j) {
    const auto& x = j.at("x");
    const Eigen::Index rows = static_cast<Eigen::Index>(x.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(x.at(0).size()) : 0;
    train_x_.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) train_x_(r, c) = x.at(r).at(c).get<double>();
    }
    train_y_ = j.at("y").get<std::vector<int>>();
}

}  // namespace qd::ml::detail
