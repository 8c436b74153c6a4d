#include <cmath>

#include "classifiers_impl.hpp"

namespace qd::ml::detail {

LogisticRegressionClassifier::LogisticRegressionClassifier(const Json& hyper) {
    check_keys(hyper, {"c", "penalty", "fit_intercept", "max_iter", "learning_rate"},
               "logistic_regression");
    c_ = hyper.value("c", 1.0);
    penalty_ = hyper.value("penalty", std::string("l2"));
    fit_intercept_ = hyper.value("fit_intercept", true);
    max_iter_ = hyper.value("max_iter", 500);
    lr_ = hyper.value("learning_rate", 0.1);
    if (!(c_ > 0.0)) throw std::invalid_argument("c must be positive");
    if (penalty_ != "l2" && penalty_ != "none") {
        throw std::invalid_argument("penalty must be l2 or none");
    }
    if (max_iter_ < 1) throw std::invalid_argument("max_iter must be positive");
}

void LogisticRegressionClassifier::fit(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                       std::uint64_t) {
    const Eigen::Index n = X.rows(), d = X.cols();
    w_ = Eigen::VectorXd::Zero(d);
    b_ = 0.0;
    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) target(i) = y[i];

    const double reg = penalty_ == "l2" ? 1.0 / (c_ * static_cast<double>(n)) : 0.0;
    double prev_loss = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter_; ++it) {
        const Eigen::VectorXd z = X * w_ + Eigen::VectorXd::Constant(n, b_);
        const Eigen::VectorXd prob = 1.0 / (1.0 + (-z.array()).exp());
        const Eigen::VectorXd err = prob - target;
        const Eigen::VectorXd grad_w = X.transpose() * err / static_cast<double>(n) + reg * w_;
        const double grad_b = fit_intercept_ ? err.mean() : 0.0;
        w_ -= lr_ * grad_w;
        b_ -= lr_ * grad_b;

        if ((it & 15) == 15) {
            double loss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double p = std::clamp(prob(i), 1e-12, 1.0 - 1e-12);
                loss -= target(i) * std::log(p) + (1.0 - target(i)) * std::log(1.0 - p);
            }
            loss = loss / n + 0.5 * reg * w_.squaredNorm();
            if (std::fabs(prev_loss - loss) < 1e-10 * std::max(1.0, prev_loss)) break;
            prev_loss = loss;
        }
    }
}

int LogisticRegressionClassifier::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != w_.size()) throw std::invalid_argument("row width mismatch");
    return row * w_ + b_ > 0.0 ? 1 : 0;  // z == 0 (p = 0.5) -> 0
}

Json LogisticRegressionClassifier::params_to_json() const {
    return Json{{"w", std::vector<double>(w_.data(), w_.data() + w_.size())}, {"b", b_}};
}

void LogisticRegressionClassifier::params_from_json(const Json& j) {
    const auto w = j.at("w").get<std::vector<double>>();
    w_ = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    b_ = j.at("b").get<double>();
}

}  // namespace qd::ml::detail
