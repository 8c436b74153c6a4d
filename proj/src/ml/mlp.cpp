#include <algorithm>
#include <cmath>
#include <numeric>

#include "classifiers_impl.hpp"

namespace qd::ml::detail {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, const std::string& kind) {
    if (kind == "relu") return z.cwiseMax(0.0);
    if (kind == "tanh") return z.array().tanh();
    return 1.0 / (1.0 + (-z.array()).exp());  // logistic
}

Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& a, const std::string& kind) {
    if (kind == "relu") return (a.array() > 0.0).cast<double>();
    if (kind == "tanh") return 1.0 - a.array().square();
    return a.array() * (1.0 - a.array());  // logistic, in terms of output
}

}  // namespace

MlpClassifier::MlpClassifier(const Json& hyper) {
    check_keys(hyper, {"hidden_layer_sizes", "activation", "alpha", "batch_size",
                       "learning_rate_init", "momentum", "max_iter"},
               "mlp");
    hidden_ = hyper.value("hidden_layer_sizes", hidden_);
    activation_ = hyper.value("activation", activation_);
    alpha_ = hyper.value("alpha", alpha_);
    batch_size_ = hyper.value("batch_size", batch_size_);
    lr_ = hyper.value("learning_rate_init", lr_);
    momentum_ = hyper.value("momentum", momentum_);
    max_iter_ = hyper.value("max_iter", max_iter_);
    if (hidden_.empty()) throw std::invalid_argument("at least one hidden layer required");
    for (int h : hidden_) {
        if (h < 1) throw std::invalid_argument("hidden layer sizes must be positive");
    }
    if (activation_ != "relu" && activation_ != "logistic" && activation_ != "tanh") {
        throw std::invalid_argument("unknown activation: " + activation_);
    }
    if (batch_size_ < 1 || max_iter_ < 1) throw std::invalid_argument("invalid mlp sizes");
}

Eigen::Index MlpClassifier::expected_cols() const {
    return w_.empty() ? 0 : w_.front().rows();
}

void MlpClassifier::fit(const Eigen::MatrixXd& X, const std::vector<int>& y, std::uint64_t seed) {
    const Eigen::Index n = X.rows(), d = X.cols();
    std::vector<Eigen::Index> sizes;
    sizes.push_back(d);
    for (int h : hidden_) sizes.push_back(h);
    sizes.push_back(1);

    Rng rng(seed ^ 0x452821e638d01377ULL);
    const std::size_t layers = sizes.size() - 1;
    w_.assign(layers, {});
    bias_.assign(layers, {});
    std::vector<Eigen::MatrixXd> vel_w(layers);
    std::vector<Eigen::RowVectorXd> vel_b(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const double scale = std::sqrt(2.0 / static_cast<double>(sizes[l]));
        w_[l].resize(sizes[l], sizes[l + 1]);
        for (Eigen::Index i = 0; i < w_[l].size(); ++i) w_[l].data()[i] = scale * rng.gauss();
        bias_[l] = Eigen::RowVectorXd::Zero(sizes[l + 1]);
        vel_w[l] = Eigen::MatrixXd::Zero(sizes[l], sizes[l + 1]);
        vel_b[l] = Eigen::RowVectorXd::Zero(sizes[l + 1]);
    }

    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) target(i) = y[i];
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < max_iter_; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index start = 0; start < n; start += batch_size_) {
            const Eigen::Index bs = std::min<Eigen::Index>(batch_size_, n - start);
            Eigen::MatrixXd batch(bs, d);
            Eigen::VectorXd t(bs);
            for (Eigen::Index i = 0; i < bs; ++i) {
                batch.row(i) = X.row(order[start + i]);
                t(i) = target(order[start + i]);
            }

            // forward
            std::vector<Eigen::MatrixXd> acts(layers + 1);
            acts[0] = std::move(batch);
            for (std::size_t l = 0; l < layers; ++l) {
                Eigen::MatrixXd z = (acts[l] * w_[l]).rowwise() + bias_[l];
                acts[l + 1] = l + 1 == layers
                                  ? Eigen::MatrixXd(1.0 / (1.0 + (-z.array()).exp()))
                                  : activate(z, activation_);
            }

            // backward (binary cross-entropy; output delta = p - t)
            Eigen::MatrixXd delta = acts[layers] - t;
            for (std::size_t l = layers; l-- > 0;) {
                const Eigen::MatrixXd grad_w =
                    acts[l].transpose() * delta / static_cast<double>(bs) + alpha_ * w_[l];
                const Eigen::RowVectorXd grad_b = delta.colwise().mean();
                if (l > 0) {
                    delta = (delta * w_[l].transpose())
                                .cwiseProduct(activate_grad(acts[l], activation_));
                }
                vel_w[l] = momentum_ * vel_w[l] - lr_ * grad_w;
                vel_b[l] = momentum_ * vel_b[l] - lr_ * grad_b;
                w_[l] += vel_w[l];
                bias_[l] += vel_b[l];
            }
        }
    }
}

double MlpClassifier::forward(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    Eigen::MatrixXd a = row;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        Eigen::MatrixXd z = (a * w_[l]).rowwise() + bias_[l];
        a = l + 1 == w_.size() ? Eigen::MatrixXd(1.0 / (1.0 + (-z.array()).exp()))
                               : activate(z, activation_);
    }
    return a(0, 0);
}

int MlpClassifier::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (w_.empty() || row.size() != w_.front().rows()) {
        throw std::invalid_argument("row width mismatch");
    }
    return forward(row) > 0.5 ? 1 : 0;  // p == 0.5 -> 0
}

Json MlpClassifier::params_to_json() const {
    Json layers = Json::array();
    for (std::size_t l = 0; l < w_.size(); ++l) {
        layers.push_back(
            Json{{"rows", w_[l].rows()},
                 {"cols", w_[l].cols()},
                 {"w", std::vector<double>(w_[l].data(), w_[l].data() + w_[l].size())},
                 {"b", std::vector<double>(bias_[l].data(), bias_[l].data() + bias_[l].size())}});
    }
    return Json{{"layers", layers}};
}

void MlpClassifier::params_from_json(const Json& j) {
    w_.clear();
    bias_.clear();
    for (const auto& layer : j.at("layers")) {
        const Eigen::Index rows = layer.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = layer.at("cols").get<Eigen::Index>();
        const auto w = layer.at("w").get<std::vector<double>>();
        const auto b = layer.at("b").get<std::vector<double>>();
        w_.push_back(Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols));
        bias_.push_back(Eigen::Map<const Eigen::RowVectorXd>(b.data(), cols));
    }
}

}  // namespace qd::ml::detail
