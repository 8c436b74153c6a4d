#include "qdtune/ml/model.hpp"

#include <fstream>

#include "classifiers_impl.hpp"

namespace qd::ml {

const std::string& family_name(Family f) {
    static const std::string names[] = {"decision_tree", "random_forest", "knn",
                                        "logistic_regression", "mlp"};
    return names[static_cast<int>(f)];
}

Family family_from_name(const std::string& name) {
    for (int i = 0; i < 5; ++i) {
        if (family_name(static_cast<Family>(i)) == name) return static_cast<Family>(i);
    }
    throw std::invalid_argument("unknown classifier family: " + name);
}

std::vector<int> Classifier::predict_all(const Eigen::MatrixXd& X) const {
    std::vector<int> out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict(X.row(i));
    return out;
}

std::unique_ptr<Classifier> make_classifier(Family family, const Json& hyper) {
    switch (family) {
        case Family::DecisionTree: return std::make_unique<detail::DecisionTreeClassifier>(hyper);
        case Family::RandomForest: return std::make_unique<detail::RandomForestClassifier>(hyper);
        case Family::Knn: return std::make_unique<detail::KnnClassifier>(hyper);
        case Family::LogisticRegression:
            return std::make_unique<detail::LogisticRegressionClassifier>(hyper);
        case Family::Mlp: return std::make_unique<detail::MlpClassifier>(hyper);
    }
    throw std::logic_error("unreachable");
}

Json canonical_hyper(Family family, const Json& hyper) {
    // Construction validates; defaults are reported per family.
    make_classifier(family, hyper);
    Json defaults;
    switch (family) {
        case Family::DecisionTree:
            defaults = detail::TreeHyper{}.to_json();
            break;
        case Family::RandomForest:
            defaults = detail::TreeHyper{}.to_json();
            defaults["max_features"] = "sqrt";
            defaults["n_estimators"] = 100;
            break;
        case Family::Knn:
            defaults = {{"n_neighbors", 5}, {"weights", "uniform"}, {"p", 2.0}};
            break;
        case Family::LogisticRegression:
            defaults = {{"c", 1.0},
                        {"penalty", "l2"},
                        {"fit_intercept", true},
                        {"max_iter", 500},
                        {"learning_rate", 0.1}};
            break;
        case Family::Mlp:
            defaults = {{"hidden_layer_sizes", std::vector<int>{100}},
                        {"activation", "relu"},
                        {"alpha", 1e-4},
                        {"batch_size", 100},
                        {"learning_rate_init", 0.05},
                        {"momentum", 0.9},
                        {"max_iter", 150}};
            break;
    }
    for (auto it = hyper.begin(); it != hyper.end(); ++it) defaults[it.key()] = it.value();
    return defaults;
}

Model::Model(Family family, Json hyper, std::unique_ptr<Classifier> clf, FittedPreprocess prep)
    : family_(family), hyper_(std::move(hyper)), clf_(std::move(clf)), prep_(std::move(prep)) {}

int Model::predict_raw(const std::vector<double>& raw_row) const {
    const Eigen::Map<const Eigen::RowVectorXd> row(raw_row.data(),
                                                   static_cast<Eigen::Index>(raw_row.size()));
    const Eigen::MatrixXd prepared = prep_.apply(row);
    return clf_->predict(prepared.row(0));
}

std::vector<int> Model::predict_raw_rows(const Eigen::MatrixXd& raw) const {
    const Eigen::MatrixXd prepared = prep_.apply(raw);
    return clf_->predict_all(prepared);
}

namespace {

Json pca_to_json(const PcaBasis& b) {
    return Json{{"mean", std::vector<double>(b.mean.data(), b.mean.data() + b.mean.size())},
                {"eigenvalues", std::vector<double>(b.eigenvalues.data(),
                                                    b.eigenvalues.data() + b.eigenvalues.size())},
                {"rows", b.components.rows()},
                {"cols", b.components.cols()},
                {"components", std::vector<double>(
                                   b.components.data(),
                                   b.components.data() + b.components.size())}};
}

PcaBasis pca_from_json(const Json& j) {
    PcaBasis b;
    const auto mean = j.at("mean").get<std::vector<double>>();
    b.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    const auto ev = j.at("eigenvalues").get<std::vector<double>>();
    b.eigenvalues =
        Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    const auto comp = j.at("components").get<std::vector<double>>();
    b.components = Eigen::Map<const Eigen::MatrixXd>(comp.data(), j.at("rows").get<Eigen::Index>(),
                                                     j.at("cols").get<Eigen::Index>());
    return b;
}

}  // namespace

Json Model::to_json() const {
    Json j;
    j["schema"] = "qdtune-model-v1";
    j["family"] = family_name(family_);
    j["hyper"] = hyper_;
    j["preprocess"] = {{"representation", representation_name(prep_.spec.representation)}};
    if (prep_.spec.pca_components) {
        j["preprocess"]["pca_components"] = *prep_.spec.pca_components;
        j["preprocess"]["pca"] = pca_to_json(*prep_.pca);
    }
    j["params"] = clf_->params_to_json();
    return j;
}

Model Model::from_json(const Json& j) {
    if (j.at("schema").get<std::string>() != "qdtune-model-v1") {
        throw std::invalid_argument("unsupported model schema");
    }
    const Family family = family_from_name(j.at("family").get<std::string>());
    Json hyper = j.at("hyper");
    auto clf = make_classifier(family, hyper);
    clf->params_from_json(j.at("params"));
    FittedPreprocess prep;
    const Json& p = j.at("preprocess");
    prep.spec.representation = representation_from_name(p.at("representation").get<std::string>());
    if (p.contains("pca_components")) {
        prep.spec.pca_components = p.at("pca_components").get<int>();
        prep.pca = pca_from_json(p.at("pca"));
    }
    return Model(family, std::move(hyper), std::move(clf), std::move(prep));
}

void Model::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << to_json().dump(2) << "\n";
}

Model Model::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    Json j;
    in >> j;
    return from_json(j);
}

Model train_model(const Dataset& data, Family family, const Json& hyper,
                  const PreprocessSpec& spec, std::uint64_t seed) {
    if (data.count(0) < 2 || data.count(1) < 2) {
        throw std::invalid_argument("need at least two examples per class");
    }
    FittedPreprocess prep = fit_preprocess(spec, data.X);
    const Eigen::MatrixXd prepared = prep.apply(data.X);
    auto clf = make_classifier(family, hyper);
    clf->fit(prepared, data.y, seed);
    return Model(family, hyper, std::move(clf), std::move(prep));
}

}  // namespace qd::ml
