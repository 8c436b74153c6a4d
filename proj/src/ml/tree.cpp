#include <algorithm>
#include <cmath>
#include <numeric>

#include "classifiers_impl.hpp"

namespace qd::ml::detail {

void check_keys(const Json& hyper, const std::vector<std::string>& allowed,
                const std::string& family) {
    for (auto it = hyper.begin(); it != hyper.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw std::invalid_argument("unknown hyperparameter for " + family + ": " + it.key());
        }
    }
}

TreeHyper TreeHyper::parse(const Json& j) {
    TreeHyper h;
    h.criterion = j.value("criterion", h.criterion);
    h.max_depth = j.value("max_depth", h.max_depth);
    h.min_samples_split = j.value("min_samples_split", h.min_samples_split);
    h.min_samples_leaf = j.value("min_samples_leaf", h.min_samples_leaf);
    h.max_features = j.value("max_features", h.max_features);
    h.splitter = j.value("splitter", h.splitter);
    if (h.criterion != "gini" && h.criterion != "entropy") {
        throw std::invalid_argument("criterion must be gini or entropy");
    }
    if (h.splitter != "best" && h.splitter != "random") {
        throw std::invalid_argument("splitter must be best or random");
    }
    if (h.min_samples_split < 2 || h.min_samples_leaf < 1) {
        throw std::invalid_argument("invalid split/leaf minimums");
    }
    return h;
}

Json TreeHyper::to_json() const {
    return Json{{"criterion", criterion},
                {"max_depth", max_depth},
                {"min_samples_split", min_samples_split},
                {"min_samples_leaf", min_samples_leaf},
                {"max_features", max_features},
                {"splitter", splitter}};
}

namespace {

double impurity(double pos, double total, const std::string& criterion) {
    if (total <= 0) return 0.0;
    const double p = pos / total;
    if (criterion == "gini") return 2.0 * p * (1.0 - p);
    double h = 0.0;
    if (p > 0) h -= p * std::log2(p);
    if (p < 1) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

int feature_budget(Eigen::Index d, const std::string& max_features) {
    if (max_features == "sqrt") {
        return std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));
    }
    if (max_features == "log2") {
        return std::max(1, static_cast<int>(std::log2(static_cast<double>(d))));
    }
    return static_cast<int>(d);
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();  // weighted child impurity
    bool valid = false;
};

struct Builder {
    const Eigen::MatrixXd& X;
    const std::vector<int>& y;
    const TreeHyper& h;
    Rng& rng;
    std::vector<TreeNode> nodes;

    int majority(const std::vector<int>& rows) const {
        long pos = 0;
        for (int r : rows) pos += y[r];
        const long neg = static_cast<long>(rows.size()) - pos;
        return pos > neg ? 1 : 0;  // tie -> 0
    }

    Split best_split_on_feature(const std::vector<int>& rows, int f) const {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(rows.size());
        for (int r : rows) vals.emplace_back(X(r, f), y[r]);
        std::sort(vals.begin(), vals.end());
        const double n = static_cast<double>(vals.size());
        double total_pos = 0;
        for (const auto& [v, lab] : vals) total_pos += lab;

        Split best;
        double left_pos = 0;
        for (std::size_t i = 1; i < vals.size(); ++i) {
            left_pos += vals[i - 1].second;
            if (vals[i].first <= vals[i - 1].first) continue;  // no boundary here
            const double nl = static_cast<double>(i), nr = n - nl;
            if (nl < h.min_samples_leaf || nr < h.min_samples_leaf) continue;
            const double score = nl / n * impurity(left_pos, nl, h.criterion) +
                                 nr / n * impurity(total_pos - left_pos, nr, h.criterion);
            if (score < best.score) {
                best = {f, 0.5 * (vals[i - 1].first + vals[i].first), score, true};
            }
        }
        return best;
    }

    Split random_split_on_feature(const std::vector<int>& rows, int f) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int r : rows) {
            lo = std::min(lo, X(r, f));
            hi = std::max(hi, X(r, f));
        }
        if (!(lo < hi)) return {};
        const double thr = rng.uniform(lo, hi);
        double nl = 0, left_pos = 0, total_pos = 0;
        for (int r : rows) {
            total_pos += y[r];
            if (X(r, f) <= thr) {
                nl += 1;
                left_pos += y[r];
            }
        }
        const double n = static_cast<double>(rows.size()), nr = n - nl;
        if (nl < h.min_samples_leaf || nr < h.min_samples_leaf) return {};
        const double score = nl / n * impurity(left_pos, nl, h.criterion) +
                             nr / n * impurity(total_pos - left_pos, nr, h.criterion);
        return {f, thr, score, true};
    }

    int build(const std::vector<int>& rows, int depth) {
        const int idx = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[idx].label = majority(rows);

        long pos = 0;
        for (int r : rows) pos += y[r];
        const bool pure = pos == 0 || pos == static_cast<long>(rows.size());
        const bool depth_done = h.max_depth > 0 && depth >= h.max_depth;
        if (pure || depth_done || static_cast<int>(rows.size()) < h.min_samples_split) {
            return idx;
        }

        std::vector<int> feats(X.cols());
        std::iota(feats.begin(), feats.end(), 0);
        const int budget = feature_budget(X.cols(), h.max_features);
        if (budget < static_cast<int>(feats.size())) {
            rng.shuffle(feats);
            feats.resize(budget);
        }

        Split best;
        const double parent =
            impurity(static_cast<double>(pos), static_cast<double>(rows.size()), h.criterion);
        for (int f : feats) {
            const Split s = h.splitter == "best" ? best_split_on_feature(rows, f)
                                                 : random_split_on_feature(rows, f);
            if (s.valid && s.score < best.score) best = s;
        }
        if (!best.valid || best.score >= parent - 1e-12) return idx;

        std::vector<int> left, right;
        for (int r : rows) (X(r, best.feature) <= best.threshold ? left : right).push_back(r);
        if (left.empty() || right.empty()) return idx;

        nodes[idx].feature = best.feature;
        nodes[idx].threshold = best.threshold;
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        nodes[idx].left = l;
        nodes[idx].right = r;
        return idx;
    }
};

}  // namespace

std::vector<TreeNode> build_tree(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                 const std::vector<int>& rows, const TreeHyper& h, Rng& rng) {
    Builder b{X, y, h, rng, {}};
    b.build(rows, 0);
    return std::move(b.nodes);
}

int tree_predict(const std::vector<TreeNode>& nodes,
                 const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    int i = 0;
    while (nodes[i].feature >= 0) {
        i = row(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    }
    return nodes[i].label;
}

DecisionTreeClassifier::DecisionTreeClassifier(const Json& hyper) {
    check_keys(hyper, {"criterion", "max_depth", "min_samples_split", "min_samples_leaf",
                       "max_features", "splitter"},
               "decision_tree");
    h_ = TreeHyper::parse(hyper);
}

void DecisionTreeClassifier::fit(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                 std::uint64_t seed) {
    cols_ = X.cols();
    std::vector<int> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    Rng rng(seed ^ 0xa5a5a5a55a5a5a5aULL);
    nodes_ = build_tree(X, y, rows, h_, rng);
}

int DecisionTreeClassifier::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != cols_) throw std::invalid_argument("row width mismatch");
    return tree_predict(nodes_, row);
}

Json DecisionTreeClassifier::params_to_json() const {
    Json nodes = Json::array();
    for (const TreeNode& n : nodes_) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
    }
    return Json{{"cols", cols_}, {"nodes", nodes}};
}

void DecisionTreeClassifier::params_from_json(const Json& j) {
    cols_ = j.at("cols").get<Eigen::Index>();
    nodes_.clear();
    for (const auto& n : j.at("nodes")) {
        nodes_.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                          n.at(3).get<int>(), n.at(4).get<int>()});
    }
}

}  // namespace qd::ml::detail
