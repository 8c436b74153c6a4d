#include "qdtune/ml/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace qd::ml {

using Json = nlohmann::json;

long Dataset::count(int label) const {
    long c = 0;
    for (int v : y) c += v == label;
    return c;
}

void Dataset::append(const std::vector<double>& row, int label) {
    const Eigen::Index cols = static_cast<Eigen::Index>(row.size());
    if (X.rows() == 0) {
        X.resize(1, cols);
    } else {
        if (cols != X.cols()) throw std::invalid_argument("row width mismatch");
        X.conservativeResize(X.rows() + 1, Eigen::NoChange);
    }
    X.row(X.rows() - 1) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), cols);
    y.push_back(label);
}

namespace {

Json record_to_json(const DataRecord& r) {
    Json j;
    j["kind"] = r.kind;
    j["task"] = r.task;
    j["label"] = r.label;
    j["seed"] = r.seed;
    if (!r.features.empty()) j["features"] = r.features;
    if (!r.trace.empty()) j["trace"] = r.trace;
    if (!r.pixels.empty()) j["pixels"] = r.pixels;
    return j;
}

DataRecord record_from_json(const Json& j) {
    DataRecord r;
    r.kind = j.at("kind").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.label = j.at("label").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("features")) r.features = j.at("features").get<std::vector<double>>();
    if (j.contains("trace")) r.trace = j.at("trace").get<std::vector<double>>();
    if (j.contains("pixels")) r.pixels = j.at("pixels").get<std::vector<double>>();
    return r;
}

}  // namespace

void save_records(const std::string& path, const std::vector<DataRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (const DataRecord& r : records) out << record_to_json(r).dump() << "\n";
}

std::vector<DataRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read dataset file: " + path);
    std::vector<DataRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(Json::parse(line)));
    }
    return records;
}

Dataset dataset_from_records(const std::vector<DataRecord>& records, const std::string& use) {
    Dataset d;
    if (records.empty()) return d;
    const auto pick = [&](const DataRecord& r) -> const std::vector<double>& {
        if (use == "features") return r.features;
        if (use == "trace") return r.trace;
        if (use == "pixels") return r.pixels;
        throw std::invalid_argument("unknown dataset field: " + use);
    };
    const Eigen::Index cols = static_cast<Eigen::Index>(pick(records.front()).size());
    if (cols == 0) throw std::invalid_argument("records carry no '" + use + "' field");
    d.X.resize(static_cast<Eigen::Index>(records.size()), cols);
    d.y.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& row = pick(records[i]);
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw std::invalid_argument("inconsistent record width");
        }
        d.X.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(row.data(), cols);
        d.y.push_back(records[i].label);
    }
    return d;
}

}  // namespace qd::ml
