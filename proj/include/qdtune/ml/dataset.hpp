#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qd::ml {

// In-memory labeled dataset. Rows of X are raw inputs (4 trace features or
// 784 segment pixels); y holds binary labels (1 = positive class).
struct Dataset {
    Eigen::MatrixXd X;
    std::vector<int> y;
    std::array<std::string, 2> class_names = {"negative", "positive"};

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }
    long count(int label) const;
    void append(const std::vector<double>& row, int label);
};

// One JSON-lines record. `trace` is only populated for pinch-off records;
// `pixels` only for segment records.
struct DataRecord {
    std::string kind;              // "pinchoff" | "segment"
    std::string task;              // e.g. "pinchoff", "single_dot", "double_dot", "regime"
    int label = 0;
    std::uint64_t seed = 0;        // provenance seed of the generating fixture
    std::vector<double> features;  // 4 entries for pinch-off
    std::vector<double> trace;     // fixed-length normalized current trace
    std::vector<double> pixels;    // 28x28 row-major
};

void save_records(const std::string& path, const std::vector<DataRecord>& records);
std::vector<DataRecord> load_records(const std::string& path);

// Assemble a Dataset from records. `use` selects which field feeds X:
// "features", "trace" or "pixels".
Dataset dataset_from_records(const std::vector<DataRecord>& records, const std::string& use);

}  // namespace qd::ml
