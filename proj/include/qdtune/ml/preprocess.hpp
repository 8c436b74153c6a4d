#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace qd::ml {

// Representation of raw rows before optional PCA.
//  - raw:         the input row unchanged
//  - fourier:     magnitude of the DFT (2D for 784-pixel rows, 1D otherwise)
//  - raw_fourier: concatenation of both
//  - features:    alias of raw for feature-vector datasets
enum class Representation { Raw, Fourier, RawFourier, Features };

const std::string& representation_name(Representation r);
Representation representation_from_name(const std::string& name);

// |DFT| of a 28x28 block, DC-centered, flattened row-major.
std::vector<double> fft_magnitude(const std::vector<double>& pixels28x28);
// 1D variant for trace rows, DC-centered.
std::vector<double> fft_magnitude_1d(const std::vector<double>& samples);

Eigen::MatrixXd represent(const Eigen::MatrixXd& X, Representation rep);

struct PcaBasis {
    Eigen::VectorXd mean;         // d
    Eigen::MatrixXd components;   // k x d, orthonormal rows
    Eigen::VectorXd eigenvalues;  // k, descending
};

// Top-k principal components of the centered covariance, found by power
// iteration with deflation. Throws std::invalid_argument on bad k.
PcaBasis pca_fit(const Eigen::MatrixXd& X, int k);
Eigen::MatrixXd pca_project(const PcaBasis& basis, const Eigen::MatrixXd& X);

struct PreprocessSpec {
    Representation representation = Representation::Raw;
    std::optional<int> pca_components;
};

// Preprocessing fitted on training rows only; apply() is then valid for any
// rows of the same raw width.
struct FittedPreprocess {
    PreprocessSpec spec;
    std::optional<PcaBasis> pca;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

FittedPreprocess fit_preprocess(const PreprocessSpec& spec, const Eigen::MatrixXd& train_raw);

}  // namespace qd::ml
