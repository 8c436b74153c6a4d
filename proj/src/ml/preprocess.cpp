#include "qdtune/ml/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "qdtune/rng.hpp"

namespace qd::ml {

namespace {
constexpr int kSide = 28;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

const std::string& representation_name(Representation r) {
    static const std::string names[] = {"raw", "fourier", "raw_fourier", "features"};
    return names[static_cast<int>(r)];
}

Representation representation_from_name(const std::string& name) {
    if (name == "raw") return Representation::Raw;
    if (name == "fourier") return Representation::Fourier;
    if (name == "raw_fourier") return Representation::RawFourier;
    if (name == "features") return Representation::Features;
    throw std::invalid_argument("unknown representation: " + name);
}

std::vector<double> fft_magnitude(const std::vector<double>& px) {
    if (px.size() != kSide * kSide) throw std::invalid_argument("expected 28x28 pixels");
    using C = std::complex<double>;
    static const auto twiddle = [] {
        std::array<C, kSide * kSide> t{};
        for (int k = 0; k < kSide; ++k) {
            for (int n = 0; n < kSide; ++n) {
                t[k * kSide + n] = std::polar(1.0, -2.0 * kPi * k * n / kSide);
            }
        }
        return t;
    }();

    // Separable DFT: rows, then columns.
    std::array<C, kSide * kSide> row_ft{};
    for (int y = 0; y < kSide; ++y) {
        for (int kx = 0; kx < kSide; ++kx) {
            C acc = 0.0;
            for (int x = 0; x < kSide; ++x) acc += px[y * kSide + x] * twiddle[kx * kSide + x];
            row_ft[y * kSide + kx] = acc;
        }
    }
    std::vector<double> out(kSide * kSide);
    for (int kx = 0; kx < kSide; ++kx) {
        for (int ky = 0; ky < kSide; ++ky) {
            C acc = 0.0;
            for (int y = 0; y < kSide; ++y) acc += row_ft[y * kSide + kx] * twiddle[ky * kSide + y];
            // DC-centered: shift both axes by half
            const int sy = (ky + kSide / 2) % kSide;
            const int sx = (kx + kSide / 2) % kSide;
            out[sy * kSide + sx] = std::abs(acc);
        }
    }
    return out;
}

std::vector<double> fft_magnitude_1d(const std::vector<double>& s) {
    const int n = static_cast<int>(s.size());
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (int i = 0; i < n; ++i) acc += s[i] * std::polar(1.0, -2.0 * kPi * k * i / n);
        out[(k + n / 2) % n] = std::abs(acc);
    }
    return out;
}

Eigen::MatrixXd represent(const Eigen::MatrixXd& X, Representation rep) {
    if (rep == Representation::Raw || rep == Representation::Features) return X;
    const bool is_image = X.cols() == kSide * kSide;
    const auto transform = [&](const Eigen::RowVectorXd& row) {
        std::vector<double> v(row.data(), row.data() + row.size());
        return is_image ? fft_magnitude(v) : fft_magnitude_1d(v);
    };
    const Eigen::Index d = X.cols();
    const Eigen::Index out_cols = rep == Representation::Fourier ? d : 2 * d;
    Eigen::MatrixXd out(X.rows(), out_cols);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const std::vector<double> ft = transform(X.row(r));
        if (rep == Representation::Fourier) {
            for (Eigen::Index c = 0; c < d; ++c) out(r, c) = ft[c];
        } else {
            out.row(r).head(d) = X.row(r);
            for (Eigen::Index c = 0; c < d; ++c) out(r, d + c) = ft[c];
        }
    }
    return out;
}

namespace {

// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
// Returns eigenvalues (descending) and eigenvectors as columns of V.
void jacobi_eig(Eigen::MatrixXd A, Eigen::VectorXd& evals, Eigen::MatrixXd& evecs) {
    const Eigen::Index m = A.rows();
    evecs = Eigen::MatrixXd::Identity(m, m);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < m; ++p) {
            for (Eigen::Index q = p + 1; q < m; ++q) off += A(p, q) * A(p, q);
        }
        if (off < 1e-26 * std::max(1.0, A.diagonal().squaredNorm())) break;
        for (Eigen::Index p = 0; p < m; ++p) {
            for (Eigen::Index q = p + 1; q < m; ++q) {
                if (std::fabs(A(p, q)) < 1e-300) continue;
                const double theta = 0.5 * std::atan2(2.0 * A(p, q), A(q, q) - A(p, p));
                const double c = std::cos(theta), s = std::sin(theta);
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double aip = A(i, p), aiq = A(i, q);
                    A(i, p) = c * aip - s * aiq;
                    A(i, q) = s * aip + c * aiq;
                }
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double api = A(p, i), aqi = A(q, i);
                    A(p, i) = c * api - s * aqi;
                    A(q, i) = s * api + c * aqi;
                }
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double vip = evecs(i, p), viq = evecs(i, q);
                    evecs(i, p) = c * vip - s * viq;
                    evecs(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    evals = A.diagonal();
    // sort descending
    std::vector<Eigen::Index> order(m);
    for (Eigen::Index i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return evals(a) > evals(b); });
    Eigen::VectorXd ev(m);
    Eigen::MatrixXd V(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        ev(i) = evals(order[i]);
        V.col(i) = evecs.col(order[i]);
    }
    evals = ev;
    evecs = V;
}

}  // namespace

PcaBasis pca_fit(const Eigen::MatrixXd& X, int k) {
    const Eigen::Index n = X.rows(), d = X.cols();
    if (k < 1 || k > std::min(n, d)) throw std::invalid_argument("invalid PCA component count");

    PcaBasis basis;
    basis.mean = X.colwise().mean();
    const Eigen::MatrixXd centered = X.rowwise() - basis.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, n - 1);

    // Subspace iteration with Rayleigh-Ritz extraction on an oversampled
    // block; exact when the block spans the full space.
    const Eigen::Index m = std::min<Eigen::Index>(d, k + 8);
    Rng rng(0x243f6a8885a308d3ULL);
    Eigen::MatrixXd Q(d, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) Q(i, j) = rng.gauss();
    }
    Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ() * Eigen::MatrixXd::Identity(d, m);
    const int iters = m >= d ? 1 : 30;
    for (int t = 0; t < iters; ++t) {
        const Eigen::MatrixXd Z = cov * Q;
        Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Z).householderQ() *
            Eigen::MatrixXd::Identity(d, m);
    }
    const Eigen::MatrixXd B = Q.transpose() * cov * Q;
    Eigen::VectorXd theta;
    Eigen::MatrixXd U;
    jacobi_eig(B, theta, U);

    basis.components = (Q * U.leftCols(k)).transpose();
    basis.eigenvalues = theta.head(k);
    return basis;
}

Eigen::MatrixXd pca_project(const PcaBasis& basis, const Eigen::MatrixXd& X) {
    if (X.cols() != basis.mean.size()) throw std::invalid_argument("PCA width mismatch");
    return (X.rowwise() - basis.mean.transpose()) * basis.components.transpose();
}

Eigen::MatrixXd FittedPreprocess::apply(const Eigen::MatrixXd& raw) const {
    Eigen::MatrixXd rep = represent(raw, spec.representation);
    if (pca) return pca_project(*pca, rep);
    return rep;
}

FittedPreprocess fit_preprocess(const PreprocessSpec& spec, const Eigen::MatrixXd& train_raw) {
    FittedPreprocess fp;
    fp.spec = spec;
    if (spec.pca_components) {
        const Eigen::MatrixXd rep = represent(train_raw, spec.representation);
        fp.pca = pca_fit(rep, *spec.pca_components);
    }
    return fp;
}

}  // namespace qd::ml
