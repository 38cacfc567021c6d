#pragma once

#include <cstdint>
#include <random>

#include "rcmps/matrix_core.hpp"

namespace testing {

using rcmps::CmpsState;
using rcmps::Complex;
using rcmps::Matrix;

inline Matrix gaussian_matrix(int d, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            m(i, j) = Complex(n(rng), n(rng));
        }
    }
    return m;
}

inline Matrix hermitian_matrix(int d, std::mt19937_64& rng, double scale = 1.0) {
    const Matrix a = gaussian_matrix(d, rng, scale);
    return 0.5 * (a + a.adjoint());
}

inline Matrix unitary_matrix(int d, std::mt19937_64& rng) {
    Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(d, rng));
    return qr.householderQ();
}

/// Random density matrix of full rank.
inline Matrix density_matrix(int d, std::mt19937_64& rng) {
    const Matrix a = gaussian_matrix(d, rng);
    Matrix rho = a * a.adjoint() + 0.1 * Matrix::Identity(d, d);
    return rho / rho.trace();
}

/// Generic state with O(1) entries; R scaled so the transfer gap stays O(1).
inline CmpsState random_state(int d, std::uint64_t seed, double r_scale = 0.5, double mass = 1.0) {
    std::mt19937_64 rng(seed);
    Matrix k = hermitian_matrix(d, rng, 0.5);
    Matrix r = gaussian_matrix(d, rng, r_scale / std::sqrt(static_cast<double>(d)));
    return {k, r, mass};
}

} // namespace testing
