#pragma once
// States and single-mode operators on a truncated number-state basis.
//
// Conventions used throughout the library:
//   * "cutoff" is the largest photon number kept, so vectors have
//     cutoff + 1 entries and operators are (cutoff + 1) x (cutoff + 1).
//   * FockVector index n holds the amplitude of the n-photon component.
//   * Operators act by left multiplication: apply A then B  ==  B * A * v.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fockbs {

using Complex = std::complex<double>;
using FockVector = Eigen::VectorXcd;
using ModeOperator = Eigen::MatrixXcd;
using DensityMatrix = Eigen::MatrixXcd;

// Thrown when a computation is asked for an event or regime that has no
// numerical answer (zero-probability conditioning, failed validation of a
// derived quantity, ...).  Input-contract violations use std::invalid_argument.
class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline double half_log_factorial(int n) {
    return 0.5 * std::lgamma(static_cast<double>(n) + 1.0);
}

inline void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// State constructors
// ---------------------------------------------------------------------------

// Builds a state from explicit number-basis amplitudes.  With renormalize the
// result has unit norm; an all-zero amplitude list cannot be normalized.
inline FockVector make_state(const std::vector<Complex>& amplitudes, bool renormalize = false) {
    detail::require(!amplitudes.empty(), "make_state: amplitude list is empty");
    FockVector v(static_cast<Eigen::Index>(amplitudes.size()));
    for (Eigen::Index n = 0; n < v.size(); ++n) v[n] = amplitudes[static_cast<size_t>(n)];
    if (renormalize) {
        const double nrm = v.norm();
        if (!(nrm > 0.0)) throw std::invalid_argument("null state");
        v /= nrm;
    }
    return v;
}

// |n> on a basis truncated at `cutoff` photons.
inline FockVector fock_state(int n, int cutoff) {
    detail::require(n >= 0, "fock_state: negative photon number");
    detail::require(cutoff >= n, "fock_state: cutoff below photon number");
    FockVector v = FockVector::Zero(cutoff + 1);
    v[n] = 1.0;
    return v;
}

// Truncated coherent state.  Amplitudes are the exact infinite-basis values
// exp(-|a|^2/2) a^n / sqrt(n!), evaluated in log space so large |a| does not
// overflow; the vector is deliberately not renormalized, so its norm deficit
// measures the truncation.
inline FockVector coherent_state(Complex alpha, int cutoff) {
    detail::require(cutoff >= 0, "coherent_state: negative cutoff");
    FockVector v(cutoff + 1);
    const double r = std::abs(alpha);
    if (r == 0.0) {
        v.setZero();
        v[0] = 1.0;
        return v;
    }
    const double theta = std::arg(alpha);
    const double log_r = std::log(r);
    for (int n = 0; n <= cutoff; ++n) {
        const double log_mag = -0.5 * r * r + n * log_r - detail::half_log_factorial(n);
        v[n] = std::exp(log_mag) * std::polar(1.0, n * theta);
    }
    return v;
}

// Probability weight of a coherent state beyond the cutoff.
inline double coherent_leakage(Complex alpha, int cutoff) {
    const double kept = coherent_state(alpha, cutoff).squaredNorm();
    return std::max(0.0, 1.0 - kept);
}

// ---------------------------------------------------------------------------
// Single-mode operators
// ---------------------------------------------------------------------------

inline ModeOperator create_operator(int cutoff) {
    detail::require(cutoff >= 0, "create_operator: negative cutoff");
    ModeOperator a = ModeOperator::Zero(cutoff + 1, cutoff + 1);
    for (int n = 0; n < cutoff; ++n) a(n + 1, n) = std::sqrt(static_cast<double>(n + 1));
    return a;
}

inline ModeOperator annihilate_operator(int cutoff) {
    return create_operator(cutoff).adjoint();
}

// diag(t^n).  The inverse t^{-n} is needed by schedule computations, so a
// vanishing transmittance is rejected outright.
inline ModeOperator attenuation_operator(Complex t, int cutoff) {
    detail::require(cutoff >= 0, "attenuation_operator: negative cutoff");
    if (std::abs(t) == 0.0) throw std::invalid_argument("singular attenuation");
    ModeOperator m = ModeOperator::Zero(cutoff + 1, cutoff + 1);
    Complex p = 1.0;
    for (int n = 0; n <= cutoff; ++n) {
        m(n, n) = p;
        p *= t;
    }
    return m;
}

namespace detail {

// Basis headroom needed so a displacement evaluated on a truncated basis
// reproduces the infinite-basis matrix elements of the kept block.  The
// bound was calibrated against high-precision reference elements; it keeps
// the kept-block error below ~1e-13.
inline int displacement_padding(Complex alpha, int kept_dim) {
    const double a = std::abs(alpha);
    return 25 + static_cast<int>(std::ceil(a * a + 8.0 * a * std::sqrt(kept_dim / 10.0 + 1.0)));
}

}  // namespace detail

// Matrix elements <m|D(alpha)|n> of the displacement operator up to the
// cutoff.  Computed as the exponential of the truncated generator via an
// eigendecomposition of its Hermitian rotation, on an internally padded
// basis so the returned block carries the infinite-basis values.  (A naive
// two-term recurrence in m is dramatically unstable; the exponential is
// exact to round-off away from the padded edge.)
inline ModeOperator displacement_operator(Complex alpha, int cutoff) {
    detail::require(cutoff >= 0, "displacement_operator: negative cutoff");
    const int keep = cutoff + 1;
    const int dim = keep + detail::displacement_padding(alpha, keep);
    ModeOperator h = ModeOperator::Zero(dim, dim);
    for (int n = 0; n + 1 < dim; ++n) {
        const Complex up = Complex(0, -1) * alpha * std::sqrt(static_cast<double>(n + 1));
        h(n + 1, n) = up;
        h(n, n + 1) = std::conj(up);
    }
    Eigen::SelfAdjointEigenSolver<ModeOperator> es(h);
    Eigen::VectorXcd phase(dim);
    for (int i = 0; i < dim; ++i) phase[i] = std::polar(1.0, es.eigenvalues()[i]);
    return (es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint())
        .topLeftCorner(keep, keep);
}

// ---------------------------------------------------------------------------
// Inner products, density matrices
// ---------------------------------------------------------------------------

// <a|b> with the shorter vector padded by zeros.
inline Complex overlap(const FockVector& a, const FockVector& b) {
    const Eigen::Index n = std::min(a.size(), b.size());
    return a.head(n).dot(b.head(n));  // Eigen's dot conjugates the left factor
}

inline DensityMatrix density_from(const FockVector& psi) {
    return psi * psi.adjoint();
}

// <psi|rho|psi>, clipped into [0, 1].  Round-off can leave a tiny negative or
// slightly-above-one value for valid inputs; anything worse is a broken rho.
inline double fidelity(const FockVector& psi, const DensityMatrix& rho) {
    detail::require(rho.rows() == rho.cols(), "fidelity: density matrix is not square");
    detail::require(psi.size() == rho.rows(), "fidelity: dimension mismatch");
    const double f = std::real(psi.dot(rho * psi));
    if (f < -1e-9 || f > 1.0 + 1e-9) {
        throw NumericError("fidelity: value " + std::to_string(f) + " is outside [0, 1]");
    }
    return std::clamp(f, 0.0, 1.0);
}

inline double fidelity(const FockVector& psi, const FockVector& phi) {
    const Complex o = overlap(psi, phi);
    return std::min(1.0, std::norm(o));
}

// Checks Hermiticity, positivity and trace <= 1 up to `tol`.
inline bool is_valid_density(const DensityMatrix& rho, double tol = 1e-9) {
    if (rho.rows() != rho.cols()) return false;
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::real(rho.trace()) > 1.0 + tol) return false;
    Eigen::SelfAdjointEigenSolver<DensityMatrix> es(rho, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > -tol;
}

}  // namespace fockbs
