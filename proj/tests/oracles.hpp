#pragma once
// Independent reference implementations used only by the tests.  Everything
// here is built from first principles with different algorithms than the
// library (matrix exponentials, explicit series, brute-force two-mode
// simulation) so agreement is meaningful.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fockbs/fock.hpp"

namespace oracles {

using fockbs::Complex;
using fockbs::FockVector;
using fockbs::ModeOperator;

// exp(alpha a^dag - conj(alpha) a) via eigendecomposition of the Hermitian
// generator on a truncated basis.  Accurate away from the cutoff edge only,
// so callers should pad and crop.
inline ModeOperator displacement_expm(Complex alpha, int cutoff) {
    const int dim = cutoff + 1;
    const ModeOperator ad = fockbs::create_operator(cutoff);
    ModeOperator h = Complex(0, -1) * (alpha * ad - std::conj(alpha) * ad.adjoint());
    Eigen::SelfAdjointEigenSolver<ModeOperator> es(h);
    Eigen::VectorXcd phase(dim);
    for (int i = 0; i < dim; ++i) phase[i] = std::polar(1.0, es.eigenvalues()[i]);
    return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

// Number-conserving beam splitter block on the N-photon two-mode sector,
// basis ordered by reference-mode count: {|N,0>, |N-1,1>, ..., |0,N>} where
// |s,r> has s signal and r reference photons.  Built from the factored form
//   U = T^{n_s} exp(-conj(R) a_r^dag a_s) exp(R a_s^dag a_r) T^{-n_r}
// with each exponential expanded as its (nilpotent on the sector) series.
// Numerically unstable for large N with small |T| (the T^{-n_r} factor);
// keep N modest or |T| large when comparing at tight tolerance.
inline ModeOperator bs_block_factored(Complex t, Complex r, int n_total) {
    const int dim = n_total + 1;
    auto idx = [&](int s) { return n_total - s; };  // row index of |s, N-s>
    ModeOperator m = ModeOperator::Zero(dim, dim);
    // exp(R a_s^dag a_r) T^{-n_r} column by column: start from |s0, N-s0>.
    for (int s0 = 0; s0 <= n_total; ++s0) {
        Eigen::VectorXcd col = Eigen::VectorXcd::Zero(dim);
        const int r0 = n_total - s0;
        Complex coeff = std::pow(t, -r0);
        col[idx(s0)] = coeff;
        // (R a_s^dag a_r)^k / k! moves k photons from reference to signal.
        Complex term = coeff;
        for (int k = 1; k <= r0; ++k) {
            term *= r * std::sqrt(double(s0 + k)) * std::sqrt(double(r0 - k + 1)) / double(k);
            col[idx(s0 + k)] = term;
        }
        m.col(idx(s0)) = col;
    }
    // exp(-conj(R) a_r^dag a_s) on the left.
    ModeOperator left = ModeOperator::Zero(dim, dim);
    for (int s0 = 0; s0 <= n_total; ++s0) {
        const int r0 = n_total - s0;
        left(idx(s0), idx(s0)) = 1.0;
        Complex term = 1.0;
        for (int k = 1; k <= s0; ++k) {
            term *= -std::conj(r) * std::sqrt(double(r0 + k)) * std::sqrt(double(s0 - k + 1)) / double(k);
            left(idx(s0 - k), idx(s0)) = term;
        }
    }
    m = left * m;
    // T^{n_s} on the left.
    for (int s = 0; s <= n_total; ++s) m.row(idx(s)) *= std::pow(t, s);
    return m;
}

// Random beam splitter draw with |T|^2 in [lo, hi].
struct BSDraw {
    Complex t;
    Complex r;
};

inline BSDraw random_bs(std::mt19937_64& rng, double lo = 0.3, double hi = 0.9,
                        bool real_only = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double t2 = lo + (hi - lo) * u(rng);
    const double tm = std::sqrt(t2);
    const double rm = std::sqrt(1.0 - t2);
    if (real_only) return {tm, rm};
    const double pt = 2 * M_PI * u(rng);
    const double pr = 2 * M_PI * u(rng);
    return {std::polar(tm, pt), std::polar(rm, pr)};
}

inline Complex random_point(std::mt19937_64& rng, double radius) {
    std::uniform_real_distribution<double> u(-radius, radius);
    return {u(rng), u(rng)};
}

// Random normalized state with cutoff N and a floor on the leading amplitude
// (so the characteristic polynomial stays well conditioned).
inline FockVector random_target(std::mt19937_64& rng, int n_top, double lead_floor = 0.05) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (;;) {
        FockVector v(n_top + 1);
        for (int n = 0; n <= n_top; ++n) v[n] = Complex(g(rng), g(rng));
        v.normalize();
        if (std::abs(v[n_top]) > lead_floor) return v;
    }
}

}  // namespace oracles
