#pragma once
// Lossless beam splitter acting on a signal and a reference mode, and the
// conditional single-mode operator obtained by preparing the reference in a
// fixed state and projecting it onto a measured outcome.
//
// The device is parametrized by complex transmittance t and reflectance r
// with |t|^2 + |r|^2 = 1.  Photon number is conserved across the two modes,
// so the unitary decomposes into finite blocks, one per total photon number;
// everything here is built from those blocks and is exact on the truncated
// basis (no cutoff artifacts except where displacements are involved).

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "fockbs/fock.hpp"

namespace fockbs {

struct BeamSplitterParams {
    Complex t;  // transmittance
    Complex r;  // reflectance

    BeamSplitterParams(Complex t_, Complex r_) : t(t_), r(r_) {
        const double sum = std::norm(t) + std::norm(r);
        if (std::abs(sum - 1.0) > 1e-10) {
            throw std::invalid_argument(
                "BeamSplitterParams: |t|^2 + |r|^2 must be 1, got " + std::to_string(sum));
        }
    }

    // t = cos(theta) e^{i phase_t}, r = sin(theta) e^{i phase_r}.
    static BeamSplitterParams from_angles(double theta, double phase_t = 0.0,
                                          double phase_r = 0.0) {
        return {std::polar(std::cos(theta), phase_t), std::polar(std::sin(theta), phase_r)};
    }

    double transmittance_sq() const { return std::norm(t); }
    double reflectance_sq() const { return std::norm(r); }
};

// s = 2/|r|^2 - 1, the operator-ordering parameter of the device.  s = 1 is
// normal ordering (full reflection); it diverges as the splitter becomes
// transparent.
inline double ordering_parameter(const BeamSplitterParams& bs) {
    const double r2 = bs.reflectance_sq();
    if (r2 == 0.0) throw std::invalid_argument("no reflection: s undefined");
    return 2.0 / r2 - 1.0;
}

// Unitary block on the sector with `total` photons shared between the two
// modes.  Index convention: basis state j of the sector is
// |total - j  signal, j reference>, i.e. the index counts reference photons.
// For total = 1 the block is [[t, r], [-conj(r), conj(t)]].
struct TwoModeBlock {
    int total = 0;
    ModeOperator matrix;  // (total + 1) x (total + 1)
};

namespace detail {

// Sector blocks indexed by *signal* count: element (m, n) maps
// |n signal, total - n reference>  ->  |m signal, total - m reference>.
// Built by the two-term recursion over the total photon number obtained by
// peeling one creation operator off the input state; numerically stable for
// any |t| > 0 (unlike expanding the factored exponential form, whose t^{-n}
// factor overflows the working precision for deep sectors).
inline std::vector<ModeOperator> signal_blocks(const BeamSplitterParams& bs, int max_total) {
    require(max_total >= 0, "signal_blocks: negative sector");
    const Complex t = bs.t, r = bs.r;
    std::vector<ModeOperator> blocks;
    blocks.reserve(max_total + 1);
    blocks.push_back(ModeOperator::Constant(1, 1, 1.0));
    for (int tot = 1; tot <= max_total; ++tot) {
        const ModeOperator& prev = blocks.back();
        ModeOperator cur(tot + 1, tot + 1);
        // Input |0, tot>: peel a reference-mode creation operator.
        for (int m = 0; m <= tot; ++m) {
            Complex acc = 0.0;
            if (m >= 1) acc += r * std::sqrt(double(m)) * prev(m - 1, 0);
            if (m <= tot - 1) acc += std::conj(t) * std::sqrt(double(tot - m)) * prev(m, 0);
            cur(m, 0) = acc / std::sqrt(double(tot));
        }
        // Input |n, tot - n>, n >= 1: peel a signal-mode creation operator.
        for (int n = 1; n <= tot; ++n) {
            const double inv = 1.0 / std::sqrt(double(n));
            for (int m = 0; m <= tot; ++m) {
                Complex acc = 0.0;
                if (m >= 1) acc += t * std::sqrt(double(m)) * prev(m - 1, n - 1);
                if (m <= tot - 1) acc += -std::conj(r) * std::sqrt(double(tot - m)) * prev(m, n - 1);
                cur(m, n) = acc * inv;
            }
        }
        blocks.push_back(std::move(cur));
    }
    return blocks;
}

}  // namespace detail

// The sector recursion above loses roughly a digit per ten sectors for small
// |t| (verified against exact arithmetic), which is irrelevant for the
// conditional-operator assembly -- the affected deep-sector elements only
// enter weighted by rapidly decaying reference amplitudes -- but not good
// enough for a standalone sector unitary.  The public single-sector call
// therefore uses an Euler decomposition instead:
//   [[t, r], [-conj(r), conj(t)]] = P(x1) . [[c, s], [-s, c]] . P(x2)
// with c = |t|, s = |r|, x1 = (arg t + arg r)/2, x2 = (arg t - arg r)/2, and
// P(x) the relative mode phase.  The real rotation is the exponential of an
// anti-Hermitian tridiagonal generator, obtained from a self-adjoint
// eigensolve, so the block is unitary to round-off at any depth.
inline TwoModeBlock bs_unitary_block(const BeamSplitterParams& bs, int total) {
    detail::require(total >= 0, "bs_unitary_block: negative sector");
    const int dim = total + 1;
    const double theta = std::atan2(std::abs(bs.r), std::abs(bs.t));
    const double x1 = 0.5 * (std::arg(bs.t) + std::arg(bs.r));
    const double x2 = 0.5 * (std::arg(bs.t) - std::arg(bs.r));

    // Hermitian form of the rotation generator a_s^dag a_r - a_r^dag a_s on
    // the sector, indexed by signal count m (signal m, reference total - m).
    ModeOperator h = ModeOperator::Zero(dim, dim);
    for (int m = 0; m + 1 < dim; ++m) {
        const double w = std::sqrt(double(m + 1) * double(total - m));
        h(m + 1, m) = Complex(0.0, -w);
        h(m, m + 1) = Complex(0.0, w);
    }
    Eigen::SelfAdjointEigenSolver<ModeOperator> es(h);
    Eigen::VectorXcd phase(dim);
    for (int i = 0; i < dim; ++i) phase[i] = std::polar(1.0, theta * es.eigenvalues()[i]);
    const ModeOperator rot = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();

    ModeOperator flipped(dim, dim);
    for (int i = 0; i <= total; ++i) {
        for (int j = 0; j <= total; ++j) {
            // Reference-count index i corresponds to signal count total - i;
            // the mode-phase factors contribute e^{i x (n_s - n_r)}.
            const double ps = x1 * (total - 2 * i) + x2 * (total - 2 * j);
            flipped(i, j) = std::polar(1.0, ps) * rot(total - i, total - j);
        }
    }
    return {total, std::move(flipped)};
}

// Conditional signal-mode operator: prepare the reference in `ref_in`, mix at
// the beam splitter, then project the reference onto `ref_out`.  Element-wise,
//   <m|Y|n> = sum_p conj(ref_out[n + p - m]) ref_in[p] B_{n+p}(m, n)
// where B is the signal-indexed sector block.  This is exact: every sector
// that can contribute to the kept signal block is included.
inline ModeOperator conditional_operator(const FockVector& ref_in, const FockVector& ref_out,
                                         const BeamSplitterParams& bs, int cutoff) {
    detail::require(cutoff >= 0, "conditional_operator: negative cutoff");
    detail::require(ref_in.size() > 0 && ref_out.size() > 0,
                    "conditional_operator: empty reference state");
    const int p_max = static_cast<int>(ref_in.size()) - 1;
    const int q_max = static_cast<int>(ref_out.size()) - 1;
    const auto blocks = detail::signal_blocks(bs, cutoff + p_max);
    ModeOperator y = ModeOperator::Zero(cutoff + 1, cutoff + 1);
    for (int n = 0; n <= cutoff; ++n) {
        for (int p = 0; p <= p_max; ++p) {
            if (ref_in[p] == Complex(0.0)) continue;
            const int tot = n + p;
            const ModeOperator& b = blocks[tot];
            const int m_hi = std::min(cutoff, tot);
            for (int m = std::max(0, tot - q_max); m <= m_hi; ++m) {
                y(m, n) += std::conj(ref_out[tot - m]) * ref_in[p] * b(m, n);
            }
        }
    }
    return y;
}

// Conditional operator with coherently displaced reference states
// D(alpha)|ref_in> and D(beta)|ref_out>.  The reference displacements pull
// through the beam splitter onto the signal mode:
//   Y(alpha, beta) = D((alpha - t beta)/conj(r)) Y(0, 0) D((beta - conj(t) alpha)/conj(r)).
// Evaluated on an internally padded basis so the cropped result carries the
// infinite-basis elements.
inline ModeOperator displaced_conditional(Complex alpha, Complex beta, const FockVector& ref_in,
                                          const FockVector& ref_out, const BeamSplitterParams& bs,
                                          int cutoff) {
    if (std::abs(bs.r) == 0.0) {
        throw std::invalid_argument("displacement absorption undefined");
    }
    const Complex g1 = (alpha - bs.t * beta) / std::conj(bs.r);
    const Complex g2 = (beta - std::conj(bs.t) * alpha) / std::conj(bs.r);
    const double gm = std::max(std::abs(g1), std::abs(g2));
    const int pad = static_cast<int>(std::ceil(2.0 * gm * gm + 12.0 * gm + 40.0));
    const int wide = cutoff + pad;
    const ModeOperator y0 = conditional_operator(ref_in, ref_out, bs, wide);
    const ModeOperator out =
        displacement_operator(g1, wide) * y0 * displacement_operator(g2, wide);
    return out.topLeftCorner(cutoff + 1, cutoff + 1);
}

// Composes stage operators in application order: chain({A, B}) = B * A.
inline ModeOperator chain(const std::vector<ModeOperator>& stages) {
    detail::require(!stages.empty(), "chain: empty stage list");
    ModeOperator acc = stages.front();
    detail::require(acc.rows() == acc.cols(), "chain: stage is not square");
    for (size_t k = 1; k < stages.size(); ++k) {
        detail::require(stages[k].rows() == stages[k].cols(), "chain: stage is not square");
        if (stages[k].cols() != acc.rows()) {
            throw std::invalid_argument("chain: cutoff mismatch between stages");
        }
        acc = stages[k] * acc;
    }
    return acc;
}

// State update for a heralded event: rho -> Y rho Y^dag / p with
// p = tr(Y rho Y^dag) the probability of the herald.
inline std::pair<DensityMatrix, double> apply_conditional(const DensityMatrix& rho,
                                                          const ModeOperator& y) {
    detail::require(rho.rows() == rho.cols(), "apply_conditional: rho is not square");
    detail::require(y.cols() == rho.rows(), "apply_conditional: dimension mismatch");
    DensityMatrix sigma = y * rho * y.adjoint();
    const double p = std::real(sigma.trace());
    if (!(p > 1e-300)) throw NumericError("event has zero probability");
    if (p > 1.0 + 1e-6) {
        throw NumericError("apply_conditional: probability " + std::to_string(p) + " exceeds 1");
    }
    sigma /= p;
    return {std::move(sigma), p};
}

inline std::pair<FockVector, double> apply_conditional(const FockVector& psi,
                                                       const ModeOperator& y) {
    detail::require(y.cols() == psi.size(), "apply_conditional: dimension mismatch");
    FockVector out = y * psi;
    const double p = out.squaredNorm();
    if (!(p > 1e-300)) throw NumericError("event has zero probability");
    out /= std::sqrt(p);
    return {std::move(out), p};
}

}  // namespace fockbs
