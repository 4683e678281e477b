#pragma once
// Finite-photon approximations to superpositions of two coherent states
// ("cat-like" states) and their beam splitter cascade plans.  The key fact:
// D(mu) (a^dag^2 + conj(delta)^2/4)^n |0>, with mu the midpoint and delta the
// separation of the two coherent amplitudes, converges to the equal-weight
// superposition |alpha> + |beta> as n grows.  Its characteristic roots are
// +i delta/2 and -i delta/2, each n-fold, so a two-stage grouped cascade
// prepares or measures it.

#include <cmath>
#include <complex>
#include <vector>

#include "fockbs/beamsplitter.hpp"
#include "fockbs/fock.hpp"
#include "fockbs/overlap.hpp"
#include "fockbs/synthesis.hpp"

namespace fockbs {

struct CatParams {
    int n = 1;             // photons per stage; 2n photons total
    Complex alpha = 0.0;   // first coherent amplitude
    Complex beta = 0.0;    // second coherent amplitude

    Complex separation() const { return alpha - beta; }
    Complex midpoint() const { return 0.5 * (alpha + beta); }

    // The three displacements of the equivalent operator form
    // D(g3) a^dag^n D(g2) a^dag^n D(g1) |0>.  They sum to the midpoint.
    Complex gamma1() const { return Complex(0, 0.5) * (beta - alpha); }
    Complex gamma2() const { return Complex(0, 1) * (alpha - beta); }
    Complex gamma3() const {
        return 0.5 * ((1.0 - Complex(0, 1)) * alpha + (1.0 + Complex(0, 1)) * beta);
    }

    // n-fold characteristic roots of the undisplaced polynomial part.
    std::vector<Complex> group_roots() const {
        const Complex d = separation();
        return {Complex(0, 0.5) * d, Complex(0, -0.5) * d};
    }
    std::vector<Complex> expanded_roots() const {
        const auto g = group_roots();
        std::vector<Complex> all;
        all.insert(all.end(), n, g[0]);
        all.insert(all.end(), n, g[1]);
        return all;
    }
};

namespace detail {

inline void check_cat(const CatParams& p) {
    require(p.n >= 0, "cat state: negative stage photon number");
}

inline int cat_auto_cutoff(const CatParams& p) {
    const double m = std::max({std::abs(p.alpha), std::abs(p.beta), std::abs(p.midpoint())});
    return 2 * p.n + static_cast<int>(std::ceil(m * m + 10.0 * m + 30.0));
}

}  // namespace detail

// Normalized cat-like state D(mu) (a^dag^2 + conj(delta)^2/4)^n |0>.
inline FockVector cat_like_state(const CatParams& p, int cutoff) {
    detail::check_cat(p);
    detail::require(cutoff >= 2 * p.n, "cat_like_state: cutoff below photon content");
    FockVector base = state_from_roots(p.expanded_roots(), cutoff);
    const Complex mu = p.midpoint();
    if (mu == Complex(0.0)) return base;
    return (displacement_operator(mu, cutoff) * base).normalized();
}

// Normalized equal-weight superposition (|alpha> + |beta>)/norm that the
// cat-like state approximates.
inline FockVector coherent_superposition(Complex alpha, Complex beta, int cutoff) {
    const FockVector sum = coherent_state(alpha, cutoff) + coherent_state(beta, cutoff);
    const double nrm = sum.norm();
    if (!(nrm > 1e-12)) throw NumericError("coherent_superposition: amplitudes cancel");
    return sum / nrm;
}

// Squared norm of the unnormalized polynomial part,
//   || (a^dag^2 + conj(delta)^2/4)^n |0> ||^2
//     = (4^n n! / sqrt(pi)) Gamma(n + 1/2) 1F2(-n; 1/2 - n, 1; |delta|^4/64),
// with the hypergeometric sum terminating after n + 1 terms.  The prefactor
// collapses to (2n)! by the Gamma duplication formula.
inline double cat_normalization_closed_form(int n, double delta_abs2) {
    detail::require(n >= 0, "cat normalization: negative stage photon number");
    const double x = delta_abs2 * delta_abs2 / 64.0;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < n; ++k) {
        term *= (static_cast<double>(-n + k) /
                 ((0.5 - n + k) * (1.0 + k))) *
                x / (k + 1.0);
        sum += term;
    }
    return std::tgamma(2.0 * n + 1.0) * sum;
}

// Overlap between the n-photon-pair cat-like state and the true coherent
// superposition it approximates.  Grows towards 1 with n.
inline double cat_fidelity(const CatParams& p, int cutoff = -1) {
    detail::check_cat(p);
    if (cutoff < 0) cutoff = detail::cat_auto_cutoff(p);
    return fidelity(cat_like_state(p, cutoff), coherent_superposition(p.alpha, p.beta, cutoff));
}

// Two-stage grouped generation plan: n photons per stage, displaced to the
// midpoint at the end.
inline SynthesisPlan cat_generation_plan(const CatParams& p, const BeamSplitterParams& bs) {
    detail::check_cat(p);
    return plan_from_roots(p.expanded_roots(), bs, true, p.midpoint());
}

// Two-stage grouped measurement scheme projecting onto the cat-like state.
inline MeasurementScheme cat_measurement_scheme(const CatParams& p,
                                                const BeamSplitterParams& bs) {
    detail::check_cat(p);
    std::vector<Complex> roots = p.group_roots();
    std::sort(roots.begin(), roots.end(), detail::root_order);
    const std::vector<int> mults(roots.size(), p.n);
    return make_measurement_scheme(roots, mults, bs, p.midpoint());
}

// Exact heralding probability of the generation plan (both detectors see
// their n photons).  Evaluated in the displaced frame, so no truncation
// enters.
inline double cat_probability_exact(const CatParams& p, const BeamSplitterParams& bs) {
    const SynthesisPlan plan = cat_generation_plan(p, bs);
    return std::exp(detail::run_plan_frame(plan).log_norm_sq());
}

// Large-n estimate of the same probability for the matched separation
// |delta|^2 = 4n and midpoint zero:
//   p ~ (|2 r^2 t|^{2n} / (n pi)) exp[n (1 - |r/t|^2 (1 + (1 - 2|t|^2)^2/|t|^2))].
// At a 50/50 splitter the exponent vanishes and p ~ 2^{-n}/(n pi).
inline double cat_probability_asymptotic(int n, const BeamSplitterParams& bs) {
    detail::require(n >= 1, "cat asymptotic probability: need at least one photon per stage");
    const double t2 = bs.transmittance_sq();
    const double r2 = bs.reflectance_sq();
    if (!(t2 > 0.0)) throw std::invalid_argument("singular attenuation");
    const double base = std::abs(2.0 * bs.r * bs.r * bs.t);
    const double expo = 1.0 - (r2 / t2) * (1.0 + (1.0 - 2.0 * t2) * (1.0 - 2.0 * t2) / t2);
    return std::pow(base, 2.0 * n) / (n * M_PI) * std::exp(n * expo);
}

}  // namespace fockbs
