#pragma once
// Conditional preparation of a finite number-basis target by a cascade of
// beam splitter stages.  Each stage displaces the signal, mixes it with a
// single auxiliary photon and keeps the all-transmitted outcome; N stages
// plus N + 1 displacements reach any target with top photon number N.  The
// stage displacements are scheduled from the roots of the target's
// characteristic polynomial  sum_n conj(psi_n)/sqrt(n!) z^n.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <utility>
#include <vector>

#include "fockbs/beamsplitter.hpp"
#include "fockbs/fock.hpp"
#include "fockbs/frame.hpp"

namespace fockbs {

// ---------------------------------------------------------------------------
// Characteristic roots
// ---------------------------------------------------------------------------

namespace detail {

inline bool root_order(const Complex& a, const Complex& b) {
    const double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma < mb;
    return std::arg(a) < std::arg(b);
}

inline std::vector<Complex> characteristic_coefficients(const FockVector& psi) {
    require(psi.size() > 0, "roots_of_state: empty state");
    std::vector<Complex> c(static_cast<size_t>(psi.size()));
    for (size_t n = 0; n < c.size(); ++n) {
        c[n] = std::conj(psi[static_cast<Eigen::Index>(n)]) *
               std::exp(-half_log_factorial(static_cast<int>(n)));
    }
    return c;
}

}  // namespace detail

// Roots of the characteristic polynomial, sorted by magnitude then phase.
// The top amplitude must be nonzero (it fixes the polynomial degree); root
// quality is verified by evaluating the polynomial at each root.
inline std::vector<Complex> roots_of_state(const FockVector& psi) {
    const auto c = detail::characteristic_coefficients(psi);
    const int deg = static_cast<int>(c.size()) - 1;
    if (std::abs(c[deg]) == 0.0) {
        throw std::invalid_argument("roots_of_state: leading amplitude is zero");
    }
    if (deg == 0) return {};
    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(deg, deg);
    for (int i = 0; i + 1 < deg; ++i) companion(i + 1, i) = 1.0;
    for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -c[i] / c[deg];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(companion);
    if (es.info() != Eigen::Success) throw NumericError("roots_of_state: eigensolver failed");
    std::vector<Complex> roots(es.eigenvalues().data(), es.eigenvalues().data() + deg);

    double cmax = 0.0;
    for (const auto& ck : c) cmax = std::max(cmax, std::abs(ck));
    for (const Complex& z : roots) {
        Complex val = 0.0;
        for (int n = deg; n >= 0; --n) val = val * z + c[n];
        const double scale = cmax * std::pow(std::max(1.0, std::abs(z)), deg);
        if (std::abs(val) > 1e-6 * scale) {
            throw NumericError("roots_of_state: root residual exceeds tolerance");
        }
    }
    std::sort(roots.begin(), roots.end(), detail::root_order);
    return roots;
}

// Normalized state whose characteristic polynomial has the given roots,
// i.e. (up to normalization) prod_k (a^dag - conj(root_k)) |0>.
inline FockVector state_from_roots(const std::vector<Complex>& roots, int cutoff) {
    const int n_roots = static_cast<int>(roots.size());
    detail::require(cutoff >= n_roots, "state_from_roots: cutoff below root count");
    FockVector v = FockVector::Zero(cutoff + 1);
    v[0] = 1.0;
    int hi = 0;
    for (const Complex& b : roots) {
        FockVector next = FockVector::Zero(cutoff + 1);
        for (int n = 0; n <= hi; ++n) {
            next[n + 1] += std::sqrt(static_cast<double>(n + 1)) * v[n];
            next[n] -= std::conj(b) * v[n];
        }
        ++hi;
        v = next;
    }
    v.normalize();
    return v;
}

// ---------------------------------------------------------------------------
// Displacement schedules
// ---------------------------------------------------------------------------

// Closed-form schedule for the one-photon-per-stage cascade:
//   alpha_k     = conj(t)^(N+1-k) (root_{k-1} - root_k)   for k = 2 .. N+1,
//   alpha_1     = - sum_{l=1..N} t^{-l} alpha_{l+1},
// with root_0 := 0 read off the sorted root list and root_{N+1} := 0.
// Returned in application order: index 0 precedes the first stage.
inline std::vector<Complex> displacement_schedule(const std::vector<Complex>& roots, Complex t) {
    if (std::abs(t) == 0.0) throw std::invalid_argument("singular attenuation");
    const int n = static_cast<int>(roots.size());
    std::vector<Complex> ext(roots.begin(), roots.end());
    ext.push_back(0.0);  // root_{N+1}
    std::vector<Complex> al(n + 1, Complex(0.0));
    for (int k = 2; k <= n + 1; ++k) {
        al[k - 1] = std::pow(std::conj(t), n + 1 - k) * (ext[k - 2] - ext[k - 1]);
    }
    Complex first = 0.0;
    for (int l = 1; l <= n; ++l) first += std::pow(t, -l) * al[l];
    al[0] = -first;
    return al;
}

namespace detail {

// General backward schedule: supports multi-photon stages (multiplicity d_k
// at stage k) and a displaced target D(mu) x (finite state).  Walking the
// cascade from the last stage to the first, each step peels one group root
// off the running factorization and tracks how the remaining roots transform
// through the stage displacement and attenuation.  Reduces to the closed-form
// schedule above for all-ones multiplicities and mu = 0.
inline std::vector<Complex> schedule_from_groups(const std::vector<Complex>& group_roots,
                                                 const std::vector<int>& multiplicities,
                                                 const BeamSplitterParams& bs, Complex mu) {
    require(group_roots.size() == multiplicities.size(),
            "schedule_from_groups: group/multiplicity size mismatch");
    if (std::abs(bs.t) == 0.0) throw std::invalid_argument("singular attenuation");
    const int m = static_cast<int>(group_roots.size());
    const double r2 = bs.reflectance_sq();
    Complex g = mu;
    std::vector<Complex> v(group_roots);
    std::vector<Complex> alphas(m + 1, Complex(0.0));
    for (int k = m - 1; k >= 0; --k) {
        alphas[k + 1] = g + v[k];
        g = -v[k] / bs.t;
        for (int j = 0; j < k; ++j) v[j] = std::conj(bs.t) * v[j] - r2 * g;
    }
    alphas[0] = g;
    return alphas;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plans and execution
// ---------------------------------------------------------------------------

struct SynthesisPlan {
    BeamSplitterParams bs;
    // displacements[0] is applied before the first stage, displacements[k]
    // after stage k; stage k injects multiplicities[k-1] reference photons
    // and conditions on zero detected photons.
    std::vector<Complex> displacements;
    std::vector<int> multiplicities;
    // Root value handled by each stage (diagnostic; grouped stages carry one
    // value for the whole group).
    std::vector<Complex> group_roots;
    // Displacement of the target from the origin (nonzero only for targets
    // specified as displaced finite states).
    Complex target_displacement = 0.0;
};

struct GenerationReport {
    FockVector state;          // normalized, truncated at the requested cutoff
    double probability = 0.0;  // may underflow to zero; see log10_probability
    double log10_probability = 0.0;
    double fidelity = 0.0;     // against the plan's target, at the same cutoff
    double leakage = 0.0;      // exact weight of the output beyond the cutoff
};

namespace detail {

// Groups sorted roots whose pairwise distance is below a relative tolerance.
inline void cluster_roots(const std::vector<Complex>& roots, std::vector<Complex>& values,
                          std::vector<int>& mults, double tol = 1e-8) {
    values.clear();
    mults.clear();
    for (const Complex& z : roots) {
        if (!values.empty() &&
            std::abs(z - values.back()) <= tol * std::max(1.0, std::abs(values.back()))) {
            // Refine the group value to the running mean for symmetry.
            values.back() += (z - values.back()) / static_cast<double>(mults.back() + 1);
            ++mults.back();
        } else {
            values.push_back(z);
            mults.push_back(1);
        }
    }
}

}  // namespace detail

// Builds the stage schedule for a target given by its characteristic roots.
// With group_repeated, coinciding roots are folded into one multi-photon
// stage (fewer stages, different heralding probability, same output ray);
// the schedule is recomputed for the grouped cascade rather than reusing the
// one-photon schedule, because each stage's attenuation reshapes the roots
// that remain ahead of it.
inline SynthesisPlan plan_from_roots(const std::vector<Complex>& roots,
                                     const BeamSplitterParams& bs, bool group_repeated = false,
                                     Complex target_displacement = 0.0,
                                     double cluster_tol = 1e-8) {
    if (!roots.empty() && (std::abs(bs.t) == 0.0 || std::abs(bs.r) == 0.0)) {
        throw std::invalid_argument(
            "plan_from_roots: synthesis stages need both transmission and reflection");
    }
    std::vector<Complex> sorted(roots);
    std::sort(sorted.begin(), sorted.end(), detail::root_order);
    SynthesisPlan plan{bs, {}, {}, {}, target_displacement};
    if (group_repeated) {
        detail::cluster_roots(sorted, plan.group_roots, plan.multiplicities, cluster_tol);
    } else {
        plan.group_roots = sorted;
        plan.multiplicities.assign(sorted.size(), 1);
    }
    plan.displacements = detail::schedule_from_groups(plan.group_roots, plan.multiplicities, bs,
                                                      target_displacement);
    return plan;
}

// Roots recovered from a state's amplitudes carry companion-matrix noise
// that splits a true d-fold root by roughly eps^(1/d), which can exceed the
// default cluster window; pass a wider root_tolerance (or the known roots to
// plan_from_roots) when grouping such targets.
inline SynthesisPlan plan_synthesis(const FockVector& target, const BeamSplitterParams& bs,
                                    bool group_repeated = false, double root_tolerance = 1e-8) {
    return plan_from_roots(roots_of_state(target), bs, group_repeated, 0.0, root_tolerance);
}

namespace detail {

// Runs the cascade in the displaced frame.  The polynomial support equals
// the number of injected photons, so the execution is exact; only the final
// materialization truncates.
inline DisplacedFrame run_plan_frame(const SynthesisPlan& plan) {
    const int total = std::accumulate(plan.multiplicities.begin(), plan.multiplicities.end(), 0);
    DisplacedFrame f(total + 1);
    f.displace(plan.displacements.at(0));
    for (size_t k = 0; k < plan.multiplicities.size(); ++k) {
        f.attenuate(plan.bs.t);
        const int d = plan.multiplicities[k];
        for (int i = 0; i < d; ++i) {
            f.add_photon();
            f.scale(plan.bs.r);
        }
        f.scale_log(-half_log_factorial(d), 0.0);
        f.displace(plan.displacements.at(k + 1));
    }
    return f;
}

}  // namespace detail

// Reconstructs the plan's target state, truncated at `cutoff` and normalized
// over the kept components.
inline FockVector plan_target_state(const SynthesisPlan& plan, int cutoff) {
    std::vector<Complex> expanded;
    for (size_t k = 0; k < plan.group_roots.size(); ++k) {
        expanded.insert(expanded.end(), plan.multiplicities[k], plan.group_roots[k]);
    }
    const int n = static_cast<int>(expanded.size());
    detail::require(cutoff >= n, "plan_target_state: cutoff below photon count");
    const FockVector base = state_from_roots(expanded, n);
    const ModeOperator d = displacement_operator(plan.target_displacement, cutoff);
    FockVector out = d.leftCols(n + 1) * base;
    const double nrm = out.norm();
    if (!(nrm > 0.0)) throw NumericError("plan_target_state: target vanished under truncation");
    return out / nrm;
}

inline GenerationReport run_generation(const SynthesisPlan& plan, int cutoff) {
    const detail::DisplacedFrame f = detail::run_plan_frame(plan);
    const double log_p = f.log_norm_sq();
    // Materialized at unit norm so the amplitudes survive even when the
    // probability itself underflows; `kept` is then the below-cutoff fraction.
    FockVector raw = f.materialize(cutoff, 0.5 * log_p);
    const double kept = raw.squaredNorm();
    if (!(kept > 0.0)) throw NumericError("run_generation: output has no weight below cutoff");

    GenerationReport rep;
    rep.probability = std::exp(log_p);
    rep.log10_probability = log_p / std::log(10.0);
    rep.leakage = std::max(0.0, 1.0 - kept);
    rep.state = raw / std::sqrt(kept);
    rep.fidelity = fidelity(plan_target_state(plan, cutoff), rep.state);
    return rep;
}

// ---------------------------------------------------------------------------
// Heralding probability, closed form
// ---------------------------------------------------------------------------

// log of the heralding probability of the one-photon-per-stage cascade for a
// normalized target with sorted roots and top amplitude `leading`:
//   p = N! / |psi_N|^2 . |r|^(2N) |t|^(N(N-1)) .
//       exp(-|r|^2 sum_k |sum_{l=1..k} |t|^(2l) (root_{N+2-l} - root_{N+1-l})|^2 / |t|^(2k+4))
// (root_{N+1} := 0).  Only |t| enters: the stage phases cancel against the
// scheduled displacements.
inline double generation_log_probability(const std::vector<Complex>& roots, Complex leading,
                                         const BeamSplitterParams& bs) {
    const int n = static_cast<int>(roots.size());
    detail::require(std::abs(leading) > 0.0, "generation_log_probability: zero leading amplitude");
    if (n == 0) return 0.0;
    if (std::abs(bs.t) == 0.0 || std::abs(bs.r) == 0.0) {
        throw std::invalid_argument(
            "generation_log_probability: needs both transmission and reflection");
    }
    const double t2 = bs.transmittance_sq();
    const double r2 = bs.reflectance_sq();
    std::vector<Complex> ext(roots);
    ext.push_back(0.0);
    double s = 0.0;
    for (int k = 1; k <= n; ++k) {
        Complex inner = 0.0;
        double t2l = 1.0;
        for (int l = 1; l <= k; ++l) {
            t2l *= t2;
            // ext is zero-based: ext[i] holds root_{i+1}.
            inner += t2l * (ext[n - l + 1] - ext[n - l]);
        }
        s += std::norm(inner) / std::pow(t2, k + 2);
    }
    return std::lgamma(n + 1.0) - 2.0 * std::log(std::abs(leading)) + n * std::log(r2) +
           0.5 * n * (n - 1) * std::log(t2) - r2 * s;
}

inline double generation_probability_closed_form(const std::vector<Complex>& roots,
                                                 Complex leading,
                                                 const BeamSplitterParams& bs) {
    return std::exp(generation_log_probability(roots, leading, bs));
}

inline double generation_log_probability(const FockVector& target,
                                         const BeamSplitterParams& bs) {
    return generation_log_probability(roots_of_state(target), target[target.size() - 1], bs);
}

}  // namespace fockbs
