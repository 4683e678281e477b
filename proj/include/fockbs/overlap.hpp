#pragma once
// Overlap measurement: a cascade of beam splitter stages with coherent
// reference beams and photon-counting detectors whose joint "all stages fire
// as prescribed, final detector dark" event has probability proportional to
// <target|rho|target>.  The stage amplitudes are scheduled from the roots of
// the target's characteristic polynomial so that the adjoint of the cascade
// maps the vacuum onto the target.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <future>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "fockbs/beamsplitter.hpp"
#include "fockbs/fock.hpp"
#include "fockbs/frame.hpp"
#include "fockbs/synthesis.hpp"

namespace fockbs {

// ---------------------------------------------------------------------------
// Stage amplitude schedules
// ---------------------------------------------------------------------------

// Coherent reference amplitudes alpha_k for a cascade measuring the state
// with the given sorted characteristic roots (one root per stage; the stage
// multiplicities do not enter, photon detections do not displace anything):
//   alpha_k = (conj(r)/conj(t)^k) sum_{l=1..k} |t|^{2l-2} (root_l - root_{l-1})
// with root_0 := 0.  This scaling makes the adjoint cascade reproduce the
// target from the vacuum exactly (see make_measurement_scheme).
inline std::vector<Complex> overlap_stage_amplitudes(const std::vector<Complex>& roots,
                                                     const BeamSplitterParams& bs) {
    if (std::abs(bs.t) == 0.0) throw std::invalid_argument("singular attenuation");
    const int n = static_cast<int>(roots.size());
    std::vector<Complex> ext(1, Complex(0.0));
    ext.insert(ext.end(), roots.begin(), roots.end());
    std::vector<Complex> alphas(n);
    const double t2 = bs.transmittance_sq();
    for (int k = 1; k <= n; ++k) {
        Complex acc = 0.0;
        double w = 1.0;  // |t|^{2l-2}
        for (int l = 1; l <= k; ++l) {
            acc += w * (ext[l] - ext[l - 1]);
            w *= t2;
        }
        alphas[k - 1] = std::conj(bs.r) / std::pow(std::conj(bs.t), k) * acc;
    }
    return alphas;
}

// Alternate scaling with one extra factor of |t| per summand.  It does not
// satisfy the reconstruction invariant (the adjoint cascade misses the target
// by O(1-|t|) amounts); kept only so the two schedules can be compared.
inline std::vector<Complex> overlap_stage_amplitudes_alt(const std::vector<Complex>& roots,
                                                         const BeamSplitterParams& bs) {
    auto alphas = overlap_stage_amplitudes(roots, bs);
    // Rescale each summand: multiply term l by |t|; equivalently rebuild.
    const int n = static_cast<int>(roots.size());
    std::vector<Complex> ext(1, Complex(0.0));
    ext.insert(ext.end(), roots.begin(), roots.end());
    const double t1 = std::abs(bs.t);
    const double t2 = bs.transmittance_sq();
    for (int k = 1; k <= n; ++k) {
        Complex acc = 0.0;
        double w = t1;  // |t|^{2l-1}
        for (int l = 1; l <= k; ++l) {
            acc += w * (ext[l] - ext[l - 1]);
            w *= t2;
        }
        alphas[k - 1] = std::conj(bs.r) / std::pow(std::conj(bs.t), k) * acc;
    }
    return alphas;
}

// ---------------------------------------------------------------------------
// Measurement schemes
// ---------------------------------------------------------------------------

struct MeasurementScheme {
    BeamSplitterParams bs;
    std::vector<Complex> stage_amplitudes;  // coherent reference amplitude per stage
    std::vector<int> multiplicities;        // photons detected per stage
    std::vector<Complex> group_roots;       // root handled by each stage (diagnostic)
    // Deterministic displacement applied to the signal before the first
    // stage; nonzero only when the measured target is a displaced finite
    // state D(mu)|finite> (then pre_displacement = -mu).
    Complex pre_displacement = 0.0;

    Complex target_displacement() const { return -pre_displacement; }
};

namespace detail {

// Adjoint of the measurement cascade applied to the vacuum.  Stage k of the
// cascade is Y_k = (-conj(r))^{d} / sqrt(d!) D(a_k/conj(r)) t^n a^d
// D(-(conj(t)/conj(r)) a_k)  (its displaced-conditional closed form), so the
// adjoint chain runs the stages in reverse with conjugated attenuation and
// photon additions.  If the scheme reproduces its target, the result is
// proportional to that target and its squared norm is the measurement
// fidelity (the joint probability the scheme assigns to the target itself).
inline DisplacedFrame measurement_adjoint_frame(const MeasurementScheme& s) {
    const int total = std::accumulate(s.multiplicities.begin(), s.multiplicities.end(), 0);
    if (std::abs(s.bs.r) == 0.0) {
        throw std::invalid_argument("measurement scheme needs a reflecting beam splitter");
    }
    DisplacedFrame f(total + 1);
    for (int k = static_cast<int>(s.multiplicities.size()) - 1; k >= 0; --k) {
        const Complex a = s.stage_amplitudes.at(k);
        f.displace(-a / std::conj(s.bs.r));
        f.attenuate(std::conj(s.bs.t));
        for (int i = 0; i < s.multiplicities[k]; ++i) {
            f.add_photon();
            f.scale(-s.bs.r);
        }
        f.scale_log(-half_log_factorial(s.multiplicities[k]), 0.0);
        f.displace(std::conj(s.bs.t) / std::conj(s.bs.r) * a);
    }
    f.displace(-s.pre_displacement);
    return f;
}

}  // namespace detail

// Normalized state the scheme projects onto, truncated at `cutoff`.
inline FockVector scheme_target_state(const MeasurementScheme& s, int cutoff) {
    const auto f = detail::measurement_adjoint_frame(s);
    // Unit-norm scale: the direction is wanted even when the measurement
    // fidelity (the squared norm) underflows.
    FockVector v = f.materialize(cutoff, 0.5 * f.log_norm_sq());
    const double nrm = v.norm();
    if (!(nrm > 0.0)) throw NumericError("scheme_target_state: no weight below cutoff");
    return v / nrm;
}

// P(joint event | rho = |target><target|): the largest overlap estimate the
// scheme can resolve in one shot.  Exact (no truncation enters the norm).
inline double measurement_fidelity(const MeasurementScheme& s) {
    return std::exp(detail::measurement_adjoint_frame(s).log_norm_sq());
}

// Closed form of the same quantity for one-photon stages, obtained from the
// generation probability by reordering the root differences:
//   p = N!/|psi_N|^2 |r|^{2N} |t|^{N(N-1)}
//       exp(-|r|^2 sum_k |sum_{l<=k} |t|^{2l}(root_l - root_{l-1})|^2 / |t|^{2k+4}).
inline double measurement_fidelity_closed_form(const MeasurementScheme& s) {
    for (int d : s.multiplicities) {
        detail::require(d == 1, "measurement_fidelity_closed_form: one-photon stages only");
    }
    detail::require(s.pre_displacement == Complex(0.0),
                    "measurement_fidelity_closed_form: undisplaced targets only");
    const int n = static_cast<int>(s.group_roots.size());
    if (n == 0) return 1.0;
    const double t2 = s.bs.transmittance_sq();
    const double r2 = s.bs.reflectance_sq();
    std::vector<Complex> ext(1, Complex(0.0));
    ext.insert(ext.end(), s.group_roots.begin(), s.group_roots.end());
    double sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        Complex inner = 0.0;
        double w = t2;
        for (int l = 1; l <= k; ++l) {
            inner += w * (ext[l] - ext[l - 1]);
            w *= t2;
        }
        sum += std::norm(inner) / std::pow(t2, k + 2);
    }
    const FockVector target = state_from_roots(s.group_roots, n);
    const double lead2 = std::norm(target[n]);
    return std::tgamma(n + 1.0) / lead2 * std::pow(r2, n) * std::pow(t2, 0.5 * n * (n - 1)) *
           std::exp(-r2 * sum);
}

// Builds a scheme for a normalized finite target.  The reconstruction
// invariant (adjoint cascade on vacuum == target) is validated and a failure
// is an error: it means the stage amplitudes do not match the roots.
inline MeasurementScheme make_measurement_scheme(const FockVector& target,
                                                 const BeamSplitterParams& bs,
                                                 bool group_repeated = false) {
    const auto roots = roots_of_state(target);
    if (!roots.empty() && (std::abs(bs.t) == 0.0 || std::abs(bs.r) == 0.0)) {
        throw std::invalid_argument(
            "make_measurement_scheme: stages need both transmission and reflection");
    }
    MeasurementScheme s{bs, {}, {}, {}, 0.0};
    if (group_repeated) {
        // Recovered roots split a true d-fold root by about eps^(1/d); use a
        // wide cluster window and let the reconstruction check below reject
        // any merge that actually changed the state.
        detail::cluster_roots(roots, s.group_roots, s.multiplicities, 1e-5);
    } else {
        s.group_roots = roots;
        s.multiplicities.assign(roots.size(), 1);
    }
    s.stage_amplitudes = overlap_stage_amplitudes(s.group_roots, bs);

    const int n = static_cast<int>(target.size()) - 1;
    const double fid = fidelity(scheme_target_state(s, n),
                                FockVector(target / target.norm()));
    if (fid < 1.0 - 1e-8) {
        throw NumericError("make_measurement_scheme: scheme reproduces its target at fidelity " +
                           std::to_string(fid));
    }
    return s;
}

// Scheme for a displaced finite target D(mu)|state(group_roots)>, with
// explicit stage grouping.  Used directly by higher-level constructions that
// know the root structure; the invariant is validated the same way.
inline MeasurementScheme make_measurement_scheme(const std::vector<Complex>& group_roots,
                                                 const std::vector<int>& multiplicities,
                                                 const BeamSplitterParams& bs,
                                                 Complex target_displacement = 0.0) {
    detail::require(group_roots.size() == multiplicities.size(),
                    "make_measurement_scheme: group/multiplicity size mismatch");
    MeasurementScheme s{bs, overlap_stage_amplitudes(group_roots, bs), multiplicities,
                        group_roots, -target_displacement};
    const int total = std::accumulate(multiplicities.begin(), multiplicities.end(), 0);
    if (total > 0 && (std::abs(bs.t) == 0.0 || std::abs(bs.r) == 0.0)) {
        throw std::invalid_argument(
            "make_measurement_scheme: stages need both transmission and reflection");
    }
    // Validate against the independently reconstructed target.
    std::vector<Complex> expanded;
    for (size_t k = 0; k < group_roots.size(); ++k) {
        expanded.insert(expanded.end(), multiplicities[k], group_roots[k]);
    }
    const int pad = 12 + static_cast<int>(std::ceil(4.0 * std::abs(target_displacement) *
                                                    (std::sqrt(total + 1.0) + 1.0) +
                                                    std::norm(target_displacement)));
    const int cutoff = total + pad;
    const FockVector base = state_from_roots(expanded, cutoff);
    const FockVector want =
        (displacement_operator(target_displacement, cutoff) * base).normalized();
    const double fid = fidelity(scheme_target_state(s, cutoff), want);
    if (fid < 1.0 - 1e-8) {
        throw NumericError("make_measurement_scheme: scheme reproduces its target at fidelity " +
                           std::to_string(fid));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Using a scheme
// ---------------------------------------------------------------------------

// Full cascade operator Y (pre-displacement, then every stage), truncated at
// `cutoff`.  Built on an internally padded basis: the stage factors displace
// by up to max|a_k|/|r|, and products of cropped blocks would otherwise lose
// the through-going amplitudes.
inline ModeOperator measurement_operator(const MeasurementScheme& s, int cutoff) {
    detail::require(cutoff >= 0, "measurement_operator: negative cutoff");
    double big = std::abs(s.pre_displacement);
    for (const Complex& a : s.stage_amplitudes) {
        big = std::max(big, std::abs(a) / std::abs(s.bs.r));
        big = std::max(big, std::abs(a) * std::abs(s.bs.t) / std::abs(s.bs.r));
    }
    const int wide = cutoff + static_cast<int>(std::ceil(2.0 * big * big + 12.0 * big + 40.0));
    ModeOperator y = displacement_operator(s.pre_displacement, wide);
    for (size_t k = 0; k < s.multiplicities.size(); ++k) {
        const FockVector ref_out = fock_state(s.multiplicities[k], s.multiplicities[k]);
        y = displaced_conditional(s.stage_amplitudes[k], 0.0, fock_state(0, 0), ref_out, s.bs,
                                  wide) *
            y;
    }
    return y.topLeftCorner(cutoff + 1, cutoff + 1);
}

// P(all detectors fire as prescribed and the final detector stays dark)
//   = <0| Y rho Y^dag |0> = v^dag rho v  with  v = Y^dag |0>.
inline double joint_probability(const DensityMatrix& rho, const MeasurementScheme& s) {
    detail::require(rho.rows() == rho.cols(), "joint_probability: rho is not square");
    const auto f = detail::measurement_adjoint_frame(s);
    const FockVector v = f.materialize(static_cast<int>(rho.rows()) - 1);
    const double p = std::real(v.dot(rho * v));
    return std::max(0.0, p);
}

// Overlap estimate <target|rho|target> = joint probability / measurement
// fidelity.  Computed from the normalized adjoint vector, so the (possibly
// tiny) fidelity scale cancels exactly.
inline double measure_overlap(const DensityMatrix& rho, const MeasurementScheme& s) {
    detail::require(rho.rows() == rho.cols(), "measure_overlap: rho is not square");
    const FockVector v = scheme_target_state(s, static_cast<int>(rho.rows()) - 1);
    const double est = std::real(v.dot(rho * v));
    if (est < -1e-9 || est > 1.0 + 1e-9) {
        throw NumericError("measure_overlap: estimate " + std::to_string(est) +
                           " is outside [0, 1]");
    }
    return std::clamp(est, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Monte Carlo detector simulation
// ---------------------------------------------------------------------------

struct OutcomeCounts {
    std::int64_t shots = 0;
    std::uint64_t seed = 0;
    std::int64_t coincidences = 0;  // every stage saw its prescribed count, final detector dark
    std::vector<std::vector<std::int64_t>> stage_histograms;  // [stage][detected photons]
    std::vector<std::int64_t> final_histogram;                // signal photons after the cascade
    std::vector<std::int64_t> shard_coincidences;

    double estimate() const {
        return shots > 0 ? static_cast<double>(coincidences) / static_cast<double>(shots) : 0.0;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

struct SamplerTables {
    // ops[stage][q] maps the signal through stage `stage` given q detected
    // photons.  q is capped where the reference truncation gives it no
    // support; the residual probability is tracked as an overflow outcome.
    std::vector<std::vector<ModeOperator>> ops;
    ModeOperator pre;
    int cutoff = 0;
    int q_cap = 0;
};

inline SamplerTables build_sampler_tables(const MeasurementScheme& s, int cutoff) {
    SamplerTables tb;
    tb.cutoff = cutoff;
    int ref_cut = 0;
    for (const Complex& a : s.stage_amplitudes) {
        const double m = std::abs(a);
        ref_cut = std::max(ref_cut, static_cast<int>(std::ceil(m * m + 10.0 * m + 25.0)));
    }
    tb.q_cap = cutoff + ref_cut;
    tb.pre = displacement_operator(s.pre_displacement, cutoff);
    tb.ops.resize(s.multiplicities.size());
    for (size_t k = 0; k < s.multiplicities.size(); ++k) {
        const FockVector ref_in = coherent_state(s.stage_amplitudes[k], ref_cut);
        tb.ops[k].reserve(tb.q_cap + 1);
        for (int q = 0; q <= tb.q_cap; ++q) {
            tb.ops[k].push_back(
                conditional_operator(ref_in, fock_state(q, q), s.bs, cutoff));
        }
    }
    return tb;
}

struct ShardResult {
    std::int64_t coincidences = 0;
    std::vector<std::vector<std::int64_t>> stage_histograms;
    std::vector<std::int64_t> final_histogram;
};

inline ShardResult run_shard(const SamplerTables& tb, const MeasurementScheme& s,
                             const Eigen::MatrixXcd& components, const std::vector<double>& cdf,
                             std::int64_t shots, std::uint64_t shard_seed) {
    std::mt19937_64 eng(shard_seed);
    const size_t n_stages = tb.ops.size();
    ShardResult res;
    res.stage_histograms.assign(n_stages, std::vector<std::int64_t>(tb.q_cap + 2, 0));
    res.final_histogram.assign(tb.cutoff + 2, 0);

    for (std::int64_t shot = 0; shot < shots; ++shot) {
        // Pick a pure component of rho.
        size_t comp = 0;
        if (cdf.size() > 1) {
            const double u = uniform01(eng);
            comp = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
            comp = std::min(comp, cdf.size() - 1);
        }
        FockVector psi = tb.pre * components.col(static_cast<Eigen::Index>(comp));
        psi.normalize();

        bool pattern = true;
        for (size_t k = 0; k < n_stages; ++k) {
            const double u = uniform01(eng);
            double acc = 0.0;
            int q = 0;
            FockVector next;
            for (; q <= tb.q_cap; ++q) {
                next = tb.ops[k][q] * psi;
                acc += next.squaredNorm();
                if (u < acc) break;
            }
            if (q > tb.q_cap) {
                // Residual weight beyond the modelled outcomes; count it in
                // the overflow bin and abandon the shot's pattern.
                res.stage_histograms[k][tb.q_cap + 1] += 1;
                pattern = false;
                break;
            }
            res.stage_histograms[k][q] += 1;
            if (q != s.multiplicities[k]) pattern = false;
            psi = next / next.norm();
        }
        if (!pattern) continue;

        // Final photon-counting detector on the signal.
        const double u = uniform01(eng);
        double acc = 0.0;
        int n = 0;
        for (; n <= tb.cutoff; ++n) {
            acc += std::norm(psi[n]);
            if (u < acc) break;
        }
        const int bin = std::min(n, tb.cutoff + 1);
        res.final_histogram[bin] += 1;
        if (n == 0) res.coincidences += 1;
    }
    return res;
}

}  // namespace detail

// Simulates `shots` runs of the cascade on `rho`, counting detector
// patterns.  The sampler follows the exact per-stage outcome distributions
// (all outcomes, not only the prescribed pattern), so the histograms are
// faithful detector statistics.  Results are deterministic in (seed, shards):
// shard j uses an engine seeded from splitmix64(seed, j) and shards are
// merged in index order, so reruns are bit-identical and the total over
// shards is independent of threading.
inline OutcomeCounts sample_outcomes(const DensityMatrix& rho, const MeasurementScheme& s,
                                     std::int64_t shots, std::uint64_t seed, int shards = 1,
                                     int cutoff = -1) {
    detail::require(shots >= 0, "sample_outcomes: negative shot count");
    detail::require(shards >= 1, "sample_outcomes: shards must be positive");
    detail::require(rho.rows() == rho.cols(), "sample_outcomes: rho is not square");
    if (!is_valid_density(rho, 1e-8)) {
        throw std::invalid_argument("sample_outcomes: invalid density matrix");
    }
    if (cutoff < 0) cutoff = static_cast<int>(rho.rows()) - 1;
    detail::require(cutoff + 1 >= rho.rows(), "sample_outcomes: cutoff below rho dimension");

    // Mixture decomposition of rho (columns are normalized pure components).
    Eigen::SelfAdjointEigenSolver<DensityMatrix> es(rho);
    std::vector<double> weights;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double w = es.eigenvalues()[i];
        if (w > 1e-14) {
            weights.push_back(w);
            keep.push_back(i);
        }
    }
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    Eigen::MatrixXcd components(cutoff + 1, static_cast<Eigen::Index>(keep.size()));
    components.setZero();
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i] / wsum;
        cdf[i] = acc;
        components.col(static_cast<Eigen::Index>(i)).head(rho.rows()) = es.eigenvectors().col(keep[i]);
    }

    const detail::SamplerTables tables = detail::build_sampler_tables(s, cutoff);

    // Shard the shots as evenly as possible; extra shots go to low shards.
    std::vector<std::int64_t> shard_shots(shards, shots / shards);
    for (int j = 0; j < static_cast<int>(shots % shards); ++j) shard_shots[j] += 1;

    std::vector<std::future<detail::ShardResult>> futures;
    for (int j = 0; j < shards; ++j) {
        const std::uint64_t shard_seed = detail::splitmix64(seed ^ (0x5851f42d4c957f2dull *
                                                                    static_cast<std::uint64_t>(j + 1)));
        futures.push_back(std::async(shards > 1 ? std::launch::async : std::launch::deferred,
                                     detail::run_shard, std::cref(tables), std::cref(s),
                                     std::cref(components), std::cref(cdf), shard_shots[j],
                                     shard_seed));
    }

    OutcomeCounts out;
    out.shots = shots;
    out.seed = seed;
    out.stage_histograms.assign(s.multiplicities.size(),
                                std::vector<std::int64_t>(tables.q_cap + 2, 0));
    out.final_histogram.assign(cutoff + 2, 0);
    for (auto& fut : futures) {
        const detail::ShardResult r = fut.get();
        out.coincidences += r.coincidences;
        out.shard_coincidences.push_back(r.coincidences);
        for (size_t k = 0; k < out.stage_histograms.size(); ++k) {
            for (size_t q = 0; q < out.stage_histograms[k].size(); ++q) {
                out.stage_histograms[k][q] += r.stage_histograms[k][q];
            }
        }
        for (size_t n = 0; n < out.final_histogram.size(); ++n) {
            out.final_histogram[n] += r.final_histogram[n];
        }
    }
    return out;
}

}  // namespace fockbs
