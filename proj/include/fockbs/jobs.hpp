#pragma once
// Declarative job execution behind the CLI: one JSON document in, one
// deterministic JSON report out.  The document carries a "command" field
// (synthesize | overlap | cat | sample | bs-element) plus command-specific
// parameters; every report embeds the effective input and the library
// version.  std::invalid_argument marks a rejected document (exit 2),
// NumericError a numerical failure while running it (exit 3).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fockbs/beamsplitter.hpp"
#include "fockbs/cat.hpp"
#include "fockbs/fock.hpp"
#include "fockbs/overlap.hpp"
#include "fockbs/synthesis.hpp"
#include "fockbs/version.hpp"

namespace fockbs {

using Json = nlohmann::ordered_json;

struct JobOptions {
    std::optional<int> cutoff;           // --cutoff, beats the document
    std::optional<int> env_cutoff;       // environment default, weakest
    std::optional<std::uint64_t> seed;   // --seed
    std::optional<std::int64_t> shots;   // --shots
    std::optional<double> tolerance;     // --tolerance (root clustering)
    bool alt_stage_amplitudes = false;   // --alt-stage-amplitudes
};

struct JobResult {
    Json report;
    int exit_code = 0;
};

namespace detail {

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

inline std::invalid_argument schema_error(const std::string& what) {
    return std::invalid_argument("job schema: " + what);
}

inline double as_real(const Json& j, const std::string& what) {
    if (!j.is_number()) throw schema_error(what + " must be a number");
    return j.get<double>();
}

inline Complex as_complex(const Json& j, const std::string& what) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    throw schema_error(what + " must be a number or an [re, im] pair");
}

inline std::vector<Complex> as_complex_list(const Json& j, const std::string& what) {
    if (!j.is_array()) throw schema_error(what + " must be an array");
    std::vector<Complex> out;
    out.reserve(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_complex(j[i], what + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json state_json(const FockVector& v) {
    Json out = Json::array();
    for (Eigen::Index n = 0; n < v.size(); ++n) out.push_back(complex_json(v[n]));
    return out;
}

// Beam splitter from "t"/"r" fields (default 50/50).  The CLI contract
// accepts |t|^2 + |r|^2 within 1e-9 of 1 and canonicalizes, which also
// satisfies the stricter library constructor.
inline BeamSplitterParams parse_bs(const Json& job) {
    if (!job.contains("t") && !job.contains("r")) {
        return BeamSplitterParams(1 / std::sqrt(2.0), 1 / std::sqrt(2.0));
    }
    if (!job.contains("t") || !job.contains("r")) {
        throw schema_error("t and r must be given together");
    }
    const Complex t = as_complex(job.at("t"), "t");
    const Complex r = as_complex(job.at("r"), "r");
    const double s = std::norm(t) + std::norm(r);
    if (std::abs(s - 1.0) > 1e-9) {
        throw schema_error("|t|^2 + |r|^2 deviates from 1 by more than 1e-9");
    }
    const double scale = 1.0 / std::sqrt(s);
    return BeamSplitterParams(t * scale, r * scale);
}

struct TargetSpec {
    bool from_roots = false;
    FockVector amplitudes;          // valid when !from_roots
    std::vector<Complex> roots;     // group values when multiplicities given
    std::vector<int> multiplicities;
    Complex displacement = 0.0;
    int photons = 0;                // total photon content of the finite part
};

inline TargetSpec parse_target(const Json& job) {
    if (!job.contains("target")) throw schema_error("missing target");
    const Json& t = job.at("target");
    if (!t.is_object()) throw schema_error("target must be an object");
    TargetSpec spec;
    if (t.contains("amplitudes")) {
        if (t.contains("roots")) {
            throw schema_error("target takes amplitudes or roots, not both");
        }
        const auto amps = as_complex_list(t.at("amplitudes"), "target.amplitudes");
        spec.amplitudes = make_state(amps, true);
        spec.photons = static_cast<int>(amps.size()) - 1;
        return spec;
    }
    if (!t.contains("roots")) throw schema_error("target needs amplitudes or roots");
    spec.from_roots = true;
    spec.roots = as_complex_list(t.at("roots"), "target.roots");
    if (t.contains("multiplicities")) {
        if (!t.at("multiplicities").is_array() ||
            t.at("multiplicities").size() != spec.roots.size()) {
            throw schema_error("target.multiplicities must match target.roots in length");
        }
        for (const auto& m : t.at("multiplicities")) {
            if (!m.is_number_integer() || m.get<int>() < 1) {
                throw schema_error("target.multiplicities must be positive integers");
            }
            spec.multiplicities.push_back(m.get<int>());
        }
    } else {
        spec.multiplicities.assign(spec.roots.size(), 1);
    }
    if (t.contains("displacement")) {
        spec.displacement = as_complex(t.at("displacement"), "target.displacement");
    }
    for (size_t k = 0; k < spec.roots.size(); ++k) spec.photons += spec.multiplicities[k];
    return spec;
}

// Finite target state at the requested cutoff (for oracle comparisons).
inline FockVector target_state(const TargetSpec& spec, int cutoff) {
    if (!spec.from_roots) {
        require(cutoff + 1 >= spec.amplitudes.size(), "target_state: cutoff below target");
        FockVector out = FockVector::Zero(cutoff + 1);
        out.head(spec.amplitudes.size()) = spec.amplitudes;
        return out;
    }
    std::vector<Complex> expanded;
    for (size_t k = 0; k < spec.roots.size(); ++k) {
        expanded.insert(expanded.end(), spec.multiplicities[k], spec.roots[k]);
    }
    FockVector base = state_from_roots(expanded, cutoff);
    if (spec.displacement == Complex(0.0)) return base;
    return (displacement_operator(spec.displacement, cutoff) * base).normalized();
}

inline DensityMatrix parse_density(const Json& job) {
    if (!job.contains("input")) throw schema_error("missing input");
    const Json& in = job.at("input");
    if (!in.is_object()) throw schema_error("input must be an object");
    DensityMatrix rho;
    if (in.contains("amplitudes")) {
        rho = density_from(make_state(as_complex_list(in.at("amplitudes"), "input.amplitudes"),
                                      true));
    } else if (in.contains("diagonal")) {
        const Json& d = in.at("diagonal");
        if (!d.is_array() || d.empty()) throw schema_error("input.diagonal must be an array");
        rho = DensityMatrix::Zero(d.size(), d.size());
        for (size_t i = 0; i < d.size(); ++i) {
            rho(i, i) = as_real(d[i], "input.diagonal[" + std::to_string(i) + "]");
        }
    } else if (in.contains("matrix")) {
        const Json& m = in.at("matrix");
        if (!m.is_array() || m.empty()) throw schema_error("input.matrix must be an array");
        const size_t dim = m.size();
        rho = DensityMatrix(dim, dim);
        for (size_t i = 0; i < dim; ++i) {
            if (!m[i].is_array() || m[i].size() != dim) {
                throw schema_error("input.matrix must be square");
            }
            for (size_t j = 0; j < dim; ++j) {
                rho(i, j) = as_complex(m[i][j], "input.matrix element");
            }
        }
    } else {
        throw schema_error("input needs amplitudes, diagonal, or matrix");
    }
    if (!is_valid_density(rho, 1e-8)) {
        throw schema_error("input is not a unit-trace positive semidefinite density matrix");
    }
    return rho;
}

inline int job_int(const Json& job, const char* key, int fallback) {
    if (!job.contains(key)) return fallback;
    if (!job.at(key).is_number_integer()) {
        throw schema_error(std::string(key) + " must be an integer");
    }
    return job.at(key).get<int>();
}

inline int effective_cutoff(const Json& job, const JobOptions& opts, int fallback) {
    int cutoff = fallback;
    if (opts.cutoff) {
        cutoff = *opts.cutoff;
    } else if (job.contains("cutoff")) {
        cutoff = job_int(job, "cutoff", fallback);
    } else if (opts.env_cutoff) {
        cutoff = *opts.env_cutoff;
    }
    if (cutoff < 0) throw schema_error("cutoff must be nonnegative");
    return cutoff;
}

inline int displacement_guard(Complex mu) {
    const double m = std::abs(mu);
    return m == 0.0 ? 0 : static_cast<int>(std::ceil(m * m + 10.0 * m + 20.0));
}

// ---------------------------------------------------------------------------
// Command handlers
// ---------------------------------------------------------------------------

inline Json run_synthesize(const Json& job, const JobOptions& opts) {
    const BeamSplitterParams bs = parse_bs(job);
    const TargetSpec spec = parse_target(job);
    const bool group = job.value("group_repeated", false);
    const double root_tol =
        opts.tolerance ? *opts.tolerance : job.value("root_tolerance", 1e-8);

    const SynthesisPlan plan = [&] {
        if (!spec.from_roots) return plan_synthesis(spec.amplitudes, bs, group, root_tol);
        std::vector<Complex> expanded;
        for (size_t k = 0; k < spec.roots.size(); ++k) {
            expanded.insert(expanded.end(), spec.multiplicities[k], spec.roots[k]);
        }
        const bool any_mult = spec.photons > static_cast<int>(spec.roots.size());
        return plan_from_roots(expanded, bs, group || any_mult, spec.displacement, root_tol);
    }();

    const int cutoff = effective_cutoff(
        job, opts, spec.photons + displacement_guard(plan.target_displacement));
    const GenerationReport rep = run_generation(plan, cutoff);

    Json out;
    Json roots = Json::array();
    for (const Complex& z : plan.group_roots) roots.push_back(complex_json(z));
    out["roots"] = roots;
    out["multiplicities"] = plan.multiplicities;
    Json disp = Json::array();
    for (const Complex& z : plan.displacements) disp.push_back(complex_json(z));
    out["displacements"] = disp;
    out["target_displacement"] = complex_json(plan.target_displacement);
    out["cutoff"] = cutoff;
    out["probability"] = rep.probability;
    out["log10_probability"] = rep.log10_probability;

    const bool one_photon_stages =
        std::all_of(plan.multiplicities.begin(), plan.multiplicities.end(),
                    [](int d) { return d == 1; });
    if (one_photon_stages && plan.target_displacement == Complex(0.0) &&
        !plan.group_roots.empty()) {
        const FockVector ideal = state_from_roots(plan.group_roots,
                                                  static_cast<int>(plan.group_roots.size()));
        const double closed =
            generation_probability_closed_form(plan.group_roots, ideal[ideal.size() - 1], bs);
        out["closed_form_probability"] = closed;
        out["closed_form_relative_deviation"] =
            std::abs(closed - rep.probability) / rep.probability;
    } else {
        out["closed_form_probability"] = nullptr;
        out["closed_form_relative_deviation"] = nullptr;
    }
    out["fidelity"] = rep.fidelity;
    out["leakage"] = rep.leakage;
    out["state"] = state_json(rep.state);
    return out;
}

struct BuiltScheme {
    MeasurementScheme scheme;
    double scheme_fidelity;  // adjoint-cascade vs intended target
    bool validated;
};

inline BuiltScheme build_scheme(const Json& job, const JobOptions& opts,
                                const BeamSplitterParams& bs, const TargetSpec& spec) {
    const bool alt = opts.alt_stage_amplitudes || job.value("alt_stage_amplitudes", false);
    const bool group = job.value("group_repeated", false);
    if (!alt) {
        // Root order is the caller's (it pairs with the multiplicities).
        if (spec.from_roots) {
            return {make_measurement_scheme(spec.roots, spec.multiplicities, bs,
                                            spec.displacement),
                    1.0, true};
        }
        return {make_measurement_scheme(spec.amplitudes, bs, group), 1.0, true};
    }
    // Alternate schedule: assembled without the constructor's validation so
    // the reconstruction shortfall can be reported instead of thrown.
    std::vector<Complex> roots = spec.roots;
    std::vector<int> mults = spec.multiplicities;
    if (!spec.from_roots) {
        roots = roots_of_state(spec.amplitudes);
        mults.assign(roots.size(), 1);
    }
    BuiltScheme built{MeasurementScheme{bs, overlap_stage_amplitudes_alt(roots, bs), mults,
                                        roots, -spec.displacement},
                      1.0, false};
    const int probe = spec.photons + displacement_guard(spec.displacement);
    built.scheme_fidelity =
        fidelity(scheme_target_state(built.scheme, probe), target_state(spec, probe));
    return built;
}

inline void fill_scheme_json(Json& out, const BuiltScheme& built) {
    Json alphas = Json::array();
    for (const Complex& a : built.scheme.stage_amplitudes) alphas.push_back(complex_json(a));
    out["stage_amplitudes"] = alphas;
    out["multiplicities"] = built.scheme.multiplicities;
    Json roots = Json::array();
    for (const Complex& z : built.scheme.group_roots) roots.push_back(complex_json(z));
    out["target_roots"] = roots;
    out["pre_displacement"] = complex_json(built.scheme.pre_displacement);
    out["scheme_validated"] = built.validated;
    if (!built.validated) out["scheme_fidelity"] = built.scheme_fidelity;
}

inline void fill_fidelity_json(Json& out, const BuiltScheme& built) {
    const double fid = measurement_fidelity(built.scheme);
    out["measurement_fidelity"] = fid;
    const bool closed_ok =
        std::all_of(built.scheme.multiplicities.begin(), built.scheme.multiplicities.end(),
                    [](int d) { return d == 1; }) &&
        built.scheme.pre_displacement == Complex(0.0);
    if (closed_ok) {
        const double closed = measurement_fidelity_closed_form(built.scheme);
        out["measurement_fidelity_closed_form"] = closed;
        out["closed_form_relative_deviation"] = std::abs(closed - fid) / fid;
    } else {
        out["measurement_fidelity_closed_form"] = nullptr;
        out["closed_form_relative_deviation"] = nullptr;
    }
}

inline Json run_overlap(const Json& job, const JobOptions& opts) {
    const BeamSplitterParams bs = parse_bs(job);
    const TargetSpec spec = parse_target(job);
    const DensityMatrix parsed = parse_density(job);
    const int cutoff = effective_cutoff(
        job, opts,
        std::max<int>(static_cast<int>(parsed.rows()) - 1,
                      spec.photons + displacement_guard(spec.displacement)));
    if (cutoff + 1 < parsed.rows()) throw schema_error("cutoff below input dimension");
    DensityMatrix rho = DensityMatrix::Zero(cutoff + 1, cutoff + 1);
    rho.topLeftCorner(parsed.rows(), parsed.cols()) = parsed;

    const BuiltScheme built = build_scheme(job, opts, bs, spec);
    Json out;
    fill_scheme_json(out, built);
    out["cutoff"] = cutoff;
    out["joint_probability"] = joint_probability(rho, built.scheme);
    fill_fidelity_json(out, built);
    out["overlap_estimate"] = measure_overlap(rho, built.scheme);
    out["direct_overlap"] = fidelity(target_state(spec, cutoff), rho);
    return out;
}

inline Json run_cat(const Json& job, const JobOptions& opts) {
    const BeamSplitterParams bs = parse_bs(job);
    if (!job.contains("n")) throw schema_error("missing n");
    CatParams p;
    p.n = job_int(job, "n", 1);
    if (p.n < 0) throw schema_error("n must be nonnegative");
    if (!job.contains("alpha") || !job.contains("beta")) {
        throw schema_error("missing alpha or beta");
    }
    p.alpha = as_complex(job.at("alpha"), "alpha");
    p.beta = as_complex(job.at("beta"), "beta");
    const int cutoff = effective_cutoff(job, opts, cat_auto_cutoff(p));

    Json out;
    out["n"] = p.n;
    out["alpha"] = complex_json(p.alpha);
    out["beta"] = complex_json(p.beta);
    out["gamma"] =
        Json::array({complex_json(p.gamma1()), complex_json(p.gamma2()),
                     complex_json(p.gamma3())});
    out["cutoff"] = cutoff;
    out["state"] = state_json(cat_like_state(p, cutoff));

    // Normalization of the polynomial part, closed form vs direct product.
    const double closed = cat_normalization_closed_form(p.n, std::norm(p.separation()));
    const int pdim = 2 * p.n;
    const Complex c = std::conj(p.separation()) * std::conj(p.separation()) / 4.0;
    const ModeOperator ad = create_operator(pdim);
    FockVector v = fock_state(0, pdim);
    for (int i = 0; i < p.n; ++i) v = (ad * ad) * v + c * v;
    const double numerical = v.squaredNorm();
    out["normalization_closed_form"] = closed;
    out["normalization_numerical"] = numerical;
    out["normalization_relative_deviation"] = std::abs(closed - numerical) / numerical;

    out["fidelity_to_superposition"] = cat_fidelity(p, cutoff);

    const double exact = cat_probability_exact(p, bs);
    out["generation_probability_exact"] = exact;
    if (p.n >= 1) {
        const double asym = cat_probability_asymptotic(p.n, bs);
        out["generation_probability_asymptotic"] = asym;
        out["exact_to_asymptotic_ratio"] = exact / asym;
    } else {
        out["generation_probability_asymptotic"] = nullptr;
        out["exact_to_asymptotic_ratio"] = nullptr;
    }
    out["measurement_fidelity"] = measurement_fidelity(cat_measurement_scheme(p, bs));

    // Optional sweep along the matched-separation family (|delta|^2 = 4n,
    // symmetric real amplitudes) at the same beam splitter.
    if (job.contains("sweep_n")) {
        if (!job.at("sweep_n").is_array()) throw schema_error("sweep_n must be an array");
        Json sweep = Json::array();
        for (const auto& jn : job.at("sweep_n")) {
            if (!jn.is_number_integer() || jn.get<int>() < 1) {
                throw schema_error("sweep_n entries must be positive integers");
            }
            const int n = jn.get<int>();
            const double a = std::sqrt(static_cast<double>(n));
            const CatParams q{n, a, -a};
            Json row;
            row["n"] = n;
            row["exact"] = cat_probability_exact(q, bs);
            row["asymptotic"] = cat_probability_asymptotic(n, bs);
            row["ratio"] = row["exact"].get<double>() / row["asymptotic"].get<double>();
            sweep.push_back(row);
        }
        out["sweep"] = sweep;
    }
    return out;
}

inline Json run_sample(const Json& job, const JobOptions& opts) {
    const BeamSplitterParams bs = parse_bs(job);
    const TargetSpec spec = parse_target(job);
    const DensityMatrix parsed = parse_density(job);
    const std::int64_t shots =
        opts.shots ? *opts.shots : job.value<std::int64_t>("shots", 10000);
    if (shots < 1) throw schema_error("shots must be positive");
    const std::uint64_t seed =
        opts.seed ? *opts.seed : static_cast<std::uint64_t>(job.value("seed", 0));
    const int shards = job_int(job, "shards", 1);
    const int cutoff = effective_cutoff(
        job, opts,
        std::max<int>(static_cast<int>(parsed.rows()) - 1,
                      spec.photons + displacement_guard(spec.displacement)));
    if (cutoff + 1 < parsed.rows()) throw schema_error("cutoff below input dimension");
    DensityMatrix rho = DensityMatrix::Zero(cutoff + 1, cutoff + 1);
    rho.topLeftCorner(parsed.rows(), parsed.cols()) = parsed;

    const BuiltScheme built = build_scheme(job, opts, bs, spec);
    const OutcomeCounts counts = sample_outcomes(rho, built.scheme, shots, seed, shards, cutoff);
    const double p = joint_probability(rho, built.scheme);
    const double freq = counts.estimate();
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(shots));
    const double half = 1.96 * std::sqrt(std::max(freq * (1.0 - freq), 0.0) /
                                         static_cast<double>(shots));

    Json out;
    fill_scheme_json(out, built);
    out["cutoff"] = cutoff;
    out["shots"] = counts.shots;
    out["seed"] = counts.seed;
    out["shards"] = shards;
    out["coincidences"] = counts.coincidences;
    out["frequency"] = freq;
    out["joint_probability"] = p;
    out["sigma"] = sigma;
    out["ci95"] = Json::array({freq - half, freq + half});
    out["within_4_sigma"] = std::abs(freq - p) <= 4.0 * sigma;

    // Histograms with trailing empty bins dropped.
    auto trimmed = [](const std::vector<std::int64_t>& h) {
        size_t last = h.size();
        while (last > 1 && h[last - 1] == 0) --last;
        return std::vector<std::int64_t>(h.begin(), h.begin() + last);
    };
    Json stages = Json::array();
    for (const auto& h : counts.stage_histograms) stages.push_back(trimmed(h));
    out["stage_histograms"] = stages;
    out["final_histogram"] = trimmed(counts.final_histogram);
    out["shard_coincidences"] = counts.shard_coincidences;
    return out;
}

inline Json run_bs_element(const Json& job) {
    const BeamSplitterParams bs = parse_bs(job);
    std::vector<std::array<int, 4>> wanted;
    if (job.contains("elements")) {
        const Json& els = job.at("elements");
        if (!els.is_array()) throw schema_error("elements must be an array");
        for (const auto& e : els) {
            if (!e.is_array() || e.size() != 4) {
                throw schema_error("elements entries must be [m, q, n, p]");
            }
            std::array<int, 4> idx{};
            for (int i = 0; i < 4; ++i) {
                if (!e[i].is_number_integer() || e[i].get<int>() < 0) {
                    throw schema_error("element indices must be nonnegative integers");
                }
                idx[i] = e[i].get<int>();
            }
            if (idx[0] + idx[1] != idx[2] + idx[3]) {
                throw schema_error("element does not conserve the photon number");
            }
            wanted.push_back(idx);
        }
    } else if (job.contains("total")) {
        const int total = job_int(job, "total", 0);
        if (total < 0) throw schema_error("total must be nonnegative");
        for (int q = 0; q <= total; ++q) {
            for (int p = 0; p <= total; ++p) {
                wanted.push_back({total - q, q, total - p, p});
            }
        }
    } else {
        throw schema_error("bs-element needs elements or total");
    }

    // Group by sector so each block is built once.
    Json rows = Json::array();
    std::vector<std::pair<int, TwoModeBlock>> cache;
    for (const auto& idx : wanted) {
        const int total = idx[0] + idx[1];
        const TwoModeBlock* block = nullptr;
        for (const auto& kv : cache) {
            if (kv.first == total) block = &kv.second;
        }
        if (block == nullptr) {
            cache.emplace_back(total, bs_unitary_block(bs, total));
            block = &cache.back().second;
        }
        Json row;
        row["m"] = idx[0];
        row["q"] = idx[1];
        row["n"] = idx[2];
        row["p"] = idx[3];
        row["value"] = complex_json(block->matrix(idx[1], idx[3]));
        rows.push_back(row);
    }
    Json out;
    out["elements"] = rows;
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic serialization
// ---------------------------------------------------------------------------

inline std::string format_number(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline bool flat_array(const Json& j) {
    for (const auto& e : j) {
        if (e.is_array() || e.is_object()) return false;
    }
    return true;
}

inline void dump_json(const Json& j, std::string& out, int depth) {
    const std::string pad(2 * depth, ' ');
    const std::string pad_in(2 * (depth + 1), ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in + Json(it.key()).dump() + ": ";
                dump_json(it.value(), out, depth + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            if (flat_array(j)) {
                out += "[";
                bool first = true;
                for (const auto& e : j) {
                    if (!first) out += ", ";
                    first = false;
                    dump_json(e, out, depth);
                }
                out += "]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump_json(e, out, depth + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case Json::value_t::number_float:
            out += format_number(j.get<double>());
            return;
        default:
            out += j.dump();
            return;
    }
}

}  // namespace detail

// Renders a report with fixed key order and floats printed via %.17g, so a
// given job is byte-identical across runs and platforms with IEEE doubles.
inline std::string dump_report(const Json& report) {
    std::string out;
    detail::dump_json(report, out, 0);
    out += "\n";
    return out;
}

// CSV view of a report's tabular section, for the --csv flag.  Columns vary
// by command; empty when the command has no table.
inline std::string report_csv(const Json& full) {
    using detail::format_number;
    const std::string cmd = full.value("command", "");
    const Json& rep = full.at("report");
    std::string out;
    auto c2 = [&](const Json& z) {
        return format_number(z[0].get<double>()) + "," + format_number(z[1].get<double>());
    };
    if (cmd == "synthesize") {
        out = "stage,root_re,root_im,multiplicity,displacement_re,displacement_im\n";
        out += "0,,,," + c2(rep.at("displacements")[0]) + "\n";
        for (size_t k = 0; k < rep.at("roots").size(); ++k) {
            out += std::to_string(k + 1) + "," + c2(rep.at("roots")[k]) + "," +
                   rep.at("multiplicities")[k].dump() + "," +
                   c2(rep.at("displacements")[k + 1]) + "\n";
        }
    } else if (cmd == "overlap") {
        out = "stage,alpha_re,alpha_im,multiplicity\n";
        for (size_t k = 0; k < rep.at("stage_amplitudes").size(); ++k) {
            out += std::to_string(k + 1) + "," + c2(rep.at("stage_amplitudes")[k]) + "," +
                   rep.at("multiplicities")[k].dump() + "\n";
        }
    } else if (cmd == "cat") {
        out = "n,exact,asymptotic,ratio\n";
        if (rep.contains("sweep")) {
            for (const auto& row : rep.at("sweep")) {
                out += row.at("n").dump() + "," +
                       format_number(row.at("exact").get<double>()) + "," +
                       format_number(row.at("asymptotic").get<double>()) + "," +
                       format_number(row.at("ratio").get<double>()) + "\n";
            }
        } else if (rep.at("generation_probability_asymptotic").is_number()) {
            out += rep.at("n").dump() + "," +
                   format_number(rep.at("generation_probability_exact").get<double>()) + "," +
                   format_number(rep.at("generation_probability_asymptotic").get<double>()) +
                   "," + format_number(rep.at("exact_to_asymptotic_ratio").get<double>()) + "\n";
        }
    } else if (cmd == "sample") {
        out = "detector,outcome,count\n";
        const Json& stages = rep.at("stage_histograms");
        for (size_t k = 0; k < stages.size(); ++k) {
            for (size_t q = 0; q < stages[k].size(); ++q) {
                out += "stage" + std::to_string(k + 1) + "," + std::to_string(q) + "," +
                       stages[k][q].dump() + "\n";
            }
        }
        const Json& fin = rep.at("final_histogram");
        for (size_t n = 0; n < fin.size(); ++n) {
            out += "final," + std::to_string(n) + "," + fin[n].dump() + "\n";
        }
    } else if (cmd == "bs-element") {
        out = "m,q,n,p,re,im\n";
        for (const auto& row : rep.at("elements")) {
            out += row.at("m").dump() + "," + row.at("q").dump() + "," + row.at("n").dump() +
                   "," + row.at("p").dump() + "," + c2(row.at("value")) + "\n";
        }
    }
    return out;
}

// Runs one job document.  Never throws: schema problems come back as exit
// code 2, numerical failures as 3, with the diagnostic in the report.
inline JobResult run_job(const Json& job, const JobOptions& opts = {}) {
    JobResult res;
    res.report["version"] = version_string;
    std::string command;
    try {
        if (!job.is_object()) throw detail::schema_error("job must be an object");
        if (!job.contains("command") || !job.at("command").is_string()) {
            throw detail::schema_error("missing command");
        }
        command = job.at("command").get<std::string>();
        res.report["command"] = command;
        res.report["input"] = job;
        if (command == "synthesize") {
            res.report["report"] = detail::run_synthesize(job, opts);
        } else if (command == "overlap") {
            res.report["report"] = detail::run_overlap(job, opts);
        } else if (command == "cat") {
            res.report["report"] = detail::run_cat(job, opts);
        } else if (command == "sample") {
            res.report["report"] = detail::run_sample(job, opts);
        } else if (command == "bs-element") {
            res.report["report"] = detail::run_bs_element(job);
        } else {
            throw detail::schema_error("unknown command: " + command);
        }
    } catch (const NumericError& e) {
        res.report["error"] = e.what();
        res.exit_code = 3;
    } catch (const std::invalid_argument& e) {
        res.report["error"] = e.what();
        res.exit_code = 2;
    } catch (const Json::exception& e) {
        res.report["error"] = std::string("job schema: ") + e.what();
        res.exit_code = 2;
    }
    return res;
}

}  // namespace fockbs
