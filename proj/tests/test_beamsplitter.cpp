#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "fockbs/beamsplitter.hpp"
#include "oracles.hpp"

using namespace fockbs;
using Catch::Matchers::ContainsSubstring;

namespace {
const BeamSplitterParams half = BeamSplitterParams::from_angles(M_PI / 4);
}

TEST_CASE("beam splitter parameter validation") {
    CHECK_NOTHROW(BeamSplitterParams(std::polar(0.6, 1.0), std::polar(0.8, -2.0)));
    CHECK_THROWS_AS(BeamSplitterParams(0.6, 0.7), std::invalid_argument);
    const auto bs = BeamSplitterParams::from_angles(0.3, 0.1, 0.2);
    CHECK_THAT(bs.transmittance_sq() + bs.reflectance_sq(),
               Catch::Matchers::WithinAbs(1.0, 1e-14));
    CHECK_THAT(std::arg(bs.t), Catch::Matchers::WithinAbs(0.1, 1e-14));
}

TEST_CASE("ordering parameter") {
    CHECK_THAT(ordering_parameter(half), Catch::Matchers::WithinAbs(3.0, 1e-12));
    // s = 1 at full reflection: the conditional operators become normally
    // ordered; s diverges (and is rejected) for a transparent splitter.
    CHECK_THAT(ordering_parameter(BeamSplitterParams::from_angles(M_PI / 2)),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THROWS_WITH(ordering_parameter(BeamSplitterParams::from_angles(0.0)),
                      ContainsSubstring("no reflection: s undefined"));
}

TEST_CASE("single-photon sector block") {
    const Complex t = std::polar(0.8, 0.5), r = std::polar(0.6, -1.1);
    const TwoModeBlock blk = bs_unitary_block(BeamSplitterParams(t, r), 1);
    REQUIRE(blk.matrix.rows() == 2);
    CHECK(std::abs(blk.matrix(0, 0) - t) < 1e-15);
    CHECK(std::abs(blk.matrix(0, 1) - r) < 1e-15);
    CHECK(std::abs(blk.matrix(1, 0) + std::conj(r)) < 1e-15);
    CHECK(std::abs(blk.matrix(1, 1) - std::conj(t)) < 1e-15);

    const TwoModeBlock zero = bs_unitary_block(half, 0);
    CHECK(zero.matrix(0, 0) == Complex(1.0));
}

TEST_CASE("sector blocks match the factored exponential form") {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 6; ++trial) {
        const auto d = oracles::random_bs(rng, 0.4, 0.9);
        const int total = 3 + static_cast<int>(rng() % 15);
        const ModeOperator got = bs_unitary_block(BeamSplitterParams(d.t, d.r), total).matrix;
        const ModeOperator ref = oracles::bs_block_factored(d.t, d.r, total);
        worst = std::max(worst, (got - ref).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("assembly recursion agrees with the Euler-form sector unitary") {
    // conditional_operator assembles states from detail::signal_blocks; tie
    // those to the exactly unitary route on the depths the assembly sees.
    const auto bs = BeamSplitterParams(std::polar(std::sqrt(0.45), -1.3),
                                       std::polar(std::sqrt(0.55), 0.8));
    const auto rec = detail::signal_blocks(bs, 40);
    for (int total : {1, 7, 23, 40}) {
        const ModeOperator euler = bs_unitary_block(bs, total).matrix;
        double worst = 0.0;
        for (int i = 0; i <= total; ++i)
            for (int j = 0; j <= total; ++j)
                worst = std::max(worst,
                                 std::abs(euler(i, j) - rec[total](total - i, total - j)));
        CHECK(worst < 1e-11);
    }
}

TEST_CASE("sector blocks stay unitary in deep sectors") {
    const auto bs = BeamSplitterParams(std::polar(std::sqrt(0.3), 2.0),
                                       std::polar(std::sqrt(0.7), -0.4));
    const ModeOperator b = bs_unitary_block(bs, 100).matrix;
    const ModeOperator gram = b.adjoint() * b;
    CHECK((gram - ModeOperator::Identity(101, 101)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conditional operator anchor forms") {
    const Complex t = std::polar(std::sqrt(0.62), 0.9), r = std::polar(std::sqrt(0.38), -0.3);
    const BeamSplitterParams bs(t, r);
    const int cutoff = 12;
    const ModeOperator tn = attenuation_operator(t, cutoff);
    const ModeOperator ad = create_operator(cutoff);
    const ModeOperator a = annihilate_operator(cutoff);

    // Vacuum in, vacuum detected: pure attenuation t^n.
    const ModeOperator y00 = conditional_operator(fock_state(0, 0), fock_state(0, 0), bs, cutoff);
    CHECK((y00 - tn).cwiseAbs().maxCoeff() < 1e-14);

    // One photon in, vacuum detected: the photon is added, r a^dag t^n.
    const ModeOperator y10 = conditional_operator(fock_state(1, 1), fock_state(0, 0), bs, cutoff);
    CHECK((y10 - r * ad * tn).cwiseAbs().maxCoeff() < 1e-13);

    // Vacuum in, one photon detected: a photon is removed, -conj(r) t^n a.
    const ModeOperator y01 = conditional_operator(fock_state(0, 0), fock_state(1, 1), bs, cutoff);
    CHECK((y01 + std::conj(r) * tn * a).cwiseAbs().maxCoeff() < 1e-13);

    // d photons in, vacuum detected: (r a^dag)^d / sqrt(d!) t^n.
    const ModeOperator y30 = conditional_operator(fock_state(3, 3), fock_state(0, 0), bs, cutoff);
    const ModeOperator want30 = std::pow(r, 3) / std::sqrt(6.0) * ad * ad * ad * tn;
    CHECK((y30 - want30).cwiseAbs().maxCoeff() < 1e-12);

    // Vacuum in, d photons detected: (-conj(r))^d / sqrt(d!) t^n a^d.
    const ModeOperator y02 = conditional_operator(fock_state(0, 0), fock_state(2, 2), bs, cutoff);
    const ModeOperator want02 = std::pow(-std::conj(r), 2) / std::sqrt(2.0) * tn * a * a;
    CHECK((y02 - want02).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conditional operator is linear in superposed reference states") {
    const BeamSplitterParams bs = BeamSplitterParams::from_angles(0.7, 0.2, -0.5);
    const int cutoff = 9;
    const FockVector in = make_state({{0.6, 0.1}, {0.0, 0.0}, {-0.3, 0.7}});
    const FockVector out = make_state({{0.2, 0.0}, {0.9, -0.4}});
    ModeOperator want = ModeOperator::Zero(cutoff + 1, cutoff + 1);
    for (int p = 0; p < in.size(); ++p) {
        for (int q = 0; q < out.size(); ++q) {
            want += std::conj(out[q]) * in[p] *
                    conditional_operator(fock_state(p, p), fock_state(q, q), bs, cutoff);
        }
    }
    const ModeOperator got = conditional_operator(in, out, bs, cutoff);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("displaced reference states absorb into signal displacements") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        const auto d = oracles::random_bs(rng, 0.35, 0.85);
        const BeamSplitterParams bs(d.t, d.r);
        const Complex alpha = oracles::random_point(rng, 1.0);
        const Complex beta = oracles::random_point(rng, 1.0);
        const int nf = static_cast<int>(rng() % 3), ng = static_cast<int>(rng() % 3);
        const int cutoff = 10, ref_cut = 26;

        const FockVector df = displacement_operator(alpha, ref_cut) * fock_state(nf, ref_cut);
        const FockVector dg = displacement_operator(beta, ref_cut) * fock_state(ng, ref_cut);
        const ModeOperator direct = conditional_operator(df, dg, bs, cutoff);
        const ModeOperator absorbed =
            displaced_conditional(alpha, beta, fock_state(nf, nf), fock_state(ng, ng), bs, cutoff);
        CHECK((direct - absorbed).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK_THROWS_WITH(displaced_conditional(1.0, 0.0, fock_state(0, 0), fock_state(0, 0),
                                            BeamSplitterParams::from_angles(0.0), 5),
                      ContainsSubstring("displacement absorption undefined"));
}

TEST_CASE("chain applies stages in listed order") {
    const ModeOperator ad = create_operator(6);
    const ModeOperator a = annihilate_operator(6);
    const ModeOperator first_ad = chain({ad, a});
    CHECK((first_ad - a * ad).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((chain({a, ad}) - ad * a).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(chain({ad, create_operator(4)}), std::invalid_argument);
    CHECK_THROWS_AS(chain({}), std::invalid_argument);
}

TEST_CASE("heralded state update and probability") {
    const Complex t = std::sqrt(0.7), r = std::sqrt(0.3);
    const BeamSplitterParams bs(t, r);
    const int cutoff = 8;
    const ModeOperator y10 = conditional_operator(fock_state(1, 1), fock_state(0, 0), bs, cutoff);

    const DensityMatrix rho = density_from(fock_state(1, cutoff));
    const auto [post, p] = apply_conditional(rho, y10);
    // |1> -> r a^dag t^n |1> = r t sqrt(2) |2>, so p = 2 |r t|^2.
    CHECK_THAT(p, Catch::Matchers::WithinRel(2.0 * 0.3 * 0.7, 1e-12));
    CHECK_THAT(std::real(post(2, 2)), Catch::Matchers::WithinAbs(1.0, 1e-12));

    const auto [vec, pv] = apply_conditional(fock_state(1, cutoff), y10);
    CHECK_THAT(pv, Catch::Matchers::WithinRel(p, 1e-12));
    CHECK_THAT(std::abs(vec[2]), Catch::Matchers::WithinAbs(1.0, 1e-12));

    CHECK_THROWS_WITH(apply_conditional(fock_state(0, cutoff), annihilate_operator(cutoff)),
                      ContainsSubstring("event has zero probability"));
}
