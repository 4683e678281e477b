#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "fockbs/fock.hpp"
#include "oracles.hpp"

using namespace fockbs;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("make_state keeps amplitudes and normalizes on request") {
    const FockVector v = make_state({{1.0, 0.0}, {0.0, 2.0}});
    REQUIRE(v.size() == 2);
    CHECK(v[1] == Complex(0.0, 2.0));

    const FockVector n = make_state({{3.0, 0.0}, {0.0, 4.0}}, true);
    CHECK_THAT(n.norm(), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK_THAT(std::abs(n[1]), Catch::Matchers::WithinAbs(0.8, 1e-15));

    CHECK_THROWS_WITH(make_state({{0.0, 0.0}, {0.0, 0.0}}, true), ContainsSubstring("null state"));
    CHECK_THROWS_AS(make_state({}), std::invalid_argument);
}

TEST_CASE("fock_state places a single unit amplitude") {
    const FockVector v = fock_state(3, 6);
    REQUIRE(v.size() == 7);
    CHECK(v[3] == Complex(1.0));
    CHECK(v.squaredNorm() == 1.0);
    CHECK_THROWS_AS(fock_state(4, 3), std::invalid_argument);
}

TEST_CASE("coherent state amplitudes and truncation weight") {
    const FockVector v = coherent_state(1.0, 30);
    CHECK_THAT(std::real(v[0]), Catch::Matchers::WithinAbs(std::exp(-0.5), 1e-15));
    CHECK_THAT(std::real(v[2]), Catch::Matchers::WithinAbs(std::exp(-0.5) / std::sqrt(2.0), 1e-15));
    CHECK_THAT(v.squaredNorm(), Catch::Matchers::WithinAbs(1.0, 1e-12));

    // Closed-form pairwise overlap exp(-(|a|^2+|b|^2)/2 + conj(a) b).
    const Complex a(0.7, -0.3), b(-0.2, 1.1);
    const Complex got = overlap(coherent_state(a, 60), coherent_state(b, 60));
    const Complex want = std::exp(-0.5 * (std::norm(a) + std::norm(b)) + std::conj(a) * b);
    CHECK(std::abs(got - want) < 1e-13);

    // Leakage complements the kept weight and grows with |alpha|.
    CHECK_THAT(coherent_leakage(1.0, 30) + coherent_state(1.0, 30).squaredNorm(),
               Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK(coherent_leakage(3.0, 10) > coherent_leakage(1.0, 10));
    CHECK(coherent_leakage(0.0, 5) == 0.0);
}

TEST_CASE("ladder and attenuation operators") {
    const ModeOperator ad = create_operator(5);
    CHECK(std::real(ad(3, 2)) == std::sqrt(3.0));
    CHECK(ad(2, 3) == Complex(0.0));
    const ModeOperator a = annihilate_operator(5);
    CHECK(std::real(a(2, 3)) == std::sqrt(3.0));

    // Number operator from the ladder pair.
    const ModeOperator num = ad * a;
    for (int n = 0; n <= 5; ++n) {
        CHECK_THAT(std::real(num(n, n)), Catch::Matchers::WithinAbs(n, 1e-13));
    }

    const ModeOperator t = attenuation_operator(Complex(0.0, 0.5), 4);
    CHECK(t(2, 2) == Complex(-0.25, 0.0));
    CHECK_THROWS_WITH(attenuation_operator(0.0, 4), ContainsSubstring("singular attenuation"));
}

TEST_CASE("displacement elements match 40-digit reference values") {
    // <m|D(alpha)|n> = sqrt(n!/m!) alpha^(m-n) e^{-|alpha|^2/2} L_n^{(m-n)}(|alpha|^2),
    // evaluated with 40-digit arithmetic and frozen here.
    const Complex a1 = 2.9 * std::polar(1.0, 0.7);
    const ModeOperator d1 = displacement_operator(a1, 60);
    CHECK(std::abs(d1(59, 59) - Complex(0.11512327448898754, 0.0)) < 1e-13);
    CHECK(std::abs(d1(30, 10) - Complex(0.0032163100705558075, 0.023300901216560952)) < 1e-13);
    CHECK(std::abs(d1(12, 34) - Complex(-0.049818017617072118, -0.015846276734995436)) < 1e-13);

    const Complex a2(0.8, -1.1);
    const ModeOperator d2 = displacement_operator(a2, 30);
    CHECK(std::abs(d2(5, 0) - Complex(-0.00040252398953573598, 0.16850588115538752)) < 1e-14);
    CHECK(std::abs(d2(17, 3) - Complex(0.0014172754419363646, -0.0010152972325517261)) < 1e-14);
    CHECK(std::abs(d2(2, 25) - Complex(4.0728307313571769e-8, -1.3730008204044716e-8)) < 1e-14);
}

TEST_CASE("displacement is unitary and inverts by negation") {
    const Complex alpha(1.2, 0.9);
    const ModeOperator d = displacement_operator(alpha, 45);
    const ModeOperator dinv = displacement_operator(-alpha, 45);
    // The cropped blocks are not exactly unitary, but products whose
    // intermediate states stay well below the cutoff reproduce the identity.
    const ModeOperator prod = dinv * d;
    CHECK((prod.topLeftCorner(12, 12) - ModeOperator::Identity(12, 12)).cwiseAbs().maxCoeff() <
          1e-10);
    CHECK((d.adjoint().topLeftCorner(20, 20) - dinv.topLeftCorner(20, 20)).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("displacement column zero is the coherent expansion") {
    const Complex alpha(1.3, -0.4);
    const ModeOperator d = displacement_operator(alpha, 40);
    const FockVector coh = coherent_state(alpha, 40);
    CHECK((d.col(0) - coh).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("displacement composes: D(a) applied to |b> gives |a+b> up to phase") {
    const Complex a(0.6, 0.2), b(-0.3, 0.5);
    const int cutoff = 50;
    const FockVector got = displacement_operator(a, cutoff) * coherent_state(b, cutoff);
    const Complex phase = std::exp(Complex(0, 1) * std::imag(a * std::conj(b)));
    const FockVector want = phase * coherent_state(a + b, cutoff);
    CHECK((got.head(30) - want.head(30)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("overlap pads the shorter vector") {
    const FockVector a = make_state({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.0}});
    const FockVector b = make_state({{0.0, 1.0}, {2.0, 0.0}});
    // conj(1)*i + conj(i)*2 = i - 2i = -i ... careful: dot conjugates left.
    CHECK(std::abs(overlap(a, b) - (std::conj(Complex(0, 1)) * Complex(2, 0) + Complex(0, 1))) <
          1e-15);
    CHECK(overlap(a, a).real() == Catch::Approx(a.squaredNorm()));
}

TEST_CASE("fidelity against pure and mixed states") {
    const FockVector psi = make_state({{1.0, 0.0}, {1.0, 0.0}}, true);
    const FockVector phi = make_state({{1.0, 0.0}, {-1.0, 0.0}}, true);
    CHECK(fidelity(psi, phi) == Catch::Approx(0.0).margin(1e-15));
    CHECK(fidelity(psi, psi) == Catch::Approx(1.0));

    DensityMatrix rho = 0.25 * density_from(psi) + 0.75 * density_from(phi);
    CHECK(fidelity(psi, rho) == Catch::Approx(0.25));
    CHECK(is_valid_density(rho));

    DensityMatrix bad = rho;
    bad(0, 1) += Complex(0.0, 0.4);  // breaks Hermiticity
    CHECK_FALSE(is_valid_density(bad));
    const DensityMatrix negated = -rho;
    CHECK_THROWS_AS(fidelity(psi, negated), NumericError);
}
