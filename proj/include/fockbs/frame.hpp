#pragma once
// Exact evaluation of displacement / attenuation / photon-addition chains.
//
// Multiplying truncated matrices fails for these chains in two ways: the
// intermediate coherent amplitude can wander far above any affordable cutoff,
// and heralding probabilities reach the 1e-300 range where every digit of the
// tiny final amplitudes is cancellation noise.  Instead, the running state is
// kept in the factored form
//     e^{log_mag + i phase} . D(g) . |poly>
// where |poly> has finite photon support (it only grows by one per photon
// addition).  Each chain element maps exactly onto this form:
//     D(a)  D(g) = e^{i Im(a conj(g))} D(a + g)
//     t^n   D(g) = e^{-(1-|t|^2)|g|^2/2} D(t g) e^{lam a} t^n,
//                  lam = -conj(g)(1-|t|^2)/t
//     a^dag D(g) = D(g) (a^dag + conj(g))
// and e^{lam a} on a finite-support vector is a terminating sum, so the only
// approximation in the whole chain is the final projection onto a cutoff.

#include <cmath>
#include <complex>

#include "fockbs/fock.hpp"

namespace fockbs::detail {

class DisplacedFrame {
  public:
    // `capacity` bounds the photon support of the polynomial part, i.e. the
    // number of photon additions that will be applied over the chain.
    explicit DisplacedFrame(int capacity) : phi_(Eigen::VectorXcd::Zero(capacity + 1)) {
        phi_[0] = 1.0;
    }

    void scale(Complex c) {
        require(std::abs(c) > 0.0, "DisplacedFrame: scaling by zero");
        log_mag_ += std::log(std::abs(c));
        phase_ += std::arg(c);
    }

    void scale_log(double log_abs, double phase) {
        log_mag_ += log_abs;
        phase_ += phase;
    }

    void displace(Complex a) {
        phase_ += std::imag(a * std::conj(g_));
        g_ += a;
    }

    void attenuate(Complex t) {
        const double t2 = std::norm(t);
        if (!(std::abs(t) > 0.0)) throw std::invalid_argument("singular attenuation");
        const double r2 = 1.0 - t2;
        const Complex lam = -std::conj(g_) * r2 / t;
        log_mag_ += -0.5 * r2 * std::norm(g_);
        // t^n on the polynomial part, then the terminating e^{lam a} series.
        Complex tn = 1.0;
        for (int n = 0; n <= hi_; ++n) {
            phi_[n] *= tn;
            tn *= t;
        }
        apply_exp_annihilate(lam);
        g_ *= t;
    }

    // Applies (a^dag + conj(g)); the +conj(g) term is the displaced-frame
    // image of a bare creation operator.
    void add_photon() {
        require(hi_ + 1 < phi_.size(), "DisplacedFrame: capacity exceeded");
        const Complex gc = std::conj(g_);
        for (int n = hi_ + 1; n >= 1; --n) {
            phi_[n] = std::sqrt(static_cast<double>(n)) * phi_[n - 1] + gc * phi_[n];
        }
        phi_[0] *= gc;
        ++hi_;
    }

    // Applies (a + g), the displaced-frame image of an annihilation operator.
    // Support does not grow, but the degree may drop.
    void remove_photon() {
        for (int n = 0; n < hi_; ++n) {
            phi_[n] = std::sqrt(static_cast<double>(n + 1)) * phi_[n + 1] + g_ * phi_[n];
        }
        phi_[hi_] *= g_;
    }

    Complex displacement() const { return g_; }
    int support() const { return hi_; }

    // log of the exact squared norm of the represented state; D(g) is
    // unitary, so only the scalar and the polynomial part contribute.
    double log_norm_sq() const {
        const double nrm2 = phi_.head(hi_ + 1).squaredNorm();
        if (!(nrm2 > 0.0)) throw NumericError("event has zero probability");
        return 2.0 * log_mag_ + std::log(nrm2);
    }

    // Number-basis amplitudes up to `cutoff`.  D(g) = e^{-|g|^2/2} e^{g a^dag}
    // e^{-conj(g) a}; the annihilation series terminates on the polynomial
    // part and the creation series is summed per output index in log space,
    // so large |g| neither overflows nor loses the tiny-amplitude regime.
    // `log_shift` rescales the result by e^{-log_shift}; callers that only
    // need the state's direction pass log_norm_sq()/2 so the amplitudes stay
    // representable even when the heralding probability itself underflows.
    FockVector materialize(int cutoff, double log_shift = 0.0) const {
        require(cutoff >= 0, "DisplacedFrame: negative cutoff");
        FockVector out = FockVector::Zero(cutoff + 1);
        const double ga = std::abs(g_);
        if (ga == 0.0) {
            const Complex s = std::polar(std::exp(log_mag_ - log_shift), phase_);
            for (int m = 0; m <= std::min(cutoff, hi_); ++m) out[m] = s * phi_[m];
            return out;
        }
        // w = e^{-conj(g) a} |poly>, exact terminating series.
        Eigen::VectorXcd w = phi_.head(hi_ + 1);
        Eigen::VectorXcd cur = w;
        for (int k = 1; k <= hi_; ++k) {
            for (int n = 0; n + k <= hi_; ++n) {
                cur[n] = std::sqrt(static_cast<double>(n + 1)) * cur[n + 1];
            }
            cur.conservativeResize(hi_ + 1 - k);
            cur *= -std::conj(g_) / static_cast<double>(k);
            w.head(hi_ + 1 - k) += cur;
        }
        const double log_ga = std::log(ga);
        const double arg_g = std::arg(g_);
        for (int m = 0; m <= cutoff; ++m) {
            Complex acc = 0.0;
            for (int j = 0; j <= std::min(m, hi_); ++j) {
                const int k = m - j;
                const double lm = log_mag_ - log_shift - 0.5 * ga * ga + k * log_ga +
                                  0.5 * (std::lgamma(m + 1.0) - std::lgamma(j + 1.0)) -
                                  std::lgamma(k + 1.0);
                acc += std::exp(lm) * std::polar(1.0, arg_g * k + phase_) * w[j];
            }
            out[m] = acc;
        }
        return out;
    }

  private:
    void apply_exp_annihilate(Complex lam) {
        if (lam == Complex(0.0) || hi_ == 0) return;
        Eigen::VectorXcd cur = phi_.head(hi_ + 1);
        for (int k = 1; k <= hi_; ++k) {
            for (int n = 0; n + k <= hi_; ++n) {
                cur[n] = std::sqrt(static_cast<double>(n + 1)) * cur[n + 1];
            }
            cur.conservativeResize(hi_ + 1 - k);
            cur *= lam / static_cast<double>(k);
            phi_.head(hi_ + 1 - k) += cur;
        }
    }

    double log_mag_ = 0.0;
    double phase_ = 0.0;
    Complex g_ = 0.0;
    Eigen::VectorXcd phi_;
    int hi_ = 0;
};

}  // namespace fockbs::detail
