#ifndef APLICUR_BOUNDS_HPP
#define APLICUR_BOUNDS_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"

namespace aplicur {

/// Sorted singular values with a split index and the derived cluster
/// quantities driving the two-interval convergence factor.
struct SpectrumSummary {
  std::vector<double> sigma; // nonincreasing, positive
  Index split = 0;           // l: sigma[0..l) is the leading cluster

  double kappa() const { return sigma.front() / sigma.back(); }
  double kappa_trailing() const {
    return sigma[static_cast<std::size_t>(split)] / sigma.back();
  }
  double width_leading() const {
    double s1 = sigma.front(), sl = sigma[static_cast<std::size_t>(split - 1)];
    return s1 * s1 - sl * sl;
  }
  double width_trailing() const {
    double sl1 = sigma[static_cast<std::size_t>(split)], sn = sigma.back();
    return sl1 * sl1 - sn * sn;
  }
  double width() const { return std::max(width_leading(), width_trailing()); }

  static SpectrumSummary make(std::vector<double> sigma, Index split) {
    detail::require(split >= 1 && split < static_cast<Index>(sigma.size()),
                    ErrorKind::invalid_argument, "SpectrumSummary: split out of range");
    for (std::size_t i = 0; i < sigma.size(); ++i) {
      detail::require(sigma[i] > 0.0, ErrorKind::invalid_argument,
                      "SpectrumSummary: nonpositive singular value");
      if (i > 0)
        detail::require(sigma[i] <= sigma[i - 1], ErrorKind::invalid_argument,
                        "SpectrumSummary: not nonincreasing");
    }
    return {std::move(sigma), split};
  }
};

/// Chebyshev residual-reduction factor 2 ((k-1)/(k+1))^k for a single-interval
/// spectrum of condition number kappa.
inline double chebyshev_bound(double kappa, Index k) {
  detail::require(kappa >= 1.0 && k >= 0, ErrorKind::invalid_argument,
                  "chebyshev_bound: kappa >= 1 and k >= 0 required");
  return 2.0 * std::pow((kappa - 1.0) / (kappa + 1.0), static_cast<double>(k));
}

/// Internals of the two-interval factor, exposed for test inspection: the
/// equal-width interval endpoints, the width imbalance eta, and both the
/// stated constant and the sharper one the construction actually yields.
struct TwoIntervalDebug {
  double a = 0, b = 0, c = 0, d = 0;
  double w = 0;
  double eta = 0;
  double c_stated = 0;  // kappa_{l+1}^2 + w / sigma_n^2
  double c_sharper = 0; // kappa_{l+1}^2 + max(2 eps / sigma_n^2, kappa_{l+1}^2 - 1)
};

/// Convergence factor ((sqrt(C)-1)/(sqrt(C)+1))^{floor(k/2)} for spectra whose
/// squared singular values split into two disjoint clusters, with
/// C = kappa_{l+1}^2 + w / sigma_n^2.
inline double two_interval_bound(const SpectrumSummary& spec, Index k,
                                 TwoIntervalDebug* dbg = nullptr) {
  detail::require(k >= 0, ErrorKind::invalid_argument, "two_interval_bound: k >= 0");
  double sl = spec.sigma[static_cast<std::size_t>(spec.split - 1)];
  double sl1 = spec.sigma[static_cast<std::size_t>(spec.split)];
  detail::require(sl > sl1, ErrorKind::not_applicable,
                  "two_interval_bound: clusters overlap (sigma_l <= sigma_{l+1})");
  double sn = spec.sigma.back();
  double w = spec.width();
  double kt = spec.kappa_trailing();
  double cconst = kt * kt + w / (sn * sn);
  if (dbg) {
    double w1 = spec.width_leading(), w2 = spec.width_trailing();
    dbg->a = sn * sn;
    dbg->b = sn * sn + w;
    dbg->c = sl * sl;
    dbg->d = sl * sl + w;
    dbg->w = w;
    dbg->eta = std::fabs(w1 - w2);
    dbg->c_stated = cconst;
    double eps_half = w1 / 2.0; // leading cluster written as sigma_hat^2 +- eps
    dbg->c_sharper = kt * kt + std::max(2.0 * eps_half / (sn * sn), kt * kt - 1.0);
  }
  double rc = std::sqrt(cconst);
  double base = (rc - 1.0) / (rc + 1.0);
  return std::pow(base, static_cast<double>(k / 2));
}

/// Condition-number bound (sqrt(sigma_hat^2 + mu^2) + ||E||) / (mu - ||E||)
/// for the preconditioned augmented system; applicable only while ||E|| < mu.
inline double cond_number_bound(double sigma_hat, double mu, double norm_e) {
  detail::require(norm_e >= 0.0 && sigma_hat >= 0.0, ErrorKind::invalid_argument,
                  "cond_number_bound: negative input");
  detail::require(norm_e < mu, ErrorKind::not_applicable,
                  "cond_number_bound: requires ||E|| < mu");
  return (std::sqrt(sigma_hat * sigma_hat + mu * mu) + norm_e) / (mu - norm_e);
}

struct PhaseBoundTerm {
  double norm_e = 0.0;    // approximation error during the phase
  double sigma_hat = 0.0; // target level of the phase's preconditioner
  Index iters = 0;        // LSQR iterations run in the phase
};

/// Multi-phase residual-reduction factor
///   2^p prod_i (1 - 2 (mu - ||E_i||) / (mu + sqrt(sigma_hat_i^2 + mu^2)))^{k_i}.
inline double multiphase_bound(std::span<const PhaseBoundTerm> phases, double mu) {
  double f = 1.0;
  for (const auto& ph : phases) {
    detail::require(ph.norm_e < mu, ErrorKind::not_applicable,
                    "multiphase_bound: requires ||E_i|| < mu in every phase");
    double base =
        1.0 - 2.0 * (mu - ph.norm_e) / (mu + std::sqrt(ph.sigma_hat * ph.sigma_hat + mu * mu));
    f *= 2.0 * std::pow(base, static_cast<double>(ph.iters));
  }
  return f;
}

struct CurExistenceFactors {
  double frob = 0.0;
  double spectral = 0.0;
};

/// Worst-case quality factors of a rank-l cross approximation relative to the
/// best rank-l approximation: l+1 in Frobenius norm and
/// sqrt(1 + l (l+2) (min(m,n) - l)) in spectral norm.
inline CurExistenceFactors cur_existence_bounds(Index l, Index m, Index n) {
  detail::require(l >= 1 && l <= std::min(m, n), ErrorKind::invalid_argument,
                  "cur_existence_bounds: need 1 <= l <= min(m, n)");
  double ld = static_cast<double>(l);
  double rest = static_cast<double>(std::min(m, n) - l);
  return {ld + 1.0, std::sqrt(1.0 + ld * (ld + 2.0) * rest)};
}

} // namespace aplicur

#endif
