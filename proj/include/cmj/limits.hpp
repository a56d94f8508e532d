#ifndef CMJ_LIMITS_HPP
#define CMJ_LIMITS_HPP

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "cmj/offspring.hpp"
#include "cmj/spectral.hpp"

namespace cmj {

/// Finitely supported coefficients indexed by integer lag (negative lags
/// look into the future). Read either as a statistic sum_k a_k X_{n,k} or,
/// for the inner-product routines, as the Laurent polynomial sum_k a_k z^k.
using CoeffVector = std::map<int, double>;

inline CoeffVector unit_lag(int k) { return {{k, 1.0}}; }

/// Laurent polynomial sum_k c_k z^k.
Complex evaluate(const CoeffVector& c, Complex z);

/// Symbol of sum_k a_k zeta_k: sum_k a_k z^k - sum_k a_k m^{-k}.
CoeffVector centered_symbol(const CoeffVector& a, double m);

enum class SpectrumKind { Circle, Atoms };

/// Covariance-generating measure of the Gaussian limit. Both forms are
/// stored as nodes and weights so that integral f dnu = sum_j w_j f(z_j):
/// the circle form holds M trapezoid nodes on |z| = m^{-1/2} with
/// w_j = density_j / M, the atom form holds the critical roots.
struct LimitSpectrum {
  SpectrumKind kind = SpectrumKind::Circle;
  double m = 0.0;
  Eigen::VectorXcd nodes;
  Eigen::VectorXd weights;
  Eigen::VectorXd density;  // circle: d(theta_j); atoms: equals weights

  double mass() const { return weights.sum(); }

  template <typename F>
  Complex integrate(F&& f) const {
    Complex acc(0.0);
    for (Eigen::Index j = 0; j < nodes.size(); ++j) acc += weights(j) * f(nodes(j));
    return acc;
  }
};

/// Builds nu. The circle form starts from `points` nodes and doubles until
/// the variance of zeta_1 changes by less than 1e-10 relative. Refuses in
/// regime III and on non-simple critical roots.
LimitSpectrum build_spectrum(const SpectralReport& report, const MomentTable& moments, int points = 4096);

/// Re integral f conj(g) dnu.
double cov_pair(const LimitSpectrum& spectrum, const CoeffVector& f, const CoeffVector& g);

/// Var(sum_k a_k zeta_k).
double variance(const LimitSpectrum& spectrum, const CoeffVector& a);

/// Cov(zeta_k, zeta_k^(ell)) = Re integral (z m^{1/2})^ell |z^k - m^{-k}|^2 dnu.
double cov_lagged(const LimitSpectrum& spectrum, int k, int ell);

/// Gram matrix Re integral b_i conj(b_j) dnu of b_k = z^k - m^{-k}.
Eigen::MatrixXd gram(const LimitSpectrum& spectrum, const std::vector<int>& lags);

/// The same limit variance as `variance`, computed from the martingale
/// quadratic-variation series with alpha_k = <T^k v, a>. Regime I only and
/// non-negative lags only.
double sigma2_series(const OffspringLaw& law, const SpectralReport& report, const CoeffVector& a);

/// alpha_k = <T^k v, a> for k = 0..count-1.
Eigen::VectorXd alpha_sequence(const OffspringLaw& law, double m, const CoeffVector& a, int count);

/// ((m-1)/m) sum_k m^{-k} Var phi(k), for a centered characteristic.
double char_variance_centered(const OffspringLaw& law, double m);

/// Limit variance of Z_n^{-1/2} (Z^phi_n - lambda^phi Z_n) in regime I.
double char_variance_full(const OffspringLaw& law, const SpectralReport& report, const LimitSpectrum& spectrum);

/// The lag coefficients whose fluctuation limit governs a characteristic
/// with non-zero mean in regimes II/III: a_k = lambda_k - lambda_{k-1}.
CoeffVector char_step_coeffs(const CharacteristicSummary& summary);

/// Best linear one-step predictor Z_{n+1} ~ m Z_n + sum_k c_k X_{n,k}.
struct Predictor {
  double m = 0.0;
  Eigen::VectorXd coeffs;  // coeffs(k - 1) multiplies X_{n,k}
  double residual_norm = 0.0;  // ||(z^{-1} - m) - sum_k c_k b_k||_nu
  double naive_norm = 0.0;     // ||z^{-1} - m||_nu
  bool regularized = false;

  int order() const { return static_cast<int>(coeffs.size()); }
  /// `lagged(k - 1)` is X_{n,k}.
  double predict(double z_n, const Eigen::Ref<const Eigen::VectorXd>& lagged) const {
    return m * z_n + coeffs.dot(lagged.head(coeffs.size()));
  }
};

Predictor predictor_coeffs(const LimitSpectrum& spectrum, int order);

/// sum_i (conj(gamma_i)/|gamma_i|)^n U_i (gamma_i^k - m^{-k}) for k = 0..trunc.
Eigen::VectorXd oscillation_profile(const SpectralReport& report, const std::vector<Complex>& U, int n,
                                    Eigen::Index trunc);

}  // namespace cmj

#endif  // CMJ_LIMITS_HPP
