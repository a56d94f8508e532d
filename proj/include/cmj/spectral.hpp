#ifndef CMJ_SPECTRAL_HPP
#define CMJ_SPECTRAL_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmj/errors.hpp"
#include "cmj/offspring.hpp"

namespace cmj {

enum class Regime { I, II, III };

std::string to_string(Regime r);

struct RootInfo {
  Complex value;
  double residual = 0.0;  // |mu_hat(value) - 1|
  int multiplicity = 1;
  bool converged = true;
};

/// Root geometry of mu_hat(z) = 1 and the resulting fluctuation regime.
struct SpectralReport {
  double m = 0.0;
  double alpha = 0.0;  // log m
  std::vector<RootInfo> roots;  // all K roots, repeated by multiplicity
  double gamma_star = std::numeric_limits<double>::infinity();
  std::vector<Complex> critical;  // distinct roots of smallest modulus other than 1/m
  std::vector<Complex> derivs;    // mu_hat'(gamma) for each critical root
  Regime regime = Regime::I;
  double margin = std::numeric_limits<double>::infinity();  // gamma_star * sqrt(m) - 1
  double tolerance = 1e-9;
  bool simple = true;          // every critical root is a simple root
  bool roots_flagged = false;  // some root failed to polish below 1e-10

  /// Throws Refusal when critical roots are multiple and the regime needs them.
  void require_simple() const;
};

/// Finite window y_0..y_trunc of a sequence in the weighted space.
using SequenceWindow = Eigen::VectorXcd;

template <typename Scalar>
using Sequence = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Default window length for operator identities: K + 64.
inline Eigen::Index default_trunc(const OffspringLaw& law) { return law.max_age() + 64; }

double malthusian(const OffspringLaw& law);
std::vector<RootInfo> all_roots(const OffspringLaw& law);
SpectralReport classify(const OffspringLaw& law, double tol = 1e-9);

/// v = (m^{-k} 1{k > 0})_{k=0..trunc}.
template <typename Scalar = double>
Sequence<Scalar> v_vector(double m, Eigen::Index trunc) {
  Sequence<Scalar> v(trunc + 1);
  double p = 1.0;
  v(0) = Scalar(0);
  for (Eigen::Index k = 1; k <= trunc; ++k) v(k) = Scalar(p /= m);
  return v;
}

/// chi(y) = sum_{k=1}^K mu_k (y_k - y_{k-1}).
template <typename Derived>
typename Derived::Scalar chi_functional(const OffspringLaw& law, const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const auto& mu = law.intensity();
  Scalar acc(0);
  for (Eigen::Index k = 1; k < mu.size(); ++k) acc += mu(k) * (y(k) - y(k - 1));
  return acc;
}

/// T y = S y + chi(y) v on a window. Components 0..trunc of T y depend only
/// on components 0..max(trunc - 1, K) of y, so the window is closed under T
/// whenever trunc >= K.
template <typename Derived>
Sequence<typename Derived::Scalar> apply_T(const OffspringLaw& law, double m, const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index trunc = y.size() - 1;
  if (trunc < law.max_age()) throw Fault("apply_T: window shorter than the maximum birth age");
  const Scalar chi = chi_functional(law, y);
  Sequence<Scalar> out(y.size());
  out(0) = Scalar(0);
  double p = 1.0;
  for (Eigen::Index k = 1; k <= trunc; ++k) {
    p /= m;
    out(k) = y(k - 1) + chi * p;
  }
  return out;
}

struct EigenDirection {
  SequenceWindow u;       // (gamma^k - m^{-k})_k
  SequenceWindow scaled;  // u / (gamma (gamma - 1) mu_hat'(gamma))
};

EigenDirection eigen_direction(const OffspringLaw& law, Complex gamma, double m, Eigen::Index trunc);

/// (lambda - T)^{-1} v in closed form.
SequenceWindow resolvent_vector(Complex lambda, const OffspringLaw& law, double m, Eigen::Index trunc);

/// ||y||_R = (sum_k R^{2k} |y_k|^2)^{1/2}.
template <typename Derived>
double weighted_norm(const Eigen::MatrixBase<Derived>& y, double weight_radius) {
  double acc = 0.0, w = 1.0;
  for (Eigen::Index k = 0; k < y.size(); ++k, w *= weight_radius * weight_radius) acc += w * std::norm(Complex(y(k)));
  return std::sqrt(acc);
}

/// Norms ||T^k y0||_R for k = 0..steps. The window must satisfy
/// trunc >= K + steps so that shifted mass stays inside it.
std::vector<double> power_growth(const OffspringLaw& law, double m, const SequenceWindow& y0, int steps,
                                 double weight_radius = 1.0);

/// Geometric rate exp(slope) of a least-squares fit of log norms[k] over
/// k in [from, to].
double growth_rate(const std::vector<double>& norms, int from, int to);

}  // namespace cmj

#endif  // CMJ_SPECTRAL_HPP
