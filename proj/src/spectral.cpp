#include "cmj/spectral.hpp"

#include <algorithm>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace cmj {

namespace {

// Roots closer than this (relative) are treated as one multiple root.
constexpr double kClusterTol = 1e-6;
constexpr double kResidualTol = 1e-10;
constexpr double kSimpleDerivTol = 1e-10;

Eigen::VectorXd root_polynomial(const OffspringLaw& law) {
  Eigen::VectorXd c = law.intensity();
  c(0) = -1.0;
  return c;
}

Complex newton_polish(const Eigen::VectorXd& c, Complex z, bool& converged) {
  for (int it = 0; it < 100; ++it) {
    const Complex p = horner(c, z);
    const Complex dp = horner_derivative(c, z);
    if (dp == Complex(0.0)) break;
    const Complex step = p / dp;
    z -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
  }
  converged = std::abs(horner(c, z)) <= kResidualTol;
  return z;
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::I: return "I";
    case Regime::II: return "II";
    case Regime::III: return "III";
  }
  return "?";
}

void SpectralReport::require_simple() const {
  if (simple || regime == Regime::I) return;
  std::ostringstream os;
  os << "non-simple critical root: mu_hat'(gamma) vanishes at a root of modulus " << gamma_star
     << "; limits for multiple roots are not covered";
  throw Refusal(os.str());
}

double malthusian(const OffspringLaw& law) {
  require_valid(law);
  const double total = law.intensity().sum();
  // f(x) = mu_hat(1/x) - 1 is decreasing on (1, E N] with f(1) > 0 >= f(E N).
  double lo = 1.0, hi = total;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mu_hat(law, 1.0 / mid) > 1.0 ? lo : hi) = mid;
  }
  double z = 2.0 / (lo + hi);
  for (int it = 0; it < 20; ++it) {
    const double r = mu_hat(law, z) - 1.0;
    if (std::abs(r) <= 1e-15) break;
    z -= r / mu_hat_prime(law, z);
  }
  return 1.0 / z;
}

std::vector<RootInfo> all_roots(const OffspringLaw& law) {
  require_valid(law);
  const Eigen::VectorXd c = root_polynomial(law);
  const int K = law.max_age();
  std::vector<Complex> raw;
  if (K == 1) {
    raw.push_back(Complex(1.0 / c(1)));
  } else {
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(K, K);
    companion.diagonal(-1).setOnes();
    for (int k = 0; k < K; ++k) companion(k, K - 1) = -c(k) / c(K);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    for (int k = 0; k < K; ++k) raw.push_back(solver.eigenvalues()(k));
  }

  std::vector<RootInfo> roots;
  for (const Complex& z0 : raw) {
    RootInfo r;
    r.value = newton_polish(c, z0, r.converged);
    roots.push_back(r);
  }

  // Multiple roots: Newton converges only linearly and eigenvalues scatter by
  // ~eps^{1/p}; the cluster centroid is accurate to working precision.
  std::vector<int> cluster(roots.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (cluster[i] >= 0) continue;
    cluster[i] = next;
    for (std::size_t j = i + 1; j < roots.size(); ++j)
      if (cluster[j] < 0 &&
          std::abs(roots[i].value - roots[j].value) <= kClusterTol * std::max(1.0, std::abs(roots[i].value)))
        cluster[j] = next;
    ++next;
  }
  for (int g = 0; g < next; ++g) {
    Complex sum(0.0);
    int count = 0;
    for (std::size_t i = 0; i < roots.size(); ++i)
      if (cluster[i] == g) sum += roots[i].value, ++count;
    if (count == 1) continue;
    const Complex centroid = sum / static_cast<double>(count);
    for (std::size_t i = 0; i < roots.size(); ++i)
      if (cluster[i] == g) {
        roots[i].value = centroid;
        roots[i].multiplicity = count;
        roots[i].converged = std::abs(horner(c, centroid)) <= kResidualTol;
      }
  }

  // Real coefficients: snap near-real roots and mirror conjugate pairs exactly.
  for (auto& r : roots)
    if (std::abs(r.value.imag()) <= 1e-12 * std::max(1.0, std::abs(r.value))) r.value = Complex(r.value.real(), 0.0);
  std::vector<std::size_t> upper, lower;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (roots[i].value.imag() > 0) upper.push_back(i);
    if (roots[i].value.imag() < 0) lower.push_back(i);
  }
  if (upper.size() == lower.size()) {
    std::vector<bool> used(lower.size(), false);
    for (std::size_t i : upper) {
      std::size_t best = 0;
      double dist = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < lower.size(); ++j)
        if (!used[j] && std::abs(std::conj(roots[i].value) - roots[lower[j]].value) < dist)
          dist = std::abs(std::conj(roots[i].value) - roots[lower[j]].value), best = j;
      used[best] = true;
      roots[lower[best]].value = std::conj(roots[i].value);
    }
  }
  for (auto& r : roots) r.residual = std::abs(horner(c, r.value));
  std::sort(roots.begin(), roots.end(), [](const RootInfo& a, const RootInfo& b) {
    if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) < std::abs(b.value);
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    return a.value.imag() < b.value.imag();
  });
  return roots;
}

SpectralReport classify(const OffspringLaw& law, double tol) {
  SpectralReport rep;
  rep.tolerance = tol;
  rep.m = malthusian(law);
  rep.alpha = std::log(rep.m);
  rep.roots = all_roots(law);

  // Pin the Malthusian root to the bisection value and drop it from Gamma'.
  std::size_t malthus = 0;
  for (std::size_t i = 1; i < rep.roots.size(); ++i)
    if (std::abs(rep.roots[i].value - 1.0 / rep.m) < std::abs(rep.roots[malthus].value - 1.0 / rep.m)) malthus = i;
  rep.roots[malthus].value = Complex(1.0 / rep.m, 0.0);
  rep.roots[malthus].residual = std::abs(mu_hat(law, 1.0 / rep.m) - 1.0);
  for (const auto& r : rep.roots) rep.roots_flagged = rep.roots_flagged || !r.converged;

  std::vector<RootInfo> others;
  for (std::size_t i = 0; i < rep.roots.size(); ++i)
    if (i != malthus) others.push_back(rep.roots[i]);
  if (others.empty()) return rep;

  rep.gamma_star = std::numeric_limits<double>::infinity();
  for (const auto& r : others) rep.gamma_star = std::min(rep.gamma_star, std::abs(r.value));
  rep.margin = rep.gamma_star * std::sqrt(rep.m) - 1.0;
  rep.regime = std::abs(rep.margin) <= tol ? Regime::II : (rep.margin > 0 ? Regime::I : Regime::III);

  for (const auto& r : others) {
    if (std::abs(r.value) > (1.0 + tol) * rep.gamma_star) continue;
    const bool seen = std::any_of(rep.critical.begin(), rep.critical.end(), [&](Complex g) { return g == r.value; });
    if (seen) continue;
    rep.critical.push_back(r.value);
    const Complex d = mu_hat_prime(law, r.value);
    rep.derivs.push_back(d);
    if (r.multiplicity > 1 || std::abs(d) <= kSimpleDerivTol) rep.simple = false;
  }
  return rep;
}

EigenDirection eigen_direction(const OffspringLaw& law, Complex gamma, double m, Eigen::Index trunc) {
  if (std::abs(mu_hat(law, gamma) - 1.0) > kResidualTol) throw Fault("eigen_direction: gamma is not a root of mu_hat = 1");
  if (std::abs(gamma - 1.0 / m) <= 1e-12) throw Fault("eigen_direction: gamma is the Malthusian root");
  const Complex d = mu_hat_prime(law, gamma);
  if (std::abs(d) <= kSimpleDerivTol) throw Fault("eigen_direction: non-simple root (mu_hat'(gamma) = 0)");
  EigenDirection e;
  e.u.resize(trunc + 1);
  Complex g(1.0);
  double p = 1.0;
  for (Eigen::Index k = 0; k <= trunc; ++k, g *= gamma, p /= m) e.u(k) = g - p;
  e.scaled = e.u / (gamma * (gamma - 1.0) * d);
  return e;
}

SequenceWindow resolvent_vector(Complex lambda, const OffspringLaw& law, double m, Eigen::Index trunc) {
  const Complex inv = 1.0 / lambda;
  const Complex gap = 1.0 - mu_hat(law, inv);
  if (std::abs(gap) <= 1e-8) throw Fault("resolvent_vector: 1/lambda is (numerically) a root of mu_hat = 1");
  const Complex scale = 1.0 / ((1.0 - lambda) * gap);
  SequenceWindow f(trunc + 1);
  Complex g(1.0);
  double p = 1.0;
  for (Eigen::Index k = 0; k <= trunc; ++k, g *= inv, p /= m) f(k) = scale * (g - p);
  return f;
}

std::vector<double> power_growth(const OffspringLaw& law, double m, const SequenceWindow& y0, int steps,
                                 double weight_radius) {
  if (y0.size() - 1 < law.max_age() + steps) throw Fault("power_growth: window must satisfy trunc >= K + steps");
  std::vector<double> norms;
  SequenceWindow y = y0;
  for (int k = 0; k <= steps; ++k) {
    norms.push_back(weighted_norm(y, weight_radius));
    if (k < steps) y = apply_T(law, m, y);
  }
  return norms;
}

double growth_rate(const std::vector<double>& norms, int from, int to) {
  if (from < 0 || to >= static_cast<int>(norms.size()) || to <= from) throw Fault("growth_rate: bad fit range");
  const int n = to - from + 1;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = from; k <= to; ++k) {
    const double y = std::log(norms[k]);
    sx += k, sy += y, sxx += double(k) * k, sxy += k * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::exp(slope);
}

}  // namespace cmj
