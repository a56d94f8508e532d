#include "cmj/limits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "cmj/errors.hpp"

namespace cmj {

namespace {

constexpr int kMaxQuadraturePoints = 1 << 20;

LimitSpectrum circle_spectrum(const SpectralReport& rep, const MomentTable& mt, int points) {
  LimitSpectrum s;
  s.kind = SpectrumKind::Circle;
  s.m = rep.m;
  s.nodes.resize(points);
  s.density.resize(points);
  const double radius = 1.0 / std::sqrt(rep.m);
  const double scale = (rep.m - 1.0) / rep.m;
  for (int j = 0; j < points; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / points;
    const Complex z = std::polar(radius, theta);
    const Complex gap = 1.0 - horner(mt.mu, z);
    s.nodes(j) = z;
    s.density(j) = scale * sigma_hat(mt, z) / (std::norm(1.0 - z) * std::norm(gap));
  }
  s.weights = s.density / static_cast<double>(points);
  return s;
}

LimitSpectrum atom_spectrum(const SpectralReport& rep, const MomentTable& mt) {
  LimitSpectrum s;
  s.kind = SpectrumKind::Atoms;
  s.m = rep.m;
  const auto q = static_cast<Eigen::Index>(rep.critical.size());
  s.nodes.resize(q);
  s.weights.resize(q);
  for (Eigen::Index p = 0; p < q; ++p) {
    const Complex g = rep.critical[p];
    s.nodes(p) = g;
    s.weights(p) = (rep.m - 1.0) * sigma_hat(mt, g) / (std::norm(1.0 - g) * std::norm(rep.derivs[p]));
  }
  s.density = s.weights;
  return s;
}

}  // namespace

Complex evaluate(const CoeffVector& c, Complex z) {
  Complex acc(0.0);
  for (const auto& [k, a] : c)
    if (a != 0.0) acc += a * std::pow(z, k);
  return acc;
}

CoeffVector centered_symbol(const CoeffVector& a, double m) {
  CoeffVector out = a;
  double shift = 0.0;
  for (const auto& [k, c] : a) shift += c * std::pow(m, -k);
  out[0] -= shift;
  return out;
}

LimitSpectrum build_spectrum(const SpectralReport& report, const MomentTable& moments, int points) {
  if (report.regime == Regime::III)
    throw Refusal("no Gaussian limit in regime III (gamma* < m^{-1/2}); fluctuations oscillate");
  report.require_simple();
  if (report.regime == Regime::II) return atom_spectrum(report, moments);

  if (points < 8) throw Fault("build_spectrum: need at least 8 quadrature points");
  LimitSpectrum s = circle_spectrum(report, moments, points);
  double probe = variance(s, unit_lag(1));
  while (points < kMaxQuadraturePoints) {
    LimitSpectrum finer = circle_spectrum(report, moments, points * 2);
    const double next = variance(finer, unit_lag(1));
    s = std::move(finer);
    points *= 2;
    if (std::abs(next - probe) <= 1e-10 * std::abs(next)) break;
    probe = next;
  }
  return s;
}

double cov_pair(const LimitSpectrum& spectrum, const CoeffVector& f, const CoeffVector& g) {
  return spectrum.integrate([&](Complex z) { return evaluate(f, z) * std::conj(evaluate(g, z)); }).real();
}

double variance(const LimitSpectrum& spectrum, const CoeffVector& a) {
  const CoeffVector f = centered_symbol(a, spectrum.m);
  return spectrum.integrate([&](Complex z) { return Complex(std::norm(evaluate(f, z))); }).real();
}

double cov_lagged(const LimitSpectrum& spectrum, int k, int ell) {
  if (ell < 0) throw Fault("cov_lagged: ell must be non-negative");
  const double root_m = std::sqrt(spectrum.m);
  const double mk = std::pow(spectrum.m, -k);
  return spectrum
      .integrate([&](Complex z) { return std::pow(z * root_m, ell) * std::norm(std::pow(z, k) - mk); })
      .real();
}

Eigen::MatrixXd gram(const LimitSpectrum& spectrum, const std::vector<int>& lags) {
  const auto n = static_cast<Eigen::Index>(lags.size());
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      G(i, j) = G(j, i) = cov_pair(spectrum, centered_symbol(unit_lag(lags[i]), spectrum.m),
                                   centered_symbol(unit_lag(lags[j]), spectrum.m));
  return G;
}

Eigen::VectorXd alpha_sequence(const OffspringLaw& law, double m, const CoeffVector& a, int count) {
  int top = law.max_age();
  for (const auto& [k, c] : a) {
    if (k < 0) throw Fault("alpha_sequence: lags must be non-negative");
    top = std::max(top, k);
  }
  Eigen::VectorXd y = v_vector<double>(m, top);
  Eigen::VectorXd alpha(count);
  for (int k = 0; k < count; ++k) {
    double acc = 0.0;
    for (const auto& [j, c] : a) acc += c * y(j);
    alpha(k) = acc;
    if (k + 1 < count) y = apply_T(law, m, y);
  }
  return alpha;
}

double sigma2_series(const OffspringLaw& law, const SpectralReport& report, const CoeffVector& a) {
  if (report.regime != Regime::I) throw Refusal("sigma2_series: the series converges only in regime I");
  const MomentTable mt = moments(law);
  const int K = law.max_age();
  const double m = report.m;
  int top = K;
  for (const auto& [k, c] : a) {
    if (k < 0) throw Fault("sigma2_series: lags must be non-negative");
    top = std::max(top, k);
  }

  std::vector<double> alpha;
  Eigen::VectorXd y = v_vector<double>(m, top);
  double sum = 0.0, weight = 1.0 - 1.0 / m;  // m^{-l} - m^{-l-1}
  int quiet = 0;
  for (int l = 0; l < 1000000; ++l, weight /= m) {
    double acc = 0.0;
    for (const auto& [j, c] : a) acc += c * y(j);
    alpha.push_back(acc);
    y = apply_T(law, m, y);

    double s = 0.0;
    const int top_i = std::min(l, K);
    for (int i = 1; i <= top_i; ++i)
      for (int j = 1; j <= top_i; ++j) s += mt.sigma(i, j) * alpha[l - i] * alpha[l - j];
    const double term = weight * s;
    sum += term;
    if (l > top + K && std::abs(term) <= 1e-14 * std::abs(sum))
      ++quiet;
    else
      quiet = 0;
    if (quiet >= 8) break;
  }
  return sum;
}

double char_variance_centered(const OffspringLaw& law, double m) {
  const auto summary = char_moments(law, m);
  const auto& c = summary.moments;
  if (c.mean.cwiseAbs().maxCoeff() > 1e-12)
    throw Fault("char_variance_centered: characteristic is not centered (E phi(k) != 0)");
  const auto kphi = c.variance.size() - 1;
  double acc = 0.0, p = 1.0;
  for (Eigen::Index k = 0; k <= kphi; ++k, p /= m) acc += p * c.variance(k);
  acc += c.variance(kphi) * p / (1.0 - 1.0 / m);  // ages beyond K_phi repeat the last value
  return (m - 1.0) / m * acc;
}

CoeffVector char_step_coeffs(const CharacteristicSummary& summary) {
  CoeffVector a;
  for (Eigen::Index k = 0; k < summary.step.size(); ++k)
    if (summary.step(k) != 0.0) a[static_cast<int>(k)] = summary.step(k);
  return a;
}

double char_variance_full(const OffspringLaw& law, const SpectralReport& report, const LimitSpectrum& spectrum) {
  if (report.regime != Regime::I || spectrum.kind != SpectrumKind::Circle)
    throw Refusal(
        "char_variance_full: regime I only; in regimes II/III the mean characteristic dominates "
        "(use char_step_coeffs with the lag-variance routines)");
  const double m = report.m;
  const auto summary = char_moments(law, m);
  const auto& c = summary.moments;
  const MomentTable mt = moments(law);
  const Eigen::Index kphi = c.variance.size() - 1;
  const int K = law.max_age();

  double own = 0.0, p = 1.0;
  for (Eigen::Index k = 0; k <= kphi; ++k, p /= m) own += p * c.variance(k);
  own += c.variance(kphi) * p / (1.0 - 1.0 / m);

  // Cross term between the own score and the offspring innovations, taken
  // against the bare circle measure d(theta)/2pi. Ages beyond K_phi repeat
  // the last value, which gives the geometric 1/(1 - conj z) tail.
  const Eigen::Index M = spectrum.nodes.size();
  Complex cross(0.0);
  for (Eigen::Index j = 0; j < M; ++j) {
    const Complex z = spectrum.nodes(j);
    const Complex zb = std::conj(z);
    Complex g(0.0), zbk(1.0);
    for (Eigen::Index k = 0; k <= kphi; ++k, zbk *= zb) {
      Complex row(0.0);
      for (int i = K; i >= 1; --i) row = (row + c.cross(k, i)) * z;
      g += row * (k < kphi ? zbk : zbk / (1.0 - zb));
    }
    const Complex symbol = horner(summary.step, z) - summary.lambda_total;
    cross += symbol / ((z - 1.0) * (1.0 - horner(mt.mu, z))) * g;
  }
  cross /= static_cast<double>(M);
  const double mean_part = variance(spectrum, char_step_coeffs(summary));
  return (m - 1.0) / m * (own - 2.0 * cross.real()) + mean_part;
}

Predictor predictor_coeffs(const LimitSpectrum& spectrum, int order) {
  if (order < 0) throw Fault("predictor_coeffs: order must be non-negative");
  if (!(spectrum.mass() > 0.0))
    throw Refusal("predictor_coeffs: zero limit measure (deterministic law); Z_{n+1} follows the exact recurrence");
  const double m = spectrum.m;
  Predictor pred;
  pred.m = m;
  const CoeffVector target{{-1, 1.0}, {0, -m}};
  pred.naive_norm = std::sqrt(std::max(0.0, cov_pair(spectrum, target, target)));
  pred.coeffs = Eigen::VectorXd::Zero(order);
  pred.residual_norm = pred.naive_norm;
  if (order == 0) return pred;

  std::vector<int> lags(order);
  for (int k = 1; k <= order; ++k) lags[k - 1] = k;
  Eigen::MatrixXd G = gram(spectrum, lags);
  Eigen::VectorXd rhs(order);
  for (int k = 1; k <= order; ++k) rhs(k - 1) = cov_pair(spectrum, target, centered_symbol(unit_lag(k), m));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (eig.eigenvalues().minCoeff() <= 1e-12 * top) {
    G.diagonal().array() += 1e-12 * G.trace();
    pred.regularized = true;
  }
  pred.coeffs = G.ldlt().solve(rhs);

  CoeffVector residual = target;
  for (int k = 1; k <= order; ++k)
    for (const auto& [lag, c] : centered_symbol(unit_lag(k), m)) residual[lag] -= pred.coeffs(k - 1) * c;
  pred.residual_norm = std::sqrt(std::max(0.0, cov_pair(spectrum, residual, residual)));
  return pred;
}

Eigen::VectorXd oscillation_profile(const SpectralReport& report, const std::vector<Complex>& U, int n,
                                    Eigen::Index trunc) {
  if (report.regime != Regime::III) throw Refusal("oscillation_profile: regime III only");
  report.require_simple();
  const auto& crit = report.critical;
  if (U.size() != crit.size()) throw Fault("oscillation_profile: one U value per critical root required");
  for (std::size_t i = 0; i < crit.size(); ++i) {
    const double scale = std::max(1.0, std::abs(U[i]));
    if (crit[i].imag() == 0.0) {
      if (std::abs(U[i].imag()) > 1e-10 * scale) throw Fault("oscillation_profile: U must be real at a real root");
      continue;
    }
    const auto partner = std::find(crit.begin(), crit.end(), std::conj(crit[i]));
    if (partner == crit.end()) throw Fault("oscillation_profile: critical roots are not closed under conjugation");
    if (std::abs(U[partner - crit.begin()] - std::conj(U[i])) > 1e-10 * scale)
      throw Fault("oscillation_profile: U values at conjugate roots must be conjugate");
  }
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(trunc + 1);
  for (std::size_t i = 0; i < crit.size(); ++i) {
    const Complex g = crit[i];
    const Complex phase = std::pow(std::conj(g) / std::abs(g), n);
    Complex gk(1.0);
    double mk = 1.0;
    for (Eigen::Index k = 0; k <= trunc; ++k, gk *= g, mk /= report.m) acc(k) += phase * U[i] * (gk - mk);
  }
  return acc.real();
}

}  // namespace cmj
