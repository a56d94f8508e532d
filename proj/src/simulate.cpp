#include "cmj/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cmj/errors.hpp"

namespace cmj {

namespace {

using Wide = unsigned __int128;

template <typename M>
bool same_matrix(const M& a, const M& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

/// Multinomial split of `total` individuals over the atom probabilities by
/// sequential binomials: atom a gets Bin(rest, p_a / (1 - p_1 - ... - p_{a-1})).
std::vector<std::uint64_t> split_cohort(const std::vector<LitterAtom>& atoms, std::uint64_t total,
                                        std::mt19937_64& rng) {
  std::vector<std::uint64_t> counts(atoms.size(), 0);
  std::uint64_t rest = total;
  double mass = 1.0;
  for (std::size_t a = 0; a + 1 < atoms.size() && rest > 0; ++a) {
    const double p = std::clamp(atoms[a].prob / mass, 0.0, 1.0);
    std::uint64_t x = 0;
    if (p >= 1.0)
      x = rest;
    else if (p > 0.0)
      x = std::binomial_distribution<std::uint64_t>(rest, p)(rng);
    counts[a] = x;
    rest -= x;
    mass -= atoms[a].prob;
  }
  counts.back() += rest;
  return counts;
}

}  // namespace

bool operator==(const Trace& a, const Trace& b) {
  return a.horizon == b.horizon && a.B == b.B && a.Z == b.Z && same_matrix(a.cohort_atoms, b.cohort_atoms) &&
         same_matrix(a.Bnk, b.Bnk) && same_matrix(a.char_sum, b.char_sum) && a.seed == b.seed &&
         a.capped == b.capped;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Trace run(const OffspringLaw& law, int horizon, std::uint64_t seed, std::uint64_t cap) {
  require_valid(law);
  if (horizon < 0) throw Fault("run: horizon must be non-negative");
  const auto& atoms = law.atoms();
  const int K = law.max_age();
  const auto A = static_cast<Eigen::Index>(atoms.size());
  const int kphi = law.char_max_age().value_or(-1);

  Trace t;
  t.seed = seed;
  t.cohort_atoms = CountMatrix::Zero(horizon + 1, A);
  t.Bnk = CountMatrix::Zero(horizon + 1, K);
  if (kphi >= 0) t.char_sum = Eigen::MatrixXd::Zero(horizon + 1, kphi + 1);

  std::mt19937_64 rng(seed);
  std::vector<Wide> pending(static_cast<std::size_t>(horizon + K + 1), 0);
  pending[0] = 1;
  Wide z = 0;
  int last = -1;
  for (int n = 0; n <= horizon; ++n) {
    const Wide b = pending[n];
    if (z + b > cap) break;
    const auto born = static_cast<std::uint64_t>(b);
    const auto counts = split_cohort(atoms, born, rng);

    std::vector<Wide> litter(K + 1, 0);
    bool over = false;
    for (int k = 1; k <= K; ++k) {
      for (Eigen::Index a = 0; a < A; ++a) litter[k] += Wide(counts[a]) * atoms[a].births_at(k);
      over = over || litter[k] > cap;
    }
    if (over) break;

    z += b;
    t.B.push_back(born);
    t.Z.push_back(static_cast<std::uint64_t>(z));
    for (Eigen::Index a = 0; a < A; ++a) t.cohort_atoms(n, a) = counts[a];
    for (int k = 1; k <= K; ++k) {
      t.Bnk(n, k - 1) = static_cast<std::uint64_t>(litter[k]);
      pending[n + k] += litter[k];
    }
    for (int age = 0; age <= kphi; ++age)
      for (Eigen::Index a = 0; a < A; ++a)
        t.char_sum(n, age) += static_cast<double>(counts[a]) * atoms[a].char_at(age);
    last = n;
  }

  t.horizon = last;
  if (last < horizon) {
    t.capped = true;
    t.cohort_atoms.conservativeResize(last + 1, A);
    t.Bnk.conservativeResize(last + 1, K);
    if (kphi >= 0) t.char_sum.conservativeResize(last + 1, kphi + 1);
  }
  return t;
}

double fluctuation(const Trace& trace, double m, int n, int k) {
  if (n < 0 || n > trace.horizon || n - k > trace.horizon) {
    std::ostringstream os;
    os << "fluctuation: X_{" << n << "," << k << "} needs Z beyond the trace horizon " << trace.horizon;
    throw Fault(os.str());
  }
  const double past = n - k < 0 ? 0.0 : static_cast<double>(trace.Z[n - k]);
  return past - std::pow(m, -k) * static_cast<double>(trace.Z[n]);
}

Eigen::MatrixXd fluctuations(const Trace& trace, double m, int k_min, int k_max) {
  if (k_min > k_max) throw Fault("fluctuations: k_min > k_max");
  const int rows = trace.horizon - std::max(0, -k_min) + 1;
  if (rows <= 0) throw Fault("fluctuations: negative lags reach beyond the trace horizon");
  Eigen::MatrixXd X(rows, k_max - k_min + 1);
  for (int n = 0; n < rows; ++n)
    for (int k = k_min; k <= k_max; ++k) X(n, k - k_min) = fluctuation(trace, m, n, k);
  return X;
}

Eigen::VectorXd fluctuation_window(const Trace& trace, double m, int n, Eigen::Index trunc) {
  Eigen::VectorXd x(trunc + 1);
  for (Eigen::Index k = 0; k <= trunc; ++k) x(k) = fluctuation(trace, m, n, static_cast<int>(k));
  return x;
}

Innovations innovations(const Trace& trace, const MomentTable& moments) {
  const int N = trace.horizon;
  const auto K = static_cast<int>(moments.mu.size()) - 1;
  if (trace.Bnk.cols() != K) throw Fault("innovations: moment table does not match the trace");
  Innovations out;
  out.W.resize(N + 1);
  out.Wnk.resize(N + 1, K);
  for (int n = 0; n <= N; ++n) {
    const double b = static_cast<double>(trace.B[n]);
    double w = b;
    for (int k = 1; k <= std::min(n, K); ++k) w -= moments.mu(k) * static_cast<double>(trace.B[n - k]);
    out.W(n) = w;
    for (int k = 1; k <= K; ++k) out.Wnk(n, k - 1) = static_cast<double>(trace.Bnk(n, k - 1)) - moments.mu(k) * b;
  }
  for (int n = 1; n <= N; ++n) {
    double acc = 0.0;
    for (int k = 1; k <= std::min(n, K); ++k) acc += out.Wnk(n - k, k - 1);
    const double scale = std::max(1.0, static_cast<double>(trace.B[n]));
    if (std::abs(acc - out.W(n)) > 1e-9 * scale) {
      std::ostringstream os;
      os.precision(17);
      os << "innovations: W_" << n << " = " << out.W(n) << " but the cohort sum gives " << acc;
      throw Fault(os.str());
    }
  }
  return out;
}

Eigen::VectorXd char_total(const Trace& trace, const OffspringLaw& law) {
  if (!law.has_characteristic() || trace.char_sum.size() == 0) throw Fault("char_total: no characteristic recorded");
  const int N = trace.horizon;
  const auto kphi = static_cast<int>(trace.char_sum.cols()) - 1;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(N + 1);
  for (int n = 0; n <= N; ++n)
    for (int c = 0; c <= n; ++c) total(n) += trace.char_sum(c, std::min(n - c, kphi));

  const double m = malthusian(law);
  const auto summary = char_moments(law, m);
  const Eigen::VectorXd centered = char_centered_total(trace, law);
  for (int n = 0; n <= N; ++n) {
    const double lhs = total(n) - summary.lambda_total * static_cast<double>(trace.Z[n]);
    double rhs = centered(n);
    for (int k = 1; k <= kphi; ++k) rhs += summary.step(k) * fluctuation(trace, m, n, k);
    const double scale = std::max({1.0, std::abs(total(n)), std::abs(summary.lambda_total) * trace.Z[n]});
    if (std::abs(lhs - rhs) > 1e-9 * scale) {
      std::ostringstream os;
      os.precision(17);
      os << "char_total: decomposition fails at n = " << n << " (" << lhs << " vs " << rhs << ")";
      throw Fault(os.str());
    }
  }
  return total;
}

Eigen::VectorXd char_centered_total(const Trace& trace, const OffspringLaw& law) {
  if (!law.has_characteristic() || trace.char_sum.size() == 0)
    throw Fault("char_centered_total: no characteristic recorded");
  const auto mt = moments(law);
  const Eigen::VectorXd& lam = mt.characteristic->mean;
  const int N = trace.horizon;
  const auto kphi = static_cast<int>(trace.char_sum.cols()) - 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(N + 1);
  for (int n = 0; n <= N; ++n)
    for (int c = 0; c <= n; ++c) {
      const int age = std::min(n - c, kphi);
      out(n) += trace.char_sum(c, age) - static_cast<double>(trace.B[c]) * lam(age);
    }
  return out;
}

Complex estimate_U(const Trace& trace, const OffspringLaw& law, const SpectralReport& report, Complex gamma,
                   int n0) {
  if (report.regime != Regime::III) throw Fault("estimate_U: defined in regime III only");
  if (!report.simple) throw Fault("estimate_U: non-simple critical root");
  if (n0 < 0 || n0 > trace.horizon) throw Fault("estimate_U: n0 outside the trace");
  const Complex d = mu_hat_prime(law, gamma);
  if (std::abs(mu_hat(law, gamma) - 1.0) > 1e-10 || std::abs(d) <= 1e-10)
    throw Fault("estimate_U: gamma is not a simple root of mu_hat = 1");
  const auto w = innovations(trace, moments(law)).W;
  Complex acc(0.0), g(1.0);
  for (int k = 0; k <= n0; ++k, g *= gamma) acc += g * w(k);
  return -acc / (gamma * (gamma - 1.0) * d);
}

double martingale_qv(const Trace& trace, const MomentTable& moments, const Eigen::VectorXd& alpha, int n) {
  if (n < 0 || n > trace.horizon) throw Fault("martingale_qv: n outside the trace");
  if (alpha.size() < n + 1) throw Fault("martingale_qv: alpha too short");
  const auto K = static_cast<int>(moments.sigma.rows()) - 1;
  double v = 0.0;
  for (int l = 0; l <= n; ++l) {
    double s = 0.0;
    for (int i = 1; i <= std::min(l, K); ++i)
      for (int j = 1; j <= std::min(l, K); ++j) s += moments.sigma(i, j) * alpha(l - i) * alpha(l - j);
    v += static_cast<double>(trace.B[n - l]) * s;
  }
  return v;
}

double martingale_qv(const Trace& trace, const OffspringLaw& law, double m, const CoeffVector& a, int n) {
  return martingale_qv(trace, moments(law), alpha_sequence(law, m, a, n + 1), n);
}

double verify_recursion(const Trace& trace, const OffspringLaw& law, double m, int n, Eigen::Index trunc) {
  if (n < 0 || n > trace.horizon) throw Fault("verify_recursion: n outside the trace");
  if (trunc < law.max_age() + n) throw Fault("verify_recursion: need trunc >= K + n");
  const auto w = innovations(trace, moments(law)).W;
  Eigen::VectorXd y = v_vector<double>(m, trunc);
  Eigen::VectorXd rebuilt = Eigen::VectorXd::Zero(trunc + 1);
  for (int k = 0; k <= n; ++k) {
    rebuilt -= w(n - k) * y;
    if (k < n) y = apply_T(law, m, y);
  }
  const Eigen::VectorXd x = fluctuation_window(trace, m, n, trunc);
  const Eigen::Index keep = trunc - n + 1;
  const double scale = std::max(1.0, x.head(keep).cwiseAbs().maxCoeff());
  return (x.head(keep) - rebuilt.head(keep)).cwiseAbs().maxCoeff() / scale;
}

}  // namespace cmj
