#include "cmj/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cmj/errors.hpp"

namespace cmj {

std::uint64_t LitterAtom::total_births() const {
  return std::accumulate(births.begin(), births.end(), std::uint64_t{0});
}

double LitterAtom::char_at(int age) const {
  if (!char_values || char_values->empty()) throw Fault("atom carries no characteristic");
  const auto& v = *char_values;
  return v[static_cast<std::size_t>(std::clamp(age, 0, static_cast<int>(v.size()) - 1))];
}

OffspringLaw::OffspringLaw(std::vector<LitterAtom> atoms) : atoms_(std::move(atoms)) {
  for (const auto& a : atoms_) {
    for (std::size_t k = 0; k < a.births.size(); ++k)
      if (a.births[k] > 0) max_age_ = std::max(max_age_, static_cast<int>(k) + 1);
    if (a.char_values && !a.char_values->empty()) {
      const int kphi = static_cast<int>(a.char_values->size()) - 1;
      char_max_age_ = std::max(char_max_age_.value_or(0), kphi);
    }
  }
  intensity_ = Eigen::VectorXd::Zero(max_age_ + 1);
  for (const auto& a : atoms_)
    for (int k = 1; k <= max_age_; ++k) intensity_(k) += a.prob * static_cast<double>(a.births_at(k));
}

std::vector<Violation> validate_law(const OffspringLaw& law) {
  std::vector<Violation> out;
  const auto& atoms = law.atoms();
  if (atoms.empty()) {
    out.push_back({"law", "no atoms", std::nullopt});
    return out;
  }
  double total = 0.0;
  std::size_t with_char = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& a = atoms[i];
    total += a.prob;
    if (!(a.prob > 0.0 && a.prob <= 1.0)) {
      std::ostringstream os;
      os << "probability " << a.prob << " outside (0, 1]";
      out.push_back({"law", os.str(), i});
    }
    if (a.total_births() < 1) out.push_back({"A3", "litter with no children (N >= 1 required)", i});
    if (a.char_values && !a.char_values->empty()) ++with_char;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "atom probabilities sum to " << total;
    out.push_back({"law", os.str(), std::nullopt});
  }
  if (with_char != 0 && with_char != atoms.size())
    out.push_back({"law", "characteristic attached to some atoms but not all", std::nullopt});
  const double mean_total = law.intensity().sum();
  if (!(mean_total > 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "E N = " << mean_total << " is not > 1 (process not supercritical)";
    out.push_back({"A1", os.str(), std::nullopt});
  }
  return out;
}

void require_valid(const OffspringLaw& law) {
  const auto violations = validate_law(law);
  if (violations.empty()) return;
  std::ostringstream os;
  os << "invalid offspring law:";
  for (const auto& v : violations) {
    os << " [" << v.assumption;
    if (v.atom) os << " atom " << *v.atom;
    os << "] " << v.detail << ";";
  }
  throw Fault(os.str());
}

MomentTable moments(const OffspringLaw& law) {
  const int K = law.max_age();
  MomentTable t;
  t.mu = law.intensity();
  t.sigma = Eigen::MatrixXd::Zero(K + 1, K + 1);
  Eigen::VectorXd n(K + 1);
  for (const auto& a : law.atoms()) {
    for (int k = 0; k <= K; ++k) n(k) = static_cast<double>(a.births_at(k));
    t.sigma.noalias() += a.prob * (n * n.transpose());
  }
  t.sigma.noalias() -= t.mu * t.mu.transpose();
  t.sigma = 0.5 * (t.sigma + t.sigma.transpose()).eval();

  if (const auto kphi = law.char_max_age()) {
    CharacteristicMoments c;
    c.mean = Eigen::VectorXd::Zero(*kphi + 1);
    Eigen::VectorXd second = Eigen::VectorXd::Zero(*kphi + 1);
    Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(*kphi + 1, K + 1);
    Eigen::VectorXd phi(*kphi + 1);
    for (const auto& a : law.atoms()) {
      for (int j = 0; j <= *kphi; ++j) phi(j) = a.char_at(j);
      for (int k = 0; k <= K; ++k) n(k) = static_cast<double>(a.births_at(k));
      c.mean += a.prob * phi;
      second += a.prob * phi.cwiseProduct(phi);
      mixed.noalias() += a.prob * (phi * n.transpose());
    }
    c.variance = (second - c.mean.cwiseProduct(c.mean)).cwiseMax(0.0);
    c.cross = mixed - c.mean * t.mu.transpose();
    t.characteristic = std::move(c);
  }
  return t;
}

CharacteristicSummary char_moments(const OffspringLaw& law, double m) {
  if (!law.has_characteristic()) throw Fault("char_moments: no characteristic attached to the law");
  auto table = moments(law);
  CharacteristicSummary s;
  s.moments = std::move(*table.characteristic);
  const auto& lam = s.moments.mean;
  s.step = lam;
  for (Eigen::Index k = 1; k < lam.size(); ++k) s.step(k) = lam(k) - lam(k - 1);
  // The step vector is finitely supported, so lambda^phi = sum_k step_k m^{-k}.
  s.lambda_total = horner(s.step, 1.0 / m);
  return s;
}

double sigma_hat(const MomentTable& t, Complex z) {
  const Eigen::Index n = t.sigma.rows();
  Eigen::VectorXcd w(n);
  Complex p(1.0);
  for (Eigen::Index k = 0; k < n; ++k, p *= z) w(k) = p;
  const double s = (w.transpose() * t.sigma.cast<Complex>() * w.conjugate()).value().real();
  return std::max(s, 0.0);
}

double sigma_hat(const OffspringLaw& law, Complex z) { return sigma_hat(moments(law), z); }

Complex xi_hat_sample(const LitterAtom& atom, Complex z) {
  Complex acc(0.0);
  for (auto k = static_cast<int>(atom.births.size()); k >= 1; --k)
    acc = acc * z + static_cast<double>(atom.births[k - 1]);
  return acc * z;
}

}  // namespace cmj
