#ifndef CMJ_OFFSPRING_HPP
#define CMJ_OFFSPRING_HPP

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cmj {

using Complex = std::complex<double>;

/// One point of the joint law of the litter vector (N_1, ..., N_K) and,
/// optionally, of a random characteristic realized together with it.
///
/// `births[k - 1]` is the number of children born at age k. Age 0 has no
/// slot, so no child can be born instantaneously.
///
/// `char_values[a]` is the characteristic at age a for a = 0..K_phi. Ages
/// beyond K_phi hold the last value, so a finite vector describes both
/// eventually-zero scores (lifelength indicators) and eventually-constant
/// ones (the constant 1 counts every individual).
struct LitterAtom {
  double prob = 0.0;
  std::vector<std::uint64_t> births;
  std::optional<std::vector<double>> char_values;

  std::uint64_t births_at(int age) const {
    return age >= 1 && age <= static_cast<int>(births.size()) ? births[age - 1] : 0;
  }
  std::uint64_t total_births() const;
  double char_at(int age) const;

  friend bool operator==(const LitterAtom&, const LitterAtom&) = default;
};

/// Finite-support offspring law. Immutable after construction; the mean
/// intensity vector is cached because every spectral routine evaluates it.
class OffspringLaw {
 public:
  OffspringLaw() = default;
  explicit OffspringLaw(std::vector<LitterAtom> atoms);

  const std::vector<LitterAtom>& atoms() const { return atoms_; }
  /// Largest age with a non-zero birth count in any atom (K).
  int max_age() const { return max_age_; }
  /// K_phi, or empty when no characteristic is attached.
  std::optional<int> char_max_age() const { return char_max_age_; }
  bool has_characteristic() const { return char_max_age_.has_value(); }

  /// Age-indexed mean intensity: entry k is mu_k, entry 0 is zero.
  const Eigen::VectorXd& intensity() const { return intensity_; }

  friend bool operator==(const OffspringLaw& a, const OffspringLaw& b) { return a.atoms_ == b.atoms_; }

 private:
  std::vector<LitterAtom> atoms_;
  int max_age_ = 0;
  std::optional<int> char_max_age_;
  Eigen::VectorXd intensity_ = Eigen::VectorXd::Zero(1);
};

struct Violation {
  std::string assumption;  // "A1".."A4" or "law" for structural problems
  std::string detail;
  std::optional<std::size_t> atom;
};

/// Moments of the characteristic, age-indexed 0..K_phi. Entries for older
/// ages equal the K_phi entry.
struct CharacteristicMoments {
  Eigen::VectorXd mean;      // lambda^phi_k = E phi(k)
  Eigen::VectorXd variance;  // Var phi(k)
  Eigen::MatrixXd cross;     // gamma^phi_{j,k} = Cov(phi(j), N_k); column 0 is zero
};

/// Exact moments of a law. Vectors and matrices are age-indexed with a zero
/// age-0 slot, so `mu(k)` is mu_k and `sigma(j, k)` is Cov(N_j, N_k).
struct MomentTable {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  std::optional<CharacteristicMoments> characteristic;
};

/// Characteristic moments together with the quantities that need m.
struct CharacteristicSummary {
  CharacteristicMoments moments;
  /// lambda^phi = (1 - 1/m) sum_k m^{-k} E phi(k).
  double lambda_total = 0.0;
  /// (lambda_k - lambda_{k-1})_{k=0..K_phi}; zero beyond K_phi.
  Eigen::VectorXd step;
};

std::vector<Violation> validate_law(const OffspringLaw& law);
/// Throws Fault listing the violations when the law is invalid.
void require_valid(const OffspringLaw& law);

MomentTable moments(const OffspringLaw& law);
CharacteristicSummary char_moments(const OffspringLaw& law, double m);

/// Horner evaluation of sum_k c_k z^k.
template <typename Derived, typename Scalar>
Scalar horner(const Eigen::MatrixBase<Derived>& coeffs, Scalar z) {
  Scalar acc(0);
  for (Eigen::Index k = coeffs.size() - 1; k >= 0; --k) acc = acc * z + Scalar(coeffs(k));
  return acc;
}

/// Horner evaluation of d/dz sum_k c_k z^k.
template <typename Derived, typename Scalar>
Scalar horner_derivative(const Eigen::MatrixBase<Derived>& coeffs, Scalar z) {
  Scalar acc(0);
  for (Eigen::Index k = coeffs.size() - 1; k >= 1; --k) acc = acc * z + Scalar(static_cast<double>(k) * coeffs(k));
  return acc;
}

/// Generating function of the intensity, sum_k mu_k z^k.
template <typename Scalar>
Scalar mu_hat(const OffspringLaw& law, Scalar z) {
  return horner(law.intensity(), z);
}

template <typename Scalar>
Scalar mu_hat_prime(const OffspringLaw& law, Scalar z) {
  return horner_derivative(law.intensity(), z);
}

/// Sigma(z) = sum_{i,j} sigma_ij z^i conj(z)^j, clamped at zero.
double sigma_hat(const MomentTable& moments, Complex z);
double sigma_hat(const OffspringLaw& law, Complex z);

/// Realized generating function sum_k n_k z^k of one litter.
Complex xi_hat_sample(const LitterAtom& atom, Complex z);

}  // namespace cmj

#endif  // CMJ_OFFSPRING_HPP
