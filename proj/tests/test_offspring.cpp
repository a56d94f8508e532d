#include <algorithm>
#include <random>

#include <doctest.h>

#include "cmj/offspring.hpp"
#include "cmj/spectral.hpp"
#include "oracles.hpp"

using namespace cmj;
using oracle::laws::atom;
using doctest::Approx;

namespace {

OffspringLaw random_law(std::mt19937_64& rng, int K, int atoms) {
  std::uniform_int_distribution<std::uint64_t> count(0, 4);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  std::vector<LitterAtom> out;
  double total = 0.0;
  for (int a = 0; a < atoms; ++a) {
    std::vector<std::uint64_t> births(K);
    for (auto& b : births) b = count(rng);
    births[0] += 1;  // every litter non-empty
    out.push_back(atom(weight(rng), births));
    total += out.back().prob;
  }
  for (auto& a : out) a.prob /= total;
  return OffspringLaw(std::move(out));
}

}  // namespace

TEST_CASE("validate_law") {
  CHECK(validate_law(OffspringLaw({atom(1.0, {2})})).empty());

  const auto critical = validate_law(OffspringLaw({atom(1.0, {1})}));
  REQUIRE(critical.size() == 1);
  CHECK(critical[0].assumption == "A1");

  const OffspringLaw e2c_like({atom(0.5, {0, 9}), atom(0.5, {2, 9})});
  CHECK(validate_law(e2c_like).empty());
  CHECK(moments(e2c_like).mu.sum() == Approx(10.0));

  SUBCASE("empty litter") {
    const auto v = validate_law(OffspringLaw({atom(0.5, {0}), atom(0.5, {6})}));
    REQUIRE(v.size() == 1);
    CHECK(v[0].assumption == "A3");
    CHECK(v[0].atom == 0u);
  }
  SUBCASE("probabilities") {
    CHECK_FALSE(validate_law(OffspringLaw({atom(0.5, {2}), atom(0.4, {3})})).empty());
    CHECK_THROWS_AS(require_valid(OffspringLaw({atom(0.5, {2})})), Fault);
  }
}

TEST_CASE("moments match direct sums") {
  const auto gw = moments(oracle::laws::gw13());
  CHECK(gw.mu(1) == Approx(2.0));
  CHECK(gw.sigma(1, 1) == Approx(1.0));

  const auto b = moments(oracle::laws::e2b());
  CHECK(b.mu(1) == Approx(2.0));
  CHECK(b.mu(2) == Approx(8.0));
  CHECK(b.sigma(1, 1) == Approx(1.0));
  CHECK(b.sigma(1, 2) == 0.0);
  CHECK(b.sigma(2, 2) == 0.0);

  CHECK(moments(oracle::laws::deterministic_12()).sigma.isZero());

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto law = random_law(rng, 1 + trial % 4, 2 + trial % 3);
    const auto lib = moments(law);
    const auto raw = oracle::raw_moments(law);
    CHECK((lib.mu - raw.mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((lib.sigma - raw.sigma).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((lib.sigma - lib.sigma.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(lib.sigma).eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("moments are invariant under atom permutation and splitting") {
  std::mt19937_64 rng(5);
  const auto law = random_law(rng, 3, 4);
  auto atoms = law.atoms();
  std::reverse(atoms.begin(), atoms.end());
  auto split = atoms;
  split[0].prob /= 2;
  split.push_back(split[0]);
  const auto base = moments(law);
  for (const auto& other : {moments(OffspringLaw(atoms)), moments(OffspringLaw(split))}) {
    CHECK((other.mu - base.mu).norm() < 1e-12);
    CHECK((other.sigma - base.sigma).norm() < 1e-12);
  }
}

TEST_CASE("generating functions") {
  CHECK(std::abs(mu_hat(oracle::laws::gw13(), Complex(0.5)) - 1.0) < 1e-15);
  CHECK(std::abs(mu_hat(oracle::laws::e2b(), Complex(-0.5)) - 1.0) < 1e-15);
  CHECK(mu_hat(oracle::laws::e2c(), 0.0) == 0.0);
  CHECK(mu_hat_prime(oracle::laws::e2b(), Complex(-0.5)).real() == Approx(-6.0));

  CHECK(sigma_hat(oracle::laws::gw13(), std::polar(std::sqrt(0.5), 0.7)) == Approx(0.5));
  CHECK(sigma_hat(oracle::laws::e2b(), Complex(-0.5)) == Approx(0.25));
  CHECK(sigma_hat(oracle::laws::deterministic_12(), Complex(0.3, 0.4)) == 0.0);

  CHECK(std::abs(xi_hat_sample(atom(1.0, {3}), Complex(0.5)) - 1.5) < 1e-15);
  const auto e2b_law = oracle::laws::e2b();
  const auto& e2b = e2b_law.atoms();
  CHECK(xi_hat_sample(e2b[0], Complex(-0.5)).real() == Approx(1.5));
  CHECK(xi_hat_sample(e2b[1], Complex(-0.5)).real() == Approx(0.5));
  const auto det = oracle::laws::deterministic_12();
  CHECK(std::abs(xi_hat_sample(det.atoms()[0], Complex(0.2, -0.6)) - mu_hat(det, Complex(0.2, -0.6))) < 1e-15);
}

TEST_CASE("mu_hat is increasing on the positive axis") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto law = random_law(rng, 4, 3);
    double prev = -1.0;
    for (double x = 0.0; x <= 2.0; x += 0.01) {
      const double y = mu_hat(law, x);
      CHECK(y > prev);
      prev = y;
    }
  }
}

TEST_CASE("Sigma is the variance of the realized generating function") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto law = random_law(rng, 1 + trial, 3);
    const auto mom = moments(law);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Complex z(u(rng), u(rng));
      if (std::abs(z) > 1.0) z /= std::abs(z);
      double direct = 0.0;
      for (const auto& a : law.atoms()) direct += a.prob * std::norm(xi_hat_sample(a, z) - mu_hat(law, z));
      worst = std::max(worst, std::abs(sigma_hat(mom, z) - direct));
    }
    CHECK(worst <= 1e-12 * 100);  // sums of O(100) terms
  }
}

TEST_CASE("characteristic moments") {
  SUBCASE("constant one") {
    const auto s = char_moments(oracle::laws::gw13_with({1.0}), 2.0);
    CHECK(s.lambda_total == Approx(1.0));
    CHECK(s.step(0) == Approx(1.0));
    CHECK(s.step.tail(s.step.size() - 1).isZero());
  }
  SUBCASE("deterministic lifelength two") {
    const auto s = char_moments(oracle::laws::gw13_with({1.0, 1.0, 0.0}), 2.0);
    CHECK(s.moments.mean(0) == 1.0);
    CHECK(s.moments.mean(1) == 1.0);
    CHECK(s.moments.mean(2) == 0.0);
    CHECK(s.lambda_total == Approx(0.75));
  }
  SUBCASE("centered coin") {
    const auto s = char_moments(oracle::laws::gw13_coin(), 2.0);
    CHECK(s.moments.mean(0) == 0.0);
    CHECK(s.moments.variance(0) == Approx(1.0));
    CHECK(s.moments.cross.isZero());
  }
  CHECK_THROWS_AS(char_moments(oracle::laws::gw13(), 2.0), Fault);
}
