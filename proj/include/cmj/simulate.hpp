#ifndef CMJ_SIMULATE_HPP
#define CMJ_SIMULATE_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cmj/limits.hpp"
#include "cmj/offspring.hpp"
#include "cmj/spectral.hpp"

namespace cmj {

using CountMatrix = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr std::uint64_t kDefaultCap = std::uint64_t{1} << 62;

/// One realized path, aggregated by cohort. Row n of every matrix belongs
/// to the cohort born at time n.
struct Trace {
  int horizon = 0;
  std::vector<std::uint64_t> B;  // B_0..B_horizon, B_0 = 1
  std::vector<std::uint64_t> Z;  // Z_n = B_0 + ... + B_n
  CountMatrix cohort_atoms;      // (horizon+1) x #atoms
  CountMatrix Bnk;               // (horizon+1) x K; column k-1 holds B_{n,k}
  Eigen::MatrixXd char_sum;      // (horizon+1) x (K_phi+1); empty without a characteristic
  std::uint64_t seed = 0;
  bool capped = false;
};

/// Bit-for-bit equality of every stored field.
bool operator==(const Trace& a, const Trace& b);

/// splitmix64 finalizer applied to (master, index): independent streams
/// for replicates without sharing generator state.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Exact cohort-level simulation. Each cohort is split over the atoms by a
/// multinomial draw (sequential binomials); births and characteristic sums
/// follow as integer and floating sums over atoms. If some count would pass
/// `cap`, the trace stops at the last complete time and `capped` is set.
Trace run(const OffspringLaw& law, int horizon, std::uint64_t seed, std::uint64_t cap = kDefaultCap);

/// X_{n,k} = Z_{n-k} - m^{-k} Z_n, Z_j = 0 for j < 0.
double fluctuation(const Trace& trace, double m, int n, int k);

/// Rows n = 0..horizon - max(0, -k_min), columns k = k_min..k_max.
Eigen::MatrixXd fluctuations(const Trace& trace, double m, int k_min, int k_max);

/// The sequence (X_{n,k})_{k=0..trunc}.
Eigen::VectorXd fluctuation_window(const Trace& trace, double m, int n, Eigen::Index trunc);

struct Innovations {
  Eigen::VectorXd W;    // W_0..W_horizon
  Eigen::MatrixXd Wnk;  // (horizon+1) x K; column k-1 holds W_{n,k}
};

/// W_{n,k} = B_{n,k} - mu_k B_n and W_n = B_n - sum_k mu_k B_{n-k}. Faults
/// if W_n differs from sum_k W_{n-k,k} by more than 1e-9 relative.
Innovations innovations(const Trace& trace, const MomentTable& moments);

/// Z^phi_n summed over all cohorts alive or dead at time n. Also checks the
/// split into the centered part and the mean-step fluctuations.
Eigen::VectorXd char_total(const Trace& trace, const OffspringLaw& law);

/// sum over cohorts of (phi - E phi) at their current age.
Eigen::VectorXd char_centered_total(const Trace& trace, const OffspringLaw& law);

/// -(gamma (gamma - 1) mu_hat'(gamma))^{-1} sum_{k <= n0} gamma^k W_k.
Complex estimate_U(const Trace& trace, const OffspringLaw& law, const SpectralReport& report, Complex gamma,
                   int n0);

/// V_n = sum_l B_{n-l} sum_{i,j <= l} sigma_ij alpha_{l-i} alpha_{l-j} with
/// precomputed alpha_k = <T^k v, a> (at least n + 1 entries).
double martingale_qv(const Trace& trace, const MomentTable& moments, const Eigen::VectorXd& alpha, int n);
double martingale_qv(const Trace& trace, const OffspringLaw& law, double m, const CoeffVector& a, int n);

/// Largest |X_n - (-sum_k W_{n-k} T^k v)| over k <= trunc - n, relative to
/// max(1, max |X_{n,k}|).
double verify_recursion(const Trace& trace, const OffspringLaw& law, double m, int n, Eigen::Index trunc);

}  // namespace cmj

#endif  // CMJ_SIMULATE_HPP
