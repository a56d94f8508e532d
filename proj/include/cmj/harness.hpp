#ifndef CMJ_HARNESS_HPP
#define CMJ_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmj/limits.hpp"
#include "cmj/offspring.hpp"
#include "cmj/simulate.hpp"
#include "cmj/spectral.hpp"

namespace cmj {

/// Finite-n slack. The limit theorems carry no rates, so these are
/// engineering choices; every one is overridable from the config.
struct Tolerances {
  double variance = 0.10;           // relative, regime I
  double variance_regime2 = 0.15;   // relative, regime II (bias decays only like 1/n)
  double skew = 0.15;
  double kurtosis = 0.3;
  double correlation = 0.1;
  double oscillation = 0.15;
  double alternation = 0.9;
  double predictor = 0.2;
  double se_multiple = 3.0;

  friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct ExperimentConfig {
  OffspringLaw law;
  int horizon = 14;
  int replicates = 10000;
  std::uint64_t seed = 0;
  std::vector<int> lags{1};
  std::vector<int> ells;       // lag-correlation offsets
  int predictor_order = 0;     // 0 skips the backtest in `verify`
  Tolerances tol;
  std::uint64_t cap = kDefaultCap;
  int quadrature_points = 4096;
  unsigned threads = 0;        // 0: hardware concurrency

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws Fault unless replicates >= 100, horizon >= 2K and the lags fit.
void validate_experiment(const ExperimentConfig& config);

struct MomentStats {
  std::size_t count = 0;
  double mean = 0.0, variance = 0.0, skewness = 0.0, excess_kurtosis = 0.0;
  double se_mean = 0.0, se_variance = 0.0, se_skewness = 0.0, se_kurtosis = 0.0;
};

/// Two-pass sample moments in input order. Skewness and kurtosis are zero
/// for a sample without spread.
MomentStats summarize(const std::vector<double>& xs);

/// Var(X/sqrt(Z)) style comparison for one statistic.
struct LagRow {
  std::string label;
  int k = 0;
  MomentStats stats;
  double predicted = 0.0;
  double rel_error = 0.0;
  bool checked = true;  // false where no Gaussian limit is claimed
  bool variance_pass = true;
  bool normal_pass = true;
};

struct CorrelationRow {
  int k = 0;
  int ell = 0;
  double empirical = 0.0;
  double predicted = 0.0;
  bool pass = true;
};

struct OscillationSummary {
  int horizon = 0;
  double median_residual = 0.0;
  double median_profile = 0.0;
  double relative = 0.0;
  bool alternation_checked = false;
  double alternation = 0.0;  // fraction of replicates whose sign flips every step at the end
  std::vector<MomentStats> U_real, U_imag;
  /// E U_i. The founder enters the innovations as the constant W_0 = 1,
  /// so the mean is -(gamma (gamma - 1) mu_hat'(gamma))^{-1}, not 0.
  std::vector<Complex> U_expected;
  bool degenerate = false;  // Sigma vanishes at every critical root
  bool residual_pass = true, alternation_pass = true, null_pass = true;
};

struct BacktestSummary {
  int order = 0;
  std::size_t replicates = 0;
  double mse = 0.0, naive_mse = 0.0;
  double predicted = 0.0, predicted_naive = 0.0;
  double rel_error = 0.0;
  bool beats_naive = true;
  bool pass = true;
};

struct VerificationReport {
  Regime regime = Regime::I;
  double m = 0.0;
  int horizon = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::string normalization;
  std::vector<LagRow> rows;
  std::optional<LagRow> characteristic;
  std::vector<CorrelationRow> correlations;
  std::optional<OscillationSummary> oscillation;
  std::optional<BacktestSummary> backtest;
  std::size_t capped = 0;

  bool passed() const;
};

/// Independent replicates with streams derive_seed(seed, i). Runs on
/// `threads` workers; results are stored by index so the output does not
/// depend on scheduling.
std::vector<Trace> simulate_replicates(const OffspringLaw& law, int horizon, int replicates, std::uint64_t seed,
                                       std::uint64_t cap, unsigned threads);

/// Normalizer applied to X_{n,k}: sqrt(Z_n), sqrt(n Z_n) or gamma*^{-n}.
double normalizer(const SpectralReport& report, const Trace& trace, int n);

std::string normalization_label(Regime regime);

/// Empirical moments of the normalized fluctuations at the horizon against
/// the limit variances. Refuses on non-simple critical roots.
VerificationReport run_experiment(const ExperimentConfig& config);

std::vector<CorrelationRow> lag_correlation_check(const ExperimentConfig& config, int k, const std::vector<int>& ells);

OscillationSummary oscillation_residual(const ExperimentConfig& config);

BacktestSummary predictor_backtest(const ExperimentConfig& config, int order);

/// run_experiment plus the regime-appropriate extras: lag correlations for
/// config.ells, the predictor backtest when predictor_order > 0, and the
/// oscillation summary in regime III.
VerificationReport verify(const ExperimentConfig& config);

struct PropertyCheck {
  std::string name;
  double statistic = 0.0;
  double bound = 0.0;
  bool pass = false;
};

/// Fitted growth of log E ||X_n||^2 (unit weights) over n in [from, to].
/// Regime I: slope within 0.1 of log m. Regime II: the coefficient of
/// log n after removing n log m lies in (0.5, 1.5).
PropertyCheck moment_growth(const ExperimentConfig& config, int from, int to);

/// Covariance of the normalized X_{n,k} with Z_1 within se_multiple SE of 0.
PropertyCheck mixing_check(const ExperimentConfig& config, int k);

/// Empirical variance at horizon and 2 * horizon within se_multiple
/// combined SE (regime I).
PropertyCheck horizon_coherence(const ExperimentConfig& config, int k);

/// Sample mean of W_{n,k} / sqrt(E Z_n) within se_multiple SE of 0.
PropertyCheck innovation_null(const ExperimentConfig& config, int n, int k);

/// E Z_n from the renewal recurrence E B_n = sum_k mu_k E B_{n-k}.
std::vector<double> expected_population(const OffspringLaw& law, int horizon);

}  // namespace cmj

#endif  // CMJ_HARNESS_HPP
