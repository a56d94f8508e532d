#include "cmj/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "cmj/errors.hpp"

namespace cmj {

namespace {

constexpr std::uint64_t kBacktestStream = 0x6261636b74657374ULL;
constexpr std::uint64_t kCoherenceStream = 0x636f686572656e63ULL;

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  if (xs.size() % 2 == 1) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(xs.begin(), mid));
}

double relative_error(double empirical, double predicted) {
  if (predicted == 0.0) return empirical == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(empirical - predicted) / std::abs(predicted);
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

SpectralReport classified(const ExperimentConfig& config) {
  validate_experiment(config);
  SpectralReport rep = classify(config.law);
  rep.require_simple();
  return rep;
}

std::vector<const Trace*> complete(const std::vector<Trace>& traces, int horizon) {
  std::vector<const Trace*> kept;
  for (const auto& t : traces)
    if (!t.capped && t.horizon == horizon) kept.push_back(&t);
  return kept;
}

LagRow make_row(std::string label, int k, const std::vector<double>& xs, double predicted, bool checked,
                double var_tol, const Tolerances& tol) {
  LagRow row;
  row.label = std::move(label);
  row.k = k;
  row.stats = summarize(xs);
  row.predicted = predicted;
  row.checked = checked;
  if (!checked) {
    row.rel_error = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  row.rel_error = relative_error(row.stats.variance, predicted);
  row.variance_pass = row.stats.count >= 2 && row.rel_error <= var_tol;
  row.normal_pass = row.stats.variance == 0.0 ||
                    (std::abs(row.stats.skewness) < tol.skew && std::abs(row.stats.excess_kurtosis) < tol.kurtosis);
  return row;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

void validate_experiment(const ExperimentConfig& config) {
  require_valid(config.law);
  std::ostringstream os;
  if (config.replicates < 100) os << "replicates = " << config.replicates << " < 100; ";
  if (config.horizon < 2 * config.law.max_age())
    os << "horizon = " << config.horizon << " < 2K = " << 2 * config.law.max_age() << "; ";
  for (int k : config.lags)
    if (k < 0) os << "lag " << k << " is negative; ";
  for (int l : config.ells)
    if (l < 0 || l >= config.horizon) os << "lag offset " << l << " outside [0, horizon); ";
  if (config.predictor_order < 0) os << "predictor_order is negative; ";
  if (config.quadrature_points < 8) os << "quadrature_points < 8; ";
  const auto msg = os.str();
  if (!msg.empty()) throw Fault("invalid experiment: " + msg.substr(0, msg.size() - 2));
}

MomentStats summarize(const std::vector<double>& xs) {
  MomentStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  const auto n = static_cast<double>(xs.size());
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (*lo == *hi) {  // no spread; avoid rounding noise in the moments
    s.mean = *lo;
    s.se_skewness = std::sqrt(6.0 / n);
    s.se_kurtosis = std::sqrt(24.0 / n);
    return s;
  }
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : xs) {
    const double d = x - mean, d2 = d * d;
    m2 += d2, m3 += d2 * d, m4 += d2 * d2;
  }
  m2 /= n, m3 /= n, m4 /= n;
  s.mean = mean;
  s.variance = xs.size() > 1 ? m2 * n / (n - 1.0) : 0.0;
  if (m2 > 0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  s.se_mean = std::sqrt(s.variance / n);
  s.se_variance = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  s.se_skewness = std::sqrt(6.0 / n);
  s.se_kurtosis = std::sqrt(24.0 / n);
  return s;
}

bool VerificationReport::passed() const {
  for (const auto& r : rows)
    if (r.checked && !(r.variance_pass && r.normal_pass)) return false;
  if (characteristic && characteristic->checked && !(characteristic->variance_pass && characteristic->normal_pass))
    return false;
  for (const auto& c : correlations)
    if (!c.pass) return false;
  if (oscillation && !(oscillation->residual_pass && oscillation->alternation_pass && oscillation->null_pass))
    return false;
  if (backtest && !backtest->pass) return false;
  return static_cast<std::size_t>(replicates) >= capped + 2;
}

std::vector<Trace> simulate_replicates(const OffspringLaw& law, int horizon, int replicates, std::uint64_t seed,
                                       std::uint64_t cap, unsigned threads) {
  require_valid(law);
  std::vector<Trace> out(static_cast<std::size_t>(replicates));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < out.size(); i = next++) out[i] = run(law, horizon, derive_seed(seed, i), cap);
  };
  const unsigned workers = worker_count(threads, out.size());
  if (workers <= 1) {
    work();
    return out;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  return out;
}

double normalizer(const SpectralReport& report, const Trace& trace, int n) {
  const double z = static_cast<double>(trace.Z[n]);
  switch (report.regime) {
    case Regime::I: return std::sqrt(z);
    case Regime::II: return std::sqrt(std::max(n, 1) * z);
    case Regime::III: return std::pow(report.gamma_star, -n);
  }
  return 1.0;
}

std::string normalization_label(Regime regime) {
  switch (regime) {
    case Regime::I: return "X/sqrt(Z_n)";
    case Regime::II: return "X/sqrt(n Z_n)";
    case Regime::III: return "gamma*^n X";
  }
  return "?";
}

VerificationReport run_experiment(const ExperimentConfig& config) {
  const SpectralReport rep = classified(config);
  const MomentTable mt = moments(config.law);
  std::optional<LimitSpectrum> spectrum;
  if (rep.regime != Regime::III) spectrum = build_spectrum(rep, mt, config.quadrature_points);

  VerificationReport out;
  out.regime = rep.regime;
  out.m = rep.m;
  out.horizon = config.horizon;
  out.replicates = config.replicates;
  out.seed = config.seed;
  out.normalization = normalization_label(rep.regime);

  const int n = config.horizon;
  const auto traces =
      simulate_replicates(config.law, n, config.replicates, config.seed, config.cap, config.threads);
  const auto kept = complete(traces, n);
  out.capped = traces.size() - kept.size();

  const double var_tol = rep.regime == Regime::II ? config.tol.variance_regime2 : config.tol.variance;
  for (int k : config.lags) {
    std::vector<double> xs;
    xs.reserve(kept.size());
    for (const Trace* t : kept) xs.push_back(fluctuation(*t, rep.m, n, k) / normalizer(rep, *t, n));
    const bool checked = spectrum.has_value();
    const double predicted = checked ? variance(*spectrum, unit_lag(k)) : std::numeric_limits<double>::quiet_NaN();
    std::ostringstream label;
    label << "X_n_" << k;
    out.rows.push_back(make_row(label.str(), k, xs, predicted, checked, var_tol, config.tol));
  }

  if (config.law.has_characteristic()) {
    const auto summary = char_moments(config.law, rep.m);
    const bool centered = summary.moments.mean.cwiseAbs().maxCoeff() <= 1e-12;
    const bool checked = centered || rep.regime == Regime::I;
    double predicted = std::numeric_limits<double>::quiet_NaN();
    if (centered)
      predicted = char_variance_centered(config.law, rep.m);
    else if (checked)
      predicted = char_variance_full(config.law, rep, *spectrum);
    std::vector<double> xs;
    for (const Trace* t : kept) {
      const double zphi = char_total(*t, config.law)(n);
      const double z = static_cast<double>(t->Z[n]);
      xs.push_back((zphi - summary.lambda_total * z) / std::sqrt(z));
    }
    out.characteristic =
        make_row("(Z^phi - lambda^phi Z)/sqrt(Z)", 0, xs, predicted, checked, config.tol.variance, config.tol);
  }
  return out;
}

std::vector<CorrelationRow> lag_correlation_check(const ExperimentConfig& config, int k,
                                                  const std::vector<int>& ells) {
  const SpectralReport rep = classified(config);
  if (rep.regime == Regime::III) throw Refusal("lag_correlation_check: no limit correlation in regime III");
  const LimitSpectrum spectrum = build_spectrum(rep, moments(config.law), config.quadrature_points);
  const int n = config.horizon;
  const auto traces =
      simulate_replicates(config.law, n, config.replicates, config.seed, config.cap, config.threads);
  const auto kept = complete(traces, n);
  const double base = cov_lagged(spectrum, k, 0);

  std::vector<CorrelationRow> rows;
  for (int ell : ells) {
    if (ell < 0 || n - ell < 1) throw Fault("lag_correlation_check: need 0 <= ell < horizon");
    CorrelationRow row;
    row.k = k;
    row.ell = ell;
    row.predicted = base > 0 ? cov_lagged(spectrum, k, ell) / base : 0.0;
    if (ell == 0) {
      row.empirical = 1.0;
      row.predicted = 1.0;
    } else {
      std::vector<double> now, before;
      for (const Trace* t : kept) {
        now.push_back(fluctuation(*t, rep.m, n, k) / normalizer(rep, *t, n));
        before.push_back(fluctuation(*t, rep.m, n - ell, k) / normalizer(rep, *t, n - ell));
      }
      row.empirical = correlation(now, before);
    }
    row.pass = std::abs(row.empirical - row.predicted) <= config.tol.correlation;
    rows.push_back(row);
  }
  return rows;
}

OscillationSummary oscillation_residual(const ExperimentConfig& config) {
  const SpectralReport rep = classified(config);
  if (rep.regime != Regime::III) throw Refusal("oscillation_residual: regime III only");
  const MomentTable mt = moments(config.law);
  const int n = config.horizon;
  int trunc = config.law.max_age();
  for (int k : config.lags) trunc = std::max(trunc, k);

  const auto traces =
      simulate_replicates(config.law, n, config.replicates, config.seed, config.cap, config.threads);
  const auto kept = complete(traces, n);
  const auto q = rep.critical.size();

  OscillationSummary out;
  out.horizon = n;
  out.degenerate = std::all_of(rep.critical.begin(), rep.critical.end(),
                               [&](Complex g) { return sigma_hat(mt, g) <= 1e-14; });
  const bool alternating = q == 1 && rep.critical[0].imag() == 0.0 && rep.critical[0].real() < 0.0 && n >= 5;
  out.alternation_checked = alternating;

  std::vector<double> residuals, profiles;
  std::vector<std::vector<double>> ure(q), uim(q);
  std::size_t flips = 0;
  const double scale = std::pow(rep.gamma_star, n);
  for (const Trace* t : kept) {
    std::vector<Complex> U;
    for (std::size_t i = 0; i < q; ++i) {
      U.push_back(estimate_U(*t, config.law, rep, rep.critical[i], n));
      ure[i].push_back(U.back().real());
      uim[i].push_back(U.back().imag());
    }
    const Eigen::VectorXd profile = oscillation_profile(rep, U, n, trunc);
    const Eigen::VectorXd x = scale * fluctuation_window(*t, rep.m, n, trunc);
    residuals.push_back((x - profile).norm());
    profiles.push_back(profile.norm());
    if (alternating) {
      bool ok = true;
      for (int j = n - 3; j <= n && ok; ++j)
        ok = fluctuation(*t, rep.m, j, 1) * fluctuation(*t, rep.m, j - 1, 1) < 0.0;
      flips += ok;
    }
  }
  out.median_residual = median(residuals);
  out.median_profile = median(profiles);
  out.relative = out.median_profile > 0 ? out.median_residual / out.median_profile
                                        : (out.median_residual == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  out.residual_pass = !kept.empty() && out.relative < config.tol.oscillation;
  if (alternating) {
    out.alternation = kept.empty() ? 0.0 : static_cast<double>(flips) / static_cast<double>(kept.size());
    out.alternation_pass = out.alternation >= config.tol.alternation;
  }
  for (std::size_t i = 0; i < q; ++i) {
    const Complex g = rep.critical[i];
    const Complex expected = -1.0 / (g * (g - 1.0) * rep.derivs[i]);
    out.U_expected.push_back(expected);
    out.U_real.push_back(summarize(ure[i]));
    out.U_imag.push_back(summarize(uim[i]));
    const auto& re = out.U_real.back();
    const auto& im = out.U_imag.back();
    out.null_pass = out.null_pass && std::abs(re.mean - expected.real()) <= config.tol.se_multiple * re.se_mean &&
                    std::abs(im.mean - expected.imag()) <= config.tol.se_multiple * im.se_mean;
  }
  return out;
}

BacktestSummary predictor_backtest(const ExperimentConfig& config, int order) {
  const SpectralReport rep = classified(config);
  if (rep.regime == Regime::III) throw Refusal("predictor_backtest: no limit measure in regime III");
  const LimitSpectrum spectrum = build_spectrum(rep, moments(config.law), config.quadrature_points);
  const Predictor pred = predictor_coeffs(spectrum, order);
  const int n = config.horizon;
  const auto traces = simulate_replicates(config.law, n + 1, config.replicates, derive_seed(config.seed, kBacktestStream),
                                          config.cap, config.threads);
  const auto kept = complete(traces, n + 1);

  BacktestSummary out;
  out.order = order;
  out.replicates = kept.size();
  Eigen::VectorXd lagged(order);
  for (const Trace* t : kept) {
    const double z = static_cast<double>(t->Z[n]);
    for (int k = 1; k <= order; ++k) lagged(k - 1) = fluctuation(*t, rep.m, n, k);
    const double next = static_cast<double>(t->Z[n + 1]);
    const double s = normalizer(rep, *t, n);
    const double e = (next - pred.predict(z, lagged)) / s;
    const double e0 = (next - rep.m * z) / s;
    out.mse += e * e;
    out.naive_mse += e0 * e0;
  }
  if (!kept.empty()) {
    out.mse /= static_cast<double>(kept.size());
    out.naive_mse /= static_cast<double>(kept.size());
  }
  out.predicted = pred.residual_norm * pred.residual_norm;
  out.predicted_naive = pred.naive_norm * pred.naive_norm;
  // A vanishing predicted residual has no relative scale of its own; the
  // naive residual then sets it.
  const double denom = out.predicted > 1e-6 * out.predicted_naive ? out.predicted : out.predicted_naive;
  out.rel_error = denom > 0 ? std::abs(out.mse - out.predicted) / denom : relative_error(out.mse, out.predicted);
  if (pred.residual_norm < pred.naive_norm * (1.0 - 1e-9)) out.beats_naive = out.mse < out.naive_mse;
  out.pass = !kept.empty() && out.rel_error <= config.tol.predictor && out.beats_naive;
  return out;
}

VerificationReport verify(const ExperimentConfig& config) {
  VerificationReport report = run_experiment(config);
  if (report.regime == Regime::III) {
    report.oscillation = oscillation_residual(config);
    return report;
  }
  if (!config.ells.empty())
    for (int k : config.lags) {
      auto rows = lag_correlation_check(config, k, config.ells);
      report.correlations.insert(report.correlations.end(), rows.begin(), rows.end());
    }
  if (config.predictor_order > 0) report.backtest = predictor_backtest(config, config.predictor_order);
  return report;
}

std::vector<double> expected_population(const OffspringLaw& law, int horizon) {
  const auto& mu = law.intensity();
  const int K = law.max_age();
  std::vector<double> b(horizon + 1, 0.0), z(horizon + 1, 0.0);
  for (int n = 0; n <= horizon; ++n) {
    b[n] = n == 0 ? 1.0 : 0.0;
    for (int k = 1; k <= std::min(n, K); ++k) b[n] += mu(k) * b[n - k];
    z[n] = b[n] + (n > 0 ? z[n - 1] : 0.0);
  }
  return z;
}

PropertyCheck moment_growth(const ExperimentConfig& config, int from, int to) {
  const SpectralReport rep = classified(config);
  if (from < 1 || to <= from) throw Fault("moment_growth: need 1 <= from < to");
  const auto traces = simulate_replicates(config.law, to, config.replicates, config.seed, config.cap, config.threads);
  const auto kept = complete(traces, to);
  std::vector<double> ns, logs;
  for (int n = from; n <= to; ++n) {
    double acc = 0.0;
    for (const Trace* t : kept) {
      const Eigen::VectorXd x = fluctuation_window(*t, rep.m, n, n + 64);
      acc += x.squaredNorm();
    }
    ns.push_back(n);
    logs.push_back(std::log(acc / static_cast<double>(kept.size())));
  }
  PropertyCheck c;
  if (rep.regime == Regime::II) {
    c.name = "log-n coefficient of log E||X_n||^2 - n log m";
    std::vector<double> logn, resid;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      logn.push_back(std::log(ns[i]));
      resid.push_back(logs[i] - ns[i] * rep.alpha);
    }
    c.statistic = slope(logn, resid);
    c.bound = 1.0;
    c.pass = c.statistic > 0.5 && c.statistic < 1.5;
  } else {
    c.name = "slope of log E||X_n||^2";
    c.statistic = slope(ns, logs);
    c.bound = rep.regime == Regime::I ? rep.alpha : -2.0 * std::log(rep.gamma_star);
    c.pass = std::abs(c.statistic - c.bound) <= 0.1;
  }
  return c;
}

PropertyCheck mixing_check(const ExperimentConfig& config, int k) {
  const SpectralReport rep = classified(config);
  const int n = config.horizon;
  const auto traces = simulate_replicates(config.law, n, config.replicates, config.seed, config.cap, config.threads);
  const auto kept = complete(traces, n);
  std::vector<double> x, y;
  for (const Trace* t : kept) {
    x.push_back(fluctuation(*t, rep.m, n, k) / normalizer(rep, *t, n));
    y.push_back(static_cast<double>(t->Z[1]));
  }
  const auto sx = summarize(x), sy = summarize(y);
  std::vector<double> prod;
  for (std::size_t i = 0; i < x.size(); ++i) prod.push_back((x[i] - sx.mean) * (y[i] - sy.mean));
  const auto sp = summarize(prod);
  PropertyCheck c;
  c.name = "Cov(normalized X_{n,k}, Z_1)";
  c.statistic = sp.mean;
  c.bound = config.tol.se_multiple * sp.se_mean;
  c.pass = std::abs(c.statistic) <= c.bound;
  return c;
}

PropertyCheck horizon_coherence(const ExperimentConfig& config, int k) {
  const SpectralReport rep = classified(config);
  if (rep.regime != Regime::I) throw Refusal("horizon_coherence: regime I only");
  auto variance_at = [&](int n, std::uint64_t seed) {
    const auto traces = simulate_replicates(config.law, n, config.replicates, seed, config.cap, config.threads);
    std::vector<double> xs;
    for (const Trace* t : complete(traces, n)) xs.push_back(fluctuation(*t, rep.m, n, k) / normalizer(rep, *t, n));
    return summarize(xs);
  };
  const auto a = variance_at(config.horizon, config.seed);
  const auto b = variance_at(2 * config.horizon, derive_seed(config.seed, kCoherenceStream));
  PropertyCheck c;
  c.name = "variance change under doubled horizon";
  c.statistic = b.variance - a.variance;
  c.bound = config.tol.se_multiple * std::hypot(a.se_variance, b.se_variance);
  c.pass = std::abs(c.statistic) <= c.bound;
  return c;
}

PropertyCheck innovation_null(const ExperimentConfig& config, int n, int k) {
  validate_experiment(config);
  if (n < 0 || n > config.horizon || k < 1 || k > config.law.max_age())
    throw Fault("innovation_null: need 0 <= n <= horizon and 1 <= k <= K");
  const auto ez = expected_population(config.law, n);
  const MomentTable mt = moments(config.law);
  const auto traces = simulate_replicates(config.law, n, config.replicates, config.seed, config.cap, config.threads);
  std::vector<double> xs;
  for (const Trace* t : complete(traces, n)) xs.push_back(innovations(*t, mt).Wnk(n, k - 1) / std::sqrt(ez[n]));
  const auto s = summarize(xs);
  PropertyCheck c;
  c.name = "mean of W_{n,k}/sqrt(E Z_n)";
  c.statistic = s.mean;
  c.bound = config.tol.se_multiple * s.se_mean;
  c.pass = std::abs(c.statistic) <= c.bound;
  return c;
}

}  // namespace cmj
