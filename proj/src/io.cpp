#include "cmj/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <tuple>
#include <ostream>

namespace cmj {

namespace {

std::string short_fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string short_fmt(Complex z) {
  if (z.imag() == 0.0) return short_fmt(z.real());
  return short_fmt(z.real()) + (z.imag() < 0 ? " - " : " + ") + short_fmt(std::abs(z.imag())) + "i";
}

void write_stats(std::ostream& os, const MomentStats& s) {
  os << s.count << ',' << fmt(s.mean) << ',' << fmt(s.se_mean) << ',' << fmt(s.variance) << ','
     << fmt(s.se_variance) << ',' << fmt(s.skewness) << ',' << fmt(s.se_skewness) << ','
     << fmt(s.excess_kurtosis) << ',' << fmt(s.se_kurtosis);
}

const char* verdict(bool pass) { return pass ? "pass" : "FAIL"; }

}  // namespace

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_header(std::ostream& os, const Provenance& p) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, p.config_hash);
  os << "# cmj " << kVersion << '\n' << "# config_hash " << hash << '\n' << "# seed " << p.seed << '\n';
  if (!p.extra.empty()) os << "# " << p.extra << '\n';
}

void write_spectral_report(std::ostream& os, const SpectralReport& r) {
  os << "m            " << short_fmt(r.m) << '\n';
  os << "alpha        " << short_fmt(r.alpha) << '\n';
  os << "regime       " << to_string(r.regime) << '\n';
  os << "gamma*       " << short_fmt(r.gamma_star) << '\n';
  os << "margin       " << short_fmt(r.margin) << "  (gamma* sqrt(m) - 1, tolerance " << short_fmt(r.tolerance)
     << ")\n";
  for (std::size_t i = 0; i < r.critical.size(); ++i)
    os << "critical     " << short_fmt(r.critical[i]) << "  derivative " << short_fmt(r.derivs[i]) << '\n';
  os << "simple       " << (r.simple ? "yes" : "no") << '\n';
  if (r.roots_flagged) os << "warning      some roots did not polish below 1e-10\n";
  os << "roots\n";
  for (const auto& root : r.roots)
    os << "  " << short_fmt(root.value) << "  |z| " << short_fmt(std::abs(root.value)) << "  residual "
       << short_fmt(root.residual) << (root.multiplicity > 1 ? "  multiple" : "") << '\n';
}

void write_roots_csv(std::ostream& os, const OffspringLaw& law, const SpectralReport& r) {
  os << "re,im,modulus,residual,multiplicity,deriv_re,deriv_im\n";
  for (const auto& root : r.roots) {
    const Complex d = mu_hat_prime(law, root.value);
    os << fmt(root.value.real()) << ',' << fmt(root.value.imag()) << ',' << fmt(std::abs(root.value)) << ','
       << fmt(root.residual) << ',' << root.multiplicity << ',' << fmt(d.real()) << ',' << fmt(d.imag()) << '\n';
  }
}

void write_variance_csv(std::ostream& os, const OffspringLaw& law, const SpectralReport& report,
                        const LimitSpectrum& spectrum, const std::vector<int>& lags, const std::vector<int>& ells) {
  os << "k,ell,covariance,correlation,method\n";
  const char* method = spectrum.kind == SpectrumKind::Circle ? "quadrature" : "atoms";
  for (int k : lags) {
    const double base = cov_lagged(spectrum, k, 0);
    os << k << ",0," << fmt(base) << ",1," << method << '\n';
    if (report.regime == Regime::I && k >= 0)
      os << k << ",0," << fmt(sigma2_series(law, report, unit_lag(k))) << ",1,series\n";
    for (int ell : ells) {
      if (ell == 0) continue;
      const double c = cov_lagged(spectrum, k, ell);
      os << k << ',' << ell << ',' << fmt(c) << ',' << fmt(base > 0 ? c / base : 0.0) << ',' << method << '\n';
    }
  }
}

void write_spectrum_csv(std::ostream& os, const LimitSpectrum& s) {
  os << "re,im,theta,density,weight\n";
  for (Eigen::Index j = 0; j < s.nodes.size(); ++j)
    os << fmt(s.nodes(j).real()) << ',' << fmt(s.nodes(j).imag()) << ',' << fmt(std::arg(s.nodes(j))) << ','
       << fmt(s.density(j)) << ',' << fmt(s.weights(j)) << '\n';
}

void write_trace_csv(std::ostream& os, const Trace& t, const OffspringLaw& law) {
  const auto K = t.Bnk.cols();
  const bool with_char = law.has_characteristic() && t.char_sum.size() > 0;
  os << "n,B,Z";
  for (Eigen::Index k = 1; k <= K; ++k) os << ",B_n_" << k;
  if (with_char) os << ",Z_phi";
  os << '\n';
  Eigen::VectorXd zphi;
  if (with_char) zphi = char_total(t, law);
  for (int n = 0; n <= t.horizon; ++n) {
    os << n << ',' << t.B[n] << ',' << t.Z[n];
    for (Eigen::Index k = 0; k < K; ++k) os << ',' << t.Bnk(n, k);
    if (with_char) os << ',' << fmt(zphi(n));
    os << '\n';
  }
}

void write_verification_csv(std::ostream& os, const VerificationReport& r) {
  os << "kind,label,k,ell,count,mean,se_mean,variance,se_variance,skewness,se_skewness,excess_kurtosis,se_kurtosis,"
        "predicted,rel_error,pass\n";
  auto row = [&](const LagRow& x) {
    os << "moments," << x.label << ',' << x.k << ",,";
    write_stats(os, x.stats);
    os << ',' << fmt(x.predicted) << ',' << fmt(x.rel_error) << ','
       << (x.checked ? verdict(x.variance_pass && x.normal_pass) : "n/a") << '\n';
  };
  for (const auto& x : r.rows) row(x);
  if (r.characteristic) row(*r.characteristic);
  // Scalar rows put the empirical value in the mean column.
  auto scalar = [&](const std::string& kind, const std::string& label, const std::string& k, const std::string& ell,
                    const std::string& count, double value, const std::string& predicted, const std::string& rel,
                    bool pass) {
    os << kind << ',' << label << ',' << k << ',' << ell << ',' << count << ',' << fmt(value) << ",,,,,,,," << predicted
       << ',' << rel << ',' << verdict(pass) << '\n';
  };
  for (const auto& c : r.correlations)
    scalar("correlation", "corr", std::to_string(c.k), std::to_string(c.ell), "", c.empirical, fmt(c.predicted),
           fmt(std::abs(c.empirical - c.predicted)), c.pass);
  if (r.oscillation) {
    const auto& o = *r.oscillation;
    scalar("oscillation", "median_residual", "", "", "", o.median_residual, fmt(o.median_profile), fmt(o.relative),
           o.residual_pass);
    if (o.alternation_checked)
      scalar("oscillation", "alternation", "1", "", "", o.alternation, "", "", o.alternation_pass);
    for (std::size_t i = 0; i < o.U_real.size(); ++i)
      for (const auto& [label, st, expected] :
           {std::tuple{"U_re", &o.U_real[i], o.U_expected[i].real()}, std::tuple{"U_im", &o.U_imag[i], o.U_expected[i].imag()}}) {
        os << "oscillation," << label << ',' << i + 1 << ",,";
        write_stats(os, *st);
        os << ',' << fmt(expected) << ",," << verdict(o.null_pass) << '\n';
      }
  }
  if (r.backtest) {
    const auto& b = *r.backtest;
    const auto count = std::to_string(b.replicates);
    scalar("predictor", "mse", std::to_string(b.order), "", count, b.mse, fmt(b.predicted), fmt(b.rel_error), b.pass);
    scalar("predictor", "naive_mse", "0", "", count, b.naive_mse, fmt(b.predicted_naive), "", b.beats_naive);
  }
  scalar("summary", "capped", "", "", std::to_string(r.capped), static_cast<double>(r.capped), "", "", r.passed());
}

void write_verification_text(std::ostream& os, const VerificationReport& r) {
  os << "regime " << to_string(r.regime) << ", m = " << short_fmt(r.m) << ", horizon " << r.horizon << ", "
     << r.replicates << " replicates (" << r.capped << " capped), seed " << r.seed << '\n';
  os << "statistic " << r.normalization << '\n';
  os << "tolerances are finite-n engineering choices; the limit theorems carry no rates\n";
  auto row = [&](const LagRow& x) {
    os << "  " << x.label << ": var " << short_fmt(x.stats.variance) << " +- " << short_fmt(x.stats.se_variance);
    if (x.checked)
      os << " vs " << short_fmt(x.predicted) << " (rel " << short_fmt(x.rel_error) << ")";
    os << ", skew " << short_fmt(x.stats.skewness) << ", ex.kurt " << short_fmt(x.stats.excess_kurtosis) << "  "
       << (x.checked ? verdict(x.variance_pass && x.normal_pass) : "n/a") << '\n';
  };
  for (const auto& x : r.rows) row(x);
  if (r.characteristic) row(*r.characteristic);
  for (const auto& c : r.correlations)
    os << "  corr(k=" << c.k << ", ell=" << c.ell << "): " << short_fmt(c.empirical) << " vs "
       << short_fmt(c.predicted) << "  " << verdict(c.pass) << '\n';
  if (r.oscillation) {
    const auto& o = *r.oscillation;
    os << "  oscillation residual: median " << short_fmt(o.median_residual) << " / profile "
       << short_fmt(o.median_profile) << " = " << short_fmt(o.relative) << "  " << verdict(o.residual_pass) << '\n';
    if (o.alternation_checked)
      os << "  sign alternation vote: " << short_fmt(o.alternation) << "  " << verdict(o.alternation_pass) << '\n';
    for (std::size_t i = 0; i < o.U_real.size(); ++i)
      os << "  mean U_" << i + 1 << ": " << short_fmt(Complex(o.U_real[i].mean, o.U_imag[i].mean)) << " (se "
         << short_fmt(o.U_real[i].se_mean) << ") vs " << short_fmt(o.U_expected[i]) << "  " << verdict(o.null_pass)
         << '\n';
    if (o.degenerate) os << "  degenerate: Sigma vanishes at every critical root\n";
  }
  if (r.backtest) {
    const auto& b = *r.backtest;
    os << "  predictor K=" << b.order << ": mse " << short_fmt(b.mse) << " vs " << short_fmt(b.predicted)
       << ", naive " << short_fmt(b.naive_mse) << " vs " << short_fmt(b.predicted_naive) << "  " << verdict(b.pass)
       << '\n';
  }
  os << (r.passed() ? "PASS" : "FAIL") << '\n';
}

void write_predictor_csv(std::ostream& os, const Predictor& p, const BacktestSummary* backtest) {
  os << "name,k,value\n";
  os << "m,," << fmt(p.m) << '\n';
  for (int k = 1; k <= p.order(); ++k) os << "coeff," << k << ',' << fmt(p.coeffs(k - 1)) << '\n';
  os << "residual_norm,," << fmt(p.residual_norm) << '\n';
  os << "naive_norm,," << fmt(p.naive_norm) << '\n';
  os << "regularized,," << (p.regularized ? 1 : 0) << '\n';
  if (backtest) {
    os << "backtest_replicates,," << backtest->replicates << '\n';
    os << "backtest_mse,," << fmt(backtest->mse) << '\n';
    os << "backtest_naive_mse,," << fmt(backtest->naive_mse) << '\n';
    os << "backtest_rel_error,," << fmt(backtest->rel_error) << '\n';
    os << "backtest_pass,," << (backtest->pass ? 1 : 0) << '\n';
  }
}

}  // namespace cmj
