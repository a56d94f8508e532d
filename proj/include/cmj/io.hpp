#ifndef CMJ_IO_HPP
#define CMJ_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmj/harness.hpp"
#include "cmj/limits.hpp"
#include "cmj/simulate.hpp"
#include "cmj/spectral.hpp"

namespace cmj {

inline constexpr const char* kVersion = "0.1.0";

/// %.17g: enough digits to round-trip a double, and byte-stable.
std::string fmt(double x);

/// Leading comment lines carried by every artifact.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string extra;  // optional "key value" line, e.g. the cap
};

void write_header(std::ostream& os, const Provenance& p);

void write_spectral_report(std::ostream& os, const SpectralReport& report);
void write_roots_csv(std::ostream& os, const OffspringLaw& law, const SpectralReport& report);

/// Columns k, ell, covariance, correlation, method.
void write_variance_csv(std::ostream& os, const OffspringLaw& law, const SpectralReport& report,
                        const LimitSpectrum& spectrum, const std::vector<int>& lags, const std::vector<int>& ells);

/// Nodes and weights of nu; plot-ready.
void write_spectrum_csv(std::ostream& os, const LimitSpectrum& spectrum);

/// Columns n, B_n, Z_n, B_{n,1..K}, then Z^phi_n when a characteristic is present.
void write_trace_csv(std::ostream& os, const Trace& trace, const OffspringLaw& law);

void write_verification_csv(std::ostream& os, const VerificationReport& report);
void write_verification_text(std::ostream& os, const VerificationReport& report);

void write_predictor_csv(std::ostream& os, const Predictor& predictor, const BacktestSummary* backtest);

}  // namespace cmj

#endif  // CMJ_IO_HPP
