#include "cmj/config.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cmj/errors.hpp"
#include "cmj/io.hpp"

namespace cmj {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& reason) {
  throw ConfigError((path.empty() ? std::string("<root>") : path) + ": " + reason);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) fail(join(path, key), "unknown key");
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& path, std::int64_t lo, std::int64_t hi) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) fail(path, "out of range");
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > hi) {
    std::ostringstream os;
    os << "value " << x << " outside [" << lo << ", " << hi << "]";
    fail(path, os.str());
  }
  return x;
}

std::uint64_t as_uint64(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    fail(path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::vector<int> as_int_list(const json& v, const std::string& path, int lo, int hi) {
  if (!v.is_array()) fail(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(static_cast<int>(as_int(v[i], path + "[" + std::to_string(i) + "]", lo, hi)));
  return out;
}

LitterAtom parse_atom(const json& a, const std::string& path) {
  check_keys(a, path, {"prob", "births", "char"});
  LitterAtom atom;
  if (!a.contains("prob")) fail(join(path, "prob"), "missing");
  atom.prob = as_double(a["prob"], join(path, "prob"));
  if (!(atom.prob > 0.0 && atom.prob <= 1.0)) fail(join(path, "prob"), "probability must lie in (0, 1]");
  if (!a.contains("births")) fail(join(path, "births"), "missing");
  const auto& births = a["births"];
  const std::string bpath = join(path, "births");
  if (!births.is_object()) fail(bpath, "expected an object mapping age to count");
  for (const auto& [key, value] : births.items()) {
    const std::string kpath = bpath + "." + key;
    int age = 0;
    std::size_t used = 0;
    try {
      age = std::stoi(key, &used);
    } catch (const std::exception&) {
      fail(kpath, "age keys must be integers");
    }
    if (used != key.size() || age < 1 || age > 100000) fail(kpath, "age must be an integer in [1, 100000]");
    const auto count = as_uint64(value, kpath);
    if (atom.births.size() < static_cast<std::size_t>(age)) atom.births.resize(age, 0);
    atom.births[age - 1] = count;
  }
  if (a.contains("char")) {
    const auto& c = a["char"];
    const std::string cpath = join(path, "char");
    if (!c.is_array() || c.empty()) fail(cpath, "expected a non-empty array of numbers");
    std::vector<double> values;
    for (std::size_t i = 0; i < c.size(); ++i) values.push_back(as_double(c[i], cpath + "[" + std::to_string(i) + "]"));
    atom.char_values = std::move(values);
  }
  return atom;
}

OffspringLaw parse_law(const json& law, RunConfig& cfg) {
  check_keys(law, "law", {"atoms", "characteristic"});
  if (!law.contains("atoms") || !law["atoms"].is_array() || law["atoms"].empty())
    fail("law.atoms", "expected a non-empty array");
  std::vector<LitterAtom> atoms;
  double total = 0.0;
  for (std::size_t i = 0; i < law["atoms"].size(); ++i) {
    atoms.push_back(parse_atom(law["atoms"][i], "law.atoms[" + std::to_string(i) + "]"));
    total += atoms.back().prob;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "atom probabilities sum to " << total << " (must be 1 within 1e-12)";
    fail("law.atoms", os.str());
  }
  const auto& first = atoms.front().char_values;
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    const auto& c = atoms[i].char_values;
    const std::string path = "law.atoms[" + std::to_string(i) + "].char";
    if (c.has_value() != first.has_value())
      fail(path, "atom " + std::to_string(first ? i : 0) + " has no characteristic values but atom " +
                     std::to_string(first ? 0 : i) + " does");
    if (c && c->size() != first->size()) {
      std::ostringstream os;
      os << "atom " << i << " has " << c->size() << " characteristic values, atom 0 has " << first->size();
      fail(path, os.str());
    }
  }
  if (law.contains("characteristic")) {
    const auto& meta = law["characteristic"];
    check_keys(meta, "law.characteristic", {"name", "description"});
    for (const char* key : {"name", "description"})
      if (meta.contains(key) && !meta[key].is_string()) fail(join("law.characteristic", key), "expected a string");
    if (meta.contains("name")) cfg.characteristic_name = meta["name"].get<std::string>();
    if (meta.contains("description")) cfg.characteristic_description = meta["description"].get<std::string>();
  }
  OffspringLaw out(std::move(atoms));
  const auto violations = validate_law(out);
  if (!violations.empty()) {
    const auto& v = violations.front();
    fail(v.atom ? "law.atoms[" + std::to_string(*v.atom) + "]" : "law", "[" + v.assumption + "] " + v.detail);
  }
  return out;
}

ordered_json atom_json(const LitterAtom& a) {
  ordered_json births = ordered_json::object();
  for (std::size_t k = 0; k < a.births.size(); ++k) births[std::to_string(k + 1)] = a.births[k];
  ordered_json out;
  out["prob"] = a.prob;
  out["births"] = births;
  if (a.char_values) out["char"] = *a.char_values;
  return out;
}

const std::set<std::string> kCommands{"analyze", "limits", "simulate", "verify", "predict"};

}  // namespace

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("syntax error: ") + e.what());
  }
  check_keys(root, "", {"command", "law", "horizon", "replicates", "seed", "lags", "ells", "predictor_order",
                        "quadrature_points", "cap", "threads", "output_dir", "tolerances"});
  RunConfig cfg;
  auto& e = cfg.experiment;
  if (root.contains("command")) {
    if (!root["command"].is_string()) fail("command", "expected a string");
    cfg.command = root["command"].get<std::string>();
    if (!kCommands.count(cfg.command)) fail("command", "unknown command '" + cfg.command + "'");
  }
  if (!root.contains("law")) fail("law", "missing");
  e.law = parse_law(root["law"], cfg);
  if (root.contains("horizon")) e.horizon = static_cast<int>(as_int(root["horizon"], "horizon", 0, 100000));
  if (root.contains("replicates"))
    e.replicates = static_cast<int>(as_int(root["replicates"], "replicates", 100, 100000000));
  if (root.contains("seed")) e.seed = as_uint64(root["seed"], "seed");
  if (root.contains("lags")) e.lags = as_int_list(root["lags"], "lags", 0, 100000);
  if (root.contains("ells")) e.ells = as_int_list(root["ells"], "ells", 0, 100000);
  if (root.contains("predictor_order"))
    e.predictor_order = static_cast<int>(as_int(root["predictor_order"], "predictor_order", 0, 1000));
  if (root.contains("quadrature_points"))
    e.quadrature_points = static_cast<int>(as_int(root["quadrature_points"], "quadrature_points", 8, 1 << 20));
  if (root.contains("cap")) {
    e.cap = as_uint64(root["cap"], "cap");
    if (e.cap < 1) fail("cap", "must be positive");
  }
  if (root.contains("threads")) e.threads = static_cast<unsigned>(as_int(root["threads"], "threads", 0, 1024));
  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string()) fail("output_dir", "expected a string");
    cfg.output_dir = root["output_dir"].get<std::string>();
  }
  if (root.contains("tolerances")) {
    const auto& t = root["tolerances"];
    auto& tol = e.tol;
    const std::pair<const char*, double*> fields[] = {
        {"variance", &tol.variance},       {"variance_regime2", &tol.variance_regime2},
        {"skew", &tol.skew},               {"kurtosis", &tol.kurtosis},
        {"correlation", &tol.correlation}, {"oscillation", &tol.oscillation},
        {"alternation", &tol.alternation}, {"predictor", &tol.predictor},
        {"se_multiple", &tol.se_multiple}};
    std::set<std::string> allowed;
    for (const auto& [key, dst] : fields) allowed.insert(key);
    check_keys(t, "tolerances", allowed);
    for (const auto& [key, dst] : fields)
      if (t.contains(key)) {
        *dst = as_double(t[key], join("tolerances", key));
        if (!(*dst >= 0.0)) fail(join("tolerances", key), "must be non-negative");
      }
  }
  if (e.horizon < 2 * e.law.max_age())
    fail("horizon", "must be at least twice the maximum birth age (" + std::to_string(2 * e.law.max_age()) + ")");
  for (std::size_t i = 0; i < e.ells.size(); ++i)
    if (e.ells[i] >= e.horizon) fail("ells[" + std::to_string(i) + "]", "must be below the horizon");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize(const RunConfig& c) {
  const auto& e = c.experiment;
  ordered_json law;
  law["atoms"] = ordered_json::array();
  for (const auto& a : e.law.atoms()) law["atoms"].push_back(atom_json(a));
  if (c.characteristic_name || c.characteristic_description) {
    ordered_json meta = ordered_json::object();
    if (c.characteristic_name) meta["name"] = *c.characteristic_name;
    if (c.characteristic_description) meta["description"] = *c.characteristic_description;
    law["characteristic"] = meta;
  }
  ordered_json root;
  if (!c.command.empty()) root["command"] = c.command;
  root["law"] = law;
  root["horizon"] = e.horizon;
  root["replicates"] = e.replicates;
  root["seed"] = e.seed;
  root["lags"] = e.lags;
  root["ells"] = e.ells;
  root["predictor_order"] = e.predictor_order;
  root["quadrature_points"] = e.quadrature_points;
  root["cap"] = e.cap;
  root["threads"] = e.threads;
  root["output_dir"] = c.output_dir;
  const auto& t = e.tol;
  root["tolerances"] = {{"variance", t.variance},       {"variance_regime2", t.variance_regime2},
                        {"skew", t.skew},               {"kurtosis", t.kurtosis},
                        {"correlation", t.correlation}, {"oscillation", t.oscillation},
                        {"alternation", t.alternation}, {"predictor", t.predictor},
                        {"se_multiple", t.se_multiple}};
  return root.dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& config) {
  // Threads and the output location do not change any artifact.
  RunConfig canon = config;
  canon.experiment.threads = 0;
  canon.output_dir = ".";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(canon)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int dispatch(const RunConfig& c, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  const auto& e = c.experiment;
  try {
    if (!kCommands.count(c.command)) {
      err << "error: no command given (expected one of analyze, limits, simulate, verify, predict)\n";
      return 1;
    }
    fs::create_directories(c.output_dir);
    const Provenance prov{config_hash(c), e.seed, ""};
    auto open = [&](const std::string& name, const Provenance& p) {
      auto path = fs::path(c.output_dir) / name;
      std::ofstream f(path);
      if (!f) throw Fault("cannot write " + path.string());
      write_header(f, p);
      return f;
    };

    if (c.command == "analyze") {
      const auto rep = classify(e.law);
      auto txt = open("spectral_report.txt", prov);
      write_spectral_report(txt, rep);
      auto csv = open("roots.csv", prov);
      write_roots_csv(csv, e.law, rep);
      write_spectral_report(out, rep);
      return 0;
    }
    if (c.command == "limits") {
      const auto rep = classify(e.law);
      const auto spectrum = build_spectrum(rep, moments(e.law), e.quadrature_points);
      auto csv = open("variance.csv", prov);
      write_variance_csv(csv, e.law, rep, spectrum, e.lags, e.ells);
      auto sp = open("spectrum.csv", prov);
      write_spectrum_csv(sp, spectrum);
      out << "regime " << to_string(rep.regime) << ", m = " << fmt(rep.m) << '\n';
      for (int k : e.lags) out << "Var zeta_" << k << " = " << fmt(variance(spectrum, unit_lag(k))) << '\n';
      if (e.law.has_characteristic()) {
        const auto summary = char_moments(e.law, rep.m);
        auto ch = open("characteristic.csv", prov);
        ch << "quantity,value\n" << "lambda_phi," << fmt(summary.lambda_total) << '\n';
        if (summary.moments.mean.cwiseAbs().maxCoeff() <= 1e-12)
          ch << "variance_centered," << fmt(char_variance_centered(e.law, rep.m)) << '\n';
        if (rep.regime == Regime::I) {
          const double full = char_variance_full(e.law, rep, spectrum);
          ch << "variance_full," << fmt(full) << '\n';
          out << "Var zeta^phi = " << fmt(full) << '\n';
        }
      }
      return 0;
    }
    if (c.command == "simulate") {
      const Trace t = run(e.law, e.horizon, e.seed, e.cap);
      Provenance p = prov;
      p.extra = "cap " + std::to_string(e.cap);
      auto csv = open("trace.csv", p);
      write_trace_csv(csv, t, e.law);
      out << "simulated to n = " << t.horizon << ", Z_n = " << t.Z.back() << (t.capped ? " (capped)" : "") << '\n';
      return 0;
    }
    if (c.command == "verify") {
      const auto report = verify(e);
      auto csv = open("verification.csv", prov);
      write_verification_csv(csv, report);
      auto txt = open("verification.txt", prov);
      write_verification_text(txt, report);
      write_verification_text(out, report);
      return report.passed() ? 0 : 4;
    }
    // predict
    const auto rep = classify(e.law);
    rep.require_simple();
    if (rep.regime == Regime::III) throw Refusal("predict: no limit measure in regime III");
    const auto spectrum = build_spectrum(rep, moments(e.law), e.quadrature_points);
    const auto pred = predictor_coeffs(spectrum, e.predictor_order);
    const auto backtest = predictor_backtest(e, e.predictor_order);
    auto csv = open("predictor.csv", prov);
    write_predictor_csv(csv, pred, &backtest);
    write_predictor_csv(out, pred, &backtest);
    return 0;
  } catch (const Refusal& x) {
    err << "refused: " << x.what() << '\n';
    return 2;
  } catch (const ConfigError& x) {
    err << "config error: " << x.what() << '\n';
    return 1;
  } catch (const std::exception& x) {
    err << "internal fault: " << x.what() << '\n';
    return 3;
  }
}

}  // namespace cmj
