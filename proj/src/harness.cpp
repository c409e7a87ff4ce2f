#include "twinbeam/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "twinbeam/oracle.hpp"
#include "twinbeam/rng.hpp"

namespace twinbeam {

namespace {

std::uint64_t subseed(std::uint64_t seed, std::uint64_t k) {
  return splitmix64(splitmix64(seed) ^ splitmix64(k * 0x9e3779b97f4a7c15ULL + 1));
}

std::string dtos(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

SourceKind parse_kind(const std::string& s) {
  if (s == "twin_thermal") return SourceKind::twin_thermal;
  if (s == "coherent") return SourceKind::coherent;
  if (s == "dark_only") return SourceKind::dark_only;
  throw ConfigError("unknown source kind: " + s);
}

DeadTimeRegime parse_regime(const std::string& s) {
  if (s == "none") return DeadTimeRegime::none;
  if (s == "binary_per_pulse") return DeadTimeRegime::binary_per_pulse;
  throw ConfigError("unknown dead_time_regime: " + s);
}

SweepKind parse_sweep(const std::string& s) {
  if (s == "none") return SweepKind::none;
  if (s == "transmission") return SweepKind::transmission;
  if (s == "background") return SweepKind::background;
  if (s == "wavelength") return SweepKind::wavelength;
  if (s == "brightness") return SweepKind::brightness;
  throw ConfigError("unknown sweep kind: " + s);
}

ArmConfig parse_arm(const nlohmann::json& j) {
  ArmConfig arm;
  arm.transmission = j.value("transmission", arm.transmission);
  arm.eta0 = j.value("eta0", arm.eta0);
  arm.dark_prob = j.value("dark_prob", arm.dark_prob);
  arm.bg_rate = j.value("bg_rate", arm.bg_rate);
  arm.blind_window = j.value("blind_window", arm.blind_window);
  if (j.contains("dead_time_regime"))
    arm.dead_time_regime = parse_regime(j.at("dead_time_regime").get<std::string>());
  return arm;
}

struct PointConfig {
  SourceConfig source;
  ArmConfig arm_s;
  ArmConfig arm_i;
  TimingConfig timing;
  std::string param = "none";
};

PointConfig apply_sweep(const Scenario& sc, double value) {
  PointConfig cfg{sc.source, sc.arm_s, sc.arm_i, sc.timing, "none"};
  if (sc.geometry) {
    const Geometry& g = *sc.geometry;
    cfg.source.overlap = aperture_overlap(g.d_s_mm, g.d_i_mm, g.lambda_s_nm, g.lambda_i_nm);
  }
  switch (sc.sweep) {
    case SweepKind::none:
      break;
    case SweepKind::transmission:
      cfg.arm_i.transmission *= value;
      cfg.param = "transmission";
      break;
    case SweepKind::background:
      cfg.arm_i.bg_rate = value;
      cfg.param = "background_rate";
      break;
    case SweepKind::brightness:
      cfg.source.mean_per_mode = value;
      cfg.param = "mean_per_mode";
      break;
    case SweepKind::wavelength: {
      const Geometry& g = *sc.geometry;
      cfg.arm_i.eta0 = interp_qe_curve(sc.qe_curve, value);
      // Keep the apertures on the conjugate-acceptance condition as the
      // calibrated wavelength moves.
      const double d_i_adjusted = g.d_s_mm * value / g.lambda_s_nm;
      cfg.source.overlap = aperture_overlap(g.d_s_mm, d_i_adjusted, g.lambda_s_nm, value);
      cfg.param = "lambda_i_nm";
      break;
    }
  }
  return cfg;
}

std::string error_flag(const Error& e) { return sanitize(std::string("error(") + e.what() + ")"); }

ResultRow base_row(const Scenario& sc, const PointConfig& cfg, double value,
                   const RunResult& sig) {
  ResultRow row;
  row.scenario = sanitize(sc.name);
  row.sweep_param = cfg.param;
  row.sweep_value = value;
  row.n_s = std::llround(sig.total.n_s);
  row.n_i = std::llround(sig.total.n_i);
  row.n_c = std::llround(sig.total.n_c);
  row.n_pulses = sig.total.n_pulses;
  row.seed = sig.seed;
  return row;
}

void fill_result(ResultRow& row, const CalibrationResult& res) {
  row.eta = res.eta;
  row.std_err = res.std_err;
  row.nrf = res.nrf;
  row.ratio_r = res.ratio_r;
  row.mean_n_plus = res.mean_n_plus;
  for (const auto& f : res.flags) row.flags.push_back(sanitize(f));
}

}  // namespace

void Scenario::validate() const {
  source.validate();
  arm_s.validate();
  arm_i.validate();
  timing.validate();
  if (name.empty()) throw ConfigError("scenario name must not be empty");
  if (n_pulses < 1) throw ConfigError("n_pulses must be >= 1");
  if (arm_s.dead_time_regime != arm_i.dead_time_regime)
    throw ConfigError("arms must share the dead_time_regime");
  if (sweep != SweepKind::none && sweep_values.empty())
    throw ConfigError("sweep_values must not be empty");
  if ((sweep == SweepKind::wavelength) != !qe_curve.empty())
    throw ConfigError("qe_curve is required exactly when sweep = wavelength");
  if (sweep == SweepKind::wavelength && !geometry)
    throw ConfigError("wavelength sweep requires the geometry block");
  if (!qe_curve.empty()) {
    for (std::size_t i = 0; i + 1 < qe_curve.size(); ++i)
      if (!(qe_curve[i].first < qe_curve[i + 1].first))
        throw ConfigError("qe_curve wavelengths must be strictly increasing");
    for (const auto& [lam, eta] : qe_curve)
      if (!(lam > 0.0) || !(eta >= 0.0 && eta <= 1.0))
        throw ConfigError("qe_curve entries must have positive wavelength and eta in [0,1]");
  }
  for (double v : sweep_values) {
    if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    switch (sweep) {
      case SweepKind::transmission:
        if (!(v >= 0.0 && v <= 1.0))
          throw ConfigError("transmission sweep values must lie in [0, 1]");
        break;
      case SweepKind::background:
      case SweepKind::brightness:
        if (!(v >= 0.0)) throw ConfigError("sweep values must be >= 0");
        break;
      case SweepKind::wavelength:
        if (!(v >= qe_curve.front().first && v <= qe_curve.back().first))
          throw ConfigError("wavelength sweep value outside the qe_curve table");
        break;
      case SweepKind::none:
        break;
    }
  }
}

double interp_qe_curve(const std::vector<std::pair<double, double>>& curve, double lambda_nm) {
  if (curve.empty()) throw ConfigError("qe_curve is empty");
  if (lambda_nm < curve.front().first || lambda_nm > curve.back().first)
    throw ConfigError("wavelength " + std::to_string(lambda_nm) + " outside qe_curve table");
  const auto hi = std::lower_bound(curve.begin(), curve.end(),
                                   std::make_pair(lambda_nm, -1.0));
  if (hi == curve.end()) return curve.back().second;
  if (hi == curve.begin() || hi->first == lambda_nm) return hi->second;
  const auto lo = hi - 1;
  const double t = (lambda_nm - lo->first) / (hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

Scenario parse_scenario(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario JSON parse failure: ") + e.what());
  }
  Scenario sc;
  try {
    sc.name = j.value("name", sc.name);
    if (j.contains("sweep")) sc.sweep = parse_sweep(j.at("sweep").get<std::string>());
    if (j.contains("sweep_values"))
      sc.sweep_values = j.at("sweep_values").get<std::vector<double>>();
    if (j.contains("source")) {
      const auto& s = j.at("source");
      sc.source.modes = s.value("modes", sc.source.modes);
      sc.source.mean_per_mode = s.value("mean_per_mode", sc.source.mean_per_mode);
      sc.source.overlap = s.value("overlap", sc.source.overlap);
      if (s.contains("kind")) sc.source.kind = parse_kind(s.at("kind").get<std::string>());
    }
    if (j.contains("arm_s")) sc.arm_s = parse_arm(j.at("arm_s"));
    if (j.contains("arm_i")) sc.arm_i = parse_arm(j.at("arm_i"));
    if (j.contains("timing")) {
      const auto& t = j.at("timing");
      sc.timing.gate_width = t.value("gate_width", sc.timing.gate_width);
      sc.timing.coincidence_window =
          t.value("coincidence_window", sc.timing.coincidence_window);
      sc.timing.rep_rate = t.value("rep_rate", sc.timing.rep_rate);
      sc.timing.pulse_width = t.value("pulse_width", sc.timing.pulse_width);
      sc.timing.accidental_factor =
          t.value("accidental_factor", sc.timing.accidental_factor);
    }
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      Geometry geo;
      geo.d_s_mm = g.value("d_s_mm", geo.d_s_mm);
      geo.d_i_mm = g.value("d_i_mm", geo.d_i_mm);
      geo.lambda_s_nm = g.value("lambda_s_nm", geo.lambda_s_nm);
      geo.lambda_i_nm = g.value("lambda_i_nm", geo.lambda_i_nm);
      sc.geometry = geo;
    }
    if (j.contains("qe_curve"))
      for (const auto& pair : j.at("qe_curve"))
        sc.qe_curve.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    sc.n_pulses = j.value("n_pulses", sc.n_pulses);
    sc.seed = j.value("seed", sc.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario field error: ") + e.what());
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::vector<ResultRow> run_scenario(const Scenario& scenario, const RunOverrides& overrides) {
  scenario.validate();
  const std::int64_t n = overrides.n_pulses.value_or(scenario.n_pulses);
  const std::uint64_t seed = overrides.seed.value_or(scenario.seed);
  if (n < 1) throw ConfigError("n_pulses override must be >= 1");
  SimOptions opts;
  opts.threads = overrides.threads;

  std::vector<double> points = scenario.sweep_values;
  if (scenario.sweep == SweepKind::none) points = {0.0};

  std::vector<ResultRow> rows;
  rows.reserve(points.size() * 2);
  for (std::size_t idx = 0; idx < points.size(); ++idx) {
    const double value = points[idx];
    const PointConfig cfg = apply_sweep(scenario, value);
    const RunResult sig = run_pulses(cfg.source, cfg.arm_s, cfg.arm_i, cfg.timing, n,
                                     subseed(seed, idx * 4), opts);
    SourceConfig dark = cfg.source;
    dark.kind = SourceKind::dark_only;
    const RunResult bg = run_pulses(dark, cfg.arm_s, cfg.arm_i, cfg.timing, n,
                                    subseed(seed, idx * 4 + 1), opts);
    const bool dead_time = cfg.arm_i.dead_time_regime == DeadTimeRegime::binary_per_pulse;

    ResultRow k_row = base_row(scenario, cfg, value, sig);
    k_row.method = "klyshko";
    try {
      BootstrapConfig boot;
      boot.seed = subseed(seed, idx * 4 + 2);
      fill_result(k_row, calibrate_klyshko(sig, bg, cfg.timing, boot));
    } catch (const Error& e) {
      k_row.flags.push_back(error_flag(e));
    }
    rows.push_back(std::move(k_row));

    ResultRow d_row = base_row(scenario, cfg, value, sig);
    d_row.method = "difference_signal";
    try {
      BootstrapConfig boot;
      boot.seed = subseed(seed, idx * 4 + 3);
      fill_result(d_row, calibrate_difference(sig, bg, cfg.timing, dead_time, boot));
    } catch (const Error& e) {
      d_row.flags.push_back(error_flag(e));
    }
    rows.push_back(std::move(d_row));
  }
  return rows;
}

std::string render_csv(const std::vector<ResultRow>& table) {
  std::string out =
      "scenario,sweep_param,sweep_value,method,eta,std_err,nrf,ratio_r,mean_n_plus,"
      "n_s,n_i,n_c,n_pulses,seed,flags\n";
  auto opt = [](const std::optional<double>& v) { return v ? dtos(*v) : std::string(); };
  for (const ResultRow& r : table) {
    out += r.scenario + ',' + r.sweep_param + ',' + dtos(r.sweep_value) + ',' + r.method + ',';
    out += opt(r.eta) + ',' + opt(r.std_err) + ',' + opt(r.nrf) + ',' + opt(r.ratio_r) + ',' +
           opt(r.mean_n_plus) + ',';
    out += std::to_string(r.n_s) + ',' + std::to_string(r.n_i) + ',' + std::to_string(r.n_c) +
           ',' + std::to_string(r.n_pulses) + ',' + std::to_string(r.seed) + ',';
    for (std::size_t i = 0; i < r.flags.size(); ++i) {
      if (i) out += ';';
      out += r.flags[i];
    }
    out += '\n';
  }
  return out;
}

void emit_csv(const std::vector<ResultRow>& table, const std::filesystem::path& path) {
  if (table.empty()) throw InvalidParameterError("refusing to write an empty result table");
  const std::string body = render_csv(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open output file: " + path.string());
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
  if (!out) throw Error("failed writing output file: " + path.string());
}

bool verify_against_oracle(std::ostream& log, int threads) {
  struct Check {
    const char* label;
    SourceConfig source;
    DeadTimeRegime regime;
    double p_s, p_i;
  };
  const std::vector<Check> checks = {
      {"thermal M=1 counting", {1, 0.2, 1.0, SourceKind::twin_thermal},
       DeadTimeRegime::none, 0.6, 0.25},
      {"thermal M=2 half-matched binary", {2, 0.35, 0.5, SourceKind::twin_thermal},
       DeadTimeRegime::binary_per_pulse, 0.44, 0.44},
      {"thermal M=3 binary", {3, 0.1, 1.0, SourceKind::twin_thermal},
       DeadTimeRegime::binary_per_pulse, 0.257, 0.257},
      {"thermal M=2 unmatched counting", {2, 0.05, 0.0, SourceKind::twin_thermal},
       DeadTimeRegime::none, 0.9, 0.9},
      {"coherent counting", {1, 0.5, 1.0, SourceKind::coherent},
       DeadTimeRegime::none, 0.3, 0.7},
  };
  constexpr std::int64_t kPulses = 200000;
  bool all_ok = true;
  int index = 0;
  for (const Check& chk : checks) {
    ArmConfig arm_s, arm_i;
    arm_s.eta0 = chk.p_s;
    arm_i.eta0 = chk.p_i;
    arm_s.dead_time_regime = arm_i.dead_time_regime = chk.regime;
    TimingConfig timing;
    SimOptions opts;
    opts.threads = threads;
    const RunResult run = run_pulses(chk.source, arm_s, arm_i, timing, kPulses,
                                     0x76657269ULL + index, opts);
    const auto trunc = TruncationSpec::for_tail(chk.source.mean_per_mode, 1e-13);
    const JointMoments exact =
        exact_joint_moments(chk.source, chk.p_s, chk.p_i, chk.regime, trunc);

    const double n = static_cast<double>(run.total.n_pulses);
    struct Stat {
      const char* name;
      double mc;
      double exact;
      std::function<double(const CountsSummary&)> of;
    };
    const std::vector<Stat> stats = {
        {"mean_s", run.total.n_s / n, exact.mean_s,
         [](const CountsSummary& s) { return s.n_s / static_cast<double>(s.n_pulses); }},
        {"mean_i", run.total.n_i / n, exact.mean_i,
         [](const CountsSummary& s) { return s.n_i / static_cast<double>(s.n_pulses); }},
        {"var_minus", run.total.var_minus(), exact.var_minus,
         [](const CountsSummary& s) { return s.var_minus(); }},
        {"mean_plus", run.total.mean_plus(), exact.mean_plus,
         [](const CountsSummary& s) { return s.mean_plus(); }},
        {"coincidence", run.total.n_c / n, exact.coincidence_prob,
         [](const CountsSummary& s) { return s.n_c / static_cast<double>(s.n_pulses); }},
    };
    bool ok = true;
    for (const Stat& st : stats) {
      const double se = block_bootstrap_se(run.blocks, st.of);
      const double tol = 4.0 * se + 1e-12;
      if (std::abs(st.mc - st.exact) > tol) {
        log << "[verify] FAIL " << chk.label << " " << st.name << ": mc=" << st.mc
            << " exact=" << st.exact << " tol=" << tol << "\n";
        ok = false;
      }
    }
    log << "[verify] " << (ok ? "ok   " : "FAIL ") << chk.label << "\n";
    all_ok = all_ok && ok;
    ++index;
  }
  return all_ok;
}

}  // namespace twinbeam
