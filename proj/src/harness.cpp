#include "fourphoton/harness.hpp"

#include <cctype>
#include <cstdio>
#include <functional>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>

#include "fourphoton/errors.hpp"
#include "fourphoton/interference.hpp"
#include "fourphoton/source_mc.hpp"
#include "fourphoton/tomography.hpp"

#ifndef FOURPHOTON_VERSION
#define FOURPHOTON_VERSION "0.0.0"
#endif

namespace fourphoton {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void missing_section(const std::string& scenario, const std::string& section) {
  ValidationReport rep;
  rep.violations.push_back({section, "section required by scenario " + scenario});
  throw ConfigError(rep);
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "row" : out;
}

class Writer {
 public:
  explicit Writer(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name, bool binary = false) {
    files_.push_back(name);
    std::ofstream out(fs::path(dir_) / name, binary ? std::ios::binary : std::ios::out);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir_) / name).string());
    return out;
  }

  void json_file(const std::string& name, const json& doc) { open(name) << doc.dump(2) << '\n'; }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

const char* pair_name(ModePair p) { return p == ModePair::k13 ? "13" : "24"; }

json dip_summary(const DipShape& d, double center_nm) {
  json j = to_json(d);
  if (d.width_defined && d.fwhm_spatial_um > 0.0) {
    j["fwhm_temporal_fs"] = fwhm_spatial_to_temporal(d.fwhm_spatial_um);
    j["fwhm_spectral_nm"] = fwhm_spatial_to_spectral(d.fwhm_spatial_um, center_nm);
  }
  return j;
}

void run_dips(const std::string& prefix, const DipSection& sec, std::uint64_t seed, Writer& w, json& result) {
  result["rows"] = json::array();
  for (std::size_t i = 0; i < sec.rows.size(); ++i) {
    const DipRow& row = sec.rows[i];
    Rng rng(stream_seed(seed, i));
    InterferenceScan scan;
    scan.dwell_s = 1.0;
    for (double x : sec.delays_um) {
      ScanPoint p;
      p.delay_um = x;
      p.delay_fs = delay_um_to_fs(x);
      const double mean = hom_rate(row.state, p.delay_fs, row.filter, row.filter, sec.baseline_counts);
      p.counts = static_cast<double>(poisson(rng, mean));
      p.rate_hz = p.counts;
      scan.points.push_back(p);
    }
    const std::string file = prefix + "_" + safe_name(row.label) + ".csv";
    auto out = w.open(file);
    write_scan_csv(out, scan);
    const DipShape d = fit_dip(scan);
    json r = {{"label", row.label},
              {"filter_fwhm_nm", row.filter.fwhm_nm},
              {"swap_expectation", swap_expectation(row.state)},
              {"model_fwhm_spatial_um", delay_fs_to_um(overlap_fwhm_fs(row.filter, row.filter))},
              {"fit", dip_summary(d, row.filter.center_nm)},
              {"scan_file", file}};
    result["rows"].push_back(r);
  }
}

SourceSettings with_overlap_filter(SourceSettings s, ModePair pair, const FilterSpec& f) {
  if (pair == ModePair::k13) s.filters[0] = s.filters[2] = f;
  else s.filters[1] = s.filters[3] = f;
  return s;
}

// Sets jitter from the calibration section when present; returns the value used.
double apply_calibration(const RunConfig& cfg, SourceSettings& s) {
  if (cfg.jitter_calibration) {
    const auto& c = *cfg.jitter_calibration;
    const SourceSettings probe = with_overlap_filter(s, c.mode_pair, c.filter);
    s.jitter_sigma_fs = calibrate_jitter(probe, c.mode_pair, false, c.target_raw_visibility);
  }
  return s.jitter_sigma_fs;
}

json scan_result(const SourceSettings& s, const InterferenceScan& scan, ModePair pair, bool heralded,
                 const std::string& file) {
  const DipShape d = fit_dip(scan);
  json r = {{"mode_pair", pair_name(pair)},
            {"heralded", heralded},
            {"fit", dip_summary(d, 826.0)},
            {"raw_visibility", d.visibility},
            {"multiphoton_counts", scan.multiphoton_counts},
            {"dwell_s", scan.dwell_s},
            {"expected_raw_visibility", expected_raw_visibility(s, pair, heralded)},
            {"scan_file", file}};
  try {
    r["subtracted_visibility"] = subtracted_visibility(d, scan.multiphoton_counts);
  } catch (const DomainError&) {
    r["subtracted_visibility"] = nullptr;
  }
  return r;
}

std::function<double(double)> drift_function(const StabilitySection& s) {
  const double a = s.amplitude_rad, period = s.period_s;
  switch (s.drift) {
    case DriftKind::kConstant:
      return [a](double) { return a; };
    case DriftKind::kLinear:
      return [a](double t) { return a * t / 3600.0; };
    case DriftKind::kSine:
    default:
      return [a, period](double t) { return a * std::sin(2.0 * std::numbers::pi * t / period); };
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"table1",   "same-pair-dips", "entangled-dips", "cross-pair",
                                              "heralded", "stability",      "rates"};
  return names;
}

bool is_known_scenario(const std::string& name) {
  for (const auto& n : scenario_names())
    if (n == name) return true;
  return false;
}

std::uint64_t config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string default_output_dir() {
  const char* env = std::getenv("FOURPHOTON_OUT");
  return env && *env ? env : "results";
}

std::vector<std::string> execute_scenario(const std::string& name, const RunConfig& cfg, std::uint64_t seed,
                                          const std::string& out_dir, std::optional<std::uint64_t> pulses) {
  if (!is_known_scenario(name)) throw std::invalid_argument("unknown scenario " + name);
  auto need_source = [&]() -> SourceSettings {
    if (!cfg.source) missing_section(name, "source");
    return *cfg.source;
  };

  if (name == "table1") {
    if (!cfg.table1) missing_section(name, "table1");
    const auto& t = *cfg.table1;
    Writer w(out_dir);
    json result = {{"mean_counts", t.mean_counts}, {"resamples", t.resamples}, {"states", json::array()}};
    MlOptions opt{t.max_iters, t.tol};
    for (std::size_t i = 0; i < t.states.size(); ++i) {
      const auto& ns = t.states[i];
      const TomographyRecord rec = simulate_tomography(ns.state, t.mean_counts, stream_seed(seed, i));
      const std::string file = "table1_" + safe_name(ns.name) + ".csv";
      auto out = w.open(file);
      write_tomography_csv(out, rec);
      const MetricsReport m = metrics_report(rec, ns.target, t.resamples, stream_seed(seed, 1000 + i), opt);
      json r = to_json(m);
      r["name"] = ns.name;
      r["true_purity"] = purity(ns.state);
      r["true_negativity"] = negativity(ns.state);
      r["true_fidelity"] = fidelity(ns.state, ns.target);
      r["counts_file"] = file;
      result["states"].push_back(r);
    }
    w.json_file("table1.json", result);
    return w.files();
  }

  if (name == "same-pair-dips" || name == "entangled-dips") {
    const bool same = name == "same-pair-dips";
    const auto& sec = same ? cfg.same_pair_dips : cfg.entangled_dips;
    if (!sec) missing_section(name, same ? "same_pair_dips" : "entangled_dips");
    Writer w(out_dir);
    json result = {{"baseline_counts", sec->baseline_counts}};
    run_dips(same ? "same_pair" : "entangled", *sec, seed, w, result);
    w.json_file(same ? "same_pair_dips.json" : "entangled_dips.json", result);
    return w.files();
  }

  if (name == "cross-pair") {
    SourceSettings s = need_source();
    if (!cfg.cross_pair) missing_section(name, "cross_pair");
    const auto& c = *cfg.cross_pair;
    const double jitter = apply_calibration(cfg, s);
    Writer w(out_dir);
    json result = {{"jitter_sigma_fs", jitter}, {"scans", json::array()}};
    for (std::size_t k = 0; k < c.mode_pairs.size(); ++k) {
      const ModePair mp = c.mode_pairs[k];
      const SourceSettings sk = c.overlap_filter ? with_overlap_filter(s, mp, *c.overlap_filter) : s;
      const InterferenceScan scan =
          simulate_hom_scan(sk, c.delays_um, mp, false, pulses.value_or(c.pulses_per_point), stream_seed(seed, k));
      const std::string file = std::string("cross_pair_") + pair_name(mp) + ".csv";
      auto out = w.open(file);
      write_scan_csv(out, scan);
      result["scans"].push_back(scan_result(sk, scan, mp, false, file));
    }
    w.json_file("cross_pair.json", result);
    return w.files();
  }

  if (name == "heralded") {
    SourceSettings s = need_source();
    if (!cfg.heralded) missing_section(name, "heralded");
    const auto& h = *cfg.heralded;
    const double jitter = apply_calibration(cfg, s);
    if (h.overlap_filter) s = with_overlap_filter(s, h.mode_pair, *h.overlap_filter);
    if (h.herald_filter)
      s = with_overlap_filter(s, h.mode_pair == ModePair::k13 ? ModePair::k24 : ModePair::k13, *h.herald_filter);
    Writer w(out_dir);
    const InterferenceScan scan =
        simulate_hom_scan(s, h.delays_um, h.mode_pair, true, pulses.value_or(h.pulses_per_point), seed);
    const std::string file = "heralded.csv";
    auto out = w.open(file);
    write_scan_csv(out, scan);
    json result = scan_result(s, scan, h.mode_pair, true, file);
    result["jitter_sigma_fs"] = jitter;
    result["expected_unheralded_raw_visibility"] = expected_raw_visibility(s, h.mode_pair, false);
    w.json_file("heralded.json", result);
    return w.files();
  }

  if (name == "stability") {
    const SourceSettings s = need_source();
    if (!cfg.stability) missing_section(name, "stability");
    const auto& st = *cfg.stability;
    const auto series = simulate_stability(s, drift_function(st), st.duration_s, st.bin_s, seed);
    Writer w(out_dir);
    auto out = w.open("stability.csv");
    out << "t_s,phi_rad,counts,expected_counts,relative_rate\n";
    double lo = INFINITY, hi = -INFINITY, sum = 0, sum2 = 0;
    for (const auto& b : series) {
      out << format_number(b.t_s) << ',' << format_number(b.phi) << ',' << format_number(b.counts) << ','
          << format_number(b.expected_counts) << ',' << format_number(b.relative_rate) << '\n';
      lo = std::min(lo, b.relative_rate);
      hi = std::max(hi, b.relative_rate);
      sum += b.relative_rate;
      sum2 += b.relative_rate * b.relative_rate;
    }
    const double n = static_cast<double>(series.size());
    json result = {{"bins", series.size()},
                   {"min_relative_rate", lo},
                   {"max_relative_rate", hi},
                   {"mean_relative_rate", sum / n},
                   {"std_relative_rate", n > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / n) / (n - 1))) : 0.0}};
    w.json_file("stability.json", result);
    return w.files();
  }

  // rates
  const SourceSettings s = need_source();
  const RatesSection r = cfg.rates.value_or(RatesSection{});
  RunOptions opt;
  opt.batches = r.batches;
  opt.dark_count_hz = r.dark_count_hz;
  opt.dead_time_ns = r.dead_time_ns;
  const RunResult run = simulate_run(s, cfg.coincidence, r.duration_s, seed, opt);
  Writer w(out_dir);
  json result = to_json(run.summary);
  result["multiphoton_baseline_13_hz"] = multiphoton_baseline(s, ModePair::k13);
  result["multiphoton_baseline_24_hz"] = multiphoton_baseline(s, ModePair::k24);
  w.json_file("rates.json", result);
  if (r.write_timestamps) {
    auto out = w.open("timestamps.bin", true);
    write_record(out, run.record);
  }
  return w.files();
}

int run_scenario(const Scenario& sc, std::ostream& log) {
  if (!is_known_scenario(sc.name)) {
    log << "unknown scenario '" << sc.name << "'; expected one of:";
    for (const auto& n : scenario_names()) log << ' ' << n;
    log << '\n';
    return kExitUsage;
  }
  if (!sc.seed) {
    log << "scenario " << sc.name << " is stochastic and needs --seed\n";
    return kExitUsage;
  }
  if (sc.config_path.empty()) {
    log << "missing --config\n";
    return kExitUsage;
  }
  json doc;
  RunConfig cfg;
  try {
    doc = load_json_file(sc.config_path);
    cfg = parse_config(doc);
  } catch (const ConfigError& e) {
    log << e.what();
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    log << e.what() << '\n';
    return kExitRuntime;
  }
  const std::string out_dir = sc.out_dir.empty() ? default_output_dir() : sc.out_dir;
  std::vector<std::string> files;
  try {
    files = execute_scenario(sc.name, cfg, *sc.seed, out_dir, sc.pulses);
  } catch (const ConfigError& e) {
    log << e.what();
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    log << "scenario " << sc.name << " failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(doc)));
  json manifest = {{"scenario", sc.name},
                   {"config_path", sc.config_path},
                   {"config_hash_fnv1a64", hash},
                   {"seed", *sc.seed},
                   {"version", FOURPHOTON_VERSION},
                   {"created_utc", utc_now()},
                   {"files", files}};
  if (sc.pulses) manifest["pulses_per_point"] = *sc.pulses;
  std::ofstream(fs::path(out_dir) / "manifest.json") << manifest.dump(2) << '\n';
  for (const auto& f : files) log << "wrote " << (fs::path(out_dir) / f).string() << '\n';
  return kExitOk;
}

}  // namespace fourphoton
