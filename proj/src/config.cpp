#include "fourphoton/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fourphoton/errors.hpp"

namespace fourphoton {

using nlohmann::json;

namespace {

struct Ctx {
  ValidationReport& rep;
  void bad(const std::string& key, const std::string& msg) const { rep.violations.push_back({key, msg}); }
};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed, const Ctx& ctx) {
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) ctx.bad(join(path, k), "unknown key");
}

bool is_object(const json& j, const std::string& path, const Ctx& ctx) {
  if (j.is_object()) return true;
  ctx.bad(path, "must be an object");
  return false;
}

// Reads a number; range is [lo, hi] with optional open ends.
std::optional<double> number(const json& obj, const std::string& key, const std::string& path, const Ctx& ctx,
                             bool required, double lo = -INFINITY, double hi = INFINITY, bool lo_open = false,
                             bool hi_open = false) {
  const std::string p = join(path, key);
  if (!obj.contains(key)) {
    if (required) ctx.bad(p, "missing required key");
    return std::nullopt;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) {
    ctx.bad(p, "must be a number");
    return std::nullopt;
  }
  const double x = v.get<double>();
  const bool below = lo_open ? !(x > lo) : !(x >= lo);
  const bool above = hi_open ? !(x < hi) : !(x <= hi);
  if (!std::isfinite(x) || below || above) {
    std::ostringstream os;
    os << "out of range " << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]") << ", got " << x;
    ctx.bad(p, os.str());
    return std::nullopt;
  }
  return x;
}

template <typename T>
void assign(T& dst, const std::optional<double>& v) {
  if (v) dst = static_cast<T>(*v);
}

std::optional<FilterSpec> parse_filter(const json& j, const std::string& path, const Ctx& ctx) {
  if (!is_object(j, path, ctx)) return std::nullopt;
  check_keys(j, path, {"kind", "center_nm", "fwhm_nm", "edge_nm"}, ctx);
  const std::string kind = j.value("kind", "gaussian");
  const auto center = number(j, "center_nm", path, ctx, false, 0.0, INFINITY, true);
  if (kind == "gaussian") {
    const auto fwhm = number(j, "fwhm_nm", path, ctx, true, 0.0, INFINITY, true);
    if (!fwhm) return std::nullopt;
    return FilterSpec::gaussian(center.value_or(826.0), *fwhm);
  }
  if (kind == "long-pass") {
    const auto edge = number(j, "edge_nm", path, ctx, true, 0.0, INFINITY, true);
    if (!edge) return std::nullopt;
    return FilterSpec::long_pass(*edge, center.value_or(826.0));
  }
  ctx.bad(join(path, "kind"), "must be \"gaussian\" or \"long-pass\"");
  return std::nullopt;
}

std::optional<PolarizationState> parse_state_at(const json& j, const std::string& path, const Ctx& ctx) {
  try {
    return parse_state(j);
  } catch (const std::exception& e) {
    ctx.bad(path, e.what());
    return std::nullopt;
  }
}

std::vector<double> parse_delays(const json& obj, const std::string& path, const Ctx& ctx) {
  const std::string p = join(path, "delays_um");
  if (!obj.contains("delays_um")) {
    ctx.bad(p, "missing required key");
    return {};
  }
  const json& d = obj.at("delays_um");
  std::vector<double> out;
  if (d.is_array()) {
    for (const auto& x : d) {
      if (!x.is_number()) {
        ctx.bad(p, "must contain only numbers");
        return {};
      }
      out.push_back(x.get<double>());
    }
  } else if (d.is_object()) {
    check_keys(d, p, {"start", "stop", "step"}, ctx);
    const auto start = number(d, "start", p, ctx, true);
    const auto stop = number(d, "stop", p, ctx, true);
    const auto step = number(d, "step", p, ctx, true, 0.0, INFINITY, true);
    if (!start || !stop || !step) return {};
    if (*stop <= *start) {
      ctx.bad(p, "stop must exceed start");
      return {};
    }
    const double n = std::floor((*stop - *start) / *step + 1e-9);
    if (n > 10000) {
      ctx.bad(p, "more than 10000 delay points");
      return {};
    }
    for (int i = 0; i <= static_cast<int>(n); ++i) out.push_back(*start + i * *step);
  } else {
    ctx.bad(p, "must be an array or {start, stop, step}");
    return {};
  }
  if (out.size() < 7) ctx.bad(p, "need at least 7 delay points for the dip fit");
  return out;
}

std::optional<ModePair> parse_mode_pair(const json& j, const std::string& path, const Ctx& ctx) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "13" || s == "1&3") return ModePair::k13;
    if (s == "24" || s == "2&4") return ModePair::k24;
  }
  ctx.bad(path, "mode pair must be \"1&3\" or \"2&4\"");
  return std::nullopt;
}

std::uint64_t parse_pulses(const json& obj, const std::string& path, const Ctx& ctx) {
  const auto v = number(obj, "pulses_per_point", path, ctx, true, 1.0, 1e15);
  return v ? static_cast<std::uint64_t>(*v) : 0;
}

std::optional<SourceSettings> parse_source(const json& j, const Ctx& ctx) {
  const std::string path = "source";
  if (!is_object(j, path, ctx)) return std::nullopt;
  check_keys(j, path,
             {"kappa_forward", "kappa_backward", "pair_probability_forward", "pair_probability_backward",
              "alpha_forward", "alpha_backward", "phi_forward", "phi_backward", "dephasing_forward",
              "dephasing_backward", "jitter_sigma_fs", "coupling_efficiency", "rep_rate_hz",
              "double_pair_weight", "filters", "state_forward", "state_backward"},
             ctx);
  SourceSettings s;
  const std::size_t before = ctx.rep.violations.size();
  assign(s.double_pair_weight, number(j, "double_pair_weight", path, ctx, false, 0.0, 4.0));

  auto kappa = [&](const std::string& dir) -> double {
    const std::string kk = "kappa_" + dir, pk = "pair_probability_" + dir;
    if (j.contains(kk) && j.contains(pk)) {
      ctx.bad(join(path, pk), "give either " + kk + " or " + pk + ", not both");
      return 0.0;
    }
    if (j.contains(pk)) {
      const auto p = number(j, pk, path, ctx, true, 0.0, 0.2, false, true);
      if (!p || *p == 0.0) return 0.0;
      try {
        return kappa_for_pair_probability(*p, s.double_pair_weight);
      } catch (const std::exception& e) {
        ctx.bad(join(path, pk), e.what());
        return 0.0;
      }
    }
    const auto k = number(j, kk, path, ctx, true, 0.0, 0.5, false, true);
    return k.value_or(0.0);
  };
  s.kappa_forward = kappa("forward");
  s.kappa_backward = kappa("backward");
  assign(s.alpha_forward, number(j, "alpha_forward", path, ctx, false));
  assign(s.alpha_backward, number(j, "alpha_backward", path, ctx, false));
  assign(s.phi_forward, number(j, "phi_forward", path, ctx, false));
  assign(s.phi_backward, number(j, "phi_backward", path, ctx, false));
  assign(s.dephasing_forward, number(j, "dephasing_forward", path, ctx, false, 0.0, 1.0));
  assign(s.dephasing_backward, number(j, "dephasing_backward", path, ctx, false, 0.0, 1.0));
  assign(s.jitter_sigma_fs, number(j, "jitter_sigma_fs", path, ctx, false, 0.0, 1e9));
  if (const auto r = number(j, "rep_rate_hz", path, ctx, true, 0.0, 1e12, true)) s.rep_rate_hz = *r;

  if (j.contains("coupling_efficiency")) {
    const json& e = j.at("coupling_efficiency");
    const std::string p = join(path, "coupling_efficiency");
    if (e.is_number()) {
      if (const auto v = number(j, "coupling_efficiency", path, ctx, true, 0.0, 1.0)) s.coupling_efficiency.fill(*v);
    } else if (e.is_array() && e.size() == 4) {
      for (int i = 0; i < 4; ++i) {
        const json wrap = {{"v", e[static_cast<std::size_t>(i)]}};
        if (const auto v = number(wrap, "v", "", Ctx{ctx.rep}, true, 0.0, 1.0))
          s.coupling_efficiency[static_cast<std::size_t>(i)] = *v;
        else
          ctx.rep.violations.back().key = p + "[" + std::to_string(i) + "]";
      }
    } else {
      ctx.bad(p, "must be a number or an array of 4 numbers");
    }
  }
  if (j.contains("filters")) {
    const json& f = j.at("filters");
    const std::string p = join(path, "filters");
    if (f.is_array() && f.size() == 4) {
      for (std::size_t i = 0; i < 4; ++i)
        if (auto spec = parse_filter(f[i], p + "[" + std::to_string(i) + "]", ctx)) s.filters[i] = *spec;
    } else if (f.is_object()) {
      if (auto spec = parse_filter(f, p, ctx)) s.filters.fill(*spec);
    } else {
      ctx.bad(p, "must be a filter object or an array of 4");
    }
  }
  if (j.contains("state_forward")) s.state_forward = parse_state_at(j.at("state_forward"), join(path, "state_forward"), ctx);
  if (j.contains("state_backward"))
    s.state_backward = parse_state_at(j.at("state_backward"), join(path, "state_backward"), ctx);
  if (ctx.rep.violations.size() != before) return std::nullopt;
  return s;
}

CoincidenceConfig parse_coincidence(const json& j, const Ctx& ctx) {
  CoincidenceConfig c;
  const std::string path = "coincidence";
  if (!is_object(j, path, ctx)) return c;
  check_keys(j, path, {"twofold_window_ns", "fourfold_window_ns"}, ctx);
  assign(c.twofold_window_ns, number(j, "twofold_window_ns", path, ctx, false, 0.0, 1e6, true));
  assign(c.fourfold_window_ns, number(j, "fourfold_window_ns", path, ctx, false, 0.0, 1e9, true));
  if (c.fourfold_window_ns < c.twofold_window_ns)
    ctx.bad("coincidence.fourfold_window_ns", "must be >= twofold_window_ns");
  return c;
}

RatesSection parse_rates(const json& j, const Ctx& ctx) {
  RatesSection r;
  const std::string path = "rates";
  if (!is_object(j, path, ctx)) return r;
  check_keys(j, path, {"duration_s", "batches", "dark_count_hz", "dead_time_ns", "write_timestamps"}, ctx);
  assign(r.duration_s, number(j, "duration_s", path, ctx, false, 0.0, 1e6, true));
  assign(r.batches, number(j, "batches", path, ctx, false, 1.0, 256.0));
  assign(r.dark_count_hz, number(j, "dark_count_hz", path, ctx, false, 0.0, 1e7));
  assign(r.dead_time_ns, number(j, "dead_time_ns", path, ctx, false, 0.0, 1e6));
  if (j.contains("write_timestamps")) {
    if (j.at("write_timestamps").is_boolean())
      r.write_timestamps = j.at("write_timestamps").get<bool>();
    else
      ctx.bad("rates.write_timestamps", "must be a boolean");
  }
  return r;
}

JitterCalibration parse_calibration(const json& j, const Ctx& ctx) {
  JitterCalibration c;
  const std::string path = "jitter_calibration";
  if (!is_object(j, path, ctx)) return c;
  check_keys(j, path, {"target_raw_visibility", "filter", "mode_pair"}, ctx);
  if (const auto v = number(j, "target_raw_visibility", path, ctx, true, 0.0, 1.0, true, true))
    c.target_raw_visibility = *v;
  if (j.contains("filter"))
    if (auto f = parse_filter(j.at("filter"), join(path, "filter"), ctx)) c.filter = *f;
  if (j.contains("mode_pair"))
    if (auto m = parse_mode_pair(j.at("mode_pair"), join(path, "mode_pair"), ctx)) c.mode_pair = *m;
  return c;
}

CrossPairSection parse_cross(const json& j, const Ctx& ctx) {
  CrossPairSection c;
  const std::string path = "cross_pair";
  if (!is_object(j, path, ctx)) return c;
  check_keys(j, path, {"delays_um", "pulses_per_point", "mode_pairs", "overlap_filter"}, ctx);
  c.delays_um = parse_delays(j, path, ctx);
  c.pulses_per_point = parse_pulses(j, path, ctx);
  if (j.contains("mode_pairs")) {
    c.mode_pairs.clear();
    const json& m = j.at("mode_pairs");
    if (!m.is_array() || m.empty()) ctx.bad("cross_pair.mode_pairs", "must be a non-empty array");
    else
      for (const auto& x : m)
        if (auto mp = parse_mode_pair(x, "cross_pair.mode_pairs", ctx)) c.mode_pairs.push_back(*mp);
  }
  if (j.contains("overlap_filter")) c.overlap_filter = parse_filter(j.at("overlap_filter"), "cross_pair.overlap_filter", ctx);
  return c;
}

HeraldedSection parse_heralded(const json& j, const Ctx& ctx) {
  HeraldedSection h;
  const std::string path = "heralded";
  if (!is_object(j, path, ctx)) return h;
  check_keys(j, path, {"delays_um", "pulses_per_point", "mode_pair", "overlap_filter", "herald_filter"}, ctx);
  h.delays_um = parse_delays(j, path, ctx);
  h.pulses_per_point = parse_pulses(j, path, ctx);
  if (j.contains("mode_pair"))
    if (auto m = parse_mode_pair(j.at("mode_pair"), "heralded.mode_pair", ctx)) h.mode_pair = *m;
  if (j.contains("overlap_filter")) h.overlap_filter = parse_filter(j.at("overlap_filter"), "heralded.overlap_filter", ctx);
  if (j.contains("herald_filter")) h.herald_filter = parse_filter(j.at("herald_filter"), "heralded.herald_filter", ctx);
  return h;
}

StabilitySection parse_stability(const json& j, const Ctx& ctx) {
  StabilitySection s;
  const std::string path = "stability";
  if (!is_object(j, path, ctx)) return s;
  check_keys(j, path, {"duration_s", "bin_s", "drift"}, ctx);
  assign(s.duration_s, number(j, "duration_s", path, ctx, false, 0.0, 1e7, true));
  assign(s.bin_s, number(j, "bin_s", path, ctx, false, 0.0, 1e7, true));
  if (s.bin_s > s.duration_s) ctx.bad("stability.bin_s", "must not exceed duration_s");
  if (j.contains("drift")) {
    const json& d = j.at("drift");
    const std::string p = "stability.drift";
    if (is_object(d, p, ctx)) {
      check_keys(d, p, {"kind", "amplitude_rad", "period_s"}, ctx);
      const std::string kind = d.value("kind", "sine");
      if (kind == "sine") s.drift = DriftKind::kSine;
      else if (kind == "constant") s.drift = DriftKind::kConstant;
      else if (kind == "linear") s.drift = DriftKind::kLinear;
      else ctx.bad(p + ".kind", "must be \"sine\", \"constant\" or \"linear\"");
      assign(s.amplitude_rad, number(d, "amplitude_rad", p, ctx, false, -std::numbers::pi, std::numbers::pi));
      assign(s.period_s, number(d, "period_s", p, ctx, false, 0.0, INFINITY, true));
    }
  }
  return s;
}

Table1Section parse_table1(const json& j, const Ctx& ctx) {
  Table1Section t;
  const std::string path = "table1";
  if (!is_object(j, path, ctx)) return t;
  check_keys(j, path, {"mean_counts", "resamples", "max_iters", "tol", "states"}, ctx);
  assign(t.mean_counts, number(j, "mean_counts", path, ctx, false, 0.0, 1e12, true));
  assign(t.resamples, number(j, "resamples", path, ctx, false, 0.0, 10000.0));
  assign(t.max_iters, number(j, "max_iters", path, ctx, false, 1.0, 1e7));
  assign(t.tol, number(j, "tol", path, ctx, false, 0.0, 1.0, true));
  if (!j.contains("states") || !j.at("states").is_array() || j.at("states").empty()) {
    ctx.bad("table1.states", "must be a non-empty array");
    return t;
  }
  std::size_t i = 0;
  for (const auto& s : j.at("states")) {
    const std::string p = "table1.states[" + std::to_string(i++) + "]";
    if (!is_object(s, p, ctx)) continue;
    check_keys(s, p, {"name", "state", "target"}, ctx);
    NamedState ns;
    ns.name = s.value("name", p);
    if (!s.contains("state")) {
      ctx.bad(p + ".state", "missing required key");
      continue;
    }
    auto st = parse_state_at(s.at("state"), p + ".state", ctx);
    auto tg = s.contains("target") ? parse_state_at(s.at("target"), p + ".target", ctx) : st;
    if (st && tg) {
      ns.state = *st;
      ns.target = *tg;
      t.states.push_back(ns);
    }
  }
  return t;
}

DipSection parse_dips(const json& j, const std::string& path, const Ctx& ctx) {
  DipSection d;
  if (!is_object(j, path, ctx)) return d;
  check_keys(j, path, {"delays_um", "baseline_counts", "rows", "filter", "state"}, ctx);
  d.delays_um = parse_delays(j, path, ctx);
  assign(d.baseline_counts, number(j, "baseline_counts", path, ctx, false, 0.0, 1e15, true));
  std::optional<FilterSpec> def_filter;
  std::optional<PolarizationState> def_state;
  if (j.contains("filter")) def_filter = parse_filter(j.at("filter"), path + ".filter", ctx);
  if (j.contains("state")) def_state = parse_state_at(j.at("state"), path + ".state", ctx);
  if (!j.contains("rows") || !j.at("rows").is_array() || j.at("rows").empty()) {
    ctx.bad(path + ".rows", "must be a non-empty array");
    return d;
  }
  std::size_t i = 0;
  for (const auto& r : j.at("rows")) {
    const std::string p = path + ".rows[" + std::to_string(i++) + "]";
    if (!is_object(r, p, ctx)) continue;
    check_keys(r, p, {"label", "filter", "state"}, ctx);
    DipRow row;
    row.label = r.value("label", p);
    auto f = r.contains("filter") ? parse_filter(r.at("filter"), p + ".filter", ctx) : def_filter;
    auto s = r.contains("state") ? parse_state_at(r.at("state"), p + ".state", ctx) : def_state;
    if (!f) ctx.bad(p + ".filter", "missing filter");
    if (!s) ctx.bad(p + ".state", "missing state");
    if (f && !f->is_gaussian()) ctx.bad(p + ".filter", "dip scans need a gaussian filter");
    if (f && s && f->is_gaussian()) {
      row.filter = *f;
      row.state = *s;
      d.rows.push_back(row);
    }
  }
  return d;
}

Ket2 named_ket(const json& j) {
  const std::string n = j.get<std::string>();
  if (n == "H") return pol::H();
  if (n == "V") return pol::V();
  if (n == "D") return pol::D();
  if (n == "A") return pol::A();
  if (n == "R") return pol::R();
  if (n == "L") return pol::L();
  throw DomainError("unknown polarization \"" + n + "\"");
}

}  // namespace

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& v : violations) out += v.key + ": " + v.message + "\n";
  return out;
}

ConfigError::ConfigError(ValidationReport report)
    : std::runtime_error("invalid config:\n" + report.to_string()), report_(std::move(report)) {}

PolarizationState parse_state(const json& spec) {
  if (!spec.is_object()) throw DomainError("state must be an object");
  try {
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "product") return product_state(named_ket(spec.at("photon1")), named_ket(spec.at("photon2")));
    if (kind == "bell") {
      const std::string w = spec.at("which").get<std::string>();
      if (w == "phi+") return bell_state(BellState::kPhiPlus);
      if (w == "phi-") return bell_state(BellState::kPhiMinus);
      if (w == "psi+") return bell_state(BellState::kPsiPlus);
      if (w == "psi-") return bell_state(BellState::kPsiMinus);
      throw DomainError("bell state must be phi+, phi-, psi+ or psi-");
    }
    if (kind == "mixed_phi") return mixed_phi_state(spec.at("p").get<double>());
    if (kind == "cascade") {
      PolarizationState s = cascade_state(spec.value("alpha", std::numbers::pi / 4), spec.value("phi", 0.0),
                                          spec.value("dephasing", 1.0));
      // Optional half-wave plate on photon 2, e.g. 45 deg turns Phi- into Psi-.
      if (spec.contains("hwp2_deg")) {
        const Matrix2c u = waveplate_unitary(
            {WaveplateKind::kHalfWave, spec.at("hwp2_deg").get<double>() * std::numbers::pi / 180.0});
        s = apply_local(s, Matrix2c::Identity(), u);
      }
      return s;
    }
    if (kind == "matrix") return state_from_json(spec.at("value"));
    throw DomainError("unknown state kind \"" + kind + "\"");
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed state: ") + e.what());
  }
}

RunConfig parse_config(const json& doc, ValidationReport& report) {
  const Ctx ctx{report};
  RunConfig cfg;
  if (!doc.is_object()) {
    ctx.bad("(root)", "config must be a JSON object");
    return cfg;
  }
  check_keys(doc, "",
             {"source", "coincidence", "rates", "jitter_calibration", "cross_pair", "heralded", "stability", "table1",
              "same_pair_dips", "entangled_dips", "description"},
             ctx);
  if (doc.contains("source")) cfg.source = parse_source(doc.at("source"), ctx);
  if (doc.contains("coincidence")) cfg.coincidence = parse_coincidence(doc.at("coincidence"), ctx);
  if (doc.contains("rates")) cfg.rates = parse_rates(doc.at("rates"), ctx);
  if (doc.contains("jitter_calibration")) cfg.jitter_calibration = parse_calibration(doc.at("jitter_calibration"), ctx);
  if (doc.contains("cross_pair")) cfg.cross_pair = parse_cross(doc.at("cross_pair"), ctx);
  if (doc.contains("heralded")) cfg.heralded = parse_heralded(doc.at("heralded"), ctx);
  if (doc.contains("stability")) cfg.stability = parse_stability(doc.at("stability"), ctx);
  if (doc.contains("table1")) cfg.table1 = parse_table1(doc.at("table1"), ctx);
  if (doc.contains("same_pair_dips")) cfg.same_pair_dips = parse_dips(doc.at("same_pair_dips"), "same_pair_dips", ctx);
  if (doc.contains("entangled_dips")) cfg.entangled_dips = parse_dips(doc.at("entangled_dips"), "entangled_dips", ctx);
  return cfg;
}

RunConfig parse_config(const json& doc) {
  ValidationReport rep;
  RunConfig cfg = parse_config(doc, rep);
  if (!rep.ok()) throw ConfigError(rep);
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    ValidationReport rep;
    rep.violations.push_back({"(root)", std::string("not valid JSON: ") + e.what()});
    throw ConfigError(rep);
  }
}

ValidationReport validate_config(const std::string& path) {
  ValidationReport rep;
  json doc;
  try {
    doc = load_json_file(path);
  } catch (const ConfigError& e) {
    return e.report();
  }
  parse_config(doc, rep);
  return rep;
}

}  // namespace fourphoton
