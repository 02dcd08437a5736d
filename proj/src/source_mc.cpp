#include "fourphoton/source_mc.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "fourphoton/errors.hpp"

namespace fourphoton {

namespace {

constexpr std::uint64_t kBlockPulses = std::uint64_t{1} << 22;

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

bool kappa_on(double k) { return k > 0.0; }

std::array<double, 3> direction_probabilities(double kappa, double w) {
  if (!kappa_on(kappa)) return {1.0, 0.0, 0.0};
  return pair_probabilities(kappa, w);
}

// Jumps from one relevant pulse to the next. Pulses whose (n_f, n_b) lies
// outside the mask cannot contribute to the statistic being collected, so
// they are skipped in a single geometric draw.
class PulseSampler {
 public:
  PulseSampler(const std::array<double, 3>& pf, const std::array<double, 3>& pb,
               const std::array<std::array<bool, 3>, 3>& mask) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (mask[i][j] && pf[i] * pb[j] > 0.0) {
          acc += pf[i] * pb[j];
          outcomes_.push_back({i, j, acc});
        }
    q_ = acc;
    for (auto& o : outcomes_) o.cum /= acc;
  }

  bool empty() const { return outcomes_.empty(); }

  // Advances `pulse` to the next relevant pulse; false once it reaches `end`.
  bool next(Rng& rng, std::uint64_t& pulse, std::uint64_t end, int& nf, int& nb) const {
    const std::uint64_t skip = geometric_failures(rng, q_);
    if (skip >= end - pulse) {
      pulse = end;
      return false;
    }
    pulse += skip;
    const double u = uniform01(rng);
    const Outcome* o = &outcomes_.back();
    for (const auto& c : outcomes_)
      if (u < c.cum) {
        o = &c;
        break;
      }
    nf = o->nf;
    nb = o->nb;
    return true;
  }

 private:
  struct Outcome {
    int nf, nb;
    double cum;
  };
  std::vector<Outcome> outcomes_;
  double q_ = 0.0;
};

using Mask = std::array<std::array<bool, 3>, 3>;

Mask mask_where(const std::function<bool(int, int)>& pred) {
  Mask m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = pred(i, j);
  return m;
}

// Joint pass statistics of a pair through two analyzers.
struct AnalyzerPass {
  double p1 = 1.0, p2 = 1.0, p12 = 1.0;
};

AnalyzerPass analyzer_pass(const PolarizationState& state, const std::optional<Projector>& proj) {
  if (!proj) return {};
  AnalyzerPass a;
  const Ket2& k1 = proj->photon1();
  const Ket2& k2 = proj->photon2();
  a.p1 = std::clamp((k1.adjoint() * reduced_photon1(state) * k1)(0, 0).real(), 0.0, 1.0);
  a.p2 = std::clamp((k2.adjoint() * reduced_photon2(state) * k2)(0, 0).real(), 0.0, 1.0);
  a.p12 = std::min({projection_probability(state, *proj), a.p1, a.p2});
  return a;
}

void sample_pass(Rng& rng, const AnalyzerPass& a, bool& pass1, bool& pass2) {
  pass1 = bernoulli(rng, a.p1);
  double cond;
  if (pass1)
    cond = a.p1 > 0.0 ? a.p12 / a.p1 : 0.0;
  else
    cond = a.p1 < 1.0 ? (a.p2 - a.p12) / (1.0 - a.p1) : 0.0;
  pass2 = bernoulli(rng, std::clamp(cond, 0.0, 1.0));
}

std::int64_t pulse_time_ps(std::uint64_t pulse, double period_ps) {
  return std::llround(static_cast<double>(pulse) * period_ps);
}

template <typename Fn>
void run_blocks(std::uint64_t n_blocks, int batches, Fn&& fn) {
  const auto workers = static_cast<std::uint64_t>(std::max(1, batches));
  if (workers == 1 || n_blocks <= 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::vector<std::thread> pool;
  const std::uint64_t per = (n_blocks + workers - 1) / workers;
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t lo = w * per, hi = std::min(n_blocks, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::uint64_t b = lo; b < hi; ++b) fn(b);
    });
  }
  for (auto& t : pool) t.join();
}

void apply_dead_time(std::vector<std::int64_t>& times, double dead_time_ns) {
  if (dead_time_ns <= 0.0 || times.empty()) return;
  const auto dead = static_cast<std::int64_t>(std::llround(dead_time_ns * 1000.0));
  std::vector<std::int64_t> kept;
  kept.reserve(times.size());
  for (std::int64_t t : times)
    if (kept.empty() || t - kept.back() >= dead) kept.push_back(t);
  times.swap(kept);
}

struct OverlapModes {
  int a, b, herald_a, herald_b;  // zero-based mode indices
};

OverlapModes modes_of(ModePair pair) {
  return pair == ModePair::k13 ? OverlapModes{0, 2, 1, 3} : OverlapModes{1, 3, 0, 2};
}

double single_photon_overlap(const SourceSettings& s, ModePair pair) {
  const PolarizationState f = s.forward_state();
  const PolarizationState b = s.backward_state();
  const Matrix2c ra = pair == ModePair::k13 ? reduced_photon1(f) : reduced_photon2(f);
  const Matrix2c rb = pair == ModePair::k13 ? reduced_photon1(b) : reduced_photon2(b);
  return (ra * rb).trace().real();
}

double click_probability(double eta, int n) { return 1.0 - std::pow(1.0 - eta, n); }

}  // namespace

PolarizationState SourceSettings::forward_state() const {
  return state_forward ? *state_forward : cascade_state(alpha_forward, phi_forward, dephasing_forward);
}

PolarizationState SourceSettings::backward_state() const {
  return state_backward ? *state_backward : cascade_state(alpha_backward, phi_backward, dephasing_backward);
}

void SourceSettings::validate() const {
  auto kappa_ok = [](double k) { return k == 0.0 || (k > 0.0 && k < 0.5); };
  require(kappa_ok(kappa_forward), "kappa_forward must lie in (0, 0.5) or be 0");
  require(kappa_ok(kappa_backward), "kappa_backward must lie in (0, 0.5) or be 0");
  require(dephasing_forward >= 0.0 && dephasing_forward <= 1.0, "dephasing_forward must lie in [0, 1]");
  require(dephasing_backward >= 0.0 && dephasing_backward <= 1.0, "dephasing_backward must lie in [0, 1]");
  require(std::isfinite(jitter_sigma_fs) && jitter_sigma_fs >= 0.0, "jitter_sigma_fs must be >= 0");
  for (int i = 0; i < 4; ++i)
    require(coupling_efficiency[i] >= 0.0 && coupling_efficiency[i] <= 1.0,
            "coupling_efficiency[" + std::to_string(i) + "] must lie in [0, 1]");
  require(std::isfinite(rep_rate_hz) && rep_rate_hz > 0.0, "rep_rate_hz must be > 0");
  require(double_pair_weight >= 0.0, "double_pair_weight must be >= 0");
  for (const auto& f : filters) f.validate();
}

void CoincidenceConfig::validate() const {
  require(twofold_window_ns > 0.0, "twofold_window_ns must be > 0");
  require(fourfold_window_ns > 0.0, "fourfold_window_ns must be > 0");
  require(fourfold_window_ns >= twofold_window_ns, "fourfold_window_ns must be >= twofold_window_ns");
}

std::array<double, 3> pair_probabilities(double kappa, double w) {
  require(kappa > 0.0 && kappa < 0.5, "kappa must lie in (0, 0.5)");
  require(w >= 0.0, "double-pair weight must be >= 0");
  const double k2 = kappa * kappa;
  const double norm = 1.0 + k2 + w * k2 * k2;
  return {1.0 / norm, k2 / norm, w * k2 * k2 / norm};
}

double kappa_for_pair_probability(double p1, double w) {
  require(p1 > 0.0 && p1 < 0.2, "pair probability must lie in (0, 0.2)");
  // p1 (1 + x + w x^2) = x with x = kappa^2
  double x;
  if (w == 0.0) {
    x = p1 / (1.0 - p1);
  } else {
    const double b = 1.0 - p1;
    x = (b - std::sqrt(b * b - 4.0 * p1 * p1 * w)) / (2.0 * p1 * w);
  }
  const double k = std::sqrt(x);
  require(k < 0.5, "requested pair probability needs kappa >= 0.5");
  return k;
}

int sample_pair_number(double kappa, Rng& rng, double w) {
  const auto p = pair_probabilities(kappa, w);
  const double u = uniform01(rng);
  if (u < p[0]) return 0;
  return u < p[0] + p[1] ? 1 : 2;
}

std::vector<std::pair<std::size_t, std::size_t>> match_coincidences(const std::vector<std::int64_t>& a,
                                                                    const std::vector<std::int64_t>& b,
                                                                    double window_ns) {
  require(std::is_sorted(a.begin(), a.end()) && std::is_sorted(b.begin(), b.end()),
          "coincidence inputs must be sorted");
  require(window_ns >= 0.0, "coincidence window must be >= 0");
  const auto w = static_cast<std::int64_t>(std::llround(window_ns * 1000.0));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::int64_t d = a[i] - b[j];
    if (d <= w && d >= -w) {
      out.emplace_back(i, j);
      ++i;
      ++j;
    } else if (d < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

std::size_t count_coincidences(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                               double window_ns) {
  return match_coincidences(a, b, window_ns).size();
}

CountSummary summarize(const DetectionRecord& rec, const CoincidenceConfig& coinc, double rep_rate_hz) {
  CountSummary s;
  s.duration_s = rec.duration_s;
  const double t = rec.duration_s;
  require(t > 0.0, "record duration must be > 0");
  for (int i = 0; i < 4; ++i) s.singles_hz[i] = static_cast<double>(rec.times_ps[i].size()) / t;
  const auto& m = rec.times_ps;
  const double w2 = coinc.twofold_window_ns;
  s.pair_rate_forward_hz = static_cast<double>(count_coincidences(m[0], m[1], w2)) / t;
  s.pair_rate_backward_hz = static_cast<double>(count_coincidences(m[2], m[3], w2)) / t;

  auto tac = [&](int x, int y) {
    std::vector<std::int64_t> out;
    for (const auto& [i, j] : match_coincidences(m[x], m[y], w2)) out.push_back(m[x][i]);
    return out;
  };
  const auto tac13 = tac(0, 2);
  const auto tac24 = tac(1, 3);
  s.cross_rate_13_hz = static_cast<double>(tac13.size()) / t;
  s.cross_rate_24_hz = static_cast<double>(tac24.size()) / t;

  const auto four = match_coincidences(tac13, tac24, coinc.fourfold_window_ns);
  const double half_period_ps = 0.5e12 / rep_rate_hz;
  std::size_t accidental = 0;
  for (const auto& [i, j] : four)
    if (std::abs(static_cast<double>(tac13[i] - tac24[j])) >= half_period_ps) ++accidental;
  s.fourfold_per_min = 60.0 * static_cast<double>(four.size()) / t;
  s.fourfold_accidental_per_min = 60.0 * static_cast<double>(accidental) / t;
  return s;
}

RunResult simulate_run(const SourceSettings& settings, const CoincidenceConfig& coinc, double duration_s,
                       std::uint64_t seed, const RunOptions& options) {
  settings.validate();
  coinc.validate();
  require(duration_s > 0.0, "duration must be > 0");
  require(options.dark_count_hz >= 0.0 && options.dead_time_ns >= 0.0, "dark counts and dead time must be >= 0");

  const auto n_pulses = static_cast<std::uint64_t>(std::floor(duration_s * settings.rep_rate_hz));
  const std::uint64_t n_blocks = (n_pulses + kBlockPulses - 1) / kBlockPulses;
  const double period_ps = 1e12 / settings.rep_rate_hz;
  const auto pf = direction_probabilities(settings.kappa_forward, settings.double_pair_weight);
  const auto pb = direction_probabilities(settings.kappa_backward, settings.double_pair_weight);
  const PulseSampler sampler(pf, pb, mask_where([](int i, int j) { return i + j > 0; }));
  const AnalyzerPass af = analyzer_pass(settings.forward_state(), options.analyzer_forward);
  const AnalyzerPass ab = analyzer_pass(settings.backward_state(), options.analyzer_backward);
  const auto& eta = settings.coupling_efficiency;
  const double sigma = settings.jitter_sigma_fs;

  std::vector<std::array<std::vector<std::int64_t>, 4>> blocks(n_blocks);
  run_blocks(n_blocks, options.batches, [&](std::uint64_t blk) {
    Rng rng(stream_seed(seed, blk));
    auto& out = blocks[blk];
    const std::uint64_t begin = blk * kBlockPulses;
    const std::uint64_t end = std::min(n_pulses, begin + kBlockPulses);
    std::uint64_t pulse = begin;
    int nf = 0, nb = 0;
    while (!sampler.empty() && sampler.next(rng, pulse, end, nf, nb)) {
      std::array<double, 4> first{INFINITY, INFINITY, INFINITY, INFINITY};
      auto emit = [&](int n, int m1, int m2, const AnalyzerPass& a) {
        for (int k = 0; k < n; ++k) {
          const double t0 = sigma > 0.0 ? sigma * standard_normal(rng) : 0.0;
          bool pass1, pass2;
          sample_pass(rng, a, pass1, pass2);
          if (pass1 && bernoulli(rng, eta[m1])) first[m1] = std::min(first[m1], t0);
          if (pass2 && bernoulli(rng, eta[m2])) first[m2] = std::min(first[m2], t0);
        }
      };
      emit(nf, 0, 1, af);
      emit(nb, 2, 3, ab);
      const std::int64_t base = pulse_time_ps(pulse, period_ps);
      for (int m = 0; m < 4; ++m)
        if (std::isfinite(first[m])) out[m].push_back(base + std::llround(first[m] / 1000.0));
      ++pulse;
    }
    if (options.dark_count_hz > 0.0) {
      const double t_begin = static_cast<double>(begin) * period_ps;
      const double t_end = static_cast<double>(end) * period_ps;
      const double mean_gap = 1e12 / options.dark_count_hz;
      for (int m = 0; m < 4; ++m) {
        double t = t_begin + exponential(rng, mean_gap);
        while (t < t_end) {
          out[m].push_back(std::llround(t));
          t += exponential(rng, mean_gap);
        }
        std::sort(out[m].begin(), out[m].end());
      }
    }
  });

  RunResult result;
  result.record.duration_s = duration_s;
  for (int m = 0; m < 4; ++m) {
    auto& dst = result.record.times_ps[m];
    for (auto& b : blocks) dst.insert(dst.end(), b[m].begin(), b[m].end());
    // Jitter can push a click a few picoseconds before the pulse slot.
    for (auto& t : dst) t = std::max<std::int64_t>(t, 0);
    std::sort(dst.begin(), dst.end());
    apply_dead_time(dst, options.dead_time_ns);
  }
  result.summary = summarize(result.record, coinc, settings.rep_rate_hz);
  return result;
}

double multiphoton_baseline(const SourceSettings& s, ModePair pair, bool heralded) {
  s.validate();
  const auto pf = direction_probabilities(s.kappa_forward, s.double_pair_weight);
  const auto pb = direction_probabilities(s.kappa_backward, s.double_pair_weight);
  const OverlapModes m = modes_of(pair);
  const auto& eta = s.coupling_efficiency;
  double per_pulse;
  if (!heralded) {
    // Both overlap photons of a double pair reach the coupler and split.
    per_pulse = 0.5 * (pf[2] * pb[0] * eta[m.a] * eta[m.a] + pf[0] * pb[2] * eta[m.b] * eta[m.b]);
  } else {
    // A double pair supplies both coupler photons and its herald; the other
    // direction's herald fires while its overlap photon is lost.
    per_pulse = 0.5 * (pf[2] * pb[1] * eta[m.a] * eta[m.a] * click_probability(eta[m.herald_a], 2) *
                           (1.0 - eta[m.b]) * eta[m.herald_b] +
                       pb[2] * pf[1] * eta[m.b] * eta[m.b] * click_probability(eta[m.herald_b], 2) *
                           (1.0 - eta[m.a]) * eta[m.herald_a]);
  }
  return per_pulse * s.rep_rate_hz;
}

double expected_scan_rate(const SourceSettings& s, double delay_um, ModePair pair, bool heralded) {
  const auto pf = direction_probabilities(s.kappa_forward, s.double_pair_weight);
  const auto pb = direction_probabilities(s.kappa_backward, s.double_pair_weight);
  const OverlapModes m = modes_of(pair);
  const auto& eta = s.coupling_efficiency;
  const double overlap = smeared_overlap(delay_um_to_fs(delay_um), s.filters[m.a], s.filters[m.b],
                                         std::sqrt(2.0) * s.jitter_sigma_fs);
  double cross = pf[1] * pb[1] * eta[m.a] * eta[m.b] * 0.5 * (1.0 - single_photon_overlap(s, pair) * overlap);
  if (heralded) cross *= eta[m.herald_a] * eta[m.herald_b];
  return cross * s.rep_rate_hz + multiphoton_baseline(s, pair, heralded);
}

double expected_raw_visibility(const SourceSettings& s, ModePair pair, bool heralded) {
  const double far = expected_scan_rate(s, 1e9, pair, heralded);
  const double near = expected_scan_rate(s, 0.0, pair, heralded);
  return dip_visibility(far, near);
}

double calibrate_jitter(SourceSettings s, ModePair pair, bool heralded, double target) {
  s.jitter_sigma_fs = 0.0;
  const double v0 = expected_raw_visibility(s, pair, heralded);
  require(target > 0.0 && target < v0, "target visibility not reachable by adding jitter");
  double lo = 0.0, hi = 1.0;
  for (;;) {
    s.jitter_sigma_fs = hi;
    if (expected_raw_visibility(s, pair, heralded) < target) break;
    hi *= 2.0;
    require(hi < 1e12, "jitter calibration did not bracket the target");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-9 * hi; ++i) {
    s.jitter_sigma_fs = 0.5 * (lo + hi);
    (expected_raw_visibility(s, pair, heralded) > target ? lo : hi) = s.jitter_sigma_fs;
  }
  return 0.5 * (lo + hi);
}

InterferenceScan simulate_hom_scan(const SourceSettings& settings, const std::vector<double>& delays_um,
                                   ModePair pair, bool heralded, std::uint64_t pulses_per_point,
                                   std::uint64_t seed, int batches) {
  settings.validate();
  require(pulses_per_point > 0, "pulses_per_point must be > 0");
  const OverlapModes m = modes_of(pair);
  const FilterSpec& fa = settings.filters[m.a];
  const FilterSpec& fb = settings.filters[m.b];
  if (!fa.is_gaussian() || !fb.is_gaussian())
    throw UnsupportedModelError("overlap modes need Gaussian filters");
  const double s_pol = single_photon_overlap(settings, pair);
  const auto pf = direction_probabilities(settings.kappa_forward, settings.double_pair_weight);
  const auto pb = direction_probabilities(settings.kappa_backward, settings.double_pair_weight);
  // Without dark counts a four-fold needs both directions, a two-fold needs
  // at least two photons at the coupler.
  const PulseSampler sampler(pf, pb,
                             heralded ? mask_where([](int i, int j) { return i > 0 && j > 0; })
                                      : mask_where([](int i, int j) { return i + j >= 2; }));
  const auto& eta = settings.coupling_efficiency;
  const double sigma = settings.jitter_sigma_fs;
  const std::uint64_t n_blocks = (pulses_per_point + kBlockPulses - 1) / kBlockPulses;

  InterferenceScan scan;
  scan.dwell_s = static_cast<double>(pulses_per_point) / settings.rep_rate_hz;
  scan.multiphoton_counts = multiphoton_baseline(settings, pair, heralded) * scan.dwell_s;
  for (std::size_t p = 0; p < delays_um.size(); ++p) {
    const double delay_fs = delay_um_to_fs(delays_um[p]);
    const std::uint64_t point_seed = stream_seed(seed, p);
    std::vector<std::uint64_t> counts(n_blocks, 0);
    run_blocks(n_blocks, batches, [&](std::uint64_t blk) {
      Rng rng(stream_seed(point_seed, blk));
      const std::uint64_t begin = blk * kBlockPulses;
      const std::uint64_t end = std::min(pulses_per_point, begin + kBlockPulses);
      std::uint64_t pulse = begin, c = 0;
      int nf = 0, nb = 0;
      while (!sampler.empty() && sampler.next(rng, pulse, end, nf, nb)) {
        ++pulse;
        int a = 0, b = 0;
        bool herald_a = false, herald_b = false;
        double ta = 0.0, tb = 0.0;
        for (int k = 0; k < nf; ++k) {
          const double t0 = sigma > 0.0 ? sigma * standard_normal(rng) : 0.0;
          if (bernoulli(rng, eta[m.a])) {
            ++a;
            ta = t0;
          }
          if (bernoulli(rng, eta[m.herald_a])) herald_a = true;
        }
        for (int k = 0; k < nb; ++k) {
          const double t0 = sigma > 0.0 ? sigma * standard_normal(rng) : 0.0;
          if (bernoulli(rng, eta[m.b])) {
            ++b;
            tb = t0;
          }
          if (bernoulli(rng, eta[m.herald_b])) herald_b = true;
        }
        if (heralded && !(herald_a && herald_b)) continue;
        const int k = a + b;
        if (k < 2) continue;
        double p_split;
        if (a == 1 && b == 1)
          p_split = 0.5 * (1.0 - s_pol * temporal_overlap(delay_fs + tb - ta, fa, fb));
        else
          p_split = 1.0 - std::ldexp(1.0, 1 - k);
        if (bernoulli(rng, p_split)) ++c;
      }
      counts[blk] = c;
    });
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    ScanPoint pt;
    pt.delay_um = delays_um[p];
    pt.delay_fs = delay_fs;
    pt.counts = static_cast<double>(total);
    pt.rate_hz = pt.counts / scan.dwell_s;
    scan.points.push_back(pt);
  }
  return scan;
}

double expected_pair_coincidence_probability(const SourceSettings& s, bool forward,
                                             const std::optional<Projector>& analyzer) {
  const double kappa = forward ? s.kappa_forward : s.kappa_backward;
  const auto p = direction_probabilities(kappa, s.double_pair_weight);
  const AnalyzerPass a = analyzer_pass(forward ? s.forward_state() : s.backward_state(), analyzer);
  const double e1 = s.coupling_efficiency[forward ? 0 : 2];
  const double e2 = s.coupling_efficiency[forward ? 1 : 3];
  const double miss1 = 1.0 - e1 * a.p1;
  const double miss2 = 1.0 - e2 * a.p2;
  const double miss_both = 1.0 - e1 * a.p1 - e2 * a.p2 + e1 * e2 * a.p12;
  double total = 0.0;
  for (int n = 1; n <= 2; ++n)
    total += p[n] * (1.0 - std::pow(miss1, n) - std::pow(miss2, n) + std::pow(miss_both, n));
  return total;
}

std::vector<StabilityBin> simulate_stability(const SourceSettings& settings,
                                             const std::function<double(double)>& phase_drift,
                                             double duration_s, double bin_s, std::uint64_t seed) {
  settings.validate();
  require(duration_s > 0.0 && bin_s > 0.0 && bin_s <= duration_s, "need 0 < bin_s <= duration_s");
  require(kappa_on(settings.kappa_forward), "stability test needs forward pairs");
  const Projector analyzer(pol::D(), pol::R());
  const auto pf = pair_probabilities(settings.kappa_forward, settings.double_pair_weight);
  const PulseSampler sampler(pf, {1.0, 0.0, 0.0}, mask_where([](int i, int) { return i > 0; }));
  const auto& eta = settings.coupling_efficiency;
  const auto n_bins = static_cast<std::size_t>(std::ceil(duration_s / bin_s - 1e-9));

  SourceSettings ref = settings;
  ref.state_forward.reset();
  ref.phi_forward = 0.0;
  const double p_ref = expected_pair_coincidence_probability(ref, true, analyzer);
  require(p_ref > 0.0, "reference coincidence probability is zero");

  std::vector<StabilityBin> out;
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double t0 = static_cast<double>(i) * bin_s;
    const double width = std::min(bin_s, duration_s - t0);
    const auto pulses = static_cast<std::uint64_t>(std::floor(width * settings.rep_rate_hz));
    StabilityBin bin;
    bin.t_s = t0 + 0.5 * width;
    bin.phi = settings.phi_forward + phase_drift(bin.t_s);
    SourceSettings now = settings;
    now.state_forward.reset();
    now.phi_forward = bin.phi;
    const AnalyzerPass a = analyzer_pass(now.forward_state(), analyzer);

    const std::uint64_t bin_seed = stream_seed(seed, i);
    const std::uint64_t n_blocks = (pulses + kBlockPulses - 1) / kBlockPulses;
    std::uint64_t counts = 0;
    for (std::uint64_t blk = 0; blk < n_blocks; ++blk) {
      Rng rng(stream_seed(bin_seed, blk));
      const std::uint64_t begin = blk * kBlockPulses;
      const std::uint64_t end = std::min(pulses, begin + kBlockPulses);
      std::uint64_t pulse = begin;
      int nf = 0, nb = 0;
      while (sampler.next(rng, pulse, end, nf, nb)) {
        ++pulse;
        bool click1 = false, click2 = false;
        for (int k = 0; k < nf; ++k) {
          bool pass1, pass2;
          sample_pass(rng, a, pass1, pass2);
          if (pass1 && bernoulli(rng, eta[0])) click1 = true;
          if (pass2 && bernoulli(rng, eta[1])) click2 = true;
        }
        if (click1 && click2) ++counts;
      }
    }
    bin.counts = static_cast<double>(counts);
    bin.expected_counts = static_cast<double>(pulses) * expected_pair_coincidence_probability(now, true, analyzer);
    bin.relative_rate = bin.counts / (static_cast<double>(pulses) * p_ref);
    out.push_back(bin);
  }
  return out;
}

nlohmann::json to_json(const CountSummary& s) {
  return {{"singles_hz", s.singles_hz},
          {"pair_rate_forward_hz", s.pair_rate_forward_hz},
          {"pair_rate_backward_hz", s.pair_rate_backward_hz},
          {"cross_rate_13_hz", s.cross_rate_13_hz},
          {"cross_rate_24_hz", s.cross_rate_24_hz},
          {"fourfold_per_min", s.fourfold_per_min},
          {"fourfold_accidental_per_min", s.fourfold_accidental_per_min},
          {"duration_s", s.duration_s}};
}

CountSummary summary_from_json(const nlohmann::json& doc) {
  CountSummary s;
  try {
    s.singles_hz = doc.at("singles_hz").get<std::array<double, 4>>();
    s.pair_rate_forward_hz = doc.at("pair_rate_forward_hz").get<double>();
    s.pair_rate_backward_hz = doc.at("pair_rate_backward_hz").get<double>();
    s.cross_rate_13_hz = doc.at("cross_rate_13_hz").get<double>();
    s.cross_rate_24_hz = doc.at("cross_rate_24_hz").get<double>();
    s.fourfold_per_min = doc.at("fourfold_per_min").get<double>();
    s.fourfold_accidental_per_min = doc.value("fourfold_accidental_per_min", 0.0);
    s.duration_s = doc.at("duration_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed count summary: ") + e.what());
  }
  return s;
}

}  // namespace fourphoton
