#include "kst/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace kst {

namespace {

constexpr std::size_t kGridCap = std::size_t{1} << 20;
constexpr std::size_t kExhaustiveCap = std::size_t{1} << 16;

// Portable uniform double in [0,1) with 53 random bits.
double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

// fn(i) for i < count, strided across threads. First exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

ScalarMatrix random_input(std::mt19937_64& rng, std::size_t d, std::size_t n) {
  ScalarMatrix x(d, n);
  for (Scalar& v : x.data()) v = Scalar::exact_from_double(unit_double(rng));
  return x;
}

ScalarMatrix oracle_eval(const TargetOracle& f, const ScalarMatrix& x) {
  try {
    return f.evaluate(to_mode(x, Mode::Exact));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ModeUnsupported) throw;
    return f.evaluate(to_mode(x, Mode::Float));
  }
}

double deviation(const Scalar& a, const Scalar& b) {
  if (a.is_exact() && b.is_exact()) return (a - b).abs().to_double();
  return std::abs(a.to_double() - b.to_double());
}

// |a - b| <= bound, exactly when everything is exact.
bool within(const Scalar& a, const Scalar& b, const Scalar& bound, double float_tol) {
  if (a.is_exact() && b.is_exact() && bound.is_exact()) return !(bound < (a - b).abs());
  return std::abs(a.to_double() - b.to_double()) <= bound.to_double() + float_tol;
}

Mode pipeline_mode(const TransformerPipeline& t) { return t.exact_capable() ? Mode::Exact : Mode::Float; }

std::string matrix_string(const ScalarMatrix& x) {
  std::string s = "[";
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (r) s += "; ";
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (c) s += ", ";
      s += x(r, c).to_string();
    }
  }
  return s + "]";
}

Json matrix_json(const ScalarMatrix& x) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < x.cols(); ++c) row.push_back(x(r, c).to_string());
    rows.push_back(std::move(row));
  }
  return rows;
}

// Entry i of the dyadic grid: digit k_t / 2^K for coordinate t.
ScalarMatrix dyadic_input(std::size_t index, std::size_t K, std::size_t d, std::size_t n) {
  ScalarMatrix x(d, n);
  const std::size_t per = std::size_t{1} << K;
  for (Scalar& v : x.data()) {
    v = Scalar::exact(static_cast<long>(index % per)) * Scalar::pow2(-static_cast<long>(K));
    index /= per;
  }
  return x;
}

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap, const char* what) {
  std::size_t v = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (v > cap / base) throw Error(ErrorKind::CapExceeded, std::string(what) + " exceeds " + std::to_string(cap) + " points");
    v *= base;
  }
  return v;
}

struct PointResult {
  double dev = 0.0;
  std::size_t r = 0, s = 0;
  bool flagged = false;
  bool mismatch = false;
  Scalar lo, hi;
};

EqualityReport compare_inner(const std::function<ScalarMatrix(const ScalarMatrix&)>& z_of, std::size_t K,
                             std::size_t d, std::size_t n, std::size_t n_random, std::uint64_t seed,
                             const FlawReport* flaws) {
  std::vector<ScalarMatrix> inputs;
  if (K * d * n <= 16) {
    const std::size_t cells = std::size_t{1} << (K * d * n);
    for (std::size_t i = 0; i < cells; ++i) inputs.push_back(dyadic_input(i, K, d, n));
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_random; ++i) inputs.push_back(random_input(rng, d, n));

  EqualityReport rep;
  for (const ScalarMatrix& x : inputs) {
    bool flagged = false;
    if (flaws) {
      for (const Scalar& v : x.data()) flagged = flagged || flaws->contains(v.rational());
    }
    const ScalarMatrix z = z_of(x);
    const ScalarMatrix ref = inner_matrix_reference(x, K, d, n);
    const bool same = identical(z, ref);
    if (flagged) {
      ++rep.flaw_skipped;
      if (!same) ++rep.flaw_mismatched;
      continue;
    }
    ++rep.checked;
    if (!same) {
      if (rep.failed++ == 0) rep.first_failure = "X = " + matrix_string(x) + ": Z = " + matrix_string(z) + ", expected " + matrix_string(ref);
    }
  }
  return rep;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

DinfReport measure_dinf(const TransformerPipeline& t, const TargetOracle& f, std::size_t grid_per_axis,
                        std::size_t extra_random, std::uint64_t seed, unsigned threads) {
  const std::size_t d = t.params.d, n = t.params.n, dn = d * n;
  const std::size_t G = grid_per_axis ? grid_per_axis : (std::size_t{1} << (t.params.K + 2)) + 1;
  if (G < 2) throw Error(ErrorKind::OutOfRange, "grid needs at least 2 points per axis");
  const std::size_t grid = checked_power(G, dn, kGridCap, "d_inf grid");
  const Mode mode = pipeline_mode(t);

  std::mt19937_64 rng(seed);
  std::vector<ScalarMatrix> extra;
  for (std::size_t i = 0; i < extra_random; ++i) extra.push_back(random_input(rng, d, n));

  auto input = [&](std::size_t i) {
    if (i >= grid) return extra[i - grid];
    ScalarMatrix x(d, n);
    for (Scalar& v : x.data()) {
      v = Scalar::exact(static_cast<long>(i % G), static_cast<long>(G - 1));
      i /= G;
    }
    return x;
  };

  const std::size_t total = grid + extra.size();
  std::vector<PointResult> res(total);
  parallel_for(total, threads, [&](std::size_t i) {
    const ScalarMatrix x = input(i);
    const ScalarMatrix g = eval_transformer(t, to_mode(x, mode), mode);
    const ScalarMatrix y = oracle_eval(f, x);
    PointResult& pr = res[i];
    pr.lo = pr.hi = g(0, 0);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t s = 0; s < n; ++s) {
        const double dev = deviation(g(r, s), y(r, s));
        if (dev > pr.dev) {
          pr.dev = dev;
          pr.r = r;
          pr.s = s;
        }
        if (g(r, s) < pr.lo) pr.lo = g(r, s);
        if (pr.hi < g(r, s)) pr.hi = g(r, s);
      }
    }
  });

  DinfReport rep;
  rep.points = total;
  rep.exact = mode == Mode::Exact;
  rep.certified = rep.exact && t.inner == InnerVariant::Floor && t.backend == MemoBackend::Bitpack &&
                  (G - 1) % (std::size_t{1} << t.params.K) == 0;
  std::size_t arg = 0;
  rep.out_min = res[0].lo;
  rep.out_max = res[0].hi;
  for (std::size_t i = 0; i < total; ++i) {
    if (res[i].dev > res[arg].dev) arg = i;
    if (res[i].lo < rep.out_min) rep.out_min = res[i].lo;
    if (rep.out_max < res[i].hi) rep.out_max = res[i].hi;
  }
  rep.sup = res[arg].dev;
  rep.argmax = input(arg);
  rep.r = res[arg].r;
  rep.s = res[arg].s;
  return rep;
}

DpReport measure_dp(const TransformerPipeline& t, const TargetOracle& f, double p, std::size_t n_samples,
                    std::uint64_t seed, unsigned threads) {
  if (!(p >= 1) || !std::isfinite(p)) throw Error(ErrorKind::OutOfRange, "p must be finite and >= 1");
  if (n_samples < 2) throw Error(ErrorKind::OutOfRange, "Monte Carlo needs at least 2 samples");
  const std::size_t d = t.params.d, n = t.params.n;
  const Mode mode = pipeline_mode(t);
  std::mt19937_64 rng(seed);
  std::vector<ScalarMatrix> xs;
  xs.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) xs.push_back(random_input(rng, d, n));

  std::vector<double> v(n_samples, 0.0);
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const ScalarMatrix g = eval_transformer(t, to_mode(xs[i], mode), mode);
    const ScalarMatrix y = oracle_eval(f, xs[i]);
    double acc = 0;
    for (std::size_t k = 0; k < g.data().size(); ++k) acc += std::pow(deviation(g.data()[k], y.data()[k]), p);
    v[i] = acc;
  });

  DpReport rep;
  rep.samples = n_samples;
  double sum = 0;
  for (double a : v) sum += a;
  rep.mean_pp = sum / static_cast<double>(n_samples);
  double ss = 0;
  for (double a : v) ss += (a - rep.mean_pp) * (a - rep.mean_pp);
  rep.se_pp = std::sqrt(ss / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples));
  rep.estimate = std::pow(rep.mean_pp, 1 / p);
  // Delta method for mean^{1/p}.
  rep.std_error = rep.mean_pp > 0 ? rep.se_pp * std::pow(rep.mean_pp, 1 / p - 1) / p : 0.0;
  return rep;
}

double lp_decomposition_bound(const TransformerPipeline& t, double p) {
  const ConstructionParams& P = t.params;
  const double dn = static_cast<double>(P.d * P.n);
  const double K = static_cast<double>(P.K), H = static_cast<double>(P.H);
  const double g_range = (t.g_max - t.g_min).to_double();
  const double quant = g_range / std::pow(2.0, H) + std::pow(2.0, P.beta) * P.Q / std::pow(2.0, (K + 2) * P.beta);
  const double flaw = dn * dn * std::pow(P.B_sigma + t.f_max.to_double(), p) / std::pow(2.0, K * P.beta * p);
  return dn * std::pow(quant, p) + flaw;
}

FlawEstimate estimate_flaw_measure(const VectorNet& inner, std::size_t K, std::size_t dn, std::size_t n_samples,
                                   std::uint64_t seed, unsigned threads) {
  std::mt19937_64 rng(seed);
  std::vector<double> xs(n_samples);
  for (double& x : xs) x = unit_double(rng);
  const bool exact = inner.exact_capable();
  std::vector<char> hit(n_samples, 0);
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const Scalar x = Scalar::exact_from_double(xs[i]);
    const ScalarMatrix in(1, 1, exact ? x : x.to_mode(Mode::Float));
    const Scalar y = inner.eval(in, exact ? Mode::Exact : Mode::Float)(0, 0);
    hit[i] = deviation(y, phi_K_reference(x, K, dn)) > 1e-12;
  });
  FlawEstimate est;
  est.samples = n_samples;
  for (char h : hit) est.hits += h ? 1 : 0;
  est.fraction = n_samples ? static_cast<double>(est.hits) / static_cast<double>(n_samples) : 0.0;
  return est;
}

EqualityReport verify_inner_equality(std::size_t K, std::size_t d, std::size_t n, InnerVariant variant,
                                     std::size_t n_random, std::uint64_t seed, double p, double beta) {
  const FfnBlock sr = synth_sr_block(K, d, n, variant, p, beta);
  const AttentionLayer attn = make_column_sum_attention(d, n);
  const FfnBlock scale = make_scaling_segmentation(K, d, n);
  std::optional<FlawReport> flaws;
  if (variant == InnerVariant::ReLU) flaws = synth_inner_relu(K, d, n, p, beta).flaws;
  auto z_of = [&](const ScalarMatrix& x) {
    return scale.eval(eval_attention(attn, sr.eval(x, Mode::Exact), Mode::Exact), Mode::Exact);
  };
  return compare_inner(z_of, K, d, n, n_random, seed, flaws ? &*flaws : nullptr);
}

EqualityReport verify_pipeline_inner(const TransformerPipeline& t, std::size_t n_random, std::uint64_t seed) {
  const ConstructionParams& P = t.params;
  std::optional<FlawReport> flaws;
  if (t.inner == InnerVariant::ReLU) {
    flaws = synth_inner_relu(P.K, P.d, P.n, P.is_linf() ? 1.0 : P.p, P.beta).flaws;
  }
  const Mode mode = t.sr_block.exact_capable() && t.scale_seg.exact_capable() ? Mode::Exact : Mode::Float;
  auto z_of = [&](const ScalarMatrix& x) { return to_mode(eval_inner_matrix(t, to_mode(x, mode), mode), Mode::Exact); };
  return compare_inner(z_of, P.K, P.d, P.n, n_random, seed, flaws ? &*flaws : nullptr);
}

EqualityReport verify_inner_net(const VectorNet& net, std::size_t K, std::size_t dn, std::size_t n_random,
                                std::uint64_t seed, const FlawReport* flaws) {
  std::vector<Scalar> xs;
  for (std::size_t k = 0; k < (std::size_t{1} << K) && K <= 20; ++k) {
    xs.push_back(Scalar::exact(static_cast<long>(k)) * Scalar::pow2(-static_cast<long>(K)));
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_random; ++i) xs.push_back(Scalar::exact_from_double(unit_double(rng)));
  EqualityReport rep;
  for (const Scalar& x : xs) {
    const Scalar y = net.eval(ScalarMatrix(1, 1, x), Mode::Exact)(0, 0);
    const Scalar ref = phi_K_reference(x, K, dn);
    const bool same = y == ref;
    if (flaws && flaws->contains(x.rational())) {
      ++rep.flaw_skipped;
      if (!same) ++rep.flaw_mismatched;
      continue;
    }
    ++rep.checked;
    if (!same && rep.failed++ == 0) rep.first_failure = "x = " + x.to_string() + ": got " + y.to_string() + ", expected " + ref.to_string();
  }
  return rep;
}

MemoReport verify_outer_block(const TransformerPipeline& t, const LabelTable& labels, double winding_delta) {
  const std::size_t d = t.params.d, n = t.params.n;
  const std::size_t per = labels.points.size() / n;
  const bool bitpack = t.backend == MemoBackend::Bitpack;
  const Mode mode = t.outer_block.exact_capable() ? Mode::Exact : Mode::Float;
  const Scalar bound = bitpack ? (t.g_max - t.g_min) * Scalar::pow2(-static_cast<long>(t.params.H))
                               : Scalar::real(winding_delta);
  MemoReport rep;
  rep.bound = bound.to_double();
  for (std::size_t a = 0; a < per; ++a) {
    ScalarMatrix z(d, n);
    for (std::size_t s = 0; s < n; ++s) {
      const MemoPoint& pt = labels.points[s * per + a];
      if (pt.s != s + 1) throw Error(ErrorKind::ShapeMismatch, "label table is not ordered column-major");
      for (std::size_t r = 0; r < d; ++r) z(r, s) = Scalar::exact(pt.m);
    }
    const ScalarMatrix out = mode == Mode::Exact ? t.outer_block.eval(z, Mode::Exact)
                                                 : from_real(t.outer_block.eval_real(to_real(z)), Mode::Float);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t i = s * per + a;
      for (std::size_t r = 0; r < d; ++r) {
        const Scalar& want = labels.labels[r][i];
        const double err = deviation(out(r, s), want);
        rep.max_error = std::max(rep.max_error, err);
        ++rep.checked;
        if (!within(out(r, s), want, bound, 1e-9)) {
          if (rep.failed++ == 0) {
            rep.first_failure = "m = " + labels.points[i].m.get_str() + ", row " + std::to_string(r + 1) + ": got " +
                                out(r, s).to_string() + ", label " + want.to_string();
          }
        }
      }
    }
  }
  return rep;
}

MemoReport verify_lambda_points(const TransformerPipeline& t, const TargetOracle& f, std::size_t max_points) {
  const std::size_t K = t.params.K, d = t.params.d, n = t.params.n;
  const std::vector<MemoPoint> pts = enumerate_lambda(K, d, n);
  const std::size_t per = pts.size() / n;
  const std::size_t patterns = std::min(per, std::max<std::size_t>(1, max_points / n));
  const Mode mode = pipeline_mode(t);
  const Scalar bound = (t.g_max - t.g_min) * Scalar::pow2(-static_cast<long>(t.params.H));
  std::optional<FlawReport> flaws;
  if (t.inner == InnerVariant::ReLU) flaws = synth_inner_relu(K, d, n, t.params.is_linf() ? 1.0 : t.params.p, t.params.beta).flaws;

  MemoReport rep;
  rep.bound = bound.to_double();
  for (std::size_t a = 0; a < patterns; ++a) {
    const ScalarMatrix& x = pts[a].x_trunc;
    if (flaws) {
      bool flagged = false;
      for (const Scalar& v : x.data()) flagged = flagged || flaws->contains(v.rational());
      if (flagged) continue;
    }
    const ScalarMatrix g = eval_transformer(t, to_mode(x, mode), mode);
    const ScalarMatrix y = oracle_eval(f, x);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t s = 0; s < n; ++s) {
        rep.max_error = std::max(rep.max_error, deviation(g(r, s), y(r, s)));
        ++rep.checked;
        if (!within(g(r, s), y(r, s), bound, 1e-9) && rep.failed++ == 0) {
          rep.first_failure = "X_trunc = " + matrix_string(x) + ", entry (" + std::to_string(r + 1) + "," +
                              std::to_string(s + 1) + "): got " + g(r, s).to_string() + ", f = " + y(r, s).to_string();
        }
      }
    }
  }
  return rep;
}

bool Report::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

Json Report::to_json() const {
  Json list = Json::array();
  for (const CheckResult& c : checks) {
    list.push_back(Json{{"suite", c.suite}, {"name", c.name}, {"pass", c.pass}, {"summary", c.summary}, {"detail", c.detail}});
  }
  return Json{{"pass", pass()}, {"checks", std::move(list)}};
}

std::string Report::to_text() const {
  std::size_t ws = 5, wn = 5;
  for (const CheckResult& c : checks) {
    ws = std::max(ws, c.suite.size());
    wn = std::max(wn, c.name.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(ws)) << "suite" << "  " << std::setw(static_cast<int>(wn)) << "check"
     << "  status  summary\n";
  for (const CheckResult& c : checks) {
    os << std::setw(static_cast<int>(ws)) << c.suite << "  " << std::setw(static_cast<int>(wn)) << c.name << "  "
       << std::setw(6) << (c.pass ? "PASS" : "FAIL") << "  " << c.summary << "\n";
  }
  os << (pass() ? "all checks passed" : "some checks FAILED") << "\n";
  return os.str();
}

namespace {

CheckResult equality_check(const std::string& suite, const std::string& name, const EqualityReport& r) {
  CheckResult c{suite, name, r.pass(), {}, {}};
  c.summary = std::to_string(r.checked) + " inputs, " + std::to_string(r.failed) + " mismatches";
  if (r.flaw_skipped) c.summary += ", " + std::to_string(r.flaw_skipped) + " on flagged intervals skipped";
  if (!r.pass()) c.summary += "; first: " + r.first_failure;
  c.detail = Json{{"checked", r.checked}, {"failed", r.failed}, {"flaw_skipped", r.flaw_skipped},
                  {"flaw_mismatched", r.flaw_mismatched}, {"first_failure", r.first_failure}};
  return c;
}

CheckResult memo_check(const std::string& name, const MemoReport& r) {
  CheckResult c{"memo", name, r.pass(), {}, {}};
  c.summary = std::to_string(r.checked) + " entries, max error " + fixed(r.max_error) + " <= " + fixed(r.bound);
  if (!r.pass()) c.summary = std::to_string(r.failed) + " of " + std::to_string(r.checked) + " entries exceed " + fixed(r.bound) + "; first: " + r.first_failure;
  c.detail = Json{{"checked", r.checked}, {"failed", r.failed}, {"max_error", r.max_error}, {"bound", r.bound},
                  {"first_failure", r.first_failure}};
  return c;
}

void run_inner(Report& rep, const TransformerPipeline& t, const SuiteOptions& opt) {
  rep.checks.push_back(equality_check("inner", "inner_matrix", verify_pipeline_inner(t, opt.inner_random, opt.seed)));
  if (t.inner != InnerVariant::ReLU) return;
  const ConstructionParams& P = t.params;
  const ReluInner ri = synth_inner_relu(P.K, P.d, P.n, P.is_linf() ? 1.0 : P.p, P.beta);
  const FlawEstimate est = estimate_flaw_measure(ri.net, P.K, P.d * P.n, opt.flaw_samples, opt.seed, opt.threads);
  const double limit = 1.5 * ri.flaws.target_bound;
  CheckResult c{"inner", "flaw_measure", est.fraction <= limit, {}, {}};
  c.summary = "fraction " + fixed(est.fraction) + " <= 1.5 * " + fixed(ri.flaws.target_bound) + " over " + std::to_string(est.samples) + " samples";
  c.detail = Json{{"samples", est.samples}, {"hits", est.hits}, {"fraction", est.fraction},
                  {"target_bound", ri.flaws.target_bound}, {"ramp_bound", ri.flaws.total_measure_bound.get_d()}};
  rep.checks.push_back(std::move(c));
}

void run_memo(Report& rep, const TransformerPipeline& t, const TargetOracle& f, const SuiteOptions& opt) {
  const LabelTable labels = build_label_table(f, t.params.K);
  CheckResult range{"memo", "label_range", labels.g_min == t.g_min && labels.g_max == t.g_max && labels.points.size() == t.lambda_size, {}, {}};
  range.summary = "labels span [" + labels.g_min.to_string() + ", " + labels.g_max.to_string() + "], pipeline [" +
                  t.g_min.to_string() + ", " + t.g_max.to_string() + "], |Lambda| = " + std::to_string(labels.points.size());
  range.detail = Json{{"g_min", labels.g_min.to_string()}, {"g_max", labels.g_max.to_string()}, {"lambda_size", labels.points.size()}};
  rep.checks.push_back(std::move(range));
  const double delta = opt.winding_delta > 0 ? opt.winding_delta : t.params.epsilon / 2;
  rep.checks.push_back(memo_check("outer_block", verify_outer_block(t, labels, delta)));
  if (t.backend == MemoBackend::Bitpack) rep.checks.push_back(memo_check("lambda_points", verify_lambda_points(t, f, opt.lambda_points)));
}

void run_e2e(Report& rep, const TransformerPipeline& t, const TargetOracle& f, const SuiteOptions& opt) {
  const double eps = t.params.epsilon;
  if (t.metric == Metric::Linf) {
    const DinfReport r = measure_dinf(t, f, opt.dinf_grid, opt.dinf_random, opt.seed, opt.threads);
    CheckResult c{"e2e", "dinf", r.sup <= eps, {}, {}};
    c.summary = "sup " + fixed(r.sup) + " <= " + fixed(eps) + " over " + std::to_string(r.points) + " inputs" +
                (r.certified ? "" : " (sampled, not certified)");
    if (!c.pass) c.summary += "; worst at X = " + matrix_string(r.argmax);
    c.detail = Json{{"sup", r.sup}, {"epsilon", eps}, {"points", r.points}, {"exact", r.exact}, {"certified", r.certified},
                    {"argmax", matrix_json(r.argmax)}, {"entry", {r.r + 1, r.s + 1}}};
    rep.checks.push_back(std::move(c));
    if (t.backend == MemoBackend::Bitpack) {
      const bool in = !(r.out_min < t.g_min) && !(t.g_max < r.out_max);
      CheckResult o{"e2e", "output_range", in, {}, {}};
      o.summary = "outputs in [" + r.out_min.to_string() + ", " + r.out_max.to_string() + "] within [" +
                  t.g_min.to_string() + ", " + t.g_max.to_string() + "]";
      o.detail = Json{{"out_min", r.out_min.to_string()}, {"out_max", r.out_max.to_string()}};
      rep.checks.push_back(std::move(o));
    }
    return;
  }
  const double p = t.params.p;
  const DpReport r = measure_dp(t, f, p, opt.dp_samples, opt.seed, opt.threads);
  CheckResult c{"e2e", "dp", r.estimate <= eps + 3 * r.std_error, {}, {}};
  c.summary = "estimate " + fixed(r.estimate) + " +- " + fixed(r.std_error) + " <= " + fixed(eps) + " + 3 se";
  c.detail = Json{{"estimate", r.estimate}, {"std_error", r.std_error}, {"samples", r.samples}, {"epsilon", eps}, {"p", p}};
  rep.checks.push_back(std::move(c));
  const double rhs = lp_decomposition_bound(t, p);
  CheckResult dc{"e2e", "lp_decomposition", r.mean_pp <= rhs + 3 * r.se_pp, {}, {}};
  dc.summary = "integral " + fixed(r.mean_pp) + " <= bound " + fixed(rhs) + " + 3 se";
  dc.detail = Json{{"mean_pp", r.mean_pp}, {"se_pp", r.se_pp}, {"bound", rhs}};
  rep.checks.push_back(std::move(dc));
}

}  // namespace

Report run_suite(const std::string& suite, const TransformerPipeline& t, const TargetOracle& f, const SuiteOptions& opt) {
  if (suite != "inner" && suite != "memo" && suite != "e2e" && suite != "all") {
    throw Error(ErrorKind::ParseError, "unknown suite '" + suite + "' (inner, memo, e2e, all)");
  }
  if (f.d != t.params.d || f.n != t.params.n) throw Error(ErrorKind::ShapeMismatch, "target and pipeline shapes differ");
  Report rep;
  if (suite == "inner" || suite == "all") run_inner(rep, t, opt);
  if (suite == "memo" || suite == "all") run_memo(rep, t, f, opt);
  if (suite == "e2e" || suite == "all") run_e2e(rep, t, f, opt);
  return rep;
}

}  // namespace kst
