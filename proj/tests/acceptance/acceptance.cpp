// One PASS/FAIL line per acceptance criterion. Tolerances and limits are fixed here.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "kst/cli.hpp"

using namespace kst;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0 || secs < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.2fs", secs);
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << title << "  [" << o.detail << "; "
            << timing;
  if (limit_s > 0) std::cout << " < " << limit_s << "s" << (in_time ? "" : " EXCEEDED");
  std::cout << "]" << std::endl;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

const std::vector<std::pair<std::string, std::string>> kTargets = {
    {"const:0.7", "constant 0.7"}, {"x11", "x11"}, {"mean", "(x11+x12)/2"}};

TransformerPipeline linf_pipeline(const TargetOracle& f, double eps) {
  return build_transformer(f, eps, BuildOptions{});
}

TransformerPipeline lp_pipeline(const TargetOracle& f, double eps, InnerVariant inner) {
  BuildOptions opt;
  opt.metric = Metric::Lp;
  opt.p = 2;
  opt.inner = inner;
  return build_transformer(f, eps, opt);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  criterion(1, "phi_K exact on all K-bit dyadics and 1000 random points, dn in {1,2,4}, K = 1..5", 10, [] {
    std::size_t points = 0;
    for (auto [d, n] : {std::pair<std::size_t, std::size_t>{1, 1}, {1, 2}, {2, 2}}) {
      for (std::size_t K = 1; K <= 5; ++K) {
        const EqualityReport r = verify_inner_net(synth_inner_floor(K, d, n), K, d * n, 1000, 100 + K);
        points += r.checked;
        if (!r.pass()) return Outcome{false, "dn=" + std::to_string(d * n) + " K=" + std::to_string(K) + ": " + r.first_failure};
      }
    }
    return Outcome{true, std::to_string(points) + " points, zero error"};
  });

  criterion(2, "inner matrix identity, floor variant, exhaustive dyadic cells + 200 random", 60, [] {
    std::size_t points = 0;
    for (auto [d, n, K] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {1, 2, 1}, {1, 2, 2}, {2, 2, 1}, {2, 2, 2}}) {
      const EqualityReport r = verify_inner_equality(K, d, n, InnerVariant::Floor, 200, 7);
      points += r.checked;
      if (!r.pass() || r.flaw_skipped) return Outcome{false, r.first_failure};
    }
    return Outcome{true, std::to_string(points) + " inputs, exact"};
  });

  criterion(3, "ReLU flaw measure <= 1.5 * 2^{-K beta p} at 1e5 samples, exact off flagged intervals", 0, [] {
    std::string detail;
    bool ok = true;
    for (auto [p, beta] : {std::pair<double, double>{1, 1}, {2, 0.5}}) {
      const ReluInner ri = synth_inner_relu(3, 1, 2, p, beta);
      const FlawEstimate est = estimate_flaw_measure(ri.net, 3, 2, 100000, 31, 4);
      const double limit = 1.5 * std::pow(2.0, -3 * beta * p);
      const EqualityReport off = verify_inner_net(ri.net, 3, 2, 1000, 32, &ri.flaws);
      ok = ok && est.fraction <= limit && off.pass();
      detail += (detail.empty() ? "" : "; ") + std::string("p=") + fmt(p) + " beta=" + fmt(beta) + ": " + fmt(est.fraction) +
                " <= " + fmt(limit) + ", off-flaw mismatches " + std::to_string(off.failed);
    }
    return Outcome{ok, detail};
  });

  criterion(4, "bitpack memorizer exact for 50 random vectors, M in {8, 162, 512}, all m", 10, [] {
    std::mt19937_64 rng(404);
    std::size_t checks = 0;
    for (std::size_t M : {8, 162, 512}) {
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> theta(M);
        for (int& t : theta) t = static_cast<int>(rng() & 1);
        const VectorNet net = synth_memo_bitpack(theta);
        for (std::size_t m = 1; m <= M; ++m) {
          const Scalar y = net.eval(ScalarMatrix(1, 1, Scalar::exact(static_cast<long>(m))), Mode::Exact)(0, 0);
          ++checks;
          if (!(y == Scalar::exact(theta[m - 1]))) {
            return Outcome{false, "M=" + std::to_string(M) + " m=" + std::to_string(m) + " got " + y.to_string()};
          }
        }
      }
    }
    return Outcome{true, std::to_string(checks) + " lookups exact"};
  });

  criterion(5, "winding memorizers, 20 label sets per M in {2,3,4}, delta 0.05, budget 1e6, >= 90% success", 0, [] {
    std::string detail;
    bool ok = true;
    for (WindingBackend b : {WindingBackend::NP, WindingBackend::RC}) {
      std::size_t runs = 0, wins = 0, reverify_fail = 0;
      for (std::size_t M : {2, 3, 4}) {
        for (int set = 0; set < 20; ++set) {
          std::mt19937_64 rng(5000 + 100 * M + set);
          std::set<int> ms;
          while (ms.size() < M) ms.insert(1 + static_cast<int>(rng() % 64));
          std::vector<WindingPoint> pts;
          for (int m : ms) pts.push_back({static_cast<double>(m), static_cast<double>(rng() >> 11) * 0x1p-53});
          ++runs;
          WindingParams wp;
          try {
            wp = synth_memo_winding(pts, 0.05, b, 1000000, 77 + set);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::SearchExhausted) throw;
            continue;
          }
          ++wins;
          // Direct evaluation of the generator formula, independent of winding_eval.
          for (const WindingPoint& p : pts) {
            double v;
            if (b == WindingBackend::RC) {
              const double t = wp.w[0] / (std::numbers::pi + p.m);
              v = wp.w[2] + wp.w[1] * (t - std::floor(t));
            } else {
              const double t = wp.w[2] * std::exp(wp.w[0] + wp.w[1] * p.m);
              v = wp.w[4] + wp.w[3] * (t - std::floor(t));
            }
            if (!(std::abs(v - p.xi) <= 0.05)) ++reverify_fail;
          }
        }
      }
      const double rate = static_cast<double>(wins) / static_cast<double>(runs);
      ok = ok && rate >= 0.9 && reverify_fail == 0;
      detail += (detail.empty() ? "" : "; ") + std::string(b == WindingBackend::NP ? "NP " : "RC ") + std::to_string(wins) +
                "/" + std::to_string(runs) + " ok, " + std::to_string(reverify_fail) + " re-verification misses";
    }
    return Outcome{ok, detail};
  });

  criterion(6, "sup-norm pipeline, (d,n)=(1,2), eps in {0.5,0.25}: grid 2^{K+2}+1 per axis + 1000 random, d_inf <= eps", 120, [] {
    std::string detail;
    bool ok = true;
    for (const auto& [name, label] : kTargets) {
      const TargetOracle f = make_target(name, 1, 2, 1, 1);
      for (double eps : {0.5, 0.25}) {
        const TransformerPipeline t = linf_pipeline(f, eps);
        const DinfReport r = measure_dinf(t, f, 0, 1000, 61, 4);
        ok = ok && r.sup <= eps && r.exact;
        detail += (detail.empty() ? "" : ", ") + label + "@" + fmt(eps) + ": " + fmt(r.sup);
      }
    }
    return Outcome{ok, detail};
  });

  criterion(7, "L^p pipeline (ReLU inner), p=2, eps=0.5: d_p <= eps + 3 se at 1e4 samples, error split holds", 0, [] {
    std::string detail;
    bool ok = true;
    for (const auto& [name, label] : kTargets) {
      const TargetOracle f = make_target(name, 1, 2, 1, 1);
      const TransformerPipeline t = lp_pipeline(f, 0.5, InnerVariant::ReLU);
      const DpReport r = measure_dp(t, f, 2, 10000, 71, 4);
      const double rhs = lp_decomposition_bound(t, 2);
      const bool a = r.estimate <= 0.5 + 3 * r.std_error;
      const bool b = r.mean_pp <= rhs + 3 * r.se_pp;
      ok = ok && a && b;
      detail += (detail.empty() ? "" : ", ") + label + ": " + fmt(r.estimate) + " (se " + fmt(r.std_error) + "), split " +
                fmt(r.mean_pp) + " <= " + fmt(rhs);
    }
    return Outcome{ok, detail};
  });

  criterion(8, "every memory point: |T(X_trunc) - f(X_trunc)| <= (g_max-g_min) 2^{-H}, exact, binary backend", 0, [] {
    std::size_t entries = 0, pipelines = 0;
    for (const auto& [name, label] : kTargets) {
      const TargetOracle f = make_target(name, 1, 2, 1, 1);
      std::vector<TransformerPipeline> ts = {linf_pipeline(f, 0.5), linf_pipeline(f, 0.25),
                                             lp_pipeline(f, 0.5, InnerVariant::Floor)};
      for (const TransformerPipeline& t : ts) {
        if (t.lambda_size > 1000) continue;
        const MemoReport r = verify_lambda_points(t, f, 1000);
        ++pipelines;
        entries += r.checked;
        if (r.checked != t.lambda_size * t.params.d || !r.pass()) {
          return Outcome{false, label + ": " + std::to_string(r.failed) + " failures; " + r.first_failure};
        }
      }
    }
    return Outcome{true, std::to_string(pipelines) + " pipelines, " + std::to_string(entries) + " entries within bound"};
  });

  criterion(9, "synth + verify twice with one config and seed: byte-identical artifacts", 0, [] {
    const fs::path dir = fs::temp_directory_path() / ("kst_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << R"({"d": 1, "n": 2, "beta": 1, "Q": 1, "epsilon": 0.25, "metric": "linf",
 "inner_variant": "floor", "memo_backend": "bitpack", "target": "mean", "seed": 1234, "threads": 2})";
    std::ostringstream sink;
    bool ok = true;
    for (const char* tag : {"a", "b"}) {
      const std::string pipe = (dir / (std::string(tag) + ".pipeline.json")).string();
      const std::string rep = (dir / (std::string(tag) + ".report.json")).string();
      ok = ok && cmd_synth(cfg.string(), pipe, sink, sink) == 0;
      ok = ok && cmd_verify(cfg.string(), "all", pipe, rep, sink, sink) == 0;
    }
    const bool same = slurp(dir / "a.pipeline.json") == slurp(dir / "b.pipeline.json") &&
                      slurp(dir / "a.report.json") == slurp(dir / "b.report.json") &&
                      slurp(dir / "a.report.json.txt") == slurp(dir / "b.report.json.txt");
    const auto bytes = fs::file_size(dir / "a.pipeline.json");
    fs::remove_all(dir);
    return Outcome{ok && same, std::string(same ? "identical" : "DIFFERENT") + " pipeline (" + std::to_string(bytes) +
                                   " bytes), report JSON and text"};
  });

  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
