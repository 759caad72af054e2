#include <doctest.h>

#include <cmath>
#include <random>

#include "kst/assembly.hpp"
#include "kst/errors.hpp"

using namespace kst;

namespace {

ScalarMatrix row(std::initializer_list<Scalar> v) {
  ScalarMatrix m(1, v.size());
  std::size_t i = 0;
  for (const Scalar& s : v) m(0, i++) = s;
  return m;
}

// Smallest integer k with 2^{beta k} >= x, by search rather than by logs.
std::size_t smallest_k(double beta, double x) {
  std::size_t k = 0;
  while (std::pow(2.0, beta * static_cast<double>(k)) < x * (1 - 1e-12)) ++k;
  return std::max<std::size_t>(k, 1);
}

}  // namespace

TEST_CASE("linf parameter examples") {
  ParamChoice c = select_params_linfty(1, 1, 0.25, 1);
  CHECK(c.K == 2);
  CHECK(c.H == 3);
  CHECK_FALSE(c.clamped);

  c = select_params_linfty(1, 1, 1, 1);
  CHECK(c.K == 1);
  CHECK(c.clamped);

  CHECK(select_params_linfty(1, 1, 0.25, 0).H == 1);
  CHECK(select_params_linfty(1, 1, 0.25, 1, 2, 3).L == 6);
}

TEST_CASE("linf parameters against a search oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double beta = u(rng), Q = 4 * u(rng), eps = u(rng), g = 3 * u(rng);
    const ParamChoice c = select_params_linfty(beta, Q, eps, g);
    CHECK(c.K == smallest_k(beta, std::pow(2.0, 1 - beta) * Q / eps));
    CHECK(c.H == smallest_k(1.0, 2 * g / eps));
  }
}

TEST_CASE("halving epsilon moves K by at most ceil(1/beta) and H by at most 1") {
  for (double beta : {1.0, 0.5, 0.3}) {
    for (double eps = 0.9; eps > 1e-3; eps /= 2) {
      const ParamChoice a = select_params_linfty(beta, 1, eps, 1), b = select_params_linfty(beta, 1, eps / 2, 1);
      CHECK(b.K >= a.K);
      CHECK(b.K - a.K <= static_cast<std::size_t>(std::ceil(1 / beta)));
      CHECK(b.H - a.H <= 1);
    }
  }
}

TEST_CASE("lp parameter examples") {
  ParamChoice c = select_params_lp(1, 1, 0.5, 1, 1, 1, 1, 1, 1);
  CHECK(c.K == 3);
  CHECK(select_params_lp(1, 1, 0.5, 1, 1, 1, 1, 1, 0).H == 1);
  std::size_t prev = 1000;
  for (double p : {1.0, 2.0, 4.0, 16.0, 256.0}) {
    const std::size_t h = select_params_lp(1, 1, 0.01, p, 2, 2, 1, 1, 1).H;
    CHECK(h <= prev);
    prev = h;
  }
  CHECK(prev == select_params_linfty(1, 1, 0.01, 1).H);
  CHECK_THROWS_AS(select_params_lp(1, 1, 0.5, 0.5, 1, 1, 1, 1, 1), Error);
}

TEST_CASE("lp parameters against a search oracle") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double beta = u(rng), eps = u(rng), p = 1 + 3 * u(rng), bs = u(rng), fm = u(rng), g = u(rng);
    const std::size_t d = 1 + t % 2, n = 1 + t % 3;
    const double dn = static_cast<double>(d * n);
    const ParamChoice c = select_params_lp(beta, 1, eps, p, d, n, bs, fm, g);
    const std::size_t k1 = smallest_k(beta, std::pow(2.0, 1 / p) * std::pow(dn * dn, 1 / p) * (bs + fm) / eps);
    const std::size_t k2 = smallest_k(beta, std::pow(2.0, 1 - beta) * std::pow(2 * dn, 1 / p) / eps);
    CHECK(c.K == std::max(k1, k2));
    CHECK(c.H == smallest_k(1.0, 2 * std::pow(2 * dn, 1 / p) * g / eps));
  }
}

TEST_CASE("mean target pipeline manifest") {
  const TransformerPipeline t = build_transformer(mean_target(1, 2), 0.25, BuildOptions{});
  CHECK(t.params.K == 2);
  CHECK(t.params.H == 3);
  CHECK(t.params.L == 2);
  CHECK(t.lambda_size == 32);
  REQUIRE(t.manifest.size() == 4);
  CHECK(t.manifest[0].depth == t.params.K + 3);
  CHECK(t.manifest[0].width == 3 * 2);
  CHECK(t.manifest[2].depth == 1);
  CHECK(t.exact_capable());

  const ScalarMatrix y = eval_transformer(t, row({Scalar::exact(1, 2), Scalar::exact(0)}), Mode::Exact);
  for (const Scalar& v : y.data()) CHECK(std::abs(v.to_double() - 0.25) <= 0.25);
}

TEST_CASE("constant target pipeline is constant") {
  BuildOptions opt;
  const TransformerPipeline t = build_transformer(constant_target(1, 2, Scalar::exact(7, 10)), 0.25, opt);
  CHECK(t.outer_block.depth() == 1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 50; ++i) {
    const ScalarMatrix x = row({Scalar::exact_from_double(u(rng)), Scalar::exact_from_double(u(rng))});
    const ScalarMatrix ye = eval_transformer(t, x, Mode::Exact);
    for (const Scalar& v : ye.data()) CHECK(v == Scalar::exact(7, 10));
    const ScalarMatrix yf = eval_transformer(t, to_mode(x, Mode::Float), Mode::Float);
    for (const Scalar& v : yf.data()) CHECK(v.to_double() == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("large epsilon clamps and warns") {
  const TransformerPipeline t = build_transformer(mean_target(1, 2), 2.0, BuildOptions{});
  CHECK(t.params.K == 1);
  CHECK(t.params.H == 1);
  CHECK_FALSE(t.warnings.empty());
}

TEST_CASE("variant compatibility") {
  BuildOptions opt;
  opt.inner = InnerVariant::ReLU;
  try {
    build_transformer(mean_target(1, 2), 0.25, opt);
    FAIL("expected IncompatibleVariant");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IncompatibleVariant);
  }
  opt.metric = Metric::Lp;
  opt.p = 2;
  const TransformerPipeline relu = build_transformer(mean_target(1, 1), 0.5, opt);
  CHECK(relu.manifest[0].depth <= 2 * relu.params.K);
  CHECK(relu.manifest[0].width == 4);
  opt.inner = InnerVariant::Floor;
  CHECK_NOTHROW(build_transformer(mean_target(1, 1), 0.5, opt));
}

TEST_CASE("cap refusal names Kdn") {
  BuildOptions opt;
  opt.kdn_cap = 3;
  try {
    build_transformer(mean_target(1, 2), 0.25, opt);
    FAIL("expected CapExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CapExceeded);
    CHECK(std::string(e.what()).find("Kdn") != std::string::npos);
  }
}

TEST_CASE("pipeline errors") {
  const TransformerPipeline t = build_transformer(mean_target(1, 2), 0.5, BuildOptions{});
  CHECK_THROWS_AS(eval_transformer(t, row({Scalar::exact(1)}), Mode::Exact), Error);
  try {
    eval_transformer(t, row({Scalar::exact(3, 2), Scalar::exact(0)}), Mode::Exact);
    FAIL("expected OutOfDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfDomain);
  }
}

TEST_CASE("bitpack pipeline output stays in [g_min, g_max]") {
  const TargetOracle f = make_target("x11 - x12^2 + 0.5", 1, 2, 1, 3);
  const TransformerPipeline t = build_transformer(f, 0.5, BuildOptions{});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    const ScalarMatrix x = row({Scalar::exact_from_double(u(rng)), Scalar::exact_from_double(u(rng))});
    const ScalarMatrix y = eval_transformer(t, x, Mode::Exact);
    for (const Scalar& v : y.data()) {
      CHECK_FALSE(v < t.g_min);
      CHECK_FALSE(t.g_max < v);
    }
  }
}

TEST_CASE("serialization round trip and determinism") {
  const TargetOracle f = mean_target(1, 2);
  const TransformerPipeline a = build_transformer(f, 0.25, BuildOptions{});
  const TransformerPipeline b = build_transformer(f, 0.25, BuildOptions{});
  const std::string ja = to_json(a).dump(1), jb = to_json(b).dump(1);
  CHECK(ja == jb);
  const TransformerPipeline c = pipeline_from_json(Json::parse(ja));
  CHECK(to_json(c).dump(1) == ja);
  const ScalarMatrix x = row({Scalar::exact(3, 7), Scalar::exact(5, 9)});
  CHECK(identical(eval_transformer(a, x, Mode::Exact), eval_transformer(c, x, Mode::Exact)));

  BuildOptions w;
  w.backend = MemoBackend::WindingRC;
  w.seed = 11;
  const TargetOracle g = mean_target(1, 1);
  CHECK(to_json(build_transformer(g, 0.5, w)).dump() == to_json(build_transformer(g, 0.5, w)).dump());
}

TEST_CASE("winding pipeline evaluates in float only") {
  BuildOptions w;
  w.backend = MemoBackend::WindingNP;
  const TransformerPipeline t = build_transformer(mean_target(1, 1), 0.5, w);
  CHECK_FALSE(t.exact_capable());
  ScalarMatrix x(1, 1, Scalar::real(0.3));
  CHECK_THROWS_AS(eval_transformer(t, to_mode(x, Mode::Exact), Mode::Exact), Error);
  const double y = eval_transformer(t, x, Mode::Float)(0, 0).to_double();
  CHECK(std::abs(y - 0.3) <= 0.5);
}

TEST_CASE("float and exact inner stages agree for Kdn <= 12") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto [d, n, eps] : {std::tuple<std::size_t, std::size_t, double>{1, 2, 1.0 / 64}, {2, 2, 1.0 / 8}, {1, 3, 1.0 / 16}}) {
    BuildOptions opt;
    opt.bitpack_cap = 4000000;
    const TransformerPipeline t = build_transformer(mean_target(d, n), eps, opt);
    REQUIRE(t.params.K * d * n <= 12);
    CHECK_FALSE(t.outer_block.float_safe());
    for (int i = 0; i < 200; ++i) {
      ScalarMatrix x(d, n);
      for (Scalar& v : x.data()) v = Scalar::exact_from_double(u(rng));
      const ScalarMatrix ze = eval_inner_matrix(t, x, Mode::Exact);
      const ScalarMatrix zf = eval_inner_matrix(t, to_mode(x, Mode::Float), Mode::Float);
      for (std::size_t k = 0; k < ze.data().size(); ++k) {
        CHECK(std::abs(ze.data()[k].to_double() - zf.data()[k].to_double()) <= 1e-9);
      }
    }
  }
}
