#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "kst/inner.hpp"
#include "kst/memo.hpp"

using namespace kst;

namespace {

Scalar q(long a, long b = 1) { return Scalar::exact(a, b); }

// m from a base-3 digit string: column offset digit(s) then digits 2*bit.
Integer m_oracle(const std::vector<int>& bits, std::size_t s, std::size_t kdn) {
  std::string digits;
  for (int b : bits) digits += b ? '2' : '0';
  Integer rest(digits.empty() ? "0" : digits, 3);
  Integer big = 1;
  for (std::size_t i = 0; i < kdn; ++i) big *= 3;
  return rest + 1 + Integer(static_cast<unsigned long>(s - 1)) * big;
}

std::vector<Integer> ms(const std::vector<MemoPoint>& pts) {
  std::vector<Integer> out;
  for (const auto& p : pts) out.push_back(p.m);
  return out;
}

}  // namespace

TEST_CASE("lambda examples") {
  CHECK(ms(enumerate_lambda(1, 1, 1)) == std::vector<Integer>{1, 3});
  CHECK(ms(enumerate_lambda(1, 1, 2)) == std::vector<Integer>{1, 3, 7, 9, 10, 12, 16, 18});
  CHECK(enumerate_lambda(1, 2, 2).size() == 32);
  CHECK_THROWS_AS(enumerate_lambda(10, 1, 2, 1000), Error);
}

TEST_CASE("decode examples") {
  const MemoPoint a = decode_index(3, 1, 1, 1);
  CHECK(a.s == 1);
  CHECK(a.bits == std::vector<int>{1});
  CHECK(a.x_trunc(0, 0) == q(1, 2));
  const MemoPoint b = decode_index(16, 1, 1, 2);
  CHECK(b.s == 2);
  CHECK(b.bits == std::vector<int>{1, 0});
  CHECK(b.x_trunc(0, 0) == q(1, 2));
  CHECK(b.x_trunc(0, 1) == q(0));
  CHECK_THROWS_AS(decode_index(2, 1, 1, 1), Error);
  CHECK_THROWS_AS(decode_index(0, 1, 1, 1), Error);
  CHECK_THROWS_AS(decode_index(4, 1, 1, 1), Error);
}

TEST_CASE("encode/decode round trip over lambda") {
  for (auto [K, d, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {2, 1, 2}, {1, 2, 2}, {3, 2, 2},
                         {4, 1, 3}}) {
    const std::size_t kdn = K * d * n;
    const auto pts = enumerate_lambda(K, d, n);
    CHECK(pts.size() == (n << kdn));
    const Integer top = lambda_span(K, d, n);
    Integer prev = 0;
    for (const MemoPoint& p : pts) {
      CHECK(p.m > prev);
      prev = p.m;
      CHECK(p.m >= 1);
      CHECK(p.m <= top);
      CHECK(p.m == m_oracle(p.bits, p.s, kdn));
      CHECK(encode_point(p.bits, p.s, K, d, n) == p.m);
      const MemoPoint back = decode_index(p.m, K, d, n);
      CHECK(back.s == p.s);
      CHECK(back.bits == p.bits);
      CHECK(identical(back.x_trunc, p.x_trunc));
    }
  }
}

TEST_CASE("lambda points are the inner matrix values") {
  // Z at the truncated matrix equals m for the point's column.
  for (const MemoPoint& p : enumerate_lambda(2, 1, 2)) {
    const ScalarMatrix z = inner_matrix_reference(p.x_trunc, 2, 1, 2);
    CHECK(z(0, p.s - 1).rational() == Rational(p.m));
  }
}

TEST_CASE("label table examples") {
  const LabelTable c = build_label_table(constant_target(1, 2, q(7, 10)), 2);
  for (const auto& v : c.labels[0]) CHECK(v == q(7, 10));
  CHECK(c.g_max - c.g_min == q(0));

  const LabelTable x = build_label_table(make_target("x11", 1, 1, 1, 1), 1);
  CHECK(x.label(0, 3) == q(1, 2));
  CHECK(x.label(0, 1) == q(0));

  const LabelTable m = build_label_table(mean_target(1, 2), 1);
  CHECK(m.label(0, 16) == q(1, 4));
  CHECK(m.g_min == q(0));
  CHECK(m.g_max == q(1));

  std::ostringstream csv;
  write_labels_csv(x, csv);
  CHECK(csv.str() == "m,s,r,label\n1,1,1,0\n3,1,1,1/2\n");
}

TEST_CASE("label table without a declared range uses the table") {
  const LabelTable t = build_label_table(expression_target(1, 2, "x11 * x12 + 1/8"), 2);
  CHECK(t.g_min == q(1, 8));
  CHECK(t.g_max == q(9, 16) + q(1, 8));
  const LabelTable f = build_label_table(expression_target(1, 1, "sin(x11)"), 2);
  CHECK_FALSE(f.g_max.is_exact());
  CHECK(f.g_max.to_double() == doctest::Approx(std::sin(0.75)));
}

TEST_CASE("binary expansion") {
  CHECK(binary_expand_label(q(5, 8), q(0), q(1), 3) == std::vector<int>{1, 0, 1});
  CHECK(binary_expand_label(q(0), q(0), q(1), 4) == std::vector<int>{0, 0, 0, 0});
  CHECK(binary_expand_label(q(1), q(0), q(1), 3) == std::vector<int>{1, 1, 1});
  CHECK(binary_expand_label(q(3), q(3), q(3), 2) == std::vector<int>{0, 0});
  // (v - g_min)/(g_max - g_min) = (1/2 + 3/8 - 1/2)/... with a shifted range.
  CHECK(binary_expand_label(q(11, 4), q(2), q(3), 2) == std::vector<int>{1, 1});
  CHECK_THROWS_AS(binary_expand_label(q(2), q(0), q(1), 3), Error);
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<long> num(0, 1000000);
  for (int t = 0; t < 500; ++t) {
    const Rational v(num(rng), 1000000);
    const std::size_t H = 1 + t % 12;
    const auto bits = binary_expand_label(Scalar(v), q(0), q(1), H);
    Rational sum = 0;
    for (std::size_t i = 0; i < H; ++i) sum += Rational(bits[i]) / Scalar::pow2(static_cast<long>(i) + 1).rational();
    CHECK(v - sum >= 0);
    if (v < 1) CHECK(v - sum < Scalar::pow2(-static_cast<long>(H)).rational());
  }
}

TEST_CASE("bitpack examples") {
  const VectorNet b = synth_memo_bitpack({1, 0, 1});
  CHECK(b.depth() == 3);
  CHECK(b.width() == 2);
  CHECK(b.eval(ScalarMatrix(1, 1, q(1)), Mode::Exact)(0, 0) == q(1));
  CHECK(b.eval(ScalarMatrix(1, 1, q(2)), Mode::Exact)(0, 0) == q(0));
  CHECK(b.eval(ScalarMatrix(1, 1, q(3)), Mode::Exact)(0, 0) == q(1));
  const VectorNet z = synth_memo_bitpack(std::vector<int>(8, 0));
  const VectorNet o = synth_memo_bitpack(std::vector<int>(8, 1));
  for (long m = 1; m <= 8; ++m) {
    CHECK(z.eval(ScalarMatrix(1, 1, q(m)), Mode::Exact)(0, 0) == q(0));
    CHECK(o.eval(ScalarMatrix(1, 1, q(m)), Mode::Exact)(0, 0) == q(1));
  }
  CHECK_THROWS_AS(synth_memo_bitpack(std::vector<int>(20, 1), 10), Error);
}

TEST_CASE("bitpack exhaustive on random vectors") {
  std::mt19937_64 rng(52);
  for (std::size_t M : {1, 2, 17, 52, 300, 2000}) {
    std::vector<int> theta(M);
    for (int& t : theta) t = static_cast<int>(rng() & 1);
    const VectorNet b = synth_memo_bitpack(theta);
    for (std::size_t m = 1; m <= M; ++m) {
      CHECK(b.eval(ScalarMatrix(1, 1, q(static_cast<long>(m))), Mode::Exact)(0, 0) == q(theta[m - 1]));
    }
    if (M <= 52) {
      for (std::size_t m = 1; m <= M; ++m) {
        CHECK(b.eval(ScalarMatrix(1, 1, Scalar::real(static_cast<double>(m))), Mode::Float)(0, 0).to_double() ==
              theta[m - 1]);
      }
    } else {
      CHECK_FALSE(b.float_safe());
    }
  }
}

TEST_CASE("winding search") {
  const WindingParams one = synth_memo_winding({{5, 0.37}}, 1e-12, WindingBackend::RC, 10, 1);
  CHECK(one.w[1] == 0.0);
  CHECK(std::abs(winding_eval(one, 5) - 0.37) < 1e-12);

  for (WindingBackend b : {WindingBackend::RC, WindingBackend::NP}) {
    const std::vector<WindingPoint> pts = {{1, 0.2}, {3, 0.8}};
    const WindingParams wp = synth_memo_winding(pts, 0.05, b, 1000000, 7);
    CHECK(wp.achieved_delta <= 0.05);
    // Independent re-evaluation of the formula.
    for (const auto& p : pts) {
      double v;
      if (b == WindingBackend::RC) {
        const double t = wp.w[0] / (std::numbers::pi + p.m);
        v = wp.w[2] + wp.w[1] * (t - std::floor(t));
      } else {
        const double t = wp.w[2] * std::exp(wp.w[0] + wp.w[1] * p.m);
        v = wp.w[4] + wp.w[3] * (t - std::floor(t));
      }
      CHECK(std::abs(v - p.xi) <= 0.05);
    }
  }

  std::vector<WindingPoint> six;
  for (int i = 0; i < 6; ++i) six.push_back({static_cast<double>(2 * i + 1), 0.1 * i * i - 0.3 * i});
  CHECK_THROWS_AS(synth_memo_winding(six, 1e-6, WindingBackend::RC, 1000, 3), Error);
  try {
    synth_memo_winding(six, 1e-6, WindingBackend::RC, 1000, 3);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SearchExhausted);
  }
  CHECK_THROWS_AS(synth_memo_winding(std::vector<WindingPoint>(9, {1, 0}), 0.1, WindingBackend::RC, 10, 1), Error);
}

TEST_CASE("winding search is deterministic") {
  const std::vector<WindingPoint> pts = {{1, 0.1}, {3, 0.9}, {7, 0.4}};
  const WindingParams a = synth_memo_winding(pts, 0.05, WindingBackend::NP, 1000000, 99);
  const WindingParams b = synth_memo_winding(pts, 0.05, WindingBackend::NP, 1000000, 99);
  CHECK(a.w == b.w);
  CHECK(a.samples_used == b.samples_used);
}

TEST_CASE("outer block, bitpack") {
  const LabelTable c = build_label_table(constant_target(1, 2, q(7, 10)), 2);
  const OuterBlock cb = assemble_outer_block(c, 3, OuterOptions{});
  CHECK(cb.block.depth() == 1);
  for (const MemoPoint& p : c.points) {
    ScalarMatrix z(1, 2, Scalar::exact(p.m));
    CHECK(cb.block.eval(z, Mode::Exact)(0, p.s - 1) == q(7, 10));
  }

  const LabelTable x = build_label_table(make_target("x11", 1, 1, 1, 1), 1);
  const OuterBlock xb = assemble_outer_block(x, 8, OuterOptions{});
  const Scalar out = xb.block.eval(ScalarMatrix(1, 1, q(3)), Mode::Exact)(0, 0);
  CHECK((out - q(1, 2)).abs() <= (x.g_max - x.g_min) * Scalar::pow2(-8));

  // Every memory point of a two-row, two-column table.
  const LabelTable t = build_label_table(expression_target(2, 2, "x11*r + x22*s/4"), 1);
  const std::size_t H = 5;
  const OuterBlock tb = assemble_outer_block(t, H, OuterOptions{});
  CHECK(tb.block.width() == 2 * 2 * H);
  const Scalar bound = (t.g_max - t.g_min) * Scalar::pow2(-static_cast<long>(H));
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    const MemoPoint& p = t.points[i];
    ScalarMatrix z(2, 2, Scalar::exact(p.m));
    const ScalarMatrix o = tb.block.eval(z, Mode::Exact);
    for (std::size_t r = 0; r < 2; ++r) {
      const Scalar err = t.labels[r][i] - o(r, p.s - 1);
      CHECK(err >= q(0));
      CHECK(err <= bound);
    }
  }
}

TEST_CASE("outer block, winding") {
  const LabelTable x = build_label_table(make_target("x11", 1, 1, 1, 1), 1);
  for (MemoBackend b : {MemoBackend::WindingRC, MemoBackend::WindingNP}) {
    for (bool gadget : {false, true}) {
      OuterOptions opt;
      opt.backend = b;
      opt.saw_gadget = gadget;
      opt.seed = 5;
      const OuterBlock ob = assemble_outer_block(x, 1, opt);
      CHECK_FALSE(ob.block.exact_capable());
      for (const MemoPoint& p : x.points) {
        const double got =
            ob.block.eval(ScalarMatrix(1, 1, Scalar::real(p.m.get_d())), Mode::Float)(0, 0).to_double();
        CHECK(std::abs(got - x.label(0, p.m).to_double()) <= 0.05 + 1e-12);
      }
    }
  }
}

TEST_CASE("phi truncation gap") {
  // phi - phi_K is a tail of 2 a_j 3^{-1-dn(j-1)}, bounded by 2 3^{dn-1} 3^{-dnK} / (3^{dn} - 1).
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<long> num(0, 1L << 50);
  for (std::size_t dn : {1, 2, 4}) {
    for (std::size_t K : {1, 2, 3}) {
      const double correct = 2.0 * std::pow(3.0, dn - 1.0) / (std::pow(3.0, dn) - 1) * std::pow(3.0, -double(dn * K));
      for (int t = 0; t < 1000; ++t) {
        const Scalar x = Scalar(Rational(num(rng), 1L << 50));
        const double gap = (phi_K_reference(x, K + 40, dn) - phi_K_reference(x, K, dn)).to_double();
        CHECK(gap >= 0);
        CHECK(gap <= correct);
      }
    }
  }
}

TEST_CASE("stated truncation constant is too small") {
  // With all digits past K equal to one the gap is close to the tail bound,
  // a factor 3^{2dn} above 2/(3^{2dn+1} - 3^{dn+1}) 3^{-dnK}.
  const std::size_t K = 2, dn = 2;
  const Scalar x = q(1, 4) * (q(1) - Scalar::pow2(-40)) + q(0);  // digits 0,0,1,1,...
  const double gap = (phi_K_reference(x, K + 38, dn) - phi_K_reference(x, K, dn)).to_double();
  const double stated = 2.0 / (std::pow(3.0, 2 * dn + 1) - std::pow(3.0, dn + 1)) * std::pow(3.0, -double(dn * K));
  CHECK(gap > stated);
  CHECK(gap > 0.9 * stated * std::pow(3.0, 2 * dn));
}
