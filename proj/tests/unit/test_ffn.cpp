#include <doctest.h>

#include <random>

#include "kst/ffn.hpp"

using namespace kst;

namespace {

Scalar q(long a, long b = 1) { return Scalar::exact(a, b); }

ScalarMatrix col(std::initializer_list<Scalar> v) {
  ScalarMatrix m(1, v.size());
  std::size_t i = 0;
  for (const Scalar& s : v) m(0, i++) = s;
  return m;
}

Layer scalar_layer(Scalar w, Scalar b, Activation a) {
  ScalarMatrix wm(1, 1, w), bm(1, 1, b);
  return Layer{wm, bm, {a}};
}

// The clamp -R(-R(x)+1)+1 written layer by layer.
FfnBlock filter_block(std::size_t n) {
  VectorNet v({scalar_layer(q(1), q(0), Activation::relu()), scalar_layer(q(-1), q(1), Activation::relu()),
               scalar_layer(q(-1), q(1), Activation::identity())},
              1);
  return broadcast_to_block(v, n);
}

FfnBlock random_block(std::mt19937_64& rng, std::size_t in, std::size_t out, std::size_t n) {
  std::uniform_int_distribution<int> depth_d(1, 3), width_d(1, 4), num(-6, 6), act(0, 2);
  const int depth = depth_d(rng);
  std::vector<Layer> layers;
  std::size_t prev = in;
  for (int l = 0; l < depth; ++l) {
    const std::size_t rows = l + 1 == depth ? out : static_cast<std::size_t>(width_d(rng));
    Layer layer{ScalarMatrix(rows, prev), ScalarMatrix(rows, n), {}};
    for (auto& w : layer.weight.data()) w = q(num(rng), 3);
    for (auto& b : layer.bias.data()) b = q(num(rng), 4);
    for (std::size_t r = 0; r < rows; ++r) {
      const int a = act(rng);
      layer.activations.push_back(a == 0 ? Activation::relu() : a == 1 ? Activation::floor() : Activation::identity());
    }
    layers.push_back(std::move(layer));
    prev = rows;
  }
  return FfnBlock(std::move(layers), n);
}

bool same(const ScalarMatrix& a, const ScalarMatrix& b) { return identical(a, b); }

}  // namespace

TEST_CASE("identity block") {
  const FfnBlock id = affine_block(identity_matrix(2), zeros(2, 3));
  ScalarMatrix x(2, 3);
  for (std::size_t i = 0; i < 6; ++i) x.data()[i] = q(static_cast<long>(i) - 2, 3);
  CHECK(same(id.eval(x, Mode::Exact), x));
  CHECK(id.depth() == 1);
  CHECK(id.width() == 2);
}

TEST_CASE("single relu layer then linear output") {
  const FfnBlock b({scalar_layer(q(1), q(-1, 2), Activation::relu()), scalar_layer(q(1), q(0), Activation::identity())},
                   1);
  CHECK(b.eval(col({q(3, 10)}), Mode::Exact)(0, 0) == q(0));
  CHECK(b.eval(col({q(9, 10)}), Mode::Exact)(0, 0) == q(2, 5));
}

TEST_CASE("final layer is forced linear") {
  const FfnBlock b({scalar_layer(q(1), q(0), Activation::relu())}, 1);
  CHECK(b.eval(col({q(-2)}), Mode::Exact)(0, 0) == q(-2));
}

TEST_CASE("filter block values") {
  const FfnBlock f = filter_block(3);
  const ScalarMatrix out = f.eval(col({q(-1), q(3, 10), q(2)}), Mode::Exact);
  CHECK(out(0, 0) == q(0));
  CHECK(out(0, 1) == q(3, 10));
  CHECK(out(0, 2) == q(1));
  const FfnBlock ff[] = {filter_block(1), filter_block(1)};
  CHECK(stack(ff).eval(col({q(2)}), Mode::Exact)(0, 0) == q(1));
}

TEST_CASE("stack and concat of identities") {
  const FfnBlock id = affine_block(identity_matrix(1), zeros(1, 1));
  const FfnBlock ids[] = {id, id};
  CHECK(stack(ids).eval(col({q(5)}), Mode::Exact)(0, 0) == q(5));
  const ScalarMatrix both = concat_parallel(ids).eval(col({q(5)}), Mode::Exact);
  CHECK(both.rows() == 2);
  CHECK(both(0, 0) == q(5));
  CHECK(both(1, 0) == q(5));
}

TEST_CASE("shape errors") {
  const FfnBlock id = affine_block(identity_matrix(2), zeros(2, 1));
  CHECK_THROWS_AS(id.eval(zeros(3, 1), Mode::Exact), Error);
  const FfnBlock other = affine_block(identity_matrix(3), zeros(3, 1));
  CHECK_THROWS_AS(stack(id, other), Error);
  CHECK_THROWS_AS(FfnBlock({Layer{identity_matrix(2), zeros(2, 2), {Activation::relu()}}}, 2), Error);
}

TEST_CASE("stack equals composition on random blocks") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> num(-20, 20);
  for (int t = 0; t < 100; ++t) {
    const FfnBlock a = random_block(rng, 2, 3, 2);
    const FfnBlock b = random_block(rng, 3, 2, 2);
    ScalarMatrix x(2, 2);
    for (auto& v : x.data()) v = q(num(rng), 7);
    CHECK(same(stack(a, b).eval(x, Mode::Exact), b.eval(a.eval(x, Mode::Exact), Mode::Exact)));
    CHECK(stack(a, b).depth() == a.depth() + b.depth() - 1);
  }
}

TEST_CASE("concat and block diagonal match member evaluation") {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> num(-20, 20);
  for (int t = 0; t < 50; ++t) {
    const FfnBlock a = random_block(rng, 2, 1, 1);
    const FfnBlock b = random_block(rng, 2, 2, 1);
    ScalarMatrix x(2, 1);
    for (auto& v : x.data()) v = q(num(rng), 5);
    const FfnBlock ab[] = {a, b};
    const ScalarMatrix out = concat_parallel(ab).eval(x, Mode::Exact);
    const ScalarMatrix ya = a.eval(x, Mode::Exact), yb = b.eval(x, Mode::Exact);
    CHECK(out(0, 0) == ya(0, 0));
    CHECK(out(1, 0) == yb(0, 0));
    CHECK(out(2, 0) == yb(1, 0));

    ScalarMatrix x2(4, 1);
    for (auto& v : x2.data()) v = q(num(rng), 5);
    const ScalarMatrix out2 = block_diagonal(ab).eval(x2, Mode::Exact);
    ScalarMatrix xa(2, 1), xb(2, 1);
    xa(0, 0) = x2(0, 0);
    xa(1, 0) = x2(1, 0);
    xb(0, 0) = x2(2, 0);
    xb(1, 0) = x2(3, 0);
    CHECK(out2(0, 0) == a.eval(xa, Mode::Exact)(0, 0));
    CHECK(out2(1, 0) == b.eval(xb, Mode::Exact)(0, 0));
    CHECK(out2(2, 0) == b.eval(xb, Mode::Exact)(1, 0));
  }
}

TEST_CASE("float evaluation agrees on small blocks") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> num(-20, 20);
  for (int t = 0; t < 50; ++t) {
    const FfnBlock a = random_block(rng, 2, 2, 3);
    ScalarMatrix x(2, 3);
    for (auto& v : x.data()) v = q(num(rng), 8);
    const ScalarMatrix e = a.eval(x, Mode::Exact);
    const ScalarMatrix f = a.eval(x, Mode::Float);
    for (std::size_t i = 0; i < e.data().size(); ++i) {
      CHECK(f.data()[i].to_double() == doctest::Approx(e.data()[i].to_double()).epsilon(1e-12));
    }
  }
}

TEST_CASE("float refused past 2^53") {
  const FfnBlock big = affine_block(ScalarMatrix(1, 1, Scalar::pow2(60)), zeros(1, 1));
  CHECK_FALSE(big.float_safe());
  CHECK_THROWS_AS(big.eval(col({q(1)}), Mode::Float), Error);
  CHECK(big.eval(col({q(1)}), Mode::Exact)(0, 0) == Scalar::pow2(60));
}

TEST_CASE("json round trip is lossless") {
  std::mt19937_64 rng(24);
  for (int t = 0; t < 20; ++t) {
    const FfnBlock a = random_block(rng, 3, 2, 2);
    const std::string text = to_json(a).dump();
    const FfnBlock b = ffn_from_json(Json::parse(text));
    CHECK(a == b);
    CHECK(to_json(b).dump() == text);
  }
  const FfnBlock mixed({Layer{ScalarMatrix(1, 1, Scalar::real(0.1)), zeros(1, 1), {Activation::reciprocal()}},
                        Layer{ScalarMatrix(1, 1, q(1, 3)), zeros(1, 1), {Activation::identity()}}},
                       1);
  CHECK(ffn_from_json(to_json(mixed)) == mixed);
  CHECK_FALSE(mixed.exact_capable());
}
