#include "kst/inner.hpp"

#include <cmath>

namespace kst {

namespace {

Scalar Q(long num, long den = 1) { return Scalar::exact(num, den); }

Rational to_exact(const Scalar& x) { return x.is_exact() ? x.rational() : Scalar::exact_from_double(x.to_double()).rational(); }

void check_unit(const Rational& x, const char* what) {
  if (x < 0 || x > 1) throw Error(ErrorKind::OutOfDomain, std::string(what) + " outside [0,1]");
}

std::vector<Activation> acts(std::size_t n, Activation a) { return std::vector<Activation>(n, a); }

Layer vec_layer(ScalarMatrix w, ScalarMatrix b, Activation a) {
  const std::size_t rows = w.rows();
  return Layer{std::move(w), std::move(b), acts(rows, a)};
}

ScalarMatrix column(std::initializer_list<Scalar> v) {
  ScalarMatrix m(v.size(), 1);
  std::size_t i = 0;
  for (const Scalar& s : v) m(i++, 0) = s;
  return m;
}

ScalarMatrix rows_of(std::initializer_list<std::initializer_list<Scalar>> v) {
  const std::size_t r = v.size();
  const std::size_t c = v.begin()->size();
  ScalarMatrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : v) {
    std::size_t j = 0;
    for (const Scalar& s : row) m(i, j++) = s;
    ++i;
  }
  return m;
}

long ceil_tol(double v) { return static_cast<long>(std::ceil(v - 1e-9)); }

// Shift the scalar input: x -> x - shift, folded into the first bias.
VectorNet shift_input(const VectorNet& net, const Scalar& shift) {
  std::vector<Layer> layers = net.layers();
  Layer& first = layers.front();
  for (std::size_t r = 0; r < first.weight.rows(); ++r) first.bias(r, 0) -= first.weight(r, 0) * shift;
  return VectorNet(std::move(layers), 1);
}

// Weighted sum of n parallel outputs, coefficient 3^{1-q}.
FfnBlock segment_sum(std::size_t n) {
  ScalarMatrix w(1, n);
  for (std::size_t q = 0; q < n; ++q) w(0, q) = Scalar::exact(3) / Scalar::pow3(q);
  return affine_block(w, zeros(1, 1));
}

}  // namespace

std::string to_string(InnerVariant v) { return v == InnerVariant::Floor ? "floor" : "relu"; }

InnerVariant inner_variant_from_string(const std::string& s) {
  if (s == "floor") return InnerVariant::Floor;
  if (s == "relu") return InnerVariant::ReLU;
  throw Error(ErrorKind::ParseError, "inner variant must be floor or relu, got '" + s + "'");
}

void check_kdn(std::size_t K, std::size_t d, std::size_t n, std::size_t cap) {
  if (K == 0 || d == 0 || n == 0) throw Error(ErrorKind::OutOfRange, "K, d, n must be at least 1");
  if (K * d * n > cap) {
    throw Error(ErrorKind::CapExceeded,
                "Kdn = " + std::to_string(K * d * n) + " exceeds the cap of " + std::to_string(cap));
  }
}

void ConstructionParams::validate() const {
  if (d < 1 || n < 1 || K < 1 || H < 1 || L < 1) throw Error(ErrorKind::OutOfRange, "d, n, K, H, L must be >= 1");
  if (!(beta > 0 && beta <= 1)) throw Error(ErrorKind::OutOfRange, "beta must lie in (0,1]");
  if (!(epsilon > 0)) throw Error(ErrorKind::OutOfRange, "epsilon must be positive");
  if (!(Q > 0)) throw Error(ErrorKind::OutOfRange, "Q must be positive");
  if (!(p >= 1)) throw Error(ErrorKind::OutOfRange, "p must be >= 1");
}

Json to_json(const ConstructionParams& p) {
  Json j{{"d", p.d}, {"n", p.n}, {"K", p.K}, {"beta", p.beta}, {"Q", p.Q}};
  if (p.is_linf()) {
    j["p"] = "inf";
  } else {
    j["p"] = p.p;
  }
  j["epsilon"] = p.epsilon;
  j["H"] = p.H;
  j["L"] = p.L;
  j["B_sigma"] = p.B_sigma;
  return j;
}

ConstructionParams params_from_json(const Json& j) {
  try {
    ConstructionParams p;
    p.d = j.at("d").get<std::size_t>();
    p.n = j.at("n").get<std::size_t>();
    p.K = j.at("K").get<std::size_t>();
    p.beta = j.at("beta").get<double>();
    p.Q = j.at("Q").get<double>();
    p.p = j.at("p").is_string() ? std::numeric_limits<double>::infinity() : j.at("p").get<double>();
    p.epsilon = j.at("epsilon").get<double>();
    p.H = j.at("H").get<std::size_t>();
    p.L = j.at("L").get<std::size_t>();
    p.B_sigma = j.at("B_sigma").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("params: ") + e.what());
  }
}

bool FlawReport::contains(const Rational& x) const {
  if (x < 0 || x >= 1) return false;
  const Rational half(1, 2);
  for (std::size_t j = 1; j <= K; ++j) {
    Rational y = x * Scalar::pow2(static_cast<long>(j) - 1).rational();
    Integer fl;
    mpz_fdiv_q(fl.get_mpz_t(), y.get_num_mpz_t(), y.get_den_mpz_t());
    Rational frac = y - fl;
    if (frac > half - ramp && frac < half) return true;
  }
  return false;
}

std::vector<int> binary_digits(const Scalar& xs, std::size_t K) {
  const Rational x = to_exact(xs);
  check_unit(x, "binary_digits input");
  std::vector<int> a(K, 1);
  if (x == 1) return a;
  Rational r = x;
  for (std::size_t j = 0; j < K; ++j) {
    r *= 2;
    a[j] = r >= 1 ? 1 : 0;
    if (a[j]) r -= 1;
  }
  return a;
}

Scalar phi_K_reference(const Scalar& x, std::size_t K, std::size_t dn) {
  const std::vector<int> a = binary_digits(x, K);
  Rational sum = 0;
  for (std::size_t j = 0; j < K; ++j) {
    if (a[j]) sum += Rational(2) / Scalar::pow3(1 + dn * j).rational();
  }
  return Scalar(sum);
}

VectorNet synth_inner_floor(std::size_t K, std::size_t d, std::size_t n, std::size_t kdn_cap) {
  check_kdn(K, d, n, kdn_cap);
  const std::size_t dn = d * n;
  const Scalar zero = Q(0), one = Q(1);
  std::vector<Layer> layers;
  // State after layer j: (floor(2^{K-j+1} T_{j-1}), floor(T_{j-1}), floor(S_{j-2})).
  // Layer 1's third slot holds floor(x), nonzero only at x = 1; the next map
  // subtracts it from the first two slots so x = 1 reads as 1 - 2^{-K}.
  layers.push_back(vec_layer(column({Scalar::pow2(static_cast<long>(K)), one, one}), zeros(3, 1), Activation::floor()));
  const ScalarMatrix fix = rows_of({{one, zero, Q(-1)}, {zero, one, Q(-1)}, {zero, zero, zero}});
  for (std::size_t j = 2; j <= K; ++j) {
    const long e = static_cast<long>(K - j + 1);
    ScalarMatrix a = rows_of({{one, -Scalar::pow2(e + 1), zero},
                              {Scalar::pow2(-e), Q(-2), zero},
                              {zero, Q(2) * Scalar::pow3(dn * (K - j + 2)), one}});
    if (j == 2) {
      a = matmul(a, fix);
      for (std::size_t c = 0; c < 3; ++c) a(2, c) = zero;
    }
    layers.push_back(vec_layer(std::move(a), zeros(3, 1), Activation::floor()));
  }
  // S_K = 2 * 3^{dn} a_{K-1} + S_{K-2} + 2 a_K with a_K = 2T_{K-1} - 2 a_{K-1}.
  const Scalar scale = one / Scalar::pow3(dn * (K - 1) + 1);
  ScalarMatrix out = rows_of({{Q(2) * scale, (Q(2) * Scalar::pow3(dn) - Q(4)) * scale, scale}});
  if (K == 1) out = matmul(out, fix);
  layers.push_back(vec_layer(std::move(out), zeros(1, 1), Activation::identity()));
  return VectorNet(std::move(layers), 1);
}

VectorNet synth_piecewise_inner_floor(std::size_t K, std::size_t d, std::size_t n, std::size_t kdn_cap) {
  check_kdn(K, d, n, kdn_cap);
  // Tent t_q(x) = R(R(x-2q) - 2R(x-2q-1)): identity on [2q, 2q+1], zero off (2q, 2q+2).
  ScalarMatrix w1 = zeros(2 * n, 1), b1 = zeros(2 * n, 1), w2 = zeros(n, 2 * n);
  for (std::size_t q = 0; q < n; ++q) {
    w1(2 * q, 0) = Q(1);
    w1(2 * q + 1, 0) = Q(1);
    b1(2 * q, 0) = Q(-2 * static_cast<long>(q));
    b1(2 * q + 1, 0) = Q(-2 * static_cast<long>(q) - 1);
    w2(q, 2 * q) = Q(1);
    w2(q, 2 * q + 1) = Q(-2);
  }
  const VectorNet tent({vec_layer(w1, b1, Activation::relu()), vec_layer(w2, zeros(n, 1), Activation::relu()),
                        vec_layer(identity_matrix(n), zeros(n, 1), Activation::identity())},
                       1);
  const std::vector<FfnBlock> copies(n, synth_inner_floor(K, d, n, kdn_cap));
  const FfnBlock parts[] = {tent, block_diagonal(copies), segment_sum(n)};
  return stack(parts);
}

namespace {

// Bit stages for the ReLU inner, input already shifted.
VectorNet relu_inner_net(std::size_t K, std::size_t dn, const Rational& rho) {
  const Scalar one = Q(1), zero = Q(0);
  const Scalar r = Scalar(rho);
  const Scalar inv = one / r;
  const Scalar half = Q(1, 2);
  const Scalar phi1 = phi_K_reference(one, K, dn);
  std::vector<Layer> layers;
  if (K == 1) {
    // Single hidden layer: bit ramp at 1/2 plus the end ramp past 1.
    layers.push_back(vec_layer(column({inv, inv, one, one}), column({(r - half) * inv, -half * inv, Q(-1), Q(-1) - r}),
                               Activation::relu()));
    layers.push_back(vec_layer(rows_of({{Q(2, 3), Q(-2, 3), (one - phi1) * inv, -(one - phi1) * inv}}), zeros(1, 1),
                               Activation::identity()));
    return VectorNet(std::move(layers), 1);
  }
  layers.push_back(vec_layer(column({one, one, one}), column({zero, Q(-1), Q(-1) - r}), Activation::relu()));
  // Linear forms of (r, S) over the previous layer's units.
  std::vector<Scalar> lr = {one, Q(-1), zero};
  std::vector<Scalar> ls = {zero, (one - phi1) * inv, -(one - phi1) * inv};
  for (std::size_t j = 1; j <= K; ++j) {
    const std::size_t prev = lr.size();
    ScalarMatrix w = zeros(4, prev);
    for (std::size_t c = 0; c < prev; ++c) {
      w(0, c) = lr[c] * inv;
      w(1, c) = lr[c] * inv;
      w(2, c) = lr[c];
      w(3, c) = ls[c];
    }
    layers.push_back(vec_layer(std::move(w), column({(r - half) * inv, -half * inv, zero, zero}), Activation::relu()));
    const Scalar cj = Q(2) / Scalar::pow3(1 + dn * (j - 1));
    lr = {Q(-1), one, Q(2), zero};
    ls = {cj, -cj, zero, one};
  }
  ScalarMatrix out(1, 4);
  for (std::size_t c = 0; c < 4; ++c) out(0, c) = ls[c];
  layers.push_back(vec_layer(std::move(out), zeros(1, 1), Activation::identity()));
  return VectorNet(std::move(layers), 1);
}

FlawReport relu_flaws(std::size_t K, double p, double beta) {
  if (!(p >= 1) || !std::isfinite(p)) throw Error(ErrorKind::OutOfRange, "ReLU inner needs finite p >= 1");
  if (!(beta > 0 && beta <= 1)) throw Error(ErrorKind::OutOfRange, "beta must lie in (0,1]");
  FlawReport f;
  f.K = K;
  const long e = ceil_tol(static_cast<double>(K) * beta * p);
  f.ramp = Scalar::pow2(-e).rational() / Rational(4 * static_cast<long>(K));
  f.total_measure_bound = f.ramp * static_cast<long>(K);
  f.target_bound = std::exp2(-static_cast<double>(K) * beta * p);
  if (K <= 16) {
    for (std::size_t j = 1; j <= K; ++j) {
      std::vector<Interval> level;
      const Rational step = Scalar::pow2(-(static_cast<long>(j) - 1)).rational();
      for (long k = 0; k < (1L << (j - 1)); ++k) {
        const Rational hi = (Rational(k) + Rational(1, 2)) * step;
        level.push_back(Interval{hi - f.ramp * step, hi});
      }
      f.levels.push_back(std::move(level));
    }
  }
  return f;
}

}  // namespace

ReluInner synth_inner_relu(std::size_t K, std::size_t d, std::size_t n, double p, double beta, std::size_t kdn_cap) {
  check_kdn(K, d, n, kdn_cap);
  FlawReport f = relu_flaws(K, p, beta);
  VectorNet net = relu_inner_net(K, d * n, f.ramp);
  return ReluInner{std::move(net), std::move(f)};
}

ReluInner synth_piecewise_inner_relu(std::size_t K, std::size_t d, std::size_t n, double p, double beta,
                                     std::size_t kdn_cap) {
  ReluInner base = synth_inner_relu(K, d, n, p, beta, kdn_cap);
  std::vector<FfnBlock> copies;
  for (std::size_t q = 0; q < n; ++q) copies.push_back(shift_input(base.net, Q(2 * static_cast<long>(q))));
  const FfnBlock parts[] = {concat_parallel(copies), segment_sum(n)};
  return ReluInner{stack(parts), std::move(base.flaws)};
}

FfnBlock synth_sr_block(std::size_t K, std::size_t d, std::size_t n, InnerVariant variant, double p, double beta,
                        std::size_t kdn_cap) {
  check_kdn(K, d, n, kdn_cap);
  const VectorNet piece = variant == InnerVariant::Floor ? synth_piecewise_inner_floor(K, d, n, kdn_cap)
                                                         : synth_piecewise_inner_relu(K, d, n, p, beta, kdn_cap).net;
  const std::vector<FfnBlock> rows(d, piece);
  const FfnBlock per_row = broadcast_to_block(block_diagonal(rows), n);

  // Column s reads x + 2(s-1), landing on segment s-1.
  std::vector<Layer> layers = per_row.layers();
  Layer& first = layers.front();
  for (std::size_t u = 0; u < first.weight.rows(); ++u) {
    Scalar wsum = Q(0);
    for (std::size_t c = 0; c < first.weight.cols(); ++c) wsum += first.weight(u, c);
    for (std::size_t s = 0; s < n; ++s) first.bias(u, s) += wsum * Q(2 * static_cast<long>(s));
  }
  const FfnBlock translated(std::move(layers), n);

  ScalarMatrix mix = zeros(2 * d, d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t pp = 0; pp < d; ++pp) mix(r, pp) = Q(1) / Scalar::pow3(pp * n + 1);
  }
  FfnBlock sr = stack(translated, affine_block(mix, zeros(2 * d, n)));

  // Cancel the constant each column picks up from the other segments.
  const ScalarMatrix probe = sr.eval(zeros(d, n), Mode::Exact);
  std::vector<Layer> fixed = sr.layers();
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t s = 0; s < n; ++s) fixed.back().bias(r, s) -= probe(r, s);
  }
  return FfnBlock(std::move(fixed), n);
}

FfnBlock make_scaling_segmentation(std::size_t K, std::size_t d, std::size_t n, std::size_t kdn_cap) {
  check_kdn(K, d, n, kdn_cap);
  const Scalar big = Scalar::pow3(K * d * n);
  ScalarMatrix w = zeros(d, 2 * d);
  ScalarMatrix b = zeros(d, n);
  for (std::size_t i = 0; i < d; ++i) {
    w(i, d + i) = big;
    for (std::size_t s = 0; s < n; ++s) b(i, s) = Q(1) + Q(static_cast<long>(s)) * big;
  }
  return affine_block(w, b);
}

ScalarMatrix inner_matrix_reference(const ScalarMatrix& x, std::size_t K, std::size_t d, std::size_t n) {
  if (x.rows() != d || x.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "expected " + shape_string(d, n) + " input, got " + shape_string(x.rows(), x.cols()));
  }
  const std::size_t kdn = K * d * n;
  Rational sum = 0;
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      const Rational xv = to_exact(x(p, q));
      check_unit(xv, "input entry");
      const Rational phi = phi_K_reference(Scalar(xv), K, d * n).rational();
      sum += phi * Scalar::pow3(kdn + 1).rational() / Scalar::pow3(p * n + q + 1).rational();
    }
  }
  ScalarMatrix z(d, n);
  const Rational big = Scalar::pow3(kdn).rational();
  for (std::size_t s = 0; s < n; ++s) {
    const Rational v = sum + 1 + Rational(static_cast<long>(s)) * big;
    for (std::size_t r = 0; r < d; ++r) z(r, s) = Scalar(v);
  }
  return z;
}

}  // namespace kst
