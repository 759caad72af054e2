#include "kst/memo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace kst {

namespace {

Integer pow3i(std::size_t k) { return Scalar::pow3(k).rational().get_num(); }

Rational exact_of(const Scalar& s) { return s.is_exact() ? s.rational() : Scalar::exact_from_double(s.to_double()).rational(); }

ScalarMatrix truncated_matrix(const std::vector<int>& bits, std::size_t K, std::size_t d, std::size_t n) {
  ScalarMatrix x = zeros(d, n);
  for (std::size_t j = 0; j < K; ++j) {
    const Scalar w = Scalar::pow2(-static_cast<long>(j) - 1);
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = 0; q < n; ++q) {
        if (bits[(j * d + p) * n + q]) x(p, q) += w;
      }
    }
  }
  return x;
}

std::size_t check_lambda_size(std::size_t K, std::size_t d, std::size_t n, std::size_t cap) {
  const std::size_t kdn = K * d * n;
  if (kdn >= 62 || (n << kdn) > cap || (n << kdn) >> kdn != n) {
    throw Error(ErrorKind::CapExceeded, "|Lambda| = " + std::to_string(n) + " * 2^" + std::to_string(kdn) +
                                            " exceeds the enumeration cap of " + std::to_string(cap));
  }
  return n << kdn;
}

// Chebyshev fit xi ~ u y + v; returns (u, v, max error).
std::tuple<double, double, double> minimax_line(const std::vector<double>& y, const std::vector<double>& xi) {
  auto spread = [&](double u) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = xi[i] - u * y[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    return std::make_pair(lo, hi);
  };
  double best_u = 0.0;
  auto [lo0, hi0] = spread(0.0);
  double best = (hi0 - lo0) / 2;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = i + 1; j < y.size(); ++j) {
      if (y[i] == y[j]) continue;
      const double u = (xi[i] - xi[j]) / (y[i] - y[j]);
      auto [lo, hi] = spread(u);
      if ((hi - lo) / 2 < best) {
        best = (hi - lo) / 2;
        best_u = u;
      }
    }
  }
  auto [lo, hi] = spread(best_u);
  return {best_u, (lo + hi) / 2, best};
}

}  // namespace

Integer lambda_span(std::size_t K, std::size_t d, std::size_t n) {
  return pow3i(K * d * n) * static_cast<unsigned long>(n);
}

Integer encode_point(const std::vector<int>& bits, std::size_t s, std::size_t K, std::size_t d, std::size_t n) {
  const std::size_t kdn = K * d * n;
  if (bits.size() != kdn) throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(kdn) + " bits");
  if (s < 1 || s > n) throw Error(ErrorKind::OutOfRange, "column index outside [1, n]");
  Integer m = 1 + Integer(static_cast<unsigned long>(s - 1)) * pow3i(kdn);
  Integer p3 = 1;
  for (std::size_t t = kdn; t-- > 0;) {
    if (bits[t]) m += 2 * p3;
    p3 *= 3;
  }
  return m;
}

MemoPoint decode_index(const Integer& m, std::size_t K, std::size_t d, std::size_t n) {
  const std::size_t kdn = K * d * n;
  const Integer big = pow3i(kdn);
  if (m < 1 || m > big * static_cast<unsigned long>(n)) {
    throw Error(ErrorKind::NotInLambda, m.get_str() + " outside [1, n 3^{Kdn}]");
  }
  MemoPoint pt;
  pt.m = m;
  Integer s, rest;
  const Integer m1 = m - 1;
  mpz_fdiv_qr(s.get_mpz_t(), rest.get_mpz_t(), m1.get_mpz_t(), big.get_mpz_t());
  pt.s = s.get_ui() + 1;
  pt.bits.assign(kdn, 0);
  for (std::size_t t = kdn; t-- > 0;) {
    const unsigned long digit = mpz_fdiv_q_ui(rest.get_mpz_t(), rest.get_mpz_t(), 3);
    if (digit == 1) throw Error(ErrorKind::NotInLambda, m.get_str() + " has a base-3 digit 1");
    pt.bits[t] = digit == 2 ? 1 : 0;
  }
  pt.x_trunc = truncated_matrix(pt.bits, K, d, n);
  return pt;
}

std::vector<MemoPoint> enumerate_lambda(std::size_t K, std::size_t d, std::size_t n, std::size_t cap) {
  check_lambda_size(K, d, n, cap);
  const std::size_t kdn = K * d * n;
  std::vector<Integer> p3(kdn);
  for (std::size_t t = 0; t < kdn; ++t) p3[t] = 2 * pow3i(kdn - 1 - t);
  const Integer big = pow3i(kdn);
  std::vector<MemoPoint> out;
  out.reserve(n << kdn);
  for (std::size_t s = 1; s <= n; ++s) {
    const Integer base = 1 + Integer(static_cast<unsigned long>(s - 1)) * big;
    for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << kdn); ++pattern) {
      MemoPoint pt;
      pt.s = s;
      pt.bits.resize(kdn);
      pt.m = base;
      for (std::size_t t = 0; t < kdn; ++t) {
        pt.bits[t] = static_cast<int>((pattern >> (kdn - 1 - t)) & 1);
        if (pt.bits[t]) pt.m += p3[t];
      }
      pt.x_trunc = truncated_matrix(pt.bits, K, d, n);
      out.push_back(std::move(pt));
    }
  }
  return out;
}

long LabelTable::find(const Integer& m) const {
  auto it = std::lower_bound(points.begin(), points.end(), m,
                             [](const MemoPoint& p, const Integer& v) { return p.m < v; });
  if (it == points.end() || it->m != m) return -1;
  return static_cast<long>(it - points.begin());
}

const Scalar& LabelTable::label(std::size_t r, const Integer& m) const {
  const long i = find(m);
  if (i < 0) throw Error(ErrorKind::NotInLambda, m.get_str() + " is not a memory index");
  return labels.at(r)[static_cast<std::size_t>(i)];
}

LabelTable build_label_table(const TargetOracle& f, std::size_t K, std::size_t lambda_cap) {
  LabelTable t;
  t.K = K;
  t.d = f.d;
  t.n = f.n;
  t.points = enumerate_lambda(K, f.d, f.n, lambda_cap);
  const std::size_t per_column = t.points.size() / f.n;

  Mode mode = Mode::Exact;
  try {
    f.evaluate(t.points.front().x_trunc);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ModeUnsupported) throw;
    mode = Mode::Float;
  }
  t.labels.assign(f.d, std::vector<Scalar>(t.points.size()));
  for (std::size_t i = 0; i < per_column; ++i) {
    const ScalarMatrix x = to_mode(t.points[i].x_trunc, mode);
    const ScalarMatrix y = f.evaluate(x);
    for (std::size_t s = 0; s < f.n; ++s) {
      for (std::size_t r = 0; r < f.d; ++r) t.labels[r][s * per_column + i] = y(r, s);
    }
  }

  Scalar lo = t.labels[0][0], hi = lo, amax = lo.abs();
  for (const auto& row : t.labels) {
    for (const Scalar& v : row) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
      if (v.abs() > amax) amax = v.abs();
    }
  }
  if (f.range) {
    const Scalar rlo = f.range->first.to_mode(mode), rhi = f.range->second.to_mode(mode);
    if (rlo < lo) lo = rlo;
    if (rhi > hi) hi = rhi;
    amax = rlo.abs() > rhi.abs() ? rlo.abs() : rhi.abs();
  }
  t.g_min = lo;
  t.g_max = hi;
  t.f_max = amax;
  return t;
}

void write_labels_csv(const LabelTable& t, std::ostream& out) {
  out << "m,s,r,label\n";
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    for (std::size_t r = 0; r < t.d; ++r) {
      out << t.points[i].m.get_str() << ',' << t.points[i].s << ',' << r + 1 << ',' << t.labels[r][i].to_string()
          << '\n';
    }
  }
}

std::vector<int> binary_expand_label(const Scalar& v, const Scalar& g_min, const Scalar& g_max, std::size_t H) {
  const Rational x = exact_of(v), lo = exact_of(g_min), hi = exact_of(g_max);
  if (x < lo || x > hi) {
    throw Error(ErrorKind::OutOfRange, "label " + v.to_string() + " outside [" + g_min.to_string() + ", " +
                                           g_max.to_string() + "]");
  }
  std::vector<int> bits(H, 0);
  if (hi == lo) return bits;
  Rational t = (x - lo) / (hi - lo);
  if (t == 1) return std::vector<int>(H, 1);
  for (std::size_t i = 0; i < H; ++i) {
    t *= 2;
    if (t >= 1) {
      bits[i] = 1;
      t -= 1;
    }
  }
  return bits;
}

VectorNet synth_memo_bitpack(const std::vector<int>& theta, std::size_t cap) {
  const std::size_t M = theta.size();
  if (M == 0) throw Error(ErrorKind::OutOfRange, "empty label vector");
  if (M > cap) throw Error(ErrorKind::CapExceeded, "bitpack length " + std::to_string(M) + " exceeds " + std::to_string(cap));
  Integer packed = 0;
  for (std::size_t k = 1; k <= M; ++k) {
    if (theta[k - 1]) mpz_setbit(packed.get_mpz_t(), M - k);
  }
  const Scalar pk = Scalar::exact(packed);
  ScalarMatrix w1(1, 1, Scalar::exact(1)), b1(1, 1, Scalar::exact(-static_cast<long>(M)));
  ScalarMatrix w2(2, 1);
  w2(0, 0) = pk;
  w2(1, 0) = pk / Scalar::exact(2);
  ScalarMatrix w3(1, 2);
  w3(0, 0) = Scalar::exact(1);
  w3(0, 1) = Scalar::exact(-2);
  return VectorNet({Layer{w1, b1, {Activation::exp2()}},
                    Layer{w2, zeros(2, 1), {Activation::floor(), Activation::floor()}},
                    Layer{w3, zeros(1, 1), {Activation::identity()}}},
                   1);
}

std::string to_string(MemoBackend b) {
  switch (b) {
    case MemoBackend::Bitpack: return "bitpack";
    case MemoBackend::WindingNP: return "winding_np";
    case MemoBackend::WindingRC: return "winding_rc";
  }
  return "bitpack";
}

MemoBackend memo_backend_from_string(const std::string& s) {
  if (s == "bitpack") return MemoBackend::Bitpack;
  if (s == "winding_np") return MemoBackend::WindingNP;
  if (s == "winding_rc") return MemoBackend::WindingRC;
  throw Error(ErrorKind::ParseError, "memo backend must be bitpack, winding_np or winding_rc, got '" + s + "'");
}

double winding_eval(const WindingParams& wp, double m) {
  if (wp.backend == WindingBackend::NP) {
    const double t = wp.w[2] * std::exp(wp.w[0] + wp.w[1] * m);
    return wp.w[4] + wp.w[3] * (t - std::floor(t));
  }
  const double t = wp.w[0] * (1.0 / (std::numbers::pi + m));
  return wp.w[2] + wp.w[1] * (t - std::floor(t));
}

WindingParams synth_memo_winding(const std::vector<WindingPoint>& points, double delta, WindingBackend backend,
                                 std::size_t budget, std::uint64_t seed, std::size_t max_points) {
  if (points.empty()) throw Error(ErrorKind::OutOfRange, "no points to memorize");
  if (points.size() > max_points) {
    throw Error(ErrorKind::CapExceeded, "winding search over " + std::to_string(points.size()) +
                                            " points exceeds the cap of " + std::to_string(max_points));
  }
  if (!(delta > 0)) throw Error(ErrorKind::OutOfRange, "delta must be positive");

  WindingParams wp;
  wp.backend = backend;
  double m_lo = points[0].m, m_hi = points[0].m;
  for (const auto& p : points) {
    m_lo = std::min(m_lo, p.m);
    m_hi = std::max(m_hi, p.m);
  }
  double w0 = 0.0, w1 = 0.0;
  if (backend == WindingBackend::NP) {
    w1 = 1.0 / std::max(1.0, m_hi - m_lo);
    w0 = -w1 * m_hi;
  }
  std::vector<double> xi;
  for (const auto& p : points) {
    wp.generators.push_back(backend == WindingBackend::NP ? std::exp(w0 + w1 * p.m) : 1.0 / (std::numbers::pi + p.m));
    xi.push_back(p.xi);
  }
  const double gmax = *std::max_element(wp.generators.begin(), wp.generators.end());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> y(points.size());
  double best_err = INFINITY;
  for (std::size_t t = 0; t < budget; ++t) {
    // The sampling range doubles every 2048 draws, up to 2^40 / max generator.
    const double range = std::ldexp(1.0 / gmax, static_cast<int>(std::min<std::size_t>(40, t / 2048)) + 1);
    const double w = range * unit(rng);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double v = w * wp.generators[i];
      y[i] = v - std::floor(v);
    }
    const auto [u, v, err] = minimax_line(y, xi);
    best_err = std::min(best_err, err);
    if (err > delta) continue;
    wp.w = backend == WindingBackend::NP ? std::vector<double>{w0, w1, w, u, v} : std::vector<double>{w, u, v};
    double achieved = 0.0;
    for (const auto& p : points) achieved = std::max(achieved, std::abs(winding_eval(wp, p.m) - p.xi));
    if (achieved > delta) continue;
    wp.achieved_delta = achieved;
    wp.samples_used = t + 1;
    return wp;
  }
  std::ostringstream msg;
  msg << "no winding parameters within delta = " << delta << " after " << budget << " samples (best " << best_err
      << ")";
  throw Error(ErrorKind::SearchExhausted, msg.str());
}

OuterBlock assemble_outer_block(const LabelTable& labels, std::size_t H, const OuterOptions& opt) {
  const std::size_t d = labels.d, n = labels.n;
  if (labels.labels.size() != d || labels.points.empty()) throw Error(ErrorKind::ShapeMismatch, "incomplete label table");
  OuterBlock out;
  const Scalar lo = Scalar(exact_of(labels.g_min));
  const Scalar hi = Scalar(exact_of(labels.g_max));

  // Z is integral; rounding keeps float inputs on the memory grid.
  Layer round{identity_matrix(d), ScalarMatrix(d, n, Scalar::exact(1, 2)),
              std::vector<Activation>(d, Activation::floor())};

  if (opt.backend == MemoBackend::Bitpack) {
    if (lo == hi) {
      out.block = FfnBlock({Layer{zeros(d, d), ScalarMatrix(d, n, lo), std::vector<Activation>(d)}}, n);
      return out;
    }
    const Integer span = lambda_span(labels.K, d, n);
    if (span > static_cast<unsigned long>(opt.bitpack_cap)) {
      throw Error(ErrorKind::CapExceeded, "bitpack length n 3^{Kdn} = " + span.get_str() + " exceeds " +
                                              std::to_string(opt.bitpack_cap));
    }
    const std::size_t M = span.get_ui();
    std::vector<std::vector<Integer>> packed(d, std::vector<Integer>(H, 0));
    for (std::size_t i = 0; i < labels.points.size(); ++i) {
      const std::size_t m = labels.points[i].m.get_ui();
      for (std::size_t r = 0; r < d; ++r) {
        const std::vector<int> bits = binary_expand_label(labels.labels[r][i], lo, hi, H);
        for (std::size_t h = 0; h < H; ++h) {
          if (bits[h]) mpz_setbit(packed[r][h].get_mpz_t(), M - m);
        }
      }
    }
    Layer shift{identity_matrix(d), ScalarMatrix(d, n, Scalar::exact(-static_cast<long>(M))),
                std::vector<Activation>(d, Activation::exp2())};
    Layer bits{zeros(2 * d * H, d), zeros(2 * d * H, n), std::vector<Activation>(2 * d * H, Activation::floor())};
    Layer combine{zeros(d, 2 * d * H), ScalarMatrix(d, n, lo), std::vector<Activation>(d)};
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t u = 2 * (r * H + h);
        const Scalar pk = Scalar::exact(packed[r][h]);
        bits.weight(u, r) = pk;
        bits.weight(u + 1, r) = pk / Scalar::exact(2);
        const Scalar coef = (hi - lo) * Scalar::pow2(-static_cast<long>(h) - 1);
        combine.weight(r, u) = coef;
        combine.weight(r, u + 1) = coef * Scalar::exact(-2);
      }
    }
    out.block = FfnBlock({std::move(round), std::move(shift), std::move(bits), std::move(combine)}, n);
    return out;
  }

  const WindingBackend wb = opt.backend == MemoBackend::WindingNP ? WindingBackend::NP : WindingBackend::RC;
  for (std::size_t r = 0; r < d; ++r) {
    std::vector<WindingPoint> pts;
    for (std::size_t i = 0; i < labels.points.size(); ++i) {
      pts.push_back({labels.points[i].m.get_d(), labels.labels[r][i].to_double()});
    }
    out.winding.push_back(synth_memo_winding(pts, opt.winding_delta, wb, opt.winding_budget, opt.seed + r, opt.winding_cap));
  }
  auto real = [](double v) { return Scalar::real(v); };
  const std::size_t saw_units = opt.saw_gadget ? 3 : 1;
  Layer gen{zeros(d, d), zeros(d, n), {}};
  Layer saw{zeros(saw_units * d, d), zeros(saw_units * d, n), {}};
  Layer affine{zeros(d, saw_units * d), zeros(d, n), std::vector<Activation>(d)};
  for (std::size_t r = 0; r < d; ++r) {
    const WindingParams& wp = out.winding[r];
    const bool np = wb == WindingBackend::NP;
    gen.weight(r, r) = np ? real(wp.w[1]) : Scalar::exact(1);
    for (std::size_t s = 0; s < n; ++s) gen.bias(r, s) = np ? real(wp.w[0]) : Scalar::exact(0);
    gen.activations.push_back(np ? Activation::analytic_np() : Activation::reciprocal());
    const double w = np ? wp.w[2] : wp.w[0];
    const double u = np ? wp.w[3] : wp.w[1];
    const double v = np ? wp.w[4] : wp.w[2];
    if (opt.saw_gadget) {
      saw.weight(3 * r, r) = real(w);
      saw.weight(3 * r + 1, r) = real(-w);
      saw.weight(3 * r + 2, r) = real(w);
      saw.activations.insert(saw.activations.end(), {Activation::relu(), Activation::relu(), Activation::floor()});
      affine.weight(r, 3 * r) = real(u);
      affine.weight(r, 3 * r + 1) = real(-u);
      affine.weight(r, 3 * r + 2) = real(-u);
    } else {
      saw.weight(r, r) = real(w);
      saw.activations.push_back(Activation::saw());
      affine.weight(r, r) = real(u);
    }
    for (std::size_t s = 0; s < n; ++s) affine.bias(r, s) = real(v);
  }
  out.block = FfnBlock({std::move(round), std::move(gen), std::move(saw), std::move(affine)}, n);
  return out;
}

}  // namespace kst
