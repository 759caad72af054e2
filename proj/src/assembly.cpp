#include "kst/assembly.hpp"

#include <algorithm>
#include <cmath>

namespace kst {

namespace {

long ceil_tol(double v) { return static_cast<long>(std::ceil(v - 1e-9)); }

std::size_t at_least_one(long v, bool& clamped) {
  if (v < 1) {
    clamped = true;
    return 1;
  }
  return static_cast<std::size_t>(v);
}

std::size_t h_from_range(double g_range, double scale, double epsilon, bool& clamped) {
  if (g_range <= 0) return 1;  // degenerate: constant block, H unused
  return at_least_one(ceil_tol(std::log2(scale * g_range / epsilon)), clamped);
}

void check_eps(double beta, double Q, double epsilon) {
  if (!(epsilon > 0)) throw Error(ErrorKind::OutOfRange, "epsilon must be positive");
  if (!(Q > 0)) throw Error(ErrorKind::OutOfRange, "Q must be positive");
  if (!(beta > 0 && beta <= 1)) throw Error(ErrorKind::OutOfRange, "beta must lie in (0,1]");
}

std::string sr_role(InnerVariant v) {
  return v == InnerVariant::Floor ? "column translation and piecewise inner map, floor units"
                                  : "column translation and piecewise inner map, ReLU units";
}

std::string outer_role(MemoBackend b) {
  switch (b) {
    case MemoBackend::Bitpack: return "memorization by binary expansion, packed floor lookup";
    case MemoBackend::WindingNP: return "memorization by irrational winding, exp generator";
    case MemoBackend::WindingRC: return "memorization by irrational winding, reciprocal generator";
  }
  return "";
}

Json winding_to_json(const WindingParams& w) {
  return Json{{"backend", w.backend == WindingBackend::NP ? "np" : "rc"},
              {"w", w.w},
              {"generators", w.generators},
              {"achieved_delta", w.achieved_delta},
              {"samples_used", w.samples_used}};
}

WindingParams winding_from_json(const Json& j) {
  WindingParams w;
  w.backend = j.at("backend").get<std::string>() == "np" ? WindingBackend::NP : WindingBackend::RC;
  w.w = j.at("w").get<std::vector<double>>();
  w.generators = j.at("generators").get<std::vector<double>>();
  w.achieved_delta = j.at("achieved_delta").get<double>();
  w.samples_used = j.at("samples_used").get<std::size_t>();
  return w;
}

}  // namespace

std::string to_string(Metric m) { return m == Metric::Linf ? "linf" : "lp"; }

Metric metric_from_string(const std::string& s) {
  if (s == "linf") return Metric::Linf;
  if (s == "lp") return Metric::Lp;
  throw Error(ErrorKind::ParseError, "metric must be linf or lp, got '" + s + "'");
}

ParamChoice select_params_linfty(double beta, double Q, double epsilon, double g_range, std::size_t d, std::size_t n) {
  check_eps(beta, Q, epsilon);
  ParamChoice c;
  c.K = at_least_one(ceil_tol(std::log2(std::pow(2.0, 1 - beta) * Q / epsilon) / beta), c.clamped);
  c.H = h_from_range(g_range, 2.0, epsilon, c.clamped);
  c.L = d * n;
  return c;
}

ParamChoice select_params_lp(double beta, double Q, double epsilon, double p, std::size_t d, std::size_t n,
                             double B_sigma, double f_max, double g_range) {
  check_eps(beta, Q, epsilon);
  if (!(p >= 1) || !std::isfinite(p)) throw Error(ErrorKind::OutOfRange, "p must be finite and >= 1");
  ParamChoice c;
  const double dd = static_cast<double>(d), nn = static_cast<double>(n);
  const double range_term = std::pow(2.0, 1 / p) * std::pow(dd, 2 / p) * std::pow(nn, 2 / p) * (B_sigma + f_max);
  long k1 = range_term > 0 ? ceil_tol(std::log2(range_term / epsilon) / beta) : 1;
  long k2 = ceil_tol(std::log2(std::pow(2.0, 1 - beta) * std::pow(2 * dd * nn, 1 / p) * Q / epsilon) / beta);
  c.K = at_least_one(std::max(k1, k2), c.clamped);
  c.H = h_from_range(g_range, 2.0 * std::pow(2 * dd * nn, 1 / p), epsilon, c.clamped);
  c.L = d * n;
  return c;
}

bool TransformerPipeline::exact_capable() const {
  return sr_block.exact_capable() && attention.uniform_scores() && scale_seg.exact_capable() &&
         outer_block.exact_capable();
}

bool TransformerPipeline::float_safe() const {
  return sr_block.float_safe() && scale_seg.float_safe() && outer_block.float_safe();
}

TransformerPipeline build_transformer(const TargetOracle& f, double epsilon, const BuildOptions& opt) {
  if (opt.metric == Metric::Linf && opt.inner == InnerVariant::ReLU) {
    throw Error(ErrorKind::IncompatibleVariant, "the ReLU inner map has a flaw set, so it cannot carry a sup-norm bound");
  }
  const std::size_t d = f.d, n = f.n;
  TransformerPipeline t;
  t.metric = opt.metric;
  t.inner = opt.inner;
  t.backend = opt.backend;
  t.target = f.name;

  ConstructionParams& P = t.params;
  P.d = d;
  P.n = n;
  P.beta = f.beta;
  P.Q = f.Q;
  P.epsilon = epsilon;
  P.p = opt.metric == Metric::Linf ? std::numeric_limits<double>::infinity() : opt.p;

  auto range_of = [](const LabelTable& lt) { return (lt.g_max - lt.g_min).to_double(); };
  auto bsigma_of = [](const LabelTable& lt) { return std::max(std::abs(lt.g_min.to_double()), std::abs(lt.g_max.to_double())); };

  ParamChoice c = select_params_linfty(f.beta, f.Q, epsilon, 0.0, d, n);
  check_kdn(c.K, d, n, opt.kdn_cap);
  LabelTable labels = build_label_table(f, c.K, opt.lambda_cap);
  if (opt.metric == Metric::Linf) {
    c = select_params_linfty(f.beta, f.Q, epsilon, range_of(labels), d, n);
  } else {
    // Provisional K from the Hoelder term only, then settle K against B_sigma.
    for (int iter = 0; iter < 8; ++iter) {
      const ParamChoice next = select_params_lp(f.beta, f.Q, epsilon, opt.p, d, n, bsigma_of(labels),
                                                labels.f_max.to_double(), range_of(labels));
      const bool same = next.K == c.K;
      c = next;
      if (same) break;
      check_kdn(c.K, d, n, opt.kdn_cap);
      labels = build_label_table(f, c.K, opt.lambda_cap);
    }
  }
  P.K = c.K;
  P.H = c.H;
  P.L = c.L;
  P.B_sigma = bsigma_of(labels);
  P.validate();
  t.g_min = labels.g_min;
  t.g_max = labels.g_max;
  t.f_max = labels.f_max;
  t.lambda_size = labels.points.size();
  if (c.clamped) t.warnings.push_back("epsilon is large enough that K or H was clamped to 1 (degenerate network)");
  if (labels.g_min == labels.g_max) t.warnings.push_back("target is constant on the memory points; outer block is constant");

  t.sr_block = synth_sr_block(P.K, d, n, opt.inner, opt.metric == Metric::Lp ? opt.p : 1.0, f.beta, opt.kdn_cap);
  t.attention = make_column_sum_attention(d, n);
  t.scale_seg = make_scaling_segmentation(P.K, d, n, opt.kdn_cap);

  OuterOptions oo;
  oo.backend = opt.backend;
  oo.bitpack_cap = opt.bitpack_cap;
  oo.winding_cap = opt.winding_cap;
  oo.winding_delta = opt.winding_delta > 0 ? opt.winding_delta : epsilon / 2;
  oo.winding_budget = opt.winding_budget;
  oo.seed = opt.seed;
  oo.saw_gadget = opt.metric == Metric::Linf;
  OuterBlock ob = assemble_outer_block(labels, P.H, oo);
  t.outer_block = std::move(ob.block);
  t.winding = std::move(ob.winding);

  const std::size_t K = P.K, dn = d * n;
  t.manifest.push_back({"sr_block", sr_role(opt.inner), t.sr_block.depth(), t.sr_block.width(),
                        opt.inner == InnerVariant::Floor
                            ? "depth K+3 = " + std::to_string(K + 3) + ", width 3dn = " + std::to_string(3 * dn)
                            : "depth <= 2K = " + std::to_string(2 * K) + ", width 4dn = " + std::to_string(4 * dn)});
  t.manifest.push_back({"attention", "single head, W_K = W_Q = 0, column sum into the bottom block", 1, 2 * d,
                        "1 head, head size 2d = " + std::to_string(2 * d)});
  t.manifest.push_back({"scale_seg", "scaling by 3^{Kdn} and column segmentation shift", t.scale_seg.depth(),
                        t.scale_seg.width(), "affine, depth 1"});
  t.manifest.push_back({"outer_block", outer_role(opt.backend), t.outer_block.depth(), t.outer_block.width(),
                        opt.backend == MemoBackend::Bitpack
                            ? (labels.g_min == labels.g_max ? "constant, depth 1" : "depth 4, width 2dH = " + std::to_string(2 * d * P.H))
                            : "depth 4, width " + std::to_string((opt.metric == Metric::Linf ? 3 : 1) * d)});
  return t;
}

ScalarMatrix eval_inner_matrix(const TransformerPipeline& t, const ScalarMatrix& x, Mode mode) {
  const std::size_t d = t.params.d, n = t.params.n;
  if (x.rows() != d || x.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "pipeline expects " + shape_string(d, n) + ", got " + shape_string(x.rows(), x.cols()));
  }
  for (const Scalar& v : x.data()) {
    if (v.sign() < 0 || v > Scalar::one(v.mode())) throw Error(ErrorKind::OutOfDomain, "input entry " + v.to_string() + " outside [0,1]");
  }
  if (mode == Mode::Exact) {
    if (!t.sr_block.exact_capable() || !t.scale_seg.exact_capable()) {
      throw Error(ErrorKind::ModeUnsupported, "inner stages are not exact");
    }
    const ScalarMatrix xe = to_mode(x, Mode::Exact);
    return t.scale_seg.eval(eval_attention(t.attention, t.sr_block.eval(xe, Mode::Exact), Mode::Exact), Mode::Exact);
  }
  const RealMatrix z2 = t.sr_block.eval_real(to_real(x));
  return from_real(t.scale_seg.eval_real(eval_attention_real(t.attention, z2)), Mode::Float);
}

ScalarMatrix eval_transformer(const TransformerPipeline& t, const ScalarMatrix& x, Mode mode) {
  if (mode == Mode::Exact && !t.exact_capable()) {
    throw Error(ErrorKind::ModeUnsupported, "exact evaluation needs the floor or ReLU inner map with the bitpack backend");
  }
  const ScalarMatrix z = eval_inner_matrix(t, x, mode);
  if (mode == Mode::Exact) return t.outer_block.eval(z, Mode::Exact);
  return from_real(t.outer_block.eval_real(to_real(z)), Mode::Float);
}

Json to_json(const TransformerPipeline& t) {
  Json params = to_json(t.params);
  params["metric"] = to_string(t.metric);
  params["inner_variant"] = to_string(t.inner);
  params["memo_backend"] = to_string(t.backend);
  params["target"] = t.target;
  params["g_min"] = scalar_to_json(t.g_min);
  params["g_max"] = scalar_to_json(t.g_max);
  params["f_max"] = scalar_to_json(t.f_max);
  params["lambda_size"] = t.lambda_size;

  Json manifest = Json::array();
  for (const ManifestEntry& e : t.manifest) {
    manifest.push_back(Json{{"block", e.block}, {"role", e.role}, {"depth", e.depth}, {"width", e.width}, {"expected", e.expected}});
  }
  Json outer = to_json(t.outer_block);
  if (!t.winding.empty()) {
    Json w = Json::array();
    for (const WindingParams& wp : t.winding) w.push_back(winding_to_json(wp));
    outer["winding"] = std::move(w);
  }
  Json warnings = t.warnings;
  return Json{{"params", std::move(params)},
              {"manifest", std::move(manifest)},
              {"warnings", std::move(warnings)},
              {"sr_block", to_json(t.sr_block)},
              {"attention", to_json(t.attention)},
              {"scale_seg", to_json(t.scale_seg)},
              {"outer_block", std::move(outer)}};
}

TransformerPipeline pipeline_from_json(const Json& j) {
  try {
    TransformerPipeline t;
    const Json& p = j.at("params");
    t.params = params_from_json(p);
    t.metric = metric_from_string(p.at("metric").get<std::string>());
    t.inner = inner_variant_from_string(p.at("inner_variant").get<std::string>());
    t.backend = memo_backend_from_string(p.at("memo_backend").get<std::string>());
    t.target = p.at("target").get<std::string>();
    t.g_min = scalar_from_json(p.at("g_min"));
    t.g_max = scalar_from_json(p.at("g_max"));
    t.f_max = scalar_from_json(p.at("f_max"));
    t.lambda_size = p.at("lambda_size").get<std::size_t>();
    for (const Json& e : j.at("manifest")) {
      t.manifest.push_back({e.at("block").get<std::string>(), e.at("role").get<std::string>(),
                            e.at("depth").get<std::size_t>(), e.at("width").get<std::size_t>(),
                            e.at("expected").get<std::string>()});
    }
    if (j.contains("warnings")) t.warnings = j.at("warnings").get<std::vector<std::string>>();
    t.sr_block = ffn_from_json(j.at("sr_block"));
    t.attention = attention_from_json(j.at("attention"));
    t.scale_seg = ffn_from_json(j.at("scale_seg"));
    t.outer_block = ffn_from_json(j.at("outer_block"));
    if (j.at("outer_block").contains("winding")) {
      for (const Json& w : j.at("outer_block").at("winding")) t.winding.push_back(winding_from_json(w));
    }
    const std::size_t d = t.params.d, n = t.params.n;
    if (t.sr_block.input_rows() != d || t.sr_block.output_rows() != 2 * d || t.sr_block.n_columns() != n ||
        t.attention.model_dim() != 2 * d || t.scale_seg.input_rows() != 2 * d || t.scale_seg.output_rows() != d ||
        t.outer_block.input_rows() != d || t.outer_block.output_rows() != d || t.outer_block.n_columns() != n) {
      throw Error(ErrorKind::ShapeMismatch, "pipeline stages do not chain d x n -> 2d x n -> 2d x n -> d x n -> d x n");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("pipeline: ") + e.what());
  }
}

}  // namespace kst
