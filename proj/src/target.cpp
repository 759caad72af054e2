#include "kst/target.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace kst {

namespace {

void check_input(const ScalarMatrix& x, std::size_t d, std::size_t n) {
  if (x.rows() != d || x.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "target expects " + shape_string(d, n) + ", got " + shape_string(x.rows(), x.cols()));
  }
}

Mode mode_of(const ScalarMatrix& x) { return x.empty() ? Mode::Exact : x.data()[0].mode(); }

TargetOracle unit_range(TargetOracle t) {
  t.range = std::make_pair(Scalar::exact(0), Scalar::exact(1));
  return t;
}

// ---- expression parser ----

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum Kind { Number, Var, Index, Neg, Add, Sub, Mul, Div, Pow, Call } kind;
  Scalar value;            // Number
  bool float_only = false;  // Number that is irrational (pi)
  std::size_t p = 0, q = 0;  // Var, 0-based
  char index = 0;            // Index: 'r' or 's'
  std::string fn;
  std::vector<NodePtr> args;
};

class Parser {
 public:
  Parser(const std::string& text, std::size_t d, std::size_t n) : text_(text), d_(d), n_(n) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

  bool uses_vars = false;

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::ParseError, "expression '" + text_ + "' at " + std::to_string(pos_) + ": " + msg);
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr make(Node::Kind k, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->args = std::move(args);
    return n;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (eat('+')) {
        lhs = make(Node::Add, {lhs, term()});
      } else if (eat('-')) {
        lhs = make(Node::Sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (eat('*')) {
        lhs = make(Node::Mul, {lhs, unary()});
      } else if (eat('/')) {
        lhs = make(Node::Div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Node::Neg, {unary()});
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return make(Node::Pow, {base, unary()});
    return base;
  }

  std::size_t index_number() {
    skip();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected an index");
    return std::stoul(text_.substr(start, pos_ - start));
  }

  NodePtr var(std::size_t p, std::size_t q) {
    if (p < 1 || p > d_ || q < 1 || q > n_) {
      fail("x[" + std::to_string(p) + "," + std::to_string(q) + "] outside " + shape_string(d_, n_));
    }
    auto node = std::make_shared<Node>();
    node->kind = Node::Var;
    node->p = p - 1;
    node->q = q - 1;
    uses_vars = true;
    return node;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
              ((text_[pos_] == 'e' || text_[pos_] == 'E') && pos_ + 1 < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) || text_[pos_ + 1] == '-' ||
                text_[pos_ + 1] == '+')) ||
              ((text_[pos_] == '-' || text_[pos_] == '+') && (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
        ++pos_;
      }
      auto node = std::make_shared<Node>();
      node->kind = Node::Number;
      node->value = Scalar::parse_exact(text_.substr(start, pos_ - start));
      return node;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string word = text_.substr(start, pos_ - start);

    if (word == "x" || word == "x_") {
      if (eat('[')) {
        const std::size_t p = index_number();
        if (!eat(',')) fail("expected ','");
        const std::size_t q = index_number();
        if (!eat(']')) fail("expected ']'");
        return var(p, q);
      }
      fail("expected x[p,q]");
    }
    if (word.size() >= 3 && word[0] == 'x') {
      std::string rest = word.substr(1);
      if (rest[0] == '_') rest = rest.substr(1);
      const auto us = rest.find('_');
      if (us != std::string::npos) {
        return var(std::stoul(rest.substr(0, us)), std::stoul(rest.substr(us + 1)));
      }
      if (rest.size() == 2 && std::isdigit(static_cast<unsigned char>(rest[0])) &&
          std::isdigit(static_cast<unsigned char>(rest[1]))) {
        return var(static_cast<std::size_t>(rest[0] - '0'), static_cast<std::size_t>(rest[1] - '0'));
      }
      fail("bad variable '" + word + "'");
    }
    if (word == "r" || word == "s") {
      auto node = std::make_shared<Node>();
      node->kind = Node::Index;
      node->index = word[0];
      return node;
    }
    if (word == "pi") {
      auto node = std::make_shared<Node>();
      node->kind = Node::Number;
      node->value = Scalar::real(std::numbers::pi);
      node->float_only = true;
      return node;
    }
    static const char* fns[] = {"abs", "min", "max", "sqrt", "exp", "log", "sin", "cos"};
    if (std::find(std::begin(fns), std::end(fns), word) == std::end(fns)) fail("unknown name '" + word + "'");
    if (!eat('(')) fail("expected '(' after " + word);
    auto node = std::make_shared<Node>();
    node->kind = Node::Call;
    node->fn = word;
    node->args.push_back(expr());
    while (eat(',')) node->args.push_back(expr());
    if (!eat(')')) fail("expected ')'");
    const bool variadic = word == "min" || word == "max";
    if (!variadic && node->args.size() != 1) fail(word + " takes one argument");
    return node;
  }

  std::string text_;
  std::size_t d_, n_;
  std::size_t pos_ = 0;
};

Scalar eval_node(const Node& node, const ScalarMatrix& x, std::size_t r, std::size_t s, Mode mode) {
  auto arg = [&](std::size_t i) { return eval_node(*node.args[i], x, r, s, mode); };
  auto real_fn = [&](double (*f)(double)) {
    if (mode == Mode::Exact) throw Error(ErrorKind::ModeUnsupported, node.fn + " is not rational; use float mode");
    return Scalar::real(f(arg(0).to_double()));
  };
  switch (node.kind) {
    case Node::Number:
      if (node.float_only && mode == Mode::Exact) throw Error(ErrorKind::ModeUnsupported, "pi is irrational");
      return node.value.to_mode(mode);
    case Node::Var:
      return x(node.p, node.q);
    case Node::Index:
      return Scalar::exact(static_cast<long>(node.index == 'r' ? r + 1 : s + 1)).to_mode(mode);
    case Node::Neg:
      return -arg(0);
    case Node::Add:
      return arg(0) + arg(1);
    case Node::Sub:
      return arg(0) - arg(1);
    case Node::Mul:
      return arg(0) * arg(1);
    case Node::Div:
      return arg(0) / arg(1);
    case Node::Pow: {
      const Scalar b = arg(0), e = arg(1);
      if (mode == Mode::Exact) {
        if (!e.is_integer() || e.abs() > Scalar::exact(4096)) {
          throw Error(ErrorKind::ModeUnsupported, "exact powers need a small integer exponent");
        }
        const long k = e.rational().get_num().get_si();
        Scalar out = Scalar::exact(1);
        for (long i = 0; i < (k < 0 ? -k : k); ++i) out *= b;
        return k < 0 ? Scalar::exact(1) / out : out;
      }
      return Scalar::real(std::pow(b.to_double(), e.to_double()));
    }
    case Node::Call: {
      if (node.fn == "abs") return arg(0).abs();
      if (node.fn == "min" || node.fn == "max") {
        Scalar best = arg(0);
        for (std::size_t i = 1; i < node.args.size(); ++i) {
          const Scalar v = arg(i);
          if (node.fn == "min" ? v < best : v > best) best = v;
        }
        return best;
      }
      if (node.fn == "sqrt") return real_fn([](double v) { return std::sqrt(v); });
      if (node.fn == "exp") return real_fn([](double v) { return std::exp(v); });
      if (node.fn == "log") return real_fn([](double v) { return std::log(v); });
      if (node.fn == "sin") return real_fn([](double v) { return std::sin(v); });
      return real_fn([](double v) { return std::cos(v); });
    }
  }
  return Scalar::zero(mode);
}

TargetOracle entrywise(std::size_t d, std::size_t n, std::string name,
                       std::function<Scalar(const ScalarMatrix&, std::size_t, std::size_t)> g) {
  TargetOracle t;
  t.d = d;
  t.n = n;
  t.name = std::move(name);
  t.fn = [d, n, g](const ScalarMatrix& x) {
    ScalarMatrix out(d, n);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t s = 0; s < n; ++s) out(r, s) = g(x, r, s);
    }
    return out;
  };
  return t;
}

Scalar count(std::size_t k, Mode m) { return Scalar::exact(static_cast<long>(k)).to_mode(m); }

}  // namespace

ScalarMatrix TargetOracle::evaluate(const ScalarMatrix& x) const {
  check_input(x, d, n);
  ScalarMatrix out = fn(x);
  if (out.rows() != d || out.cols() != n) throw Error(ErrorKind::ShapeMismatch, "target returned the wrong shape");
  return out;
}

TargetOracle constant_target(std::size_t d, std::size_t n, const Scalar& c) {
  std::ostringstream name;
  name << "const:" << c.to_string();
  TargetOracle t = entrywise(d, n, name.str(), [c](const ScalarMatrix& x, std::size_t, std::size_t) {
    return c.to_mode(mode_of(x));
  });
  t.range = std::make_pair(c, c);
  return t;
}

TargetOracle projection_target(std::size_t d, std::size_t n, std::size_t p, std::size_t q) {
  if (p < 1 || p > d || q < 1 || q > n) throw Error(ErrorKind::OutOfRange, "projection index outside the matrix");
  return unit_range(entrywise(d, n, "x[" + std::to_string(p) + "," + std::to_string(q) + "]",
                              [p, q](const ScalarMatrix& x, std::size_t, std::size_t) { return x(p - 1, q - 1); }));
}

TargetOracle mean_target(std::size_t d, std::size_t n) {
  return unit_range(entrywise(d, n, "mean", [](const ScalarMatrix& x, std::size_t, std::size_t) {
    const Mode m = mode_of(x);
    Scalar sum = Scalar::zero(m);
    for (const Scalar& v : x.data()) sum += v;
    return sum / count(x.data().size(), m);
  }));
}

TargetOracle col_mean_target(std::size_t d, std::size_t n) {
  return unit_range(entrywise(d, n, "col_mean", [](const ScalarMatrix& x, std::size_t, std::size_t s) {
    const Mode m = mode_of(x);
    Scalar sum = Scalar::zero(m);
    for (std::size_t p = 0; p < x.rows(); ++p) sum += x(p, s);
    return sum / count(x.rows(), m);
  }));
}

TargetOracle row_mean_target(std::size_t d, std::size_t n) {
  return unit_range(entrywise(d, n, "row_mean", [](const ScalarMatrix& x, std::size_t r, std::size_t) {
    const Mode m = mode_of(x);
    Scalar sum = Scalar::zero(m);
    for (std::size_t q = 0; q < x.cols(); ++q) sum += x(r, q);
    return sum / count(x.cols(), m);
  }));
}

TargetOracle min_target(std::size_t d, std::size_t n) {
  return unit_range(entrywise(d, n, "min", [](const ScalarMatrix& x, std::size_t, std::size_t) {
    return *std::min_element(x.data().begin(), x.data().end());
  }));
}

TargetOracle max_target(std::size_t d, std::size_t n) {
  return unit_range(entrywise(d, n, "max", [](const ScalarMatrix& x, std::size_t, std::size_t) {
    return *std::max_element(x.data().begin(), x.data().end());
  }));
}

TargetOracle expression_target(std::size_t d, std::size_t n, const std::string& text) {
  Parser parser(text, d, n);
  const NodePtr root = parser.parse();
  TargetOracle t = entrywise(d, n, text, [root](const ScalarMatrix& x, std::size_t r, std::size_t s) {
    return eval_node(*root, x, r, s, mode_of(x));
  });
  if (!parser.uses_vars) {
    // Constant in X; if it also ignores r, s the range is a point.
    bool flat = true;
    Scalar first;
    bool have = false;
    for (std::size_t r = 0; r < d && flat; ++r) {
      for (std::size_t s = 0; s < n && flat; ++s) {
        try {
          const Scalar v = eval_node(*root, zeros(d, n), r, s, Mode::Exact);
          if (have && v != first) flat = false;
          first = v;
          have = true;
        } catch (const Error&) {
          flat = false;
        }
      }
    }
    if (flat && have) t.range = std::make_pair(first, first);
  }
  return t;
}

TargetOracle make_target(const std::string& text, std::size_t d, std::size_t n, double beta, double Q) {
  TargetOracle t;
  if (text == "mean") {
    t = mean_target(d, n);
  } else if (text == "col_mean") {
    t = col_mean_target(d, n);
  } else if (text == "row_mean") {
    t = row_mean_target(d, n);
  } else if (text == "min") {
    t = min_target(d, n);
  } else if (text == "max") {
    t = max_target(d, n);
  } else if (text.rfind("const:", 0) == 0) {
    t = constant_target(d, n, Scalar::parse_exact(text.substr(6)));
  } else {
    t = expression_target(d, n, text);
    // A bare coordinate is a projection with the unit range.
    if (text.size() >= 3 && text[0] == 'x' && text.find_first_of("+-*/^() ") == std::string::npos) {
      t.range = std::make_pair(Scalar::exact(0), Scalar::exact(1));
    }
  }
  t.beta = beta;
  t.Q = Q;
  return t;
}

std::optional<std::string> holder_spot_check(const TargetOracle& f, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    RealMatrix a(f.d, f.n), b(f.d, f.n);
    for (double& v : a.data()) v = u(rng);
    // Half the pairs are close together so local violations show up.
    const double scale = i % 2 == 0 ? 1.0 : 1e-3;
    for (std::size_t k = 0; k < a.data().size(); ++k) {
      b.data()[k] = std::clamp(a.data()[k] + scale * (u(rng) - 0.5), 0.0, 1.0);
    }
    double dist = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) dist = std::max(dist, std::abs(a.data()[k] - b.data()[k]));
    if (dist == 0.0) continue;
    const ScalarMatrix fa = f.evaluate(from_real(a, Mode::Float));
    const ScalarMatrix fb = f.evaluate(from_real(b, Mode::Float));
    double diff = 0.0;
    for (std::size_t k = 0; k < fa.data().size(); ++k) {
      diff = std::max(diff, std::abs(fa.data()[k].to_double() - fb.data()[k].to_double()));
    }
    worst = std::max(worst, diff / std::pow(dist, f.beta));
  }
  if (worst > f.Q * (1 + 1e-9)) {
    std::ostringstream msg;
    msg << "target '" << f.name << "' shows Hoelder ratio " << worst << " > declared Q = " << f.Q << " (beta = " << f.beta
        << ")";
    return msg.str();
  }
  return std::nullopt;
}

}  // namespace kst
