#include "kst/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace kst {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  out << text;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, what + ": " + e.what());
  }
}

Scalar json_exact(const Json& j) {
  if (j.is_string()) return Scalar::parse_exact(j.get<std::string>());
  if (j.is_number()) return Scalar::parse_exact(j.dump());
  throw Error(ErrorKind::ParseError, "expected a number or \"p/q\" string");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

int report_error(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  return 2;
}

void print_summary(const TransformerPipeline& t, std::ostream& out) {
  const ConstructionParams& P = t.params;
  out << "target " << t.target << ", d = " << P.d << ", n = " << P.n << ", epsilon = " << P.epsilon << ", metric "
      << to_string(t.metric) << (t.metric == Metric::Lp ? " (p = " + std::to_string(P.p) + ")" : "") << "\n";
  out << "K = " << P.K << ", H = " << P.H << ", L = " << P.L << ", |Lambda| = " << t.lambda_size
      << ", g in [" << t.g_min.to_string() << ", " << t.g_max.to_string() << "]\n";
  std::size_t wb = 5, wr = 4;
  for (const ManifestEntry& e : t.manifest) {
    wb = std::max(wb, e.block.size());
    wr = std::max(wr, e.role.size());
  }
  out << std::left << std::setw(static_cast<int>(wb)) << "block" << "  " << std::setw(static_cast<int>(wr)) << "role"
      << "  depth  width  expected\n";
  for (const ManifestEntry& e : t.manifest) {
    out << std::setw(static_cast<int>(wb)) << e.block << "  " << std::setw(static_cast<int>(wr)) << e.role << "  "
        << std::setw(5) << e.depth << "  " << std::setw(5) << e.width << "  " << e.expected << "\n";
  }
  out << std::right;
}

std::size_t size_field(const Json& j, const char* key, std::size_t fallback) {
  return j.contains(key) ? j.at(key).get<std::size_t>() : fallback;
}

}  // namespace

Config config_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "config must be a JSON object");
    Config c;
    c.d = j.at("d").get<std::size_t>();
    c.n = j.at("n").get<std::size_t>();
    if (c.d == 0 || c.n == 0) throw Error(ErrorKind::ParseError, "d and n must be positive");
    c.beta = j.value("beta", 1.0);
    c.Q = j.value("Q", 1.0);
    c.epsilon = j.at("epsilon").get<double>();
    c.target = j.value("target", std::string("mean"));
    if (j.contains("range")) {
      const Json& r = j.at("range");
      if (!r.is_array() || r.size() != 2) throw Error(ErrorKind::ParseError, "range must be [lo, hi]");
      c.range = std::make_pair(json_exact(r[0]), json_exact(r[1]));
      if (c.range->second < c.range->first) throw Error(ErrorKind::ParseError, "range has lo > hi");
    }
    BuildOptions& b = c.build;
    b.metric = metric_from_string(j.value("metric", std::string("linf")));
    b.p = j.value("p", 2.0);
    b.inner = inner_variant_from_string(j.value("inner_variant", std::string("floor")));
    b.backend = memo_backend_from_string(j.value("memo_backend", std::string("bitpack")));
    b.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("caps")) {
      const Json& caps = j.at("caps");
      b.kdn_cap = size_field(caps, "kdn", b.kdn_cap);
      b.lambda_cap = size_field(caps, "lambda", b.lambda_cap);
      b.bitpack_cap = size_field(caps, "bitpack", b.bitpack_cap);
      b.winding_cap = size_field(caps, "winding", b.winding_cap);
    }
    b.winding_delta = j.value("winding_delta", 0.0);
    b.winding_budget = j.value("winding_budget", b.winding_budget);

    SuiteOptions& v = c.verify;
    v.seed = b.seed;
    v.threads = j.value("threads", 1u);
    v.winding_delta = b.winding_delta;
    if (j.contains("verify")) {
      const Json& vj = j.at("verify");
      v.inner_random = size_field(vj, "inner_random", v.inner_random);
      v.dinf_grid = size_field(vj, "dinf_grid", v.dinf_grid);
      v.dinf_random = size_field(vj, "dinf_random", v.dinf_random);
      v.dp_samples = size_field(vj, "dp_samples", v.dp_samples);
      v.flaw_samples = size_field(vj, "flaw_samples", v.flaw_samples);
      v.lambda_points = size_field(vj, "lambda_points", v.lambda_points);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
}

Config load_config(const std::string& path) { return config_from_json(parse_json(read_file(path), path)); }

TargetOracle config_target(const Config& c) {
  TargetOracle f = make_target(c.target, c.d, c.n, c.beta, c.Q);
  if (c.range) f.range = c.range;
  return f;
}

ScalarMatrix parse_matrix(const std::string& text) {
  std::vector<std::vector<Scalar>> rows;
  std::string row;
  std::istringstream in(text);
  auto flush = [&](const std::string& line) {
    if (trim(line).empty()) return;
    std::vector<Scalar> vals;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) vals.push_back(Scalar::parse_exact(trim(cell)));
    if (line.back() == ',') throw Error(ErrorKind::ParseError, "trailing comma in row '" + trim(line) + "'");
    rows.push_back(std::move(vals));
  };
  std::string chunk;
  while (std::getline(in, chunk)) {
    std::istringstream parts(chunk);
    while (std::getline(parts, row, ';')) flush(row);
  }
  if (rows.empty()) throw Error(ErrorKind::ParseError, "empty matrix");
  ScalarMatrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                                             " entries, expected " + std::to_string(m.cols()));
    }
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

ScalarMatrix read_csv_matrix(const std::string& path) { return parse_matrix(read_file(path)); }

int cmd_synth(const std::string& config_path, const std::string& out_path, std::ostream& out, std::ostream& err) {
  try {
    const Config c = load_config(config_path);
    const TargetOracle f = config_target(c);
    if (auto w = holder_spot_check(f, 200, c.build.seed)) err << "warning: " << *w << "\n";
    const TransformerPipeline t = build_transformer(f, c.epsilon, c.build);
    for (const std::string& w : t.warnings) err << "warning: " << w << "\n";
    write_file(out_path, to_json(t).dump(1) + "\n");
    print_summary(t, out);
    out << "wrote " << out_path << "\n";
    return 0;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_eval(const std::string& pipeline_path, const ScalarMatrix& x, Mode mode, std::ostream& out, std::ostream& err) {
  try {
    const TransformerPipeline t = pipeline_from_json(parse_json(read_file(pipeline_path), pipeline_path));
    const ScalarMatrix y = eval_transformer(t, to_mode(x, mode), mode);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t s = 0; s < y.cols(); ++s) out << (s ? "," : "") << y(r, s).to_string();
      out << "\n";
    }
    return 0;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_verify(const std::string& config_path, const std::string& suite, const std::string& pipeline_path,
               const std::string& report_path, std::ostream& out, std::ostream& err) {
  try {
    const Config c = load_config(config_path);
    const TargetOracle f = config_target(c);
    const TransformerPipeline t = pipeline_path.empty()
                                      ? build_transformer(f, c.epsilon, c.build)
                                      : pipeline_from_json(parse_json(read_file(pipeline_path), pipeline_path));
    const Report rep = run_suite(suite, t, f, c.verify);
    const std::string text = rep.to_text();
    out << text;
    if (!report_path.empty()) {
      write_file(report_path, rep.to_json().dump(1) + "\n");
      write_file(report_path + ".txt", text);
    }
    return rep.pass() ? 0 : 1;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kstformer: explicit transformer constructions for Hoelder targets"};
  app.require_subcommand(1);

  std::string config, out_path, pipeline, input, csv, mode = "exact", suite = "all", report;

  CLI::App* synth = app.add_subcommand("synth", "build a pipeline from a config");
  synth->add_option("--config", config, "config JSON")->required();
  synth->add_option("--out", out_path, "pipeline JSON to write")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a pipeline on one input matrix");
  eval->add_option("--pipeline", pipeline, "pipeline JSON")->required();
  auto* in_opt = eval->add_option("--input", input, "inline matrix, e.g. \"0.5, 0; 1/3, 1\"");
  auto* csv_opt = eval->add_option("--csv", csv, "CSV file holding the matrix");
  in_opt->excludes(csv_opt);
  eval->add_option("--mode", mode, "exact or float")->check(CLI::IsMember({"exact", "float"}));

  CLI::App* verify = app.add_subcommand("verify", "run verification suites");
  verify->add_option("--config", config, "config JSON")->required();
  verify->add_option("--suite", suite, "inner, memo, e2e or all")->check(CLI::IsMember({"inner", "memo", "e2e", "all"}));
  verify->add_option("--pipeline", pipeline, "pipeline JSON (built from the config when omitted)");
  verify->add_option("--report", report, "JSON report path; a .txt table is written alongside");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  if (synth->parsed()) return cmd_synth(config, out_path, out, err);
  if (verify->parsed()) return cmd_verify(config, suite, pipeline, report, out, err);
  try {
    if (input.empty() && csv.empty()) {
      err << "usage error: eval needs --input or --csv\n";
      return 2;
    }
    const ScalarMatrix x = csv.empty() ? parse_matrix(input) : read_csv_matrix(csv);
    return cmd_eval(pipeline, x, mode == "exact" ? Mode::Exact : Mode::Float, out, err);
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

}  // namespace kst
