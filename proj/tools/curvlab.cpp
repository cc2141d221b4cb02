#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "curvlab/chart_geometry.hpp"
#include "curvlab/errors.hpp"
#include "curvlab/identity_suite.hpp"
#include "curvlab/run_config.hpp"
#include "curvlab/version.hpp"
#include "json.hpp"

using namespace curvlab;
using json = nlohmann::ordered_json;

namespace {

struct ChartFlags {
  std::string chart;
  std::string chart_file;
  int n = 0;
  std::optional<double> c;
  std::vector<std::string> params;
  std::vector<std::string> factors;

  void add(CLI::App* app) {
    app->add_option("--chart", chart, "builtin chart name or spec string, e.g. fubini_study:4:c=4");
    app->add_option("--chart-file", chart_file, "JSON chart file");
    app->add_option("--n", n, "complex dimension");
    app->add_option("--c", c, "holomorphic sectional curvature parameter");
    app->add_option("--param", params, "extra chart parameter key=value (repeatable)");
    app->add_option("--factor", factors, "product factor spec (repeatable, with --chart product)");
  }

  bool given() const { return !chart.empty() || !chart_file.empty(); }

  /// Applies the flags on top of `base`.
  ChartConfig apply(ChartConfig base) const {
    if (!chart_file.empty()) {
      base.file = chart_file;
      return base;
    }
    if (!chart.empty()) {
      base.file.clear();
      base.spec = ChartSpec::parse(chart);
    }
    if (n != 0) base.spec.n = n;
    if (c) base.spec.params["c"] = *c;
    for (const std::string& kv : params) {
      const ChartSpec p = ChartSpec::parse("x:" + kv);
      for (const auto& [k, v] : p.params) base.spec.params[k] = v;
    }
    for (const std::string& f : factors) base.spec.factors.push_back(ChartSpec::parse(f));
    return base;
  }
};

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad coordinate '" + item + "' in point '" + text + "'");
    }
  }
  return out;
}

std::vector<std::string> split_ids(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const std::string& r : raw) {
    std::stringstream ss(r);
    for (std::string id; std::getline(ss, id, ',');)
      if (!id.empty()) out.push_back(id);
  }
  return out;
}

Vector point_or_center(const Chart& chart, const std::string& text) {
  if (text.empty()) return chart.center();
  const std::vector<double> p = parse_point(text);
  if (static_cast<int>(p.size()) != chart.dim())
    throw Error(ErrorCode::ConfigError, "point needs " + std::to_string(chart.dim()) + " coordinates");
  return Eigen::Map<const Vector>(p.data(), chart.dim());
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_list(bool identities_only, bool charts_only, bool as_json) {
  const bool charts = !identities_only || charts_only;
  const bool ids = !charts_only || identities_only;
  if (as_json) {
    json j;
    if (charts) {
      json list = json::array();
      for (const BuiltinInfo& b : builtin_catalog())
        list.push_back({{"name", b.name}, {"summary", b.summary}, {"params", b.params}});
      j["charts"] = list;
    }
    if (ids) {
      json list = json::array();
      for (const IdentityInfo& i : identity_catalog())
        list.push_back({{"id", i.id},
                        {"summary", i.summary},
                        {"group", i.group},
                        {"arity", i.arity},
                        {"min_n", i.min_n},
                        {"excluded_n", i.excluded_n},
                        {"needs_almost_kahler", i.needs_almost_kahler},
                        {"needs_pcasc", i.needs_pcasc},
                        {"exploratory", i.exploratory},
                        {"note", i.note}});
      j["identities"] = list;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  if (charts) {
    std::cout << "charts:\n";
    for (const BuiltinInfo& b : builtin_catalog())
      std::cout << "  " << b.name << "  [" << b.params << "]\n      " << b.summary << "\n";
  }
  if (ids) {
    std::cout << "identities:\n";
    for (const IdentityInfo& i : identity_catalog()) {
      std::cout << "  " << i.id << "  (" << i.group << ", n >= " << i.min_n;
      if (i.excluded_n) std::cout << ", n != " << i.excluded_n;
      std::cout << ")  " << i.summary << "\n";
    }
  }
  return 0;
}

int cmd_eval(const ChartFlags& cf, const std::string& point, double h, bool as_json) {
  if (!cf.given()) throw Error(ErrorCode::ConfigError, "eval needs --chart or --chart-file");
  const Chart chart = load_chart(cf.apply({}));
  JetOptions jo;
  jo.h = h;
  jo.curvature_derivatives = false;
  const JetPoint j = jet(chart, point_or_center(chart, point), jo);
  const AlmostKahlerResiduals ak = almost_kahler_residuals(j);
  const EinsteinHolomorphic eh = einstein_holomorphic_defects(j.space, j.R, 200, 1);
  double spread = 0;
  if (chart.n >= 2)
    spread = pcasc_estimate(j.space, j.R, sample_planes(j.space, PlaneKind::Antiholomorphic, 200, 1), 1e-8).spread;
  json out;
  out["chart"] = chart.name;
  out["n"] = chart.n;
  out["point"] = std::vector<double>(j.point.data(), j.point.data() + j.point.size());
  out["h"] = h;
  out["tau"] = number(j.tau);
  out["tau_star"] = number(j.tau_star);
  out["nu"] = number(j.nu);
  out["pcasc_spread"] = number(spread);
  out["einstein_defect"] = number(eh.einstein_defect);
  out["holo_spread"] = number(eh.holo_spread);
  out["r_1_8"] = number(ak.r_1_8);
  out["r_1_9"] = number(ak.r_1_9);
  out["r_1_10"] = number(ak.r_1_10);
  out["nabla_J"] = number(nabla_j_norm(j));
  if (as_json) {
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& [k, v] : out.items()) std::cout << k << " = " << v.dump() << "\n";
  }
  return 0;
}

int cmd_sample_planes(const ChartFlags& cf, const std::string& point, double h, const std::string& kind_name,
                      int count, std::uint64_t seed, bool as_json) {
  if (!cf.given()) throw Error(ErrorCode::ConfigError, "sample-planes needs --chart or --chart-file");
  const std::map<std::string, PlaneKind> kinds = {{"antiholomorphic", PlaneKind::Antiholomorphic},
                                                  {"holomorphic", PlaneKind::Holomorphic},
                                                  {"generic", PlaneKind::Generic}};
  const auto it = kinds.find(kind_name);
  if (it == kinds.end()) throw Error(ErrorCode::ConfigError, "unknown plane kind '" + kind_name + "'");
  const Chart chart = load_chart(cf.apply({}));
  JetOptions jo;
  jo.h = h;
  jo.curvature_derivatives = false;
  const JetPoint j = jet(chart, point_or_center(chart, point), jo);
  const std::vector<TwoPlane> planes = sample_planes(j.space, it->second, count, seed);
  json list = json::array();
  for (const TwoPlane& p : planes) {
    const PlaneDefects d = plane_defects(j.space, p);
    list.push_back({{"x", std::vector<double>(p.x.data(), p.x.data() + p.x.size())},
                    {"y", std::vector<double>(p.y.data(), p.y.data() + p.y.size())},
                    {"sectional", number(sectional(j.R, p))},
                    {"antiholomorphic_defect", number(d.antiholomorphic_defect)},
                    {"holomorphic_defect", number(d.holomorphic_defect)}});
  }
  const PcascEstimate s = sectional_spread(j.R, planes);
  if (as_json) {
    json out;
    out["kind"] = kind_name;
    out["seed"] = seed;
    out["mean"] = number(s.mean_nu);
    out["spread"] = number(s.spread);
    out["planes"] = list;
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << kind_name << " planes: " << planes.size() << "  mean sectional = " << s.mean_nu
              << "  spread = " << s.spread << "\n";
    for (const json& p : list) std::cout << "  K = " << p["sectional"].dump() << "\n";
  }
  return 0;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::OutOfDomain:
    case ErrorCode::StepTooLarge: return ExitDomain;
    case ErrorCode::HypothesisViolated: return ExitHypothesis;
    case ErrorCode::ConfigError:
    case ErrorCode::ParseError:
    case ErrorCode::UnknownChart:
    case ErrorCode::BadParams:
    case ErrorCode::DimensionTooSmall: return ExitConfig;
    default: return ExitFail;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("curvlab ") + version + ": curvature identity checker for almost Hermitian charts"};
  // --h is the step size, so help keeps only its long form.
  app.set_help_flag("--help", "print help");
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "builtin charts and the identity catalog");
  bool list_ids = false, list_charts = false, list_json = false;
  list->add_flag("--identities", list_ids, "only the identity catalog");
  list->add_flag("--charts", list_charts, "only the builtin charts");
  list->add_flag("--json", list_json, "machine-readable output");

  auto* eval = app.add_subcommand("eval", "curvature invariants at one point");
  ChartFlags eval_chart;
  eval_chart.add(eval);
  std::string eval_point;
  double eval_h = 1e-3;
  bool eval_json = false;
  eval->add_option("--point", eval_point, "comma-separated coordinates (default: box centre)");
  eval->add_option("--h", eval_h, "finite-difference step")->check(CLI::PositiveNumber);
  eval->add_flag("--json", eval_json, "JSON output");

  auto* planes = app.add_subcommand("sample-planes", "sectional curvature over sampled planes");
  ChartFlags planes_chart;
  planes_chart.add(planes);
  std::string planes_point, planes_kind = "antiholomorphic";
  double planes_h = 1e-3;
  int planes_count = 20;
  std::uint64_t planes_seed = 1;
  bool planes_json = false;
  planes->add_option("--point", planes_point, "comma-separated coordinates (default: box centre)");
  planes->add_option("--h", planes_h, "finite-difference step")->check(CLI::PositiveNumber);
  planes->add_option("--kind", planes_kind, "antiholomorphic, holomorphic or generic");
  planes->add_option("--count", planes_count, "number of planes")->check(CLI::PositiveNumber);
  auto* planes_seed_opt = planes->add_option("--seed", planes_seed, "sampling seed");
  planes->add_flag("--json", planes_json, "JSON output");

  auto* check = app.add_subcommand("check", "run the identity suite and write a report");
  ChartFlags check_chart;
  check_chart.add(check);
  std::string config_path, output;
  std::vector<std::string> points_raw, include_raw, exclude_raw, tol_raw;
  int count = 0;
  double margin = -1, h = 0, tolerance = 0;
  int order = 0, tuples = 0;
  std::uint64_t seed = 0;
  std::string reading;
  bool no_algebra = false, closure = false, print_config = false;
  check->add_option("--config", config_path, "RunConfig JSON file");
  check->add_option("--point", points_raw, "explicit point, comma-separated (repeatable)");
  auto* count_opt = check->add_option("--points", count, "number of sampled points");
  auto* margin_opt = check->add_option("--margin", margin, "sampler margin from the box boundary");
  auto* h_opt = check->add_option("--h", h, "finite-difference step");
  auto* order_opt = check->add_option("--order", order, "stencil order, 2 or 4");
  auto* tol_opt = check->add_option("--tolerance", tolerance, "tolerance for every identity");
  check->add_option("--tol", tol_raw, "per-identity tolerance id=value (repeatable)");
  check->add_option("--identities", include_raw, "identity ids to run (comma-separated)");
  check->add_option("--exclude", exclude_raw, "identity ids to skip (comma-separated)");
  auto* seed_opt = check->add_option("--seed", seed, "seed (default from CURVLAB_SEED, then 1)");
  check->add_option("--reading", reading, "slot reading of the nabla Q formula, A or B");
  auto* tuples_opt = check->add_option("--tuples", tuples, "random argument tuples per identity");
  check->add_flag("--no-algebra", no_algebra, "skip the pure-algebra checks");
  check->add_flag("--closure", closure, "add the Bianchi-closed instance findings");
  check->add_option("--output,-o", output, "report path (default report.json)");
  check->add_flag("--print-config", print_config, "print the effective RunConfig and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ExitConfig;
  }

  try {
    if (*list) return cmd_list(list_ids, list_charts, list_json);
    if (*eval) return cmd_eval(eval_chart, eval_point, eval_h, eval_json);
    if (*planes) {
      if (!*planes_seed_opt)
        if (const char* env = std::getenv("CURVLAB_SEED")) planes_seed = std::strtoull(env, nullptr, 10);
      return cmd_sample_planes(planes_chart, planes_point, planes_h, planes_kind, planes_count, planes_seed,
                               planes_json);
    }

    // Precedence: flag, then config file, then CURVLAB_SEED, then the built-in default.
    RunConfig cfg;
    bool config_has_seed = false;
    if (!config_path.empty()) {
      cfg = RunConfig::from_file(config_path);
      std::ifstream in(config_path);
      config_has_seed = json::parse(in, nullptr, false).contains("seed");
    }
    if (!config_has_seed)
      if (const char* env = std::getenv("CURVLAB_SEED")) {
        char* end = nullptr;
        cfg.seed = std::strtoull(env, &end, 10);
        if (!end || *end) throw Error(ErrorCode::ConfigError, "CURVLAB_SEED must be an unsigned integer");
      }
    if (*seed_opt) cfg.seed = seed;
    if (check_chart.given() || check_chart.n || check_chart.c || !check_chart.params.empty())
      cfg.chart = check_chart.apply(cfg.chart);
    if (!points_raw.empty()) {
      cfg.points.clear();
      for (const std::string& p : points_raw) cfg.points.push_back(parse_point(p));
    }
    if (*count_opt) {
      cfg.sampler.count = count;
      if (points_raw.empty()) cfg.points.clear();
    }
    if (*margin_opt) cfg.sampler.margin = margin;
    if (*h_opt) cfg.h = h;
    if (*order_opt) cfg.order = order;
    if (*tol_opt) cfg.tolerance = tolerance;
    for (const std::string& kv : tol_raw) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--tol expects id=value");
      try {
        cfg.tolerances[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, "bad tolerance in '" + kv + "'");
      }
    }
    if (!include_raw.empty()) cfg.include = split_ids(include_raw);
    if (!exclude_raw.empty()) cfg.exclude = split_ids(exclude_raw);
    if (!reading.empty()) {
      if (reading != "A" && reading != "B") throw Error(ErrorCode::ConfigError, "--reading must be A or B");
      cfg.reading = reading == "A" ? Reading::A : Reading::B;
    }
    if (*tuples_opt) cfg.tuples = tuples;
    if (no_algebra) cfg.algebra = false;
    if (closure) cfg.closure = true;
    if (!output.empty()) cfg.output = output;
    cfg.validate();
    if (print_config) {
      std::cout << cfg.to_json();
      return 0;
    }

    const CheckResult res = run_check(cfg);
    const std::string path = cfg.output.empty() ? "report.json" : cfg.output;
    write_atomic(path, res.report.to_json());
    const IdentityReport& r = res.report;
    std::cout << "entries: " << r.entries.size() << "  pass: " << r.count(Verdict::Pass)
              << "  fail: " << r.count(Verdict::Fail) << "  exploratory: " << r.count(Verdict::Exploratory)
              << "  skipped: " << r.metadata.skipped.size()
              << "  hypothesis violations: " << r.metadata.hypothesis_violations.size() << "\n";
    for (const ReportEntry& e : r.entries)
      if (e.verdict == Verdict::Fail)
        std::cout << "FAIL " << e.identity_id << (e.check.empty() ? "" : " " + e.check) << " residual "
                  << e.residual << " > " << e.tolerance << "\n";
    for (const std::string& m : res.messages) std::cout << m << "\n";
    std::cout << "report: " << path << std::endl;
    return res.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitFail;
  }
}
