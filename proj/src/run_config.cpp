#include "curvlab/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "curvlab/chart_geometry.hpp"
#include "curvlab/errors.hpp"
#include "curvlab/rng.hpp"
#include "curvlab/version.hpp"
#include "json.hpp"

namespace curvlab {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= k == a;
    if (!ok) config_error("unknown key '" + k + "' in " + where);
  }
}

json spec_to_json(const ChartSpec& s) {
  json j;
  j["name"] = s.name;
  j["n"] = s.n;
  json p = json::object();
  for (const auto& [k, v] : s.params) p[k] = v;
  j["params"] = p;
  json f = json::array();
  for (const ChartSpec& c : s.factors) f.push_back(spec_to_json(c));
  j["factors"] = f;
  return j;
}

ChartSpec spec_from_json(const json& j) {
  if (j.is_string()) return ChartSpec::parse(j.get<std::string>());
  check_keys(j, {"name", "n", "params", "factors"}, "chart spec");
  ChartSpec s;
  s.name = j.at("name").get<std::string>();
  s.n = j.value("n", 0);
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) s.params[k] = v.get<double>();
  if (j.contains("factors"))
    for (const json& f : j.at("factors")) s.factors.push_back(spec_from_json(f));
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config: ") + e.what());
  }
  RunConfig c;
  try {
    check_keys(j, {"chart", "points", "sampler", "h", "order", "tolerance", "tolerances", "identities", "seed",
                   "reading", "tuples", "algebra", "closure", "output"},
               "config");
    if (j.contains("chart")) {
      const json& ch = j.at("chart");
      if (ch.is_object() && ch.contains("file")) {
        check_keys(ch, {"file"}, "chart");
        c.chart.file = ch.at("file").get<std::string>();
      } else {
        c.chart.spec = spec_from_json(ch);
      }
    }
    if (j.contains("points")) c.points = j.at("points").get<std::vector<std::vector<double>>>();
    if (j.contains("sampler")) {
      const json& s = j.at("sampler");
      check_keys(s, {"count", "seed", "margin"}, "sampler");
      c.sampler.count = s.value("count", 1);
      if (s.contains("seed") && !s.at("seed").is_null()) c.sampler.seed = s.at("seed").get<std::uint64_t>();
      c.sampler.margin = s.value("margin", 0.1);
    }
    c.h = j.value("h", c.h);
    c.order = j.value("order", c.order);
    if (j.contains("tolerance") && !j.at("tolerance").is_null()) c.tolerance = j.at("tolerance").get<double>();
    if (j.contains("tolerances")) c.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
    if (j.contains("identities")) {
      const json& ids = j.at("identities");
      check_keys(ids, {"include", "exclude"}, "identities");
      c.include = ids.value("include", std::vector<std::string>{});
      c.exclude = ids.value("exclude", std::vector<std::string>{});
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("reading")) {
      const std::string r = j.at("reading").get<std::string>();
      if (r != "A" && r != "B") config_error("reading must be \"A\" or \"B\"");
      c.reading = r == "A" ? Reading::A : Reading::B;
    }
    c.tuples = j.value("tuples", c.tuples);
    c.algebra = j.value("algebra", c.algebra);
    c.closure = j.value("closure", c.closure);
    c.output = j.value("output", c.output);
  } catch (const json::exception& e) {
    config_error(std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) { return from_json(read_file(path)); }

std::string RunConfig::to_json(int indent) const {
  json j;
  if (!chart.file.empty())
    j["chart"] = json{{"file", chart.file}};
  else
    j["chart"] = spec_to_json(chart.spec);
  j["points"] = points;
  j["sampler"] = json{{"count", sampler.count},
                      {"seed", sampler.seed ? json(*sampler.seed) : json(nullptr)},
                      {"margin", sampler.margin}};
  j["h"] = h;
  j["order"] = order;
  j["tolerance"] = tolerance ? json(*tolerance) : json(nullptr);
  j["tolerances"] = tolerances;
  j["identities"] = json{{"include", include}, {"exclude", exclude}};
  j["seed"] = seed;
  j["reading"] = reading == Reading::A ? "A" : "B";
  j["tuples"] = tuples;
  j["algebra"] = algebra;
  j["closure"] = closure;
  j["output"] = output;
  return j.dump(indent) + "\n";
}

void RunConfig::validate() const {
  if (!(h > 0)) config_error("h must be positive");
  if (order != 2 && order != 4) config_error("order must be 2 or 4");
  if (sampler.count < 1) config_error("sampler count must be at least 1");
  if (sampler.margin < 0) config_error("sampler margin must be non-negative");
  if (tuples < 1) config_error("tuples must be at least 1");
  if (tolerance && !(*tolerance > 0)) config_error("tolerance must be positive");
  for (const auto& list : {include, exclude})
    for (const std::string& id : list)
      if (!is_known_identity(id)) config_error("unknown identity id '" + id + "'");
  for (const auto& [id, t] : tolerances) {
    if (!is_known_identity(id)) config_error("unknown identity id '" + id + "' in tolerances");
    if (!(t > 0)) config_error("tolerance for '" + id + "' must be positive");
  }
  if (chart.file.empty() && chart.spec.name.empty()) config_error("no chart given");
}

std::set<std::string> RunConfig::selected_identities() const {
  std::set<std::string> out;
  if (include.empty())
    for (const IdentityInfo& info : identity_catalog()) out.insert(info.id);
  else
    out.insert(include.begin(), include.end());
  for (const std::string& id : exclude) out.erase(id);
  return out;
}

std::string config_hash(const RunConfig& config) {
  // The output path does not affect results.
  RunConfig c = config;
  c.output.clear();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : c.to_json(-1)) h = (h ^ ch) * 0x100000001B3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string report_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Chart load_chart(const ChartConfig& config) {
  if (!config.file.empty()) return load_chart_file(config.file);
  return builtin_chart(config.spec);
}

std::vector<Vector> run_points(const Chart& chart, const RunConfig& config) {
  const int d = chart.dim();
  std::vector<Vector> out;
  if (!config.points.empty()) {
    for (const std::vector<double>& p : config.points) {
      if (static_cast<int>(p.size()) != d)
        config_error("point has " + std::to_string(p.size()) + " coordinates, chart needs " + std::to_string(d));
      out.push_back(Eigen::Map<const Vector>(p.data(), d));
    }
    return out;
  }
  out.push_back(chart.center());
  Rng rng = Rng(config.sampler.seed.value_or(config.seed)).split("points");
  for (int k = 1; k < config.sampler.count; ++k) {
    Vector x(d);
    for (int i = 0; i < d; ++i) {
      const double lo = chart.lower[i] + config.sampler.margin, hi = chart.upper[i] - config.sampler.margin;
      if (!(lo < hi)) config_error("sampler margin leaves an empty box");
      x(i) = rng.uniform(lo, hi);
    }
    out.push_back(x);
  }
  return out;
}

CheckResult run_check(const RunConfig& config) {
  config.validate();
  CheckResult res;
  IdentityReport& rep = res.report;
  rep.metadata.version = version;
  rep.metadata.timestamp = report_timestamp();
  rep.metadata.config_hash = config_hash(config);
  rep.metadata.header = default_report_header();

  const Chart chart = load_chart(config.chart);
  const std::vector<Vector> points = run_points(chart, config);
  SuiteOptions o;
  o.seed = config.seed;
  o.tuples = config.tuples;
  o.tolerance = config.tolerance;
  o.tolerances = config.tolerances;
  o.identities = config.selected_identities();
  o.reading = config.reading;
  o.chart_label = chart.name;

  auto violation = [&](const Error& e) {
    rep.metadata.hypothesis_violations.push_back(e.what());
    res.messages.push_back(e.what());
  };

  JetOptions jo;
  jo.h = config.h;
  jo.order = config.order;
  std::vector<JetPoint> jets;
  for (const Vector& x : points) {
    jets.push_back(jet(chart, x, jo));
    const JetPoint& j = jets.back();
    for (auto group : {preliminary_residuals, lemma_residuals, section3_residuals}) {
      try {
        rep.merge(group(j, j.nu, o));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::HypothesisViolated) throw;
        violation(e);
      }
    }
  }
  try {
    rep.merge(einstein_vs_holomorphic(jets, o));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::HypothesisViolated) throw;
    violation(e);
  }
  if (o.identities.count("thm_1")) {
    if (chart.dim() < 8) {
      rep.metadata.skipped.push_back("thm_1: requires n >= 4");
    } else {
      try {
        rep.merge(theorem1_instance_check(chart, points, config.h, o));
      } catch (const ReportError& e) {
        rep.merge(e.report());
        res.messages.push_back(e.what());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::HypothesisViolated) throw;
        violation(e);
      }
    }
  }
  if (config.algebra || config.closure) {
    IdentityReport alg;
    if (config.algebra) alg.merge(algebra_checks(random_algebra_instance(chart.n, config.seed), o));
    if (config.closure && chart.n >= 2) alg.merge(bianchi_closure_checks(chart.n, o));
    for (ReportEntry& e : alg.entries)
      if (o.identities.count(e.identity_id)) rep.entries.push_back(std::move(e));
  }
  rep.sort();
  if (!rep.passed())
    res.exit_code = ExitFail;
  else if (!rep.metadata.hypothesis_violations.empty())
    res.exit_code = ExitHypothesis;
  return res;
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) config_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) config_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    config_error("cannot move report into '" + path + "': " + ec.message());
  }
}

}  // namespace curvlab
