// blc: command-line front end for the Brascamp-Lieb toolkit.
//
// Every subcommand reads an optional JSON config (--config) whose keys are
// the long option names with '-' replaced by '_'; options given on the
// command line override the config.  Exit codes:
//   0  success (converged or boundary plateau, all checks passed)
//   1  input or runtime error
//   2  compute: the optimiser diverged
//   3  compute: undetermined (iteration cap reached or multistart disagreement)
//   4  certify: at least one certificate trace failed

#include "blc/finiteness.hpp"
#include "blc/frames.hpp"
#include "blc/gauss_opt.hpp"
#include "blc/io.hpp"
#include "blc/kakeya.hpp"
#include "blc/nonlinear.hpp"
#include "blc/stability.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <variant>

namespace {

using blc::io::Json;
namespace fs = std::filesystem;

constexpr int kExitError = 1;
constexpr int kExitDiverging = 2;
constexpr int kExitUndetermined = 3;
constexpr int kExitCheckFailed = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rectangular table of scalars and strings.
struct ResultTable {
  using Cell = std::variant<long long, double, std::string>;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("ragged result row");
    rows.push_back(std::move(row));
  }

  static std::string text(const Cell& c) {
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) return blc::io::format_number(*d);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }

  std::string csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << text(r[i]);
      out << "\n";
    }
    return out.str();
  }

  Json json() const {
    Json rs = Json::array();
    for (const auto& r : rows) {
      Json row = Json::array();
      for (const auto& c : r) std::visit([&](const auto& v) { row.push_back(number_or_text(v)); }, c);
      rs.push_back(row);
    }
    return {{"columns", columns}, {"rows", rs}};
  }

 private:
  template <typename T>
  static Json number_or_text(const T& v) {
    if constexpr (std::is_same_v<T, double>)
      if (!std::isfinite(v)) return blc::io::format_number(v);
    return v;
  }
};

// JSON cannot hold inf/nan; they are written as strings.
Json num(double x) { return std::isfinite(x) ? Json(x) : Json(blc::io::format_number(x)); }

// Global settings shared by all subcommands.
struct Globals {
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
  double tol = 0.0;
  int max_iter = 0;
  bool seed_given = false;

  blc::NumericPolicy policy() const {
    blc::NumericPolicy p;
    if (tol > 0.0) p.conv_tol = tol;
    if (max_iter > 0) p.max_iter = max_iter;
    return p;
  }
};

// A subcommand's parameters: defaults, then config file, then flags.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& help)
      : app_(parent.add_subcommand(name, help)) {
    app_->add_option("--config", config_, "JSON config file");
  }

  CLI::App* app() const { return app_; }

  template <typename T>
  void option(const std::string& flag, T fallback, const std::string& help) {
    const std::string key = key_of(flag);
    params_[key] = fallback;
    auto holder = std::make_shared<T>(fallback);
    auto* opt = app_->add_option("--" + flag, *holder, help);
    overrides_.push_back([this, opt, holder, key] {
      if (opt->count() > 0) params_[key] = *holder;
    });
  }

  // A parameter settable from the config file only.
  void config_key(const std::string& key, Json fallback) { params_[key] = std::move(fallback); }

  // Merges config and flags; returns the resolved parameters.
  Json resolve() {
    base_dir_ = fs::current_path();
    if (!config_.empty()) {
      std::ifstream in(config_);
      if (!in) throw UsageError("cannot open config file '" + config_ + "'");
      Json cfg;
      try {
        cfg = Json::parse(in);
      } catch (const Json::exception& e) {
        throw UsageError("config '" + config_ + "': " + e.what());
      }
      if (!cfg.is_object()) throw UsageError("config must be a JSON object");
      for (const auto& [k, v] : cfg.items()) {
        if (!params_.contains(k)) throw UsageError("config: unknown key '" + k + "'");
        params_[k] = v;
      }
      base_dir_ = fs::absolute(config_).parent_path();
      from_config_ = cfg;
    }
    for (auto& f : overrides_) f();
    return params_;
  }

  // Datum given as a path (relative to the config file when it came from
  // there) or as an inline JSON object.
  blc::BLDatum datum(const Json& p) const {
    const Json& ref = p.at("datum");
    if (ref.is_object()) return blc::io::datum_from_json(ref);
    if (!ref.is_string() || ref.get<std::string>().empty()) throw UsageError("a datum is required (--datum)");
    fs::path path = ref.get<std::string>();
    const bool from_cfg = from_config_.contains("datum") && from_config_["datum"] == ref;
    if (from_cfg && path.is_relative()) path = base_dir_ / path;
    return blc::io::load_datum(path.string());
  }

  bool given_in_config(const std::string& key) const { return from_config_.contains(key); }

 private:
  static std::string key_of(std::string flag) {
    for (char& c : flag)
      if (c == '-') c = '_';
    return flag;
  }

  CLI::App* app_;
  std::string config_;
  Json params_ = Json::object();
  Json from_config_ = Json::object();
  fs::path base_dir_;
  std::vector<std::function<void()>> overrides_;
};

std::uint64_t seed_of(const Globals& g, const Command& c, const Json& p) {
  if (g.seed_given) return g.seed;
  if (c.given_in_config("seed")) return p.at("seed").get<std::uint64_t>();
  return g.seed;
}

void emit(const Globals& g, const Json& summary, const ResultTable* table) {
  std::string text;
  if (g.format == "csv") {
    if (table) {
      text = table->csv();
    } else {
      ResultTable kv;
      kv.columns = {"key", "value"};
      for (const auto& [k, v] : summary.items())
        kv.add({k, v.is_string() ? v.get<std::string>() : v.dump()});
      text = kv.csv();
    }
  } else {
    Json doc = summary;
    if (table) doc["table"] = table->json();
    text = doc.dump(2) + "\n";
  }
  if (g.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(g.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + g.out + "'");
    f << text;
    if (g.format == "csv" && table) {
      std::ofstream s(g.out + ".summary.json", std::ios::binary);
      s << summary.dump(2) << "\n";
    }
  }
}

blc::LocalizationMode mode_of(const Json& p) {
  const std::string m = p.at("mode").get<std::string>();
  if (m == "global") return blc::LocalizationMode::global();
  if (m == "localized" || m == "unit_ball") return blc::LocalizationMode::unit_ball();
  if (m == "partial") {
    Json w = p.at("weight");
    if (w.is_string()) {
      if (w.get<std::string>().empty()) throw UsageError("partial mode needs --weight");
      w = Json::parse(w.get<std::string>());
    }
    return blc::LocalizationMode::partial(blc::io::matrix_from_json(w, "weight"));
  }
  throw UsageError("unknown mode '" + m + "' (global, localized, partial)");
}

Json input_json(const blc::GaussianInput& a) {
  Json blocks = Json::array();
  for (const auto& b : a.blocks) blocks.push_back(blc::io::matrix_to_json(b));
  return blocks;
}

int run_compute(const Globals& g, Command& c) {
  const Json p = c.resolve();
  const auto datum = c.datum(p);
  const auto mode = mode_of(p);
  const auto policy = g.policy();
  const int starts = p.at("starts").get<int>();
  Json summary{{"command", "compute"}, {"mode", mode.name()}};
  try {
    const auto r = starts > 1 ? blc::compute_bl_multistart(datum, mode, policy, starts, seed_of(g, c, p))
                              : blc::compute_bl(datum, mode, policy);
    summary["status"] = blc::to_string(r.status);
    summary["value"] = num(r.value);
    summary["log_value"] = num(r.log_value);
    summary["iterations"] = r.iterations;
    summary["grad_norm"] = num(r.grad_norm);
    summary["magnitude"] = num(r.magnitude);
    summary["final_input"] = input_json(r.final_input);
    emit(g, summary, nullptr);
    if (r.status == blc::OptimizerStatus::diverging) {
      std::cerr << "diverging after " << r.iterations << " iterations; input magnitude "
                << blc::io::format_number(r.magnitude) << " exceeded "
                << blc::io::format_number(policy.diverge_norm) << "\n";
      return kExitDiverging;
    }
    return 0;
  } catch (const blc::UndeterminedError& e) {
    summary["status"] = "undetermined";
    summary["reason"] = e.what();
    Json trace = Json::array();
    for (double v : e.trace()) trace.push_back(num(v));
    summary["log_trace"] = trace;
    emit(g, summary, nullptr);
    return kExitUndetermined;
  }
}

int run_finiteness(const Globals& g, Command& c) {
  const Json p = c.resolve();
  const auto datum = c.datum(p);
  const auto policy = g.policy();
  const int budget = p.at("budget").get<int>();
  const std::string m = p.at("mode").get<std::string>();
  blc::FinitenessReport rep;
  if (m == "global")
    rep = blc::search_critical_subspaces(datum, blc::FinitenessMode::global, budget, seed_of(g, c, p), policy);
  else if (m == "localized")
    rep = blc::search_critical_subspaces(datum, blc::FinitenessMode::localized, budget, seed_of(g, c, p), policy);
  else if (m == "partial")
    rep = blc::check_partial(datum,
                             blc::PartialLocalization::from_weight(mode_of(p).weight(datum.n()), policy),
                             budget, seed_of(g, c, p), policy);
  else
    throw UsageError("unknown mode '" + m + "' (global, localized, partial)");
  Json summary = blc::to_json(rep);
  summary["command"] = "finiteness";
  summary["mode"] = m;
  emit(g, summary, nullptr);
  return 0;
}

int run_stability(const Globals& g, Command& c) {
  const Json p = c.resolve();
  const auto datum = c.datum(p);
  blc::StabilityOptions opt;
  opt.samples = p.at("samples").get<int>();
  opt.ascent_starts = p.at("ascent_starts").get<int>();
  const auto rep = blc::stability_probe(datum, p.at("radius").get<double>(), seed_of(g, c, p), g.policy(), opt);
  ResultTable t;
  t.columns = {"sample", "norm", "value", "status"};
  for (const auto& s : rep.samples) t.add({static_cast<long long>(s.index), s.norm, s.value, s.status});
  Json sup = Json::array();
  for (const auto& b : rep.sup_perturbation) sup.push_back(blc::io::matrix_to_json(b));
  const Json summary{{"command", "stability"}, {"base_value", num(rep.base_value)},
                     {"radius", rep.radius},        {"min", num(rep.min)},
                     {"median", num(rep.median)},   {"max", num(rep.max)},
                     {"sup", num(rep.sup)},         {"sup_perturbation", sup},
                     {"nonfinite", rep.nonfinite},  {"samples", rep.samples.size()}};
  emit(g, summary, &t);
  return 0;
}

std::vector<blc::GaussianInput> inputs_of(const std::string& spec, const blc::BLDatum& datum,
                                          double spread, std::uint64_t seed) {
  if (spec == "identity") return {blc::GaussianInput::identity(datum)};
  const std::string prefix = "random:";
  if (spec.rfind(prefix, 0) == 0) {
    int count = 0;
    try {
      count = std::stoi(spec.substr(prefix.size()));
    } catch (const std::exception&) {
      count = 0;
    }
    if (count < 1) throw UsageError("--A random:<count> needs a positive count");
    const blc::Rng master(blc::derive_seed(seed, 0xA));
    std::vector<blc::GaussianInput> out;
    for (int i = 0; i < count; ++i) {
      blc::Rng rng = master.stream(static_cast<std::uint64_t>(i));
      out.push_back(blc::GaussianInput::random(datum, rng, spread));
    }
    return out;
  }
  throw UsageError("--A must be 'identity' or 'random:<count>'");
}

int run_certify(const Globals& g, Command& c) {
  const Json p = c.resolve();
  const auto datum = c.datum(p);
  const auto policy = g.policy();
  const std::uint64_t seed = seed_of(g, c, p);
  const int samples = p.at("samples").get<int>();
  const double alpha = p.at("alpha").get<double>();
  const std::string m = p.at("mode").get<std::string>();
  const auto inputs = inputs_of(p.at("A").get<std::string>(), datum, p.at("spread").get<double>(), seed);

  std::optional<blc::PartialLocalization> loc;
  blc::CEstimate est;
  if (m == "localized") {
    est = blc::estimate_c(datum, std::nullopt, 1.0, samples, seed);
  } else if (m == "partial") {
    loc = blc::PartialLocalization::from_weight(mode_of(p).weight(datum.n()), policy);
    est = blc::estimate_c_partial(datum, *loc, alpha, samples, seed);
  } else {
    throw UsageError("certify mode must be localized or partial");
  }

  ResultTable t;
  t.columns = {"input", "ok", "branch", "constant", "steps"};
  std::ostringstream traces;
  int passed = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto tr = loc ? blc::certify_partial(datum, *loc, inputs[i], alpha, est.c_hat,
                                               p.at("deltahat").get<double>(), policy)
                        : blc::certify_localized(datum, inputs[i], est.c_hat, policy);
    passed += tr.overall_ok;
    t.add({static_cast<long long>(i), std::string(tr.overall_ok ? "true" : "false"),
           tr.branch.empty() ? std::string("localized") : tr.branch, tr.constant_used,
           static_cast<long long>(tr.steps.size())});
    std::istringstream lines(tr.to_jsonl());
    for (std::string line; std::getline(lines, line);) {
      Json j = Json::parse(line);
      j["input"] = i;
      traces << j.dump() << "\n";
    }
  }
  const std::string trace_path = p.at("trace").get<std::string>();
  if (!trace_path.empty()) {
    std::ofstream f(trace_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + trace_path + "'");
    f << traces.str();
  }
  const Json summary{{"command", "certify"},       {"mode", m},
                     {"c_hat", num(est.c_hat)},     {"samples", est.samples},
                     {"sampler", est.sampler},      {"passed", passed},
                     {"total", inputs.size()}};
  emit(g, summary, &t);
  std::cerr << passed << "/" << inputs.size() << " traces ok\n";
  return passed == static_cast<int>(inputs.size()) ? 0 : kExitCheckFailed;
}

std::vector<int> counts_of(const Json& v, int m) {
  std::vector<int> counts;
  if (v.is_array()) {
    counts = v.get<std::vector<int>>();
  } else {
    std::stringstream ss(v.get<std::string>());
    for (std::string item; std::getline(ss, item, ',');) counts.push_back(std::stoi(item));
  }
  if (counts.size() == 1 && m > 1) counts.assign(static_cast<std::size_t>(m), counts.front());
  if (static_cast<int>(counts.size()) != m) throw UsageError("counts needs one entry per map");
  return counts;
}

std::vector<double> doubles_of(const Json& v) {
  if (v.is_array()) return v.get<std::vector<double>>();
  std::vector<double> out;
  std::stringstream ss(v.get<std::string>());
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stod(item));
  return out;
}

int run_kakeya(const Globals& g, Command& c) {
  const Json p = c.resolve();
  const auto datum = c.datum(p);
  const double delta = p.at("delta").get<double>(), nu = p.at("nu").get<double>();
  const auto counts = counts_of(p.at("counts"), datum.m());
  const blc::GridSpec grid{p.at("grid_res").get<int>()};
  const auto r = blc::measure_kappa(datum, delta, nu, p.at("trials").get<int>(), counts, grid,
                                    seed_of(g, c, p), g.policy());
  ResultTable t;
  t.columns = {"trial", "delta", "nu", "lhs", "ratio"};
  for (const auto& row : r.rows) t.add({static_cast<long long>(row.trial), row.delta, nu, row.lhs, row.ratio});
  const Json summary{{"command", "kakeya"},           {"delta", delta},
                     {"nu", nu},                      {"counts", counts},
                     {"grid_res", grid.resolution},   {"c_fine", num(r.c_fine)},
                     {"c_coarse", num(r.c_coarse)},   {"kappa_hat", num(r.kappa_hat)}};
  emit(g, summary, &t);
  return 0;
}

int run_nonlinear(const Globals& g, Command& c) {
  const Json p = c.resolve();
  const auto datum = c.datum(p);
  const auto policy = g.policy();
  const std::string family = p.at("family").get<std::string>();
  const double coefficient = p.at("coefficient").get<double>();
  // The quadratic family bends B_j along the first kernel direction k_j of
  // L_j: B_j(x) = L_j x + coefficient <k_j, x>^2 in every output coordinate.
  std::vector<blc::Submersion> b;
  for (const auto& m : datum.maps()) {
    if (family == "linear") {
      b.push_back(blc::Submersion::linear(m));
    } else if (family == "quadratic") {
      const blc::Matrix k = blc::kernel_basis(m, policy);
      blc::Matrix q = blc::Matrix::Zero(datum.n(), datum.n());
      if (k.cols() > 0) q = 2.0 * coefficient * k.col(0) * k.col(0).transpose();
      b.push_back(blc::Submersion::quadratic(m, std::vector<blc::Matrix>(
                                                    static_cast<std::size_t>(m.target_dim()), q)));
    } else {
      throw UsageError("family must be linear or quadratic");
    }
  }
  blc::SweepOptions opt;
  opt.draws = p.at("draws").get<int>();
  opt.grid = blc::GridSpec{p.at("grid_res").get<int>()};
  opt.smoothing_constant = p.at("smoothing").get<double>();
  const auto u = blc::Box::cube(datum.n(), p.at("half_width").get<double>());
  const auto r = blc::nonlinear_ratio_sweep(b, datum, u, doubles_of(p.at("deltas")), seed_of(g, c, p), opt);
  ResultTable t;
  t.columns = {"delta", "draw", "ratio"};
  for (const auto& row : r.rows) t.add({row.delta, static_cast<long long>(row.draw), row.ratio});
  Json maxima = Json::array();
  for (std::size_t k = 0; k < r.deltas.size(); ++k)
    maxima.push_back({{"delta", r.deltas[k]}, {"max_ratio", num(r.max_ratio[k])}});
  const Json summary{{"command", "nonlinear"},
                     {"family", family},
                     {"coefficient", coefficient},
                     {"half_width", p.at("half_width")},
                     {"smoothing_constant", r.smoothing_constant},
                     {"max_ratios", maxima},
                     {"slope", num(r.slope)}};
  emit(g, summary, &t);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brascamp-Lieb constants: computation, finiteness, stability and scale experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed (u64)");
  app.add_option("--out", g.out, "output path (default: stdout)");
  app.add_option("--format", g.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--tol", g.tol, "optimiser relative convergence tolerance");
  app.add_option("--max-iter", g.max_iter, "optimiser iteration cap");

  std::deque<Command> cmds;
  auto& compute = cmds.emplace_back(app, "compute", "maximise the Gaussian quotient");
  compute.option<std::string>("datum", "", "datum JSON file");
  compute.option<std::string>("mode", "global", "global, localized or partial");
  compute.option<std::string>("weight", "", "partial-mode weight G as JSON rows");
  compute.option<int>("starts", 1, "number of optimiser starts");

  auto& finite = cmds.emplace_back(app, "finiteness", "search for subspaces violating the finiteness conditions");
  finite.option<std::string>("datum", "", "datum JSON file");
  finite.option<std::string>("mode", "global", "global, localized or partial");
  finite.option<std::string>("weight", "", "partial-mode weight G as JSON rows");
  finite.option<int>("budget", 64, "random subspaces per dimension");
  finite.config_key("seed", 1);

  auto& stab = cmds.emplace_back(app, "stability", "probe the constant on a ball of perturbed maps");
  stab.option<std::string>("datum", "", "datum JSON file");
  stab.option<double>("radius", 0.05, "operator-norm radius");
  stab.option<int>("samples", 200, "number of perturbations");
  stab.option<int>("ascent-starts", 3, "gradient-ascent starts for the supremum");
  stab.config_key("seed", 1);

  auto& cert = cmds.emplace_back(app, "certify", "replay the localised determinant bound");
  cert.option<std::string>("datum", "", "datum JSON file");
  cert.option<std::string>("mode", "localized", "localized or partial");
  cert.option<std::string>("weight", "", "partial-mode weight G as JSON rows");
  cert.option<int>("samples", 1000, "frames used to estimate c");
  cert.option<std::string>("A", "random:100", "inputs: identity or random:<count>");
  cert.option<double>("spread", 2.0, "log-spread of random inputs");
  cert.option<double>("alpha", 0.5, "near-basis determinant floor (partial)");
  cert.option<double>("deltahat", 0.05, "small-eigenvalue threshold (partial)");
  cert.option<std::string>("trace", "", "write every trace step as JSON lines");
  cert.config_key("seed", 1);

  auto& kak = cmds.emplace_back(app, "kakeya", "tube-overlap ratios and the scale-induction factor");
  kak.option<std::string>("datum", "", "datum JSON file");
  kak.option<double>("delta", 0.01, "tube width");
  kak.option<double>("nu", 0.1, "direction spread");
  kak.option<std::string>("counts", "10", "tubes per family (comma list or one value)");
  kak.option<int>("grid-res", 400, "quadrature points per axis");
  kak.option<int>("trials", 20, "random configurations");
  kak.config_key("seed", 1);

  auto& nl = cmds.emplace_back(app, "nonlinear", "nonlinear ratio sweep over scales");
  nl.option<std::string>("datum", "", "datum JSON file");
  nl.option<std::string>("family", "quadratic", "linear or quadratic");
  nl.option<double>("coefficient", 0.2, "quadratic coefficient");
  nl.option<double>("half-width", 0.1, "U = [-w, w]^n");
  nl.option<std::string>("deltas", "0.125,0.0625,0.03125,0.015625", "comma-separated scales");
  nl.option<int>("draws", 8, "random inputs per scale");
  nl.option<int>("grid-res", 400, "quadrature points per axis of U");
  nl.option<double>("smoothing", 0.0, "c in P_{c delta}; 0 picks the sufficient constant");
  nl.config_key("seed", 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }
  g.seed_given = seed_opt->count() > 0;

  const std::map<std::string, std::function<int(Command&)>> handlers{
      {"compute", [&](Command& c) { return run_compute(g, c); }},
      {"finiteness", [&](Command& c) { return run_finiteness(g, c); }},
      {"stability", [&](Command& c) { return run_stability(g, c); }},
      {"certify", [&](Command& c) { return run_certify(g, c); }},
      {"kakeya", [&](Command& c) { return run_kakeya(g, c); }},
      {"nonlinear", [&](Command& c) { return run_nonlinear(g, c); }}};
  try {
    for (auto& c : cmds)
      if (c.app()->parsed()) return handlers.at(c.app()->get_name())(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
