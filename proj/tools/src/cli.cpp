#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "subdetect/adaptive.hpp"
#include "subdetect/detectors.hpp"
#include "subdetect/format.hpp"
#include "subdetect/harness.hpp"
#include "subdetect/lower_bound.hpp"
#include "subdetect/version.hpp"

namespace subdetect::cli {

namespace {

using nlohmann::json;

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 -> hardware default
  std::uint64_t cap = kDefaultEnumerationCap;
  std::string format;  // "csv" or "json"; empty -> subcommand default
  std::string out_path;

  int resolved_threads() const { return threads > 0 ? threads : default_threads(); }
};

struct ShapeOpts {
  int d1 = 0, d2 = 0, s1 = 1, s2 = 1;
  ProblemShape shape() const { return ProblemShape(d1, d2, s1, s2); }
};

void add_global(CLI::App& app, GlobalOpts& g) {
  app.add_option("--seed", g.seed, "Root seed for all randomness")
      ->envname("SUBDETECT_SEED");
  app.add_option("--threads", g.threads,
                 "Worker threads (never changes results; 0 = hardware)");
  app.add_option("--cap", g.cap, "Subset enumeration cap for the Bonferroni scans");
  app.add_option("--format", g.format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", g.out_path, "Write output to this file instead of stdout");
}

void add_shape(CLI::App& cmd, ShapeOpts& s, bool need_sparsity = true) {
  cmd.add_option("--d1", s.d1, "Rows of the observed matrix")->required();
  cmd.add_option("--d2", s.d2, "Columns of the observed matrix")->required();
  auto* o1 = cmd.add_option("--s1", s.s1, "Row sparsity of the planted block");
  auto* o2 = cmd.add_option("--s2", s.s2, "Column sparsity of the planted block");
  if (need_sparsity) {
    o1->required();
    o2->required();
  }
}

// Canonical key=value line for hashing; every resolved option in fixed order.
class ConfigCanon {
 public:
  explicit ConfigCanon(std::string subcommand) { add("cmd", std::move(subcommand)); }
  void add(const std::string& k, const std::string& v) { text_ += k + "=" + v + ";"; }
  void add(const std::string& k, double v) { add(k, format_double(v)); }
  void add(const std::string& k, std::uint64_t v) { add(k, std::to_string(v)); }
  void add(const std::string& k, int v) { add(k, std::to_string(v)); }
  void add_shape(const ShapeOpts& s) {
    add("d1", s.d1);
    add("d2", s.d2);
    add("s1", s.s1);
    add("s2", s.s2);
  }
  std::string hash() const { return hex64(fnv1a64(text_)); }

 private:
  std::string text_;
};

json meta_json(const ConfigCanon& canon, const GlobalOpts& g) {
  return json{{"config_hash", canon.hash()}, {"seed", g.seed}, {"version", kVersion}};
}

std::string csv_header(const std::string& schema, const ConfigCanon& canon,
                       const GlobalOpts& g) {
  std::string out = "# subdetect " + schema + " v1\n";
  out += "# config_hash=" + canon.hash() + " seed=" + std::to_string(g.seed) + " version=" +
         kVersion + "\n";
  return out;
}

void emit(const GlobalOpts& g, std::ostream& out, const std::string& text) {
  if (g.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(g.out_path, std::ios::binary);
  if (!file) throw std::invalid_argument("cannot open output file: " + g.out_path);
  file << text;
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::invalid_argument("cannot open input file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(file, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("bad numeric cell in matrix input: " + cell);
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("matrix input is empty");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw std::invalid_argument("ragged rows in matrix input");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (!std::isfinite(rows[i][j]))
        throw std::invalid_argument("matrix input contains a non-finite entry");
      m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
  }
  return m;
}

json shape_json(const ProblemShape& s) {
  return json{{"d1", s.d1}, {"d2", s.d2}, {"s1", s.s1}, {"s2", s.s2}};
}

// ---------------------------------------------------------------- rate

struct RateCmd {
  ShapeOpts shape;
};

int run_rate(const RateCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  RateBreakdown b = rate_breakdown(cmd.shape.shape());
  ConfigCanon canon("rate");
  canon.add_shape(cmd.shape);
  if (g.format == "csv") {
    std::string text = csv_header("rate", canon, g);
    text +=
        "d1,d2,s1,s2,psi12,psi21,phi12,phi21,beta12,beta21,rate,rate_tilde,regime\n";
    text += std::to_string(b.shape.d1) + "," + std::to_string(b.shape.d2) + "," +
            std::to_string(b.shape.s1) + "," + std::to_string(b.shape.s2) + "," +
            format_double(b.psi12) + "," + format_double(b.psi21) + "," +
            format_double(b.phi12) + "," + format_double(b.phi21) + "," +
            format_double(b.beta12) + "," + format_double(b.beta21) + "," +
            format_double(b.rate) + "," + format_double(b.rate_tilde) + "," +
            std::string(regime_name(b.regime)) + "\n";
    emit(g, out, text);
  } else {
    json j{{"meta", meta_json(canon, g)},
           {"shape", shape_json(b.shape)},
           {"psi12", b.psi12},
           {"psi21", b.psi21},
           {"phi12", b.phi12},
           {"phi21", b.phi21},
           {"beta12", b.beta12},
           {"beta21", b.beta21},
           {"rate", b.rate},
           {"rate_tilde", b.rate_tilde},
           {"regime", std::string(regime_name(b.regime))},
           {"dispatched", std::string(detector_name(dispatch_constituent(b.shape, b)))}};
    emit(g, out, j.dump(2) + "\n");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- detect

struct DetectCmd {
  ShapeOpts shape;
  std::string input;
  double mu = -1.0;
  double mu_multiple = -1.0;
  std::string detector = "star";
  bool adaptive = false;
  std::string cutoff_mode = "theoretical";
  double level = 0.1;
  std::uint64_t reps = 10000;
};

int run_detect(const DetectCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  ProblemShape shape = cmd.shape.shape();
  ConfigCanon canon("detect");
  canon.add_shape(cmd.shape);
  canon.add("input", cmd.input);
  canon.add("mu", cmd.mu);
  canon.add("mu_multiple", cmd.mu_multiple);
  canon.add("detector", cmd.adaptive ? "ada" : cmd.detector);
  canon.add("cutoff_mode", cmd.cutoff_mode);
  canon.add("level", cmd.level);
  canon.add("reps", cmd.reps);

  // observation: from file, or generated from the seed
  Matrix y(0, 0);
  if (!cmd.input.empty()) {
    y = read_matrix_csv(cmd.input);
    if (y.rows() != shape.d1 || y.cols() != shape.d2)
      throw std::invalid_argument("input matrix does not match --d1/--d2");
  } else {
    RateBreakdown rb = rate_breakdown(shape);
    double mu = 0.0;
    if (cmd.mu >= 0.0) mu = cmd.mu;
    if (cmd.mu_multiple >= 0.0) mu = cmd.mu_multiple * std::sqrt(rb.rate);
    std::optional<PlantedMean> mean;
    if (mu > 0.0) {
      std::vector<int> rows(shape.s1), cols(shape.s2);
      for (int i = 0; i < shape.s1; ++i) rows[i] = i;
      for (int j = 0; j < shape.s2; ++j) cols[j] = j;
      mean = make_planted_mean(shape, rows, cols, mu);
    }
    y = sample_observation(shape, mean, SeedSpec{g.seed, 0}).values;
  }

  CutoffRequest cut = cmd.cutoff_mode == "calibrated"
                          ? CutoffRequest::calibrated(cmd.level, cmd.reps, SeedSpec{g.seed, 0})
                          : CutoffRequest::theoretical();

  json j{{"meta", meta_json(canon, g)}, {"shape", shape_json(shape)}};
  if (cmd.adaptive) {
    PreparedDetector det = prepare_detector(DetectorChoice::ada(), shape, cut, g.cap,
                                            g.resolved_threads());
    AdaOutcome o = delta_star_ada(y, *det.ada, g.cap);
    j["adaptive"] = true;
    j["reject"] = o.reject;
    j["points_evaluated"] = o.points_evaluated;
    j["work_count"] = o.work_count;
    if (o.first_reject) {
      j["first_reject"] = json{{"s1", o.first_reject->s1},
                               {"s2", o.first_reject->s2},
                               {"detector", std::string(detector_name(o.first_reject->kind))}};
      j["statistic"] = o.statistic;
      j["cutoff"] = o.cutoff;
    }
  } else {
    DetectorChoice choice = cmd.detector == "star"
                                ? DetectorChoice::star()
                                : DetectorChoice::constituent(detector_from_name(cmd.detector));
    PreparedDetector det =
        prepare_detector(choice, shape, cut, g.cap, g.resolved_threads());
    DetectorKind kind = choice.type == DetectorChoice::Type::kStar
                            ? dispatch_constituent(shape, *det.rates)
                            : choice.kind;
    TestOutcome o = evaluate_detector(det.specs.at(kind), y, g.cap);
    j["adaptive"] = false;
    j["detector"] = std::string(detector_name(o.kind));
    if (choice.type == DetectorChoice::Type::kStar)
      j["regime"] = std::string(regime_name(det.rates->regime));
    j["statistic"] = o.statistic;
    j["cutoff"] = o.cutoff;
    j["reject"] = o.reject;
    j["work_count"] = o.work_count;
    if (o.argmax_subset) j["argmax_subset"] = *o.argmax_subset;
  }
  emit(g, out, j.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateCmd {
  ShapeOpts shape;
  double level = 0.1;
  std::uint64_t reps = 10000;
};

int run_calibrate(const CalibrateCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  ProblemShape shape = cmd.shape.shape();
  ConfigCanon canon("calibrate");
  canon.add_shape(cmd.shape);
  canon.add("level", cmd.level);
  canon.add("reps", cmd.reps);

  // calibrate every constituent whose scan is feasible under the cap
  std::vector<DetectorKind> feasible;
  std::vector<DetectorKind> capped;
  for (DetectorKind kind : kAllDetectorKinds) {
    if (is_bonferroni(kind) && is_truncated(kind)) {
      int d = detector_axis(kind) == Axis::kOne ? shape.d1 : shape.d2;
      int s = detector_axis(kind) == Axis::kOne ? shape.s1 : shape.s2;
      if (binom_exceeds(d, s, g.cap)) {
        capped.push_back(kind);
        continue;
      }
    }
    feasible.push_back(kind);
  }
  auto cutoffs = calibrate_cutoffs(feasible, shape, cmd.level, cmd.reps, SeedSpec{g.seed, 0},
                                   g.cap, g.resolved_threads());
  auto specs = theoretical_cutoffs(shape);

  if (g.format == "json") {
    json rows = json::array();
    for (DetectorKind kind : feasible) {
      const auto& spec = specs.at(kind);
      json r{{"detector", std::string(detector_name(kind))},
             {"cutoff", cutoffs.at(kind)},
             {"level", cmd.level},
             {"reps", cmd.reps}};
      if (spec.tau) {
        r["tau"] = spec.tau->tau;
        r["nu"] = spec.tau->nu;
      }
      rows.push_back(r);
    }
    for (DetectorKind kind : capped)
      rows.push_back(json{{"detector", std::string(detector_name(kind))},
                          {"note", "enumeration-cap"}});
    emit(g, out,
         json{{"meta", meta_json(canon, g)}, {"shape", shape_json(shape)}, {"cutoffs", rows}}
                 .dump(2) +
             "\n");
  } else {
    std::string text = csv_header("calibrate", canon, g);
    text += "detector,tau,nu,cutoff,level,reps,note\n";
    for (DetectorKind kind : feasible) {
      const auto& spec = specs.at(kind);
      text += std::string(detector_name(kind)) + ",";
      text += (spec.tau ? format_double(spec.tau->tau) : "") + ",";
      text += (spec.tau ? format_double(spec.tau->nu) : "") + ",";
      text += format_double(cutoffs.at(kind)) + "," + format_double(cmd.level) + "," +
              std::to_string(cmd.reps) + ",\n";
    }
    for (DetectorKind kind : capped)
      text += std::string(detector_name(kind)) + ",,,,,," + "enumeration-cap\n";
    emit(g, out, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- risk

struct RiskCmd {
  ShapeOpts shape;
  double mu = -1.0;
  double mu_multiple = -1.0;
  std::string detector = "star";
  bool adaptive = false;
  std::string cutoff_mode = "calibrated";
  double level = 0.1;
  std::uint64_t calib_reps = 10000;
  std::uint64_t reps = 2000;
  std::string support = "canonical";
};

int run_risk(const RiskCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  ProblemShape shape = cmd.shape.shape();
  RateBreakdown rb = rate_breakdown(shape);
  if (cmd.mu < 0.0 && cmd.mu_multiple < 0.0)
    throw std::invalid_argument("risk: provide --mu or --mu-multiple");
  double mu = cmd.mu >= 0.0 ? cmd.mu : cmd.mu_multiple * std::sqrt(rb.rate);

  ConfigCanon canon("risk");
  canon.add_shape(cmd.shape);
  canon.add("mu", mu);
  canon.add("detector", cmd.adaptive ? "ada" : cmd.detector);
  canon.add("cutoff_mode", cmd.cutoff_mode);
  canon.add("level", cmd.level);
  canon.add("calib_reps", cmd.calib_reps);
  canon.add("reps", cmd.reps);
  canon.add("support", cmd.support);

  DetectorChoice choice =
      cmd.adaptive ? DetectorChoice::ada()
                   : (cmd.detector == "star"
                          ? DetectorChoice::star()
                          : DetectorChoice::constituent(detector_from_name(cmd.detector)));
  CutoffRequest cut =
      cmd.cutoff_mode == "calibrated"
          ? CutoffRequest::calibrated(cmd.level, cmd.calib_reps, SeedSpec{g.seed, 0})
          : CutoffRequest::theoretical();
  PreparedDetector det = prepare_detector(choice, shape, cut, g.cap, g.resolved_threads());
  SupportPolicy policy = cmd.support == "random" ? SupportPolicy::kUniformRandom
                                                 : SupportPolicy::kCanonical;
  RiskEstimate risk =
      estimate_risk(det, mu, cmd.reps, SeedSpec{g.seed, 1}, policy, g.resolved_threads());

  if (g.format == "csv") {
    std::string text = csv_header("risk", canon, g);
    text += "detector,mu,type_i,type_i_se,type_ii,type_ii_se,risk,reps\n";
    text += risk.detector + "," + format_double(mu) + "," + format_double(risk.type_i) + "," +
            format_double(risk.type_i_se) + "," + format_double(risk.type_ii) + "," +
            format_double(risk.type_ii_se) + "," + format_double(risk.risk) + "," +
            std::to_string(risk.n_reps) + "\n";
    emit(g, out, text);
  } else {
    json j{{"meta", meta_json(canon, g)},
           {"shape", shape_json(shape)},
           {"detector", risk.detector},
           {"mu", mu},
           {"rate", rb.rate},
           {"regime", std::string(regime_name(rb.regime))},
           {"type_i", risk.type_i},
           {"type_i_se", risk.type_i_se},
           {"type_ii", risk.type_ii},
           {"type_ii_se", risk.type_ii_se},
           {"risk", risk.risk},
           {"reps", risk.n_reps}};
    emit(g, out, j.dump(2) + "\n");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepCmd {
  ShapeOpts shape;
  std::string multiples = "0,0.5,1,2,4,8,16";
  std::string detector = "star";
  bool adaptive = false;
  std::string cutoff_mode = "calibrated";
  double level = 0.1;
  std::uint64_t calib_reps = 10000;
  std::uint64_t reps = 2000;
  double eta = 0.2;
  std::string svg_path;
  std::string support = "canonical";
};

std::vector<double> parse_multiples(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad multiple: " + cell);
    }
  }
  if (out.empty()) throw std::invalid_argument("empty multiples list");
  return out;
}

std::string sweep_svg(const SweepResult& sweep) {
  // minimal polyline render of risk vs multiple; the CSV is the contract
  const int w = 640, h = 400, mL = 60, mB = 40, mT = 20, mR = 20;
  double xmax = sweep.points.back().multiple;
  if (xmax <= 0) xmax = 1;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
                    "\" height=\"" + std::to_string(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto X = [&](double m) { return mL + (w - mL - mR) * (m / xmax); };
  auto Y = [&](double r) { return h - mB - (h - mT - mB) * (r / 2.0); };
  svg += "<line x1=\"" + std::to_string(mL) + "\" y1=\"" + std::to_string(h - mB) + "\" x2=\"" +
         std::to_string(w - mR) + "\" y2=\"" + std::to_string(h - mB) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(mL) + "\" y1=\"" + std::to_string(mT) + "\" x2=\"" +
         std::to_string(mL) + "\" y2=\"" + std::to_string(h - mB) + "\" stroke=\"black\"/>\n";
  std::string pts;
  for (const auto& p : sweep.points)
    pts += std::to_string(X(p.multiple)) + "," + std::to_string(Y(p.risk.risk)) + " ";
  svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" + pts +
         "\"/>\n";
  svg += "<text x=\"" + std::to_string(w / 2) + "\" y=\"" + std::to_string(h - 8) +
         "\" text-anchor=\"middle\">multiple of sqrt(rate)</text>\n";
  svg += "<text x=\"15\" y=\"" + std::to_string(h / 2) +
         "\" transform=\"rotate(-90 15 " + std::to_string(h / 2) +
         ")\" text-anchor=\"middle\">risk</text>\n";
  svg += "</svg>\n";
  return svg;
}

int run_sweep(const SweepCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  ProblemShape shape = cmd.shape.shape();
  auto multiples = parse_multiples(cmd.multiples);

  ConfigCanon canon("sweep");
  canon.add_shape(cmd.shape);
  canon.add("multiples", cmd.multiples);
  canon.add("detector", cmd.adaptive ? "ada" : cmd.detector);
  canon.add("cutoff_mode", cmd.cutoff_mode);
  canon.add("level", cmd.level);
  canon.add("calib_reps", cmd.calib_reps);
  canon.add("reps", cmd.reps);
  canon.add("eta", cmd.eta);
  canon.add("support", cmd.support);

  DetectorChoice choice =
      cmd.adaptive ? DetectorChoice::ada()
                   : (cmd.detector == "star"
                          ? DetectorChoice::star()
                          : DetectorChoice::constituent(detector_from_name(cmd.detector)));
  CutoffRequest cut =
      cmd.cutoff_mode == "calibrated"
          ? CutoffRequest::calibrated(cmd.level, cmd.calib_reps, SeedSpec{g.seed, 0})
          : CutoffRequest::theoretical();
  PreparedDetector det = prepare_detector(choice, shape, cut, g.cap, g.resolved_threads());
  SupportPolicy policy = cmd.support == "random" ? SupportPolicy::kUniformRandom
                                                 : SupportPolicy::kCanonical;
  SweepResult sweep = mu_sweep(det, multiples, cmd.reps, SeedSpec{g.seed, 1}, cmd.eta, policy,
                               g.resolved_threads());

  if (g.format == "json") {
    json pts = json::array();
    for (const auto& p : sweep.points)
      pts.push_back(json{{"multiple", p.multiple},
                         {"mu", p.mu},
                         {"type_i", p.risk.type_i},
                         {"type_i_se", p.risk.type_i_se},
                         {"type_ii", p.risk.type_ii},
                         {"type_ii_se", p.risk.type_ii_se},
                         {"risk", p.risk.risk},
                         {"reps", p.risk.n_reps}});
    json j{{"meta", meta_json(canon, g)},
           {"shape", shape_json(shape)},
           {"detector", det.label},
           {"rate", sweep.rate},
           {"eta", sweep.eta},
           {"points", pts}};
    if (sweep.largest_risky_multiple) j["largest_risky_multiple"] = *sweep.largest_risky_multiple;
    if (sweep.smallest_safe_multiple) j["smallest_safe_multiple"] = *sweep.smallest_safe_multiple;
    emit(g, out, j.dump(2) + "\n");
  } else {
    std::string text = csv_header("sweep", canon, g);
    text += "multiple,mu,type_i,type_i_se,type_ii,type_ii_se,risk,reps\n";
    for (const auto& p : sweep.points)
      text += format_double(p.multiple) + "," + format_double(p.mu) + "," +
              format_double(p.risk.type_i) + "," + format_double(p.risk.type_i_se) + "," +
              format_double(p.risk.type_ii) + "," + format_double(p.risk.type_ii_se) + "," +
              format_double(p.risk.risk) + "," + std::to_string(p.risk.n_reps) + "\n";
    text += "# rate=" + format_double(sweep.rate) + " eta=" + format_double(sweep.eta) + "\n";
    if (sweep.largest_risky_multiple)
      text += "# largest_risky_multiple=" + format_double(*sweep.largest_risky_multiple) + "\n";
    if (sweep.smallest_safe_multiple)
      text += "# smallest_safe_multiple=" + format_double(*sweep.smallest_safe_multiple) + "\n";
    emit(g, out, text);
  }
  if (!cmd.svg_path.empty()) {
    std::ofstream svg(cmd.svg_path, std::ios::binary);
    if (!svg) throw std::invalid_argument("cannot open svg output: " + cmd.svg_path);
    svg << sweep_svg(sweep);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- lower-bound

struct LowerBoundCmd {
  ShapeOpts shape;
  double mu = 0.0;
  std::string method = "exact";
  std::uint64_t reps = 100000;
};

int run_lower_bound(const LowerBoundCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  ProblemShape shape = cmd.shape.shape();
  ConfigCanon canon("lower-bound");
  canon.add_shape(cmd.shape);
  canon.add("mu", cmd.mu);
  canon.add("method", cmd.method);
  canon.add("reps", cmd.reps);

  SecondMomentReport rep;
  if (cmd.method == "exact")
    rep = second_moment_exact(shape, cmd.mu);
  else if (cmd.method == "binom")
    rep = second_moment_binom_bound(shape, cmd.mu);
  else if (cmd.method == "mc-likelihood")
    rep = mc_second_moment_likelihood_report(shape, cmd.mu, cmd.reps, SeedSpec{g.seed, 0},
                                             g.cap, g.resolved_threads());
  else if (cmd.method == "mc-overlap")
    rep = mc_second_moment_overlap_report(shape, cmd.mu, cmd.reps, SeedSpec{g.seed, 0});
  else
    throw std::invalid_argument("unknown method: " + cmd.method);

  json j{{"meta", meta_json(canon, g)},
         {"shape", shape_json(shape)},
         {"mu", rep.mu},
         {"method", sm_method_name(rep.method)},
         {"second_moment", rep.second_moment},
         {"log_second_moment", rep.log_second_moment},
         {"tv_upper_bound", rep.tv_upper_bound},
         {"risk_lower_bound", rep.risk_lower_bound}};
  if (rep.n_reps > 0) {
    j["se"] = rep.se;
    j["reps"] = rep.n_reps;
  }
  emit(g, out, j.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- study

struct StudyCmd {
  std::string study;
};

int run_study(const StudyCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  StudyKind kind;
  if (cmd.study == "cor1")
    kind = StudyKind::kCor1Match;
  else if (cmd.study == "prop3")
    kind = StudyKind::kProp3Trend;
  else if (cmd.study == "s1eq1")
    kind = StudyKind::kS1Eq1Table;
  else
    throw std::invalid_argument("unknown study: " + cmd.study);

  StudyResult res = rate_comparison_study(kind);
  ConfigCanon canon("study");
  canon.add("study", cmd.study);

  if (g.format == "json") {
    json rows = json::array();
    for (const auto& r : res.rows) {
      json jr{{"shape", shape_json(r.shape)}, {"conforming", r.conforming},
              {"rate", r.rate},           {"reference_rate", r.reference_rate},
              {"ratio", r.ratio},         {"regime", std::string(regime_name(r.regime))},
              {"match", r.match}};
      if (!r.expected.empty()) {
        jr["expected"] = r.expected;
        jr["actual"] = r.actual;
      }
      rows.push_back(jr);
    }
    emit(g, out,
         json{{"meta", meta_json(canon, g)},
              {"study", cmd.study},
              {"pass", res.pass},
              {"verdict", res.verdict},
              {"rows", rows}}
                 .dump(2) +
             "\n");
  } else {
    std::string text = csv_header("study-" + cmd.study, canon, g);
    text += "d1,d2,s1,s2,conforming,rate,reference_rate,ratio,regime,expected,actual,match\n";
    for (const auto& r : res.rows)
      text += std::to_string(r.shape.d1) + "," + std::to_string(r.shape.d2) + "," +
              std::to_string(r.shape.s1) + "," + std::to_string(r.shape.s2) + "," +
              (r.conforming ? "1" : "0") + "," + format_double(r.rate) + "," +
              format_double(r.reference_rate) + "," + format_double(r.ratio) + "," +
              std::string(regime_name(r.regime)) + "," + r.expected + "," + r.actual + "," +
              (r.match ? "1" : "0") + "\n";
    text += "# pass=" + std::string(res.pass ? "1" : "0") + " verdict=" + res.verdict + "\n";
    emit(g, out, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- phase

struct PhaseCmd {
  ShapeOpts shape;  // s1/s2 ignored; grid spans the dyadic points
  double multiple = 4.0;
  std::string cutoff_mode = "calibrated";
  double level = 0.1;
  std::uint64_t calib_reps = 4000;
  std::uint64_t reps = 500;
};

int run_phase(const PhaseCmd& cmd, const GlobalOpts& g, std::ostream& out) {
  ConfigCanon canon("phase");
  canon.add("d1", cmd.shape.d1);
  canon.add("d2", cmd.shape.d2);
  canon.add("multiple", cmd.multiple);
  canon.add("cutoff_mode", cmd.cutoff_mode);
  canon.add("level", cmd.level);
  canon.add("calib_reps", cmd.calib_reps);
  canon.add("reps", cmd.reps);

  std::string text = csv_header("phase", canon, g);
  text += "s1,s2,rate,regime,detector,mu,type_i,type_ii,risk,reps,note\n";
  for (int s1 : dyadic_points(cmd.shape.d1))
    for (int s2 : dyadic_points(cmd.shape.d2)) {
      ProblemShape shape(cmd.shape.d1, cmd.shape.d2, s1, s2);
      RateBreakdown rb = rate_breakdown(shape);
      double mu = cmd.multiple * std::sqrt(rb.rate);
      std::string row = std::to_string(s1) + "," + std::to_string(s2) + "," +
                        format_double(rb.rate) + "," + std::string(regime_name(rb.regime)) +
                        ",";
      try {
        CutoffRequest cut = cmd.cutoff_mode == "calibrated"
                                ? CutoffRequest::calibrated(cmd.level, cmd.calib_reps,
                                                            SeedSpec{g.seed, 0})
                                : CutoffRequest::theoretical();
        PreparedDetector det = prepare_detector(DetectorChoice::star(), shape, cut, g.cap,
                                                g.resolved_threads());
        RiskEstimate risk = estimate_risk(det, mu, cmd.reps, SeedSpec{g.seed, 1},
                                          SupportPolicy::kCanonical, g.resolved_threads());
        row += risk.detector + "," + format_double(mu) + "," + format_double(risk.type_i) +
               "," + format_double(risk.type_ii) + "," + format_double(risk.risk) + "," +
               std::to_string(risk.n_reps) + ",";
      } catch (const enumeration_cap_error&) {
        row += ",,,,," + std::string("enumeration-cap");
      }
      text += row + "\n";
    }
  emit(g, out, text);
  return kExitOk;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimax-optimal planted-submatrix detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(false);
  app.set_config("--config", "", "Key=value config file; command-line flags win")
      ->configurable(false);

  GlobalOpts g;
  add_global(app, g);

  RateCmd rate_cmd;
  auto* rate = app.add_subcommand("rate", "Minimax rate terms and dispatch regime");
  rate->fallthrough();
  add_shape(*rate, rate_cmd.shape);

  DetectCmd detect_cmd;
  auto* detect = app.add_subcommand("detect", "Run a test on one observation");
  detect->fallthrough();
  add_shape(*detect, detect_cmd.shape);
  detect->add_option("--input", detect_cmd.input, "CSV matrix to test (else sampled from seed)");
  detect->add_option("--mu", detect_cmd.mu, "Signal strength for the sampled observation")
      ->check(CLI::NonNegativeNumber);
  detect->add_option("--mu-multiple", detect_cmd.mu_multiple,
                     "Signal as a multiple of sqrt(rate)")
      ->check(CLI::NonNegativeNumber);
  detect->add_option("--detector", detect_cmd.detector,
                     "star or a constituent statistic name");
  detect->add_flag("--adaptive", detect_cmd.adaptive, "Run the sparsity-agnostic test");
  detect->add_option("--cutoff-mode", detect_cmd.cutoff_mode, "theoretical or calibrated")
      ->check(CLI::IsMember({"theoretical", "calibrated"}));
  detect->add_option("--level", detect_cmd.level, "Calibration level");
  detect->add_option("--reps", detect_cmd.reps, "Calibration replicates");

  CalibrateCmd calibrate_cmd;
  auto* calibrate = app.add_subcommand("calibrate", "Null-quantile cutoffs per constituent");
  calibrate->fallthrough();
  add_shape(*calibrate, calibrate_cmd.shape);
  calibrate->add_option("--level", calibrate_cmd.level, "Target type-I level");
  calibrate->add_option("--reps", calibrate_cmd.reps, "Null replicates");

  RiskCmd risk_cmd;
  auto* risk = app.add_subcommand("risk", "Monte Carlo type-I/type-II risk");
  risk->fallthrough();
  add_shape(*risk, risk_cmd.shape);
  risk->add_option("--mu", risk_cmd.mu, "Signal strength")->check(CLI::NonNegativeNumber);
  risk->add_option("--mu-multiple", risk_cmd.mu_multiple, "Signal as a multiple of sqrt(rate)")
      ->check(CLI::NonNegativeNumber);
  risk->add_option("--detector", risk_cmd.detector, "star or a constituent name");
  risk->add_flag("--adaptive", risk_cmd.adaptive, "Use the sparsity-agnostic test");
  risk->add_option("--cutoff-mode", risk_cmd.cutoff_mode, "theoretical or calibrated")
      ->check(CLI::IsMember({"theoretical", "calibrated"}));
  risk->add_option("--level", risk_cmd.level, "Calibration level");
  risk->add_option("--calib-reps", risk_cmd.calib_reps, "Calibration replicates");
  risk->add_option("--reps", risk_cmd.reps, "Risk replicates");
  risk->add_option("--support-policy", risk_cmd.support, "canonical or random")
      ->check(CLI::IsMember({"canonical", "random"}));

  SweepCmd sweep_cmd;
  auto* sweep = app.add_subcommand("sweep", "Risk along multiples of sqrt(rate)");
  sweep->fallthrough();
  add_shape(*sweep, sweep_cmd.shape);
  sweep->add_option("--multiples", sweep_cmd.multiples, "Comma list of multiples");
  sweep->add_option("--detector", sweep_cmd.detector, "star or a constituent name");
  sweep->add_flag("--adaptive", sweep_cmd.adaptive, "Use the sparsity-agnostic test");
  sweep->add_option("--cutoff-mode", sweep_cmd.cutoff_mode, "theoretical or calibrated")
      ->check(CLI::IsMember({"theoretical", "calibrated"}));
  sweep->add_option("--level", sweep_cmd.level, "Calibration level");
  sweep->add_option("--calib-reps", sweep_cmd.calib_reps, "Calibration replicates");
  sweep->add_option("--reps", sweep_cmd.reps, "Risk replicates per point");
  sweep->add_option("--eta", sweep_cmd.eta, "Risk budget for the crossing summary");
  sweep->add_option("--svg", sweep_cmd.svg_path, "Optional SVG plot of the CSV");
  sweep->add_option("--support-policy", sweep_cmd.support, "canonical or random")
      ->check(CLI::IsMember({"canonical", "random"}));

  LowerBoundCmd lb_cmd;
  auto* lb = app.add_subcommand("lower-bound", "Likelihood-ratio second moment and risk bound");
  lb->fallthrough();
  add_shape(*lb, lb_cmd.shape);
  lb->add_option("--mu", lb_cmd.mu, "Signal strength")
      ->required()
      ->check(CLI::NonNegativeNumber);
  lb->add_option("--method", lb_cmd.method, "exact, binom, mc-likelihood, or mc-overlap")
      ->check(CLI::IsMember({"exact", "binom", "mc-likelihood", "mc-overlap"}));
  lb->add_option("--reps", lb_cmd.reps, "Monte Carlo replicates");

  StudyCmd study_cmd;
  auto* study = app.add_subcommand("study", "Numeric rate-comparison studies");
  study->fallthrough();
  study->add_option("--study", study_cmd.study, "cor1, prop3, or s1eq1")
      ->required()
      ->check(CLI::IsMember({"cor1", "prop3", "s1eq1"}));

  PhaseCmd phase_cmd;
  auto* phase = app.add_subcommand("phase", "Risk heat grid over the dyadic (s1, s2) points");
  phase->fallthrough();
  add_shape(*phase, phase_cmd.shape, false);
  phase->add_option("--multiple", phase_cmd.multiple, "Signal multiple of sqrt(rate)");
  phase->add_option("--cutoff-mode", phase_cmd.cutoff_mode, "theoretical or calibrated")
      ->check(CLI::IsMember({"theoretical", "calibrated"}));
  phase->add_option("--level", phase_cmd.level, "Calibration level");
  phase->add_option("--calib-reps", phase_cmd.calib_reps, "Calibration replicates");
  phase->add_option("--reps", phase_cmd.reps, "Risk replicates per grid point");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  if (g.format.empty()) {
    bool tabular = sweep->parsed() || study->parsed() || phase->parsed() || calibrate->parsed();
    g.format = tabular ? "csv" : "json";
  }

  try {
    if (rate->parsed()) return run_rate(rate_cmd, g, out);
    if (detect->parsed()) return run_detect(detect_cmd, g, out);
    if (calibrate->parsed()) return run_calibrate(calibrate_cmd, g, out);
    if (risk->parsed()) return run_risk(risk_cmd, g, out);
    if (sweep->parsed()) return run_sweep(sweep_cmd, g, out);
    if (lb->parsed()) return run_lower_bound(lb_cmd, g, out);
    if (study->parsed()) return run_study(study_cmd, g, out);
    if (phase->parsed()) return run_phase(phase_cmd, g, out);
  } catch (const enumeration_cap_error& e) {
    err << "enumeration-cap error: " << e.what() << "\n";
    return kExitEnumerationCap;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "config error: no subcommand\n";
  return kExitConfigError;
}

}  // namespace subdetect::cli
