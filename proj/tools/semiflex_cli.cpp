// semiflex: batch front end. Every command is a pure function of the config
// and the seed; reports go to --out and stdout.

#include "semiflex/chain.hpp"
#include "semiflex/diffusion.hpp"
#include "semiflex/disorder.hpp"
#include "semiflex/harmonics.hpp"
#include "semiflex/presets.hpp"
#include "semiflex/rotgroup.hpp"
#include "semiflex/serialize.hpp"
#include "semiflex/stats.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semiflex;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kHypothesisFail = 3, kInconclusive = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config, preset, law, disorder, seed;
  int threads = 1;
  int dim = 0;
  std::string out = "out";
  long n = -1, replicas = -1, rescale = -1, k_max = -1, K = -1;
  double tolerance = -1.0;
};

struct Run {
  json cfg;
  RotationLaw law = RotationLaw::haar(2);
  DisorderModel omega = DisorderModel::constant(Rotation::identity(2));
  UnitVector v0;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out;
  std::vector<std::string> outputs;

  void save_json(const std::string& name, const json& j) {
    write_json(out / name, j);
    outputs.push_back(name);
  }
  void save_csv(const std::string& name, const CsvWriter& w) {
    w.save(out / name);
    outputs.push_back(name);
  }
};

std::uint64_t parse_seed(const std::string& s) {
  if (s == "auto") {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("--seed expects an unsigned 64-bit integer or 'auto', got '" + s + "'");
  }
}

json load_config(const Options& o) {
  json cfg = json::object();
  if (!o.preset.empty()) cfg = preset(o.preset);
  if (!o.config.empty()) {
    std::ifstream is(o.config);
    if (!is) throw ConfigError("cannot read config file " + o.config);
    json file;
    try {
      file = json::parse(is);
    } catch (const json::exception& e) {
      throw ConfigError("config " + o.config + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config must be a JSON object");
    cfg.merge_patch(file);
  }
  std::optional<int> dim;
  if (o.dim > 0) dim = o.dim;
  else if (cfg.contains("d")) dim = cfg.at("d").get<int>();
  if (!o.law.empty()) cfg["law"] = law_shorthand(o.law, dim);
  if (!o.disorder.empty()) {
    if (!dim && cfg.contains("law")) dim = make_law(cfg.at("law")).dim();
    cfg["disorder"] = disorder_shorthand(o.disorder, dim);
  }
  if (o.n >= 0) cfg["n"] = o.n;
  if (o.replicas >= 0) cfg["replicas"] = o.replicas;
  if (o.rescale >= 0) cfg["rescale"] = o.rescale;
  if (o.K >= 0) cfg["K"] = o.K;
  if (o.tolerance > 0) cfg["tolerance"] = o.tolerance;
  if (o.k_max >= 0) {
    json ks = json::array();
    for (long k = 1; k <= o.k_max; ++k) ks.push_back(k);
    cfg["ks"] = ks;
  }
  if (!cfg.contains("law")) throw ConfigError("config has no law (use --preset, --config or --law)");
  return cfg;
}

Run prepare(const Options& o) {
  Run r;
  r.cfg = load_config(o);
  if (!o.seed.empty()) r.cfg["seed"] = parse_seed(o.seed);
  r.seed = r.cfg.value("seed", std::uint64_t{0});
  r.cfg["seed"] = r.seed;
  r.threads = resolve_threads(o.threads);
  r.law = make_law(r.cfg.at("law"));
  const int d = r.law.dim();
  if (!r.cfg.contains("disorder")) r.cfg["disorder"] = disorder_shorthand("constant-identity", d);
  // The disorder seed is derived so thermal replica i and omega_i never share a stream.
  r.omega = make_disorder(r.cfg.at("disorder"), hash_pair(r.seed, 0xd150'0de5ULL));
  if (r.omega.dim() != d) throw ConfigError("law and disorder dimensions differ");
  if (r.cfg.contains("v0")) {
    const auto v = r.cfg.at("v0").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != d) throw ConfigError("v0 must have d entries");
    r.v0 = UnitVector::normalized(Eigen::Map<const Vector>(v.data(), d));
  } else {
    r.v0 = UnitVector::basis(d, d);
  }
  r.out = o.out;
  fs::create_directories(r.out);
  return r;
}

struct MomentsOut {
  std::optional<Moments> exact;
  std::optional<MomentEstimate> mc;
  const Moments& value() const { return exact ? *exact : mc->value; }
};

MomentsOut moments_for(const Run& r) {
  MomentsOut m;
  if (r.law.exact_moments()) {
    m.exact = *r.law.exact_moments();
  } else {
    RngStream rng = RngStream::keyed(r.seed, 0x303e'0e75ULL);
    m.mc = moments_mc(r.law, r.cfg.value("mc_samples", std::size_t{1000000}), rng);
  }
  return m;
}

HypothesisReport check_for(const Run& r, const MomentsOut& m) {
  const int max_power = r.cfg.value("max_power", 64);
  const double margin = r.cfg.value("margin", 1e-9);
  return m.exact ? check_hypothesis(*m.exact, max_power, margin) : check_hypothesis(*m.mc, max_power, margin);
}

int exit_for(Verdict v) {
  switch (v) {
    case Verdict::pass: return kOk;
    case Verdict::fail: return kHypothesisFail;
    case Verdict::inconclusive: return kInconclusive;
  }
  return kInternal;
}

// ---------------------------------------------------------------------------

int cmd_simulate(Run& r) {
  const auto n = r.cfg.value("n", std::size_t{10000});
  RngStream rng = RngStream::keyed(r.seed, 0);
  const auto traj = simulate_chain(r.law, r.omega, r.v0, n, rng);
  r.save_csv("trajectory.csv", trajectory_csv(traj));
  json rep{{"n", n}, {"d", traj.dim}, {"seed", r.seed}, {"law", r.law.to_json()}, {"disorder", r.omega.to_json()}};
  json end = json::array();
  for (int i = 0; i < traj.dim; ++i) end.push_back(traj.positions.back()(i));
  rep["endpoint"] = end;
  const long N = r.cfg.value("rescale", 0L);
  if (N > 0) {
    r.save_csv("rescaled.csv", rescaled_csv(rescale(traj, N)));
    rep["rescale"] = N;
  }
  r.save_json("simulate.json", rep);
  std::cout << rep.dump(2) << "\n";
  return kOk;
}

int cmd_sigma2(Run& r) {
  const auto m = moments_for(r);
  const auto chk = check_for(r, m);
  json rep{{"check", to_json(chk)}, {"d", r.law.dim()}, {"law", r.law.to_json()}, {"disorder", r.omega.to_json()}};
  if (chk.verdict != Verdict::pass) {
    rep["pass"] = false;
    rep["note"] = "contraction hypothesis not certified; no sigma2 is claimed";
    r.save_json("sigma2.json", rep);
    std::cout << rep.dump(2) << "\n";
    return exit_for(chk.verdict);
  }
  const int d = r.law.dim();
  const Matrix& rbar = m.value().mean;

  Sigma2Options so;
  if (r.cfg.contains("K")) so.K = r.cfg.at("K").get<int>();
  so.tolerance = r.cfg.value("tolerance", 1e-10);
  so.L = r.cfg.value("L", std::size_t{10000});
  so.threads = r.threads;
  const auto series = sigma2_series(rbar, r.omega, so);
  rep["series"] = to_json(series);
  rep["sigma2"] = series.sigma2;
  rep["tail_bound"] = series.tail_bound;

  struct Est { std::string name; double v, tail, se; };
  std::vector<Est> ests{{"series", series.sigma2, series.tail_bound, series.mc_se.value_or(0.0)}};

  json closed = json::object();
  if (r.law.kind() == LawKind::haar) closed["haar"] = 1.0 / d;
  const double c = rbar(0, 0);
  if ((rbar - c * Matrix::Identity(d, d)).norm() < 1e-14 && r.omega.is_identity() && std::abs(c) < 1.0) {
    closed["cI"] = sigma2_cI(c, d);
  }
  if (const auto wbar = r.omega.mean(); wbar && (r.omega.kind() == DisorderKind::iid || r.omega.kind() == DisorderKind::constant)) {
    closed["iid"] = sigma2_iid_closed(rbar, *wbar);
    ests.push_back({"iid_closed", closed["iid"].get<double>(), 0.0, 0.0});
  }
  if (!r.omega.is_identity()) {
    closed["homogeneous"] = sigma2_iid_closed(rbar, Matrix::Identity(d, d));
  }
  rep["closed_form"] = closed;

  if (d == 2 && m.exact) {
    const auto spec = so2_spectrum(r.law, 1);
    if (std::abs(spec.at(1)) < 1.0) {
      const auto o = sigma2_oracle_2d(spec, r.omega, std::nullopt, r.cfg.value("oracle_mc_samples", std::size_t{0}),
                                      r.seed, so.tolerance);
      rep["oracle"] = {{"sigma2", o.sigma2}, {"K", o.K}, {"tail_bound", o.tail_bound}, {"mode", o.mode},
                       {"mc_se", o.mc_se ? json(*o.mc_se) : json(nullptr)}};
      ests.push_back({"oracle", o.sigma2, o.tail_bound, o.mc_se.value_or(0.0)});
      rep["drift_bound"] = drift_bound_2d(spec);
    }
  }

  bool agree = true;
  json pairs = json::array();
  for (std::size_t i = 0; i < ests.size(); ++i) {
    for (std::size_t j = i + 1; j < ests.size(); ++j) {
      const double diff = std::abs(ests[i].v - ests[j].v);
      const double allow = ests[i].tail + ests[j].tail + 3.0 * (ests[i].se + ests[j].se) + 1e-12;
      pairs.push_back({{"a", ests[i].name}, {"b", ests[j].name}, {"diff", diff}, {"allowed", allow}, {"ok", diff <= allow}});
      agree = agree && diff <= allow;
    }
  }
  rep["agreement"] = pairs;
  rep["agree"] = agree;
  rep["pass"] = true;
  r.save_json("sigma2.json", rep);
  std::cout << rep.dump(2) << "\n";
  return kOk;
}

int cmd_check(Run& r) {
  const auto m = moments_for(r);
  const auto chk = check_for(r, m);
  json rep = to_json(chk);
  rep["law"] = r.law.to_json();
  r.save_json("check.json", rep);
  std::cout << rep.dump(2) << "\n";
  return exit_for(chk.verdict);
}

int cmd_mixing(Run& r) {
  const int d = r.law.dim();
  const auto ks = r.cfg.value("ks", std::vector<int>{1, 2, 5, 10});
  const int cutoff = r.cfg.value("cutoff", 4096);
  int k_max = 0;
  for (int k : ks) {
    if (k < 1) throw ConfigError("ks must be positive");
    k_max = std::max(k_max, k);
  }
  json rep{{"d", d}, {"law", r.law.to_json()}};
  CsvWriter csv({"k", "bound", "half_bound", "tv", "tv_truncation"});
  json rows = json::array();
  bool within = true;

  auto emit = [&](int k, std::optional<double> bound, std::optional<TvResult> tv) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    csv.row({double(k), bound.value_or(nan), bound ? 0.5 * *bound : nan, tv ? tv->tv : nan,
             tv ? tv->truncation_bound : nan});
    json row{{"k", k}, {"bound", bound ? json(*bound) : json(nullptr)}};
    if (tv) {
      row["tv"] = tv->tv;
      row["tv_truncation"] = tv->truncation_bound;
      if (bound && tv->tv > 0.5 * *bound) within = false;
    }
    rows.push_back(row);
  };

  if (d == 2) {
    const auto spec = so2_spectrum(r.law, cutoff);
    const auto h = mixing_h(spec);
    rep["h"] = {{"value", h.h}, {"upper", h.upper}, {"certified", h.certified}, {"flag", h.flag}};
    rep["l2_norm"] = number_or_string(std::sqrt(spec.l2_norm_sq));
    TvOptions topt;
    topt.grid = r.cfg.value("tv_grid", 1 << 16);
    topt.tolerance = r.cfg.value("tv_tolerance", 1e-6);
    std::optional<CircleSpectrum> big;
    if (spec.envelope.available()) big = so2_spectrum(r.law, topt.grid / 2 - 1);
    const auto start = r.cfg.value("omega_start", std::uint64_t{0});
    const auto angles = r.omega.angles(start + 1, k_max);
    for (int k : ks) {
      std::optional<double> bound;
      try {
        bound = mixing_bound(spec, k);
      } catch (const std::domain_error&) {
      }
      std::optional<TvResult> tv;
      if (big) tv = tv_to_haar_so2(*big, std::vector<double>(angles.begin(), angles.begin() + k), k, topt);
      emit(k, bound, tv);
    }
    if (!big) rep["tv_note"] = "law has no density; the Fourier series for the TV distance does not converge";
    rep["tv_within_half_bound"] = within;
  } else if (d == 3) {
    CharacterSpectrum spec;
    try {
      spec = so3_char_spectrum(r.law, cutoff);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mixing covers d = 2 laws and conjugation-invariant d = 3 laws only "
                                    "(the two hypotheses under which the bound is proved): ") + e.what());
    }
    const auto h = mixing_h(spec);
    rep["h"] = {{"value", h.h}, {"upper", h.upper}, {"certified", h.certified}, {"flag", h.flag}};
    for (int k : ks) {
      std::optional<double> bound;
      try {
        bound = mixing_bound(spec, k);
      } catch (const std::domain_error&) {
      }
      emit(k, bound, std::nullopt);
    }
  } else {
    throw ConfigError("mixing covers d = 2 and conjugation-invariant d = 3 laws only");
  }
  rep["rows"] = rows;
  r.save_json("mixing.json", rep);
  r.save_csv("mixing.csv", csv);
  json brief = rep;
  brief.erase("rows");
  std::cout << brief.dump(2) << "\n";
  return kOk;
}

int cmd_convergence(Run& r) {
  const int d = r.law.dim();
  auto checkpoints = r.cfg.value("checkpoints", std::vector<std::size_t>{100, 1000, 10000});
  if (r.cfg.contains("n") && std::find(checkpoints.begin(), checkpoints.end(), r.cfg.at("n").get<std::size_t>()) ==
                                 checkpoints.end()) {
    checkpoints.push_back(r.cfg.at("n").get<std::size_t>());
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  const auto replicas = r.cfg.value("replicas", std::size_t{1000});

  double sigma2 = 0.0;
  std::string source;
  if (r.cfg.contains("sigma2_reference")) {
    sigma2 = r.cfg.at("sigma2_reference").get<double>();
    source = "config";
  } else {
    const auto m = moments_for(r);
    if (check_for(r, m).verdict != Verdict::pass) {
      throw ConfigError("no sigma2 reference: hypothesis not certified and sigma2_reference not supplied");
    }
    const auto wbar = r.omega.mean();
    if (wbar && (r.omega.kind() == DisorderKind::iid || r.omega.kind() == DisorderKind::constant)) {
      // exact, whereas the ergodic series carries Monte Carlo error over omega
      sigma2 = sigma2_iid_closed(m.value().mean, *wbar);
      source = "iid_closed";
    } else {
      Sigma2Options so;
      so.tolerance = r.cfg.value("tolerance", 1e-10);
      so.L = r.cfg.value("L", std::size_t{10000});
      so.threads = r.threads;
      sigma2 = sigma2_series(m.value().mean, r.omega, so).sigma2;
      source = "series";
    }
  }

  const Rotation frame = frame_from_direction(r.v0);
  const auto ep = simulate_endpoints(r.law, r.omega, frame, checkpoints, replicas, r.seed, r.threads);
  std::optional<std::vector<Vector>> centers;
  if (r.law.exact_moments()) centers = expected_positions(r.law.exact_moments()->mean, r.omega, frame, checkpoints);

  CsvWriter csv({"n", "i", "j", "cov_over_n", "se", "target", "z"});
  json ladder = json::array();
  bool pass = true;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const auto n = checkpoints[c];
    const auto cov = empirical_cov(ep.at(n), n);
    const auto clt = clt_from_endpoints(ep.at(n), n, sigma2, centers ? std::optional<Vector>((*centers)[c]) : std::nullopt);
    double zmax = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double target = i == j ? sigma2 : 0.0;
        const double se = cov.se(i, j);
        const double z = se > 0 ? (cov.matrix(i, j) - target) / se : (cov.matrix(i, j) == target ? 0.0 : INFINITY);
        zmax = std::max(zmax, std::abs(z));
        csv.row({double(n), double(i + 1), double(j + 1), cov.matrix(i, j), se, target, z});
      }
    }
    json entry{{"n", n}, {"covariance", to_json(cov, r.seed)}, {"max_abs_z", number_or_string(zmax)}, {"clt", to_json(clt)}};
    ladder.push_back(entry);
    if (c + 1 == checkpoints.size()) pass = clt.pass && zmax <= 3.0;
  }
  json rep{{"d", d},           {"sigma2", sigma2},      {"sigma2_source", source}, {"replicas", replicas},
           {"seed", r.seed},   {"ladder", ladder},      {"pass", pass},           {"law", r.law.to_json()},
           {"disorder", r.omega.to_json()}};
  r.save_json("convergence.json", rep);
  r.save_csv("convergence.csv", csv);
  std::cout << json{{"sigma2", sigma2}, {"pass", pass}, {"out", (r.out / "convergence.json").string()}}.dump(2) << "\n";
  return pass ? kOk : kHypothesisFail;
}

void error_json(const std::string& kind, const std::string& msg) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", msg}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semiflex: disordered semiflexible chains built from random rotations"};
  app.set_version_flag("--version", std::string(SEMIFLEX_VERSION));
  app.require_subcommand(1);
  Options o;

  using Cmd = int (*)(Run&);
  const std::vector<std::tuple<std::string, std::string, Cmd>> cmds{
      {"simulate", "trajectory CSV", cmd_simulate},
      {"sigma2", "diffusion constant report", cmd_sigma2},
      {"check", "contraction hypothesis report", cmd_check},
      {"mixing", "mixing constant, L2 bound and TV table", cmd_mixing},
      {"convergence", "Cov/n and CLT ladder", cmd_convergence}};
  std::vector<std::pair<CLI::App*, Cmd>> subs;
  for (const auto& [name, help, fn] : cmds) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    s->add_option("--preset", o.preset, "named preset");
    s->add_option("--law", o.law, "law shorthand");
    s->add_option("--disorder", o.disorder, "disorder shorthand");
    s->add_option("--dim", o.dim, "dimension for shorthands that do not fix it");
    s->add_option("--seed", o.seed, "U64 or auto");
    s->add_option("--threads", o.threads, "worker threads (0 = all cores)");
    s->add_option("--out", o.out, "output directory");
    s->add_option("--n", o.n, "chain length");
    s->add_option("--replicas", o.replicas, "thermal replicas");
    s->add_option("--K", o.K, "series truncation");
    s->add_option("--tolerance", o.tolerance, "series tail tolerance");
    if (name == "simulate") s->add_option("--rescale", o.rescale, "also write X_j / sqrt(N) knots");
    if (name == "mixing") s->add_option("--k-max", o.k_max, "tabulate k = 1..K");
    subs.emplace_back(s, fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_json("config", e.what());
    return kConfig;
  }

  for (const auto& [sub, fn] : subs) {
    if (!sub->parsed()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Run r = prepare(o);
      const int code = fn(r);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json manifest{{"tool", "semiflex"},
                    {"version", SEMIFLEX_VERSION},
                    {"command", sub->get_name()},
                    {"config", r.cfg},
                    {"config_hash", fnv1a_hex(r.cfg.dump())},
                    {"seed", r.seed},
                    {"threads", r.threads},
                    {"wall_clock_seconds", secs},
                    {"outputs", r.outputs},
                    {"exit_code", code}};
      write_json(r.out / "manifest.json", manifest);
      return code;
    } catch (const ConfigError& e) {
      error_json("config", e.what());
      return kConfig;
    } catch (const json::exception& e) {
      error_json("config", e.what());
      return kConfig;
    } catch (const std::invalid_argument& e) {
      error_json("config", e.what());
      return kConfig;
    } catch (const std::domain_error& e) {
      error_json("config", e.what());
      return kConfig;
    } catch (const std::exception& e) {
      error_json("internal", e.what());
      return kInternal;
    }
  }
  return kInternal;
}
