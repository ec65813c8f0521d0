#include "balance/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "balance/multicolor.hpp"
#include "balance/tusnady.hpp"

namespace balance {

namespace {
using nlohmann::json;
namespace fs = std::filesystem;
}

InputSpec parse_dist(const std::string& text, int n) {
  InputSpec spec;
  spec.n = n;
  if (text.rfind("sparse", 0) == 0) {
    spec.kind = DistKind::Sparse;
    spec.s = 4;
    if (auto pos = text.find(':'); pos != std::string::npos)
      spec.s = std::stoi(text.substr(pos + 1));
    if (spec.s < 1 || spec.s > n) throw InvalidInput("dist: sparse s out of range");
  } else if (text == "hypercube") {
    spec.kind = DistKind::Hypercube;
  } else if (text == "sphere") {
    spec.kind = DistKind::Sphere;
  } else {
    throw InvalidInput("dist: unknown distribution '" + text + "'");
  }
  return spec;
}

Sampler gen_input(const InputSpec& spec, bool symmetrize) {
  const int n = spec.n;
  switch (spec.kind) {
    case DistKind::Sparse: {
      int s = spec.s;
      return [n, s](std::mt19937_64& rng) {
        VectorXd v = VectorXd::Zero(n);
        // Floyd's sampling of s distinct coordinates.
        std::vector<int> chosen;
        for (int j = n - s; j < n; ++j) {
          std::uniform_int_distribution<int> pick(0, j);
          int t = pick(rng);
          if (std::find(chosen.begin(), chosen.end(), t) != chosen.end()) t = j;
          chosen.push_back(t);
        }
        std::bernoulli_distribution coin(0.5);
        for (int idx : chosen) v(idx) = (coin(rng) ? 1.0 : -1.0) / std::sqrt(double(s));
        return v;
      };
    }
    case DistKind::Hypercube:
      return [n](std::mt19937_64& rng) {
        std::bernoulli_distribution coin(0.5);
        VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = (coin(rng) ? 1.0 : -1.0) / std::sqrt(double(n));
        return v;
      };
    case DistKind::Sphere:
      return [n](std::mt19937_64& rng) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        VectorXd v(n);
        double nn = 0.0;
        do {
          for (int i = 0; i < n; ++i) v(i) = gauss(rng);
          nn = v.norm();
        } while (nn < 1e-12);
        return VectorXd((v / nn) / std::sqrt(double(n)));
      };
    case DistKind::Finite: {
      if (spec.support.empty() || spec.support.size() != spec.probs.size())
        throw InvalidInput("gen_input: bad finite support");
      auto support = spec.support;
      auto probs = spec.probs;
      return [support, probs, symmetrize](std::mt19937_64& rng) {
        std::discrete_distribution<int> pick(probs.begin(), probs.end());
        VectorXd v = support[pick(rng)];
        if (symmetrize) {
          std::bernoulli_distribution coin(0.5);
          if (coin(rng)) v = -v;
        }
        return v;
      };
    }
  }
  throw InvalidInput("gen_input: unreachable");
}

CovarianceModel spec_covariance(const InputSpec& spec) {
  const int n = spec.n;
  switch (spec.kind) {
    case DistKind::Sparse:
    case DistKind::Hypercube:
    case DistKind::Sphere:
      return covariance_from_matrix(MatrixXd::Identity(n, n) / n);
    case DistKind::Finite: {
      MatrixXd sigma = MatrixXd::Zero(n, n);
      double tot = 0.0;
      for (double p : spec.probs) tot += p;
      for (size_t i = 0; i < spec.support.size(); ++i)
        sigma += (spec.probs[i] / tot) * spec.support[i] * spec.support[i].transpose();
      return covariance_from_matrix(sigma);
    }
  }
  throw InvalidInput("spec_covariance: unreachable");
}

TestDistribution input_pool(const Sampler& sampler, int m, uint64_t seed) {
  if (m < 1) throw InvalidInput("input_pool: m >= 1");
  auto rng = make_rng(seed);
  TestDistribution out;
  out.reserve(m);
  for (int i = 0; i < m; ++i)
    out.push_back({sampler(rng), 1.0 / m, AtomTag::InputSurrogate});
  return out;
}

std::vector<long> checkpoint_schedule(long T, double ratio) {
  if (T < 1 || ratio <= 1.0) throw InvalidInput("checkpoint_schedule: bad arguments");
  std::vector<long> out;
  long t = 1;
  while (t < T) {
    out.push_back(t);
    t = std::max(t + 1, static_cast<long>(std::ceil(t * ratio)));
  }
  out.push_back(T);
  return out;
}

namespace {

using MetricFn = std::function<double(const VectorXd&)>;

RunTrace potential_loop(const InputSpec& spec, long T, uint64_t seed,
                        int pool_size, double lambda_override, int kappa_override,
                        double ratio, PotentialVariant variant,
                        const std::function<TestDistribution(
                            const ScaleDecomposition&, double lambda,
                            const TestDistribution& pool)>& mixture_builder,
                        const std::function<MetricFn(const ScaleDecomposition&,
                                                     double lambda)>& metric_builder,
                        const PotentialRunHooks& hooks) {
  CovarianceModel model = spec_covariance(spec);
  int kappa = kappa_override > 0 ? kappa_override : default_kappa(spec.n, T);
  ScaleDecomposition dec = dyadic_reduce(model, kappa);
  double lambda = lambda_override > 0 ? lambda_override : default_lambda(kappa, spec.n, T);

  SeedTree seeds{seed};
  Sampler sampler = gen_input(spec);
  const MatrixXd& M = dec.rescale;
  Sampler reduced = [sampler, &M](std::mt19937_64& rng) { return VectorXd(M * sampler(rng)); };
  TestDistribution pool = input_pool(reduced, pool_size, seeds.child(2));
  TestDistribution atoms = mixture_builder(dec, lambda, pool);
  MetricFn metric = metric_builder(dec, lambda);

  PotentialState state(dec, std::move(atoms), lambda, variant);
  auto input_rng = make_rng(seeds.child(1));

  RunTrace trace;
  trace.lambda = lambda;
  trace.kappa = kappa;
  std::vector<long> schedule = checkpoint_schedule(T, ratio);
  size_t next_cp = 0;
  VectorXd d_orig = VectorXd::Zero(spec.n);
  double max_metric = 0.0;
  double prev_phi = state.potential();
  trace.phi_max = prev_phi;

  for (long t = 1; t <= T; ++t) {
    VectorXd v = sampler(input_rng);
    VectorXd w = M * v;
    auto [good, threshold] = state.good_set_check(w, 0.1);
    int chi = state.step(w);
    d_orig += chi * v;
    double phi = state.potential();
    trace.actions.push_back(chi);
    trace.phis.push_back(phi);
    trace.deltas.push_back(phi - prev_phi);
    trace.good_flags.push_back(good ? 1 : 0);
    trace.phi_max = std::max(trace.phi_max, phi);
    prev_phi = phi;
    if (next_cp < schedule.size() && t == schedule[next_cp]) {
      max_metric = std::max(max_metric, metric(d_orig));
      trace.checkpoint_ts.push_back(t);
      trace.checkpoint_metric.push_back(max_metric);
      if (hooks.at_checkpoint) hooks.at_checkpoint(t, state);
      ++next_cp;
    }
  }
  trace.final_metric = max_metric;
  return trace;
}

MetricFn linf_metric() {
  return [](const VectorXd& d) { return d.size() ? d.cwiseAbs().maxCoeff() : 0.0; };
}

}  // namespace

RunTrace run_testset(const InputSpec& spec, long T, uint64_t seed,
                     const TestDistribution& testset, const KomlosParams& params,
                     const PotentialRunHooks& hooks) {
  return potential_loop(
      spec, T, seed, params.pool_size, params.lambda_override,
      params.kappa_override, params.checkpoint_ratio, PotentialVariant::Cosh,
      [&testset](const ScaleDecomposition&, double, const TestDistribution& pool) {
        return komlos_mixture(pool, testset);
      },
      [](const ScaleDecomposition&, double) { return linf_metric(); }, hooks);
}

RunTrace run_komlos(const InputSpec& spec, long T, uint64_t seed,
                    const KomlosParams& params, const PotentialRunHooks& hooks) {
  return run_testset(spec, T, seed, basis_testset(spec.n), params, hooks);
}

namespace {

// The exp-variant potential needs a sign-symmetric atom set; one-sided atoms
// would reward unbounded drift along their mean.
TestDistribution symmetrized(const TestDistribution& in) {
  TestDistribution out;
  out.reserve(2 * in.size());
  for (const TestAtom& a : in) {
    out.push_back({a.vec, a.weight / 2, a.tag});
    out.push_back({-a.vec, a.weight / 2, a.tag});
  }
  return out;
}

}  // namespace

RunTrace run_banaszczyk(const InputSpec& spec, long T, uint64_t seed,
                        const BanaszczykParams& params,
                        const PotentialRunHooks& hooks) {
  SeedTree seeds{seed};
  // The body and net are shared between the mixture and the metric; built
  // once here, captured by both closures.
  auto body = std::make_shared<ConvexBodyRep>(
      build_body(params.body, spec.n, seeds.child(7), params.cloud_size));
  auto net = std::make_shared<ChainingNet>();
  return potential_loop(
      spec, T, seed, params.pool_size, params.lambda_override,
      params.kappa_override, params.checkpoint_ratio, PotentialVariant::Exp,
      [body, net, &spec, T](const ScaleDecomposition& dec, double lambda,
                            const TestDistribution& pool) {
        *net = build_chaining_net(*body, dec, lambda,
                                  static_cast<long>(spec.n) * T);
        return banaszczyk_mixture(symmetrized(pool),
                                  symmetrized(eigen_testset(dec)),
                                  chaining_testset(*net));
      },
      [body, net](const ScaleDecomposition& dec, double) {
        return [body, net, &dec](const VectorXd& d) {
          return knorm(*body, *net, dec, d);
        };
      },
      hooks);
}

RunTrace run_baseline(const InputSpec& spec, long T, uint64_t seed,
                      BaselineKind kind, const std::string& metric,
                      double knorm_rho, double ratio) {
  SeedTree seeds{seed};
  Sampler sampler = gen_input(spec);
  auto input_rng = make_rng(seeds.child(1));
  auto algo_rng = make_rng(seeds.child(4));
  std::bernoulli_distribution coin(0.5);

  MetricFn mfn;
  if (metric == "linf") {
    mfn = linf_metric();
  } else if (metric == "knorm") {
    if (knorm_rho <= 0.0) throw InvalidInput("run_baseline: knorm needs rho");
    mfn = [knorm_rho](const VectorXd& d) { return d.norm() / knorm_rho; };
  } else {
    throw InvalidInput("run_baseline: unknown metric '" + metric + "'");
  }

  RunTrace trace;
  std::vector<long> schedule = checkpoint_schedule(T, ratio);
  size_t next_cp = 0;
  VectorXd d = VectorXd::Zero(spec.n);
  double max_metric = 0.0;
  for (long t = 1; t <= T; ++t) {
    VectorXd v = sampler(input_rng);
    int chi;
    if (kind == BaselineKind::RandomSign) {
      chi = coin(algo_rng) ? 1 : -1;
    } else {
      double ip = d.dot(v);
      chi = ip > 0.0 ? -1 : 1;
    }
    d += chi * v;
    trace.actions.push_back(chi);
    trace.phis.push_back(0.0);
    trace.deltas.push_back(0.0);
    if (next_cp < schedule.size() && t == schedule[next_cp]) {
      max_metric = std::max(max_metric, mfn(d));
      trace.checkpoint_ts.push_back(t);
      trace.checkpoint_metric.push_back(max_metric);
      ++next_cp;
    }
  }
  trace.final_metric = max_metric;
  return trace;
}

namespace {

void oracle_rec(const std::vector<VectorXd>& vs, const NormFn& norm, size_t t,
                VectorXd& d, double cur_max, double& best) {
  if (cur_max >= best) return;
  if (t == vs.size()) {
    best = cur_max;
    return;
  }
  for (int chi : {1, -1}) {
    d += chi * vs[t];
    oracle_rec(vs, norm, t + 1, d, std::max(cur_max, norm(d)), best);
    d -= chi * vs[t];
  }
}

}  // namespace

double offline_oracle(const std::vector<VectorXd>& vectors, const NormFn& norm) {
  if (vectors.empty()) throw InvalidInput("offline_oracle: empty instance");
  if (vectors.size() > 22) throw InvalidInput("offline_oracle: T must be <= 22");
  double best = std::numeric_limits<double>::infinity();
  VectorXd d = VectorXd::Zero(vectors.front().size());
  // The norm is symmetric, so the first sign can be fixed.
  d += vectors[0];
  oracle_rec(vectors, norm, 1, d, norm(d), best);
  return best;
}

double offline_oracle_linf(const std::vector<VectorXd>& vectors) {
  return offline_oracle(vectors,
                        [](const VectorXd& d) { return d.cwiseAbs().maxCoeff(); });
}

SlopeFit slope_fit(const std::vector<long>& ts, const std::vector<double>& metric,
                   long t_min, long t_max) {
  if (ts.size() != metric.size()) throw InvalidInput("slope_fit: length mismatch");
  std::vector<double> xs, ys;
  for (size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] < t_min || ts[i] > t_max) continue;
    if (metric[i] <= 0.0) continue;
    xs.push_back(std::log(static_cast<double>(ts[i])));
    ys.push_back(std::log(metric[i]));
  }
  if (xs.size() < 2) throw InvalidInput("slope_fit: need at least 2 points in range");
  const size_t m = xs.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < m; ++i) { mx += xs[i]; my += ys[i]; }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  SlopeFit fit;
  fit.points = static_cast<int>(m);
  fit.slope = sxy / sxx;
  double rss = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double r = ys[i] - my - fit.slope * (xs[i] - mx);
    rss += r * r;
  }
  fit.stderr_ = m > 2 ? std::sqrt(rss / (m - 2) / sxx) : 0.0;
  return fit;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

struct CliCommon {
  int n = 16;
  long T = 10000;
  std::string dist = "sparse:4";
  uint64_t seed = 1;
  std::string out = "run_out";
  double lambda_override = -1.0;
  int kappa_override = -1;
  int pool = 512;
};

void write_outputs(const std::string& out_dir, const RunTrace& trace,
                   const json& extra_summary, double wall_ms) {
  fs::create_directories(out_dir);
  {
    std::ofstream f(out_dir + "/trace.jsonl");
    for (size_t i = 0; i < trace.actions.size(); ++i) {
      f << "{\"t\":" << (i + 1) << ",\"action\":" << trace.actions[i]
        << ",\"phi\":" << fmt17(trace.phis[i])
        << ",\"delta\":" << fmt17(trace.deltas[i]);
      if (i < trace.good_flags.size())
        f << ",\"good\":" << (trace.good_flags[i] ? "true" : "false");
      f << "}\n";
    }
  }
  {
    std::ofstream f(out_dir + "/metrics.csv");
    f << "t,metric,phi\n";
    for (size_t i = 0; i < trace.checkpoint_ts.size(); ++i) {
      long t = trace.checkpoint_ts[i];
      double phi = trace.phis.empty() ? 0.0 : trace.phis[t - 1];
      f << t << "," << fmt17(trace.checkpoint_metric[i]) << "," << fmt17(phi) << "\n";
    }
  }
  {
    json summary = extra_summary;
    summary["lambda"] = trace.lambda;
    summary["kappa"] = trace.kappa;
    summary["phi_max"] = trace.phi_max;
    summary["final_metric"] = trace.final_metric;
    if (trace.checkpoint_ts.size() >= 8) {
      SlopeFit fit = slope_fit(trace.checkpoint_ts, trace.checkpoint_metric,
                               trace.checkpoint_ts.front(), trace.checkpoint_ts.back());
      summary["slope"] = fit.slope;
      summary["slope_stderr"] = fit.stderr_;
    }
    summary["wall_ms"] = wall_ms;
    std::ofstream f(out_dir + "/summary.json");
    f << summary.dump(2) << "\n";
  }
}

std::vector<std::pair<long, double>> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("report: cannot open " + path);
  std::vector<std::pair<long, double>> out;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) continue;
    out.emplace_back(std::stol(a), std::stod(b));
  }
  return out;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"online vector balancing experiments"};
  app.require_subcommand(1);

  CliCommon c;
  std::string body_kind = "ball";
  std::string signs = "potential";
  std::string baseline = "none";
  std::string testset_file;
  std::string tus_dist = "uniform";
  int tus_d = 2, budget = 2048, cloud = 4096;
  std::vector<double> mc_weights;
  int R = 4;
  std::vector<std::string> compare_files;
  std::string oracle_norm = "linf";

  auto add_common = [&](CLI::App* sub, bool with_n = true) {
    if (with_n) sub->add_option("--n", c.n, "dimension");
    sub->add_option("--T", c.T, "stream length");
    sub->add_option("--dist", c.dist, "input distribution (sparse:S|hypercube|sphere)");
    sub->add_option("--seed", c.seed, "root seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--lambda", c.lambda_override, "lambda override");
    sub->add_option("--kappa", c.kappa_override, "kappa override");
    sub->add_option("--pool", c.pool, "surrogate pool size");
  };

  CLI::App* komlos = app.add_subcommand("komlos", "basis test set run");
  add_common(komlos);
  komlos->add_option("--baseline", baseline, "none|random|l2");

  CLI::App* testset = app.add_subcommand("testset", "custom test set run");
  add_common(testset);
  testset->add_option("--file", testset_file, "whitespace-separated vectors, one per line")
      ->required();

  CLI::App* bana = app.add_subcommand("banaszczyk", "convex-body norm run");
  add_common(bana);
  bana->add_option("--body", body_kind, "ball|cube");
  bana->add_option("--cloud", cloud, "polar cloud size");
  bana->add_option("--baseline", baseline, "none|random");

  CLI::App* tus = app.add_subcommand("tusnady", "online point coloring");
  tus->add_option("--T", c.T, "stream length (power of two)");
  tus->add_option("--d", tus_d, "dimension");
  tus->add_option("--dist", tus_dist, "uniform|mixture");
  tus->add_option("--budget", budget, "tracked test boxes");
  tus->add_option("--seed", c.seed, "root seed");
  tus->add_option("--out", c.out, "output directory");
  tus->add_option("--lambda", c.lambda_override, "lambda override");
  tus->add_option("--signs", signs, "potential|random");

  CLI::App* mc = app.add_subcommand("multicolor", "weighted multi-color run");
  add_common(mc);
  mc->add_option("--R", R, "number of colors");
  mc->add_option("--weights", mc_weights, "color weights (default all 1)");

  CLI::App* orc = app.add_subcommand("oracle", "offline optimum comparison");
  add_common(orc);
  orc->add_option("--norm", oracle_norm, "linf");

  CLI::App* rep = app.add_subcommand("report", "slope table from metrics files");
  rep->add_option("--compare", compare_files, "metrics.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  if (komlos->parsed() || testset->parsed() || bana->parsed()) {
    InputSpec spec = parse_dist(c.dist, c.n);
    RunTrace trace;
    json extra;
    extra["setting"] = komlos->parsed() ? "komlos" : (testset->parsed() ? "testset" : "banaszczyk");
    extra["n"] = c.n;
    extra["T"] = c.T;
    extra["dist"] = c.dist;
    extra["seed"] = c.seed;
    extra["baseline"] = baseline;
    if (baseline == "random" || baseline == "l2") {
      BaselineKind kind = baseline == "random" ? BaselineKind::RandomSign : BaselineKind::L2Greedy;
      if (bana->parsed())
        trace = run_baseline(spec, c.T, c.seed, kind, "knorm", std::sqrt(double(c.n)));
      else
        trace = run_baseline(spec, c.T, c.seed, kind);
    } else if (komlos->parsed()) {
      KomlosParams p;
      p.pool_size = c.pool;
      p.lambda_override = c.lambda_override;
      p.kappa_override = c.kappa_override;
      trace = run_komlos(spec, c.T, c.seed, p);
    } else if (testset->parsed()) {
      std::ifstream f(testset_file);
      if (!f) throw InvalidInput("testset: cannot open " + testset_file);
      TestDistribution ts;
      std::string line;
      while (std::getline(f, line)) {
        std::stringstream ss(line);
        std::vector<double> vals;
        double x;
        while (ss >> x) vals.push_back(x);
        if (vals.empty()) continue;
        if (static_cast<int>(vals.size()) != c.n)
          throw InvalidInput("testset: vector dimension mismatch");
        VectorXd v(c.n);
        for (int i = 0; i < c.n; ++i) v(i) = vals[i];
        ts.push_back({v, 1.0, AtomTag::Basis});
      }
      if (ts.empty()) throw InvalidInput("testset: no vectors in file");
      for (TestAtom& a : ts) a.weight = 1.0 / ts.size();
      KomlosParams p;
      p.pool_size = c.pool;
      p.lambda_override = c.lambda_override;
      p.kappa_override = c.kappa_override;
      trace = run_testset(spec, c.T, c.seed, ts, p);
    } else {
      BanaszczykParams p;
      p.body = body_kind == "cube" ? BodyKind::ScaledCube : BodyKind::EuclideanBall;
      p.cloud_size = cloud;
      p.pool_size = c.pool;
      p.lambda_override = c.lambda_override;
      p.kappa_override = c.kappa_override;
      if (!bana->get_option("--dist")->count()) spec = parse_dist("sphere", c.n);
      trace = run_banaszczyk(spec, c.T, c.seed, p);
      extra["body"] = body_kind;
    }
    write_outputs(c.out, trace, extra, wall());
    return 0;
  }

  if (tus->parsed()) {
    TusnadyConfig cfg;
    cfg.T = static_cast<int>(c.T);
    cfg.d = tus_d;
    cfg.budget = budget;
    cfg.seed = c.seed;
    cfg.lambda_override = c.lambda_override;
    if (tus_dist == "mixture") cfg.dist = TusnadyDist::Mixture;
    else if (tus_dist != "uniform") throw InvalidInput("tusnady: unknown dist");
    cfg.signs = signs == "random" ? TusnadyConfig::Signs::Random
                                  : TusnadyConfig::Signs::Potential;
    TusnadyResult res = run_tusnady(cfg);

    fs::create_directories(c.out);
    {
      std::ofstream f(c.out + "/trace.jsonl");
      for (size_t i = 0; i < res.signs.size(); ++i) {
        f << "{\"t\":" << (i + 1) << ",\"action\":" << res.signs[i] << ",\"point\":[";
        for (size_t j = 0; j < res.points[i].size(); ++j)
          f << (j ? "," : "") << fmt17(res.points[i][j]);
        f << "]}\n";
      }
    }
    {
      std::ofstream f(c.out + "/metrics.csv");
      f << "t,metric,phi\n";
      for (size_t i = 0; i < res.checkpoint_ts.size(); ++i)
        f << res.checkpoint_ts[i] << "," << res.checkpoint_max_disc[i] << ","
          << fmt17(res.phis[i]) << "\n";
    }
    {
      json summary;
      summary["setting"] = "tusnady";
      summary["T"] = cfg.T;
      summary["d"] = cfg.d;
      summary["dist"] = tus_dist;
      summary["seed"] = cfg.seed;
      summary["lambda"] = res.lambda;
      summary["phi_max"] = res.phi_max;
      summary["tracked_boxes"] = res.tracked_boxes;
      summary["final_max_disc"] = res.checkpoint_max_disc.back();
      summary["wall_ms"] = wall();
      std::ofstream f(c.out + "/summary.json");
      f << summary.dump(2) << "\n";
    }
    return 0;
  }

  if (mc->parsed()) {
    InputSpec spec = parse_dist(c.dist, c.n);
    if (mc_weights.empty()) mc_weights.assign(R, 1.0);
    double eta = *std::max_element(mc_weights.begin(), mc_weights.end());
    ColorTree tree = build_tree(mc_weights, eta);

    CovarianceModel model = spec_covariance(spec);
    int kappa = c.kappa_override > 0 ? c.kappa_override : default_kappa(c.n, c.T);
    ScaleDecomposition dec = dyadic_reduce(model, kappa);
    double lambda = c.lambda_override > 0 ? c.lambda_override
                                          : default_lambda(kappa, c.n, c.T);
    SeedTree seeds{c.seed};
    Sampler sampler = gen_input(spec);
    const MatrixXd& M = dec.rescale;
    Sampler reduced = [&](std::mt19937_64& rng) { return VectorXd(M * sampler(rng)); };
    TestDistribution atoms =
        komlos_mixture(input_pool(reduced, c.pool, seeds.child(2)), basis_testset(c.n));
    MulticolorState state(tree, dec, std::move(atoms), lambda);

    auto input_rng = make_rng(seeds.child(1));
    std::vector<long> schedule = checkpoint_schedule(c.T);
    size_t next_cp = 0;
    RunTrace trace;
    trace.lambda = lambda;
    trace.kappa = kappa;
    auto linf = [](const VectorXd& d) { return d.size() ? d.cwiseAbs().maxCoeff() : 0.0; };
    double prev_psi = state.psi();
    fs::create_directories(c.out);
    std::ofstream disc_csv(c.out + "/pairwise.csv");
    disc_csv << "t,c1,c2,disc\n";
    for (long t = 1; t <= c.T; ++t) {
      VectorXd v = sampler(input_rng);
      int color = state.assign(VectorXd(M * v));
      double psi = state.psi();
      trace.actions.push_back(color);
      trace.phis.push_back(psi);
      trace.deltas.push_back(psi - prev_psi);
      trace.phi_max = std::max(trace.phi_max, psi);
      prev_psi = psi;
      if (next_cp < schedule.size() && t == schedule[next_cp]) {
        trace.checkpoint_ts.push_back(t);
        trace.checkpoint_metric.push_back(state.max_disc(linf));
        for (int c1 = 0; c1 < tree.R; ++c1)
          for (int c2 = c1 + 1; c2 < tree.R; ++c2)
            disc_csv << t << "," << c1 << "," << c2 << ","
                     << fmt17(state.pairwise_disc(c1, c2, linf)) << "\n";
        ++next_cp;
      }
    }
    trace.final_metric = trace.checkpoint_metric.back();
    json extra;
    extra["setting"] = "multicolor";
    extra["n"] = c.n;
    extra["T"] = c.T;
    extra["R"] = R;
    extra["weights"] = mc_weights;
    extra["seed"] = c.seed;
    write_outputs(c.out, trace, extra, wall());
    return 0;
  }

  if (orc->parsed()) {
    if (c.T > 22) throw InvalidInput("oracle: T must be <= 22");
    InputSpec spec = parse_dist(c.dist, c.n);
    SeedTree seeds{c.seed};
    Sampler sampler = gen_input(spec);
    auto rng = make_rng(seeds.child(1));
    std::vector<VectorXd> vs;
    for (long t = 0; t < c.T; ++t) vs.push_back(sampler(rng));
    double opt = offline_oracle_linf(vs);
    // Online greedy on the same instance.
    KomlosParams p;
    p.pool_size = 64;
    InputSpec fin;
    fin.kind = DistKind::Finite;
    fin.n = c.n;
    fin.support = vs;
    fin.probs.assign(vs.size(), 1.0);
    CovarianceModel model = spec_covariance(fin);
    ScaleDecomposition dec = dyadic_reduce(model, default_kappa(c.n, c.T));
    double lambda = default_lambda(dec.kappa, c.n, c.T);
    PotentialState state(dec, komlos_mixture(input_pool(gen_input(fin), 64, seeds.child(2)),
                                             basis_testset(c.n)),
                         lambda, PotentialVariant::Cosh);
    VectorXd d = VectorXd::Zero(c.n);
    double online = 0.0;
    for (const VectorXd& v : vs) {
      int chi = state.step(VectorXd(dec.rescale * v));
      d += chi * v;
      online = std::max(online, d.cwiseAbs().maxCoeff());
    }
    std::printf("offline optimum: %s\nonline greedy:  %s\n", fmt17(opt).c_str(),
                fmt17(online).c_str());
    return 0;
  }

  if (rep->parsed()) {
    std::printf("%-40s %10s %10s %8s\n", "file", "slope", "stderr", "points");
    for (const std::string& path : compare_files) {
      auto rows = read_metrics_csv(path);
      std::vector<long> ts;
      std::vector<double> ms;
      for (auto& [t, mval] : rows) {
        ts.push_back(t);
        ms.push_back(mval);
      }
      SlopeFit fit = slope_fit(ts, ms, ts.empty() ? 0 : ts.front(),
                               ts.empty() ? 0 : ts.back());
      std::printf("%-40s %10.4f %10.4f %8d\n", path.c_str(), fit.slope, fit.stderr_,
                  fit.points);
    }
    return 0;
  }

  return 1;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  try {
    return cli_main(argc, argv);
  } catch (const OverflowError& e) {
    std::fprintf(stderr, "overflow: %s\n", e.what());
    return 2;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace balance
