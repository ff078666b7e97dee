// Command-line entry point: data generation, training, simulation,
// evaluation, loss inspection, timing, and significance testing. Every
// command is a pure function of (inputs, config, seed); outputs embed the
// effective configuration so runs can be reproduced from their artifacts.

#include "stadion/datagen.hpp"
#include "stadion/discrepancy.hpp"
#include "stadion/io.hpp"
#include "stadion/metrics.hpp"
#include "stadion/simulator.hpp"
#include "stadion/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace stadion;

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - start)
      .count();
}

#ifndef STADION_VERSION
#define STADION_VERSION "0.0.0"
#endif

json make_meta(const json& effective, std::uint64_t seed, double wall_ms) {
  return json{{"config", effective},
              {"seed", seed},
              {"version", STADION_VERSION},
              {"wall_time_ms", wall_ms}};
}

// --- config file: schema validation and lookup -------------------------------

const json& config_schema() {
  static const json schema = {
      {"seed", json()},
      {"kernel", {{"family", json()}, {"bandwidth", json()}}},
      {"model",
       {{"kind", json()}, {"hidden", json()}, {"diffusion", json()}}},
      {"train",
       {{"steps", json()},
        {"batch_size", json()},
        {"lr", json()},
        {"lambda", json()},
        {"estimator", json()},
        {"grad_clip", json()},
        {"shuffle_pairs", json()}}},
      {"sim",
       {{"dt", json()},
        {"burn_in", json()},
        {"thin", json()},
        {"n", json()},
        {"init", json()},
        {"divergence_threshold", json()},
        {"chains", json()}}},
      {"data",
       {{"kind", json()},
        {"graph", json()},
        {"d", json()},
        {"n_per_env", json()},
        {"train_envs", json()},
        {"test_envs", json()},
        {"shift", json()},
        {"degree", json()}}}};
  return schema;
}

void validate_config(const json& doc) {
  require(doc.is_object(), ErrorCode::config_error,
          "config file must hold a JSON object");
  const json& schema = config_schema();
  for (const auto& [section, value] : doc.items()) {
    require(schema.contains(section), ErrorCode::config_error,
            "unknown config key: " + section);
    if (schema.at(section).is_object()) {
      require(value.is_object(), ErrorCode::config_error,
              "config section must be an object: " + section);
      for (const auto& [key, inner] : value.items()) {
        (void)inner;
        require(schema.at(section).contains(key), ErrorCode::config_error,
                "unknown config key: " + section + "." + key);
      }
    }
  }
}

struct ConfigFile {
  json doc = json::object();

  void load(const std::string& path) {
    doc = read_json_file(path);
    validate_config(doc);
  }

  template <typename T>
  void fill(const CLI::Option* opt, const char* section, const char* key,
            T& value) const {
    if (opt != nullptr && opt->count() > 0) return;   // flags win
    if (!doc.contains(section)) return;
    const json& sec = doc.at(section);
    if (sec.is_object() && sec.contains(key)) value = sec.at(key).get<T>();
  }

  // kernel.bandwidth may hold a number or the string "median"
  void fill_bandwidth(const CLI::Option* opt, std::string& value) const {
    if (opt != nullptr && opt->count() > 0) return;
    if (!doc.contains("kernel")) return;
    const json& sec = doc.at("kernel");
    if (!sec.contains("bandwidth")) return;
    const json& bw = sec.at("bandwidth");
    value = bw.is_string() ? bw.get<std::string>()
                           : std::to_string(bw.get<double>());
  }

  void fill_seed(const CLI::Option* opt, std::uint64_t& seed) const {
    if (opt != nullptr && opt->count() > 0) return;
    if (doc.contains("seed")) seed = doc.at("seed").get<std::uint64_t>();
  }
};

// Resolves the "median" bandwidth against a data matrix.
KernelSpec resolve_kernel(const std::string& family,
                          const std::string& bandwidth, int dim,
                          const MatrixXd& reference, double* resolved) {
  const KernelFamily fam = kernel_family_from_string(family);
  double bw;
  if (bandwidth == "median") {
    bw = median_heuristic_bandwidth(reference);
  } else {
    size_t used = 0;
    bw = std::stod(bandwidth, &used);
    require(used == bandwidth.size(), ErrorCode::config_error,
            "bandwidth must be a number or \"median\"");
  }
  if (resolved != nullptr) *resolved = bw;
  return make_kernel(fam, bw, dim);
}

// --- subcommand bodies --------------------------------------------------------

struct GenArgs {
  std::string kind = "sde", graph = "er", out;
  int d = 5, train_envs = 3, test_envs = 2;
  long n = 1000;
  double shift = 2.0, degree = 3.0;
  std::uint64_t seed = 0;
};

int run_gen(const GenArgs& args) {
  const auto start = clock_type::now();
  BenchmarkConfig config;
  config.kind = args.kind == "sde" ? SystemKind::sde : SystemKind::scm;
  require(args.kind == "sde" || args.kind == "scm", ErrorCode::config_error,
          "kind must be sde or scm");
  config.graph = args.graph == "er" ? GraphKind::er : GraphKind::sf;
  require(args.graph == "er" || args.graph == "sf", ErrorCode::config_error,
          "graph must be er or sf");
  config.d = args.d;
  config.n_per_env = args.n;
  config.n_train_env = args.train_envs;
  config.n_test_env = args.test_envs;
  config.shift_magnitude = args.shift;
  config.expected_degree = args.degree;
  config.seed = args.seed;

  const BenchmarkBundle bundle = make_benchmark(config);
  save_bundle(bundle, args.out);

  const json effective = {{"data",
                           {{"kind", args.kind},
                            {"graph", args.graph},
                            {"d", args.d},
                            {"n_per_env", args.n},
                            {"train_envs", args.train_envs},
                            {"test_envs", args.test_envs},
                            {"shift", args.shift},
                            {"degree", args.degree}}}};
  json doc = read_json_file(args.out + "/bundle.json");
  doc["meta"] = make_meta(effective, args.seed, ms_since(start));
  write_json_file(args.out + "/bundle.json", doc);
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string bundle, out, model = "linear", kernel = "rbf",
              bandwidth = "median", estimator = "linear",
              diffusion = "diag_exp";
  int hidden = 8;
  long steps = 1000, batch = 256;
  double lr = 0.01, lambda = 0.001, grad_clip = 10.0;
  bool shuffle_pairs = false;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& args) {
  const auto start = clock_type::now();
  const BenchmarkBundle bundle = load_bundle(args.bundle);
  const int d = bundle.config.d;

  SdeModel init;
  if (args.model == "linear") {
    init = make_linear_model(d);
  } else if (args.model == "mlp") {
    init = make_mlp_model(d, args.hidden, args.seed);
  } else {
    fail(ErrorCode::config_error, "model must be linear or mlp");
  }
  if (args.diffusion == "basis_cone") {
    init.diffusion_mode = DiffusionMode::basis_cone;
    init.dbasis = DiffusionBasis::coordinates(d);
    init.A = VectorXd::Ones(d);
    init.s = VectorXd();
  } else {
    require(args.diffusion == "diag_exp", ErrorCode::config_error,
            "diffusion must be diag_exp or basis_cone");
  }

  double resolved_bw = 0.0;
  TrainConfig cfg;
  cfg.kernel = resolve_kernel(args.kernel, args.bandwidth, d,
                              bundle.observational.X, &resolved_bw);
  cfg.steps = args.steps;
  cfg.batch_size = args.batch;
  cfg.lr = args.lr;
  cfg.lambda_sparsity = args.lambda;
  cfg.estimator = estimator_from_string(args.estimator);
  cfg.seed = args.seed;
  cfg.grad_clip = args.grad_clip;
  cfg.shuffle_pairs = args.shuffle_pairs;

  std::vector<TrainEnv> envs;
  envs.push_back({bundle.observational, {}});
  for (size_t e = 0; e < bundle.train_envs.size(); ++e) {
    envs.push_back({bundle.train_envs[e], {bundle.train_specs[e].target}});
  }
  const FitResult fit = train(envs, init, cfg);

  const json effective = {
      {"kernel",
       {{"family", args.kernel}, {"bandwidth", resolved_bw}}},
      {"model",
       {{"kind", args.model},
        {"hidden", args.hidden},
        {"diffusion", args.diffusion}}},
      {"train",
       {{"steps", args.steps},
        {"batch_size", args.batch},
        {"lr", args.lr},
        {"lambda", args.lambda},
        {"estimator", to_string(cfg.estimator)},
        {"grad_clip", args.grad_clip},
        {"shuffle_pairs", args.shuffle_pairs}}}};

  json doc;
  doc["meta"] = make_meta(effective, args.seed, ms_since(start));
  doc["model"] = model_to_json(fit.model);
  json phis = json::array();
  for (const Intervention& phi : fit.phis) {
    phis.push_back(intervention_to_json(phi));
  }
  doc["phis"] = std::move(phis);
  doc["loss_trace"] = fit.loss_trace;
  write_json_file(args.out, doc);
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string bundle, fit, out;
  long n = 1000;
  double dt = 0.01;
  long burn_in = 5000, thin = 10;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& args) {
  const auto start = clock_type::now();
  const BenchmarkBundle bundle = load_bundle(args.bundle);
  const json fit_doc = read_json_file(args.fit);
  const SdeModel model = model_from_json(fit_doc.at("model"));

  json envs = json::array();
  for (size_t e = 0; e < bundle.test_envs.size(); ++e) {
    const EnvSpec& spec = bundle.test_specs[e];
    const Dataset& held_out = bundle.test_envs[e];
    const double desired = held_out.X.col(spec.target).mean();

    CalibrationConfig cal;
    cal.sim.dt = args.dt;
    cal.sim.burn_in_steps = args.burn_in;
    cal.sim.thinning = args.thin;
    cal.sim.n_samples = std::max<long>(2000, args.n);
    cal.sim.seed = mix64(args.seed) + 17 * e;
    const Intervention phi =
        calibrate_test_intervention(model, spec.target, desired, cal);

    SimConfig sim;
    sim.dt = args.dt;
    sim.burn_in_steps = args.burn_in;
    sim.thinning = args.thin;
    sim.n_samples = args.n;
    sim.seed = mix64(args.seed) + 1000003 * (e + 1);
    const Dataset rollout = euler_maruyama_sample(model, phi, sim);

    WassersteinOptions wopts;
    wopts.seed = mix64(args.seed) + 31 * e;
    const WassersteinReport w2 = wasserstein(rollout, held_out, wopts);
    envs.push_back({{"env", held_out.env_index},
                    {"target", spec.target},
                    {"delta", phi.shift[0]},
                    {"w2", w2.value},
                    {"mean_mse", mean_mse(rollout, held_out)},
                    {"method", to_string(w2.method)},
                    {"n", w2.n}});
  }

  const json effective = {
      {"sim",
       {{"dt", args.dt}, {"burn_in", args.burn_in}, {"thin", args.thin},
        {"n", args.n}}}};
  json doc;
  doc["meta"] = make_meta(effective, args.seed, ms_since(start));
  doc["envs"] = std::move(envs);
  write_json_file(args.out, doc);
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

struct SimulateArgs {
  std::string model, intervention, out;
  double dt = 0.01;
  long burn_in = 5000, thin = 10, n = 1000;
  int chains = 1;
  std::string init = "zeros";
  double divergence_threshold = 1e6;
  std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& args) {
  const auto start = clock_type::now();
  const SdeModel model = model_from_json(read_json_file(args.model));
  Intervention phi = Intervention::identity();
  if (!args.intervention.empty()) {
    phi = intervention_from_json(read_json_file(args.intervention));
  }
  SimConfig cfg;
  cfg.dt = args.dt;
  cfg.burn_in_steps = args.burn_in;
  cfg.thinning = args.thin;
  cfg.n_samples = args.n;
  cfg.seed = args.seed;
  cfg.chains = args.chains;
  cfg.divergence_threshold = args.divergence_threshold;
  if (args.init == "gaussian") {
    cfg.init = SimConfig::Init::gaussian;
  } else {
    require(args.init == "zeros", ErrorCode::config_error,
            "init must be zeros or gaussian");
  }

  const Dataset samples = euler_maruyama_sample(model, phi, cfg);
  write_csv(args.out, samples.X);

  const json effective = {{"sim",
                           {{"dt", args.dt},
                            {"burn_in", args.burn_in},
                            {"thin", args.thin},
                            {"n", args.n},
                            {"init", args.init},
                            {"chains", args.chains},
                            {"divergence_threshold",
                             args.divergence_threshold}}}};
  write_json_file(args.out + ".meta.json",
                  make_meta(effective, args.seed, ms_since(start)));
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

struct SkdsArgs {
  std::string data, model, intervention, kernel = "rbf",
              bandwidth = "median", estimator = "linear", out;
};

int run_skds(const SkdsArgs& args) {
  const auto start = clock_type::now();
  Dataset data;
  data.X = read_csv(args.data);
  const SdeModel model = model_from_json(read_json_file(args.model));
  Intervention phi = Intervention::identity();
  if (!args.intervention.empty()) {
    phi = intervention_from_json(read_json_file(args.intervention));
  }
  double resolved_bw = 0.0;
  const KernelSpec kernel = resolve_kernel(args.kernel, args.bandwidth,
                                           model.d, data.X, &resolved_bw);
  const Estimator estimator = estimator_from_string(args.estimator);
  const LossGrad lg = skds_grad(model, phi, kernel, data, estimator);
  const double grad_norm =
      std::sqrt(pack_theta_grad(model, lg.grad).squaredNorm() +
                pack_phi_grad(phi, lg.grad).squaredNorm());

  const json effective = {
      {"kernel", {{"family", args.kernel}, {"bandwidth", resolved_bw}}},
      {"train", {{"estimator", to_string(estimator)}}}};
  json doc;
  doc["meta"] = make_meta(effective, 0, ms_since(start));
  doc["loss"] = lg.loss;
  doc["grad_norm"] = grad_norm;
  doc["n"] = data.rows();
  std::cout << doc.dump(2) << "\n";
  if (!args.out.empty()) write_json_file(args.out, doc);
  return 0;
}

struct BenchArgs {
  std::string kernel = "rbf", out;
  int d = 20, repeats = 50;
  long n = 1000;
  std::uint64_t seed = 0;
};

int run_bench_timing(const BenchArgs& args) {
  const auto start = clock_type::now();
  const TimingReport report = timing_bench(
      kernel_family_from_string(args.kernel), args.d, args.n, args.repeats,
      args.seed);
  const json effective = {{"kernel", {{"family", args.kernel}}},
                          {"data", {{"d", args.d}, {"n_per_env", args.n}}}};
  json doc;
  doc["meta"] = make_meta(effective, args.seed, ms_since(start));
  doc["skds_ms"] = {{"mean", report.skds_ms_mean}, {"sd", report.skds_ms_sd}};
  doc["kds_ms"] = {{"mean", report.kds_ms_mean}, {"sd", report.kds_ms_sd}};
  doc["speedup"] = report.speedup;
  doc["skds_loss"] = report.skds_loss;
  doc["kds_loss"] = report.kds_loss;
  doc["repeats"] = report.repeats;
  doc["kds_gradient_analytic"] = report.kds_gradient_analytic;
  std::cout << doc.dump(2) << "\n";
  if (!args.out.empty()) write_json_file(args.out, doc);
  return 0;
}

struct Fig1Args {
  std::string out = "fig1_data.csv";
  long n = 5000;
  double bandwidth = 0.5;
  std::uint64_t seed = 0;
  int grid = 41;
};

// The two-parameter family dX = -4 (X - alpha) dt + sigma dB fit against
// exact draws of N(1, 1/2): the loss surface over (alpha, sigma) and the
// partial-derivative curves along each axis through the truth.
int run_example_fig1(const Fig1Args& args) {
  const auto start = clock_type::now();
  require(args.grid >= 5, ErrorCode::config_error, "grid must be >= 5");

  Dataset data;
  data.X = MatrixXd(args.n, 1);
  const CounterRng rng(args.seed, 0xf161ULL);
  for (long i = 0; i < args.n; ++i) {
    data.X(i, 0) = 1.0 + std::sqrt(0.5) * rng.normal(
                                              static_cast<std::uint64_t>(i));
  }
  const KernelSpec kernel = make_kernel(KernelFamily::rbf, args.bandwidth, 1);

  auto model_at = [](double alpha, double sigma) {
    SdeModel m;
    m.d = 1;
    m.kind = DriftKind::linear;
    m.basis = FeatureBasis::affine(1);
    m.B = MatrixXd(1, 2);
    m.B << 4.0 * alpha, -4.0;
    m.fixed_mask = MaskXb::Constant(1, 2, false);
    m.fixed_mask(0, 1) = true;
    m.diffusion_mode = DiffusionMode::diag_exp;
    m.s = VectorXd::Constant(1, std::log(sigma));
    return m;
  };
  const Intervention none = Intervention::identity();

  std::FILE* out = std::fopen(args.out.c_str(), "w");
  require(out != nullptr, ErrorCode::io_error, "cannot open " + args.out);
  std::fprintf(out, "panel,alpha,sigma,skds,se,d_alpha,d_sigma\n");

  const double alpha_lo = 0.25, alpha_hi = 1.75;
  const double sigma_lo = 1.0, sigma_hi = 3.0;
  for (int i = 0; i < args.grid; ++i) {
    const double alpha =
        alpha_lo + (alpha_hi - alpha_lo) * i / (args.grid - 1.0);
    for (int j = 0; j < args.grid; ++j) {
      const double sigma =
          sigma_lo + (sigma_hi - sigma_lo) * j / (args.grid - 1.0);
      const EmpiricalStats stats =
          skds_empirical_stats(model_at(alpha, sigma), none, kernel, data,
                               Estimator::linear_pairs);
      std::fprintf(out, "grid,%.10g,%.10g,%.17g,%.17g,,\n", alpha, sigma,
                   stats.mean, stats.se);
    }
  }

  // derivative in alpha along sigma = 2, and in sigma along alpha = 1
  for (int i = 0; i < args.grid; ++i) {
    const double alpha =
        alpha_lo + (alpha_hi - alpha_lo) * i / (args.grid - 1.0);
    const LossGrad lg = skds_grad(model_at(alpha, 2.0), none, kernel, data,
                                  Estimator::linear_pairs);
    std::fprintf(out, "dalpha,%.10g,2,,,%.17g,\n", alpha,
                 4.0 * lg.grad.dB(0, 0));
  }
  for (int j = 0; j < args.grid; ++j) {
    const double sigma =
        sigma_lo + (sigma_hi - sigma_lo) * j / (args.grid - 1.0);
    const LossGrad lg = skds_grad(model_at(1.0, sigma), none, kernel, data,
                                  Estimator::linear_pairs);
    std::fprintf(out, "dsigma,1,%.10g,,,,%.17g\n", sigma,
                 lg.grad.ddiff[0] / sigma);
  }
  std::fclose(out);

  const json effective = {
      {"kernel", {{"family", "rbf"}, {"bandwidth", args.bandwidth}}},
      {"data", {{"n_per_env", args.n}}}};
  write_json_file(args.out + ".meta.json",
                  make_meta(effective, args.seed, ms_since(start)));
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

struct SigtestArgs {
  std::string ours, baseline, out, direction = "ours_better",
              metric = "w2";
  double margin = 0.05;
};

std::vector<double> load_metric_series(const std::string& path,
                                       const std::string& metric) {
  const json doc = read_json_file(path);
  std::vector<double> values;
  if (doc.is_array()) {
    for (const json& v : doc) values.push_back(v.get<double>());
  } else if (doc.is_object() && doc.contains("envs")) {
    for (const json& env : doc.at("envs")) {
      values.push_back(env.at(metric).get<double>());
    }
  } else {
    fail(ErrorCode::io_error,
         "expected a JSON array or an eval result object: " + path);
  }
  return values;
}

int run_sigtest(const SigtestArgs& args) {
  const auto start = clock_type::now();
  const std::vector<double> ours = load_metric_series(args.ours, args.metric);
  const std::vector<double> baseline =
      load_metric_series(args.baseline, args.metric);
  TestDirection direction;
  if (args.direction == "ours_better") {
    direction = TestDirection::ours_better;
  } else if (args.direction == "baseline_better") {
    direction = TestDirection::baseline_better;
  } else {
    fail(ErrorCode::config_error,
         "direction must be ours_better or baseline_better");
  }
  const WilcoxonResult result =
      wilcoxon_margin_test(ours, baseline, args.margin, direction);

  json doc;
  doc["meta"] = make_meta(
      json{{"margin", args.margin}, {"metric", args.metric}}, 0,
      ms_since(start));
  doc["p_value"] = result.p_value;
  doc["n_effective"] = result.n_effective;
  doc["direction"] = args.direction;
  doc["statistic"] = result.statistic;
  doc["exact"] = result.exact;
  std::cout << doc.dump(2) << "\n";
  if (!args.out.empty()) write_json_file(args.out, doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning stationary diffusions with Stein-type kernel losses"};
  app.require_subcommand(1);

  ConfigFile config;
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file; explicit flags take precedence");

  GenArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen", "generate a benchmark bundle");
  auto* gen_kind = cmd_gen->add_option("--kind", gen.kind, "sde|scm");
  auto* gen_graph = cmd_gen->add_option("--graph", gen.graph, "er|sf");
  auto* gen_d = cmd_gen->add_option("--d", gen.d, "variable count");
  auto* gen_n = cmd_gen->add_option("--n", gen.n, "samples per environment");
  auto* gen_tr = cmd_gen->add_option("--train-envs", gen.train_envs, "");
  auto* gen_te = cmd_gen->add_option("--test-envs", gen.test_envs, "");
  auto* gen_shift = cmd_gen->add_option("--shift", gen.shift, "");
  auto* gen_deg = cmd_gen->add_option("--degree", gen.degree, "");
  auto* gen_seed = cmd_gen->add_option("--seed", gen.seed, "");
  cmd_gen->add_option("--out", gen.out, "bundle directory")->required();

  TrainArgs tr;
  CLI::App* cmd_train = app.add_subcommand("train", "fit a model to a bundle");
  cmd_train->add_option("--bundle", tr.bundle, "bundle directory")->required();
  cmd_train->add_option("--out", tr.out, "fit json path")->required();
  auto* tr_model = cmd_train->add_option("--model", tr.model, "linear|mlp");
  auto* tr_hidden = cmd_train->add_option("--hidden", tr.hidden, "");
  auto* tr_diff =
      cmd_train->add_option("--diffusion", tr.diffusion, "diag_exp|basis_cone");
  auto* tr_kernel = cmd_train->add_option("--kernel", tr.kernel, "");
  auto* tr_bw = cmd_train->add_option("--bandwidth", tr.bandwidth, "");
  auto* tr_steps = cmd_train->add_option("--steps", tr.steps, "");
  auto* tr_batch = cmd_train->add_option("--batch", tr.batch, "");
  auto* tr_lr = cmd_train->add_option("--lr", tr.lr, "");
  auto* tr_lambda = cmd_train->add_option("--lambda", tr.lambda, "");
  auto* tr_est = cmd_train->add_option("--estimator", tr.estimator,
                                       "linear|ustat");
  auto* tr_clip = cmd_train->add_option("--grad-clip", tr.grad_clip, "");
  auto* tr_seed = cmd_train->add_option("--seed", tr.seed, "");

  EvalArgs ev;
  CLI::App* cmd_eval =
      app.add_subcommand("eval", "evaluate a fit on held-out interventions");
  cmd_eval->add_option("--bundle", ev.bundle, "")->required();
  cmd_eval->add_option("--fit", ev.fit, "")->required();
  cmd_eval->add_option("--out", ev.out, "")->required();
  auto* ev_n = cmd_eval->add_option("--n", ev.n, "simulated samples per env");
  auto* ev_dt = cmd_eval->add_option("--dt", ev.dt, "");
  auto* ev_burn = cmd_eval->add_option("--burn-in", ev.burn_in, "");
  auto* ev_thin = cmd_eval->add_option("--thin", ev.thin, "");
  auto* ev_seed = cmd_eval->add_option("--seed", ev.seed, "");

  SimulateArgs sim;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "roll out a model");
  cmd_sim->add_option("--model", sim.model, "model json")->required();
  cmd_sim->add_option("--out", sim.out, "samples csv")->required();
  cmd_sim->add_option("--intervention", sim.intervention, "");
  auto* sim_dt = cmd_sim->add_option("--dt", sim.dt, "");
  auto* sim_burn = cmd_sim->add_option("--burn-in", sim.burn_in, "");
  auto* sim_thin = cmd_sim->add_option("--thin", sim.thin, "");
  auto* sim_n = cmd_sim->add_option("--n", sim.n, "");
  auto* sim_chains = cmd_sim->add_option("--chains", sim.chains, "");
  auto* sim_init = cmd_sim->add_option("--init", sim.init, "zeros|gaussian");
  auto* sim_div = cmd_sim->add_option("--divergence-threshold",
                                      sim.divergence_threshold, "");
  auto* sim_seed = cmd_sim->add_option("--seed", sim.seed, "");

  SkdsArgs sk;
  CLI::App* cmd_skds =
      app.add_subcommand("skds", "loss and gradient norm on a csv sample");
  cmd_skds->add_option("--data", sk.data, "csv sample")->required();
  cmd_skds->add_option("--model", sk.model, "model json")->required();
  cmd_skds->add_option("--intervention", sk.intervention, "");
  auto* sk_kernel = cmd_skds->add_option("--kernel", sk.kernel, "");
  auto* sk_bw = cmd_skds->add_option("--bandwidth", sk.bandwidth, "");
  auto* sk_est =
      cmd_skds->add_option("--estimator", sk.estimator, "linear|ustat");
  cmd_skds->add_option("--out", sk.out, "optional json artifact");

  BenchArgs be;
  CLI::App* cmd_bench =
      app.add_subcommand("bench-timing", "time one loss+gradient evaluation");
  auto* be_kernel = cmd_bench->add_option("--kernel", be.kernel, "");
  auto* be_d = cmd_bench->add_option("--d", be.d, "");
  auto* be_n = cmd_bench->add_option("--n", be.n, "");
  auto* be_rep = cmd_bench->add_option("--repeats", be.repeats, "");
  auto* be_seed = cmd_bench->add_option("--seed", be.seed, "");
  cmd_bench->add_option("--out", be.out, "optional json artifact");

  Fig1Args f1;
  CLI::App* cmd_fig1 = app.add_subcommand(
      "example-fig1", "loss surface and derivative curves for the 1-d example");
  auto* f1_n = cmd_fig1->add_option("--n", f1.n, "");
  auto* f1_bw = cmd_fig1->add_option("--bandwidth", f1.bandwidth, "");
  auto* f1_grid = cmd_fig1->add_option("--grid", f1.grid, "");
  auto* f1_seed = cmd_fig1->add_option("--seed", f1.seed, "");
  cmd_fig1->add_option("--out", f1.out, "csv artifact");

  SigtestArgs st;
  CLI::App* cmd_sig =
      app.add_subcommand("sigtest", "paired signed-rank margin test");
  cmd_sig->add_option("--ours", st.ours, "")->required();
  cmd_sig->add_option("--baseline", st.baseline, "")->required();
  cmd_sig->add_option("--margin", st.margin, "");
  cmd_sig->add_option("--direction", st.direction,
                      "ours_better|baseline_better");
  cmd_sig->add_option("--metric", st.metric, "w2|mean_mse");
  cmd_sig->add_option("--out", st.out, "optional json artifact");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) config.load(config_path);

    if (cmd_gen->parsed()) {
      config.fill(gen_kind, "data", "kind", gen.kind);
      config.fill(gen_graph, "data", "graph", gen.graph);
      config.fill(gen_d, "data", "d", gen.d);
      config.fill(gen_n, "data", "n_per_env", gen.n);
      config.fill(gen_tr, "data", "train_envs", gen.train_envs);
      config.fill(gen_te, "data", "test_envs", gen.test_envs);
      config.fill(gen_shift, "data", "shift", gen.shift);
      config.fill(gen_deg, "data", "degree", gen.degree);
      config.fill_seed(gen_seed, gen.seed);
      return run_gen(gen);
    }
    if (cmd_train->parsed()) {
      config.fill(tr_model, "model", "kind", tr.model);
      config.fill(tr_hidden, "model", "hidden", tr.hidden);
      config.fill(tr_diff, "model", "diffusion", tr.diffusion);
      config.fill(tr_kernel, "kernel", "family", tr.kernel);
      config.fill_bandwidth(tr_bw, tr.bandwidth);
      config.fill(tr_steps, "train", "steps", tr.steps);
      config.fill(tr_batch, "train", "batch_size", tr.batch);
      config.fill(tr_lr, "train", "lr", tr.lr);
      config.fill(tr_lambda, "train", "lambda", tr.lambda);
      config.fill(tr_est, "train", "estimator", tr.estimator);
      config.fill(tr_clip, "train", "grad_clip", tr.grad_clip);
      config.fill_seed(tr_seed, tr.seed);
      return run_train(tr);
    }
    if (cmd_eval->parsed()) {
      config.fill(ev_n, "sim", "n", ev.n);
      config.fill(ev_dt, "sim", "dt", ev.dt);
      config.fill(ev_burn, "sim", "burn_in", ev.burn_in);
      config.fill(ev_thin, "sim", "thin", ev.thin);
      config.fill_seed(ev_seed, ev.seed);
      return run_eval(ev);
    }
    if (cmd_sim->parsed()) {
      config.fill(sim_dt, "sim", "dt", sim.dt);
      config.fill(sim_burn, "sim", "burn_in", sim.burn_in);
      config.fill(sim_thin, "sim", "thin", sim.thin);
      config.fill(sim_n, "sim", "n", sim.n);
      config.fill(sim_chains, "sim", "chains", sim.chains);
      config.fill(sim_init, "sim", "init", sim.init);
      config.fill(sim_div, "sim", "divergence_threshold",
                  sim.divergence_threshold);
      config.fill_seed(sim_seed, sim.seed);
      return run_simulate(sim);
    }
    if (cmd_skds->parsed()) {
      config.fill(sk_kernel, "kernel", "family", sk.kernel);
      config.fill_bandwidth(sk_bw, sk.bandwidth);
      config.fill(sk_est, "train", "estimator", sk.estimator);
      return run_skds(sk);
    }
    if (cmd_bench->parsed()) {
      config.fill(be_kernel, "kernel", "family", be.kernel);
      config.fill(be_d, "data", "d", be.d);
      config.fill(be_n, "data", "n_per_env", be.n);
      (void)be_rep;
      config.fill_seed(be_seed, be.seed);
      return run_bench_timing(be);
    }
    if (cmd_fig1->parsed()) {
      config.fill(f1_n, "data", "n_per_env", f1.n);
      config.fill(f1_bw, "kernel", "bandwidth", f1.bandwidth);
      (void)f1_grid;
      config.fill_seed(f1_seed, f1.seed);
      return run_example_fig1(f1);
    }
    if (cmd_sig->parsed()) {
      return run_sigtest(st);
    }
  } catch (const Error& e) {
    const json err = {{"error", to_string(e.code())}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    const json err = {{"error", "Internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 1;
}
