// Command-line pipeline: surrogate training data, model fitting, scenario
// pools, strategic sampling, the convex scenario program, statistical
// validation and report emission.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 solver failure,
// 4 validation threshold breached.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "ccgrid/acpf.hpp"
#include "ccgrid/network.hpp"
#include "ccgrid/program.hpp"
#include "ccgrid/quadfit.hpp"
#include "ccgrid/sampling.hpp"
#include "ccgrid/solver.hpp"
#include "ccgrid/storage.hpp"
#include "ccgrid/uncertainty.hpp"
#include "ccgrid/validate.hpp"

namespace fs = std::filesystem;
using namespace ccgrid;

namespace {

struct Context {
  std::string case_path;
  std::string config_path;
  std::string profile_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  double tol = 0.0;  // 0 = use config/default

  nlohmann::json config;
  NetworkCase nc;
  AdmittanceMatrix y;

  std::string out(const std::string& name) const { return out_dir + "/" + name; }
};

Context load_context(const std::string& case_path, const std::string& config_path,
                     const std::string& profile_path, const std::string& out_dir,
                     std::uint64_t seed, double tol) {
  Context ctx;
  ctx.case_path = case_path;
  ctx.config_path = config_path;
  ctx.profile_path = profile_path;
  ctx.out_dir = out_dir;
  ctx.seed = seed;
  ctx.tol = tol;
  if (!config_path.empty()) ctx.config = load_config(config_path);
  ctx.nc = parse_case(case_path, ctx.config);
  if (!profile_path.empty()) {
    auto profile = read_profile_csv(profile_path, ctx.nc.n(), ctx.nc.period_count);
    ctx.nc = apply_profile(ctx.nc, profile);
  }
  ctx.y = build_admittance(ctx.nc);
  fs::create_directories(out_dir);
  return ctx;
}

SolveOptions solver_options(const Context& ctx) {
  SolveOptions o;
  auto solver = ctx.config.value("solver", nlohmann::json::object());
  o.abs_tol = solver.value("abs_tol", 1e-7);
  o.rel_tol = solver.value("rel_tol", 1e-7);
  o.max_iter = solver.value("max_iter", 200000);
  o.scaling = solver.value("scaling", true);
  o.time_limit_sec = solver.value("time_limit_sec", 1e9);
  if (ctx.tol > 0) {
    o.abs_tol = ctx.tol;
    o.rel_tol = ctx.tol;
  }
  return o;
}

TrainingConfig training_config(const Context& ctx) {
  auto t = ctx.config.value("training", nlohmann::json::object());
  TrainingConfig cfg;
  cfg.mu = t.value("mu", 0.0);
  cfg.max_iter = t.value("max_iter", 5000);
  cfg.tol = t.value("tol", 1e-8);
  cfg.holdout_fraction = t.value("holdout", 0.25);
  cfg.support_restrict = t.value("support_restrict", true);
  cfg.seed = domain_seed(ctx.seed, SeedDomain::Training);
  return cfg;
}

int cmd_gen_data(const Context& ctx, int samples, double radius) {
  auto t = ctx.config.value("training", nlohmann::json::object());
  if (samples <= 0) samples = t.value("samples", 2000);
  if (radius <= 0) radius = t.value("radius", 0.05);
  auto ds = sample_training_set(ctx.nc, ctx.y, samples, radius, ctx.seed);
  save_training_set(ds, ctx.out("dataset.json"));
  std::cout << "dataset: " << samples << " samples, radius " << radius << " -> "
            << ctx.out("dataset.json") << "\n";
  return 0;
}

int cmd_train(const Context& ctx, const std::string& dataset_path) {
  auto ds = load_training_set(dataset_path.empty() ? ctx.out("dataset.json") : dataset_path);
  auto cfg = training_config(ctx);
  auto t = ctx.config.value("training", nlohmann::json::object());
  std::vector<double> mu_grid = t.value("mu_grid", std::vector<double>{});
  std::map<std::string, ModelMetrics> holdout;
  auto reg = train_all_targets(ds, ctx.nc, ctx.y, cfg, mu_grid, &holdout);
  save_registry(reg, ctx.out("models.json"));
  nlohmann::json metrics;
  double worst = 0.0;
  for (const auto& [name, mm] : holdout) {
    metrics[name] = {{"rmse", mm.rmse},
                     {"max_abs_error", mm.max_abs_error},
                     {"nonzeros", mm.nonzeros},
                     {"density", mm.density}};
    worst = std::max(worst, mm.rmse);
  }
  std::ofstream out(ctx.out("training_metrics.json"));
  out << metrics.dump(2) << "\n";
  std::cout << "trained " << reg.models.size() << " surrogates, worst holdout rmse "
            << worst << " -> " << ctx.out("models.json") << "\n";
  return 0;
}

int cmd_pool(const Context& ctx, int count) {
  auto u = ctx.config.value("uncertainty", nlohmann::json::object());
  auto envelope = u.value("envelope", std::vector<double>{0.7, 1.3});
  if (count <= 0) count = u.value("pool_size", 100);
  auto pool = generate_scenario_pool(ctx.nc, envelope.at(0), envelope.at(1), count, ctx.seed);
  save_pool_csv(pool, ctx.out("pool.csv"));
  nlohmann::json meta = {{"envelope", envelope}, {"seed", ctx.seed}, {"count", count}};
  std::ofstream out(ctx.out("pool_meta.json"));
  out << meta.dump(2) << "\n";
  std::cout << "pool: " << count << " scenarios in [" << envelope[0] << ", " << envelope[1]
            << "] -> " << ctx.out("pool.csv") << "\n";
  return 0;
}

std::vector<ScenarioSample> load_pool(const Context& ctx, const std::string& pool_path) {
  return load_pool_csv(pool_path.empty() ? ctx.out("pool.csv") : pool_path, ctx.nc.n(),
                       ctx.nc.period_count);
}

SelectionResult run_strategy(const Context& ctx, const std::vector<ScenarioSample>& pool,
                             const std::string& strategy, int d, int initial) {
  auto s = ctx.config.value("sampling", nlohmann::json::object());
  int clusters = s.value("clusters", 4);
  std::uint64_t seed = domain_seed(ctx.seed, SeedDomain::Sampling);
  if (strategy == "HS1")
    return hybrid_select(pool, ctx.nc, HybridPipeline::HS1, d, clusters, seed);
  if (strategy == "HS2")
    return hybrid_select(pool, ctx.nc, HybridPipeline::HS2, d, clusters, seed);
  std::vector<Vec> feats;
  feats.reserve(pool.size());
  for (const auto& smp : pool) feats.push_back(flatten_sample(smp));
  if (strategy == "DBS") return dbs_select(feats, d, initial);
  if (strategy == "RLS") return rls_select(feats, d, initial, RlsMode::Greedy, seed);
  if (strategy == "RANDOM") return random_select(int(pool.size()), d, ctx.seed);
  throw ValidationError("unknown strategy '" + strategy + "'");
}

int cmd_sample(const Context& ctx, const std::string& pool_path, std::string strategy,
               int d, int initial) {
  auto pool = load_pool(ctx, pool_path);
  auto s = ctx.config.value("sampling", nlohmann::json::object());
  if (strategy.empty()) strategy = s.value("strategy", "HS1");
  if (d <= 0) d = ctx.config.value("run", nlohmann::json::object())
                      .value("scenario_count", int(pool.size()));
  d = std::min<int>(d, int(pool.size()));
  auto sel = run_strategy(ctx, pool, strategy, d, initial);
  save_selection(sel, ctx.out("selection.json"));
  std::cout << "selection: " << strategy << " picked " << sel.ids.size()
            << " scenarios -> " << ctx.out("selection.json") << "\n";
  return 0;
}

nlohmann::json mat_json(const Mat& m) {
  auto rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_unjson(const nlohmann::json& j) {
  int rows = int(j.size());
  int cols = rows > 0 ? int(j.at(0).size()) : 0;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

AssembleOptions assemble_options(const Context& ctx) {
  AssembleOptions a;
  auto run = ctx.config.value("run", nlohmann::json::object());
  a.energy_bounds_per_scenario = run.value("energy_bounds_per_scenario", true);
  a.hull_variant = run.value("hull_variant", std::string("r-scaled")) == "literal"
                       ? HullVariant::Literal
                       : HullVariant::RScaled;
  return a;
}

int cmd_solve(const Context& ctx, const std::string& pool_path,
              const std::string& scenarios_path, const std::string& models_path, int count) {
  auto reg = load_registry(models_path.empty() ? ctx.out("models.json") : models_path);
  auto pool = load_pool(ctx, pool_path);
  auto sel = load_selection(scenarios_path.empty() ? ctx.out("selection.json")
                                                   : scenarios_path);
  if (count <= 0) count = int(sel.ids.size());
  std::vector<ScenarioSample> scenarios;
  for (int k = 0; k < count && k < int(sel.ids.size()); ++k)
    scenarios.push_back(pool.at(sel.ids[k]));

  auto scheme = RecourseScheme::from_case(ctx.nc);
  auto part = validate_participation(scheme, 1e-9);
  if (!part.ok)
    throw ValidationError("participation factors do not sum to one (deficit " +
                          std::to_string(part.deficit_p) + ")");

  auto prog = assemble(ctx.nc, reg, scenarios, scheme, assemble_options(ctx));
  auto [ps, rep] = solve_program(prog, solver_options(ctx));
  nlohmann::json j;
  j["status"] = rep.status_str();
  j["objective"] = rep.primal_objective;
  j["iterations"] = rep.iterations;
  j["primal_residual"] = rep.primal_residual;
  j["dual_residual"] = rep.dual_residual;
  j["scenario_count"] = int(scenarios.size());
  j["d_prime"] = prog.layout.decision_dimension();
  j["total_variables"] = prog.layout.total_variables();
  j["gen_p"] = mat_json(ps.gen_p);
  j["gen_q"] = mat_json(ps.gen_q);
  j["es_p"] = mat_json(ps.es_p);
  j["es_q"] = mat_json(ps.es_q);
  j["es_loss"] = mat_json(ps.es_loss);
  j["z"] = ps.z;
  std::ofstream out(ctx.out("solution.json"));
  out << j.dump(2) << "\n";
  std::cout << "solve: " << rep.status_str() << ", objective " << rep.primal_objective
            << " over " << scenarios.size() << " scenarios -> " << ctx.out("solution.json")
            << "\n";
  if (rep.status != SolveStatus::Optimal) return 3;
  return 0;
}

ProgramSolution load_solution(const Context& ctx, const std::string& path) {
  std::ifstream in(path.empty() ? ctx.out("solution.json") : path);
  if (!in) throw ParseError("cannot open solution file");
  nlohmann::json j;
  in >> j;
  if (j.value("status", "") != "optimal")
    throw SolverError("stored solution is not optimal");
  ProgramSolution ps;
  ps.gen_p = mat_unjson(j.at("gen_p"));
  ps.gen_q = mat_unjson(j.at("gen_q"));
  ps.es_p = mat_unjson(j.at("es_p"));
  ps.es_q = mat_unjson(j.at("es_q"));
  ps.es_loss = mat_unjson(j.at("es_loss"));
  ps.z = j.at("z").get<double>();
  ps.objective = j.at("objective").get<double>();
  return ps;
}

int cmd_validate(const Context& ctx, const std::string& solution_path,
                 const std::string& models_path, int count) {
  auto v = ctx.config.value("validation", nlohmann::json::object());
  if (count <= 0) count = v.value("pool_size", 1000);
  double epsilon = v.value("epsilon", 0.05);
  auto envelope = ctx.config.value("uncertainty", nlohmann::json::object())
                      .value("envelope", std::vector<double>{0.7, 1.3});

  auto ps = load_solution(ctx, solution_path);
  ModelRegistry reg;
  const ModelRegistry* reg_ptr = nullptr;
  std::string models = models_path.empty() ? ctx.out("models.json") : models_path;
  if (fs::exists(models)) {
    reg = load_registry(models);
    reg_ptr = &reg;
  }
  auto fresh = generate_scenario_pool(ctx.nc, envelope.at(0), envelope.at(1), count,
                                      domain_seed(ctx.seed, SeedDomain::Validation));
  ValidationOptions vopts;
  vopts.pu_tol = v.value("pu_tol", 1e-5);
  auto scheme = RecourseScheme::from_case(ctx.nc);
  auto rep = estimate_violation(ctx.nc, ctx.y, reg_ptr, ps, scheme, fresh, vopts);
  write_validation_json(rep, ctx.out("validation.json"));
  double margin = rep.wilson.hi - rep.wilson.rate;
  std::cout << "validate: rate " << rep.wilson.rate << " (wilson [" << rep.wilson.lo << ", "
            << rep.wilson.hi << "]), oracle failures " << rep.oracle_failures << " -> "
            << ctx.out("validation.json") << "\n";
  if (rep.wilson.rate > epsilon + margin) return 4;
  return 0;
}

int cmd_verify_curve(const Context& ctx, const std::string& pool_path,
                     const std::string& models_path, std::string strategy, int rounds,
                     int initial) {
  auto reg = load_registry(models_path.empty() ? ctx.out("models.json") : models_path);
  auto pool = load_pool(ctx, pool_path);
  auto verify = ctx.config.value("verify", nlohmann::json::object());
  if (rounds <= 0) rounds = verify.value("rounds", 16);
  double flatten_tol = verify.value("flatten_tol", 1e-4);
  if (strategy.empty()) strategy = "DBS";
  rounds = std::min<int>(rounds, int(pool.size()));

  auto scheme = RecourseScheme::from_case(ctx.nc);
  auto [base, base_rep] =
      deterministic_base_cost(ctx.nc, reg, scheme, assemble_options(ctx), solver_options(ctx));
  if (base_rep.status != SolveStatus::Optimal) return 3;

  auto sel = run_strategy(ctx, pool, strategy, rounds, initial);
  auto curve = sequential_verification(ctx.nc, reg, scheme, pool, sel, rounds,
                                       base_rep.primal_objective, flatten_tol,
                                       assemble_options(ctx), solver_options(ctx));
  std::string name = "curve_" + strategy + ".csv";
  write_curve_csv(curve, ctx.out(name));
  nlohmann::json j = {{"strategy", strategy},
                      {"flatten_count", curve.flatten_count},
                      {"base_cost", base_rep.primal_objective},
                      {"final_objective", curve.objective.empty() ? 0.0
                                                                  : curve.objective.back()}};
  std::ofstream out(ctx.out("curve_" + strategy + ".json"));
  out << j.dump(2) << "\n";
  std::cout << "verify-curve: " << strategy << " flattens at " << curve.flatten_count
            << " scenarios -> " << ctx.out(name) << "\n";
  for (const auto& st : curve.status)
    if (st != "optimal") return 3;
  return 0;
}

int cmd_report(const Context& ctx, const std::string& solution_path,
               const std::string& models_path) {
  auto v = ctx.config.value("validation", nlohmann::json::object());
  double epsilon = v.value("epsilon", 0.05);
  double beta = v.value("beta", 1e-4);
  auto s = ctx.config.value("sampling", nlohmann::json::object());

  DecisionLayout layout;
  layout.n = ctx.nc.n();
  layout.n_gen = int(ctx.nc.generators.size());
  layout.n_es = int(ctx.nc.storage_units.size());
  layout.n_lines = int(ctx.nc.branches.size());
  layout.T = ctx.nc.period_count;
  layout.S = 1;
  long long d_prime = layout.decision_dimension();

  SampleSizeSpec spec;
  spec.d_prime = int(d_prime);
  spec.epsilon = epsilon;
  spec.beta = beta;
  spec.n2 = s.value("n2", 186);
  spec.n2_analytic = s.value("n2_analytic", false);

  write_sizes_csv({{ctx.nc.name, d_prime, fast_sample_size(d_prime, spec),
                    rs_sample_size(epsilon, beta, d_prime)}},
                  ctx.out("sizes.csv"));

  auto reg = load_registry(models_path.empty() ? ctx.out("models.json") : models_path);
  auto scheme = RecourseScheme::from_case(ctx.nc);
  auto [base, base_rep] =
      deterministic_base_cost(ctx.nc, reg, scheme, assemble_options(ctx), solver_options(ctx));
  auto ps = load_solution(ctx, solution_path);
  write_costs_csv({{ctx.nc.name, base_rep.primal_objective, ps.objective}},
                  ctx.out("costs.csv"));

  // best/worst flattening counts over any curves present in the output dir
  std::map<std::string, SelectionRow> rows;
  for (const auto& entry : fs::directory_iterator(ctx.out_dir)) {
    auto name = entry.path().filename().string();
    if (name.rfind("curve_", 0) == 0 && entry.path().extension() == ".json") {
      std::ifstream in(entry.path());
      nlohmann::json j;
      in >> j;
      std::string strat = j.value("strategy", "?");
      int flat = j.value("flatten_count", -1);
      auto [it, inserted] = rows.try_emplace(strat, SelectionRow{strat, flat, flat});
      if (!inserted) {
        it->second.best = std::min(it->second.best, flat);
        it->second.worst = std::max(it->second.worst, flat);
      }
    }
  }
  std::vector<SelectionRow> sel_rows;
  for (const auto& [name, row] : rows) sel_rows.push_back(row);
  write_selections_csv(sel_rows, ctx.out("selections.csv"));
  write_manifest(ctx.config, ctx.seed, ctx.out("manifest.json"));
  std::cout << "report: sizes.csv costs.csv selections.csv manifest.json in "
            << ctx.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chance-constrained multi-period grid operation toolkit"};
  app.require_subcommand(1);

  std::string case_path, config_path, profile_path, out_dir = ".";
  std::uint64_t seed = 1;
  double tol = 0.0;
  app.add_option("--case", case_path, "MATPOWER-style case file")->required();
  app.add_option("--config", config_path, "sidecar configuration document");
  app.add_option("--profile", profile_path, "hourly load profile csv");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--tol", tol, "solver tolerance override");

  auto* gen = app.add_subcommand("gen-data", "sample labeled training voltages");
  int samples = 0;
  double radius = 0.0;
  gen->add_option("--samples", samples, "sample count");
  gen->add_option("--radius", radius, "voltage box half-width");

  auto* train = app.add_subcommand("train", "fit the convex quadratic surrogates");
  std::string dataset_path;
  train->add_option("--dataset", dataset_path, "training dataset path");

  auto* pool = app.add_subcommand("pool", "generate the scenario pool");
  int pool_count = 0;
  pool->add_option("--count", pool_count, "pool size");

  auto* sample = app.add_subcommand("sample", "select effective scenarios");
  std::string pool_path, strategy;
  int select_count = 0, initial = 0;
  sample->add_option("--pool", pool_path, "pool csv path");
  sample->add_option("--strategy", strategy, "HS1|HS2|DBS|RLS|RANDOM");
  sample->add_option("--count", select_count, "number of scenarios to select");
  sample->add_option("--initial", initial, "initial scenario id");

  auto* solve_cmd = app.add_subcommand("solve", "assemble and solve the scenario program");
  std::string scenarios_path, models_path;
  int solve_count = 0;
  solve_cmd->add_option("--pool", pool_path, "pool csv path");
  solve_cmd->add_option("--scenarios", scenarios_path, "selection json path");
  solve_cmd->add_option("--models", models_path, "model registry path");
  solve_cmd->add_option("--count", solve_count, "use only the first scenarios");

  auto* validate_cmd = app.add_subcommand("validate", "a-posteriori statistical validation");
  std::string solution_path;
  int validate_count = 0;
  validate_cmd->add_option("--solution", solution_path, "solution json path");
  validate_cmd->add_option("--models", models_path, "model registry path");
  validate_cmd->add_option("--count", validate_count, "fresh pool size");

  auto* verify = app.add_subcommand("verify-curve", "sequential verification curve");
  int rounds = 0;
  verify->add_option("--pool", pool_path, "pool csv path");
  verify->add_option("--models", models_path, "model registry path");
  verify->add_option("--strategy", strategy, "HS1|HS2|DBS|RLS|RANDOM");
  verify->add_option("--rounds", rounds, "number of prefix rounds");
  verify->add_option("--initial", initial, "initial scenario id");

  auto* report = app.add_subcommand("report", "emit table-shaped csv reports");
  report->add_option("--solution", solution_path, "solution json path");
  report->add_option("--models", models_path, "model registry path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    auto ctx = load_context(case_path, config_path, profile_path, out_dir, seed, tol);
    if (gen->parsed()) return cmd_gen_data(ctx, samples, radius);
    if (train->parsed()) return cmd_train(ctx, dataset_path);
    if (pool->parsed()) return cmd_pool(ctx, pool_count);
    if (sample->parsed()) return cmd_sample(ctx, pool_path, strategy, select_count, initial);
    if (solve_cmd->parsed())
      return cmd_solve(ctx, pool_path, scenarios_path, models_path, solve_count);
    if (validate_cmd->parsed())
      return cmd_validate(ctx, solution_path, models_path, validate_count);
    if (verify->parsed())
      return cmd_verify_curve(ctx, pool_path, models_path, strategy, rounds, initial);
    if (report->parsed()) return cmd_report(ctx, solution_path, models_path);
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
