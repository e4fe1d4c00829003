// Command line surface: every subcommand parses flags (optionally seeded from
// an INI config whose sections match subcommand names), runs one lab
// operation, writes its artifacts plus a JSON manifest into the output
// directory, and appends a line to run_log.jsonl.
//
// Exit codes: 0 success, 1 validation or input error, 2 internal failure.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "addrate/additive_model.hpp"
#include "addrate/complexity.hpp"
#include "addrate/eigenbasis.hpp"
#include "addrate/estimators.hpp"
#include "addrate/io.hpp"
#include "addrate/lowerbound.hpp"
#include "addrate/rate_lab.hpp"
#include "addrate/rng.hpp"
#include "addrate/synthgen.hpp"

namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

// User-facing failure: message to stderr, exit 1.
struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// "a,b,c" as an explicit list, or "lo:hi:count" as an inclusive linear grid.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::stringstream ss(text);
    std::string part;
    std::vector<double> p;
    while (std::getline(ss, part, ':')) p.push_back(std::stod(part));
    if (p.size() != 3 || p[2] < 1) throw CliError("grid spec must be lo:hi:count");
    const int count = static_cast<int>(p[2]);
    for (int i = 0; i < count; ++i)
      out.push_back(count == 1 ? p[0] : p[0] + (p[1] - p[0]) * i / (count - 1));
    return out;
  }
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(std::stod(part));
  }
  if (out.empty()) throw CliError("empty grid spec");
  return out;
}

std::vector<int> parse_int_grid(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_grid(text)) out.push_back(static_cast<int>(std::llround(v)));
  return out;
}

struct RunContext {
  std::string out_dir = ".";
  std::string label;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string subcommand;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started;

  std::string path_of(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
  }

  void write_manifest() {
    const std::string finished = timestamp_now();
    const std::string name = "manifest_" + subcommand + "_" + label + ".json";
    json manifest{{"subcommand", subcommand}, {"config", config},
                  {"seed", seed},            {"version", kVersion},
                  {"inputs", inputs},        {"outputs", outputs},
                  {"started", started},      {"finished", finished}};
    std::ofstream out(path_of(name));
    if (!out) throw std::runtime_error("cannot write manifest " + name);
    out << manifest.dump(2) << "\n";

    std::ofstream log(path_of("run_log.jsonl"), std::ios::app);
    log << json{{"subcommand", subcommand},
                {"label", label},
                {"seed", seed},
                {"started", started},
                {"finished", finished},
                {"outputs", outputs}}
               .dump()
        << "\n";
  }
};

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw CliError("missing input file: " + path);
}

int run_gen_data(RunContext& ctx, const addrate::GenConfig& cfg, const std::string& stem) {
  addrate::validate(cfg);
  if (addrate::outside_dimension_band(cfg))
    std::cerr << "warning: (n, d) lies outside the dimension band n^{q/2} <= d <= e^n\n";
  const addrate::EigenSystem es = addrate::make_eigen_system(cfg.alpha, cfg.k_max);
  const addrate::Dataset ds = addrate::sample_dataset(es, cfg);
  const std::string out_stem = ctx.path_of(stem);
  addrate::io::save_dataset(out_stem, ds, cfg);
  ctx.outputs = {out_stem + ".csv", out_stem + ".truth.json", out_stem + ".json"};
  std::cout << "wrote " << out_stem << ".csv (n=" << ds.n() << ", d=" << ds.d() << ")\n";
  return 0;
}

int run_fit(RunContext& ctx, const std::string& data_stem, const std::string& estimator,
            addrate::FitConfig fit_cfg, int oracle_j, double grid_step, double grid_bound,
            const std::string& out_name) {
  require_file(data_stem + ".json");
  require_file(data_stem + ".csv");
  require_file(data_stem + ".truth.json");
  const addrate::io::LoadedDataset loaded = addrate::io::load_dataset(data_stem);
  ctx.inputs = {data_stem + ".csv", data_stem + ".truth.json", data_stem + ".json"};

  const addrate::EigenSystem es =
      addrate::make_eigen_system(loaded.cfg.alpha, loaded.cfg.k_max);
  fit_cfg.seed = ctx.seed;
  fit_cfg.threads = ctx.threads;

  addrate::FitResult fit;
  if (estimator == "lq") {
    fit = addrate::fit_lq_constrained(es, loaded.ds, fit_cfg);
  } else if (estimator == "mixed") {
    fit = addrate::fit_mixed_penalty(es, loaded.ds, fit_cfg);
  } else if (estimator == "oracle") {
    fit = addrate::fit_oracle_single(es, loaded.ds, oracle_j, fit_cfg.ridge);
  } else if (estimator == "brute") {
    fit = addrate::brute_force_lse(es, loaded.ds, grid_step, grid_bound, fit_cfg.q, fit_cfg.R);
  } else {
    throw CliError("estimator must be one of lq|mixed|oracle|brute");
  }

  const std::string out_path = ctx.path_of(out_name);
  addrate::io::save_fit(out_path, fit, es);
  ctx.outputs = {out_path};

  std::cout << "estimator=" << addrate::estimator_kind_name(fit.kind)
            << " risk=" << addrate::io::format_double(fit.empirical_risk)
            << " pop_error_sq=" << addrate::io::format_double(fit.population_error_sq)
            << " mass=" << addrate::io::format_double(fit.lq_mass_value)
            << " active=" << fit.active_set.size() << " converged=" << fit.converged << "\n";

  const addrate::BasicInequality bi = addrate::basic_inequality_check(es, fit, loaded.ds);
  if (fit.kind == addrate::EstimatorKind::lq_constrained) {
    if (!bi.applicable)
      std::cerr << "warning: basic-inequality check skipped (truth infeasible for the ball)\n";
    else
      std::cout << "basic_inequality=" << (bi.pass ? "pass" : "fail")
                << " fit_risk=" << addrate::io::format_double(bi.fit_risk)
                << " truth_risk=" << addrate::io::format_double(bi.truth_risk) << "\n";
  }
  return 0;
}

int run_complexity(RunContext& ctx, const std::string& kind, int n, int d, double alpha, int k_max,
                   int replicates, double beta, const std::string& u_spec, int transfer_trials,
                   const std::string& csv_name) {
  const addrate::EigenSystem es = addrate::make_eigen_system(alpha, k_max);
  const std::vector<double> u_grid = parse_grid(u_spec);
  addrate::ComplexityCurve curve;
  if (kind == "rademacher")
    curve = addrate::rademacher_curve(es, n, d, u_grid, replicates, ctx.seed, ctx.threads);
  else if (kind == "gaussian")
    curve = addrate::gaussian_curve(es, n, d, u_grid, replicates, ctx.seed, ctx.threads);
  else
    throw CliError("kind must be rademacher or gaussian");

  const addrate::EnvelopeReport rep = addrate::envelope_check(curve, beta);
  const std::string csv_path = ctx.path_of(csv_name);
  addrate::io::save_curve_csv(csv_path, curve, rep);
  ctx.outputs = {csv_path};
  std::cout << "kind=" << kind << " c_hat=" << addrate::io::format_double(rep.c_hat)
            << " at u=" << addrate::io::format_double(curve.u_grid(rep.arg_u)) << "\n";

  if (transfer_trials > 0) {
    const addrate::NormTransferReport nt =
        addrate::norm_transfer_check(es, n, d, beta, transfer_trials, ctx.seed);
    std::cout << "norm_transfer c2_forward=" << addrate::io::format_double(nt.c2_forward)
              << " c2_reverse=" << addrate::io::format_double(nt.c2_reverse)
              << " penalty=" << addrate::io::format_double(nt.penalty) << "\n";
    ctx.config["transfer_c2_forward"] = nt.c2_forward;
    ctx.config["transfer_c2_reverse"] = nt.c2_reverse;
  }
  return 0;
}

int run_packing_check(RunContext& ctx, int d, int s, int n_cols, double q, double alpha, int k_max,
                      int fano_n, double fano_sigma, const std::string& json_name,
                      const std::string& csv_name) {
  const addrate::EigenSystem es = addrate::make_eigen_system(alpha, k_max);
  const addrate::PackingSet set = addrate::build_packing_set(es, d, s, n_cols, q, ctx.seed);

  double max_mass = 0.0;
  for (const auto& f : set.functions) max_mass = std::max(max_mass, addrate::lq_mass(es, f, q));
  const addrate::SeparationReport sep = addrate::pairwise_separation(es, set);
  const addrate::FanoReport fano = addrate::fano_bound(es, set, fano_n, fano_sigma);

  const std::string json_path = ctx.path_of(json_name);
  addrate::io::save_packing(json_path, set);
  const std::string csv_path = ctx.path_of(csv_name);
  {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write " + csv_path);
    csv << "i,j,distance_sq,bound,pass\n";
    for (const auto& row : addrate::separation_rows(es, set))
      csv << row.i << "," << row.j << "," << addrate::io::format_double(row.distance_sq) << ","
          << addrate::io::format_double(row.bound) << "," << (row.pass ? 1 : 0) << "\n";
  }
  ctx.outputs = {json_path, csv_path};

  std::cout << "members=" << set.functions.size() << " (supports=" << set.m_supports
            << " x fills=" << set.m_fills << ")\n"
            << "max_lq_mass=" << addrate::io::format_double(max_mass) << "\n"
            << "min_separation_sq=" << addrate::io::format_double(sep.min_sep_sq)
            << " bound=" << addrate::io::format_double(sep.bound) << " pass=" << sep.pass << "\n"
            << "fano_bound=" << addrate::io::format_double(fano.bound)
            << " (envelope variant=" << addrate::io::format_double(fano.bound_envelope)
            << ") at n=" << fano_n << " sigma=" << addrate::io::format_double(fano_sigma) << "\n";
  return sep.pass && max_mass <= 1.0 + 1e-10 ? 0 : 1;
}

int run_rate_sweep_cmd(RunContext& ctx, addrate::SweepSpec spec, const std::string& slope_axis) {
  spec.seed = ctx.seed;
  spec.threads = ctx.threads;
  spec.csv_path = ctx.path_of(spec.csv_path);
  const std::vector<addrate::SweepRecord> records = addrate::run_rate_sweep(spec);
  ctx.outputs = {spec.csv_path};
  std::cout << "cells=" << records.size() << " -> " << spec.csv_path << "\n";
  if (slope_axis == "n" || slope_axis == "d") {
    const addrate::SlopeReport rep = addrate::fit_rate_exponent(
        records, slope_axis == "n" ? addrate::SweepAxis::n : addrate::SweepAxis::d);
    std::cout << "slope_" << slope_axis << "=" << addrate::io::format_double(rep.slope)
              << " se=" << addrate::io::format_double(rep.std_error) << " points=" << rep.points
              << "\n";
    ctx.config["fitted_slope"] = rep.slope;
    ctx.config["fitted_slope_se"] = rep.std_error;
  }
  return 0;
}

int run_phase_diagram(RunContext& ctx, const std::string& alpha_spec, const std::string& v_spec,
                      int n, double q, const std::string& csv_name,
                      const std::string& script_name) {
  const std::string csv_path = ctx.path_of(csv_name);
  const std::string script_path = ctx.path_of(script_name);
  addrate::phase_diagram(parse_grid(alpha_spec), parse_grid(v_spec), n, q, csv_path, script_path);
  ctx.outputs = {csv_path, script_path};
  std::cout << "wrote " << csv_path << " and " << script_path << "\n";
  return 0;
}

int run_subopt(RunContext& ctx, addrate::SweepSpec spec, const std::string& mult_spec,
               const std::string& csv_name) {
  spec.seed = ctx.seed;
  spec.threads = ctx.threads;
  const std::string csv_path = ctx.path_of(csv_name);
  addrate::suboptimality_experiment(spec, parse_grid(mult_spec), csv_path);
  ctx.outputs = {csv_path};
  std::cout << "wrote " << csv_path << "\n";
  return 0;
}

// Fast invariant pass over every module; each line reports one property.
int run_verify(RunContext& ctx) {
  int failures = 0;
  const auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  const addrate::EigenSystem es = addrate::make_eigen_system(1.0, 64);
  check("kernel diagonal normalized to 1",
        std::abs(addrate::kernel_eval(es, 0.0, 0.0) - 1.0) < 1e-12);
  check("basis value phi_1(0) = sqrt(2)",
        std::abs(addrate::eigenfunction_eval(1, 0.0) - std::sqrt(2.0)) < 1e-12);

  {
    addrate::AdditiveFunction f = addrate::zero_additive(3, 64, 1.0);
    f.theta(0, 0) = std::sqrt(es.lambda_eff(1));
    f.theta(2, 1) = std::sqrt(es.lambda_eff(2));
    check("unit components have unit lq mass per component",
          std::abs(addrate::lq_mass(es, f, 0.5) - 2.0) < 1e-10);
    check("population norm is exact coefficient arithmetic",
          std::abs(addrate::l2_pi_norm_sq(f) - f.theta.squaredNorm()) == 0.0);
  }
  {
    addrate::GenConfig cfg;
    cfg.n = 200;
    cfg.d = 6;
    cfg.q = 0.5;
    cfg.R = 1.0;
    cfg.s_active = 3;
    cfg.seed = ctx.seed;
    const addrate::AdditiveFunction truth = addrate::sample_truth(es, cfg);
    check("sampled truth sits on the mass budget",
          std::abs(addrate::lq_mass(es, truth, cfg.q) - cfg.R) < 1e-10);
  }
  {
    const addrate::PackingSet set = addrate::build_packing_set(es, 8, 2, 2, 0.5, ctx.seed);
    double max_mass = 0.0;
    for (const auto& f : set.functions) max_mass = std::max(max_mass, addrate::lq_mass(es, f, 0.5));
    check("packing members stay inside the unit ball", max_mass <= 1.0 + 1e-10);
    check("pairwise separation clears the floor", addrate::pairwise_separation(es, set).pass);
  }
  {
    const Eigen::ArrayXd lam = es.lambdas_eff();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(64);
    b(0) = 1.0;
    const addrate::InnerMax im = addrate::sup_linear_over_ellipsoid_and_ball(b, lam, 1.0);
    check("ball-inactive maximizer matches the closed form",
          std::abs(im.value - std::sqrt(lam(0))) < 1e-10);
  }
  {
    const addrate::RateBreakdown r = addrate::theoretical_rate(1024, 1024.0, 0.5, 2.0);
    check("smooth term closed form at n=1024, alpha=2",
          std::abs(r.smooth_term - 0.00390625) < 1e-15);
    check("boundary alpha classifies sparse",
          addrate::regime_classify(1000, 50.0, 0.5, 1.5) == addrate::Regime::sparse);
  }
  {
    addrate::GenConfig cfg;
    cfg.n = 60;
    cfg.d = 2;
    cfg.k_max = 64;
    cfg.sigma = 0.1;
    cfg.s_active = 1;
    cfg.seed = ctx.seed;
    const addrate::Dataset ds = addrate::sample_dataset(es, cfg);
    const addrate::FitResult fit = addrate::fit_oracle_single(es, ds, 1, 1e-3);
    check("oracle fit runs and reports finite risk", std::isfinite(fit.empirical_risk));
    const double kl = addrate::kl_pairwise(ds.truth, fit.fhat, ds, 1.0);
    const double direct =
        ds.n() * addrate::empirical_l2_sq(addrate::difference(ds.truth, fit.fhat), ds) / 2.0;
    check("divergence identity against empirical distance", std::abs(kl - direct) < 1e-10);
  }

  std::cout << (failures == 0 ? "verify: all invariants hold\n"
                              : "verify: " + std::to_string(failures) + " failures\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation laboratory for sparse additive models over a truncated cosine basis"};
  app.set_config("--config", "", "INI config; sections named after subcommands");
  app.require_subcommand(1);

  std::string out_dir = [] {
    const char* env = std::getenv("ADDRATE_OUT_DIR");
    return std::string(env ? env : ".");
  }();
  std::uint64_t seed = 0;
  int threads = 1;
  std::string label;
  app.add_option("--out-dir", out_dir, "Output directory (env ADDRATE_OUT_DIR)");
  app.add_option("--seed", seed, "Base seed; all randomness derives from it");
  app.add_option("--threads", threads, "Worker thread cap");
  app.add_option("--label", label, "Manifest label (default: seed)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Sample a dataset bundle from a synthetic truth");
  addrate::GenConfig gen_cfg;
  std::string gen_stem = "dataset";
  gen->add_option("--n", gen_cfg.n, "Sample size");
  gen->add_option("--d", gen_cfg.d, "Ambient dimension");
  gen->add_option("--k-max", gen_cfg.k_max, "Basis truncation");
  gen->add_option("--alpha", gen_cfg.alpha, "Spectrum decay exponent");
  gen->add_option("--q", gen_cfg.q, "Ball exponent in (0,1]");
  gen->add_option("--R", gen_cfg.R, "Ball radius");
  gen->add_option("--sigma", gen_cfg.sigma, "Noise level");
  gen->add_option("--s-active", gen_cfg.s_active, "Active components");
  gen->add_option("--stem", gen_stem, "Output bundle stem");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit an estimator to a saved dataset bundle");
  std::string fit_data = "dataset";
  std::string fit_estimator = "lq";
  std::string fit_out = "fit.json";
  addrate::FitConfig fit_cfg;
  int fit_oracle_j = 1;
  double fit_grid_step = 0.02;
  double fit_grid_bound = 0.0;
  fit->add_option("--data", fit_data, "Input bundle stem (path without extension)");
  fit->add_option("--estimator", fit_estimator, "lq|mixed|oracle|brute");
  fit->add_option("--q", fit_cfg.q, "Ball exponent in (0,1]");
  fit->add_option("--R", fit_cfg.R, "Ball radius");
  fit->add_option("--a-n", fit_cfg.a_n, "Mixed penalty level (<=0: default scale)");
  fit->add_option("--mu-tol", fit_cfg.mu_tol, "Relative mass band for the constraint");
  fit->add_option("--tol", fit_cfg.tol, "Sweep convergence tolerance");
  fit->add_option("--max-outer", fit_cfg.max_outer, "Sweep budget");
  fit->add_option("--max-inner", fit_cfg.max_inner, "Reweighting iterations per block");
  fit->add_option("--mu-iters", fit_cfg.mu_iters, "Multiplier search budget");
  fit->add_option("--restarts", fit_cfg.restarts, "Total initializations for the lq fit");
  fit->add_option("--ridge", fit_cfg.ridge, "Oracle ridge level");
  fit->add_option("--oracle-j", fit_oracle_j, "Oracle coordinate (1-based)");
  fit->add_option("--grid-step", fit_grid_step, "Brute-force grid step");
  fit->add_option("--bound", fit_grid_bound, "Brute-force coefficient box (<=0: auto)");
  fit->add_option("--out", fit_out, "Fit report filename");

  // complexity
  auto* cpx = app.add_subcommand("complexity", "Monte Carlo complexity curves and envelopes");
  std::string cpx_kind = "rademacher";
  int cpx_n = 200, cpx_d = 20, cpx_k_max = 64, cpx_reps = 200, cpx_transfer = 0;
  double cpx_alpha = 1.0, cpx_beta = 1.0;
  std::string cpx_u = "0.01,0.02,0.05,0.1,0.2,0.5,1.0";
  std::string cpx_csv = "complexity_curve.csv";
  cpx->add_option("--kind", cpx_kind, "rademacher|gaussian");
  cpx->add_option("--n", cpx_n, "Sample size");
  cpx->add_option("--d", cpx_d, "Union-bound dimension");
  cpx->add_option("--alpha", cpx_alpha, "Spectrum decay exponent");
  cpx->add_option("--k-max", cpx_k_max, "Basis truncation");
  cpx->add_option("--replicates", cpx_reps, "Monte Carlo replicates");
  cpx->add_option("--beta", cpx_beta, "Quantile/envelope confidence exponent");
  cpx->add_option("--u-grid", cpx_u, "Radii: comma list or lo:hi:count");
  cpx->add_option("--transfer-trials", cpx_transfer, "Also run the norm-transfer check");
  cpx->add_option("--csv", cpx_csv, "Curve CSV filename");

  // packing-check
  auto* pack = app.add_subcommand("packing-check", "Build and verify a hypothesis packing");
  int pk_d = 32, pk_s = 4, pk_n_cols = 2, pk_k_max = 64, pk_fano_n = 512;
  double pk_q = 0.5, pk_alpha = 1.0, pk_fano_sigma = 1.0;
  std::string pk_json = "packing.json", pk_csv = "packing_pairs.csv";
  pack->add_option("--d", pk_d, "Ambient dimension");
  pack->add_option("--s", pk_s, "Support size");
  pack->add_option("--N", pk_n_cols, "Basis offsets per component");
  pack->add_option("--q", pk_q, "Ball exponent in (0,1]");
  pack->add_option("--alpha", pk_alpha, "Spectrum decay exponent");
  pack->add_option("--k-max", pk_k_max, "Basis truncation (needs 2N <= k_max)");
  pack->add_option("--fano-n", pk_fano_n, "Witness sample size for the information bound");
  pack->add_option("--fano-sigma", pk_fano_sigma, "Witness noise level");
  pack->add_option("--json", pk_json, "Packing JSON filename");
  pack->add_option("--csv", pk_csv, "Pairwise separation CSV filename");

  // rate-sweep
  auto* sweep = app.add_subcommand("rate-sweep", "Replicated error sweep over a parameter grid");
  addrate::SweepSpec sweep_spec;
  std::string sw_n = "250,500,1000", sw_d = "10", sw_q = "0.5", sw_alpha = "1.0";
  std::string sw_slope_axis = "none";
  sweep_spec.csv_path = "rate_sweep.csv";
  sweep->add_option("--n-grid", sw_n, "Sample sizes (comma list or lo:hi:count)");
  sweep->add_option("--d-grid", sw_d, "Dimensions");
  sweep->add_option("--q-grid", sw_q, "Ball exponents");
  sweep->add_option("--alpha-grid", sw_alpha, "Decay exponents");
  sweep->add_option("--replicates", sweep_spec.replicates, "Replicates per cell");
  sweep->add_option("--sigma", sweep_spec.sigma, "Noise level");
  sweep->add_option("--R", sweep_spec.R, "Ball radius");
  sweep->add_option("--s-active", sweep_spec.s_active, "Active components in the truth");
  sweep->add_option("--k-max", sweep_spec.k_max, "Basis truncation");
  sweep->add_option("--estimator", sweep_spec.estimator, "oracle|lq|mixed");
  sweep->add_option("--oracle-j", sweep_spec.oracle_j,
                    "Oracle coordinate (1-based; <=0: truth's first active)");
  sweep->add_option("--ridge-c", sweep_spec.ridge_c, "Oracle ridge multiplier");
  sweep->add_option("--restarts", sweep_spec.fit.restarts, "lq fit initializations");
  sweep->add_option("--max-outer", sweep_spec.fit.max_outer, "Solver sweep budget");
  sweep->add_option("--mu-iters", sweep_spec.fit.mu_iters, "Multiplier search budget");
  sweep->add_option("--csv", sweep_spec.csv_path, "Output CSV (appended, crash-safe)");
  sweep->add_option("--slope-axis", sw_slope_axis, "Fit a slope afterwards: n|d|none");

  // phase-diagram
  auto* phase = app.add_subcommand("phase-diagram", "Regime classification grid and plot script");
  std::string ph_alpha = "0.6:3.0:25", ph_v = "0.0:1.5:31";
  int ph_n = 4096;
  double ph_q = 0.5;
  std::string ph_csv = "phase_diagram.csv", ph_script = "plot_phase_diagram.py";
  phase->add_option("--alpha-grid", ph_alpha, "Decay exponents (comma list or lo:hi:count)");
  phase->add_option("--v-grid", ph_v, "log log d / log n values");
  phase->add_option("--n", ph_n, "Sample size anchoring the grid");
  phase->add_option("--q", ph_q, "Ball exponent in (0,1]");
  phase->add_option("--csv", ph_csv, "Diagram CSV filename");
  phase->add_option("--script", ph_script, "Plot script filename");

  // subopt-exp
  auto* subopt = app.add_subcommand("subopt-exp",
                                    "Mixed-penalty vs constrained fit on smooth-regime cells");
  addrate::SweepSpec so_spec;
  std::string so_n = "500", so_d = "10", so_q = "0.5", so_alpha = "1.0";
  std::string so_mult = "0.25,0.5,1,2,4";
  std::string so_csv = "subopt.csv";
  so_spec.replicates = 10;
  subopt->add_option("--n-grid", so_n, "Sample sizes");
  subopt->add_option("--d-grid", so_d, "Dimensions");
  subopt->add_option("--q-grid", so_q, "Ball exponents");
  subopt->add_option("--alpha-grid", so_alpha, "Decay exponents");
  subopt->add_option("--replicates", so_spec.replicates, "Replicates per cell");
  subopt->add_option("--sigma", so_spec.sigma, "Noise level");
  subopt->add_option("--R", so_spec.R, "Ball radius");
  subopt->add_option("--s-active", so_spec.s_active,
                     "Active components (0: many-weak heuristic)");
  subopt->add_option("--k-max", so_spec.k_max, "Basis truncation");
  subopt->add_option("--multipliers", so_mult, "Penalty level multipliers");
  subopt->add_option("--csv", so_csv, "Comparison CSV filename");

  // verify
  auto* ver = app.add_subcommand("verify", "Run the cross-module invariant suite");

  // Global flags stay valid after the subcommand name.
  for (auto* sub : {gen, fit, cpx, pack, sweep, phase, subopt, ver}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n";
    return 1;
  }

  RunContext ctx;
  ctx.out_dir = out_dir;
  ctx.seed = seed;
  ctx.threads = threads;
  ctx.label = label.empty() ? std::to_string(seed) : label;
  ctx.started = timestamp_now();

  try {
    std::filesystem::create_directories(ctx.out_dir);
    int rc = 0;
    if (gen->parsed()) {
      ctx.subcommand = "gen-data";
      gen_cfg.seed = seed;
      ctx.config = json{{"n", gen_cfg.n},     {"d", gen_cfg.d},
                        {"k_max", gen_cfg.k_max}, {"alpha", gen_cfg.alpha},
                        {"q", gen_cfg.q},     {"R", gen_cfg.R},
                        {"sigma", gen_cfg.sigma}, {"s_active", gen_cfg.s_active},
                        {"stem", gen_stem}};
      rc = run_gen_data(ctx, gen_cfg, gen_stem);
    } else if (fit->parsed()) {
      ctx.subcommand = "fit";
      ctx.config = json{{"data", fit_data},       {"estimator", fit_estimator},
                        {"q", fit_cfg.q},         {"R", fit_cfg.R},
                        {"a_n", fit_cfg.a_n},     {"mu_tol", fit_cfg.mu_tol},
                        {"restarts", fit_cfg.restarts}, {"ridge", fit_cfg.ridge},
                        {"oracle_j", fit_oracle_j},     {"grid_step", fit_grid_step},
                        {"bound", fit_grid_bound},      {"out", fit_out}};
      rc = run_fit(ctx, fit_data, fit_estimator, fit_cfg, fit_oracle_j, fit_grid_step,
                   fit_grid_bound, fit_out);
    } else if (cpx->parsed()) {
      ctx.subcommand = "complexity";
      ctx.config = json{{"kind", cpx_kind},   {"n", cpx_n},
                        {"d", cpx_d},         {"alpha", cpx_alpha},
                        {"k_max", cpx_k_max}, {"replicates", cpx_reps},
                        {"beta", cpx_beta},   {"u_grid", cpx_u},
                        {"transfer_trials", cpx_transfer}, {"csv", cpx_csv}};
      rc = run_complexity(ctx, cpx_kind, cpx_n, cpx_d, cpx_alpha, cpx_k_max, cpx_reps, cpx_beta,
                          cpx_u, cpx_transfer, cpx_csv);
    } else if (pack->parsed()) {
      ctx.subcommand = "packing-check";
      ctx.config = json{{"d", pk_d},       {"s", pk_s},
                        {"N", pk_n_cols},  {"q", pk_q},
                        {"alpha", pk_alpha}, {"k_max", pk_k_max},
                        {"fano_n", pk_fano_n}, {"fano_sigma", pk_fano_sigma}};
      rc = run_packing_check(ctx, pk_d, pk_s, pk_n_cols, pk_q, pk_alpha, pk_k_max, pk_fano_n,
                             pk_fano_sigma, pk_json, pk_csv);
    } else if (sweep->parsed()) {
      ctx.subcommand = "rate-sweep";
      sweep_spec.n_grid = parse_int_grid(sw_n);
      sweep_spec.d_grid = parse_int_grid(sw_d);
      sweep_spec.q_grid = parse_grid(sw_q);
      sweep_spec.alpha_grid = parse_grid(sw_alpha);
      ctx.config = json{{"n_grid", sw_n},       {"d_grid", sw_d},
                        {"q_grid", sw_q},       {"alpha_grid", sw_alpha},
                        {"replicates", sweep_spec.replicates},
                        {"sigma", sweep_spec.sigma},
                        {"R", sweep_spec.R},    {"s_active", sweep_spec.s_active},
                        {"k_max", sweep_spec.k_max},
                        {"estimator", sweep_spec.estimator},
                        {"oracle_j", sweep_spec.oracle_j},
                        {"ridge_c", sweep_spec.ridge_c},
                        {"csv", sweep_spec.csv_path},
                        {"slope_axis", sw_slope_axis}};
      rc = run_rate_sweep_cmd(ctx, sweep_spec, sw_slope_axis);
    } else if (phase->parsed()) {
      ctx.subcommand = "phase-diagram";
      ctx.config = json{{"alpha_grid", ph_alpha}, {"v_grid", ph_v},  {"n", ph_n},
                        {"q", ph_q},              {"csv", ph_csv},   {"script", ph_script}};
      rc = run_phase_diagram(ctx, ph_alpha, ph_v, ph_n, ph_q, ph_csv, ph_script);
    } else if (subopt->parsed()) {
      ctx.subcommand = "subopt-exp";
      so_spec.n_grid = parse_int_grid(so_n);
      so_spec.d_grid = parse_int_grid(so_d);
      so_spec.q_grid = parse_grid(so_q);
      so_spec.alpha_grid = parse_grid(so_alpha);
      // Allow the heuristic s_active = 0 through spec validation.
      if (so_spec.s_active < 0) throw CliError("s-active must be >= 0");
      ctx.config = json{{"n_grid", so_n},   {"d_grid", so_d},
                        {"q_grid", so_q},   {"alpha_grid", so_alpha},
                        {"replicates", so_spec.replicates},
                        {"sigma", so_spec.sigma},
                        {"R", so_spec.R},   {"s_active", so_spec.s_active},
                        {"k_max", so_spec.k_max},
                        {"multipliers", so_mult}, {"csv", so_csv}};
      rc = run_subopt(ctx, so_spec, so_mult, so_csv);
    } else {
      ctx.subcommand = "verify";
      ctx.config = json::object();
      rc = run_verify(ctx);
    }
    ctx.write_manifest();
    return rc;
  } catch (const CliError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
