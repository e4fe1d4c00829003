#include "addrate/rate_lab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "addrate/io.hpp"
#include "addrate/parallel.hpp"
#include "addrate/rng.hpp"

namespace addrate {

std::string regime_name(Regime r) { return r == Regime::sparse ? "Sparse" : "Smooth"; }

namespace {

void validate_rate_args(int n, double log_d, double q, double alpha) {
  if (n < 1) throw std::invalid_argument("rate needs n >= 1");
  if (!(log_d > 0.0)) throw std::invalid_argument("rate needs d >= 2 (log d > 0)");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  if (!(alpha > 0.5)) throw std::invalid_argument("alpha must exceed 1/2");
}

}  // namespace

RateBreakdown theoretical_rate_logd(int n, double log_d, double q, double alpha) {
  validate_rate_args(n, log_d, q, alpha);
  RateBreakdown r;
  r.sparse_term = std::pow(log_d / n, 1.0 - q / 2.0);
  r.smooth_term = std::pow(static_cast<double>(n), -2.0 * alpha / (2.0 * alpha + 1.0));
  r.total = r.sparse_term + r.smooth_term;
  return r;
}

RateBreakdown theoretical_rate(int n, double d, double q, double alpha) {
  if (!(d >= 2.0)) throw std::invalid_argument("rate needs d >= 2 (log d > 0)");
  return theoretical_rate_logd(n, std::log(d), q, alpha);
}

double regime_threshold_exponent(double q, double alpha) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  if (!(alpha > 0.5)) throw std::invalid_argument("alpha must exceed 1/2");
  return (2.0 / (2.0 - q)) * (1.0 / (2.0 * alpha + 1.0) - q / 2.0);
}

Regime regime_classify_logd(int n, double log_d, double q, double alpha) {
  validate_rate_args(n, log_d, q, alpha);
  if (alpha >= 1.0 / q - 0.5) return Regime::sparse;
  const double e = regime_threshold_exponent(q, alpha);
  return log_d >= std::pow(static_cast<double>(n), e) ? Regime::sparse : Regime::smooth;
}

Regime regime_classify(int n, double d, double q, double alpha) {
  if (!(d >= 2.0)) throw std::invalid_argument("rate needs d >= 2 (log d > 0)");
  return regime_classify_logd(n, std::log(d), q, alpha);
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

void validate_spec(const SweepSpec& spec) {
  if (spec.n_grid.empty() || spec.d_grid.empty() || spec.q_grid.empty() ||
      spec.alpha_grid.empty())
    throw std::invalid_argument("sweep grids must be nonempty");
  if (spec.replicates < 1) throw std::invalid_argument("sweep needs replicates >= 1");
  if (spec.k_max < 1) throw std::invalid_argument("sweep needs k_max >= 1");
  if (spec.estimator != "oracle" && spec.estimator != "lq" && spec.estimator != "mixed")
    throw std::invalid_argument("estimator must be one of oracle|lq|mixed");
  for (int n : spec.n_grid)
    if (n < 1) throw std::invalid_argument("sweep needs n >= 1");
  for (int d : spec.d_grid)
    if (d < 2) throw std::invalid_argument("sweep needs d >= 2");
  for (double q : spec.q_grid)
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  for (double a : spec.alpha_grid)
    if (!(a > 0.5)) throw std::invalid_argument("alpha must exceed 1/2");
}

constexpr const char* kSweepHeader =
    "n,d,q,alpha,estimator,median_error_sq,q25,q75,rate_total,regime,replicates,failures,seed\n";

void append_sweep_row(std::ofstream& csv, const SweepRecord& rec) {
  csv << rec.n << "," << rec.d << "," << io::format_double(rec.q) << ","
      << io::format_double(rec.alpha) << "," << rec.estimator << ","
      << io::format_double(rec.median_error_sq) << "," << io::format_double(rec.q25) << ","
      << io::format_double(rec.q75) << "," << io::format_double(rec.rate_total) << ","
      << regime_name(rec.regime) << "," << rec.replicates << "," << rec.failures << "," << rec.seed
      << "\n";
  csv.flush();
}

struct CellOutcome {
  std::vector<double> errors;  // finite per-replicate squared errors
  int failures = 0;
};

CellOutcome run_cell(const SweepSpec& spec, int n, int d, double q, double alpha,
                     std::uint64_t cell_seed) {
  const EigenSystem es = make_eigen_system(alpha, spec.k_max);
  GenConfig gen;
  gen.n = n;
  gen.d = d;
  gen.k_max = spec.k_max;
  gen.alpha = alpha;
  gen.q = q;
  gen.R = spec.R;
  gen.sigma = spec.sigma;
  gen.s_active = std::clamp(spec.s_active, 1, d);
  gen.seed = cell_seed;
  const AdditiveFunction truth = sample_truth(es, gen);

  // The oracle is handed the truth's support; an explicit index overrides.
  int oracle_j = spec.oracle_j;
  if (spec.estimator == "oracle" && oracle_j < 1) {
    const auto active = active_components(truth);
    oracle_j = active.empty() ? 1 : active.front() + 1;
  }

  std::vector<double> errors(static_cast<std::size_t>(spec.replicates),
                             std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(static_cast<std::size_t>(spec.replicates), 0);

  parallel_for(spec.replicates, spec.threads, [&](int r) {
    try {
      const Dataset ds =
          sample_dataset_from(truth, n, spec.sigma, cell_seed, static_cast<std::uint64_t>(r));
      FitResult fit;
      if (spec.estimator == "oracle") {
        const double ridge =
            spec.ridge_c * std::pow(static_cast<double>(n), -2.0 * alpha / (2.0 * alpha + 1.0));
        fit = fit_oracle_single(es, ds, oracle_j, ridge);
      } else {
        FitConfig cfg = spec.fit;
        cfg.q = q;
        cfg.R = spec.R;
        cfg.seed = cell_seed;
        cfg.threads = 1;  // replicate-level parallelism only
        fit = spec.estimator == "lq" ? fit_lq_constrained(es, ds, cfg)
                                     : fit_mixed_penalty(es, ds, cfg);
      }
      errors[static_cast<std::size_t>(r)] = l2_pi_distance_sq(fit.fhat, truth);
      if (!fit.converged) failed[static_cast<std::size_t>(r)] = 1;
    } catch (const std::exception&) {
      failed[static_cast<std::size_t>(r)] = 1;
    }
  });

  CellOutcome out;
  for (int r = 0; r < spec.replicates; ++r) {
    if (std::isfinite(errors[static_cast<std::size_t>(r)]))
      out.errors.push_back(errors[static_cast<std::size_t>(r)]);
    if (failed[static_cast<std::size_t>(r)]) ++out.failures;
  }
  std::sort(out.errors.begin(), out.errors.end());
  return out;
}

}  // namespace

std::vector<SweepRecord> run_rate_sweep(const SweepSpec& spec) {
  validate_spec(spec);

  std::ofstream csv;
  if (!spec.csv_path.empty()) {
    const bool fresh = [&] {
      std::ifstream probe(spec.csv_path);
      return !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
    }();
    csv.open(spec.csv_path, std::ios::app);
    if (!csv) throw std::runtime_error("cannot write " + spec.csv_path);
    if (fresh) csv << kSweepHeader;
  }

  std::vector<SweepRecord> records;
  std::uint64_t cell_index = 0;
  for (int n : spec.n_grid) {
    for (int d : spec.d_grid) {
      for (double q : spec.q_grid) {
        for (double alpha : spec.alpha_grid) {
          const std::uint64_t cell_seed = substream_seed(spec.seed, "rate_lab:cell", cell_index);
          ++cell_index;
          const CellOutcome cell = run_cell(spec, n, d, q, alpha, cell_seed);

          SweepRecord rec;
          rec.n = n;
          rec.d = d;
          rec.q = q;
          rec.alpha = alpha;
          rec.estimator = spec.estimator;
          rec.median_error_sq = quantile_sorted(cell.errors, 0.5);
          rec.q25 = quantile_sorted(cell.errors, 0.25);
          rec.q75 = quantile_sorted(cell.errors, 0.75);
          rec.rate_total = theoretical_rate(n, d, q, alpha).total;
          rec.regime = regime_classify(n, d, q, alpha);
          rec.replicates = spec.replicates;
          rec.failures = cell.failures;
          rec.seed = cell_seed;
          if (csv.is_open()) append_sweep_row(csv, rec);
          records.push_back(std::move(rec));
        }
      }
    }
  }
  return records;
}

SlopeReport fit_rate_exponent(const std::vector<SweepRecord>& records, SweepAxis axis) {
  if (records.size() < 4)
    throw std::invalid_argument("slope fit needs at least 4 sweep records");
  for (const auto& rec : records) {
    const auto& ref = records.front();
    const bool same = rec.q == ref.q && rec.alpha == ref.alpha && rec.estimator == ref.estimator &&
                      (axis == SweepAxis::n ? rec.d == ref.d : rec.n == ref.n);
    if (!same)
      throw std::invalid_argument("slope fit records must share all non-axis parameters");
  }

  SlopeReport rep;
  rep.points = static_cast<int>(records.size());
  std::vector<double> xs, ys;
  for (const auto& rec : records) {
    if (!(rec.median_error_sq > 0.0))
      throw std::invalid_argument("slope fit needs positive median errors");
    xs.push_back(axis == SweepAxis::n ? std::log(static_cast<double>(rec.n))
                                      : std::log(std::log(static_cast<double>(rec.d))));
    ys.push_back(std::log(rec.median_error_sq));
  }
  const double m = static_cast<double>(xs.size());
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= m;
  ybar /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  if (sxx <= 0.0) throw std::invalid_argument("slope fit needs at least two distinct axis values");
  rep.slope = sxy / sxx;
  const double intercept = ybar - rep.slope * xbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double resid = ys[i] - intercept - rep.slope * xs[i];
    rss += resid * resid;
  }
  rep.std_error = std::sqrt(rss / (m - 2.0) / sxx);
  return rep;
}

namespace {

constexpr const char* kPhasePlotScript = R"PY(#!/usr/bin/env python3
"""Renders the regime diagram produced alongside this script.

Usage: python3 plot_phase_diagram.py <csv> [out.png]
"""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else "phase_diagram.csv"
out = sys.argv[2] if len(sys.argv) > 2 else "phase_diagram.png"

rows = list(csv.DictReader(open(path)))
alphas = sorted({float(r["alpha"]) for r in rows})
vs = sorted({float(r["v"]) for r in rows})
grid = np.zeros((len(alphas), len(vs)))
for r in rows:
    i = alphas.index(float(r["alpha"]))
    j = vs.index(float(r["v"]))
    grid[i, j] = 1.0 if r["regime"] == "Sparse" else 0.0

fig, ax = plt.subplots(figsize=(7, 5))
mesh = ax.pcolormesh(vs, alphas, grid, cmap="coolwarm", shading="nearest", vmin=0, vmax=1)
boundary = [(float(r["alpha"]), float(r["threshold_v"])) for r in rows]
ba = sorted({a for a, t in boundary if t > 0})
bt = [max(t for a2, t in boundary if a2 == a) for a in ba]
if ba:
    ax.plot(bt, ba, "k--", linewidth=2, label="threshold exponent")
    ax.legend(loc="upper right")
ax.set_xlabel("v = log log d / log n")
ax.set_ylabel("alpha")
ax.set_title("Estimation regime (red = Sparse, blue = Smooth)")
fig.colorbar(mesh, ax=ax, label="Sparse fraction")
fig.tight_layout()
fig.savefig(out, dpi=150)
print(f"wrote {out}")
)PY";

}  // namespace

void phase_diagram(const std::vector<double>& alpha_grid, const std::vector<double>& v_grid, int n,
                   double q, const std::string& csv_path, const std::string& script_path) {
  if (alpha_grid.empty() || v_grid.empty())
    throw std::invalid_argument("phase diagram grids must be nonempty");
  if (n < 2) throw std::invalid_argument("phase diagram needs n >= 2");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  for (double a : alpha_grid)
    if (!(a > 0.5)) throw std::invalid_argument("alpha must exceed 1/2");

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "alpha,v,regime,threshold_v\n";
  for (double alpha : alpha_grid) {
    const double e = regime_threshold_exponent(q, alpha);
    for (double v : v_grid) {
      const double log_d = std::pow(static_cast<double>(n), v);
      const Regime reg = regime_classify_logd(n, log_d, q, alpha);
      csv << io::format_double(alpha) << "," << io::format_double(v) << "," << regime_name(reg)
          << "," << io::format_double(e) << "\n";
    }
  }
  csv.close();

  if (!script_path.empty()) {
    std::ofstream script(script_path);
    if (!script) throw std::runtime_error("cannot write " + script_path);
    script << kPhasePlotScript;
  }
}

void suboptimality_experiment(const SweepSpec& base, const std::vector<double>& multipliers,
                              const std::string& csv_path) {
  validate_spec(base);
  if (multipliers.empty()) throw std::invalid_argument("multiplier list must be nonempty");
  for (double m : multipliers)
    if (!(m > 0.0)) throw std::invalid_argument("multipliers must be > 0");
  for (int n : base.n_grid)
    for (int d : base.d_grid)
      for (double q : base.q_grid)
        for (double alpha : base.alpha_grid)
          if (regime_classify(n, d, q, alpha) != Regime::smooth)
            throw std::invalid_argument("suboptimality experiment expects smooth-regime cells");

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "n,d,q,alpha,s_active,multiplier,a_n,median_error_mixed,median_error_lq,ratio,"
         "replicates,failures_mixed,failures_lq,seed\n";

  std::uint64_t cell_index = 0;
  for (int n : base.n_grid) {
    for (int d : base.d_grid) {
      for (double q : base.q_grid) {
        for (double alpha : base.alpha_grid) {
          const std::uint64_t cell_seed =
              substream_seed(base.seed, "rate_lab:subopt", cell_index);
          ++cell_index;
          const EigenSystem es = make_eigen_system(alpha, base.k_max);
          GenConfig gen;
          gen.n = n;
          gen.d = d;
          gen.k_max = base.k_max;
          gen.alpha = alpha;
          gen.q = q;
          gen.R = base.R;
          gen.sigma = base.sigma;
          // s_active = 0 selects the many-weak-components heuristic.
          const int s_auto = static_cast<int>(
              std::ceil(std::pow(n / std::log(static_cast<double>(d)), q / 2.0)));
          gen.s_active = std::clamp(base.s_active >= 1 ? base.s_active : s_auto, 1, d);
          gen.seed = cell_seed;
          const AdditiveFunction truth = sample_truth(es, gen);

          std::vector<Dataset> data;
          data.reserve(static_cast<std::size_t>(base.replicates));
          for (int r = 0; r < base.replicates; ++r)
            data.push_back(sample_dataset_from(truth, n, base.sigma, cell_seed,
                                               static_cast<std::uint64_t>(r)));

          // One constrained-fit reference per dataset, shared by all rows.
          std::vector<double> lq_errors(data.size(), std::numeric_limits<double>::quiet_NaN());
          std::vector<char> lq_failed(data.size(), 0);
          parallel_for(base.replicates, base.threads, [&](int r) {
            try {
              FitConfig cfg = base.fit;
              cfg.q = q;
              cfg.R = base.R;
              cfg.seed = cell_seed;
              cfg.threads = 1;
              const FitResult fit = fit_lq_constrained(es, data[static_cast<std::size_t>(r)], cfg);
              lq_errors[static_cast<std::size_t>(r)] = l2_pi_distance_sq(fit.fhat, truth);
              if (!fit.converged) lq_failed[static_cast<std::size_t>(r)] = 1;
            } catch (const std::exception&) {
              lq_failed[static_cast<std::size_t>(r)] = 1;
            }
          });
          std::vector<double> lq_sorted;
          int lq_failures = 0;
          for (std::size_t r = 0; r < data.size(); ++r) {
            if (std::isfinite(lq_errors[r])) lq_sorted.push_back(lq_errors[r]);
            if (lq_failed[r]) ++lq_failures;
          }
          std::sort(lq_sorted.begin(), lq_sorted.end());
          const double lq_median = quantile_sorted(lq_sorted, 0.5);

          const double a_base =
              std::pow(static_cast<double>(n), -alpha / (2.0 * alpha + 1.0));
          for (double mult : multipliers) {
            std::vector<double> mx_errors(data.size(), std::numeric_limits<double>::quiet_NaN());
            std::vector<char> mx_failed(data.size(), 0);
            parallel_for(base.replicates, base.threads, [&](int r) {
              try {
                FitConfig cfg = base.fit;
                cfg.q = q;
                cfg.R = base.R;
                cfg.a_n = mult * a_base;
                cfg.seed = cell_seed;
                cfg.threads = 1;
                const FitResult fit =
                    fit_mixed_penalty(es, data[static_cast<std::size_t>(r)], cfg);
                mx_errors[static_cast<std::size_t>(r)] = l2_pi_distance_sq(fit.fhat, truth);
                if (!fit.converged) mx_failed[static_cast<std::size_t>(r)] = 1;
              } catch (const std::exception&) {
                mx_failed[static_cast<std::size_t>(r)] = 1;
              }
            });
            std::vector<double> mx_sorted;
            int mx_failures = 0;
            for (std::size_t r = 0; r < data.size(); ++r) {
              if (std::isfinite(mx_errors[r])) mx_sorted.push_back(mx_errors[r]);
              if (mx_failed[r]) ++mx_failures;
            }
            std::sort(mx_sorted.begin(), mx_sorted.end());
            const double mx_median = quantile_sorted(mx_sorted, 0.5);

            csv << n << "," << d << "," << io::format_double(q) << ","
                << io::format_double(alpha) << "," << gen.s_active << ","
                << io::format_double(mult) << "," << io::format_double(mult * a_base) << ","
                << io::format_double(mx_median) << "," << io::format_double(lq_median) << ","
                << io::format_double(mx_median / lq_median) << "," << base.replicates << ","
                << mx_failures << "," << lq_failures << "," << cell_seed << "\n";
            csv.flush();
          }
        }
      }
    }
  }
}

}  // namespace addrate
