#include "addrate/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace addrate::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

json additive_to_json(const AdditiveFunction& f) {
  json theta = json::array();
  for (Eigen::Index j = 0; j < f.d(); ++j) {
    json row = json::array();
    for (Eigen::Index k = 0; k < f.k_max(); ++k) row.push_back(f.theta(j, k));
    theta.push_back(std::move(row));
  }
  return json{{"d", f.d()}, {"k_max", f.k_max()}, {"alpha", f.alpha}, {"theta", std::move(theta)}};
}

AdditiveFunction additive_from_json(const json& j) {
  AdditiveFunction f;
  f.alpha = j.at("alpha").get<double>();
  const auto d = j.at("d").get<Eigen::Index>();
  const auto k = j.at("k_max").get<Eigen::Index>();
  const auto& theta = j.at("theta");
  if (static_cast<Eigen::Index>(theta.size()) != d)
    throw std::runtime_error("additive function file: theta row count disagrees with d");
  f.theta.resize(d, k);
  for (Eigen::Index r = 0; r < d; ++r) {
    const auto& row = theta.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != k)
      throw std::runtime_error("additive function file: theta column count disagrees with k_max");
    for (Eigen::Index c = 0; c < k; ++c) f.theta(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return f;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

void save_additive(const std::string& path, const AdditiveFunction& f) {
  write_json_file(path, additive_to_json(f));
}

AdditiveFunction load_additive(const std::string& path) {
  return additive_from_json(read_json_file(path));
}

void save_dataset(const std::string& stem, const Dataset& ds, const GenConfig& cfg) {
  const std::string csv_path = stem + ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  for (Eigen::Index j = 0; j < ds.d(); ++j) csv << "x" << (j + 1) << ",";
  csv << "y\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) csv << format_double(ds.X(i, j)) << ",";
    csv << format_double(ds.Y(i)) << "\n";
  }
  csv.close();

  save_additive(stem + ".truth.json", ds.truth);

  const std::string base = std::filesystem::path(stem).filename().string();
  write_json_file(stem + ".json",
                  json{{"n", cfg.n},
                       {"d", cfg.d},
                       {"k_max", cfg.k_max},
                       {"alpha", cfg.alpha},
                       {"q", cfg.q},
                       {"R", cfg.R},
                       {"sigma", cfg.sigma},
                       {"s_active", cfg.s_active},
                       {"seed", cfg.seed},
                       {"files", json{{"data", base + ".csv"}, {"truth", base + ".truth.json"}}}});
}

LoadedDataset load_dataset(const std::string& stem) {
  LoadedDataset out;
  const json meta = read_json_file(stem + ".json");
  out.cfg.n = meta.at("n").get<int>();
  out.cfg.d = meta.at("d").get<int>();
  out.cfg.k_max = meta.at("k_max").get<int>();
  out.cfg.alpha = meta.at("alpha").get<double>();
  out.cfg.q = meta.at("q").get<double>();
  out.cfg.R = meta.at("R").get<double>();
  out.cfg.sigma = meta.at("sigma").get<double>();
  out.cfg.s_active = meta.at("s_active").get<int>();
  out.cfg.seed = meta.at("seed").get<std::uint64_t>();

  out.ds.truth = load_additive(stem + ".truth.json");
  out.ds.sigma = out.cfg.sigma;
  out.ds.seed = out.cfg.seed;

  const std::string csv_path = stem + ".csv";
  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(csv, line)) throw std::runtime_error("empty dataset file " + csv_path);
  std::vector<std::vector<double>> rows;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != out.cfg.d + 1)
      throw std::runtime_error("dataset row width disagrees with manifest d");
    rows.push_back(std::move(row));
  }
  out.ds.X.resize(static_cast<Eigen::Index>(rows.size()), out.cfg.d);
  out.ds.Y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < out.cfg.d; ++j) out.ds.X(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    out.ds.Y(static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(out.cfg.d)];
  }
  return out;
}

void save_packing(const std::string& path, const PackingSet& set) {
  json members = json::array();
  for (const auto& m : set.members) {
    std::string s;
    s.reserve(static_cast<std::size_t>(m.a.size()));
    for (Eigen::Index r = 0; r < m.a.rows(); ++r)
      for (Eigen::Index c = 0; c < m.a.cols(); ++c)
        s.push_back(m.a(r, c) > 0 ? '+' : (m.a(r, c) < 0 ? '-' : '0'));
    members.push_back(std::move(s));
  }
  write_json_file(path, json{{"d", set.d},
                             {"s", set.s},
                             {"N", set.n_cols},
                             {"q", set.q},
                             {"m_supports", set.m_supports},
                             {"m_fills", set.m_fills},
                             {"members", std::move(members)}});
}

PackingSet load_packing(const std::string& path, const EigenSystem& es) {
  const json j = read_json_file(path);
  PackingSet set;
  set.d = j.at("d").get<int>();
  set.s = j.at("s").get<int>();
  set.n_cols = j.at("N").get<int>();
  set.q = j.at("q").get<double>();
  set.m_supports = j.at("m_supports").get<int>();
  set.m_fills = j.at("m_fills").get<int>();
  for (const auto& entry : j.at("members")) {
    const std::string s = entry.get<std::string>();
    if (static_cast<int>(s.size()) != set.d * set.n_cols)
      throw std::runtime_error("packing member length disagrees with d*N");
    PackingMatrix m;
    m.a.resize(set.d, set.n_cols);
    m.s = set.s;
    for (int r = 0; r < set.d; ++r)
      for (int c = 0; c < set.n_cols; ++c) {
        const char ch = s[static_cast<std::size_t>(r * set.n_cols + c)];
        m.a(r, c) = ch == '+' ? 1 : (ch == '-' ? -1 : 0);
      }
    set.functions.push_back(packing_function(es, m, set.n_cols, set.q));
    set.members.push_back(std::move(m));
  }
  return set;
}

void save_curve_csv(const std::string& path, const ComplexityCurve& curve,
                    const EnvelopeReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "u,mean,quantile,envelope,ratio\n";
  for (Eigen::Index c = 0; c < curve.u_grid.size(); ++c)
    out << format_double(curve.u_grid(c)) << "," << format_double(curve.mean(c)) << ","
        << format_double(rep.quantiles(c)) << "," << format_double(rep.envelope(c)) << ","
        << format_double(rep.ratios(c)) << "\n";
}

void save_fit(const std::string& path, const FitResult& fit, const EigenSystem& es) {
  json active = json::array();
  json norms = json::array();
  for (int j : fit.active_set) {
    active.push_back(j);
    norms.push_back(rkhs_norm(es, fit.fhat.theta.row(j).transpose()));
  }
  write_json_file(
      path,
      json{{"kind", estimator_kind_name(fit.kind)},
           {"config",
            json{{"q", fit.cfg.q},
                 {"R", fit.cfg.R},
                 {"a_n", fit.cfg.a_n},
                 {"mu_tol", fit.cfg.mu_tol},
                 {"tol", fit.cfg.tol},
                 {"max_outer", fit.cfg.max_outer},
                 {"max_inner", fit.cfg.max_inner},
                 {"mu_iters", fit.cfg.mu_iters},
                 {"restarts", fit.cfg.restarts},
                 {"ridge", fit.cfg.ridge},
                 {"seed", fit.cfg.seed},
                 {"threads", fit.cfg.threads}}},
           {"empirical_risk", fit.empirical_risk},
           {"population_error_sq", fit.population_error_sq},
           {"lq_mass", fit.lq_mass_value},
           {"mu", fit.mu},
           {"a_n", fit.a_n},
           {"converged", fit.converged},
           {"iterations", fit.iterations},
           {"restart_best_index", fit.restart_best_index},
           {"active_set", std::move(active)},
           {"component_rkhs_norms", std::move(norms)},
           {"objective_trace", fit.objective_trace},
           {"function", additive_to_json(fit.fhat)}});
}

}  // namespace addrate::io
