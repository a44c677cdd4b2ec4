#include "veda/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "veda/error.hpp"

namespace veda {

double c_theta(const Theta& t, double n, double efs) { return t.a * std::log2(n + 1.0) + t.b * efs + t.c; }

double scan_cost(const Theta& t, std::size_t n) { return t.scan * static_cast<double>(n); }

std::optional<std::size_t> inflation_factor(std::size_t size, std::size_t authorized) {
  if (authorized == 0) return std::nullopt;
  return (size + authorized - 1) / authorized;
}

HnswCost cost_hnsw(const Theta& t, std::size_t size, std::size_t efs, bool pure, double lambda) {
  if (!pure && !(lambda >= 1.0)) throw InputError("inflation factor must be >= 1");
  HnswCost out;
  out.efs = pure ? efs : static_cast<std::size_t>(std::ceil(lambda * static_cast<double>(efs) - 1e-9));
  out.full_scan = out.efs >= size;
  out.cost = c_theta(t, static_cast<double>(size), static_cast<double>(out.efs));
  return out;
}

double plan_cost(const Theta& t, std::span<const PlanEntry> plan, std::size_t efs) {
  double s = 0.0;
  for (const auto& e : plan) s += e.leftover ? scan_cost(t, e.size) : cost_hnsw(t, e.size, efs, e.pure, e.lambda).cost;
  return s;
}

double avg_cost(const Theta& t, const std::vector<std::vector<PlanEntry>>& plans, std::span<const double> weights,
                std::size_t efs) {
  if (weights.size() != plans.size()) throw InputError("one weight per role plan is required");
  double s = 0.0;
  for (std::size_t r = 0; r < plans.size(); ++r) s += weights[r] * plan_cost(t, plans[r], efs);
  return s;
}

std::vector<double> uniform_weights(std::size_t n_roles) {
  return std::vector<double>(n_roles, n_roles ? 1.0 / static_cast<double>(n_roles) : 0.0);
}

std::size_t crossover_size(const Theta& t, std::size_t efs) {
  auto scan_wins = [&](std::size_t n) { return scan_cost(t, n) < c_theta(t, double(n), double(efs)); };
  if (t.scan <= 0) return std::numeric_limits<std::size_t>::max();
  std::size_t hi = 1;
  while (scan_wins(hi)) {
    if (hi > (std::size_t(1) << 40)) return hi;
    hi *= 2;
  }
  std::size_t lo = hi / 2;  // scan_wins(lo) holds unless lo == 0
  while (lo + 1 < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    (scan_wins(mid) ? lo : hi) = mid;
  }
  return hi;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("line fit needs at least two paired samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (f.slope * x[i] + f.intercept);
    sse += e * e;
  }
  f.r2 = syy > 1e-18 * std::max(1.0, my * my) ? 1.0 - sse / syy : 1.0;
  return f;
}

namespace {

nlohmann::json fit_json(const LineFit& f) { return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}}; }

}  // namespace

std::string CalibrationReport::to_json() const {
  nlohmann::json j;
  j["a"] = theta.a;
  j["b"] = theta.b;
  j["c"] = theta.c;
  j["scan"] = theta.scan;
  j["r2_size"] = theta.r2_size;
  j["r2_efs"] = theta.r2_efs;
  j["efs_model"] = efs_linear_selected ? "linear" : "efs_log_efs";
  j["fits"] = {{"size", fit_json(size_fit)}, {"efs_linear", fit_json(efs_linear)}, {"efs_loglinear", fit_json(efs_loglinear)}};
  if (scan_fit) j["fits"]["scan"] = fit_json(*scan_fit);
  j["samples"] = nlohmann::json::array();
  for (const auto& s : samples)
    j["samples"].push_back({{"sweep", s.sweep}, {"n", s.n}, {"efs", s.efs}, {"latency", s.latency}});
  return j.dump(2);
}

CalibrationFailure::CalibrationFailure(CalibrationReport r) : report_(std::move(r)) {
  msg_ = "calibration failed: efs fits reach R^2 " + std::to_string(report_.efs_linear.r2) + " (linear) and " +
         std::to_string(report_.efs_loglinear.r2) + " (efs*log efs)";
}

CalibrationReport calibrate(SweepRunner& runner, const CalibrationOptions& opt) {
  if (opt.sizes.size() < 2 || opt.efs_grid.size() < 2) throw InputError("calibration sweeps need two points each");
  CalibrationReport rep;

  std::vector<double> lx, ly;
  for (auto n : opt.sizes) {
    double t = runner.time_search(n, 1);
    rep.samples.push_back({"size", n, 1, t});
    lx.push_back(std::log2(double(n)));
    ly.push_back(t);
  }
  rep.size_fit = fit_line(lx, ly);

  std::vector<double> ex, exl, ey;
  for (auto e : opt.efs_grid) {
    double t = runner.time_search(opt.idx0, e);
    rep.samples.push_back({"efs", opt.idx0, e, t});
    ex.push_back(double(e));
    exl.push_back(double(e) * std::log2(double(e)));
    ey.push_back(t);
  }
  rep.efs_linear = fit_line(ex, ey);
  rep.efs_loglinear = fit_line(exl, ey);
  rep.efs_linear_selected = rep.efs_linear.r2 >= rep.efs_loglinear.r2;

  double b = rep.efs_linear.slope, c2 = rep.efs_linear.intercept;
  if (!rep.efs_linear_selected) {
    // Tangent of b'*efs*log2(efs) + c' at the median beam width.
    std::vector<double> sorted = ex;
    std::sort(sorted.begin(), sorted.end());
    double em = sorted[sorted.size() / 2];
    double slope = rep.efs_loglinear.slope * (std::log2(em) + 1.0 / std::log(2.0));
    double at = rep.efs_loglinear.slope * em * std::log2(em) + rep.efs_loglinear.intercept;
    b = slope;
    c2 = at - slope * em;
  }
  const double a = rep.size_fit.slope;
  const double c1 = rep.size_fit.intercept;
  const double c = 0.5 * ((c1 - b * 1.0) + (c2 - a * std::log2(double(opt.idx0))));

  rep.theta.a = std::max(0.0, a);
  rep.theta.b = std::max(1e-12, b);
  rep.theta.c = std::max(0.0, c);
  rep.theta.r2_size = rep.size_fit.r2;
  rep.theta.r2_efs = std::max(rep.efs_linear.r2, rep.efs_loglinear.r2);

  std::vector<double> sx, sy;
  for (auto n : opt.scan_sizes) {
    double t = runner.time_scan(n);
    if (t < 0) break;
    rep.samples.push_back({"scan", n, 0, t});
    sx.push_back(double(n));
    sy.push_back(t);
  }
  if (sx.size() >= 2 && sx.size() == opt.scan_sizes.size()) {
    rep.scan_fit = fit_line(sx, sy);
    rep.theta.scan = std::max(1e-12, rep.scan_fit->slope);
  }

  if (rep.efs_linear.r2 < opt.min_r2 && rep.efs_loglinear.r2 < opt.min_r2) throw CalibrationFailure(rep);
  return rep;
}

std::string theta_to_json(const Theta& t) {
  nlohmann::json j{{"a", t.a}, {"b", t.b}, {"c", t.c}, {"scan", t.scan}, {"r2_size", t.r2_size}, {"r2_efs", t.r2_efs}};
  return j.dump(2);
}

Theta theta_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  Theta t;
  t.a = j.at("a").get<double>();
  t.b = j.at("b").get<double>();
  t.c = j.at("c").get<double>();
  t.scan = j.value("scan", t.scan);
  t.r2_size = j.value("r2_size", 0.0);
  t.r2_efs = j.value("r2_efs", 0.0);
  if (t.b <= 0 || t.c < 0 || t.a < 0) throw InputError("theta needs a >= 0, b > 0, c >= 0");
  return t;
}

}  // namespace veda
