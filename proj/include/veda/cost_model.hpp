#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace veda {

/// Latency model coefficients: C(n, efs) = a*log2(n+1) + b*efs + c, plus a per-vector
/// linear-scan cost used for leftover blocks.
struct Theta {
  double a = 0.0821;
  double b = 0.1159;
  double c = 2.3110;
  /// Per-vector scan cost. The default puts the scan/HNSW crossover near 2,900 vectors at
  /// efs=100 under the default a, b, c.
  double scan = 0.0051;
  double r2_size = 0.0;
  double r2_efs = 0.0;
};

double c_theta(const Theta& t, double n, double efs);
double scan_cost(const Theta& t, std::size_t n);

/// ceil(size / authorized); nullopt when nothing in the index is authorized.
std::optional<std::size_t> inflation_factor(std::size_t size, std::size_t authorized);

struct HnswCost {
  double cost = 0.0;
  std::size_t efs = 0;     ///< effective beam after inflation
  bool full_scan = false;  ///< inflated beam reaches the index size
};

/// Impure indices are priced at ceil(lambda*efs); `lambda` is ignored for pure ones.
HnswCost cost_hnsw(const Theta& t, std::size_t size, std::size_t efs, bool pure, double lambda = 1.0);

/// One probe in a query plan.
struct PlanEntry {
  std::size_t size = 0;
  bool pure = true;
  double lambda = 1.0;
  bool leftover = false;  ///< scanned linearly rather than searched
};

double plan_cost(const Theta& t, std::span<const PlanEntry> plan, std::size_t efs);

/// sum_r w_r * plan_cost(plan_r). Uniform single-role workloads use w_r = 1/|R|.
double avg_cost(const Theta& t, const std::vector<std::vector<PlanEntry>>& plans, std::span<const double> weights,
                std::size_t efs);

std::vector<double> uniform_weights(std::size_t n_roles);

/// Smallest index size at which an HNSW probe is no more expensive than scanning.
std::size_t crossover_size(const Theta& t, std::size_t efs);

/// Times searches on indices of a given size; implemented by the host benchmark and by
/// synthetic timers in tests.
class SweepRunner {
 public:
  virtual ~SweepRunner() = default;
  virtual double time_search(std::size_t index_size, std::size_t efs) = 0;
  /// Linear scan over n vectors. Runners that cannot scan return a negative value.
  virtual double time_scan(std::size_t) { return -1.0; }
};

struct CalibrationSample {
  std::string sweep;  ///< "size", "efs" or "scan"
  std::size_t n = 0;
  std::size_t efs = 0;
  double latency = 0.0;
};

struct CalibrationOptions {
  std::vector<std::size_t> sizes{1u << 10, 1u << 11, 1u << 12, 1u << 13, 1u << 14, 1u << 15, 1u << 16, 1u << 17};
  std::vector<std::size_t> efs_grid{10, 20, 50, 100, 200, 300, 500, 1000};
  std::size_t idx0 = 1u << 14;
  std::vector<std::size_t> scan_sizes{256, 512, 1024, 2048, 4096, 8192};
  double min_r2 = 0.9;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

/// Ordinary least squares y = slope*x + intercept. R^2 is 1 when y is constant.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

struct CalibrationReport {
  Theta theta;
  LineFit size_fit;
  LineFit efs_linear;
  LineFit efs_loglinear;
  bool efs_linear_selected = true;
  std::optional<LineFit> scan_fit;
  std::vector<CalibrationSample> samples;

  std::string to_json() const;
};

class CalibrationFailure : public std::exception {
 public:
  explicit CalibrationFailure(CalibrationReport r);
  const char* what() const noexcept override { return msg_.c_str(); }
  const CalibrationReport& report() const noexcept { return report_; }

 private:
  CalibrationReport report_;
  std::string msg_;
};

/// Two one-dimensional sweeps: index size at efs=1 gives a, beam width at a fixed size gives
/// b, and the two intercepts are reconciled into c. Throws CalibrationFailure (carrying all
/// raw samples) when neither efs model reaches min_r2.
CalibrationReport calibrate(SweepRunner& runner, const CalibrationOptions& opt = {});

std::string theta_to_json(const Theta& t);
Theta theta_from_json(const std::string& text);

}  // namespace veda
