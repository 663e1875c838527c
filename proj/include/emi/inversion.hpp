#pragma once

#include "emi/forward.hpp"
#include "emi/model.hpp"
#include "emi/regularization.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emi {

/// Complex: all 2m stacked rows. QuadratureOnly: the m imaginary rows only.
enum class DataMode { Complex, QuadratureOnly };

enum class Stabilizer { Identity, D1, D2, Mgs };

/// How ell is chosen.
///
/// Fixed(ell): one Gauss-Newton run with ell held constant.
/// Discrepancy / LCurve: by default ell is held fixed within a run and the
/// rule is applied to the converged models sigma^(ell), ell = 1, 2, ...,
/// each run warm-started from the previous model (MGS weights restart).
/// Discrepancy stops at the first ell whose residual falls below the noise
/// threshold; LCurve takes the
/// corner of (||r(sigma^(ell))||, ||L sigma^(ell)||). With per_iteration set,
/// the rule is instead applied to the linearized problem at every step.
struct ParameterRule {
  enum class Kind { Discrepancy, LCurve, Fixed };
  Kind kind = Kind::Discrepancy;
  double delta = 0.0;   // expected ||noise|| / ||b~|| (Discrepancy)
  double safety = 1.0;  // multiplies the noise threshold (Discrepancy)
  Eigen::Index ell = 0;  // Fixed; clamped to the largest admissible value
  bool per_iteration = false;

  static ParameterRule discrepancy(double delta, double safety = 1.0) {
    return {Kind::Discrepancy, delta, safety, 0, false};
  }
  static ParameterRule lcurve() { return {Kind::LCurve, 0.0, 1.0, 0, false}; }
  static ParameterRule fixed(Eigen::Index ell) { return {Kind::Fixed, 0.0, 1.0, ell, false}; }
  ParameterRule each_iteration() const {
    ParameterRule r = *this;
    r.per_iteration = true;
    return r;
  }
};

struct InversionConfig {
  Stabilizer stabilizer = Stabilizer::D1;
  double tau = 1e-2;  // Mgs only
  ParameterRule rule = ParameterRule::lcurve();
  DataMode mode = DataMode::Complex;
  std::vector<double> layer_tops = uniform_layer_tops(60, 3.5);
  std::vector<double> starts = {0.5};  // constant starting conductivities, S/m
  int max_iterations = 50;
  double step_tolerance = 1e-3;        // ||alpha q|| / ||sigma||
  double stagnation_tolerance = 1e-4;  // relative residual decrease over 3 iterations
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

enum class Termination { StepTolerance, ResidualStagnation, MaxIterations, Stalled };

const char* to_string(Termination t) noexcept;

struct IterationRecord {
  Eigen::Index ell = 0;
  double alpha = 0.0;
  double residual = 0.0;  // ||r~|| after the step
  double step_norm = 0.0;  // ||alpha q||
  bool lcurve_degenerate = false;
};

/// One converged run of an ell sweep.
struct SweepPoint {
  Eigen::Index ell = 0;
  double residual = 0.0;  // ||r~(sigma^(ell))||
  double seminorm = 0.0;  // ||L sigma^(ell)|| with the base regularizer
  Termination termination = Termination::MaxIterations;
};

struct StartDiagnostics {
  double start_sigma = 0.0;
  bool ok = false;
  double residual = 0.0;
  Termination termination = Termination::MaxIterations;
  std::string error;
};

struct InversionResult {
  std::vector<double> depths;  // layer tops
  Eigen::VectorXd sigma;
  std::vector<IterationRecord> iterations;  // up to the selected model
  Eigen::Index ell = -1;  // selected truncation parameter, -1 when chosen per iteration
  bool lcurve_degenerate = false;
  std::vector<SweepPoint> sweep;  // empty unless ell was swept
  double initial_residual = 0.0;
  double residual = 0.0;         // final ||r~|| over the active rows
  double relative_misfit = 0.0;  // residual / ||b~|| over the active rows
  Termination termination = Termination::MaxIterations;
  bool converged = false;
  std::size_t start_index = 0;
  double start_sigma = 0.0;
  Eigen::Index active_rows = 0;
  /// Column norms squared of the active stacked Jacobian at the returned sigma.
  Eigen::VectorXd sensitivity;
  std::vector<StartDiagnostics> starts;
};

/// Every start failed. what() summarizes, starts() carries the details.
class InversionFailure : public std::runtime_error {
 public:
  InversionFailure(const std::string& what, std::vector<StartDiagnostics> starts)
      : std::runtime_error(what), starts_(std::move(starts)) {}
  const std::vector<StartDiagnostics>& starts() const noexcept { return starts_; }

 private:
  std::vector<StartDiagnostics> starts_;
};

Eigen::Index active_rows(DataMode mode, Eigen::Index m);
/// Rows of stack(v) used by the mode.
Eigen::VectorXd active_part(const DataVector& v, DataMode mode);
Eigen::MatrixXd active_part(const ComplexJacobian& j, DataMode mode);

struct Residual {
  DataVector complex;     // b - M(sigma)
  Eigen::VectorXd active;  // stacked rows used by the mode
};

/// r = b - M(sigma). Throws std::invalid_argument if the data length differs from m.
Residual residual(const ForwardModel& forward, const LayeredEarthModel& model,
                  const DataVector& data, DataMode mode);

struct LCurveCorner {
  Eigen::Index ell = 1;
  bool degenerate = false;
};

/// Corner of the L-curve given residual and seminorm norms indexed by ell.
/// Points with non-positive norms are skipped, points breaking the monotone
/// ordering (residual decreasing, seminorm increasing) are pruned, and the
/// point of largest discrete (Menger) curvature of the log-log curve wins.
/// With fewer than three usable points or no convex turn, returns ell = 1
/// flagged degenerate.
LCurveCorner lcurve_corner(const std::vector<double>& residual,
                           const std::vector<double>& seminorm);

/// L-curve choice for min ||r~ + J~ q||.
LCurveCorner select_ell_lcurve(const GsvdFactors& factors, const Eigen::VectorXd& r);

/// Smallest ell with ||r~ + J~ q_ell|| <= safety * delta * noise_reference,
/// or the largest admissible ell if none qualifies.
Eigen::Index select_ell_discrepancy(const GsvdFactors& factors, const Eigen::VectorXd& r,
                                    double delta, double noise_reference, double safety = 1.0);

struct StepResult {
  Eigen::VectorXd q;
  Eigen::Index ell = 0;
  bool lcurve_degenerate = false;
};

/// Regularized Gauss-Newton update: q = tgsvd_solve(gsvd(J~, L), -r~, ell)
/// with ell chosen by `rule` on the linear problem. `noise_reference` scales
/// the discrepancy threshold (see noise_reference()).
StepResult regularized_step(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& r,
                            const Eigen::MatrixXd& l, const ParameterRule& rule,
                            double noise_reference);

/// ||b~|| * sqrt(active rows / 2m): the norm that, times delta, is the expected
/// noise norm over the rows used by `mode` for entrywise i.i.d. noise.
double noise_reference(const DataVector& data, DataMode mode);

/// Effective regularization matrix: the configured stencil, or D * D1 with
/// MGS weights computed from the previous update (plain D1 when there is none).
Eigen::MatrixXd effective_regularizer(const InversionConfig& config, Eigen::Index n,
                                      const Eigen::VectorXd* previous_update);

/// One Gauss-Newton update at `model`.
StepResult gn_step(const ForwardModel& forward, const LayeredEarthModel& model,
                   const DataVector& data, const Eigen::MatrixXd& l, const ParameterRule& rule,
                   DataMode mode);

struct LineSearchOptions {
  double c = 1e-4;
  double beta = 0.5;
  int max_backtracks = 40;
};

/// Largest alpha in {1, beta, beta^2, ...} such that sigma + alpha q > 0 and
/// f(sigma + alpha q) <= f0 + c alpha slope. Returns 0 when no trial within
/// max_backtracks backtracks qualifies.
double line_search(const std::function<double(const Eigen::VectorXd&)>& objective,
                   const Eigen::VectorXd& sigma, const Eigen::VectorXd& q, double f0,
                   double slope, const LineSearchOptions& options = {});

/// Damped Gauss-Newton from every start; returns the start with the smallest
/// final residual (first one on ties). Throws InversionFailure if none finishes.
InversionResult invert_sounding(const ForwardModel& forward, const DataVector& data,
                                const InversionConfig& config);

struct SoundingOutcome {
  std::optional<InversionResult> result;
  std::string error;
};

/// Independent inversion of every sounding, in input order. Failures are
/// recorded per sounding. `threads` <= 1 runs sequentially.
std::vector<SoundingOutcome> invert_section(const ForwardModel& forward,
                                            const std::vector<DataVector>& soundings,
                                            const InversionConfig& config, int threads = 1);

}  // namespace emi
