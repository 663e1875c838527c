#include "emi/inversion.hpp"

#include "emi/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace emi {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void InversionConfig::validate() const {
  if (layer_tops.empty()) throw std::invalid_argument("layer grid is empty");
  if (starts.empty()) throw std::invalid_argument("at least one starting model is required");
  for (double s : starts)
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("starting conductivities must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw std::invalid_argument("backtracking factor must lie in (0, 1)");
  if (!(armijo_c > 0.0 && armijo_c < 1.0))
    throw std::invalid_argument("Armijo constant must lie in (0, 1)");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  if (max_backtracks < 0) throw std::invalid_argument("max_backtracks must be non-negative");
  if (stabilizer == Stabilizer::Mgs && !(tau > 0.0))
    throw std::invalid_argument("focusing parameter tau must be positive");
  if (rule.kind == ParameterRule::Kind::Discrepancy && !(rule.delta >= 0.0))
    throw std::invalid_argument("noise level must be non-negative");
  if (rule.kind == ParameterRule::Kind::Fixed && rule.ell < 0)
    throw std::invalid_argument("fixed truncation parameter must be non-negative");
  const auto n = static_cast<Index>(layer_tops.size());
  const Index needed = stabilizer == Stabilizer::D2 ? 3 : (stabilizer == Stabilizer::Identity ? 1 : 2);
  if (n < needed) throw std::invalid_argument("too few layers for the chosen regularizer");
  // grid validity is checked by the model constructor
  LayeredEarthModel(layer_tops, std::vector<double>(layer_tops.size(), 1.0));
}

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::StepTolerance: return "step-tolerance";
    case Termination::ResidualStagnation: return "residual-stagnation";
    case Termination::MaxIterations: return "max-iterations";
    case Termination::Stalled: return "stalled";
  }
  return "unknown";
}

Index active_rows(DataMode mode, Index m) { return mode == DataMode::Complex ? 2 * m : m; }

VectorXd active_part(const DataVector& v, DataMode mode) {
  if (mode == DataMode::Complex) return stack(v);
  return v.imag();
}

MatrixXd active_part(const ComplexJacobian& j, DataMode mode) {
  if (mode == DataMode::Complex) return j.stacked();
  return j.matrix.imag();
}

Residual residual(const ForwardModel& forward, const LayeredEarthModel& model,
                  const DataVector& data, DataMode mode) {
  if (data.size() != static_cast<Index>(forward.config().size()))
    throw std::invalid_argument("data length does not match the device configuration");
  Residual r;
  r.complex = data - forward.response(model);
  r.active = active_part(r.complex, mode);
  return r;
}

namespace {

double log_or_nan(double v) { return v > 0.0 ? std::log(v) : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

LCurveCorner lcurve_corner(const std::vector<double>& residual,
                           const std::vector<double>& seminorm) {
  if (residual.size() != seminorm.size())
    throw std::invalid_argument("L-curve coordinate lists differ in length");
  struct Point {
    Index ell;
    double x, y;
  };
  std::vector<Point> kept;
  for (std::size_t ell = 0; ell < residual.size(); ++ell) {
    const double x = log_or_nan(residual[ell]);
    const double y = log_or_nan(seminorm[ell]);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if (!kept.empty() && !(x < kept.back().x && y > kept.back().y)) continue;
    kept.push_back({static_cast<Index>(ell), x, y});
  }
  LCurveCorner corner{1, true};
  if (kept.size() < 3) return corner;
  double best = 0.0;
  for (std::size_t k = 1; k + 1 < kept.size(); ++k) {
    const double ax = kept[k].x - kept[k - 1].x, ay = kept[k].y - kept[k - 1].y;
    const double bx = kept[k + 1].x - kept[k].x, by = kept[k + 1].y - kept[k].y;
    const double cx = kept[k + 1].x - kept[k - 1].x, cy = kept[k + 1].y - kept[k - 1].y;
    // traversed leftwards then upwards, so the corner turns clockwise
    const double cross = ax * by - ay * bx;
    const double kappa =
        -2.0 * cross / (std::hypot(ax, ay) * std::hypot(bx, by) * std::hypot(cx, cy));
    if (kappa > best) {
      best = kappa;
      corner = {kept[k].ell, false};
    }
  }
  if (!(best > 1e-10)) corner = {1, true};
  return corner;
}

LCurveCorner select_ell_lcurve(const GsvdFactors& factors, const VectorXd& r) {
  const TgsvdPath path = tgsvd_path(factors, -r);
  LCurveCorner corner = lcurve_corner(path.residual, path.seminorm);
  corner.ell = std::min(corner.ell, factors.max_ell());
  return corner;
}

Index select_ell_discrepancy(const GsvdFactors& factors, const VectorXd& r, double delta,
                             double noise_ref, double safety) {
  const TgsvdPath path = tgsvd_path(factors, -r);
  const double threshold = safety * delta * noise_ref;
  for (std::size_t ell = 0; ell < path.residual.size(); ++ell)
    if (path.residual[ell] <= threshold) return static_cast<Index>(ell);
  return factors.max_ell();
}

double noise_reference(const DataVector& data, DataMode mode) {
  const double rows = static_cast<double>(active_rows(mode, data.size()));
  return stack(data).norm() * std::sqrt(rows / (2.0 * static_cast<double>(data.size())));
}

StepResult regularized_step(const MatrixXd& jacobian, const VectorXd& r, const MatrixXd& l,
                            const ParameterRule& rule, double noise_ref) {
  if (jacobian.rows() != r.size()) throw std::invalid_argument("Jacobian and residual disagree");
  const GsvdFactors factors = gsvd(jacobian, l);
  StepResult step;
  switch (rule.kind) {
    case ParameterRule::Kind::Discrepancy:
      step.ell = select_ell_discrepancy(factors, r, rule.delta, noise_ref, rule.safety);
      break;
    case ParameterRule::Kind::LCurve: {
      const LCurveCorner c = select_ell_lcurve(factors, r);
      step.ell = c.ell;
      step.lcurve_degenerate = c.degenerate;
      break;
    }
    case ParameterRule::Kind::Fixed:
      step.ell = std::min(rule.ell, factors.max_ell());
      break;
  }
  step.q = tgsvd_solve(factors, -r, step.ell);
  return step;
}

MatrixXd effective_regularizer(const InversionConfig& config, Index n,
                               const VectorXd* previous_update) {
  switch (config.stabilizer) {
    case Stabilizer::Identity: return reg_matrix(RegKind::Identity, n);
    case Stabilizer::D1: return reg_matrix(RegKind::D1, n);
    case Stabilizer::D2: return reg_matrix(RegKind::D2, n);
    case Stabilizer::Mgs: {
      MatrixXd d1 = reg_matrix(RegKind::D1, n);
      if (previous_update == nullptr) return d1;
      return mgs_weights(*previous_update, d1, config.tau).asDiagonal() * d1;
    }
  }
  throw std::invalid_argument("unknown stabilizer");
}

StepResult gn_step(const ForwardModel& forward, const LayeredEarthModel& model,
                   const DataVector& data, const MatrixXd& l, const ParameterRule& rule,
                   DataMode mode) {
  const auto lin = forward.linearize(model);
  const VectorXd r = active_part(DataVector(data - lin.response), mode);
  return regularized_step(active_part(lin.jacobian, mode), r, l, rule,
                          noise_reference(data, mode));
}

double line_search(const std::function<double(const VectorXd&)>& objective,
                   const VectorXd& sigma, const VectorXd& q, double f0, double slope,
                   const LineSearchOptions& options) {
  double alpha = 1.0;
  for (int attempt = 0; attempt <= options.max_backtracks; ++attempt, alpha *= options.beta) {
    const VectorXd trial = sigma + alpha * q;
    if (!(trial.array() > 0.0).all()) continue;
    const double f = objective(trial);
    if (std::isfinite(f) && f <= f0 + options.c * alpha * slope) return alpha;
  }
  return 0.0;
}

namespace {

struct RunState {
  VectorXd sigma;
  VectorXd residual;  // active rows at sigma
  MatrixXd jacobian;  // active rows at sigma
  std::optional<VectorXd> previous_update;
};

struct RunOutcome {
  Termination termination = Termination::MaxIterations;
  Index max_ell = 0;  // largest admissible ell seen on the first step
};

class Runner {
 public:
  Runner(const ForwardModel& forward, const DataVector& data, const InversionConfig& config)
      : forward_(forward),
        data_(data),
        config_(config),
        grid_(config.layer_tops, std::vector<double>(config.layer_tops.size(), 1.0)),
        noise_ref_(noise_reference(data, config.mode)) {}

  RunState start(double sigma0) const {
    RunState st;
    st.sigma = VectorXd::Constant(static_cast<Index>(grid_.size()), sigma0);
    relinearize(st);
    return st;
  }

  // Damped Gauss-Newton from st.sigma with `rule` applied at each step.
  RunOutcome run(RunState& st, const ParameterRule& rule,
                 std::vector<IterationRecord>& records) const {
    const auto n = static_cast<Index>(grid_.size());
    const LineSearchOptions ls{config_.armijo_c, config_.backtrack, config_.max_backtracks};
    auto objective = [&](const VectorXd& s) {
      const DataVector r = data_ - forward_.response(grid_.with_sigma(s));
      return 0.5 * active_part(r, config_.mode).squaredNorm();
    };

    RunOutcome out;
    std::vector<double> history{st.residual.norm()};
    for (int k = 0; k < config_.max_iterations; ++k) {
      const MatrixXd l = effective_regularizer(
          config_, n, st.previous_update ? &*st.previous_update : nullptr);
      const GsvdFactors factors = gsvd(st.jacobian, l);
      if (k == 0) out.max_ell = factors.max_ell();
      StepResult step;
      switch (rule.kind) {
        case ParameterRule::Kind::Fixed:
          step.ell = std::min(rule.ell, factors.max_ell());
          break;
        case ParameterRule::Kind::Discrepancy:
          step.ell = select_ell_discrepancy(factors, st.residual, rule.delta, noise_ref_,
                                            rule.safety);
          break;
        case ParameterRule::Kind::LCurve: {
          const LCurveCorner c = select_ell_lcurve(factors, st.residual);
          step.ell = c.ell;
          step.lcurve_degenerate = c.degenerate;
          break;
        }
      }
      step.q = tgsvd_solve(factors, -st.residual, step.ell);
      if (!step.q.allFinite()) throw std::runtime_error("non-finite Gauss-Newton update");
      if (step.q.norm() == 0.0) {
        out.termination = Termination::StepTolerance;
        return out;
      }
      const double f0 = 0.5 * st.residual.squaredNorm();
      const double slope = st.residual.dot(st.jacobian * step.q);
      const double alpha = line_search(objective, st.sigma, step.q, f0, slope, ls);
      if (alpha == 0.0) {
        out.termination = Termination::Stalled;
        return out;
      }
      st.sigma += alpha * step.q;
      st.previous_update = step.q;
      relinearize(st);
      const double step_norm = alpha * step.q.norm();
      records.push_back({step.ell, alpha, st.residual.norm(), step_norm, step.lcurve_degenerate});
      history.push_back(st.residual.norm());

      if (step_norm < config_.step_tolerance * st.sigma.norm()) {
        out.termination = Termination::StepTolerance;
        return out;
      }
      const std::size_t h = history.size();
      if (h >= 4 && history[h - 4] > 0.0 &&
          (history[h - 4] - history[h - 1]) / history[h - 4] < config_.stagnation_tolerance) {
        out.termination = Termination::ResidualStagnation;
        return out;
      }
    }
    return out;
  }

  double seminorm(const VectorXd& sigma) const {
    const RegKind base = config_.stabilizer == Stabilizer::Identity ? RegKind::Identity
                         : config_.stabilizer == Stabilizer::D2     ? RegKind::D2
                                                                    : RegKind::D1;
    return (reg_matrix(base, sigma.size()) * sigma).norm();
  }

  double noise_threshold(const ParameterRule& rule) const {
    return rule.safety * rule.delta * noise_ref_;
  }

 private:
  void relinearize(RunState& st) const {
    const auto lin = forward_.linearize(grid_.with_sigma(st.sigma));
    st.residual = active_part(DataVector(data_ - lin.response), config_.mode);
    st.jacobian = active_part(lin.jacobian, config_.mode);
  }

  const ForwardModel& forward_;
  const DataVector& data_;
  const InversionConfig& config_;
  LayeredEarthModel grid_;
  double noise_ref_;
};

struct StartRun {
  RunState state;
  std::vector<IterationRecord> iterations;
  double initial_residual = 0.0;
  Termination termination = Termination::MaxIterations;
  Index ell = -1;
  bool lcurve_degenerate = false;
  std::vector<SweepPoint> sweep;
  double residual() const { return state.residual.norm(); }
};

constexpr Index kSweepFirst = 1;

StartRun run_from(const Runner& runner, const InversionConfig& config, double sigma0) {
  StartRun out;
  RunState st = runner.start(sigma0);
  out.initial_residual = st.residual.norm();
  const ParameterRule& rule = config.rule;

  if (rule.kind == ParameterRule::Kind::Fixed || rule.per_iteration) {
    const RunOutcome o = runner.run(st, rule, out.iterations);
    out.termination = o.termination;
    if (rule.kind == ParameterRule::Kind::Fixed) out.ell = std::min(rule.ell, o.max_ell);
    out.state = std::move(st);
    return out;
  }

  // ell sweep with warm starts; every run continues from the previous model
  struct Snapshot {
    RunState state;
    std::size_t records;
  };
  std::vector<Snapshot> snapshots;
  std::vector<IterationRecord> records;
  Index max_ell = std::numeric_limits<Index>::max();
  for (Index ell = kSweepFirst; ell <= max_ell; ++ell) {
    st.previous_update.reset();
    const RunOutcome o = runner.run(st, ParameterRule::fixed(ell), records);
    if (ell == kSweepFirst) max_ell = o.max_ell;
    out.sweep.push_back({ell, st.residual.norm(), runner.seminorm(st.sigma), o.termination});
    snapshots.push_back({st, records.size()});
    if (rule.kind == ParameterRule::Kind::Discrepancy &&
        st.residual.norm() <= runner.noise_threshold(rule))
      break;
  }

  std::size_t pick = snapshots.size() - 1;
  if (rule.kind == ParameterRule::Kind::LCurve) {
    std::vector<double> res, semi;
    for (const auto& p : out.sweep) {
      res.push_back(p.residual);
      semi.push_back(p.seminorm);
    }
    const LCurveCorner c = lcurve_corner(res, semi);
    pick = static_cast<std::size_t>(std::min<Index>(c.ell, static_cast<Index>(pick)));
    out.lcurve_degenerate = c.degenerate;
  }
  out.ell = out.sweep[pick].ell;
  out.termination = out.sweep[pick].termination;
  out.state = std::move(snapshots[pick].state);
  records.resize(snapshots[pick].records);
  out.iterations = std::move(records);
  return out;
}

}  // namespace

InversionResult invert_sounding(const ForwardModel& forward, const DataVector& data,
                                const InversionConfig& config) {
  config.validate();
  if (data.size() != static_cast<Index>(forward.config().size()))
    throw std::invalid_argument("data length does not match the device configuration");
  if (!data.allFinite()) throw std::invalid_argument("data contains non-finite values");

  const Runner runner(forward, data, config);
  std::vector<StartDiagnostics> diagnostics;
  std::optional<StartRun> best;
  std::size_t best_index = 0;
  for (std::size_t s = 0; s < config.starts.size(); ++s) {
    StartDiagnostics diag;
    diag.start_sigma = config.starts[s];
    try {
      StartRun run = run_from(runner, config, config.starts[s]);
      if (!run.state.sigma.allFinite() || !std::isfinite(run.residual()))
        throw std::runtime_error("non-finite iterate");
      diag.ok = true;
      diag.residual = run.residual();
      diag.termination = run.termination;
      if (!best || run.residual() < best->residual()) {
        best = std::move(run);
        best_index = s;
      }
    } catch (const std::exception& e) {
      diag.error = e.what();
    }
    diagnostics.push_back(std::move(diag));
  }
  if (!best) {
    std::ostringstream os;
    os << "inversion failed from all " << diagnostics.size() << " starting models";
    for (const auto& d : diagnostics) os << "; start " << d.start_sigma << ": " << d.error;
    throw InversionFailure(os.str(), std::move(diagnostics));
  }

  InversionResult result;
  result.depths = config.layer_tops;
  result.sigma = best->state.sigma;
  result.iterations = std::move(best->iterations);
  result.ell = best->ell;
  result.lcurve_degenerate = best->lcurve_degenerate;
  result.sweep = std::move(best->sweep);
  result.initial_residual = best->initial_residual;
  result.residual = best->residual();
  const double data_norm = active_part(data, config.mode).norm();
  result.relative_misfit = data_norm > 0.0 ? result.residual / data_norm : result.residual;
  result.termination = best->termination;
  result.converged = best->termination == Termination::StepTolerance ||
                     best->termination == Termination::ResidualStagnation;
  result.start_index = best_index;
  result.start_sigma = config.starts[best_index];
  result.active_rows = best->state.jacobian.rows();
  result.sensitivity = best->state.jacobian.colwise().squaredNorm().transpose();
  result.starts = std::move(diagnostics);
  return result;
}

std::vector<SoundingOutcome> invert_section(const ForwardModel& forward,
                                            const std::vector<DataVector>& soundings,
                                            const InversionConfig& config, int threads) {
  config.validate();
  std::vector<SoundingOutcome> out(soundings.size());
  auto work = [&](std::size_t i) {
    try {
      out[i].result = invert_sounding(forward, soundings[i], config);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || soundings.size() < 2) {
    for (std::size_t i = 0; i < soundings.size(); ++i) work(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < std::min(workers, soundings.size()); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < soundings.size(); i = next++) work(i);
    });
  }
  pool.clear();
  return out;
}

}  // namespace emi
