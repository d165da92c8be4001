#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mobsense/fleet.hpp"
#include "mobsense/riccati.hpp"
#include "mobsense/scenario.hpp"
#include "mobsense/spectral.hpp"

namespace mobsense {

struct CostBreakdown {
  double total = 0.0;
  double uncertainty = 0.0;
  double mobility = 0.0;
};

/// Everything the forward sweep produces for one guidance grid.
struct ForwardState {
  TimeSeries guidance;   // m x (K+1)
  TimeSeries states;     // n x (K+1)
  TimeSeries positions;  // 2 m_s x (K+1)
  SensingSchedule sensing;
  CovarianceTrajectory covariance;
  CostBreakdown cost;
};

/// Discretized guidance problem: spectral model, fleet, mobility cost, grid.
/// The discrete cost is
///   w * sum_k c_k tr(Pi_k) + sum_k c_k (p_k^T gamma p_k / 2 + h(zeta_k)) + h_f(zeta_K)
/// with trapezoidal weights c_k, RK4 for both zeta and Pi.
class GuidanceProblem {
 public:
  GuidanceProblem(std::shared_ptr<const SpectralModel> model, FleetModel fleet,
                  MobilitySpec mobility, TimeGrid grid, SolverSettings solver = {},
                  GuidanceClamps clamps = {});

  static GuidanceProblem from_scenario(const ScenarioSpec& scenario);
  /// Reuses an already built spectral model (must match the scenario's order and field).
  static GuidanceProblem from_scenario(const ScenarioSpec& scenario,
                                       std::shared_ptr<const SpectralModel> model);

  const SpectralModel& model() const { return *model_; }
  std::shared_ptr<const SpectralModel> shared_model() const { return model_; }
  const FleetModel& fleet() const { return fleet_; }
  const MobilitySpec& mobility() const { return mobility_; }
  const TimeGrid& grid() const { return grid_; }
  const SolverSettings& solver() const { return solver_; }
  const GuidanceClamps& clamps() const { return clamps_; }
  const Matrix& penalty() const { return penalty_; }

  ForwardState forward(const TimeSeries& guidance) const;
  /// Forward sweep along externally propagated sensor states.
  ForwardState forward_along(const TimeSeries& guidance, const TimeSeries& states) const;
  double cost(const TimeSeries& guidance) const { return forward(guidance).cost.total; }

 private:
  std::shared_ptr<const SpectralModel> model_;
  FleetModel fleet_;
  MobilitySpec mobility_;
  TimeGrid grid_;
  SolverSettings solver_;
  GuidanceClamps clamps_;
  Matrix penalty_;
};

/// Discrete adjoint of the forward sweep.
struct AdjointState {
  TimeSeries costates;           // lambda_k, n x (K+1)
  TimeSeries input_sensitivity;  // discrete beta^T lambda_k: (dJ/dp_k - c_k gamma p_k) / c_k
  TimeSeries gradient;           // dJ/dp_k, exact derivative of the discrete cost
  TimeSeries gradient_density;   // dJ/dp_k / c_k = gamma p_k + beta^T lambda_k
  std::vector<Matrix> matrix_costates;  // filled only on request; Lambda_k
};

AdjointState backward_pass(const GuidanceProblem& problem, const ForwardState& forward,
                           bool keep_matrix_costates = false);

/// Minimizer of the Hamiltonian in p for quadratic g: -gamma^{-1} beta^T lambda.
Vector control_from_costate(const Vector& costate, const Matrix& penalty, const Matrix& beta);
/// Same, given beta^T lambda directly.
Vector control_from_sensitivity(const Vector& input_sensitivity, const Matrix& penalty);

/// Central differences of the full discrete cost with respect to every p_k component.
TimeSeries cost_gradient_fd(const GuidanceProblem& problem, const TimeSeries& guidance, double eps);

struct GuidanceSolution {
  TimeSeries guidance;
  TimeSeries states;
  TimeSeries costates;
  CovarianceTrajectory covariance;
  double cost_total = 0.0;
  double cost_uncertainty = 0.0;
  double cost_mobility = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_change = 0.0;
  double relaxation = 0.0;
  std::vector<double> cost_history;
  double guidance_sup_norm = 0.0;
  double guidance_lipschitz = 0.0;
  std::optional<bool> within_p_max;
  std::optional<bool> within_a_max;
};

/// Forward-backward sweep with relaxation and step halving on cost increase.
GuidanceSolution solve_fbs(const GuidanceProblem& problem);
GuidanceSolution solve_fbs(const ScenarioSpec& scenario);

/// Trapezoidal integral of |p|^2.
double guidance_energy(const TimeSeries& guidance, const TimeGrid& grid);
/// Summed Euclidean segment lengths of every sensor's path.
double path_length(const TimeSeries& positions);

}  // namespace mobsense
