#include "mobsense/guidance.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mobsense {

namespace {

struct StageAdjoint {
  Matrix cov_bar;     // adjoint w.r.t. the stage covariance
  Matrix output_bar;  // adjoint w.r.t. the output vectors, N^2 x m_s
};

// Reverse mode of F(X) = A X + X A^T + Q - X C R^{-1} C^T X for a symmetric seed Ybar.
template <typename GeneratorType>
StageAdjoint riccati_rhs_adjoint(const Matrix& x, const Matrix& c, const Vector& rinv,
                                 const GeneratorType& generator_t, const Matrix& ybar) {
  StageAdjoint out;
  out.cov_bar = generator_t * ybar;
  out.cov_bar += out.cov_bar.transpose().eval();
  if (c.cols() > 0) {
    const Matrix xc = x * c;
    const Matrix t = ybar * xc;
    const Matrix tr = t * rinv.asDiagonal();
    out.cov_bar.noalias() -= tr * c.transpose();
    out.cov_bar.noalias() -= c * tr.transpose();
    // d/dc_i of -<Ybar, X c_i c_i^T X> r_i = -2 r_i X Ybar X c_i
    out.output_bar = -2.0 * (x * tr);
  } else {
    out.output_bar = Matrix(x.rows(), 0);
  }
  return out;
}

// Pulls output-vector adjoints back to stacked sensor positions.
Vector positions_bar(const Vector& positions, const Matrix& output_bar,
                     const SensorFootprints& footprints, int order) {
  Vector bar(positions.size());
  for (int s = 0; s < footprints.size(); ++s) {
    const auto jac = output_jacobian(positions.segment<2>(2 * s), footprints.radii[s], order);
    bar.segment<2>(2 * s) = jac.transpose() * output_bar.col(s);
  }
  return bar;
}

}  // namespace

GuidanceProblem::GuidanceProblem(std::shared_ptr<const SpectralModel> model, FleetModel fleet,
                                 MobilitySpec mobility, TimeGrid grid, SolverSettings solver,
                                 GuidanceClamps clamps)
    : model_(std::move(model)),
      fleet_(std::move(fleet)),
      mobility_(std::move(mobility)),
      grid_(grid),
      solver_(solver),
      clamps_(clamps) {
  if (!model_) throw std::invalid_argument("GuidanceProblem: spectral model is required");
  grid_.validate();
  mobility_.validate(fleet_);
  penalty_ = mobility_.penalty_matrix(fleet_);
}

GuidanceProblem GuidanceProblem::from_scenario(const ScenarioSpec& scenario) {
  scenario.validate();
  return from_scenario(scenario, std::make_shared<const SpectralModel>(
                                     build_spectral_model(scenario.order, scenario.field)));
}

GuidanceProblem GuidanceProblem::from_scenario(const ScenarioSpec& scenario,
                                               std::shared_ptr<const SpectralModel> model) {
  scenario.validate();
  if (!model || model->order != scenario.order) {
    throw std::invalid_argument("GuidanceProblem: model order does not match scenario");
  }
  return GuidanceProblem(std::move(model), assemble_fleet(scenario.fleet, scenario.field.flow),
                         scenario.mobility, scenario.grid, scenario.solver, scenario.clamps);
}

ForwardState GuidanceProblem::forward(const TimeSeries& guidance) const {
  return forward_along(guidance, propagate_sensors(fleet_, guidance, grid_));
}

ForwardState GuidanceProblem::forward_along(const TimeSeries& guidance,
                                            const TimeSeries& states) const {
  ForwardState f;
  f.guidance = guidance;
  f.states = states;
  f.positions = fleet_.positions(states);
  f.sensing = make_sensing_schedule(model_->order, f.positions, fleet_.footprints());
  f.covariance = propagate_covariance(*model_, f.sensing, grid_);
  f.cost.uncertainty = solver_.uncertainty_weight * uncertainty_cost(f.covariance);
  f.cost.mobility = mobility_cost(states, guidance, mobility_, fleet_, grid_);
  f.cost.total = f.cost.uncertainty + f.cost.mobility;
  return f;
}

AdjointState backward_pass(const GuidanceProblem& problem, const ForwardState& fwd,
                           bool keep_matrix_costates) {
  const SpectralModel& model = problem.model();
  const FleetModel& fleet = problem.fleet();
  const MobilitySpec& mobility = problem.mobility();
  const TimeGrid& grid = problem.grid();
  const double h = grid.step;
  const int steps = grid.count;
  const int dim = model.dim();
  const double weight = problem.solver().uncertainty_weight;
  const SensorFootprints footprints = fleet.footprints();
  const Vector& rinv = fwd.sensing.inv_noise;
  const bool track_cov = weight != 0.0 && fleet.size() > 0;

  TimeSeries pos_bar = TimeSeries::Zero(fwd.positions.rows(), grid.nodes());
  TimeSeries input_bar = TimeSeries::Zero(fleet.input_dim(), grid.nodes());

  AdjointState out;
  out.costates.resize(fleet.state_dim(), grid.nodes());
  if (keep_matrix_costates) out.matrix_costates.resize(grid.nodes());

  const Matrix identity = Matrix::Identity(dim, dim);
  Matrix cov_bar = (weight * grid.weight(steps)) * identity;
  if (keep_matrix_costates) out.matrix_costates[steps] = cov_bar;

  auto node_costate_extra = [&](int k) -> Vector {
    Vector pos_total = pos_bar.col(k);
    if (!mobility.hazards.empty()) {
      pos_total += grid.weight(k) * hazard_gradient(mobility, fwd.positions.col(k));
    }
    if (k == steps && mobility.terminal_target.size() > 0 && mobility.terminal_weight > 0.0) {
      pos_total += 2.0 * mobility.terminal_weight *
                   (fwd.positions.col(k) - mobility.terminal_target);
    }
    return fleet.locator.transpose() * pos_total;
  };

  Vector state_bar = Vector::Zero(fleet.state_dim());  // dynamics part of lambda_{k+1}
  const Matrix alpha_t = fleet.alpha.transpose();
  const Matrix beta_t = fleet.beta.transpose();

  // Reverse of one RK4 (sub)step of length hs starting at p; accumulates output adjoints.
  auto reverse_rk4 = [&](const Matrix& p, const Matrix& c0, const Matrix& cm, const Matrix& c1,
                         double hs, const Matrix& next_bar, const auto& gen, const auto& gen_t,
                         Matrix& bar0, Matrix& barm, Matrix& bar1) {
    const Matrix k1 = riccati_rhs(p, gen, model.process_cov, c0, rinv);
    const Matrix x2 = p + 0.5 * hs * k1;
    const Matrix k2 = riccati_rhs(x2, gen, model.process_cov, cm, rinv);
    const Matrix x3 = p + 0.5 * hs * k2;
    const Matrix k3 = riccati_rhs(x3, gen, model.process_cov, cm, rinv);
    const Matrix x4 = p + hs * k3;

    Matrix kb1 = (hs / 6.0) * next_bar;
    Matrix kb2 = (hs / 3.0) * next_bar;
    Matrix kb3 = (hs / 3.0) * next_bar;
    const Matrix kb4 = (hs / 6.0) * next_bar;
    Matrix prev_bar = next_bar;

    StageAdjoint s4 = riccati_rhs_adjoint(x4, c1, rinv, gen_t, kb4);
    prev_bar += s4.cov_bar;
    kb3 += hs * s4.cov_bar;
    bar1 += s4.output_bar;
    StageAdjoint s3 = riccati_rhs_adjoint(x3, cm, rinv, gen_t, kb3);
    prev_bar += s3.cov_bar;
    kb2 += 0.5 * hs * s3.cov_bar;
    barm += s3.output_bar;
    StageAdjoint s2 = riccati_rhs_adjoint(x2, cm, rinv, gen_t, kb2);
    prev_bar += s2.cov_bar;
    kb1 += 0.5 * hs * s2.cov_bar;
    barm += s2.output_bar;
    StageAdjoint s1 = riccati_rhs_adjoint(p, c0, rinv, gen_t, kb1);
    prev_bar += s1.cov_bar;
    bar0 += s1.output_bar;
    return Matrix(0.5 * (prev_bar + prev_bar.transpose()));
  };

  // Reverse of interval k (one or more substeps) of the Riccati equation.
  auto reverse_riccati_step = [&](int k, const auto& gen, const auto& gen_t) {
    const int m = fwd.covariance.substeps.empty() ? 1 : fwd.covariance.substeps[k];
    const int points = 2 * m + 1;
    // Output vectors at the half-substep points, with the fractions the forward sweep used.
    std::vector<double> tau(points);
    std::vector<Matrix> outputs(points);
    for (int q = 0; q < points; ++q) {
      tau[q] = q % 2 == 0 ? double(q / 2) / m : (q / 2 + 0.5) / m;
    }
    outputs.front() = fwd.sensing.nodes[k];
    outputs.back() = fwd.sensing.nodes[k + 1];
    if (m == 1) {
      outputs[1] = fwd.sensing.midpoints[k];
    } else {
      for (int q = 1; q + 1 < points; ++q) outputs[q] = fwd.sensing.between(k, tau[q]);
    }
    std::vector<Matrix> starts{fwd.covariance.matrices[k]};
    for (int j = 0; j + 1 < m; ++j) {
      starts.push_back(riccati_rk4_step(starts[j], gen, model.process_cov, outputs[2 * j],
                                        outputs[2 * j + 1], outputs[2 * j + 2], rinv, h / m));
    }
    std::vector<Matrix> output_bars(points, Matrix::Zero(dim, fleet.size()));
    for (int j = m - 1; j >= 0; --j) {
      cov_bar = reverse_rk4(starts[j], outputs[2 * j], outputs[2 * j + 1], outputs[2 * j + 2],
                            h / m, cov_bar, gen, gen_t, output_bars[2 * j],
                            output_bars[2 * j + 1], output_bars[2 * j + 2]);
    }
    for (int q = 0; q < points; ++q) {
      const Vector pos = q == 0           ? Vector(fwd.positions.col(k))
                         : q + 1 == points ? Vector(fwd.positions.col(k + 1))
                                           : interpolate_positions(fwd.positions, k, tau[q]);
      const Vector bar = positions_bar(pos, output_bars[q], footprints, model.order);
      if (q + 1 < points) pos_bar.col(k) += (1.0 - tau[q]) * bar;
      if (q > 0) pos_bar.col(k + 1) += tau[q] * bar;
    }

    cov_bar.diagonal().array() += weight * grid.weight(k);
    if (!cov_bar.allFinite()) {
      throw std::runtime_error("backward_pass: non-finite matrix costate at step " +
                               std::to_string(k));
    }
    if (keep_matrix_costates) out.matrix_costates[k] = cov_bar;
  };

  for (int k = steps - 1; k >= 0; --k) {
    if (track_cov) {
      if (model.generator_kron) {
        reverse_riccati_step(k, *model.generator_kron, *model.generator_kron_t);
      } else {
        reverse_riccati_step(k, model.generator_sparse, model.generator_sparse_t);
      }
    }

    // lambda_{k+1} is complete: dynamics part plus position/cost forcing.
    const Vector lambda_next = state_bar + node_costate_extra(k + 1);
    if (!lambda_next.allFinite()) {
      throw std::runtime_error("backward_pass: non-finite costate at step " + std::to_string(k + 1));
    }
    out.costates.col(k + 1) = lambda_next;

    // Reverse RK4 step of zeta' = alpha zeta + beta p + drift.
    Vector kb1 = (h / 6.0) * lambda_next;
    Vector kb2 = (h / 3.0) * lambda_next;
    Vector kb3 = (h / 3.0) * lambda_next;
    const Vector kb4 = (h / 6.0) * lambda_next;
    Vector zb = lambda_next;
    zb += alpha_t * kb4;
    kb3 += h * (alpha_t * kb4);
    const Vector pb1 = beta_t * kb4;
    zb += alpha_t * kb3;
    kb2 += 0.5 * h * (alpha_t * kb3);
    Vector pbm = beta_t * kb3;
    zb += alpha_t * kb2;
    kb1 += 0.5 * h * (alpha_t * kb2);
    pbm += beta_t * kb2;
    zb += alpha_t * kb1;
    const Vector pb0 = beta_t * kb1;
    input_bar.col(k) += pb0 + 0.5 * pbm;
    input_bar.col(k + 1) += pb1 + 0.5 * pbm;
    state_bar = zb;
  }
  out.costates.col(0) = state_bar + node_costate_extra(0);

  const Matrix& gamma = problem.penalty();
  out.gradient.resize(fleet.input_dim(), grid.nodes());
  out.gradient_density.resize(fleet.input_dim(), grid.nodes());
  out.input_sensitivity.resize(fleet.input_dim(), grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) {
    const double w = grid.weight(k);
    out.input_sensitivity.col(k) = input_bar.col(k) / w;
    out.gradient_density.col(k) = gamma * fwd.guidance.col(k) + out.input_sensitivity.col(k);
    out.gradient.col(k) = w * out.gradient_density.col(k);
  }
  return out;
}

Vector control_from_sensitivity(const Vector& input_sensitivity, const Matrix& penalty) {
  const Eigen::LLT<Matrix> llt(penalty);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("control_from_costate: penalty is not positive definite");
  }
  return -llt.solve(input_sensitivity);
}

Vector control_from_costate(const Vector& costate, const Matrix& penalty, const Matrix& beta) {
  return control_from_sensitivity(beta.transpose() * costate, penalty);
}

TimeSeries cost_gradient_fd(const GuidanceProblem& problem, const TimeSeries& guidance, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("cost_gradient_fd: eps must be > 0");
  TimeSeries grad(guidance.rows(), guidance.cols());
  TimeSeries probe = guidance;
  for (Eigen::Index k = 0; k < guidance.cols(); ++k) {
    for (Eigen::Index i = 0; i < guidance.rows(); ++i) {
      const double saved = probe(i, k);
      probe(i, k) = saved + eps;
      const double up = problem.cost(probe);
      probe(i, k) = saved - eps;
      const double down = problem.cost(probe);
      probe(i, k) = saved;
      grad(i, k) = (up - down) / (2.0 * eps);
    }
  }
  return grad;
}

double guidance_energy(const TimeSeries& guidance, const TimeGrid& grid) {
  double e = 0.0;
  for (int k = 0; k < grid.nodes(); ++k) e += grid.weight(k) * guidance.col(k).squaredNorm();
  return e;
}

double path_length(const TimeSeries& positions) {
  double length = 0.0;
  for (Eigen::Index k = 0; k + 1 < positions.cols(); ++k) {
    for (Eigen::Index s = 0; s + 1 < positions.rows(); s += 2) {
      length += (positions.col(k + 1).segment<2>(s) - positions.col(k).segment<2>(s)).norm();
    }
  }
  return length;
}

GuidanceSolution solve_fbs(const GuidanceProblem& problem) {
  constexpr double kMinRelaxation = 1e-3;
  const SolverSettings& settings = problem.solver();
  const TimeGrid& grid = problem.grid();
  const Matrix& gamma = problem.penalty();
  const Eigen::LLT<Matrix> gamma_llt(gamma);

  TimeSeries guidance = TimeSeries::Zero(problem.fleet().input_dim(), grid.nodes());
  ForwardState current = problem.forward(guidance);
  double omega = settings.omega;

  GuidanceSolution sol;
  sol.cost_history.push_back(current.cost.total);
  AdjointState adjoint;
  bool stalled = false;
  TimeSeries prev_guidance, prev_residual;
  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    sol.iterations = iter;
    adjoint = backward_pass(problem, current);
    const TimeSeries candidate = -gamma_llt.solve(adjoint.input_sensitivity);
    const double step_norm = (candidate - guidance).cwiseAbs().maxCoeff();
    const double scale = std::max(candidate.cwiseAbs().maxCoeff(), guidance.cwiseAbs().maxCoeff());
    sol.final_change = scale > 0.0 ? step_norm / scale : 0.0;
    if (step_norm <= settings.tol * scale || step_norm == 0.0) {
      sol.converged = true;
      break;
    }
    bool accepted = false;
    const TimeSeries residual = guidance - candidate;
    if (settings.relaxation == Relaxation::barzilai_borwein && iter > 1) {
      const TimeSeries ds = guidance - prev_guidance;
      const TimeSeries dr = residual - prev_residual;
      double ss = 0.0, sr = 0.0;
      for (int k = 0; k < grid.nodes(); ++k) {
        ss += grid.weight(k) * ds.col(k).dot(gamma * ds.col(k));
        sr += grid.weight(k) * ds.col(k).dot(gamma * dr.col(k));
      }
      omega = sr > 0.0 ? std::clamp(ss / sr, kMinRelaxation, 1.0) : settings.omega;
    }
    prev_guidance = guidance;
    prev_residual = residual;
    while (omega >= 1e-12) {
      const TimeSeries trial = guidance + omega * (candidate - guidance);
      ForwardState next = problem.forward(trial);
      if (next.cost.total <= current.cost.total) {
        guidance = trial;
        current = std::move(next);
        accepted = true;
        break;
      }
      omega *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    sol.cost_history.push_back(current.cost.total);
  }
  // Costates must belong to the returned iterate.
  if (!sol.converged && !stalled) adjoint = backward_pass(problem, current);

  sol.relaxation = omega;
  sol.guidance = guidance;
  sol.states = current.states;
  sol.costates = adjoint.costates;
  sol.cost_total = current.cost.total;
  sol.cost_uncertainty = current.cost.uncertainty;
  sol.cost_mobility = current.cost.mobility;
  sol.covariance = std::move(current.covariance);
  for (int k = 0; k < grid.nodes(); ++k) {
    sol.guidance_sup_norm = std::max(sol.guidance_sup_norm, guidance.col(k).norm());
    if (k + 1 < grid.nodes()) {
      sol.guidance_lipschitz = std::max(
          sol.guidance_lipschitz, (guidance.col(k + 1) - guidance.col(k)).norm() / grid.step);
    }
  }
  if (problem.clamps().p_max) sol.within_p_max = sol.guidance_sup_norm <= *problem.clamps().p_max;
  if (problem.clamps().a_max) sol.within_a_max = sol.guidance_lipschitz <= *problem.clamps().a_max;
  return sol;
}

GuidanceSolution solve_fbs(const ScenarioSpec& scenario) {
  return solve_fbs(GuidanceProblem::from_scenario(scenario));
}

}  // namespace mobsense
