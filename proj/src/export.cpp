#include "mobsense/export.hpp"

#include <charconv>

#include "mobsense/plant.hpp"

namespace mobsense {

std::string format_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_solution_csv(std::ostream& out, const GuidanceSolution& sol, const TimeGrid& grid) {
  out << "t";
  for (Eigen::Index i = 0; i < sol.guidance.rows(); ++i) out << ",p_" << i + 1;
  for (Eigen::Index i = 0; i < sol.states.rows(); ++i) out << ",zeta_" << i + 1;
  out << ",trace_Pi\n";
  const Vector traces = sol.covariance.traces();
  for (int k = 0; k < grid.nodes(); ++k) {
    out << format_real(grid.time(k));
    for (Eigen::Index i = 0; i < sol.guidance.rows(); ++i) out << ',' << format_real(sol.guidance(i, k));
    for (Eigen::Index i = 0; i < sol.states.rows(); ++i) out << ',' << format_real(sol.states(i, k));
    out << ',' << format_real(traces(k)) << '\n';
  }
}

void write_costs_csv(std::ostream& out, const GuidanceSolution& sol) {
  out << "quantity,value\n"
      << "total," << format_real(sol.cost_total) << '\n'
      << "uncertainty," << format_real(sol.cost_uncertainty) << '\n'
      << "mobility," << format_real(sol.cost_mobility) << '\n'
      << "iterations," << sol.iterations << '\n'
      << "converged," << (sol.converged ? 1 : 0) << '\n'
      << "final_change," << format_real(sol.final_change) << '\n'
      << "guidance_sup_norm," << format_real(sol.guidance_sup_norm) << '\n'
      << "guidance_lipschitz," << format_real(sol.guidance_lipschitz) << '\n';
  if (sol.within_p_max) out << "within_p_max," << (*sol.within_p_max ? 1 : 0) << '\n';
  if (sol.within_a_max) out << "within_a_max," << (*sol.within_a_max ? 1 : 0) << '\n';
}

void write_trials_csv(std::ostream& out, const TrialStats& stats) {
  out << "trial,terminal_error\n";
  for (std::size_t i = 0; i < stats.per_trial_errors.size(); ++i) {
    out << i << ',' << format_real(stats.per_trial_errors[i]) << '\n';
  }
  out << "mean," << format_real(stats.terminal_error_mean) << '\n'
      << "std," << format_real(stats.terminal_error_std) << '\n';
}

void write_variance_csv(std::ostream& out, const Matrix& variance) {
  const Vector axis = uniform_axis(static_cast<int>(variance.rows()));
  out << "x,y,variance\n";
  for (Eigen::Index a = 0; a < variance.rows(); ++a) {
    for (Eigen::Index b = 0; b < variance.cols(); ++b) {
      out << format_real(axis(a)) << ',' << format_real(axis(b)) << ','
          << format_real(variance(a, b)) << '\n';
    }
  }
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_real(m(r, c));
    }
    out << '\n';
  }
}

void write_study_csv(std::ostream& out, const StudyResult& result) {
  out << "value,cost_total,cost_uncertainty,cost_mobility,normalized_total,"
         "normalized_uncertainty,guidance_energy,path_length,iterations,converged,"
         "error_mean,error_std\n";
  for (const StudyEntry& e : result.entries) {
    out << format_real(e.value) << ',' << format_real(e.cost_total) << ','
        << format_real(e.cost_uncertainty) << ',' << format_real(e.cost_mobility) << ','
        << format_real(e.normalized_total) << ',' << format_real(e.normalized_uncertainty) << ','
        << format_real(e.guidance_energy) << ',' << format_real(e.path_length) << ','
        << e.iterations << ',' << (e.converged ? 1 : 0) << ',';
    if (e.trials) {
      out << format_real(e.trials->terminal_error_mean) << ','
          << format_real(e.trials->terminal_error_std);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, [&](std::ostream& out) { out << text; });
}

}  // namespace mobsense
