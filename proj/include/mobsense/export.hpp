#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "mobsense/evaluation.hpp"
#include "mobsense/guidance.hpp"

namespace mobsense {

/// Shortest-form with 17 significant digits; round-trips every double.
std::string format_real(double v);

/// Columns t, p_1..p_m, zeta_1..zeta_n, trace_Pi.
void write_solution_csv(std::ostream& out, const GuidanceSolution& sol, const TimeGrid& grid);
/// One row per cost term plus iteration diagnostics.
void write_costs_csv(std::ostream& out, const GuidanceSolution& sol);
/// Header, one row per trial, footer rows mean and std.
void write_trials_csv(std::ostream& out, const TrialStats& stats);
/// G^2 rows of x, y, variance.
void write_variance_csv(std::ostream& out, const Matrix& variance);
/// Plain row-major dump without header.
void write_matrix_csv(std::ostream& out, const Matrix& m);
/// One row per axis value with raw and normalized costs.
void write_study_csv(std::ostream& out, const StudyResult& result);

/// Opens `path` for writing (creating parent directories) and runs `writer`.
/// Throws std::runtime_error on I/O failure.
template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mobsense

#include <fstream>
#include <stdexcept>

namespace mobsense {

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  writer(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mobsense
