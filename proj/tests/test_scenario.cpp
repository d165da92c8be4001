#include <gtest/gtest.h>

#include <sstream>

#include "mobsense/export.hpp"
#include "mobsense/scenario.hpp"

using namespace mobsense;

namespace {

const char* kMinimal = R"([meta]
schema = 1

[sensor1]
init_state = 0.3, 0.1
)";

}  // namespace

TEST(Config, MinimalFileUsesDefaults) {
  const ScenarioSpec s = parse_scenario(kMinimal);
  EXPECT_EQ(s.order, 12);
  EXPECT_EQ(s.grid.horizon, 2.0);
  EXPECT_EQ(s.grid.step, 0.01);
  EXPECT_EQ(s.grid.count, 200);
  EXPECT_EQ(s.field.diffusion_coeff, 0.01);
  EXPECT_EQ(s.field.flow, Vec2(0.1, -0.1));
  EXPECT_EQ(s.solver.omega, 0.5);
  EXPECT_EQ(s.solver.tol, 1e-6);
  EXPECT_EQ(s.solver.max_iter, 200);
  ASSERT_EQ(s.fleet.size(), 1u);
  EXPECT_EQ(s.fleet[0].footprint_radius, 0.05);
  EXPECT_EQ(s.fleet[0].noise_var, 0.2);
  EXPECT_EQ(s.fleet[0].guidance_penalty, 0.5);
  EXPECT_EQ(serialize_scenario(s), serialize_scenario(reference_scenario()));
}

TEST(Config, StepMustDivideHorizon) {
  try {
    parse_scenario(std::string(kMinimal) + "\n[grid]\nhorizon = 2\nstep = 0.03\n");
    FAIL() << "expected a ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "grid.step");
    EXPECT_GT(e.line(), 0);
  }
}

TEST(Config, RejectsUnknownKeysAndSections) {
  try {
    parse_scenario(std::string(kMinimal) + "\n[field]\ndifusion = 0.1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "field.difusion");
    EXPECT_EQ(e.line(), 8);
  }
  EXPECT_THROW(parse_scenario(std::string(kMinimal) + "\n[wind]\nspeed = 1\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[meta]\nschema = 2\n[sensor1]\n"), ConfigError);
  EXPECT_THROW(parse_scenario("[meta]\nschema = 1\n"), ConfigError);
  EXPECT_THROW(parse_scenario(std::string(kMinimal) + "radius = -1\n"), ConfigError);
  EXPECT_THROW(parse_scenario(std::string(kMinimal) + "\n[solver]\nrelaxation = wild\n"),
               ConfigError);
}

TEST(Config, RoundTripIsExact) {
  ScenarioSpec s = reference_scenario();
  s.field.diffusion_coeff = 0.1 + 0.2;  // not exactly representable in short decimal
  s.field.kernel_scale = 8.0;
  s.field.init_kernel.center_length_sq.reset();
  s.fleet.push_back(SensorSpec::single_integrator(Vec2(1.0 / 3.0, 0.6), 0.07, 1.0, 2.5));
  SensorSpec di;
  di.alpha = Matrix::Zero(4, 4);
  di.alpha.topRightCorner(2, 2).setIdentity();
  di.beta = Matrix::Zero(4, 2);
  di.beta.bottomRows(2).setIdentity();
  di.init_state = (Vector(4) << 0.5, 0.5, 0.0, 0.1).finished();
  di.drift_in_flow = false;
  s.fleet.push_back(di);
  s.mobility.hazards.push_back({0.4, Vec2(0.5, 0.5), 0.1});
  s.mobility.terminal_weight = 1.5;
  s.mobility.terminal_target = Vector::LinSpaced(6, 0.1, 0.9);
  s.clamps.p_max = 3.0;
  s.solver.relaxation = Relaxation::fixed;
  s.seed = 18446744073709551615ULL;
  const std::string text = serialize_scenario(s);
  const ScenarioSpec back = parse_scenario(text);
  EXPECT_EQ(serialize_scenario(back), text);
  EXPECT_EQ(back.field.diffusion_coeff, 0.1 + 0.2);
  EXPECT_EQ(back.fleet[1].init_state(0), 1.0 / 3.0);
  EXPECT_EQ(back.fleet[2].alpha, di.alpha);
  EXPECT_FALSE(back.field.init_kernel.center_length_sq.has_value());
  EXPECT_EQ(*back.clamps.p_max, 3.0);
  EXPECT_FALSE(back.clamps.a_max.has_value());
  EXPECT_EQ(back.seed, s.seed);
}

TEST(Export, RealFormattingRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
}

TEST(Export, SolutionColumns) {
  GuidanceSolution sol;
  const TimeGrid g = TimeGrid::make(0.02, 0.01);
  sol.guidance = TimeSeries::Ones(2, 3);
  sol.states = TimeSeries::Zero(2, 3);
  sol.covariance.grid = g;
  sol.covariance.matrices.assign(3, Matrix::Identity(2, 2));
  std::ostringstream out;
  write_solution_csv(out, sol, g);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "t,p_1,p_2,zeta_1,zeta_2,trace_Pi");
  std::getline(in, row);
  EXPECT_EQ(row, "0,1,1,0,0,2");
}

TEST(Export, TrialsAndVariance) {
  TrialStats t;
  t.n_trials = 2;
  t.per_trial_errors = {1.0, 3.0};
  t.terminal_error_mean = 2.0;
  t.terminal_error_std = std::sqrt(2.0);
  std::ostringstream out;
  write_trials_csv(out, t);
  EXPECT_EQ(out.str(), "trial,terminal_error\n0,1\n1,3\nmean,2\nstd," +
                           format_real(std::sqrt(2.0)) + "\n");
  std::ostringstream grid;
  write_variance_csv(grid, Matrix::Constant(2, 2, 0.5));
  EXPECT_EQ(grid.str(), "x,y,variance\n0.25,0.25,0.5\n0.25,0.75,0.5\n0.75,0.25,0.5\n0.75,0.75,0.5\n");
}
