#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "../support/oracles.hpp"
#include "sfrbsde/averaging_lab.hpp"
#include "sfrbsde/error.hpp"

using namespace sfrbsde;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

Generator time_varying(std::function<double(double)> weight, std::function<double(double, double, double)> g) {
  return Generator{[weight, g](double s, double, double y, double z1, double z2) { return weight(s) * g(y, z1, z2); },
                   std::nullopt, false, {}, "time-varying"};
}

Generator steady(double a, double b, double c, double d) {
  return Generator{[=](double, double, double y, double z1, double z2) { return a * y + b * z1 + c * z2 + d; },
                   a * a + b * b + c * c, true, {}, "steady"};
}

Generator benchmark(double a, double b, double c, double d) {
  Generator g{[=](double s, double, double y, double z1, double z2) {
                return (1.0 + std::sin(2.0 * pi * s)) * (a * y + b * z1 + c * z2 + d);
              },
              4.0 * (a * a + b * b + c * c), false,
              [=](double, double y, double z1, double z2) { return a * y + b * z1 + c * z2 + d; }, "benchmark"};
  return g;
}

CoefficientSet unit_coeffs(int steps) {
  return CoefficientSet(DeterministicFn::constant(0.0), DeterministicFn::constant(1.0), DeterministicFn::constant(1.0),
                        HurstModel(0.75), TimeGrid(1.0, steps));
}

TerminalCondition square() { return TerminalCondition{[](double x) { return x * x; }, 2, "x^2"}; }

SweepConfig small_sweep(std::size_t paths) {
  SweepConfig c;
  c.n_paths = paths;
  c.pde.space_nodes = 129;
  return c;
}

}  // namespace

TEST_CASE("fbar by quadrature") {
  const auto g = [](double y, double z1, double z2) { return y * y - z1 + 0.5 * z2; };
  const auto sin_case = build_fbar(time_varying([](double s) { return 1.0 + std::sin(2.0 * pi * 3.0 * s); }, g), 1.0);
  CHECK(sin_case.provenance == AveragedGenerator::Provenance::Quadrature);
  const auto lin_case = build_fbar(time_varying([](double s) { return s; }, g), 1.0);
  for (double y : {-2.0, 0.3, 4.0}) {
    CHECK(sin_case(0.0, y, 1.0, -1.0) == doctest::Approx(g(y, 1.0, -1.0)).epsilon(1e-12));
    CHECK(lin_case(0.0, y, 1.0, -1.0) == doctest::Approx(0.5 * g(y, 1.0, -1.0)).epsilon(1e-12));
  }
}

TEST_CASE("fbar of a time-independent or closed-form generator") {
  const auto st = build_fbar(steady(0.5, 0.25, 0.25, 0.1), 1.0);
  CHECK(st.provenance == AveragedGenerator::Provenance::Analytic);
  CHECK(st(0.0, 2.0, 1.0, -1.0) == doctest::Approx(1.1));
  const auto bm = build_fbar(benchmark(0.5, 0.25, 0.25, 0.1), 1.0);
  CHECK(std::string(to_string(bm.provenance)) == "analytic");
  CHECK(bm(0.0, 2.0, 1.0, -1.0) == doctest::Approx(1.1));
}

TEST_CASE("fbar rejects an unresolvable time dependence") {
  QuadratureSpec q;
  q.panels = 64;
  q.tolerance = 1e-12;
  const auto wild = time_varying([](double s) { return std::sin(2.0 * pi * 40.3 * s); },
                                 [](double y, double, double) { return y; });
  CHECK_THROWS_AS(build_fbar(wild, 1.0, q), QuadratureError);
}

TEST_CASE("phi bound is zero for a time-independent generator") {
  const auto g = steady(0.5, 0.25, 0.25, 0.1);
  const auto fbar = build_fbar(g, 1.0);
  const auto windows = default_windows(1.0, 8);
  CHECK(windows.size() == 36);
  CHECK(estimate_phi(g, fbar, DomainSampler{}, windows).bound == 0.0);
}

TEST_CASE("phi bound for (1 + sin) y against the closed-form sin^2 average") {
  const auto gen = time_varying([](double s) { return 1.0 + std::sin(2.0 * pi * s); },
                                [](double y, double, double) { return y; });
  const auto fbar = build_fbar(gen, 1.0);
  DomainSampler box;
  box.y = {-1.0, 1.0};
  box.z1 = {0.0, 0.0};
  box.z2 = {0.0, 0.0};
  box.samples = 200;
  const auto windows = default_windows(1.0, 6);
  const auto est = estimate_phi(gen, fbar, box, windows);
  double want = 0.0;
  for (const auto& [t, t1] : windows) {
    const double avg = 0.5 - (std::sin(4.0 * pi * t1) - std::sin(4.0 * pi * t)) / (8.0 * pi * (t1 - t));
    for (std::size_t i = 0; i < box.samples; ++i) {
      const double y = box.point(i).y;
      want = std::max(want, avg * y * y / (1.0 + y * y));
    }
  }
  CHECK(est.bound == doctest::Approx(want).epsilon(1e-10));
  CHECK(est.bound <= 0.5);
  box.samples = 400;
  CHECK(estimate_phi(gen, fbar, box, windows).bound >= est.bound);
}

TEST_CASE("lipschitz estimates") {
  const double a = 0.7;
  const Generator ay{[a](double, double, double y, double, double) { return a * y; }, std::nullopt, true, {}, "ay"};
  DomainSampler s;
  s.samples = 4096;
  const auto est = estimate_lipschitz(ay, s, 1.0);
  CHECK_FALSE(est.declared);
  CHECK(est.value <= a * a * (1.0 + 1e-12));
  CHECK(est.value >= 0.9 * a * a);

  const auto lin = steady(0.5, 0.25, 0.25, 0.1);
  const auto declared = estimate_lipschitz(lin, s, 1.0);
  CHECK(declared.declared);
  CHECK(declared.value == doctest::Approx(0.375));
  CHECK(declared.sampled_max <= 0.375 * (1.0 + 1e-12));

  const Generator constant{[](double, double, double, double, double) { return 3.0; }, std::nullopt, true, {}, "c"};
  CHECK(estimate_lipschitz(constant, s, 1.0).value == 0.0);

  Generator liar = lin;
  liar.lipschitz = 0.01;
  CHECK_THROWS_AS(estimate_lipschitz(liar, s, 1.0), ContractError);
}

TEST_CASE("alpha0 hand-worked cases") {
  // epsilon chosen so that eps^H is exactly 0.5 and 0.25.
  const HurstModel h(0.75);
  const double eps_half = std::pow(0.5, 1.0 / 0.75);
  const double eps_quarter = std::pow(0.25, 1.0 / 0.75);
  CHECK(solve_alpha0(2.0, 1.0, eps_half, h) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(solve_alpha0(2.0, 2.0, eps_quarter, h) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("alpha0 agrees with the closed form and satisfies its equation") {
  for (double hv : {0.6, 0.75, 0.9})
    for (double lip : {0.1, 1.5, 7.0})
      for (double c1 : {0.4, 0.75, 3.0})
        for (double eps : {0.01, 0.1, 0.3}) {
          const HurstModel h(hv);
          if (std::pow(eps, hv) >= std::min(1.0, c1)) continue;
          const double a0 = solve_alpha0(lip, c1, eps, h);
          CHECK(a0 == doctest::Approx(oracle::alpha0(lip, c1, eps, hv)).epsilon(1e-9));
          const double e = std::pow(eps, hv);
          const double lhs = e / a0 * std::min(a0 - lip * e, a0 * c1 - lip * e);
          CHECK(std::abs(lhs - e * e) <= 1e-12);
        }
}

TEST_CASE("alpha0 asymptotics") {
  const HurstModel h(0.75);
  const double lip = 1.5, c1 = 0.6;
  double prev = 1e300;
  for (double eps : {1e-2, 1e-3}) {
    const double ratio = solve_alpha0(lip, c1, eps, h) / std::pow(eps, 0.75);
    const double rel = std::abs(ratio / (lip / c1) - 1.0);
    CHECK(rel < prev);
    prev = rel;
  }
  CHECK(prev < 0.01);
}

TEST_CASE("alpha0 infeasibility and input checks") {
  const HurstModel h(0.75);
  const double c1 = 0.5;
  const double eps_max = max_feasible_epsilon(c1, h);
  CHECK(eps_max == doctest::Approx(std::pow(0.5, 1.0 / 0.75)));
  try {
    solve_alpha0(1.0, c1, eps_max * 1.01, h);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.max_feasible_epsilon() == doctest::Approx(eps_max));
  }
  CHECK_THROWS_AS(solve_alpha0(0.0, 1.0, 0.1, h), DomainError);
  CHECK_THROWS_AS(solve_alpha0(1.0, 0.0, 0.1, h), DomainError);
}

TEST_CASE("constants with a vanishing phi") {
  ConstantsInput in;
  in.lipschitz = 1.5;
  in.c1 = 0.7;
  in.phi_bound = 0.0;
  in.u = 0.3;
  in.epsilon = 0.2;
  const auto c = compute_constants(in, HurstModel(0.75));
  CHECK(c.c2 == 0.0);
  CHECK(c.c3 == 0.0);
  CHECK(c.l1 == doctest::Approx(c.alpha0 + 1.5 / c.alpha0).epsilon(1e-15));
}

TEST_CASE("constants with unit phi and zero moments") {
  ConstantsInput in;
  in.lipschitz = 1.0;
  in.c1 = 1.0;
  in.phi_bound = 1.0;
  in.u = 0.0;
  in.horizon = 1.0;
  in.epsilon = 0.1;
  const auto c = compute_constants(in, HurstModel(0.75));
  CHECK(c.c2 == doctest::Approx(1.0));
  CHECK(c.c3 == doctest::Approx(4.0));
}

TEST_CASE("constants against an independent transcription") {
  for (double eps : {0.5, 0.25, 0.125}) {
    ConstantsInput in;
    in.lipschitz = 1.5;
    in.c1 = 0.627;
    in.phi_bound = 0.31;
    in.horizon = 1.0;
    in.epsilon = eps;
    in.beta = 0.25;
    in.u = std::pow(eps, 0.75);
    in.moments = {0.4, 0.2, 0.3};
    const auto c = compute_constants(in, HurstModel(0.75));
    const auto o = oracle::constants(1.5, 0.627, 0.31, 0.9, 1.0 - in.u, 1.0, eps, 0.25, 0.75);
    CHECK(c.c2 == doctest::Approx(o.c2).epsilon(1e-12));
    CHECK(c.c3 == doctest::Approx(o.c3).epsilon(1e-12));
    CHECK(c.l1 == doctest::Approx(o.l1).epsilon(1e-12));
    CHECK(c.c4 == doctest::Approx(o.c4).epsilon(1e-12));
    CHECK(c.rate_bound() == doctest::Approx(o.c4 * std::pow(eps, 1.0 - 1.5 * 0.25)).epsilon(1e-12));
  }
}

TEST_CASE("constants reject bad inputs") {
  ConstantsInput in;
  in.lipschitz = 1.0;
  in.c1 = 1.0;
  in.phi_bound = -1.0;
  in.epsilon = 0.1;
  CHECK_THROWS_AS(compute_constants(in, HurstModel(0.75)), DomainError);
  in.phi_bound = 0.1;
  in.beta = 0.7;
  CHECK_THROWS_AS(compute_constants(in, HurstModel(0.75)), DomainError);
}

TEST_CASE("degenerate sweep is exactly zero") {
  const auto cs = unit_coeffs(64);
  const auto report = run_sweep(steady(0.5, 0.25, 0.25, 0.1), cs, square(), small_sweep(1000));
  REQUIRE(report.rows.size() == 5);
  CHECK(report.phi_bound == 0.0);
  for (const auto& r : report.rows) {
    CHECK(r.sup_mse == 0.0);
    CHECK(r.sup_mse_stderr == 0.0);
    CHECK(r.z_err_integral == 0.0);
    CHECK(r.y_err_integral == 0.0);
    CHECK(r.exceed_prob == 0.0);
    CHECK(r.pass_lemma1);
    CHECK(r.pass_theorem);
    CHECK(r.pass_chebyshev);
  }
  const auto rate = check_theorem_rate(report, 1e-6);
  CHECK(std::isnan(rate.slope));
  REQUIRE(rate.epsilon1.has_value());
  CHECK(*rate.epsilon1 == 0.5);
  const auto cheb = check_chebyshev(report, 0.01);
  for (bool b : cheb.holds) CHECK(b);
}

TEST_CASE("benchmark sweep at small scale") {
  const auto cs = unit_coeffs(64);
  const auto gen = benchmark(0.5, 0.25, 0.25, 0.1);
  auto cfg = small_sweep(2000);
  const auto report = run_sweep(gen, cs, square(), cfg);
  const auto rate = check_theorem_rate(report, cfg.delta1);
  CHECK(rate.monotone);
  CHECK(rate.slope > 0.0);
  CHECK(report.fbar_provenance == "analytic");
  CHECK(report.lipschitz == doctest::Approx(1.5));
  for (const auto& r : report.rows) {
    CHECK(r.sup_mse > 0.0);
    CHECK(r.t_lo == doctest::Approx(std::pow(r.epsilon, 0.75)));
    CHECK(r.pass_lemma1);
    CHECK(r.pass_theorem);
  }
  for (const auto& l : check_lemma1(report)) {
    CHECK(l.holds);
    CHECK_FALSE(check_lemma1(report.rows.front(), 0.0, 0.0, report.horizon).holds);
  }

  SUBCASE("doubling the path count agrees within the standard errors") {
    cfg.n_paths = 4000;
    cfg.seed = 43;
    const auto more = run_sweep(gen, cs, square(), cfg);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const double se = std::hypot(report.rows[i].sup_mse_stderr, more.rows[i].sup_mse_stderr);
      CHECK(std::abs(report.rows[i].sup_mse - more.rows[i].sup_mse) <= 3.0 * se);
    }
  }
  SUBCASE("worker count does not change the result") {
    cfg.workers = 3;
    const auto threaded = run_sweep(gen, cs, square(), cfg);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      CHECK(threaded.rows[i].sup_mse == report.rows[i].sup_mse);
      CHECK(threaded.rows[i].z_err_integral == report.rows[i].z_err_integral);
      CHECK(threaded.rows[i].exceed_prob == report.rows[i].exceed_prob);
    }
  }
}

TEST_CASE("sweep errors name the failing epsilon") {
  const auto cs = unit_coeffs(32);
  auto cfg = small_sweep(1000);
  cfg.eps_list = {0.9, 0.5, 0.25};
  try {
    run_sweep(benchmark(0.5, 0.25, 0.25, 0.1), cs, square(), cfg);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("epsilon 0.9") != std::string::npos);
  }
}

TEST_CASE("sweep config validation") {
  SweepConfig c;
  c.eps_list = {0.5, 0.5};
  CHECK_THROWS(c.validate(HurstModel(0.75)));
  c = SweepConfig{};
  c.beta = 0.7;
  CHECK_THROWS(c.validate(HurstModel(0.75)));
}

TEST_CASE("log slope fit on synthetic data") {
  SweepReport r;
  r.hurst = 0.75;
  for (double eps : {0.5, 0.35, 0.25, 0.18, 0.125}) {
    SweepRow row;
    row.epsilon = eps;
    row.sup_mse = std::pow(eps, 1.5);
    row.constants.c4 = 10.0;
    row.constants.epsilon = eps;
    row.constants.hurst = 0.75;
    row.constants.beta = 0.25;
    r.rows.push_back(row);
  }
  const auto rc = check_theorem_rate(r, 0.2);
  CHECK(std::abs(rc.slope - 1.5) <= 1e-10);
  CHECK(rc.monotone);
  REQUIRE(rc.epsilon1.has_value());
  CHECK(*rc.epsilon1 == 0.25);
  r.rows.resize(2);
  CHECK_THROWS_AS(check_theorem_rate(r, 0.2), DomainError);
  const std::vector<double> x{1.0, 2.0}, y{1.0, 2.0};
  CHECK_THROWS_AS(fit_log_slope(x, y), DomainError);
}

TEST_CASE("sweep csv columns") {
  const auto cs = unit_coeffs(32);
  auto cfg = small_sweep(1000);
  cfg.eps_list = {0.5, 0.25, 0.125};
  const auto report = run_sweep(benchmark(0.5, 0.25, 0.25, 0.1), cs, square(), cfg);
  const auto dir = fs::temp_directory_path() / "sfrbsde_sweep_csv";
  fs::create_directories(dir);
  write_sweep_csv(dir / "s.csv", report);
  write_constants_csv(dir / "c.csv", report);
  std::ifstream in(dir / "s.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "epsilon,t_lo,sup_mse,sup_mse_stderr,z_err_integral,z_err_stderr,exceed_prob,exceed_stderr,c4_bound,"
        "lemma1_lhs,lemma1_rhs,pass_lemma1,pass_theorem,pass_chebyshev");
  std::ifstream cin(dir / "c.csv");
  std::getline(cin, header);
  CHECK(header == "name,value");
  bool found = false;
  for (std::string line; std::getline(cin, line);) found = found || line.rfind("C4@0.125,", 0) == 0;
  CHECK(found);
  fs::remove_all(dir);
}
