#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "sfrbsde/bsde_solver.hpp"
#include "sfrbsde/error.hpp"
#include "sfrbsde/path_engine.hpp"

using namespace sfrbsde;
namespace fs = std::filesystem;

namespace {

CoefficientSet coeffs(double s1, double s2, int steps = 64, double eta0 = 0.0) {
  return CoefficientSet(DeterministicFn::constant(0.0), DeterministicFn::constant(s1), DeterministicFn::constant(s2),
                        HurstModel(0.75), TimeGrid(1.0, steps), {}, eta0);
}

Generator zero_gen() { return Generator{[](double, double, double, double, double) { return 0.0; }, 0.0, true, {}, "zero"}; }

Generator linear_gen(double r) {
  return Generator{[r](double, double, double y, double, double) { return r * y; }, r * r, true, {}, "linear"};
}

TerminalCondition identity_terminal() { return TerminalCondition{[](double x) { return x; }, 1, "x"}; }
TerminalCondition square_terminal() { return TerminalCondition{[](double x) { return x * x; }, 2, "x^2"}; }

PdeConfig nodes(int n) {
  PdeConfig p;
  p.space_nodes = n;
  return p;
}

// sup over the space grid of |psi(0, x) - exact(x)| restricted to |x| <= 2.
template <class Exact>
double sup_error(const SolutionField& f, std::size_t k, Exact exact) {
  double err = 0.0;
  for (std::size_t i = 0; i < f.space_nodes(); ++i) {
    const double x = f.x_at(i);
    if (std::abs(x) <= 2.0) err = std::max(err, std::abs(f.psi(k, i) - exact(x)));
  }
  return err;
}

}  // namespace

TEST_CASE("pde coefficients") {
  const auto heat = coeffs(1.0, 0.0);
  const auto pc = build_pde_coefficients(heat, 1.0);
  for (std::size_t k = 0; k < pc.drift.size(); ++k) {
    CHECK(pc.drift[k] == 0.0);
    CHECK(pc.diffusion[k] == doctest::Approx(0.5));
  }
  const auto half = build_pde_coefficients(heat, 0.5);
  CHECK(half.diffusion[10] / pc.diffusion[10] == doctest::Approx(std::pow(0.5, 1.5)).epsilon(1e-14));
  CHECK(std::pow(0.5, 1.5) == doctest::Approx(0.35355).epsilon(1e-5));

  const auto frac = coeffs(0.0, 1.0);
  const auto pf = build_pde_coefficients(frac, 0.5);
  const auto& g = frac.grid();
  for (std::size_t k = 1; k < g.nodes(); ++k) {
    // d/dt t^{1.5} by central difference
    const double t = g.at(k), d = 1e-6;
    const double fd = (std::pow(t + d, 1.5) - std::pow(t - d, 1.5)) / (2.0 * d);
    CHECK(pf.diffusion[k] == doctest::Approx(0.5 * std::pow(0.5, 1.5) * fd).epsilon(1e-7));
  }
  CHECK_THROWS_AS(build_pde_coefficients(coeffs(0.0, 0.0), 0.5), NumericError);
}

TEST_CASE("pde config validation") {
  PdeConfig p;
  p.kappa = 3.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = PdeConfig{};
  p.space_nodes = 63;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = PdeConfig{};
  CHECK_NOTHROW(p.validate());
  CHECK(p.theta == 0.5);
}

TEST_CASE("linear terminal, zero generator") {
  const auto cs = coeffs(1.0, 1.0);
  const auto f = solve_psi(zero_gen(), identity_terminal(), cs, 1.0, nodes(129));
  for (std::size_t k = 0; k < f.grid.nodes(); ++k)
    for (std::size_t i = 0; i < f.space_nodes(); ++i) {
      CHECK(f.psi(k, i) == doctest::Approx(f.x_at(i)).epsilon(1e-10).scale(1.0));
      CHECK(f.psi_x(k, i) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("quadratic terminal, zero generator") {
  const auto cs = coeffs(1.0, 1.0, 128);
  const auto f = solve_psi(zero_gen(), square_terminal(), cs, 1.0, nodes(129));
  CHECK(f.value(0, 0.0) == doctest::Approx(2.0).epsilon(1e-8));
  for (std::size_t k : {0u, 40u, 100u}) {
    const double t = f.grid.at(k);
    const double shift = 2.0 - (t + std::pow(t, 1.5));
    CHECK(sup_error(f, k, [&](double x) { return x * x + shift; }) <= 1e-8);
  }
}

TEST_CASE("linear generator") {
  const double r = 0.1;
  const auto cs = coeffs(1.0, 1.0, 64);
  const auto f = solve_psi(linear_gen(r), identity_terminal(), cs, 1.0, nodes(129));
  CHECK(std::exp(r) == doctest::Approx(1.10517).epsilon(1e-5));
  CHECK(f.value(0, 1.0) == doctest::Approx(std::exp(r)).epsilon(1e-6));
  CHECK(sup_error(f, 0, [&](double x) { return x * std::exp(r); }) <= 1e-6);
}

TEST_CASE("refinement reduces the linear-generator error") {
  const double r = 0.8;
  const auto coarse_cs = coeffs(1.0, 1.0, 32);
  const auto fine_cs = coeffs(1.0, 1.0, 64);
  const auto coarse = solve_psi(linear_gen(r), identity_terminal(), coarse_cs, 1.0, nodes(65));
  const auto fine = solve_psi(linear_gen(r), identity_terminal(), fine_cs, 1.0, nodes(129));
  const auto exact = [&](double x) { return x * std::exp(r); };
  const double e1 = sup_error(coarse, 0, exact), e2 = sup_error(fine, 0, exact);
  CHECK(e2 > 0.0);
  CHECK(e1 / e2 >= 3.0);
}

TEST_CASE("terminal row and centered differences") {
  const auto cs = coeffs(1.0, 0.5);
  const auto g = TerminalCondition{[](double x) { return std::sin(x) + 0.1 * x * x; }, 2, "mixed"};
  const auto f = solve_psi(linear_gen(0.3), g, cs, 0.5, nodes(101));
  const std::size_t n = f.grid.nodes() - 1;
  for (std::size_t i = 0; i < f.space_nodes(); ++i) CHECK(f.psi(n, i) == g(f.x_at(i)));
  for (std::size_t k : {0u, 30u, 64u})
    for (std::size_t i = 1; i + 1 < f.space_nodes(); ++i)
      CHECK(f.psi_x(k, i) == doctest::Approx((f.psi(k, i + 1) - f.psi(k, i - 1)) / (2.0 * f.dx)).epsilon(1e-12));
}

TEST_CASE("comparison: ordered terminal data gives ordered solutions") {
  const auto cs = coeffs(1.0, 1.0);
  const auto g2 = TerminalCondition{[](double x) { return x * x + std::exp(-x * x); }, 2, "bump"};
  const auto a = solve_psi(linear_gen(0.2), square_terminal(), cs, 0.7, nodes(129));
  const auto b = solve_psi(linear_gen(0.2), g2, cs, 0.7, nodes(129));
  for (std::size_t k = 0; k < a.grid.nodes(); k += 8)
    for (std::size_t i = 0; i < a.space_nodes(); ++i) CHECK(a.psi(k, i) <= b.psi(k, i) + 1e-12);
}

TEST_CASE("picard budget exhaustion is reported") {
  const auto cs = coeffs(1.0, 1.0);
  PdeConfig p = nodes(65);
  p.picard_iterations = 1;
  CHECK_THROWS_AS(solve_psi(linear_gen(0.5), identity_terminal(), cs, 1.0, p), NumericError);
}

TEST_CASE("triple extraction") {
  const auto cs = coeffs(1.0, 1.0, 64);
  const auto e = make_ensemble(cs.grid(), cs.hurst(), 500, 3);
  const double eps = 0.5;
  const auto eta = simulate_eta(cs, e, eps);

  SUBCASE("linear terminal gives Y = eta, Z = sigma") {
    const auto f = solve_psi(zero_gen(), identity_terminal(), cs, eps, nodes(129));
    const auto tr = extract_triple(f, eta, cs);
    CHECK(tr.clamped == 0);
    for (std::size_t p = 0; p < 500; p += 7)
      for (std::size_t k = 0; k < cs.grid().nodes(); ++k) {
        CHECK(tr.y(p, k) == doctest::Approx(eta(p, k)).epsilon(1e-10).scale(1.0));
        CHECK(tr.z1(p, k) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(tr.z2(p, k) == doctest::Approx(1.0).epsilon(1e-10));
      }
  }
  SUBCASE("quadratic terminal gives Z1 = 2 sigma1 eta") {
    const auto f = solve_psi(zero_gen(), square_terminal(), cs, eps, nodes(129));
    const auto tr = extract_triple(f, eta, cs);
    const std::size_t n = cs.grid().nodes() - 1;
    for (std::size_t p = 0; p < 500; p += 7) {
      for (std::size_t k = 0; k <= n; ++k) {
        CHECK(tr.z1(p, k) == doctest::Approx(2.0 * eta(p, k)).epsilon(1e-8).scale(1.0));
        CHECK(tr.z2(p, k) * 1.0 == tr.z1(p, k) * 1.0);
      }
      CHECK(std::abs(tr.y(p, n) - eta(p, n) * eta(p, n)) <= f.dx * f.dx);
    }
  }
}

TEST_CASE("sigma2 = 2 sigma1 gives Z2 = 2 Z1 node-wise") {
  const auto cs = coeffs(1.0, 2.0, 32);
  const auto e = make_ensemble(cs.grid(), cs.hurst(), 200, 8);
  const auto eta = simulate_eta(cs, e, 0.5);
  const auto f = solve_psi(linear_gen(0.3), square_terminal(), cs, 0.5, nodes(101));
  const auto tr = extract_triple(f, eta, cs);
  for (std::size_t p = 0; p < 200; ++p)
    for (std::size_t k = 0; k < cs.grid().nodes(); ++k) CHECK(tr.z2(p, k) == 2.0 * tr.z1(p, k));
}

TEST_CASE("paths leaving the domain are rejected") {
  const auto cs = coeffs(1.0, 1.0, 16);
  const auto f = solve_psi(zero_gen(), identity_terminal(), cs, 0.5, nodes(65));
  PathMatrix eta(10, cs.grid().nodes());
  for (std::size_t p = 0; p < 10; ++p)
    for (std::size_t k = 0; k < cs.grid().nodes(); ++k) eta(p, k) = p < 5 ? 1e6 : 0.0;
  CHECK_THROWS_AS(extract_triple(f, eta, cs), DomainError);
}

TEST_CASE("malliavin representation") {
  const auto cs = coeffs(1.0, 1.0, 32);
  const auto e = make_ensemble(cs.grid(), cs.hurst(), 300, 4);
  const auto eta = simulate_eta(cs, e, 0.5);
  const auto f = solve_psi(linear_gen(0.3), square_terminal(), cs, 0.5, nodes(101));
  const auto tr = extract_triple(f, eta, cs);
  const auto rc = malliavin_representation_check(tr, f, eta, cs, 0.1);
  CHECK(rc.applicable);
  CHECK(rc.status == "checked");
  CHECK(rc.max_deviation <= 1e-12);
  CHECK(cs.sigma2_hat_table().back() / 1.0 == doctest::Approx(0.75).epsilon(1e-9));

  const auto bm = coeffs(1.0, 0.0, 32);
  const auto fb = solve_psi(linear_gen(0.3), square_terminal(), bm, 0.5, nodes(101));
  const auto eb = simulate_eta(bm, e, 0.5);
  const auto tb = extract_triple(fb, eb, bm);
  const auto rb = malliavin_representation_check(tb, fb, eb, bm, 0.1);
  CHECK_FALSE(rb.applicable);
  CHECK(rb.status.rfind("not applicable", 0) == 0);
}

TEST_CASE("residual of the backward equation in mean") {
  const auto cs = coeffs(1.0, 1.0, 128, 0.3);
  const auto e = make_ensemble(cs.grid(), cs.hurst(), 4000, 12);
  const double eps = 0.5;
  const auto eta = simulate_eta(cs, e, eps);
  struct Case {
    Generator gen;
    TerminalCondition g;
  };
  for (const auto& c : {Case{zero_gen(), identity_terminal()}, Case{zero_gen(), square_terminal()},
                        Case{linear_gen(0.4), identity_terminal()}}) {
    CAPTURE(c.gen.label);
    CAPTURE(c.g.label);
    const auto f = solve_psi(c.gen, c.g, cs, eps, nodes(257));
    const auto tr = extract_triple(f, eta, cs);
    for (double t : {0.0, 0.5}) {
      const auto r = residual_mean_check(tr, f, c.gen, c.g, cs, eta, t);
      CHECK(r.passes);
    }
  }
}

TEST_CASE("field and summary csv") {
  const auto cs = coeffs(1.0, 1.0, 16);
  const auto f = solve_psi(zero_gen(), square_terminal(), cs, 0.5, nodes(65));
  const auto dir = fs::temp_directory_path() / "sfrbsde_bsde_csv";
  fs::create_directories(dir);
  write_field_csv(dir / "field.csv", f, 100);
  std::ifstream in(dir / "field.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x,psi,psi_x");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows <= 100);
  CHECK(rows > 0);

  const auto e = make_ensemble(cs.grid(), cs.hurst(), 50, 1);
  const auto tr = extract_triple(f, simulate_eta(cs, e, 0.5), cs);
  write_triple_summary_csv(dir / "triple.csv", tr, cs.grid());
  std::ifstream in2(dir / "triple.csv");
  std::getline(in2, header);
  CHECK(header == "t,mean_Y,var_Y,mean_Z1,mean_Z2");
  fs::remove_all(dir);
}
