#include <catch2/catch_amalgamated.hpp>

#include "spincav/level_diagram.hpp"
#include "test_params.hpp"

using namespace spincav;
using Catch::Approx;

TEST_CASE("labels: formatting and parsing round-trip") {
  CHECK(label_name(7) == "+7/2");
  CHECK(label_name(-5) == "-5/2");
  CHECK(label_name(0) == "0");
  CHECK(label_name(4) == "+2");
  for (int twom : {-7, -5, -3, -1, 1, 3, 5, 7, 0, 2, -6})
    CHECK(parse_label(label_name(twom)) == twom);
  CHECK_THROWS_AS(parse_label("seven"), DataError);
}

TEST_CASE("sweep_levels: zero crystal field gives straight Zeeman lines") {
  SpinSystem sys;
  sys.spin = 3.5;
  sys.g_factor = 1.99;
  const auto grid = linspace(0.0, 100.0, 201);
  const LevelDiagram dia = sweep_levels(sys, grid);
  REQUIRE(dia.branches() == 8);

  // every branch linear in B: least-squares residual below 1e-10 GHz
  for (int k = 0; k < 8; ++k) {
    double sb = 0, se = 0, sbb = 0, sbe = 0;
    const double n = double(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) {
      sb += grid[p];
      se += dia.energies(p, k);
      sbb += grid[p] * grid[p];
      sbe += grid[p] * dia.energies(p, k);
    }
    const double slope = (n * sbe - sb * se) / (n * sbb - sb * sb);
    const double icpt = (se - slope * sb) / n;
    for (std::size_t p = 0; p < grid.size(); ++p)
      REQUIRE(std::abs(dia.energies(p, k) - (icpt + slope * grid[p])) < 1e-10);
    // slope proportional to the diabatic m
    const double m = 0.5 * dia.twom_of_branch(k);
    CHECK(slope == Approx(1.99 * 13.996245e-3 * m).margin(1e-12));
  }
}

TEST_CASE("sweep_levels: four degenerate pairs at zero field") {
  const LevelDiagram dia =
      sweep_levels(testpar::default_system(), linspace(0.0, 10.0, 11));
  Eigen::VectorXd e0 = dia.energies.row(0);
  std::sort(e0.data(), e0.data() + e0.size());
  for (int pair = 0; pair < 4; ++pair)
    CHECK(e0(2 * pair + 1) - e0(2 * pair) < 1e-3);  // < 1 MHz within each pair
  // and the pairs themselves are split by multiple GHz
  for (int pair = 0; pair < 3; ++pair)
    CHECK(e0(2 * pair + 2) - e0(2 * pair + 1) > 1.0);
}

TEST_CASE("sweep_levels: diabatic labels cover all eight m values") {
  const LevelDiagram dia =
      sweep_levels(testpar::default_system(), linspace(0.0, 60.0, 121));
  std::set<int> seen;
  for (int k = 0; k < 8; ++k) seen.insert(dia.twom_of_branch(k));
  CHECK(seen == std::set<int>{-7, -5, -3, -1, 1, 3, 5, 7});
  CHECK(dia.branch_label(dia.branch_of_twom(7)) == "+7/2");
}

TEST_CASE("sweep_levels: grid refinement leaves shared points unchanged") {
  const SpinSystem sys = testpar::default_system();
  const auto coarse = linspace(0.0, 80.0, 81);
  const auto fine = linspace(0.0, 80.0, 161);
  const LevelDiagram d1 = sweep_levels(sys, coarse);
  const LevelDiagram d2 = sweep_levels(sys, fine);
  for (std::size_t p = 0; p < coarse.size(); ++p)
    for (int k = 0; k < 8; ++k)
      CHECK(std::abs(d1.energies(p, k) - d2.energies(2 * p, k)) < 1e-12);
}

TEST_CASE("sweep_levels: trace equals eigenvalue sum at every point") {
  const SpinSystem sys = testpar::default_system();
  const auto grid = linspace(0.0, 100.0, 101);
  const LevelDiagram dia = sweep_levels(sys, grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double tr = hamiltonian(sys, grid[p]).trace().real();
    CHECK(std::abs(dia.energies.row(p).sum() - tr) < 1e-9);
  }
}

TEST_CASE("sweep_levels: tracked overlaps stay above 0.5 unless flagged") {
  const LevelDiagram dia =
      sweep_levels(testpar::default_system(), linspace(0.0, 110.0, 1101));
  for (std::size_t p = 1; p < dia.b_grid.size(); ++p) {
    if (std::find(dia.crossing_flags.begin(), dia.crossing_flags.end(), p) !=
        dia.crossing_flags.end())
      continue;
    for (int k = 0; k < 8; ++k) {
      const double overlap =
          std::abs(dia.states[p - 1].col(k).dot(dia.states[p].col(k)));
      CHECK(overlap > 0.5);
    }
  }
}

TEST_CASE("sweep_levels: input validation") {
  const SpinSystem sys = testpar::default_system();
  CHECK_THROWS_AS(sweep_levels(sys, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(sweep_levels(sys, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(sweep_levels(sys, {2.0, 1.0}), std::invalid_argument);
}

TEST_CASE("level diagram: interpolation helpers") {
  const LevelDiagram dia =
      sweep_levels(testpar::default_system(), linspace(0.0, 50.0, 251));
  const int br = dia.branch_of_twom(-7);
  const double mid = 0.5 * (dia.energies(10, br) + dia.energies(11, br));
  CHECK(dia.energy_at(br, 0.5 * (dia.b_grid[10] + dia.b_grid[11])) ==
        Approx(mid).epsilon(1e-12));
  CHECK(dia.state_at(br, 12.345).norm() == Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(dia.energy_at(br, 51.0), DataError);
}
