#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lbness/spectral.hpp"
#include "test_helpers.hpp"

using namespace lbness;
using testutil::truncated_resolvent;

namespace {
const LeadSpec kUnit{1.0, 0.0, kInfinity, 0.0};
}

TEST_CASE("band_point at the band center") {
  const BandPoint pt = band_point(kUnit, 0.0);
  CHECK(pt.wavenumber == doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-14));
  CHECK(pt.velocity == doctest::Approx(2.0).epsilon(1e-14));

  const BandPoint scaled = band_point({0.5, 1.0, kInfinity, 0.0}, 1.0);
  CHECK(scaled.wavenumber == doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-14));
  CHECK(scaled.velocity == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("band_point rejects edges and out-of-band energies") {
  CHECK_THROWS_AS(band_point(kUnit, -2.0 + 1e-12), AtBandEdge);
  CHECK_THROWS_AS(band_point(kUnit, 2.0 - 1e-12), AtBandEdge);
  CHECK_THROWS_AS(band_point(kUnit, -2.5), OutOfBand);
  CHECK_THROWS_AS(band_point(kUnit, 2.5), OutOfBand);
  CHECK_NOTHROW(band_point(kUnit, -2.0 + 1e-3));
}

TEST_CASE("band_point round-trips the energy and is monotone") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(-1.999, 1.999);
  for (int i = 0; i < 200; ++i) {
    const double e = uni(rng);
    const BandPoint pt = band_point(kUnit, e);
    const double back = kUnit.onsite - 2.0 * kUnit.hopping * std::cos(pt.wavenumber);
    CHECK(back == doctest::Approx(e).epsilon(1e-12));
    CHECK(pt.velocity > 0.0);
  }
  // monotone bijection on an increasing sweep
  double prev = band_point(kUnit, -1.9).wavenumber;
  for (double e = -1.8; e < 1.95; e += 0.1) {
    const double k = band_point(kUnit, e).wavenumber;
    CHECK(k > prev);
    prev = k;
  }
}

TEST_CASE("eigenfunction node and closed-form value") {
  const BandPoint pt = band_point(kUnit, 0.0);
  CHECK(std::abs(eigenfunction(kUnit, pt, 2)) < 1e-15);  // sin(pi) = 0
  CHECK(eigenfunction(kUnit, pt, 1) ==
        doctest::Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-13));
}

// Finite-chain oracle: an (L-site) eigenpair certified by its residual, then
// rescaled by the level spacing to the delta(E - E') normalization.
TEST_CASE("eigenfunction matches the certified finite-chain oracle") {
  const int L = 5999;
  auto oracle = [&](int q, int site) {
    const double theta = q * std::numbers::pi / (L + 1);
    const double lambda = -2.0 * std::cos(theta);
    // certify the eigenpair on the tridiagonal action
    double resid = 0.0;
    auto phi = [&](int n) { return n >= 1 && n <= L ? std::sin(theta * n) : 0.0; };
    for (int n = 1; n <= std::min(L, 200); ++n)
      resid = std::max(resid, std::abs(-(phi(n - 1) + phi(n + 1)) - lambda * phi(n)));
    REQUIRE(resid < 1e-10);
    const double spacing = 2.0 * std::sin(theta) * std::numbers::pi / (L + 1);  // dE/dk * dk
    return std::sqrt(2.0 / (L + 1)) * phi(site) / std::sqrt(spacing);
  };

  // q = 3000 lands exactly on the band center
  CHECK(oracle(3000, 1) == doctest::Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-12));
  for (int q : {700, 1500, 3000, 4200, 5100}) {
    const double energy = -2.0 * std::cos(q * std::numbers::pi / (L + 1));
    const BandPoint pt = band_point(kUnit, energy);
    for (int site = 1; site <= 4; ++site)
      CHECK(eigenfunction(kUnit, pt, site) == doctest::Approx(oracle(q, site)).epsilon(1e-10));
  }
}

TEST_CASE("eigenfunction oracle converges in L") {
  auto value = [](int L, int site) {
    // eigenvalue grid point closest to E = 0.6
    const double target = std::acos(-0.3);
    const int q = static_cast<int>(std::round(target * (L + 1) / std::numbers::pi));
    const double theta = q * std::numbers::pi / (L + 1);
    const double spacing = 2.0 * std::sin(theta) * std::numbers::pi / (L + 1);
    const double psi = std::sqrt(2.0 / (L + 1)) * std::sin(theta * site) / std::sqrt(spacing);
    const double energy = -2.0 * std::cos(theta);
    return std::pair<double, double>{energy, psi};
  };
  for (int L : {1000, 3000, 6000}) {
    const auto [energy, psi] = value(L, 2);
    const BandPoint pt = band_point(kUnit, energy);
    CHECK(eigenfunction(kUnit, pt, 2) == doctest::Approx(psi).epsilon(1e-9));
  }
}

TEST_CASE("eigenfunction satisfies the lattice difference equation") {
  const LeadSpec lead{0.7, 0.3, kInfinity, 0.0};
  for (double e : {-0.9, 0.0, 0.3, 1.4}) {
    const BandPoint pt = band_point(lead, e);
    auto psi = [&](int n) { return n == 0 ? 0.0 : eigenfunction(lead, pt, n); };
    for (int n = 1; n <= 6; ++n) {
      const double resid =
          -lead.hopping * (psi(n - 1) + psi(n + 1)) + lead.onsite * psi(n) - e * psi(n);
      CHECK(std::abs(resid) < 1e-12);
    }
  }
}

TEST_CASE("completeness: energy integral of psi(n) psi(m) is delta_nm") {
  // direct trapezoid oracle on a fine energy grid
  const int points = 100001;
  const double lo = -2.0 + 1e-5, hi = 2.0 - 1e-5;
  const double h = (hi - lo) / (points - 1);
  for (int n = 1; n <= 5; ++n)
    for (int m = n; m <= 5; ++m) {
      double sum = 0.0;
      for (int i = 0; i < points; ++i) {
        const double e = lo + i * h;
        const BandPoint pt = band_point(kUnit, e, 1e-7);
        const double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
        sum += w * h * eigenfunction(kUnit, pt, n) * eigenfunction(kUnit, pt, m);
      }
      CHECK(std::abs(sum - (n == m ? 1.0 : 0.0)) < 1e-4);
    }
}

TEST_CASE("lead_green closed form at the band center") {
  const Complex g11 = lead_green(kUnit, Complex{0.0, 0.0}, 1, 1);
  CHECK(std::abs(g11 - Complex{0.0, -1.0}) < 1e-14);
}

TEST_CASE("lead_green matches the truncated-resolvent oracle off the real axis") {
  // Same complex z on both sides; the truncation ripple at eta = 1e-2 and
  // L = 2000 is far below the tolerance.
  const int L = 2000;
  const double eta = 1e-2;
  for (double e : {-1.8, -1.2, -0.5, 0.0, 0.7, 1.5, 1.8}) {
    const Complex z{e, eta};
    for (int n = 1; n <= 4; ++n)
      for (int m = 1; m <= 4; ++m) {
        const Complex mine = lead_green(kUnit, z, n, m);
        const Complex oracle = truncated_resolvent(kUnit, L, z, n, m);
        CHECK(std::abs(mine - oracle) < 1e-6);
      }
  }
  // shifted and rescaled lead
  const LeadSpec lead{0.6, -0.4, kInfinity, 0.0};
  for (double e : {-1.2, -0.4, 0.5}) {
    const Complex z{e, eta};
    const Complex mine = lead_green(lead, z, 2, 3);
    CHECK(std::abs(mine - truncated_resolvent(lead, L, z, 2, 3)) < 1e-6);
  }
}

TEST_CASE("lead_green truncated-resolvent error decreases in L") {
  const double eta = 1e-3;
  double prev = kInfinity;
  for (int L : {500, 1000, 2000}) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double e = -1.9 + 3.8 * i / 19.0;
      const Complex z{e, eta};
      for (int n = 1; n <= 4; ++n)
        for (int m = n; m <= 4; ++m)
          worst = std::max(worst,
                           std::abs(lead_green(kUnit, z, n, m) -
                                    truncated_resolvent(kUnit, L, z, n, m)));
    }
    CHECK(worst < prev);
    prev = worst;
  }
}

TEST_CASE("lead_green boundary value is the eta -> 0 limit") {
  for (double e : {-1.3, 0.2, 1.7}) {
    const Complex at_zero = lead_green(kUnit, Complex{e, 0.0}, 1, 2);
    double prev = kInfinity;
    for (double eta : {1e-4, 1e-6, 1e-8}) {
      const double dev = std::abs(lead_green(kUnit, Complex{e, eta}, 1, 2) - at_zero);
      CHECK(dev < prev);
      prev = dev;
    }
    CHECK(prev < 1e-7);
  }
}

TEST_CASE("Sokhotski-Plemelj identity on finitely supported vectors") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const Complex f1{uni(rng), uni(rng)};
    const Complex f2{uni(rng), uni(rng)};
    for (int i = 0; i < 15; ++i) {
      const double e = -1.9 + 3.8 * i / 14.0;
      Complex quad{0.0, 0.0};
      const Complex f[2] = {f1, f2};
      for (int n = 1; n <= 2; ++n)
        for (int m = 1; m <= 2; ++m)
          quad += std::conj(f[n - 1]) * lead_green(kUnit, Complex{e, 0.0}, n, m) * f[m - 1];
      const BandPoint pt = band_point(kUnit, e);
      const Complex f_of_e = f1 * eigenfunction(kUnit, pt, 1) + f2 * eigenfunction(kUnit, pt, 2);
      CHECK(std::abs(quad.imag() + std::numbers::pi * std::norm(f_of_e)) < 1e-8);
    }
  }
}

TEST_CASE("lead_green symmetry and off-band behaviour") {
  CHECK(lead_green(kUnit, Complex{0.7, 0.0}, 2, 5) == lead_green(kUnit, Complex{0.7, 0.0}, 5, 2));

  CHECK_THROWS_AS(lead_green(kUnit, Complex{2.5, 0.0}, 1, 1), OutOfBandRealAxis);
  CHECK_THROWS_AS(lead_green(kUnit, Complex{2.0 - 1e-9, 0.0}, 1, 1), AtBandEdge);

  // decaying real branch, checked against the truncated oracle
  for (double e : {2.5, 3.0, -2.7}) {
    const Complex g11 = lead_green(kUnit, Complex{e, 0.0}, 1, 1, true);
    CHECK(std::abs(g11.imag()) < 1e-14);
    CHECK(std::abs(g11 - truncated_resolvent(kUnit, 2000, Complex{e, 0.0}, 1, 1)) < 1e-10);
    const Complex g14 = lead_green(kUnit, Complex{e, 0.0}, 1, 4, true);
    CHECK(std::abs(g14) < std::abs(g11));  // off-spectrum decay
  }
}

TEST_CASE("dot_resolvent_residual") {
  DotSpec dot;
  dot.h = Matrix::Constant(1, 1, Complex{0.2, 0.0});
  Vector x = Vector::Constant(1, Complex{3.0, -1.0});
  Vector y = Vector::Zero(1);
  CHECK(dot_resolvent_residual(dot, 0.2, x, y).norm() < 1e-15);  // on-eigenvalue annihilation

  DotSpec empty;
  empty.h = Matrix::Zero(0, 0);
  CHECK(dot_resolvent_residual(empty, 0.0, Vector{}, Vector{}).size() == 0);

  DotSpec diag;
  diag.h = Matrix::Zero(2, 2);
  diag.h(0, 0) = 1.0;
  diag.h(1, 1) = -1.0;
  Vector x2 = Vector::Constant(2, Complex{1.0, 0.0});
  const Vector r = dot_resolvent_residual(diag, 0.0, x2, Vector::Zero(2));
  CHECK(std::abs(r(0) - Complex{1.0, 0.0}) < 1e-15);
  CHECK(std::abs(r(1) - Complex{-1.0, 0.0}) < 1e-15);
}
