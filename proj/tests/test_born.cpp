#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "decotime/born.hpp"
#include "decotime/dynamics.hpp"

using namespace decotime;

namespace {

double loglog_slope(const std::vector<double>& x,
					const std::vector<double>& y) {
	const std::size_t n = x.size();
	double sx = 0, sy = 0, sxx = 0, sxy = 0;
	for (std::size_t i = 0; i < n; ++i) {
		const double lx = std::log(x[i]);
		const double ly = std::log(y[i]);
		sx += lx;
		sy += ly;
		sxx += lx * lx;
		sxy += lx * ly;
	}
	return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct Residuals {
	double e1 = 0.0;
	double delta1 = 0.0;
	double delta2 = 0.0;
};

// Max-over-time residual between the exact trajectory and the order-2
// formulas, with the field moments taken from the constructed (truncated)
// initial ket so both sides share the same rho_1(0).
Residuals born_residuals(const SimulationInput& in) {
	const Trajectory traj = simulate(in);
	const FieldMoments moments = FieldMoments::from_ket(
		make_field_state(in.field, FockSpace{in.field_dim}));
	Residuals r;
	for (std::size_t k = 0; k < traj.times.size(); ++k) {
		const double t = traj.times[k];
		r.e1 = std::max(
			r.e1, std::abs(traj.e1[k] - traj.e1[0] -
						   energy_order2(t, in.omega, in.bath, in.beta,
										 moments)));
		r.delta1 = std::max(
			r.delta1,
			std::abs(traj.delta1[k] - traj.delta1[0] -
					 field_purity_deficit_order2(t, in.omega, in.bath,
												 in.beta, moments)));
		r.delta2 = std::max(
			r.delta2,
			std::abs(traj.reservoir_relative_loss(k) -
					 reservoir_purity_deficit_order2(t, in.omega, in.bath,
													 in.beta, moments)));
	}
	return r;
}

SimulationInput cat_t0_input(double scale) {
	SimulationInput in;
	in.field = FieldStateSpec::even_cat(1.0);
	in.field_dim = 8;
	in.omega = 1.0;
	in.bath = DiscreteBath{{{0.9, scale, 4},
							{1.0, 0.8 * scale, 4},
							{1.12, 1.2 * scale, 4}}};
	in.beta = beta_zero_temperature;
	in.evolution.t_max = 6.0;
	in.evolution.n_samples = 25;
	return in;
}

} // namespace

TEST_CASE("detuning") {
	CHECK(detuning(1.0, 1.0) == 0.0);
	CHECK(detuning(3.0, 1.0) == 1.0);
	CHECK(detuning(0.5, 1.0) < 0.0);
}

TEST_CASE("first-order energy response vanishes") {
	const DiscreteBath bath{{{0.9, 0.3, 4}}};
	CHECK(energy_order1(0.0, 1.0, bath, 2.0) == 0.0);
	CHECK(energy_order1(5.0, 1.0, bath, 2.0) == 0.0);

	// exact confirmation: the leading response is quadratic in gamma
	std::vector<double> scales{1e-3, 3e-3, 1e-2};
	std::vector<double> de;
	for (double s : scales) {
		SimulationInput in;
		in.field = FieldStateSpec::fock(1);
		in.field_dim = 4;
		in.omega = 1.0;
		in.bath = DiscreteBath{{{1.1, s, 4}}};
		in.beta = beta_zero_temperature;
		in.evolution.t_max = 2.0;
		in.evolution.n_samples = 3;
		const Trajectory traj = simulate(in);
		de.push_back(std::abs(traj.e1.back() - traj.e1.front()));
	}
	const double slope = loglog_slope(scales, de);
	CHECK(slope > 1.9);
	CHECK(slope < 2.1);
}

TEST_CASE("second-order energy") {
	const FieldMoments one{1.0, {0.0, 0.0}};
	SECTION("zero at t = 0") {
		const DiscreteBath bath{{{0.8, 0.2, 4}, {1.2, 0.1, 4}}};
		CHECK(energy_order2(0.0, 1.0, bath, 1.0, one) == 0.0);
	}
	SECTION("resonant cold mode drains energy quadratically") {
		const DiscreteBath bath{{{1.0, 0.05, 4}}};
		const double t = 3.0;
		CHECK(energy_order2(t, 1.0, bath, beta_zero_temperature, one) ==
			  Catch::Approx(-0.05 * 0.05 * t * t).margin(1e-15));
	}
	SECTION("occupation-balance antisymmetry") {
		// all modes share nbar; swapping nbar <-> n0 flips the sign
		const double nbar = 0.3, n0 = 1.2, omega = 1.0;
		const double beta_fwd = std::log1p(1.0 / nbar);
		const double beta_swp = std::log1p(1.0 / n0);
		const DiscreteBath bath{{{1.0, 0.1, 4}, {1.0, 0.07, 4}}};
		for (double t : {0.7, 2.0, 5.0}) {
			const double fwd =
				energy_order2(t, omega, bath, beta_fwd, {n0, {0.0, 0.0}});
			const double swp =
				energy_order2(t, omega, bath, beta_swp, {nbar, {0.0, 0.0}});
			CHECK(fwd == Catch::Approx(-swp).margin(1e-14));
		}
	}
	SECTION("exact quadratic scaling under coupling rescale") {
		const double t = 2.3, s = 0.013;
		DiscreteBath base{{{0.9, 0.4, 4}, {1.3, 0.2, 4}}};
		DiscreteBath scaled = base;
		for (auto& m : scaled.modes) {
			m.gamma *= s;
		}
		const double a = energy_order2(t, 1.0, base, 1.5, one);
		const double b = energy_order2(t, 1.0, scaled, 1.5, one);
		CHECK(b == Catch::Approx(s * s * a).epsilon(1e-12));
	}
}

TEST_CASE("golden rule window selects near-resonant modes") {
	for (double t : {1.0, 4.0, 20.0}) {
		const double resonant = golden_rule_kernel(0.0, t);
		CHECK(resonant == Catch::Approx(t * t).margin(1e-10));
		for (double x : {0.5, 1.0, 2.0, 7.3}) {
			const double delta = x * M_PI / t;
			if (x >= 0.5) {
				CHECK(golden_rule_kernel(delta, t) <=
					  std::pow(2.0 / M_PI, 2) * t * t + 1e-12);
			}
		}
	}
}

TEST_CASE("field purity deficit") {
	SECTION("zero at t = 0 and for a cold vacuum") {
		const DiscreteBath bath{{{1.0, 0.1, 4}}};
		const FieldMoments vac{0.0, {0.0, 0.0}};
		CHECK(field_purity_deficit_order2(0.0, 1.0, bath,
										  beta_zero_temperature,
										  {1.0, {0.0, 0.0}}) == 0.0);
		CHECK(field_purity_deficit_order2(4.0, 1.0, bath,
										  beta_zero_temperature, vac) == 0.0);
	}
	SECTION("rejects states with nonzero <a>") {
		const DiscreteBath bath{{{1.0, 0.1, 4}}};
		CHECK_THROWS_AS(
			field_purity_deficit_order2(1.0, 1.0, bath, 2.0,
										{1.0, {1.0, 0.0}}),
			ValidityError);
	}
	SECTION("monotone in n0 and nbar") {
		const DiscreteBath bath{{{1.05, 0.1, 4}}};
		const double t = 2.0;
		double prev = -1.0;
		for (double n0 : {0.1, 0.5, 1.0, 2.0}) {
			const double v = field_purity_deficit_order2(
				t, 1.0, bath, 2.0, {n0, {0.0, 0.0}});
			CHECK(v > prev);
			prev = v;
		}
	}
}

TEST_CASE("reservoir purity deficit") {
	SECTION("cold vacuum stays pure") {
		const DiscreteBath bath{{{1.0, 0.1, 4}}};
		for (double t : {0.0, 1.0, 5.0}) {
			CHECK(reservoir_purity_deficit_order2(
					  t, 1.0, bath, beta_zero_temperature,
					  {0.0, {0.0, 0.0}}) == 0.0);
		}
	}
	SECTION("zero-temperature braces reduce to 2 n0 - |<a>|^2") {
		const DiscreteBath bath{{{1.0, 0.2, 4}}};
		const double t = 1.7;
		const double v = reservoir_purity_deficit_order2(
			t, 1.0, bath, beta_zero_temperature, {1.5, {0.0, 0.0}});
		CHECK(v == Catch::Approx(0.04 * t * t * 3.0).margin(1e-14));
	}
}

TEST_CASE("order-2 formulas are accurate to O(gamma^4) against the exact oracle") {
	SECTION("single resonant mode, T = 0, Fock(1)") {
		std::vector<double> scales{1e-3, 3.16e-3, 1e-2};
		std::vector<double> re, rd1, rd2;
		for (double s : scales) {
			SimulationInput in;
			in.field = FieldStateSpec::fock(1);
			in.field_dim = 4;
			in.omega = 1.0;
			in.bath = DiscreteBath{{{1.0, s, 4}}};
			in.beta = beta_zero_temperature;
			in.evolution.t_max = 6.0;
			in.evolution.n_samples = 25;
			const Residuals r = born_residuals(in);
			re.push_back(r.e1);
			rd1.push_back(r.delta1);
			rd2.push_back(r.delta2);
		}
		CHECK(loglog_slope(scales, re) > 3.5);
		CHECK(loglog_slope(scales, rd1) > 3.5);
		CHECK(loglog_slope(scales, rd2) > 3.5);
	}
	SECTION("detuned three-mode bath, even cat, T = 0") {
		std::vector<double> scales{1e-3, 3.16e-3, 1e-2};
		std::vector<double> re, rd1;
		for (double s : scales) {
			const Residuals r = born_residuals(cat_t0_input(s));
			re.push_back(r.e1);
			rd1.push_back(r.delta1);
		}
		CHECK(loglog_slope(scales, re) > 3.5);
		CHECK(loglog_slope(scales, re) < 4.5);
		CHECK(loglog_slope(scales, rd1) > 3.5);
		CHECK(loglog_slope(scales, rd1) < 4.5);
	}
	SECTION("single thermal mode, even cat") {
		// deep truncation (dim 20) keeps the bath tail far below the
		// gamma^4 floor of the fit
		std::vector<double> scales{1e-3, 3.16e-3, 1e-2};
		std::vector<double> re, rd1;
		for (double s : scales) {
			SimulationInput in;
			in.field = FieldStateSpec::even_cat(1.0);
			in.field_dim = 10;
			in.omega = 1.0;
			in.bath = DiscreteBath{{{1.05, s, 20}}};
			in.beta = 1.0;
			in.weight_cutoff = 1e-9;
			in.evolution.t_max = 6.0;
			in.evolution.n_samples = 25;
			const Residuals r = born_residuals(in);
			re.push_back(r.e1);
			rd1.push_back(r.delta1);
		}
		CHECK(loglog_slope(scales, re) > 3.5);
		CHECK(loglog_slope(scales, rd1) > 3.5);
	}
}
