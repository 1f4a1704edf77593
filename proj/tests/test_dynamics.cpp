#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "decotime/dynamics.hpp"

using namespace decotime;

namespace {

DiscreteBath single_mode(double omega, double gamma, int dim) {
	return DiscreteBath{{{omega, gamma, dim}}};
}

// Least-squares slope of log(y) vs log(x).
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

} // namespace

TEST_CASE("hamiltonian structure") {
	SECTION("no bath: diagonal free Hamiltonian") {
		const DiscreteBath empty;
		const CompositeBasis basis = make_basis(4, empty);
		const Matrix h = build_hamiltonian(1.3, empty, basis);
		for (long i = 0; i < 4; ++i) {
			CHECK(h(i, i).real() == Catch::Approx(1.3 * i).margin(1e-14));
			for (long j = 0; j < 4; ++j) {
				if (i != j) {
					CHECK(std::abs(h(i, j)) == 0.0);
				}
			}
		}
	}
	SECTION("resonant single-excitation block splits by +-gamma") {
		const double omega = 1.0, gamma = 0.25;
		const DiscreteBath bath = single_mode(omega, gamma, 2);
		const CompositeBasis basis = make_basis(2, bath);
		const Matrix h = build_hamiltonian(omega, bath, basis);
		// single-excitation block spans |0,1> (index 1) and |1,0> (index 2)
		Eigen::Matrix2cd block;
		block << h(1, 1), h(1, 2), h(2, 1), h(2, 2);
		Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(block);
		CHECK(es.eigenvalues()(0) ==
			  Catch::Approx(omega - gamma).margin(1e-12));
		CHECK(es.eigenvalues()(1) ==
			  Catch::Approx(omega + gamma).margin(1e-12));
	}
	SECTION("Hermitian and excitation-conserving") {
		const DiscreteBath bath{{{0.8, 0.1, 3}, {1.2, 0.2, 3}}};
		const CompositeBasis basis = make_basis(4, bath);
		const Matrix h = build_hamiltonian(1.0, bath, basis);
		CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
		// [H, N_tot] = 0: H must vanish between different sectors
		const auto sectors = excitation_sectors(basis);
		std::vector<int> sector_of(basis.total_dim());
		for (std::size_t s = 0; s < sectors.size(); ++s) {
			for (long i : sectors[s]) {
				sector_of[i] = static_cast<int>(s);
			}
		}
		for (long i = 0; i < basis.total_dim(); ++i) {
			for (long j = 0; j < basis.total_dim(); ++j) {
				if (sector_of[i] != sector_of[j]) {
					CHECK(std::abs(h(i, j)) == 0.0);
				}
			}
		}
	}
}

TEST_CASE("excitation sectors") {
	SECTION("dims (2,2)") {
		const auto sectors = excitation_sectors(CompositeBasis({2, 2}));
		REQUIRE(sectors.size() == 3);
		CHECK(sectors[0] == std::vector<long>{0});
		CHECK(sectors[1] == std::vector<long>{1, 2});
		CHECK(sectors[2] == std::vector<long>{3});
	}
	SECTION("dims (3,2): two single-excitation states") {
		const auto sectors = excitation_sectors(CompositeBasis({3, 2}));
		CHECK(sectors[1].size() == 2);
	}
	SECTION("partition is disjoint and exhaustive") {
		const CompositeBasis basis({4, 3, 2});
		const auto sectors = excitation_sectors(basis);
		long count = 0;
		for (const auto& s : sectors) {
			count += static_cast<long>(s.size());
		}
		CHECK(count == basis.total_dim());
	}
}

TEST_CASE("evolution") {
	const double omega = 1.0, gamma = 0.1;
	const DiscreteBath bath = single_mode(omega, gamma, 2);
	const CompositeBasis basis = make_basis(2, bath);
	const Matrix h = build_hamiltonian(omega, bath, basis);
	const KetVector psi0 =
		tensor_product({fock_state(1, FockSpace{2}), fock_state(0, FockSpace{2})});
	EvolutionConfig cfg;
	cfg.t_max = 30.0;
	cfg.n_samples = 61;

	SECTION("Rabi oscillation in the single-excitation sector") {
		const Matrix num = lift_operator(number_matrix(FockSpace{2}), 0, basis);
		for (const auto& [method, tol] :
			 {std::pair{EvolutionMethod::DensePropagator, 1e-10},
			  std::pair{EvolutionMethod::AdaptiveOde, 1e-6}}) {
			cfg.method = method;
			const auto states = evolve(psi0, h, cfg);
			for (int k = 0; k < cfg.n_samples; ++k) {
				const double t = cfg.t_max * k / (cfg.n_samples - 1);
				const double expected = std::pow(std::cos(gamma * t), 2);
				CHECK(expectation(num, states[k]).real() ==
					  Catch::Approx(expected).margin(tol));
				CHECK(states[k].norm() == Catch::Approx(1.0).margin(1e-8));
			}
		}
	}
	SECTION("decoupled bath leaves the excitation number flat") {
		DiscreteBath off = bath;
		off.modes[0].gamma = 0.0;
		const Matrix h0 = build_hamiltonian(omega, off, basis);
		const Matrix num = lift_operator(number_matrix(FockSpace{2}), 0, basis);
		for (const auto& s : evolve(psi0, h0, cfg)) {
			CHECK(std::abs(expectation(num, s).real() - 1.0) < 1e-10);
		}
	}
}

TEST_CASE("thermal ensemble") {
	SECTION("beta = +inf has a single vacuum member") {
		const auto ens = thermal_ensemble(beta_zero_temperature,
										  single_mode(1.0, 0.1, 4), 1e-3);
		REQUIRE(ens.members.size() == 1);
		CHECK(ens.members[0].weight == 1.0);
		CHECK(ens.members[0].levels == std::vector<int>{0});
	}
	SECTION("geometric ladder at nbar = 1") {
		// weights 1/2, 1/4, ... need 10 members to pass 0.999
		const auto ens =
			thermal_ensemble(std::log(2.0), single_mode(1.0, 0.1, 16), 1e-3);
		CHECK(ens.members.size() == 10);
		CHECK(ens.members[0].weight == Catch::Approx(0.5).margin(1e-12));
		CHECK(ens.cumulative_weight >= 0.999);
		CHECK(ens.cumulative_weight <= 1.0);
	}
	SECTION("weights never exceed unity") {
		const DiscreteBath bath{{{0.9, 0.1, 6}, {1.1, 0.1, 6}}};
		const auto ens = thermal_ensemble(1.0, bath, 1e-2);
		double sum = 0.0;
		for (const auto& m : ens.members) {
			sum += m.weight;
		}
		CHECK(sum <= 1.0);
		CHECK(sum == Catch::Approx(ens.cumulative_weight).margin(1e-15));
	}
	SECTION("unreachable cumulative weight is a truncation error") {
		CHECK_THROWS_AS(
			thermal_ensemble(0.7, single_mode(1.0, 0.1, 2), 1e-3),
			TruncationError);
	}
}

TEST_CASE("simulate") {
	SimulationInput in;
	in.field = FieldStateSpec::fock(1);
	in.field_dim = 2;
	in.omega = 1.0;
	in.bath = single_mode(1.0, 0.1, 2);
	in.beta = beta_zero_temperature;
	in.evolution.t_max = 20.0;
	in.evolution.n_samples = 41;

	SECTION("Rabi energy and purity") {
		const Trajectory traj = simulate(in);
		for (std::size_t k = 0; k < traj.times.size(); ++k) {
			const double c = std::cos(0.1 * traj.times[k]);
			CHECK(traj.e1[k] == Catch::Approx(c * c).margin(1e-8));
			// pure bipartite: both reduced entropies agree pointwise
			CHECK(traj.delta1[k] ==
				  Catch::Approx(traj.delta2[k]).margin(1e-10));
		}
		CHECK(traj.max_norm_drift < 1e-8);
		CHECK(traj.max_excitation_drift < 1e-8);
	}

	SECTION("decoupled dynamics freezes the entropies") {
		in.field = FieldStateSpec::even_cat(1.0);
		in.field_dim = 12;
		in.bath.modes[0].gamma = 0.0;
		in.bath.modes[0].dim = 3;
		in.beta = 2.0;
		in.weight_cutoff = 1e-2;
		const Trajectory traj = simulate(in);
		for (std::size_t k = 0; k < traj.times.size(); ++k) {
			CHECK(traj.delta1[k] ==
				  Catch::Approx(traj.delta1[0]).margin(1e-10));
		}
	}

	SECTION("short-time energy curvature") {
		// E1(t) - E1(0) ~ omega t^2 sum_j gamma_j^2 (nbar_j - <n>_0)
		SimulationInput si;
		si.field = FieldStateSpec::even_cat(1.0);
		si.field_dim = 10;
		si.omega = 1.0;
		si.bath = DiscreteBath{{{0.9, 0.01, 4}, {1.05, 0.008, 4}}};
		si.beta = beta_zero_temperature;
		si.evolution.t_max = 0.01 / 0.01;  // 0.01 / max gamma
		si.evolution.n_samples = 21;
		const Trajectory traj = simulate(si);

		const double n0 = 1.0 * std::tanh(1.0);
		double coeff = 0.0;
		for (const BathMode& m : si.bath.modes) {
			coeff += m.gamma * m.gamma * (0.0 - n0);
		}
		// least-squares fit of dE vs t^2
		double num = 0.0, den = 0.0;
		for (std::size_t k = 1; k < traj.times.size(); ++k) {
			const double t2 = traj.times[k] * traj.times[k];
			num += t2 * (traj.e1[k] - traj.e1[0]);
			den += t2 * t2;
		}
		const double fitted = num / den;
		CHECK(fitted == Catch::Approx(coeff).epsilon(0.01));
	}

	SECTION("coupling-order scaling of energy and entropy responses") {
		std::vector<double> scales{1e-3, 3e-3, 1e-2};
		std::vector<double> de, dd;
		for (double s : scales) {
			SimulationInput si;
			si.field = FieldStateSpec::even_cat(1.0);
			si.field_dim = 10;
			si.omega = 1.0;
			si.bath = DiscreteBath{{{0.95, s, 3}, {1.1, 0.7 * s, 3}}};
			si.beta = beta_zero_temperature;
			si.evolution.t_max = 2.0;
			si.evolution.n_samples = 3;
			const Trajectory traj = simulate(si);
			de.push_back(std::abs(traj.e1.back() - traj.e1.front()));
			dd.push_back(std::abs(traj.delta1.back() - traj.delta1.front()));
		}
		CHECK(loglog_slope(scales, de) > 1.95);
		CHECK(loglog_slope(scales, de) < 2.05);
		CHECK(loglog_slope(scales, dd) > 1.95);
		CHECK(loglog_slope(scales, dd) < 2.05);
	}

	SECTION("thermal simulate agrees between one and several workers") {
		SimulationInput si;
		si.field = FieldStateSpec::fock(1);
		si.field_dim = 3;
		si.omega = 1.0;
		si.bath = single_mode(1.0, 0.05, 6);
		si.beta = std::log(10.0);
		si.evolution.t_max = 5.0;
		si.evolution.n_samples = 11;
		si.weight_cutoff = 1e-4;
		const Trajectory serial = simulate(si);
		setenv("DECOTIME_WORKERS", "4", 1);
		const Trajectory parallel = simulate(si);
		unsetenv("DECOTIME_WORKERS");
		for (std::size_t k = 0; k < serial.times.size(); ++k) {
			CHECK(serial.e1[k] == parallel.e1[k]);
			CHECK(serial.delta1[k] == parallel.delta1[k]);
			CHECK(serial.delta2[k] == parallel.delta2[k]);
		}
	}
}
