#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "decotime/dynamics.hpp"
#include "decotime/errors.hpp"
#include "decotime/fock.hpp"

namespace decotime {

// Initial field moments entering the second-order formulas.
struct FieldMoments {
	double mean_n0 = 0.0;  // <a^dag a> at t = 0
	Complex mean_a0{0.0, 0.0};

	static FieldMoments from_spec(const FieldStateSpec& spec) {
		FieldMoments m;
		switch (spec.kind) {
		case FieldStateSpec::Kind::Fock:
			m.mean_n0 = static_cast<double>(spec.n);
			break;
		case FieldStateSpec::Kind::Coherent:
			m.mean_n0 = std::norm(spec.alpha);
			m.mean_a0 = spec.alpha;
			break;
		case FieldStateSpec::Kind::EvenCat: {
			const double a2 = std::norm(spec.alpha);
			m.mean_n0 = a2 * std::tanh(a2);
			break;
		}
		}
		return m;
	}

	// Moments of the state actually constructed on a truncated basis; used
	// when comparing against the exact simulator so both sides share the
	// same rho_1(0).
	static FieldMoments from_ket(const KetVector& ket) {
		const int dim = static_cast<int>(ket.amplitudes().size());
		FieldMoments m;
		m.mean_n0 = expectation(number_matrix(FockSpace{dim}), ket).real();
		m.mean_a0 = expectation(annihilation_matrix(FockSpace{dim}), ket);
		return m;
	}
};

// Delta_j = (Omega_j - omega) / 2
inline double detuning(double bath_omega, double omega) {
	return 0.5 * (bath_omega - omega);
}

// sin(x)/x with a series branch near the removable singularity.
inline double sinc(double x) {
	if (std::abs(x) < 1e-4) {
		return 1.0 - x * x / 6.0;
	}
	return std::sin(x) / x;
}

// (sin(Delta t) / Delta)^2
inline double golden_rule_kernel(double delta, double t) {
	const double s = t * sinc(delta * t);
	return s * s;
}

// First-order energy response vanishes identically for a thermal bath.
inline double energy_order1(double /*t*/, double /*omega*/,
							const DiscreteBath& /*bath*/, double /*beta*/) {
	return 0.0;
}

// E_1^(2)(t) = omega sum_j (gamma_j sin(Delta_j t) / Delta_j)^2
//              (nbar_j - <a^dag a>_0)
inline double energy_order2(double t, double omega, const DiscreteBath& bath,
							double beta, const FieldMoments& moments) {
	double sum = 0.0;
	for (const BathMode& m : bath.modes) {
		const double nbar = thermal_occupation(beta, m.omega);
		sum += m.gamma * m.gamma *
			   golden_rule_kernel(detuning(m.omega, omega), t) *
			   (nbar - moments.mean_n0);
	}
	return omega * sum;
}

// delta_1^(2)(t) = 2 sum_j gamma_j^2 (sin(Delta_j t)/Delta_j)^2
//                  { nbar_j (n0 + 1) + (nbar_j + 1) n0 }
// Derived for fields with <a>_0 = 0 (Fock, even cat).
inline double field_purity_deficit_order2(double t, double omega,
										  const DiscreteBath& bath,
										  double beta,
										  const FieldMoments& moments) {
	if (std::abs(moments.mean_a0) > 1e-12) {
		throw ValidityError(
			"field_purity_deficit_order2: requires <a>_0 = 0");
	}
	const double n0 = moments.mean_n0;
	double sum = 0.0;
	for (const BathMode& m : bath.modes) {
		const double nbar = thermal_occupation(beta, m.omega);
		sum += m.gamma * m.gamma *
			   golden_rule_kernel(detuning(m.omega, omega), t) *
			   (nbar * (n0 + 1.0) + (nbar + 1.0) * n0);
	}
	return 2.0 * sum;
}

// 1 - Tr rho_2^2(t) / Tr rho_2^2(0) at second order:
//   t^2 sum_k gamma_k^2 sinc^2(Delta_k t)
//     { 4 (2 n0 + 1)(tanh(beta Omega_k / 2) - 1)
//       + 2 n0 - |<a>_0|^2 tanh(beta Omega_k / 2) }
// tanh(beta Omega / 2) = 1 at beta = +inf. The signed value is returned;
// only the timescale extraction takes the absolute value.
inline double reservoir_purity_deficit_order2(double t, double omega,
											  const DiscreteBath& bath,
											  double beta,
											  const FieldMoments& moments) {
	const double n0 = moments.mean_n0;
	const double a2 = std::norm(moments.mean_a0);
	double sum = 0.0;
	for (const BathMode& m : bath.modes) {
		const double th =
			std::isinf(beta) ? 1.0 : std::tanh(0.5 * beta * m.omega);
		sum += m.gamma * m.gamma *
			   golden_rule_kernel(detuning(m.omega, omega), t) *
			   (4.0 * (2.0 * n0 + 1.0) * (th - 1.0) + 2.0 * n0 - a2 * th);
	}
	return sum;
}

// Order-by-order series sampled on a time grid.
struct BornSeries {
	std::vector<double> times;
	double e1_order0 = 0.0;
	std::vector<double> e1_order1;
	std::vector<double> e1_order2;
	std::vector<double> delta1_order2;
	std::vector<double> delta2_order2;
};

inline BornSeries born_series(const std::vector<double>& times, double omega,
							  const DiscreteBath& bath, double beta,
							  const FieldMoments& moments) {
	BornSeries s;
	s.times = times;
	s.e1_order0 = omega * moments.mean_n0;
	for (double t : times) {
		s.e1_order1.push_back(energy_order1(t, omega, bath, beta));
		s.e1_order2.push_back(energy_order2(t, omega, bath, beta, moments));
		s.delta1_order2.push_back(
			field_purity_deficit_order2(t, omega, bath, beta, moments));
		s.delta2_order2.push_back(
			reservoir_purity_deficit_order2(t, omega, bath, beta, moments));
	}
	return s;
}

} // namespace decotime
