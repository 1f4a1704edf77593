#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decotime/born.hpp"
#include "decotime/dynamics.hpp"
#include "decotime/errors.hpp"

namespace decotime {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Continuum reservoir: mode density g(Omega) and coupling gamma(Omega).
struct SpectralModel {
	enum class Kind { Flat, Ohmic, Lorentzian };
	Kind kind = Kind::Flat;

	// Flat: g = g0, gamma = gamma0 on [band_min, band_max].
	double g0 = 0.0;
	double band_min = 0.0;
	double band_max = 0.0;

	// Ohmic: g = scale * Omega * exp(-Omega / cutoff).
	double scale = 0.0;
	double cutoff = 0.0;

	// Lorentzian: g = peak * width^2 / ((Omega - center)^2 + width^2).
	double center = 0.0;
	double width = 0.0;
	double peak = 0.0;

	double gamma0 = 0.0;  // flat coupling profile for all three variants

	static SpectralModel flat(double g0, double gamma0, double band_min,
							  double band_max) {
		SpectralModel m;
		m.kind = Kind::Flat;
		m.g0 = g0;
		m.gamma0 = gamma0;
		m.band_min = band_min;
		m.band_max = band_max;
		if (!(band_min >= 0.0 && band_max > band_min && g0 >= 0.0)) {
			throw ConfigError("SpectralModel::flat: bad band or density");
		}
		return m;
	}

	static SpectralModel ohmic(double scale, double gamma0, double cutoff) {
		SpectralModel m;
		m.kind = Kind::Ohmic;
		m.scale = scale;
		m.gamma0 = gamma0;
		m.cutoff = cutoff;
		if (!(scale >= 0.0 && cutoff > 0.0)) {
			throw ConfigError("SpectralModel::ohmic: bad parameters");
		}
		return m;
	}

	static SpectralModel lorentzian(double center, double width, double peak,
									double gamma0) {
		SpectralModel m;
		m.kind = Kind::Lorentzian;
		m.center = center;
		m.width = width;
		m.peak = peak;
		m.gamma0 = gamma0;
		if (!(center > 0.0 && width > 0.0 && peak >= 0.0)) {
			throw ConfigError("SpectralModel::lorentzian: bad parameters");
		}
		return m;
	}

	double g(double omega) const {
		if (omega <= 0.0) {
			return 0.0;
		}
		switch (kind) {
		case Kind::Flat:
			return (omega >= band_min && omega <= band_max) ? g0 : 0.0;
		case Kind::Ohmic:
			return scale * omega * std::exp(-omega / cutoff);
		case Kind::Lorentzian: {
			const double d = omega - center;
			return peak * width * width / (d * d + width * width);
		}
		}
		return 0.0;
	}

	double gamma(double /*omega*/) const { return gamma0; }

	// Finite interval that carries the numerically relevant support.
	std::pair<double, double> support() const {
		switch (kind) {
		case Kind::Flat:
			return {band_min, band_max};
		case Kind::Ohmic:
			return {0.0, 40.0 * cutoff};
		case Kind::Lorentzian:
			return {std::max(0.0, center - 60.0 * width),
					center + 60.0 * width};
		}
		return {0.0, 0.0};
	}
};

namespace detail {

inline double integrate(const std::function<double(double)>& f, double a,
						double b, double rel_tol = 1e-8) {
	if (!(b > a)) {
		return 0.0;
	}
	double error = 0.0;
	const double result =
		boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
			f, a, b, 15, rel_tol, &error);
	const double scale = std::max(std::abs(result), 1e-300);
	if (error > 1e-6 * scale && error > 1e-14) {
		throw QuadratureError("integrate: adaptive quadrature did not converge");
	}
	return result;
}

} // namespace detail

// t * integral over |Delta| <= 1/(2t) of g(omega + Delta) F(omega + Delta);
// the windowed golden-rule rate 1/tau_F (t-independent once the window sits
// inside a flat band).
inline double window_rate(double t, double omega, const SpectralModel& model,
						  const std::function<double(double)>& f_of_omega) {
	if (!(t > 0.0)) {
		throw ConfigError("window_rate: t > 0 required");
	}
	const auto [lo, hi] = model.support();
	const double a = std::max(omega - 0.5 / t, lo);
	const double b = std::min(omega + 0.5 / t, hi);
	if (!(b > a)) {
		return 0.0;
	}
	auto integrand = [&](double w) { return model.g(w) * f_of_omega(w); };
	return t * detail::integrate(integrand, a, b);
}

// tau_dis: finite-t windowed integral or the Markovian g(omega) gamma^2.
inline double tau_dissipation(std::optional<double> t, double omega,
							  const SpectralModel& model) {
	double rate;
	if (t.has_value()) {
		rate = window_rate(*t, omega, model, [&](double w) {
			const double gm = model.gamma(w);
			return gm * gm;
		});
	} else {
		const double gm = model.gamma(omega);
		rate = model.g(omega) * gm * gm;
	}
	if (!(rate > 0.0)) {
		throw DegenerateModel("tau_dissipation: g(omega) gamma^2(omega) = 0");
	}
	return 1.0 / rate;
}

// tau_th^{-1} = nbar(omega) g(omega) gamma^2(omega) / <a^dag a>_0;
// +inf at beta = +inf (no thermal effects at T = 0).
inline double tau_thermal(std::optional<double> t, double omega, double beta,
						  const SpectralModel& model,
						  const FieldMoments& moments) {
	if (!(moments.mean_n0 > 0.0)) {
		throw ValidityError("tau_thermal: requires <a^dag a>_0 > 0");
	}
	if (std::isinf(beta)) {
		return std::numeric_limits<double>::infinity();
	}
	double rate;
	if (t.has_value()) {
		rate = window_rate(*t, omega, model, [&](double w) {
			const double gm = model.gamma(w);
			return thermal_occupation(beta, w) * gm * gm;
		});
	} else {
		const double gm = model.gamma(omega);
		rate = thermal_occupation(beta, omega) * model.g(omega) * gm * gm;
	}
	rate /= moments.mean_n0;
	if (!(rate > 0.0)) {
		throw DegenerateModel("tau_thermal: vanishing thermal rate");
	}
	return 1.0 / rate;
}

// tau_dec^{-1} = 2 g gamma^2 { nbar (n0 + 1) + (nbar + 1) n0 }, Markovian.
inline double tau_decoherence(double omega, double beta,
							  const SpectralModel& model,
							  const FieldMoments& moments) {
	const double gm = model.gamma(omega);
	const double gg2 = model.g(omega) * gm * gm;
	if (!(gg2 > 0.0)) {
		throw DegenerateModel("tau_decoherence: g(omega) gamma^2(omega) = 0");
	}
	const double nbar = thermal_occupation(beta, omega);
	const double n0 = moments.mean_n0;
	const double braces = nbar * (n0 + 1.0) + (nbar + 1.0) * n0;
	if (braces == 0.0) {
		return std::numeric_limits<double>::infinity();
	}
	return 1.0 / (2.0 * gg2 * braces);
}

// tau_{2,dec}^{-1} = g gamma^2 / (2 nbar + 1)
//   |2 n0 (2 nbar + 1) - 8 nbar (2 n0 + 1) - |<a>_0|^2|
inline double tau_reservoir_decoherence(double omega, double beta,
										const SpectralModel& model,
										const FieldMoments& moments) {
	const double gm = model.gamma(omega);
	const double gg2 = model.g(omega) * gm * gm;
	if (!(gg2 > 0.0)) {
		throw DegenerateModel(
			"tau_reservoir_decoherence: g(omega) gamma^2(omega) = 0");
	}
	const double nbar = thermal_occupation(beta, omega);
	const double n0 = moments.mean_n0;
	const double a2 = std::norm(moments.mean_a0);
	const double body = std::abs(2.0 * n0 * (2.0 * nbar + 1.0) -
								 8.0 * nbar * (2.0 * n0 + 1.0) - a2);
	if (body == 0.0) {
		return std::numeric_limits<double>::infinity();
	}
	return (2.0 * nbar + 1.0) / (gg2 * body);
}

struct SeparabilityCheck {
	double tau = 0.0;
	double period = 0.0;		 // 2 pi / omega
	double inv_omega = 0.0;		 // 1 / omega
	double ratio_period = 0.0;	 // tau / period
	double ratio_inv_omega = 0.0;
	double margin = 100.0;
	bool pass = false;
};

// PASS iff tau_res_dec > margin * (2 pi / omega). Both the period and the
// bare 1/omega readings are reported.
inline SeparabilityCheck separability_check(double tau_res_dec, double omega,
											double margin = 100.0) {
	SeparabilityCheck c;
	c.tau = tau_res_dec;
	c.period = two_pi / omega;
	c.inv_omega = 1.0 / omega;
	c.ratio_period = tau_res_dec / c.period;
	c.ratio_inv_omega = tau_res_dec * omega;
	c.margin = margin;
	c.pass = tau_res_dec > margin * c.period;
	return c;
}

struct ZeroTCondition {
	double ratio = 0.0;	 // g gamma^2 (2 n0 - |<a>_0|^2) / omega
	double margin = 100.0;
	bool pass = false;
};

inline ZeroTCondition zero_T_condition(double omega, const SpectralModel& model,
									   const FieldMoments& moments,
									   double margin = 100.0) {
	const double gm = model.gamma(omega);
	ZeroTCondition c;
	c.margin = margin;
	c.ratio = model.g(omega) * gm * gm *
			  (2.0 * moments.mean_n0 - std::norm(moments.mean_a0)) / omega;
	c.pass = c.ratio < 1.0 / margin;
	return c;
}

struct TimescaleReport {
	double omega = 0.0;
	double beta = 0.0;
	double nbar = 0.0;
	FieldMoments moments;

	double rate_window = 0.0;  // g(omega) gamma^2(omega), windowed convention
	double rate_sinc = 0.0;	   // 2 pi g gamma^2, exact-sinc diagnostic

	double tau_dis = 0.0;
	double tau_th = 0.0;
	double tau_dec = 0.0;
	double tau_res_dec = 0.0;

	// Quotients of the independently computed taus.
	double ratio_th_dis = 0.0;
	double ratio_dis_dec = 0.0;
	double ratio_th_dec = 0.0;
	// Closed-form counterparts.
	double closed_th_dis = 0.0;
	double closed_dis_dec = 0.0;
	double closed_th_dec = 0.0;
	double ratio_identity_max_rel_err = 0.0;

	SeparabilityCheck separability;
	ZeroTCondition zero_t;
	std::string regime;
};

namespace detail {

inline double rel_diff(double a, double b) {
	if (std::isinf(a) && std::isinf(b)) {
		return 0.0;
	}
	const double scale = std::max(std::abs(a), std::abs(b));
	if (scale == 0.0) {
		return 0.0;
	}
	return std::abs(a - b) / scale;
}

} // namespace detail

// All Markovian timescales with the ratios evaluated two ways: quotients
// of the taus and the closed forms. The mismatch field must stay at the
// 1e-10 level for a healthy evaluation.
inline TimescaleReport ratio_report(double omega, double beta,
									const SpectralModel& model,
									const FieldMoments& moments,
									double margin = 100.0) {
	TimescaleReport r;
	r.omega = omega;
	r.beta = beta;
	r.nbar = thermal_occupation(beta, omega);
	r.moments = moments;

	const double gm = model.gamma(omega);
	r.rate_window = model.g(omega) * gm * gm;
	r.rate_sinc = two_pi * r.rate_window;

	r.tau_dis = tau_dissipation(std::nullopt, omega, model);
	r.tau_th = tau_thermal(std::nullopt, omega, beta, model, moments);
	r.tau_dec = tau_decoherence(omega, beta, model, moments);
	r.tau_res_dec = tau_reservoir_decoherence(omega, beta, model, moments);

	r.ratio_th_dis = r.tau_th / r.tau_dis;
	r.ratio_dis_dec = r.tau_dis / r.tau_dec;
	r.ratio_th_dec = r.tau_th / r.tau_dec;

	const double n0 = moments.mean_n0;
	const double nbar = r.nbar;
	const double braces = (nbar + 1.0) * n0 + nbar * (n0 + 1.0);
	r.closed_th_dis = nbar > 0.0
						  ? n0 / nbar
						  : std::numeric_limits<double>::infinity();
	r.closed_dis_dec = 2.0 * braces;
	r.closed_th_dec = nbar > 0.0
						  ? (2.0 * n0 / nbar) * braces
						  : std::numeric_limits<double>::infinity();

	r.ratio_identity_max_rel_err = std::max(
		{detail::rel_diff(r.ratio_th_dis, r.closed_th_dis),
		 detail::rel_diff(r.ratio_dis_dec, r.closed_dis_dec),
		 detail::rel_diff(r.ratio_th_dec, r.closed_th_dec)});

	r.separability = separability_check(r.tau_res_dec, omega, margin);
	r.zero_t = zero_T_condition(omega, model, moments, margin);

	if (std::isinf(beta)) {
		r.regime = "T=0";
	} else if (beta * omega < 0.1) {
		r.regime = "high-T";
	} else {
		r.regime = "finite-T";
	}
	return r;
}

struct CutoffScan {
	std::vector<double> beta_crossings;	 // ascending beta
	bool pass_at_hottest = false;		 // verdict at the beta_min grid edge
	bool pass_at_coldest = false;
	// Smallest beta on the passing side of a crossing; empty when the
	// verdict is uniform over the scanned bracket (no crossing).
	std::optional<double> beta_cutoff;
};

// Scan f(beta) = tau_{2,dec}(beta) - margin * (2 pi / omega) over a log
// grid in [1e-6/omega, 1e6/omega]; refine every sign change by bisection.
inline CutoffScan cutoff_temperature(double omega, const SpectralModel& model,
									 const FieldMoments& moments,
									 double margin = 100.0) {
	const double threshold = margin * two_pi / omega;
	auto f = [&](double beta) {
		const double tau =
			tau_reservoir_decoherence(omega, beta, model, moments);
		if (std::isinf(tau)) {
			return std::numeric_limits<double>::infinity();
		}
		return tau - threshold;
	};

	const double beta_lo = 1e-6 / omega;
	const double beta_hi = 1e6 / omega;
	const int n_grid = 481;

	CutoffScan scan;
	std::vector<double> grid(n_grid);
	for (int i = 0; i < n_grid; ++i) {
		grid[i] = beta_lo * std::pow(beta_hi / beta_lo,
									 static_cast<double>(i) / (n_grid - 1));
	}
	scan.pass_at_hottest = f(grid.front()) > 0.0;
	scan.pass_at_coldest = f(grid.back()) > 0.0;

	for (int i = 0; i + 1 < n_grid; ++i) {
		double a = grid[i];
		double b = grid[i + 1];
		double fa = f(a);
		double fb = f(b);
		if ((fa > 0.0) == (fb > 0.0)) {
			continue;
		}
		while ((b - a) / b > 1e-6) {
			const double mid = std::sqrt(a * b);
			const double fm = f(mid);
			if ((fm > 0.0) == (fa > 0.0)) {
				a = mid;
				fa = fm;
			} else {
				b = mid;
				fb = fm;
			}
		}
		scan.beta_crossings.push_back(0.5 * (a + b));
	}

	if (!scan.beta_crossings.empty()) {
		// Largest passing temperature = smallest beta at which the
		// condition holds; with pass-at-cold behavior this is the first
		// crossing into the passing region.
		for (std::size_t i = 0; i < scan.beta_crossings.size(); ++i) {
			const double just_above =
				scan.beta_crossings[i] * (1.0 + 1e-5);
			if (f(just_above) > 0.0) {
				scan.beta_cutoff = scan.beta_crossings[i];
				break;
			}
		}
	}
	return scan;
}

// Continuum limit of the discrete second-order energy shift: the exact
// sinc^2 kernel integrated against the mode density over its support.
inline double energy_order2_continuum(double t, double omega,
									  const SpectralModel& model, double beta,
									  const FieldMoments& moments) {
	const auto [lo, hi] = model.support();
	auto integrand = [&](double w) {
		const double gm = model.gamma(w);
		const double nbar = thermal_occupation(beta, w);
		return model.g(w) * gm * gm *
			   golden_rule_kernel(detuning(w, omega), t) *
			   (nbar - moments.mean_n0);
	};
	return omega * detail::integrate(integrand, lo, hi);
}

// Uniform discretization of a Flat model: midpoint Omega_j and
// gamma_j^2 = gamma^2(Omega_j) g(Omega_j) * spacing.
inline DiscreteBath discretize_flat(const SpectralModel& model, int n_modes,
									int mode_dim = 2) {
	if (model.kind != SpectralModel::Kind::Flat) {
		throw ConfigError("discretize_flat: Flat model required");
	}
	const double spacing = (model.band_max - model.band_min) / n_modes;
	DiscreteBath bath;
	for (int j = 0; j < n_modes; ++j) {
		const double w = model.band_min + (j + 0.5) * spacing;
		const double gm = model.gamma(w);
		bath.modes.push_back(
			{w, std::sqrt(model.g(w) * gm * gm * spacing), mode_dim});
	}
	return bath;
}

inline double beta_from_nbar(double nbar, double omega) {
	if (nbar <= 0.0) {
		return beta_zero_temperature;
	}
	return std::log1p(1.0 / nbar) / omega;
}

} // namespace decotime
