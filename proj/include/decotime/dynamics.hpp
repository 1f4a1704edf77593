#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <future>
#include <numeric>
#include <string>
#include <vector>

#include "decotime/errors.hpp"
#include "decotime/fock.hpp"

namespace decotime {

struct BathMode {
	double omega;  // Omega_j > 0
	double gamma;  // real coupling >= 0
	int dim;	   // truncation of the mode
};

struct DiscreteBath {
	std::vector<BathMode> modes;
};

enum class EvolutionMethod { DensePropagator, AdaptiveOde };

struct EvolutionConfig {
	double t_max = 10.0;
	int n_samples = 101;
	EvolutionMethod method = EvolutionMethod::DensePropagator;
	double tolerance = 1e-10;
};

inline CompositeBasis make_basis(int field_dim, const DiscreteBath& bath) {
	std::vector<int> dims{field_dim};
	for (const BathMode& m : bath.modes) {
		dims.push_back(m.dim);
	}
	return CompositeBasis(std::move(dims));
}

// H = omega a^dag a + sum_j Omega_j b_j^dag b_j
//     + sum_j gamma_j (a^dag b_j + a b_j^dag)
inline Matrix build_hamiltonian(double omega, const DiscreteBath& bath,
								const CompositeBasis& basis) {
	if (basis.n_modes() != static_cast<int>(bath.modes.size()) + 1) {
		throw DimensionMismatch("build_hamiltonian: basis/bath mode count");
	}
	for (std::size_t j = 0; j < bath.modes.size(); ++j) {
		if (basis.dim(static_cast<int>(j) + 1) != bath.modes[j].dim) {
			throw DimensionMismatch("build_hamiltonian: bath dim mismatch");
		}
		if (bath.modes[j].omega <= 0.0 || bath.modes[j].gamma < 0.0) {
			throw ConfigError("build_hamiltonian: need Omega_j > 0, gamma_j >= 0");
		}
	}
	const long total = basis.total_dim();
	Matrix h = Matrix::Zero(total, total);

	// Free part is diagonal in the Fock basis.
	for (long i = 0; i < total; ++i) {
		double e = omega * basis.level(i, 0);
		for (int j = 0; j < static_cast<int>(bath.modes.size()); ++j) {
			e += bath.modes[j].omega * basis.level(i, j + 1);
		}
		h(i, i) = e;
	}

	// RWA coupling: a^dag b_j moves one quantum from bath mode j to the
	// field; add it with its adjoint.
	for (int j = 0; j < static_cast<int>(bath.modes.size()); ++j) {
		const double g = bath.modes[j].gamma;
		if (g == 0.0) {
			continue;
		}
		const long fs = basis.stride(0);
		const long bs = basis.stride(j + 1);
		const int fd = basis.dim(0);
		for (long i = 0; i < total; ++i) {
			const int nf = basis.level(i, 0);
			const int nb = basis.level(i, j + 1);
			if (nf + 1 < fd && nb >= 1) {
				const long k = i + fs - bs;
				const double v =
					g * std::sqrt(static_cast<double>(nf + 1)) *
					std::sqrt(static_cast<double>(nb));
				h(k, i) += v;
				h(i, k) += v;
			}
		}
	}
	return h;
}

// Basis indices grouped by total excitation number, ascending.
inline std::vector<std::vector<long>> excitation_sectors(
	const CompositeBasis& basis) {
	int max_n = 0;
	for (int m = 0; m < basis.n_modes(); ++m) {
		max_n += basis.dim(m) - 1;
	}
	std::vector<std::vector<long>> sectors(max_n + 1);
	for (long i = 0; i < basis.total_dim(); ++i) {
		int n = 0;
		for (int m = 0; m < basis.n_modes(); ++m) {
			n += basis.level(i, m);
		}
		sectors[n].push_back(i);
	}
	return sectors;
}

// Exact propagator: eigendecomposition of each total-excitation block.
class SectorPropagator {
public:
	SectorPropagator(const Matrix& h, const CompositeBasis& basis) {
		const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
		if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
			throw DimensionMismatch("SectorPropagator: non-Hermitian H");
		}
		dim_ = basis.total_dim();
		for (auto& idx : excitation_sectors(basis)) {
			if (idx.empty()) {
				continue;
			}
			Sector s;
			s.indices = idx;
			const long n = static_cast<long>(idx.size());
			Matrix block(n, n);
			for (long r = 0; r < n; ++r) {
				for (long c = 0; c < n; ++c) {
					block(r, c) = h(idx[r], idx[c]);
				}
			}
			Eigen::SelfAdjointEigenSolver<Matrix> es(block);
			if (es.info() != Eigen::Success) {
				throw ConvergenceError("SectorPropagator: eigensolver failed");
			}
			s.evals = es.eigenvalues();
			s.evecs = es.eigenvectors();
			sectors_.push_back(std::move(s));
		}
	}

	// e^{-iHt} psi
	Vector apply(const Vector& psi, double t) const {
		if (psi.size() != dim_) {
			throw DimensionMismatch("SectorPropagator: state dim mismatch");
		}
		Vector out = Vector::Zero(dim_);
		for (const Sector& s : sectors_) {
			const long n = static_cast<long>(s.indices.size());
			Vector sub(n);
			for (long r = 0; r < n; ++r) {
				sub(r) = psi(s.indices[r]);
			}
			if (sub.squaredNorm() == 0.0) {
				continue;
			}
			Vector c = s.evecs.adjoint() * sub;
			for (long r = 0; r < n; ++r) {
				c(r) *= std::polar(1.0, -s.evals(r) * t);
			}
			sub = s.evecs * c;
			for (long r = 0; r < n; ++r) {
				out(s.indices[r]) = sub(r);
			}
		}
		return out;
	}

private:
	struct Sector {
		std::vector<long> indices;
		Eigen::VectorXd evals;
		Matrix evecs;
	};
	std::vector<Sector> sectors_;
	long dim_ = 0;
};

namespace detail {

inline std::vector<double> sample_times(const EvolutionConfig& cfg) {
	if (cfg.n_samples < 2) {
		throw ConfigError("EvolutionConfig: n_samples >= 2 required");
	}
	std::vector<double> t(cfg.n_samples);
	for (int k = 0; k < cfg.n_samples; ++k) {
		t[k] = cfg.t_max * static_cast<double>(k) /
			   static_cast<double>(cfg.n_samples - 1);
	}
	return t;
}

inline std::vector<Vector> evolve_ode(const Vector& psi0, const Matrix& h,
									  const EvolutionConfig& cfg) {
	namespace odeint = boost::numeric::odeint;
	using State = std::vector<Complex>;

	auto rhs = [&h](const State& x, State& dxdt, double) {
		Eigen::Map<const Vector> xv(x.data(), static_cast<long>(x.size()));
		Eigen::Map<Vector> dv(dxdt.data(), static_cast<long>(dxdt.size()));
		dv = Complex(0.0, -1.0) * (h * xv);
	};

	State x(psi0.data(), psi0.data() + psi0.size());
	std::vector<double> times = sample_times(cfg);
	std::vector<Vector> out;
	out.reserve(times.size());

	auto stepper = odeint::make_controlled<
		odeint::runge_kutta_dopri5<State>>(cfg.tolerance * 1e-2,
										   cfg.tolerance * 1e-2);
	odeint::integrate_times(
		stepper, rhs, x, times.begin(), times.end(),
		std::min(0.01, cfg.t_max / 100.0),
		[&out](const State& s, double) {
			out.emplace_back(Eigen::Map<const Vector>(
				s.data(), static_cast<long>(s.size())));
		});
	if (out.size() != times.size()) {
		throw ConvergenceError("evolve: ODE integration did not reach t_max");
	}
	for (const Vector& v : out) {
		if (std::abs(v.norm() - psi0.norm()) > cfg.tolerance * 100.0) {
			throw ConvergenceError("evolve: norm drift beyond tolerance");
		}
	}
	return out;
}

} // namespace detail

// psi(t_k) = e^{-iH t_k} psi0 on a uniform sample grid including t = 0.
inline std::vector<KetVector> evolve(const KetVector& psi0, const Matrix& h,
									 const EvolutionConfig& cfg) {
	std::vector<double> times = detail::sample_times(cfg);
	std::vector<KetVector> out;
	out.reserve(times.size());
	if (cfg.method == EvolutionMethod::DensePropagator) {
		SectorPropagator prop(h, psi0.basis());
		for (double t : times) {
			out.emplace_back(prop.apply(psi0.amplitudes(), t), psi0.basis());
		}
	} else {
		for (Vector& v : detail::evolve_ode(psi0.amplitudes(), h, cfg)) {
			out.emplace_back(std::move(v), psi0.basis());
		}
	}
	return out;
}

// Convex Fock-product decomposition of the thermal bath state.
struct ThermalEnsemble {
	struct Member {
		std::vector<int> levels;  // bath occupation per mode
		double weight;
	};
	std::vector<Member> members;
	double cumulative_weight = 0.0;
};

inline ThermalEnsemble thermal_ensemble(double beta, const DiscreteBath& bath,
										double weight_cutoff,
										long member_cap = 200000) {
	if (!(weight_cutoff > 0.0) || weight_cutoff > 0.1) {
		throw ConfigError("thermal_ensemble: weight_cutoff must be in (0, 0.1]");
	}
	ThermalEnsemble ens;
	const int n_modes = static_cast<int>(bath.modes.size());
	if (std::isinf(beta) || n_modes == 0) {
		ens.members.push_back({std::vector<int>(n_modes, 0), 1.0});
		ens.cumulative_weight = 1.0;
		return ens;
	}

	long n_configs = 1;
	for (const BathMode& m : bath.modes) {
		n_configs *= m.dim;
		if (n_configs > (1L << 22)) {
			throw EnsembleExplosion("thermal_ensemble: configuration space too large");
		}
	}

	// Untruncated geometric weights: w = prod_j (1 - q_j) q_j^{n_j}.
	std::vector<double> q(n_modes);
	double w0 = 1.0;
	for (int j = 0; j < n_modes; ++j) {
		q[j] = std::exp(-beta * bath.modes[j].omega);
		w0 *= 1.0 - q[j];
	}

	std::vector<ThermalEnsemble::Member> all;
	all.reserve(n_configs);
	std::vector<int> levels(n_modes, 0);
	for (long c = 0; c < n_configs; ++c) {
		double w = w0;
		long rem = c;
		for (int j = n_modes - 1; j >= 0; --j) {
			levels[j] = static_cast<int>(rem % bath.modes[j].dim);
			rem /= bath.modes[j].dim;
			w *= std::pow(q[j], levels[j]);
		}
		all.push_back({levels, w});
	}
	std::stable_sort(all.begin(), all.end(),
					 [](const auto& a, const auto& b) {
						 if (a.weight != b.weight) {
							 return a.weight > b.weight;
						 }
						 return a.levels < b.levels;
					 });

	double cum = 0.0;
	for (const auto& m : all) {
		if (cum >= 1.0 - weight_cutoff) {
			break;
		}
		ens.members.push_back(m);
		cum += m.weight;
		if (static_cast<long>(ens.members.size()) > member_cap) {
			throw EnsembleExplosion("thermal_ensemble: member cap exceeded");
		}
	}
	if (cum < 1.0 - weight_cutoff) {
		throw TruncationError(
			"thermal_ensemble: truncated bath cannot reach requested weight");
	}
	ens.cumulative_weight = cum;
	return ens;
}

struct Trajectory {
	std::vector<double> times;
	std::vector<double> e1;
	std::vector<double> delta1;
	std::vector<double> delta2;
	std::vector<Complex> mean_a;
	std::vector<double> norm;
	std::vector<double> total_excitation;
	double max_norm_drift = 0.0;
	double max_excitation_drift = 0.0;

	// 1 - Tr rho2^2(t) / Tr rho2^2(0), the reservoir's relative purity loss.
	double reservoir_relative_loss(std::size_t k) const {
		return 1.0 - (1.0 - delta2[k]) / (1.0 - delta2[0]);
	}
};

struct SimulationInput {
	FieldStateSpec field;
	int field_dim = 8;
	double omega = 1.0;
	DiscreteBath bath;
	double beta = beta_zero_temperature;
	EvolutionConfig evolution;
	double weight_cutoff = 1e-9;
};

namespace detail {

struct MemberResult {
	std::vector<Matrix> rho1;
	std::vector<Matrix> rho2;
	std::vector<double> norm;
	std::vector<double> ntot;
};

inline int worker_count() {
	const char* env = std::getenv("DECOTIME_WORKERS");
	if (env == nullptr) {
		return 1;
	}
	const int n = std::atoi(env);
	return n > 0 ? n : 1;
}

} // namespace detail

// Weight-averaged observables over the thermal ensemble. Reduced densities
// are averaged before squaring; aggregation follows the fixed member order.
inline Trajectory simulate(const SimulationInput& in) {
	const CompositeBasis basis = make_basis(in.field_dim, in.bath);
	const Matrix h = build_hamiltonian(in.omega, in.bath, basis);
	const SectorPropagator prop(h, basis);
	const KetVector field_ket =
		make_field_state(in.field, FockSpace{in.field_dim});
	const ThermalEnsemble ens =
		thermal_ensemble(in.beta, in.bath, in.weight_cutoff);
	const std::vector<double> times = detail::sample_times(in.evolution);

	std::vector<int> bath_modes(basis.n_modes() - 1);
	std::iota(bath_modes.begin(), bath_modes.end(), 1);

	std::vector<double> ntot_diag(basis.total_dim());
	for (long i = 0; i < basis.total_dim(); ++i) {
		int n = 0;
		for (int m = 0; m < basis.n_modes(); ++m) {
			n += basis.level(i, m);
		}
		ntot_diag[i] = static_cast<double>(n);
	}

	auto run_member = [&](const ThermalEnsemble::Member& mem) {
		std::vector<KetVector> factors{field_ket};
		for (std::size_t j = 0; j < mem.levels.size(); ++j) {
			factors.push_back(
				fock_state(mem.levels[j], FockSpace{in.bath.modes[j].dim}));
		}
		const KetVector psi0 = tensor_product(factors);

		detail::MemberResult r;
		r.rho1.reserve(times.size());
		r.rho2.reserve(times.size());
		for (double t : times) {
			Vector psi = prop.apply(psi0.amplitudes(), t);
			KetVector kt(psi, basis);
			r.rho1.push_back(reduced_density(kt, 0).entries());
			r.rho2.push_back(reduced_density(kt, bath_modes).entries());
			r.norm.push_back(kt.norm());
			double nt = 0.0;
			for (long i = 0; i < basis.total_dim(); ++i) {
				nt += ntot_diag[i] * std::norm(psi(i));
			}
			r.ntot.push_back(nt);
		}
		return r;
	};

	const int workers = detail::worker_count();
	std::vector<detail::MemberResult> results(ens.members.size());
	if (workers <= 1) {
		for (std::size_t m = 0; m < ens.members.size(); ++m) {
			results[m] = run_member(ens.members[m]);
		}
	} else {
		for (std::size_t base = 0; base < ens.members.size();
			 base += static_cast<std::size_t>(workers)) {
			const std::size_t end = std::min(
				ens.members.size(), base + static_cast<std::size_t>(workers));
			std::vector<std::future<detail::MemberResult>> futs;
			for (std::size_t m = base; m < end; ++m) {
				futs.push_back(std::async(std::launch::async, run_member,
										  std::cref(ens.members[m])));
			}
			for (std::size_t m = base; m < end; ++m) {
				results[m] = futs[m - base].get();
			}
		}
	}

	const double w_total = ens.cumulative_weight;
	const int fd = in.field_dim;
	const long bd = basis.total_dim() / fd;
	const Matrix a_field = annihilation_matrix(FockSpace{fd});

	Trajectory traj;
	traj.times = times;
	for (std::size_t k = 0; k < times.size(); ++k) {
		Matrix rho1 = Matrix::Zero(fd, fd);
		Matrix rho2 = Matrix::Zero(bd, bd);
		double norm_acc = 0.0;
		double ntot_acc = 0.0;
		for (std::size_t m = 0; m < results.size(); ++m) {
			const double w = ens.members[m].weight;
			rho1 += w * results[m].rho1[k];
			rho2 += w * results[m].rho2[k];
			norm_acc += w * results[m].norm[k];
			ntot_acc += w * results[m].ntot[k];
		}
		rho1 /= w_total;
		rho2 /= w_total;

		double n1 = 0.0;
		for (int n = 0; n < fd; ++n) {
			n1 += n * rho1(n, n).real();
		}
		traj.e1.push_back(in.omega * n1);
		traj.delta1.push_back(1.0 - (rho1 * rho1).trace().real());
		traj.delta2.push_back(1.0 - (rho2 * rho2).trace().real());
		traj.mean_a.push_back((a_field * rho1).trace());
		traj.norm.push_back(norm_acc / w_total);
		traj.total_excitation.push_back(ntot_acc / w_total);
	}

	for (const detail::MemberResult& r : results) {
		for (std::size_t k = 0; k < times.size(); ++k) {
			traj.max_norm_drift = std::max(traj.max_norm_drift,
										   std::abs(r.norm[k] - r.norm[0]));
			traj.max_excitation_drift =
				std::max(traj.max_excitation_drift,
						 std::abs(r.ntot[k] - r.ntot[0]));
		}
	}
	return traj;
}

} // namespace decotime
