#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "decotime/errors.hpp"

namespace decotime {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double beta_zero_temperature =
	std::numeric_limits<double>::infinity();

// Number of retained Fock levels |0> .. |dim-1> of a single bosonic mode.
struct FockSpace {
	int dim;
};

// Ordered tensor factorization, mode 0 = field, modes 1..N = bath in
// ascending j. Index layout is field-major: mode 0 varies slowest.
class CompositeBasis {
public:
	explicit CompositeBasis(std::vector<int> dims) : dims_(std::move(dims)) {
		if (dims_.empty()) {
			throw DimensionMismatch("CompositeBasis: no modes");
		}
		total_ = 1;
		for (int d : dims_) {
			if (d < 1) {
				throw DimensionMismatch("CompositeBasis: dim < 1");
			}
			total_ *= d;
		}
		strides_.resize(dims_.size());
		long s = 1;
		for (int m = static_cast<int>(dims_.size()) - 1; m >= 0; --m) {
			strides_[m] = s;
			s *= dims_[m];
		}
	}

	int n_modes() const { return static_cast<int>(dims_.size()); }
	int dim(int mode) const { return dims_[mode]; }
	const std::vector<int>& dims() const { return dims_; }
	long total_dim() const { return total_; }
	long stride(int mode) const { return strides_[mode]; }

	long index(const std::vector<int>& levels) const {
		long idx = 0;
		for (int m = 0; m < n_modes(); ++m) {
			idx += levels[m] * strides_[m];
		}
		return idx;
	}

	std::vector<int> levels(long index) const {
		std::vector<int> lv(dims_.size());
		for (int m = 0; m < n_modes(); ++m) {
			lv[m] = static_cast<int>(index / strides_[m]) % dims_[m];
		}
		return lv;
	}

	int level(long index, int mode) const {
		return static_cast<int>(index / strides_[mode]) % dims_[mode];
	}

	bool operator==(const CompositeBasis& o) const { return dims_ == o.dims_; }

private:
	std::vector<int> dims_;
	std::vector<long> strides_;
	long total_ = 0;
};

class KetVector {
public:
	KetVector(Vector amplitudes, CompositeBasis basis)
		: amplitudes_(std::move(amplitudes)), basis_(std::move(basis)) {
		if (amplitudes_.size() != basis_.total_dim()) {
			throw DimensionMismatch("KetVector: amplitude length != basis dim");
		}
	}

	const Vector& amplitudes() const { return amplitudes_; }
	Vector& amplitudes() { return amplitudes_; }
	const CompositeBasis& basis() const { return basis_; }
	double norm() const { return amplitudes_.norm(); }

private:
	Vector amplitudes_;
	CompositeBasis basis_;
};

class DensityMatrix {
public:
	DensityMatrix(Matrix entries, CompositeBasis basis)
		: entries_(std::move(entries)), basis_(std::move(basis)) {
		if (entries_.rows() != basis_.total_dim() ||
			entries_.cols() != basis_.total_dim()) {
			throw DimensionMismatch("DensityMatrix: entry shape != basis dim");
		}
	}

	const Matrix& entries() const { return entries_; }
	Matrix& entries() { return entries_; }
	const CompositeBasis& basis() const { return basis_; }
	double trace() const { return entries_.trace().real(); }

private:
	Matrix entries_;
	CompositeBasis basis_;
};

// <n-1| a |n> = sqrt(n)
inline Matrix annihilation_matrix(FockSpace space) {
	Matrix a = Matrix::Zero(space.dim, space.dim);
	for (int n = 1; n < space.dim; ++n) {
		a(n - 1, n) = std::sqrt(static_cast<double>(n));
	}
	return a;
}

inline Matrix creation_matrix(FockSpace space) {
	return annihilation_matrix(space).adjoint();
}

inline Matrix number_matrix(FockSpace space) {
	Matrix n = Matrix::Zero(space.dim, space.dim);
	for (int k = 0; k < space.dim; ++k) {
		n(k, k) = static_cast<double>(k);
	}
	return n;
}

// Embed a single-mode operator into the composite space (identity on the
// other modes).
inline Matrix lift_operator(const Matrix& op, int mode,
							const CompositeBasis& basis) {
	if (op.rows() != basis.dim(mode) || op.cols() != basis.dim(mode)) {
		throw DimensionMismatch("lift_operator: op shape != mode dim");
	}
	const long total = basis.total_dim();
	Matrix out = Matrix::Zero(total, total);
	const long stride = basis.stride(mode);
	const int d = basis.dim(mode);
	for (long i = 0; i < total; ++i) {
		const int ni = basis.level(i, mode);
		const long base = i - ni * stride;
		for (int nj = 0; nj < d; ++nj) {
			if (op(nj, ni) != 0.0) {
				out(base + nj * stride, i) += op(nj, ni);
			}
		}
	}
	return out;
}

inline KetVector fock_state(int n, FockSpace space) {
	if (n < 0 || n >= space.dim) {
		throw DimensionMismatch("fock_state: level outside truncation");
	}
	Vector amp = Vector::Zero(space.dim);
	amp(n) = 1.0;
	return KetVector(std::move(amp), CompositeBasis({space.dim}));
}

inline int recommended_coherent_dim(Complex alpha) {
	const double n = std::norm(alpha);
	return static_cast<int>(std::ceil(n + 6.0 * std::sqrt(n + 1.0)));
}

// c_n = e^{-|alpha|^2/2} alpha^n / sqrt(n!), renormalized on the truncated
// basis.
inline KetVector coherent_state(Complex alpha, FockSpace space) {
	Vector amp(space.dim);
	Complex c = std::exp(-0.5 * std::norm(alpha));
	for (int n = 0; n < space.dim; ++n) {
		amp(n) = c;
		c *= alpha / std::sqrt(static_cast<double>(n + 1));
	}
	const double norm2 = amp.squaredNorm();
	if (norm2 < 0.999) {
		throw TruncationError("coherent_state: post-truncation norm^2 < 0.999");
	}
	amp /= std::sqrt(norm2);
	return KetVector(std::move(amp), CompositeBasis({space.dim}));
}

// Normalized |alpha> + |-alpha> superposition; odd Fock amplitudes are
// exactly zero and <a^dag a> = |alpha|^2 tanh |alpha|^2.
inline KetVector even_cat_state(Complex alpha, FockSpace space) {
	Vector amp = Vector::Zero(space.dim);
	Complex c = std::exp(-0.5 * std::norm(alpha));
	for (int n = 0; n < space.dim; ++n) {
		if (n % 2 == 0) {
			amp(n) = c;
		}
		c *= alpha / std::sqrt(static_cast<double>(n + 1));
	}
	// Untruncated norm^2 of the even projection of a coherent state is
	// (1 + e^{-2|alpha|^2}) / 2; compare against it before renormalizing.
	const double full_norm2 = 0.5 * (1.0 + std::exp(-2.0 * std::norm(alpha)));
	const double norm2 = amp.squaredNorm();
	if (norm2 / full_norm2 < 0.999) {
		throw TruncationError("even_cat_state: post-truncation norm^2 < 0.999");
	}
	amp /= std::sqrt(norm2);
	return KetVector(std::move(amp), CompositeBasis({space.dim}));
}

// Thermal occupation (e^{beta Omega} - 1)^{-1}; zero at beta = +inf.
inline double thermal_occupation(double beta, double omega) {
	if (std::isinf(beta)) {
		return 0.0;
	}
	return 1.0 / std::expm1(beta * omega);
}

// p_n proportional to e^{-beta Omega n}, normalized over the truncated
// levels. The untruncated tail mass q^dim must stay below 1e-6.
inline RealVector thermal_weights(double beta, double omega, FockSpace space) {
	RealVector p = RealVector::Zero(space.dim);
	if (std::isinf(beta)) {
		p(0) = 1.0;
		return p;
	}
	const double q = std::exp(-beta * omega);
	const double tail = std::pow(q, space.dim);
	if (tail > 1e-6) {
		throw TruncationError("thermal_weights: truncated tail mass > 1e-6");
	}
	double w = 1.0;
	for (int n = 0; n < space.dim; ++n) {
		p(n) = w;
		w *= q;
	}
	p /= p.sum();
	return p;
}

inline KetVector tensor_product(const std::vector<KetVector>& factors) {
	if (factors.empty()) {
		throw DimensionMismatch("tensor_product: no factors");
	}
	std::vector<int> dims;
	Vector amp = factors[0].amplitudes();
	for (int d : factors[0].basis().dims()) {
		dims.push_back(d);
	}
	for (std::size_t f = 1; f < factors.size(); ++f) {
		const Vector& b = factors[f].amplitudes();
		Vector next(amp.size() * b.size());
		for (long i = 0; i < amp.size(); ++i) {
			next.segment(i * b.size(), b.size()) = amp(i) * b;
		}
		amp = std::move(next);
		for (int d : factors[f].basis().dims()) {
			dims.push_back(d);
		}
	}
	return KetVector(std::move(amp), CompositeBasis(std::move(dims)));
}

inline DensityMatrix tensor_product(const std::vector<DensityMatrix>& factors) {
	if (factors.empty()) {
		throw DimensionMismatch("tensor_product: no factors");
	}
	std::vector<int> dims;
	Matrix m = factors[0].entries();
	for (int d : factors[0].basis().dims()) {
		dims.push_back(d);
	}
	for (std::size_t f = 1; f < factors.size(); ++f) {
		const Matrix& b = factors[f].entries();
		Matrix next(m.rows() * b.rows(), m.cols() * b.cols());
		for (long i = 0; i < m.rows(); ++i) {
			for (long j = 0; j < m.cols(); ++j) {
				next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) =
					m(i, j) * b;
			}
		}
		m = std::move(next);
		for (int d : factors[f].basis().dims()) {
			dims.push_back(d);
		}
	}
	return DensityMatrix(std::move(m), CompositeBasis(std::move(dims)));
}

inline DensityMatrix pure_density(const KetVector& psi) {
	return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint(),
						 psi.basis());
}

namespace detail {

// full index -> (kept-subspace index, traced-subspace index)
inline void split_strides(const CompositeBasis& basis,
						  const std::vector<int>& keep,
						  std::vector<long>& keep_stride,
						  std::vector<long>& rest_stride, long& keep_dim,
						  long& rest_dim) {
	std::vector<bool> kept(basis.n_modes(), false);
	for (int m : keep) {
		if (m < 0 || m >= basis.n_modes()) {
			throw DimensionMismatch("partial_trace: bad subsystem id");
		}
		kept[m] = true;
	}
	keep_stride.assign(basis.n_modes(), 0);
	rest_stride.assign(basis.n_modes(), 0);
	keep_dim = 1;
	rest_dim = 1;
	for (int m = basis.n_modes() - 1; m >= 0; --m) {
		if (kept[m]) {
			keep_stride[m] = keep_dim;
			keep_dim *= basis.dim(m);
		} else {
			rest_stride[m] = rest_dim;
			rest_dim *= basis.dim(m);
		}
	}
}

inline CompositeBasis kept_basis(const CompositeBasis& basis,
								 const std::vector<int>& keep) {
	std::vector<bool> kept(basis.n_modes(), false);
	for (int m : keep) {
		kept[m] = true;
	}
	std::vector<int> dims;
	for (int m = 0; m < basis.n_modes(); ++m) {
		if (kept[m]) {
			dims.push_back(basis.dim(m));
		}
	}
	return CompositeBasis(std::move(dims));
}

} // namespace detail

// Reduced density over the kept modes; kept modes retain their relative
// order.
inline DensityMatrix partial_trace(const DensityMatrix& rho,
								   const std::vector<int>& keep) {
	const CompositeBasis& basis = rho.basis();
	std::vector<long> ks, rs;
	long kd, rd;
	detail::split_strides(basis, keep, ks, rs, kd, rd);

	std::vector<long> kidx(basis.total_dim()), ridx(basis.total_dim());
	for (long i = 0; i < basis.total_dim(); ++i) {
		long k = 0, r = 0;
		for (int m = 0; m < basis.n_modes(); ++m) {
			const int lv = basis.level(i, m);
			k += lv * ks[m];
			r += lv * rs[m];
		}
		kidx[i] = k;
		ridx[i] = r;
	}

	Matrix out = Matrix::Zero(kd, kd);
	for (long i = 0; i < basis.total_dim(); ++i) {
		for (long j = 0; j < basis.total_dim(); ++j) {
			if (ridx[i] == ridx[j]) {
				out(kidx[i], kidx[j]) += rho.entries()(i, j);
			}
		}
	}
	return DensityMatrix(std::move(out), detail::kept_basis(basis, keep));
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, int keep) {
	return partial_trace(rho, std::vector<int>{keep});
}

// Reduced density of a pure state without forming the full projector.
inline DensityMatrix reduced_density(const KetVector& psi,
									 const std::vector<int>& keep) {
	const CompositeBasis& basis = psi.basis();
	std::vector<long> ks, rs;
	long kd, rd;
	detail::split_strides(basis, keep, ks, rs, kd, rd);

	// Column r of slices holds the kept-space vector entangled with traced
	// configuration r; rho_keep = sum_r v_r v_r^dag.
	Matrix slices = Matrix::Zero(kd, rd);
	for (long i = 0; i < basis.total_dim(); ++i) {
		long k = 0, r = 0;
		for (int m = 0; m < basis.n_modes(); ++m) {
			const int lv = basis.level(i, m);
			k += lv * ks[m];
			r += lv * rs[m];
		}
		slices(k, r) = psi.amplitudes()(i);
	}
	Matrix out = slices * slices.adjoint();
	return DensityMatrix(std::move(out), detail::kept_basis(basis, keep));
}

inline DensityMatrix reduced_density(const KetVector& psi, int keep) {
	return reduced_density(psi, std::vector<int>{keep});
}

inline double purity(const DensityMatrix& rho) {
	return (rho.entries() * rho.entries()).trace().real();
}

// Idempotency deficit delta = 1 - Tr rho^2.
inline double linear_entropy(const DensityMatrix& rho) {
	return 1.0 - purity(rho);
}

inline Complex expectation(const Matrix& op, const KetVector& psi) {
	if (op.rows() != psi.amplitudes().size() ||
		op.cols() != psi.amplitudes().size()) {
		throw DimensionMismatch("expectation: op shape != state dim");
	}
	return psi.amplitudes().dot(op * psi.amplitudes());
}

inline Complex expectation(const Matrix& op, const DensityMatrix& rho) {
	if (op.rows() != rho.entries().rows() ||
		op.cols() != rho.entries().cols()) {
		throw DimensionMismatch("expectation: op shape != state dim");
	}
	return (op * rho.entries()).trace();
}

// Initial field state selector: Fock n, Glauber coherent, or even cat.
struct FieldStateSpec {
	enum class Kind { Fock, Coherent, EvenCat };
	Kind kind = Kind::Fock;
	int n = 0;
	Complex alpha{0.0, 0.0};

	static FieldStateSpec fock(int n) {
		FieldStateSpec s;
		s.kind = Kind::Fock;
		s.n = n;
		return s;
	}
	static FieldStateSpec coherent(Complex alpha) {
		FieldStateSpec s;
		s.kind = Kind::Coherent;
		s.alpha = alpha;
		return s;
	}
	static FieldStateSpec even_cat(Complex alpha) {
		FieldStateSpec s;
		s.kind = Kind::EvenCat;
		s.alpha = alpha;
		return s;
	}
};

inline KetVector make_field_state(const FieldStateSpec& spec, FockSpace space) {
	switch (spec.kind) {
	case FieldStateSpec::Kind::Fock:
		return fock_state(spec.n, space);
	case FieldStateSpec::Kind::Coherent:
		return coherent_state(spec.alpha, space);
	case FieldStateSpec::Kind::EvenCat:
		return even_cat_state(spec.alpha, space);
	}
	throw ConfigError("make_field_state: unknown field state kind");
}

} // namespace decotime
