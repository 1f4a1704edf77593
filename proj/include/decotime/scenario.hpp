#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "decotime/born.hpp"
#include "decotime/dynamics.hpp"
#include "decotime/errors.hpp"
#include "decotime/fock.hpp"
#include "decotime/spectral.hpp"

namespace decotime {

inline constexpr const char* tool_version = "decotime 1.0.0";

// ---------------------------------------------------------------- config ---

// Flat, line-oriented "[section]" + "key = value" text. Keys are stored as
// "section.key"; insertion order is preserved for canonical hashing.
struct ConfigMap {
	std::map<std::string, std::string> values;

	bool has(const std::string& key) const { return values.count(key) != 0; }

	const std::string& get(const std::string& key) const {
		auto it = values.find(key);
		if (it == values.end()) {
			throw ConfigError("config: missing key '" + key + "'");
		}
		return it->second;
	}

	std::string get_or(const std::string& key, const std::string& fallback) const {
		auto it = values.find(key);
		return it == values.end() ? fallback : it->second;
	}

	void set(const std::string& key, const std::string& value) {
		values[key] = value;
	}
};

namespace detail {

inline std::string trim(const std::string& s) {
	const auto a = s.find_first_not_of(" \t\r\n");
	if (a == std::string::npos) {
		return "";
	}
	const auto b = s.find_last_not_of(" \t\r\n");
	return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& raw) {
	try {
		std::size_t pos = 0;
		const double v = std::stod(raw, &pos);
		if (pos != raw.size()) {
			throw ConfigError("config: trailing junk in '" + key + "'");
		}
		return v;
	} catch (const ConfigError&) {
		throw;
	} catch (const std::exception&) {
		throw ConfigError("config: bad number for '" + key + "': " + raw);
	}
}

inline int parse_int(const std::string& key, const std::string& raw) {
	const double v = parse_double(key, raw);
	const int i = static_cast<int>(v);
	if (static_cast<double>(i) != v) {
		throw ConfigError("config: integer expected for '" + key + "'");
	}
	return i;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
	if (raw == "true" || raw == "1" || raw == "yes") {
		return true;
	}
	if (raw == "false" || raw == "0" || raw == "no") {
		return false;
	}
	throw ConfigError("config: boolean expected for '" + key + "'");
}

inline std::vector<double> parse_list(const std::string& key,
									  const std::string& raw) {
	std::istringstream in(raw);
	std::vector<double> out;
	std::string tok;
	while (in >> tok) {
		out.push_back(parse_double(key, tok));
	}
	if (out.empty()) {
		throw ConfigError("config: empty list for '" + key + "'");
	}
	return out;
}

} // namespace detail

inline ConfigMap parse_config(std::istream& in) {
	ConfigMap cfg;
	std::string line;
	std::string section;
	int lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		const auto hash = line.find('#');
		if (hash != std::string::npos) {
			line = line.substr(0, hash);
		}
		line = detail::trim(line);
		if (line.empty()) {
			continue;
		}
		if (line.front() == '[') {
			if (line.back() != ']') {
				throw ConfigError("config: malformed section at line " +
								  std::to_string(lineno));
			}
			section = detail::trim(line.substr(1, line.size() - 2));
			if (section.empty()) {
				throw ConfigError("config: empty section name at line " +
								  std::to_string(lineno));
			}
			continue;
		}
		const auto eq = line.find('=');
		if (eq == std::string::npos || section.empty()) {
			throw ConfigError("config: expected 'key = value' at line " +
							  std::to_string(lineno));
		}
		const std::string key = detail::trim(line.substr(0, eq));
		const std::string value = detail::trim(line.substr(eq + 1));
		if (key.empty()) {
			throw ConfigError("config: empty key at line " +
							  std::to_string(lineno));
		}
		const std::string full = section + "." + key;
		if (cfg.has(full)) {
			throw ConfigError("config: duplicate key '" + full + "'");
		}
		cfg.set(full, value);
	}
	return cfg;
}

inline ConfigMap parse_config_file(const std::string& path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigError("config: cannot open '" + path + "'");
	}
	return parse_config(in);
}

// "section.key=value" from the command line; replaces or adds the key.
inline void apply_override(ConfigMap& cfg, const std::string& assignment) {
	const auto eq = assignment.find('=');
	if (eq == std::string::npos) {
		throw ConfigError("override: expected section.key=value, got '" +
						  assignment + "'");
	}
	const std::string key = detail::trim(assignment.substr(0, eq));
	if (key.find('.') == std::string::npos) {
		throw ConfigError("override: key must be section-qualified: '" + key +
						  "'");
	}
	cfg.set(key, detail::trim(assignment.substr(eq + 1)));
}

struct ScenarioConfig {
	std::string name;
	bool si_units = false;

	FieldStateSpec field;
	int field_dim = 8;
	double omega = 1.0;

	std::optional<DiscreteBath> discrete;
	std::optional<SpectralModel> spectral;

	double beta = beta_zero_temperature;

	EvolutionConfig evolution;
	double weight_cutoff = 1e-9;

	double margin = 100.0;
	std::vector<double> convergence_scales;
	std::string out_dir = "out";
};

namespace detail {

inline const std::map<std::string, std::vector<std::string>>& known_keys() {
	static const std::map<std::string, std::vector<std::string>> k = {
		{"scenario", {"name", "units", "margin"}},
		{"field", {"state", "n", "alpha", "dim", "omega"}},
		{"bath",
		 {"kind", "omegas", "gammas", "dims", "model", "g0", "band_min",
		  "band_max", "scale", "cutoff", "center", "width", "peak", "gamma0"}},
		{"temperature", {"beta", "n_bar_at_omega", "zero"}},
		{"evolution",
		 {"t_max", "n_samples", "method", "tolerance", "weight_cutoff"}},
		{"convergence", {"scales"}},
		{"outputs", {"dir"}},
	};
	return k;
}

inline void check_known_keys(const ConfigMap& cfg) {
	for (const auto& [full, value] : cfg.values) {
		(void)value;
		const auto dot = full.find('.');
		const std::string section = full.substr(0, dot);
		const std::string key = full.substr(dot + 1);
		const auto it = known_keys().find(section);
		if (it == known_keys().end()) {
			throw ConfigError("config: unknown section '" + section + "'");
		}
		if (std::find(it->second.begin(), it->second.end(), key) ==
			it->second.end()) {
			throw ConfigError("config: unknown key '" + full + "'");
		}
	}
}

} // namespace detail

inline ScenarioConfig load_scenario(const ConfigMap& cfg) {
	detail::check_known_keys(cfg);
	ScenarioConfig s;
	s.name = cfg.get_or("scenario.name", "unnamed");

	const std::string units = cfg.get_or("scenario.units", "dimensionless");
	if (units == "si") {
		s.si_units = true;
	} else if (units != "dimensionless") {
		throw ConfigError("config: units must be dimensionless or si");
	}
	s.margin = detail::parse_double("scenario.margin",
									cfg.get_or("scenario.margin", "100"));
	if (!(s.margin > 0.0)) {
		throw ConfigError("config: margin must be positive");
	}

	const std::string state = cfg.get("field.state");
	if (state == "fock") {
		s.field = FieldStateSpec::fock(
			detail::parse_int("field.n", cfg.get("field.n")));
		if (s.field.n < 0) {
			throw ConfigError("config: field.n must be >= 0");
		}
	} else if (state == "coherent") {
		s.field = FieldStateSpec::coherent(
			detail::parse_double("field.alpha", cfg.get("field.alpha")));
	} else if (state == "even-cat") {
		s.field = FieldStateSpec::even_cat(
			detail::parse_double("field.alpha", cfg.get("field.alpha")));
	} else {
		throw ConfigError("config: field.state must be fock|coherent|even-cat");
	}
	s.field_dim = detail::parse_int("field.dim", cfg.get_or("field.dim", "8"));
	if (s.field_dim < 1) {
		throw ConfigError("config: field.dim must be >= 1");
	}
	s.omega = detail::parse_double("field.omega", cfg.get("field.omega"));
	if (!(s.omega > 0.0)) {
		throw ConfigError("config: field.omega must be positive");
	}

	const std::string kind = cfg.get("bath.kind");
	if (kind == "discrete") {
		const auto omegas =
			detail::parse_list("bath.omegas", cfg.get("bath.omegas"));
		const auto gammas =
			detail::parse_list("bath.gammas", cfg.get("bath.gammas"));
		const auto dims = detail::parse_list("bath.dims", cfg.get("bath.dims"));
		if (omegas.size() != gammas.size() || omegas.size() != dims.size()) {
			throw ConfigError("config: bath lists must have equal length");
		}
		DiscreteBath bath;
		for (std::size_t j = 0; j < omegas.size(); ++j) {
			const int d = static_cast<int>(dims[j]);
			if (static_cast<double>(d) != dims[j] || d < 1) {
				throw ConfigError("config: bath.dims must be positive integers");
			}
			if (!(omegas[j] > 0.0) || gammas[j] < 0.0) {
				throw ConfigError("config: bath frequencies must be positive "
								  "and couplings nonnegative");
			}
			bath.modes.push_back({omegas[j], gammas[j], d});
		}
		s.discrete = bath;
	} else if (kind == "spectral") {
		const std::string model = cfg.get("bath.model");
		const double gamma0 =
			detail::parse_double("bath.gamma0", cfg.get("bath.gamma0"));
		if (model == "flat") {
			s.spectral = SpectralModel::flat(
				detail::parse_double("bath.g0", cfg.get("bath.g0")), gamma0,
				detail::parse_double("bath.band_min", cfg.get("bath.band_min")),
				detail::parse_double("bath.band_max",
									 cfg.get("bath.band_max")));
		} else if (model == "ohmic") {
			s.spectral = SpectralModel::ohmic(
				detail::parse_double("bath.scale", cfg.get("bath.scale")),
				gamma0,
				detail::parse_double("bath.cutoff", cfg.get("bath.cutoff")));
		} else if (model == "lorentzian") {
			s.spectral = SpectralModel::lorentzian(
				detail::parse_double("bath.center", cfg.get("bath.center")),
				detail::parse_double("bath.width", cfg.get("bath.width")),
				detail::parse_double("bath.peak", cfg.get("bath.peak")),
				gamma0);
		} else {
			throw ConfigError("config: bath.model must be flat|ohmic|lorentzian");
		}
	} else {
		throw ConfigError("config: bath.kind must be discrete or spectral");
	}

	const int n_temp = (cfg.has("temperature.beta") ? 1 : 0) +
					   (cfg.has("temperature.n_bar_at_omega") ? 1 : 0) +
					   (cfg.has("temperature.zero") ? 1 : 0);
	if (n_temp != 1) {
		throw ConfigError(
			"config: exactly one of temperature.{beta,n_bar_at_omega,zero}");
	}
	if (cfg.has("temperature.zero")) {
		if (!detail::parse_bool("temperature.zero",
								cfg.get("temperature.zero"))) {
			throw ConfigError("config: temperature.zero must be true if given");
		}
		s.beta = beta_zero_temperature;
	} else if (cfg.has("temperature.beta")) {
		s.beta = detail::parse_double("temperature.beta",
									  cfg.get("temperature.beta"));
		if (!(s.beta > 0.0)) {
			throw ConfigError("config: temperature.beta must be positive");
		}
	} else {
		const double nbar = detail::parse_double(
			"temperature.n_bar_at_omega", cfg.get("temperature.n_bar_at_omega"));
		if (nbar < 0.0) {
			throw ConfigError("config: n_bar_at_omega must be >= 0");
		}
		s.beta = beta_from_nbar(nbar, s.omega);
	}

	s.evolution.t_max = detail::parse_double(
		"evolution.t_max", cfg.get_or("evolution.t_max", "10"));
	s.evolution.n_samples = detail::parse_int(
		"evolution.n_samples", cfg.get_or("evolution.n_samples", "101"));
	if (!(s.evolution.t_max > 0.0) || s.evolution.n_samples < 2) {
		throw ConfigError("config: bad evolution grid");
	}
	const std::string method = cfg.get_or("evolution.method", "dense");
	if (method == "dense") {
		s.evolution.method = EvolutionMethod::DensePropagator;
	} else if (method == "ode") {
		s.evolution.method = EvolutionMethod::AdaptiveOde;
	} else {
		throw ConfigError("config: evolution.method must be dense or ode");
	}
	s.evolution.tolerance = detail::parse_double(
		"evolution.tolerance", cfg.get_or("evolution.tolerance", "1e-10"));
	s.weight_cutoff = detail::parse_double(
		"evolution.weight_cutoff", cfg.get_or("evolution.weight_cutoff", "1e-9"));
	if (!(s.weight_cutoff > 0.0 && s.weight_cutoff <= 0.1)) {
		throw ConfigError("config: evolution.weight_cutoff out of range");
	}

	if (cfg.has("convergence.scales")) {
		s.convergence_scales =
			detail::parse_list("convergence.scales", cfg.get("convergence.scales"));
	} else {
		s.convergence_scales = {0.1, 0.17782794100389229, 0.31622776601683794,
								0.56234132519034907, 1.0};
	}
	s.out_dir = cfg.get_or("outputs.dir", "out");
	return s;
}

// ------------------------------------------------------------- emission ---

namespace detail {

inline std::string format_value(double v) {
	char buf[40];
	std::snprintf(buf, sizeof(buf), "%.17g", v);
	return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
	std::uint64_t h = 1469598103934665603ull;
	for (unsigned char c : s) {
		h ^= c;
		h *= 1099511628211ull;
	}
	return h;
}

inline std::string utc_now() {
	const std::time_t t = std::time(nullptr);
	std::tm tm{};
	gmtime_r(&t, &tm);
	char buf[32];
	std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
	return buf;
}

} // namespace detail

// Canonical serialization (sorted keys) hashed with 64-bit FNV-1a.
inline std::string scenario_hash(const ConfigMap& cfg) {
	std::string canon;
	for (const auto& [key, value] : cfg.values) {
		canon += key;
		canon += '=';
		canon += value;
		canon += '\n';
	}
	char buf[20];
	std::snprintf(buf, sizeof(buf), "%016llx",
				  static_cast<unsigned long long>(detail::fnv1a(canon)));
	return buf;
}

struct CsvTable {
	std::string schema;
	std::vector<std::string> header;
	std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::string& path, const CsvTable& table) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw ConfigError("cannot write '" + path + "'");
	}
	out << "# schema: " << table.schema << "\n";
	for (std::size_t i = 0; i < table.header.size(); ++i) {
		out << (i ? "," : "") << table.header[i];
	}
	out << "\n";
	for (const auto& row : table.rows) {
		for (std::size_t i = 0; i < row.size(); ++i) {
			out << (i ? "," : "") << detail::format_value(row[i]);
		}
		out << "\n";
	}
}

struct KeyValueReport {
	std::string schema;
	std::vector<std::pair<std::string, std::string>> entries;

	void add(const std::string& key, double v) {
		entries.emplace_back(key, detail::format_value(v));
	}
	void add(const std::string& key, const std::string& v) {
		entries.emplace_back(key, v);
	}
	void add(const std::string& key, bool v) {
		entries.emplace_back(key, v ? "PASS" : "FAIL");
	}
};

inline void write_key_value(const std::string& path,
							const KeyValueReport& report) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw ConfigError("cannot write '" + path + "'");
	}
	out << "schema = " << report.schema << "\n";
	for (const auto& [k, v] : report.entries) {
		out << k << " = " << v << "\n";
	}
}

struct RunManifest {
	std::string scenario_hash;
	std::string version = tool_version;
	std::string wall_clock;
	std::vector<std::string> files;
	std::vector<std::pair<std::string, std::string>> verdicts;
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw ConfigError("cannot write '" + path + "'");
	}
	out << "schema = manifest-v1\n";
	out << "scenario_hash = " << m.scenario_hash << "\n";
	out << "version = " << m.version << "\n";
	out << "wall_clock = " << m.wall_clock << "\n";
	for (const auto& f : m.files) {
		out << "file = " << f << "\n";
	}
	for (const auto& [k, v] : m.verdicts) {
		out << "verdict." << k << " = " << v << "\n";
	}
}

// ------------------------------------------------------------- commands ---

namespace detail {

inline SimulationInput make_simulation_input(const ScenarioConfig& cfg) {
	if (!cfg.discrete) {
		throw ConfigError("scenario: a discrete bath is required here");
	}
	SimulationInput in;
	in.field = cfg.field;
	in.field_dim = cfg.field_dim;
	in.omega = cfg.omega;
	in.bath = *cfg.discrete;
	in.beta = cfg.beta;
	in.evolution = cfg.evolution;
	in.weight_cutoff = cfg.weight_cutoff;
	return in;
}

struct SimulateTables {
	CsvTable exact;
	CsvTable born;
	CsvTable residual;
	Trajectory trajectory;
};

// born.csv carries the observables reconstructed through second order (the
// t = 0 value plus the quadratic response), so residual columns are plain
// per-column differences.
inline SimulateTables run_simulate_tables(const ScenarioConfig& cfg) {
	SimulateTables out;
	const SimulationInput in = make_simulation_input(cfg);
	const Trajectory traj = simulate(in);
	const FieldMoments moments = FieldMoments::from_ket(
		make_field_state(cfg.field, FockSpace{cfg.field_dim}));

	out.exact.schema = "exact-v1";
	out.exact.header = {"t", "E1", "delta1", "delta2",
						"re_mean_a", "im_mean_a", "norm", "N_tot"};
	out.born.schema = "born-v1";
	out.born.header = {"t", "E1_order2", "delta1_order2", "delta2_order2"};
	out.residual.schema = "residual-v1";
	out.residual.header = {"t", "E1", "delta1", "delta2"};

	const double purity2_0 = 1.0 - traj.delta2[0];
	for (std::size_t k = 0; k < traj.times.size(); ++k) {
		const double t = traj.times[k];
		out.exact.rows.push_back({t, traj.e1[k], traj.delta1[k],
								  traj.delta2[k], traj.mean_a[k].real(),
								  traj.mean_a[k].imag(), traj.norm[k],
								  traj.total_excitation[k]});
		const double e1_b =
			traj.e1[0] + energy_order1(t, cfg.omega, in.bath, cfg.beta) +
			energy_order2(t, cfg.omega, in.bath, cfg.beta, moments);
		const double d1_b = traj.delta1[0] + field_purity_deficit_order2(
												 t, cfg.omega, in.bath,
												 cfg.beta, moments);
		const double d2_b =
			1.0 - purity2_0 * (1.0 - reservoir_purity_deficit_order2(
										 t, cfg.omega, in.bath, cfg.beta,
										 moments));
		out.born.rows.push_back({t, e1_b, d1_b, d2_b});
		out.residual.rows.push_back({t, traj.e1[k] - e1_b,
									 traj.delta1[k] - d1_b,
									 traj.delta2[k] - d2_b});
	}
	out.trajectory = traj;
	return out;
}

} // namespace detail

inline RunManifest cmd_simulate(const ScenarioConfig& cfg,
								const ConfigMap& raw,
								const std::string& out_dir) {
	std::filesystem::create_directories(out_dir);
	const detail::SimulateTables tables = detail::run_simulate_tables(cfg);

	write_csv(out_dir + "/exact.csv", tables.exact);
	write_csv(out_dir + "/born.csv", tables.born);
	write_csv(out_dir + "/residual.csv", tables.residual);

	RunManifest m;
	m.scenario_hash = scenario_hash(raw);
	m.wall_clock = detail::utc_now();
	m.files = {"exact.csv", "born.csv", "residual.csv"};
	m.verdicts.emplace_back(
		"norm_drift",
		tables.trajectory.max_norm_drift < 1e-8 ? "PASS" : "FAIL");
	m.verdicts.emplace_back(
		"excitation_drift",
		tables.trajectory.max_excitation_drift < 1e-8 ? "PASS" : "FAIL");
	write_manifest(out_dir + "/manifest.txt", m);
	return m;
}

namespace detail {

inline KeyValueReport timescale_key_value(const TimescaleReport& r) {
	KeyValueReport kv;
	kv.schema = "timescales-v1";
	kv.add("omega", r.omega);
	kv.add("beta", r.beta);
	kv.add("nbar", r.nbar);
	kv.add("mean_n0", r.moments.mean_n0);
	kv.add("abs_mean_a0", std::abs(r.moments.mean_a0));
	kv.add("rate_window", r.rate_window);
	kv.add("rate_sinc", r.rate_sinc);
	kv.add("tau_dis", r.tau_dis);
	kv.add("tau_th", r.tau_th);
	kv.add("tau_dec", r.tau_dec);
	kv.add("tau_res_dec", r.tau_res_dec);
	kv.add("ratio_th_dis", r.ratio_th_dis);
	kv.add("ratio_dis_dec", r.ratio_dis_dec);
	kv.add("ratio_th_dec", r.ratio_th_dec);
	kv.add("closed_th_dis", r.closed_th_dis);
	kv.add("closed_dis_dec", r.closed_dis_dec);
	kv.add("closed_th_dec", r.closed_th_dec);
	kv.add("ratio_identity_max_rel_err", r.ratio_identity_max_rel_err);
	kv.add("sep_period", r.separability.period);
	kv.add("sep_inv_omega", r.separability.inv_omega);
	kv.add("sep_ratio_period", r.separability.ratio_period);
	kv.add("sep_ratio_inv_omega", r.separability.ratio_inv_omega);
	kv.add("sep_margin", r.separability.margin);
	kv.add("sep_pass", r.separability.pass);
	kv.add("zero_t_ratio", r.zero_t.ratio);
	kv.add("zero_t_pass", r.zero_t.pass);
	kv.add("regime", r.regime);
	return kv;
}

inline void write_timescale_text(const std::string& path,
								 const TimescaleReport& r) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw ConfigError("cannot write '" + path + "'");
	}
	out << "timescale report (" << r.regime << ")\n";
	out << "  omega          " << format_value(r.omega) << "\n";
	out << "  beta           " << format_value(r.beta) << "\n";
	out << "  nbar(omega)    " << format_value(r.nbar) << "\n";
	out << "  rate, window   " << format_value(r.rate_window) << "\n";
	out << "  rate, sinc     " << format_value(r.rate_sinc)
		<< "  (exact golden-rule diagnostic)\n";
	out << "  tau_dis        " << format_value(r.tau_dis) << "\n";
	out << "  tau_th         " << format_value(r.tau_th) << "\n";
	out << "  tau_dec        " << format_value(r.tau_dec) << "\n";
	out << "  tau_res_dec    " << format_value(r.tau_res_dec) << "\n";
	out << "  ratio identity max rel err "
		<< format_value(r.ratio_identity_max_rel_err) << "\n";
	out << "  separability   " << (r.separability.pass ? "PASS" : "FAIL")
		<< "  tau/period = " << format_value(r.separability.ratio_period)
		<< "  tau*omega = " << format_value(r.separability.ratio_inv_omega)
		<< "  margin = " << format_value(r.separability.margin) << "\n";
	out << "  T=0 condition  " << (r.zero_t.pass ? "PASS" : "FAIL")
		<< "  ratio = " << format_value(r.zero_t.ratio) << "\n";
}

} // namespace detail

inline RunManifest cmd_timescales(const ScenarioConfig& cfg,
								  const ConfigMap& raw,
								  const std::string& out_dir) {
	if (!cfg.spectral) {
		throw ConfigError("scenario: timescales requires a spectral bath");
	}
	std::filesystem::create_directories(out_dir);
	const FieldMoments moments = FieldMoments::from_spec(cfg.field);
	const TimescaleReport r =
		ratio_report(cfg.omega, cfg.beta, *cfg.spectral, moments, cfg.margin);

	write_key_value(out_dir + "/report.kv", detail::timescale_key_value(r));
	detail::write_timescale_text(out_dir + "/report.txt", r);

	RunManifest m;
	m.scenario_hash = scenario_hash(raw);
	m.wall_clock = detail::utc_now();
	m.files = {"report.kv", "report.txt"};
	m.verdicts.emplace_back("separability",
							r.separability.pass ? "PASS" : "FAIL");
	m.verdicts.emplace_back("zero_t", r.zero_t.pass ? "PASS" : "FAIL");
	m.verdicts.emplace_back(
		"ratio_identity",
		r.ratio_identity_max_rel_err < 1e-10 ? "PASS" : "FAIL");
	write_manifest(out_dir + "/manifest.txt", m);
	return m;
}

struct ObservableFit {
	double slope = 0.0;
	double r_squared = 0.0;
	bool pass = false;
};

struct ConvergenceResult {
	std::vector<double> scales;
	std::vector<double> residual_e1;
	std::vector<double> residual_delta1;
	std::vector<double> residual_delta2;
	ObservableFit fit_e1;
	ObservableFit fit_delta1;
	ObservableFit fit_delta2;
};

namespace detail {

inline ObservableFit fit_loglog(const std::vector<double>& x,
								const std::vector<double>& y) {
	const std::size_t n = x.size();
	for (double v : y) {
		if (!(v > 0.0) || !std::isfinite(v)) {
			throw DegenerateModel("convergence: zero or non-finite residual");
		}
	}
	double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
	for (std::size_t i = 0; i < n; ++i) {
		const double lx = std::log(x[i]);
		const double ly = std::log(y[i]);
		sx += lx;
		sy += ly;
		sxx += lx * lx;
		sxy += lx * ly;
		syy += ly * ly;
	}
	const double den = n * sxx - sx * sx;
	if (den == 0.0) {
		throw DegenerateModel("convergence: degenerate scale grid");
	}
	ObservableFit fit;
	fit.slope = (n * sxy - sx * sy) / den;
	const double r_num = n * sxy - sx * sy;
	const double r_den = std::sqrt(den) * std::sqrt(n * syy - sy * sy);
	fit.r_squared = r_den > 0.0 ? (r_num / r_den) * (r_num / r_den) : 0.0;
	fit.pass = fit.slope >= 3.5 && fit.slope <= 4.5 && fit.r_squared > 0.99;
	return fit;
}

} // namespace detail

// Max-over-time residuals between the exact trajectory and the order-2
// formulas, at each coupling scale, with log-log slope fits per observable.
inline ConvergenceResult run_convergence(const ScenarioConfig& cfg) {
	if (!cfg.discrete) {
		throw ConfigError("scenario: convergence requires a discrete bath");
	}
	if (cfg.convergence_scales.size() < 3) {
		throw ConfigError("convergence: at least 3 grid points required");
	}
	double gamma_max = 0.0;
	for (const BathMode& m : cfg.discrete->modes) {
		gamma_max = std::max(gamma_max, m.gamma);
	}
	if (gamma_max == 0.0) {
		throw DegenerateModel("convergence: all couplings vanish");
	}

	ConvergenceResult res;
	res.scales = cfg.convergence_scales;
	const FieldMoments moments = FieldMoments::from_ket(
		make_field_state(cfg.field, FockSpace{cfg.field_dim}));
	for (double scale : res.scales) {
		if (!(scale > 0.0)) {
			throw ConfigError("convergence: scales must be positive");
		}
		ScenarioConfig scaled = cfg;
		for (BathMode& m : scaled.discrete->modes) {
			m.gamma *= scale;
		}
		const SimulationInput in = detail::make_simulation_input(scaled);
		const Trajectory traj = simulate(in);
		double r_e1 = 0.0, r_d1 = 0.0, r_d2 = 0.0;
		for (std::size_t k = 0; k < traj.times.size(); ++k) {
			const double t = traj.times[k];
			r_e1 = std::max(
				r_e1, std::abs(traj.e1[k] - traj.e1[0] -
							   energy_order2(t, cfg.omega, in.bath, cfg.beta,
											 moments)));
			r_d1 = std::max(
				r_d1, std::abs(traj.delta1[k] - traj.delta1[0] -
							   field_purity_deficit_order2(
								   t, cfg.omega, in.bath, cfg.beta, moments)));
			r_d2 = std::max(
				r_d2, std::abs(traj.reservoir_relative_loss(k) -
							   reservoir_purity_deficit_order2(
								   t, cfg.omega, in.bath, cfg.beta, moments)));
		}
		res.residual_e1.push_back(r_e1);
		res.residual_delta1.push_back(r_d1);
		res.residual_delta2.push_back(r_d2);
	}
	res.fit_e1 = detail::fit_loglog(res.scales, res.residual_e1);
	res.fit_delta1 = detail::fit_loglog(res.scales, res.residual_delta1);
	res.fit_delta2 = detail::fit_loglog(res.scales, res.residual_delta2);
	return res;
}

inline RunManifest cmd_convergence(const ScenarioConfig& cfg,
								   const ConfigMap& raw,
								   const std::string& out_dir) {
	std::filesystem::create_directories(out_dir);
	const ConvergenceResult res = run_convergence(cfg);

	CsvTable table;
	table.schema = "convergence-v1";
	table.header = {"scale", "residual_E1", "residual_delta1",
					"residual_delta2"};
	for (std::size_t i = 0; i < res.scales.size(); ++i) {
		table.rows.push_back({res.scales[i], res.residual_e1[i],
							  res.residual_delta1[i], res.residual_delta2[i]});
	}
	write_csv(out_dir + "/convergence.csv", table);

	KeyValueReport kv;
	kv.schema = "convergence-v1";
	const auto add_fit = [&kv](const std::string& name,
							   const ObservableFit& fit) {
		kv.add("slope_" + name, fit.slope);
		kv.add("r_squared_" + name, fit.r_squared);
		kv.add("pass_" + name, fit.pass);
	};
	add_fit("E1", res.fit_e1);
	add_fit("delta1", res.fit_delta1);
	add_fit("delta2", res.fit_delta2);
	write_key_value(out_dir + "/report.kv", kv);

	RunManifest m;
	m.scenario_hash = scenario_hash(raw);
	m.wall_clock = detail::utc_now();
	m.files = {"convergence.csv", "report.kv"};
	m.verdicts.emplace_back("E1", res.fit_e1.pass ? "PASS" : "FAIL");
	m.verdicts.emplace_back("delta1", res.fit_delta1.pass ? "PASS" : "FAIL");
	m.verdicts.emplace_back("delta2", res.fit_delta2.pass ? "PASS" : "FAIL");
	write_manifest(out_dir + "/manifest.txt", m);
	return m;
}

inline RunManifest cmd_cutoff_temp(const ScenarioConfig& cfg,
								   const ConfigMap& raw,
								   const std::string& out_dir) {
	if (!cfg.spectral) {
		throw ConfigError("scenario: cutoff-temp requires a spectral bath");
	}
	std::filesystem::create_directories(out_dir);
	const FieldMoments moments = FieldMoments::from_spec(cfg.field);
	const CutoffScan scan =
		cutoff_temperature(cfg.omega, *cfg.spectral, moments, cfg.margin);

	KeyValueReport kv;
	kv.schema = "cutoff-v1";
	kv.add("margin", cfg.margin);
	kv.add("pass_at_hottest", scan.pass_at_hottest);
	kv.add("pass_at_coldest", scan.pass_at_coldest);
	kv.add("n_crossings", static_cast<double>(scan.beta_crossings.size()));
	for (std::size_t i = 0; i < scan.beta_crossings.size(); ++i) {
		kv.add("beta_crossing_" + std::to_string(i), scan.beta_crossings[i]);
	}
	if (scan.beta_cutoff) {
		kv.add("beta_cutoff", *scan.beta_cutoff);
	} else {
		kv.add("verdict",
			   std::string(scan.pass_at_coldest ? "uniform PASS" : "uniform FAIL"));
	}
	write_key_value(out_dir + "/cutoff.kv", kv);

	RunManifest m;
	m.scenario_hash = scenario_hash(raw);
	m.wall_clock = detail::utc_now();
	m.files = {"cutoff.kv"};
	if (scan.beta_cutoff) {
		m.verdicts.emplace_back("cutoff", "CROSSING");
	} else {
		m.verdicts.emplace_back(
			"cutoff", scan.pass_at_coldest ? "UNIFORM_PASS" : "UNIFORM_FAIL");
	}
	write_manifest(out_dir + "/manifest.txt", m);
	return m;
}

} // namespace decotime
