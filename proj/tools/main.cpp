#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decotime/scenario.hpp"

namespace {

struct CommonArgs {
	std::string config_path;
	std::string out_dir;
	double margin = -1.0;  // < 0 means "use the scenario value"
	std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
	cmd->add_option("config", args.config_path, "scenario config file")
		->required();
	cmd->add_option("--out", args.out_dir, "output directory");
	cmd->add_option("--margin", args.margin,
					"separability margin override (default from scenario)");
	cmd->add_option("--override", args.overrides,
					"section.key=value config override (repeatable)");
}

decotime::ScenarioConfig load(const CommonArgs& args,
							  decotime::ConfigMap& raw) {
	raw = decotime::parse_config_file(args.config_path);
	for (const auto& o : args.overrides) {
		decotime::apply_override(raw, o);
	}
	if (args.margin >= 0.0) {
		raw.set("scenario.margin", decotime::detail::format_value(args.margin));
	}
	return decotime::load_scenario(raw);
}

std::string out_dir(const CommonArgs& args,
					const decotime::ScenarioConfig& cfg) {
	return args.out_dir.empty() ? cfg.out_dir : args.out_dir;
}

void print_verdicts(const decotime::RunManifest& m) {
	for (const auto& [key, value] : m.verdicts) {
		std::printf("%s: %s\n", key.c_str(), value.c_str());
	}
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"decoherence and dissipation timescale toolkit"};
	app.require_subcommand(1);

	CommonArgs sim_args, ts_args, conv_args, cut_args;
	CLI::App* sim = app.add_subcommand(
		"simulate", "exact vs order-2 trajectories for a discrete bath");
	add_common(sim, sim_args);
	CLI::App* ts = app.add_subcommand(
		"timescales", "Markovian timescale report for a spectral bath");
	add_common(ts, ts_args);
	CLI::App* conv = app.add_subcommand(
		"convergence", "residual order fit over a coupling-scale grid");
	add_common(conv, conv_args);
	CLI::App* cut = app.add_subcommand(
		"cutoff-temp", "cutoff temperature scan for a spectral bath");
	add_common(cut, cut_args);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e);
		return code == 0 ? 0 : 2;
	}

	try {
		decotime::ConfigMap raw;
		decotime::RunManifest manifest;
		if (sim->parsed()) {
			const auto cfg = load(sim_args, raw);
			manifest = decotime::cmd_simulate(cfg, raw, out_dir(sim_args, cfg));
		} else if (ts->parsed()) {
			const auto cfg = load(ts_args, raw);
			manifest =
				decotime::cmd_timescales(cfg, raw, out_dir(ts_args, cfg));
		} else if (conv->parsed()) {
			const auto cfg = load(conv_args, raw);
			manifest =
				decotime::cmd_convergence(cfg, raw, out_dir(conv_args, cfg));
		} else {
			const auto cfg = load(cut_args, raw);
			manifest =
				decotime::cmd_cutoff_temp(cfg, raw, out_dir(cut_args, cfg));
		}
		print_verdicts(manifest);
		return 0;
	} catch (const decotime::ConfigError& e) {
		std::fprintf(stderr, "config error: %s\n", e.what());
		return 2;
	} catch (const decotime::DegenerateModel& e) {
		std::fprintf(stderr, "degenerate model: %s\n", e.what());
		return 4;
	} catch (const decotime::Error& e) {
		std::fprintf(stderr, "error: %s\n", e.what());
		return 3;
	} catch (const std::exception& e) {
		std::fprintf(stderr, "internal error: %s\n", e.what());
		return 3;
	}
}
