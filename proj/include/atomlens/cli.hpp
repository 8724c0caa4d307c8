#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "constants.hpp"
#include "csvio.hpp"
#include "errors.hpp"
#include "fitting.hpp"
#include "lens_design.hpp"
#include "lifetime.hpp"
#include "propagation.hpp"
#include "species.hpp"
#include "telegraph.hpp"
#include "tweezer.hpp"

namespace atomlens::cli {

// error class -> process exit code, so scripts can tell a bad config from bad
// data from a fit that failed to settle
constexpr int exit_ok = 0;
constexpr int exit_unexpected = 1;
constexpr int exit_config = 2;
constexpr int exit_input = 3;
constexpr int exit_no_convergence = 4;

struct RunContext {
  json cfg;
  std::string hash;
  std::string out_dir = ".";
  std::uint64_t seed = 12345;
  int threads = 1;
  bool quiet = false;

  std::string path(const std::string& name) const { return out_dir + "/" + name; }
  void note(const std::string& msg) const {
    if (!quiet) std::cout << msg << "\n";
  }
  json result_header(const char* command) const {
    return json{{"schema", result_schema},
                {"command", command},
                {"config_hash", hash},
                {"seed", seed}};
  }
};

// --- shared config parsers --------------------------------------------------

inline LensPrescription parse_prescription(const json& obj, const std::string& context) {
  check_keys(obj, context,
             {"focal_length_m", "diameter_m", "lambda1_m", "lambda2_m", "pitch_m"});
  LensPrescription p;
  p.focal_length_m = get_num_or(obj, "focal_length_m", p.focal_length_m, context);
  p.diameter_m = get_num_or(obj, "diameter_m", p.diameter_m, context);
  p.lambda1_m = get_num_or(obj, "lambda1_m", p.lambda1_m, context);
  p.lambda2_m = get_num_or(obj, "lambda2_m", p.lambda2_m, context);
  p.pitch_m = get_num_or(obj, "pitch_m", p.pitch_m, context);
  p.validate();
  return p;
}

inline json prescription_json(const LensPrescription& p) {
  return json{{"focal_length_m", p.focal_length_m},
              {"diameter_m", p.diameter_m},
              {"lambda1_m", p.lambda1_m},
              {"lambda2_m", p.lambda2_m},
              {"pitch_m", p.pitch_m}};
}

inline EfficiencyTable parse_efficiency(const json& cfg, const std::string& context) {
  if (!cfg.contains("efficiency")) return EfficiencyTable::builtin();
  const json& e = cfg.at("efficiency");
  check_keys(e, context + ".efficiency", {"source", "path"});
  const std::string src = get_str(e, "source", context + ".efficiency");
  if (src == "builtin") return EfficiencyTable::builtin();
  if (src == "ideal") return EfficiencyTable::ideal();
  if (src == "csv") return load_efficiency_csv(get_str(e, "path", context + ".efficiency"));
  throw config_error(context + ".efficiency: source must be builtin, ideal, or csv");
}

inline Illumination parse_illumination(const json& cfg, const std::string& context) {
  if (!cfg.contains("illumination")) return Illumination::flat();
  const json& il = cfg.at("illumination");
  check_keys(il, context + ".illumination", {"profile", "gauss_radius_m"});
  const std::string prof = get_str(il, "profile", context + ".illumination");
  if (prof == "flat") return Illumination::flat();
  if (prof == "gaussian")
    return Illumination::gaussian(get_num(il, "gauss_radius_m", context + ".illumination"));
  throw config_error(context + ".illumination: profile must be flat or gaussian");
}

inline AtomSpecies parse_species(const json& cfg, const std::string& context) {
  if (!cfg.contains("species")) return AtomSpecies::rb87();
  const json& s = cfg.at("species");
  if (s.is_string()) {
    if (s.get<std::string>() == "rb87") return AtomSpecies::rb87();
    throw config_error(context + ": unknown species '" + s.get<std::string>() + "'");
  }
  const std::string ctx = context + ".species";
  check_keys(s, ctx, {"name", "mass_kg", "d1_lambda_m", "d1_gamma_rad_s", "d2_lambda_m",
                      "d2_gamma_rad_s"});
  AtomSpecies sp;
  sp.name = get_str_or(s, "name", "custom", ctx);
  sp.mass_kg = get_num(s, "mass_kg", ctx);
  sp.d1_lambda_m = get_num(s, "d1_lambda_m", ctx);
  sp.d1_gamma = get_num(s, "d1_gamma_rad_s", ctx);
  sp.d2_lambda_m = get_num(s, "d2_lambda_m", ctx);
  sp.d2_gamma = get_num(s, "d2_gamma_rad_s", ctx);
  return sp;
}

// --- design -----------------------------------------------------------------

inline int cmd_design(const RunContext& ctx) {
  const json& cfg = ctx.cfg;
  check_keys(cfg, "design", {"seed", "prescription", "efficiency"});
  const LensPrescription p = cfg.contains("prescription")
                                 ? parse_prescription(cfg.at("prescription"), "design.prescription")
                                 : LensPrescription{};
  const EfficiencyTable table = parse_efficiency(cfg, "design");

  const LayoutTable layout = generate_layout(p);
  save_layout_csv(layout, ctx.path("layout.csv"));
  save_efficiency_csv(table, ctx.path("efficiency.csv"));

  json out = ctx.result_header("design");
  out["prescription"] = prescription_json(p);
  out["na"] = p.na();
  out["partition"] = layout.partition;
  out["sites_total"] = layout.sites.size();
  out["sites_class1"] = layout.count(BrickClass::lambda1);
  out["sites_class2"] = layout.count(BrickClass::lambda2);
  save_json_file(out, ctx.path("design_summary.json"));
  ctx.note("design: " + std::to_string(layout.sites.size()) + " sites, NA " + fmt9(p.na()));
  return exit_ok;
}

// --- focus ------------------------------------------------------------------

inline Kernel parse_kernel(const json& cfg, const std::string& context) {
  const std::string k = get_str_or(cfg, "kernel", "exact", context);
  if (k == "exact") return Kernel::exact;
  if (k == "fresnel") return Kernel::fresnel;
  throw config_error(context + ": kernel must be exact or fresnel");
}

inline std::vector<double> parse_wavelengths(const json& cfg, const std::string& context) {
  const json& lam = require(cfg, "lambda_m", context);
  std::vector<double> lambdas;
  if (lam.is_number()) {
    lambdas.push_back(lam.get<double>());
  } else if (lam.is_array()) {
    for (const auto& v : lam) {
      if (!v.is_number()) throw config_error(context + ": lambda_m entries must be numbers");
      lambdas.push_back(v.get<double>());
    }
  } else {
    throw config_error(context + ": lambda_m must be a number or an array of numbers");
  }
  if (lambdas.empty()) throw config_error(context + ": lambda_m must not be empty");
  for (double l : lambdas)
    if (l <= 0) throw config_error(context + ": wavelengths must be > 0");
  return lambdas;
}

inline json focal_metrics_json(double lambda_m, const FocalMetrics& m) {
  return json{{"lambda_m", lambda_m},
              {"best_z_m", m.best_z_m},
              {"w0_m", m.w0_m},
              {"zr_m", m.zr_m},
              {"gaussian_reference_zr_m", m.gaussian_reference_zr_m},
              {"zr_consistency", m.zr_m / m.gaussian_reference_zr_m},
              {"t_aperture", m.t_aperture},
              {"side_lobe_ratio", m.side_lobe_ratio},
              {"peak_on_axis", m.peak_on_axis}};
}

inline int cmd_focus(const RunContext& ctx) {
  const json& cfg = ctx.cfg;
  const std::string source = get_str(cfg, "source", "focus");

  // the allowed key set depends on the source kind, so typos like a stray
  // w0_m on a layout run fail loudly
  if (source == "layout") {
    check_keys(cfg, "focus",
               {"seed", "source", "layout_csv", "design_summary", "efficiency", "lambda_m",
                "illumination", "grid", "scan", "kernel", "background"});
  } else if (source == "ideal_lens") {
    check_keys(cfg, "focus",
               {"seed", "source", "aperture_diameter_m", "focal_length_m", "lambda_m",
                "illumination", "grid", "scan", "kernel"});
  } else if (source == "gaussian") {
    check_keys(cfg, "focus", {"seed", "source", "w0_m", "lambda_m", "grid", "scan", "kernel"});
  } else {
    throw config_error("focus: source must be layout, ideal_lens, or gaussian");
  }

  const json& grid = require(cfg, "grid", "focus");
  check_keys(grid, "focus.grid", {"n", "pitch_m"});
  const int n = static_cast<int>(get_int(grid, "n", "focus.grid"));
  const double grid_pitch = get_num(grid, "pitch_m", "focus.grid");
  if (n < 4 || n % 2 != 0) throw config_error("focus.grid: n must be even and >= 4");
  if (grid_pitch <= 0) throw config_error("focus.grid: pitch_m must be > 0");

  const Kernel kernel = parse_kernel(cfg, "focus");
  const std::vector<double> lambdas = parse_wavelengths(cfg, "focus");
  const Illumination illum = parse_illumination(cfg, "focus");

  // source-specific state
  LayoutTable layout;
  EfficiencyTable table;
  double z_center_default = 0;
  double aperture_d = 0, focal = 0, w0 = 0;
  if (source == "layout") {
    const json summary = load_json_file(get_str(cfg, "design_summary", "focus"));
    layout.prescription =
        parse_prescription(require(summary, "prescription", "design_summary"), "design_summary.prescription");
    layout.sites = load_layout_csv(get_str(cfg, "layout_csv", "focus"));
    table = parse_efficiency(cfg, "focus");
    z_center_default = layout.prescription.focal_length_m;
  } else if (source == "ideal_lens") {
    aperture_d = get_num(cfg, "aperture_diameter_m", "focus");
    focal = get_num(cfg, "focal_length_m", "focus");
    if (aperture_d <= 0 || focal <= 0)
      throw config_error("focus: aperture and focal length must be > 0");
    z_center_default = focal;
  } else {
    w0 = get_num(cfg, "w0_m", "focus");
    z_center_default = 0;  // collimated waist sits at the source plane
  }

  const json& scan = require(cfg, "scan", "focus");
  check_keys(scan, "focus.scan", {"z_center_m", "z_span_m", "n_planes"});
  const double z_center = get_num_or(scan, "z_center_m", z_center_default, "focus.scan");
  const double z_span = get_num(scan, "z_span_m", "focus.scan");
  const int n_planes = static_cast<int>(get_int_or(scan, "n_planes", 41, "focus.scan"));
  if (z_span <= 0) throw config_error("focus.scan: z_span_m must be > 0");

  const bool want_background =
      source == "layout" && get_bool_or(cfg, "background", false, "focus");

  json out = ctx.result_header("focus");
  out["source"] = source;
  out["kernel"] = kernel == Kernel::exact ? "exact" : "fresnel";
  out["grid"] = {{"n", n}, {"pitch_m", grid_pitch}};
  json per_lambda = json::array();
  std::vector<double> best_z;

  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double lam = lambdas[i];
    SampledField field = SampledField::zeros(n, grid_pitch, lam);
    if (source == "layout")
      field = synthesize_aperture_field(layout, table, lam, illum, n, grid_pitch);
    else if (source == "ideal_lens")
      field = ideal_lens_field(n, grid_pitch, focal, lam, aperture_d, illum);
    else
      field = gaussian_source_field(n, grid_pitch, lam, w0);

    const FocalStack stack = scan_axial(field, z_center - 0.5 * z_span,
                                        z_center + 0.5 * z_span, n_planes, kernel,
                                        ctx.threads);
    const FocalMetrics metrics = focal_metrics(stack);
    const std::string tag = std::to_string(i);
    save_xy_csv(ctx.path("axial_" + tag + ".csv"), "z_m", "on_axis_intensity", stack.z_m,
                stack.on_axis_intensity);
    const RadialProfile prof = radial_profile(stack.best_field);
    save_xy_csv(ctx.path("radial_" + tag + ".csv"), "r_m", "intensity", prof.r_m,
                prof.intensity);

    json entry = focal_metrics_json(lam, metrics);
    if (want_background) {
      const BackgroundResult bg = unmodulated_background(layout, table, lam);
      entry["background_ratio"] = bg.ratio;
    }
    per_lambda.push_back(entry);
    best_z.push_back(metrics.best_z_m);
    ctx.note("focus: lambda " + fmt9(lam) + " m -> z " + fmt9(metrics.best_z_m) + " m, w0 " +
             fmt9(metrics.w0_m) + " m");
  }
  out["wavelengths"] = per_lambda;
  if (best_z.size() >= 2) out["axial_offset_m"] = best_z[1] - best_z[0];
  save_json_file(out, ctx.path("focus_metrics.json"));
  return exit_ok;
}

// --- trap -------------------------------------------------------------------

inline CollectionModel parse_collection_model(const json& obj, const std::string& context) {
  check_keys(obj, context, {"label", "eta", "na", "pattern", "t", "zeta", "path"});
  CollectionModel m;
  if (obj.contains("eta")) {
    if (obj.contains("na") || obj.contains("pattern"))
      throw config_error(context + ": give either eta directly or na+pattern, not both");
    m.eta = get_num(obj, "eta", context);
  } else {
    const double na = get_num(obj, "na", context);
    const std::string pat = get_str_or(obj, "pattern", "isotropic", context);
    DipolePattern pattern;
    if (pat == "isotropic")
      pattern = DipolePattern::isotropic;
    else if (pat == "circular_dipole")
      pattern = DipolePattern::circular_dipole;
    else
      throw config_error(context + ": pattern must be isotropic or circular_dipole");
    m.eta = collection_efficiency(na, pattern);
  }
  m.t = get_num_or(obj, "t", 1.0, context);
  m.zeta = get_num_or(obj, "zeta", 1.0, context);
  m.path = get_num_or(obj, "path", 1.0, context);
  return m;
}

inline int cmd_trap(const RunContext& ctx) {
  const json& cfg = ctx.cfg;
  check_keys(cfg, "trap",
             {"seed", "species", "power_w", "zeta", "w0_m", "zr_m", "lambda_trap_m",
              "counter_rotating", "collection", "fictitious"});
  const AtomSpecies species = parse_species(cfg, "trap");
  const double power = get_num(cfg, "power_w", "trap");
  const double zeta = get_num_or(cfg, "zeta", 1.0, "trap");
  const double w0 = get_num(cfg, "w0_m", "trap");
  const double lambda_trap = get_num(cfg, "lambda_trap_m", "trap");
  const double zr = get_num_or(cfg, "zr_m", pi * sqr(w0) / lambda_trap, "trap");
  const bool counter = get_bool_or(cfg, "counter_rotating", false, "trap");

  const double i0 = peak_intensity(power, zeta, w0);
  const double u0 = dipole_potential(i0, lambda_trap, species, counter);

  json out = ctx.result_header("trap");
  out["species"] = species.name;
  out["peak_intensity_w_m2"] = i0;
  out["u0_j"] = u0;
  out["depth_mk"] = std::abs(u0) / k_boltzmann / millikelvin;
  if (u0 != 0) {
    double omega_r = 0, omega_z = 0;
    trap_frequencies(u0, w0, zr, species.mass_kg, omega_r, omega_z);
    out["omega_r_rad_s"] = omega_r;
    out["omega_z_rad_s"] = omega_z;
    out["f_r_hz"] = omega_r / two_pi;
    out["f_z_hz"] = omega_z / two_pi;
  } else {
    out["omega_r_rad_s"] = nullptr;  // no restoring force at zero power
    out["omega_z_rad_s"] = nullptr;
  }

  if (cfg.contains("collection")) {
    const json& arr = cfg.at("collection");
    if (!arr.is_array() || arr.empty() || arr.size() > 2)
      throw config_error("trap.collection: expected an array of one or two arm models");
    std::vector<CollectionModel> models;
    json arms = json::array();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ctx_name = "trap.collection[" + std::to_string(i) + "]";
      const CollectionModel m = parse_collection_model(arr[i], ctx_name);
      models.push_back(m);
      arms.push_back(json{{"label", get_str_or(arr[i], "label", "arm" + std::to_string(i), ctx_name)},
                          {"eta", m.eta},
                          {"t", m.t},
                          {"zeta", m.zeta},
                          {"path", m.path},
                          {"budget", m.eta * m.t * m.zeta * m.path}});
    }
    out["collection"] = arms;
    if (models.size() == 2) out["count_ratio"] = count_ratio(models[0], models[1]);
  }

  if (cfg.contains("fictitious")) {
    const json& fict = cfg.at("fictitious");
    check_keys(fict, "trap.fictitious", {"beta_t_per_w"});
    FictitiousFieldModel model;
    model.beta_t_per_w = get_num(fict, "beta_t_per_w", "trap.fictitious");
    model.w0_m = w0;
    const FictitiousField f = fictitious_field(zeta * power, model);
    out["fictitious"] = {{"b_t", f.b_t},
                         {"b_gauss", f.b_t / gauss},
                         {"gradient_t_per_m", f.gradient_t_per_m}};
  }

  save_json_file(out, ctx.path("trap.json"));
  ctx.note("trap: depth " + fmt9(std::abs(u0) / k_boltzmann / millikelvin) + " mK");
  return exit_ok;
}

// --- mc ---------------------------------------------------------------------

struct AnalysisFlags {
  bool histogram = true;
  bool lifetime = true;
  bool average_decay = false;
  bool keep_only_initially_occupied = true;
};

inline AnalysisFlags parse_analysis(const json& cfg, const std::string& context) {
  AnalysisFlags a;
  if (!cfg.contains("analysis")) return a;
  const json& an = cfg.at("analysis");
  const std::string ctx_name = context + ".analysis";
  check_keys(an, ctx_name,
             {"histogram", "lifetime", "average_decay", "keep_only_initially_occupied"});
  a.histogram = get_bool_or(an, "histogram", a.histogram, ctx_name);
  a.lifetime = get_bool_or(an, "lifetime", a.lifetime, ctx_name);
  a.average_decay = get_bool_or(an, "average_decay", a.average_decay, ctx_name);
  a.keep_only_initially_occupied =
      get_bool_or(an, "keep_only_initially_occupied", a.keep_only_initially_occupied, ctx_name);
  return a;
}

inline json histogram_json(const HistogramSummary& h) {
  return json{{"bg_mean", h.bg_mean},
              {"atom_mean", h.atom_mean},
              {"threshold", h.threshold},
              {"occupancy_fraction", h.occupancy_fraction},
              {"misclassification", h.misclassification},
              {"single_peaked", h.single_peaked},
              {"n_bins", h.n_bins}};
}

inline json lifetime_json(const LifetimeEstimate& e) {
  return json{{"tau_s", e.tau_s},
              {"ci_low_s", e.ci_low_s},
              {"ci_high_s", e.ci_high_s},
              {"n_dwells", e.n_dwells},
              {"n_uncensored", e.n_uncensored}};
}

// Histogram -> threshold -> per-bin occupancy -> dwell statistics, shared by
// simulated and ingested traces. The atom rate entering the consistency check
// is the measured peak separation, so no simulation parameter leaks in.
inline json analyze_trace(const TelegraphTrace& trace, const AnalysisFlags& flags,
                          const RunContext& ctx, const std::string& decay_csv_name) {
  json tj = json::object();
  if (!flags.histogram) return tj;
  const HistogramSummary h = histogram(trace);
  tj["histogram"] = histogram_json(h);
  const std::vector<bool> occ = threshold_classify(trace, h.threshold);
  const std::vector<bool> cyc = cycle_occupancy(trace, occ);
  const long loaded = std::count(cyc.begin(), cyc.end(), true);
  tj["loaded_cycle_fraction"] = static_cast<double>(loaded) / trace.n_cycles;

  if (flags.lifetime && !h.single_peaked) {
    try {
      const LifetimeEstimate est = dwell_time_lifetime(trace, occ);
      tj["lifetime"] = lifetime_json(est);
      const double atom_rate = std::max(0.0, (h.atom_mean - h.bg_mean) / trace.bin_s);
      tj["expected_atom_counts_per_bin"] = lifetime_count_consistency(
          est.tau_s, trace.params.probe_s, atom_rate, trace.bin_s);
    } catch (const input_error& e) {
      tj["lifetime"] = {{"skipped", e.what()}};
    }
  }
  if (flags.average_decay) {
    try {
      const DecayCurve curve =
          average_decay(trace, occ, flags.keep_only_initially_occupied);
      save_xy_csv(ctx.path(decay_csv_name), "t_s", "mean_counts", curve.t_s,
                  curve.mean_counts);
      tj["decay"] = {{"csv", decay_csv_name}, {"n_cycles_used", curve.n_cycles_used}};
    } catch (const input_error& e) {
      tj["decay"] = {{"skipped", e.what()}};
    }
  }
  return tj;
}

inline json dynamics_json(const DynamicsParams& d) {
  return json{{"load_rate_hz", d.load_rate_hz},
              {"lifetime_s", d.lifetime_s},
              {"atom_rate_hz", d.atom_rate_hz},
              {"bg_rate_hz", d.bg_rate_hz},
              {"prep_s", d.prep_s},
              {"probe_s", d.probe_s},
              {"load_during_probe", d.load_during_probe},
              {"blockade", d.blockade}};
}

inline DynamicsParams parse_dynamics(const json& cfg, const std::string& context) {
  DynamicsParams base;
  const std::string preset = get_str_or(cfg, "preset", "metalens", context);
  if (preset == "metalens")
    base = DynamicsParams::metalens_preset();
  else if (preset == "objective")
    base = DynamicsParams::objective_preset();
  else if (preset == "custom")
    base = DynamicsParams{};
  else
    throw config_error(context + ": preset must be metalens, objective, or custom");

  if (cfg.contains("dynamics")) {
    const json& d = cfg.at("dynamics");
    const std::string ctx_name = context + ".dynamics";
    check_keys(d, ctx_name,
               {"load_rate_hz", "lifetime_s", "atom_rate_hz", "bg_rate_hz", "prep_s",
                "probe_s", "load_during_probe", "blockade"});
    base.load_rate_hz = get_num_or(d, "load_rate_hz", base.load_rate_hz, ctx_name);
    base.lifetime_s = get_num_or(d, "lifetime_s", base.lifetime_s, ctx_name);
    base.atom_rate_hz = get_num_or(d, "atom_rate_hz", base.atom_rate_hz, ctx_name);
    base.bg_rate_hz = get_num_or(d, "bg_rate_hz", base.bg_rate_hz, ctx_name);
    base.prep_s = get_num_or(d, "prep_s", base.prep_s, ctx_name);
    base.probe_s = get_num_or(d, "probe_s", base.probe_s, ctx_name);
    base.load_during_probe = get_bool_or(d, "load_during_probe", base.load_during_probe, ctx_name);
    base.blockade = get_bool_or(d, "blockade", base.blockade, ctx_name);
  }
  base.validate();
  return base;
}

inline int cmd_mc(const RunContext& ctx) {
  const json& cfg = ctx.cfg;
  check_keys(cfg, "mc",
             {"seed", "preset", "dynamics", "cycles", "bin_s", "traces", "analysis",
              "bias_sweep"});
  const DynamicsParams base = parse_dynamics(cfg, "mc");
  const int cycles = static_cast<int>(get_int_or(cfg, "cycles", 100, "mc"));
  const double bin_s = get_num_or(cfg, "bin_s", 0.1, "mc");
  const int n_traces = static_cast<int>(get_int_or(cfg, "traces", 1, "mc"));
  if (n_traces < 1) throw config_error("mc: traces must be >= 1");
  const AnalysisFlags flags = parse_analysis(cfg, "mc");

  json out = ctx.result_header("mc");
  out["dynamics"] = dynamics_json(base);
  out["cycles"] = cycles;
  out["bin_s"] = bin_s;

  json traces_json = json::array();
  for (int i = 0; i < n_traces; ++i) {
    const TelegraphTrace trace = simulate_trace(base, cycles, bin_s, ctx.seed, i);
    const std::string tag = std::to_string(i);
    save_trace_csv(trace, ctx.path("trace_" + tag + ".csv"));
    json meta = ctx.result_header("mc");
    meta["stream_index"] = i;
    meta["bin_s"] = bin_s;
    meta["prep_s"] = base.prep_s;
    meta["probe_s"] = base.probe_s;
    meta["cycles"] = cycles;
    meta["source"] = "simulated";
    save_json_file(meta, ctx.path("trace_" + tag + ".meta.json"));

    json tj = analyze_trace(trace, flags, ctx, "decay_" + tag + ".csv");
    tj["index"] = i;
    traces_json.push_back(tj);
  }
  out["traces"] = traces_json;

  if (cfg.contains("bias_sweep")) {
    const json& bs = cfg.at("bias_sweep");
    check_keys(bs, "mc.bias_sweep", {"powers_w", "bias_t", "cycles_per_point", "model"});
    const json& pw = require(bs, "powers_w", "mc.bias_sweep");
    const json& bz = require(bs, "bias_t", "mc.bias_sweep");
    if (!pw.is_array() || pw.empty() || !bz.is_array() || bz.size() < 4)
      throw config_error("mc.bias_sweep: powers_w must be a non-empty array and bias_t needs >= 4 points");
    const int cycles_pp =
        static_cast<int>(get_int_or(bs, "cycles_per_point", 400, "mc.bias_sweep"));
    const json& mo = require(bs, "model", "mc.bias_sweep");
    check_keys(mo, "mc.bias_sweep.model",
               {"tau_floor_s", "tau_max_s", "width_t", "b_opt_slope_t_per_w",
                "b_opt_intercept_t"});
    const double tau_floor = get_num(mo, "tau_floor_s", "mc.bias_sweep.model");
    const double tau_max = get_num(mo, "tau_max_s", "mc.bias_sweep.model");
    const double width = get_num(mo, "width_t", "mc.bias_sweep.model");
    const double slope = get_num(mo, "b_opt_slope_t_per_w", "mc.bias_sweep.model");
    const double intercept = get_num(mo, "b_opt_intercept_t", "mc.bias_sweep.model");

    std::vector<std::string> rows;
    rows.emplace_back("power_w,bias_t,tau_s,ci_low_s,ci_high_s,n_dwells");
    json fits = json::array();
    std::vector<double> fit_powers, fit_bopts;
    std::uint64_t stream = static_cast<std::uint64_t>(n_traces);
    for (const auto& pv : pw) {
      if (!pv.is_number()) throw config_error("mc.bias_sweep: powers_w entries must be numbers");
      const double power = pv.get<double>();
      BiasLifetimeModel model;
      model.tau_floor_s = tau_floor;
      model.tau_max_s = tau_max;
      model.b_opt_t = slope * power + intercept;
      model.width_t = width;

      std::vector<double> b_points, tau_points;
      for (const auto& bv : bz) {
        if (!bv.is_number()) throw config_error("mc.bias_sweep: bias_t entries must be numbers");
        const double b = bv.get<double>();
        DynamicsParams d = base;
        d.lifetime_s = model.tau(b);
        const TelegraphTrace trace = simulate_trace(d, cycles_pp, bin_s, ctx.seed, stream++);
        const HistogramSummary h = histogram(trace);
        const std::vector<bool> occ = threshold_classify(trace, h.threshold);
        try {
          const LifetimeEstimate est = dwell_time_lifetime(trace, occ);
          rows.push_back(fmt9(power) + "," + fmt9(b) + "," + fmt9(est.tau_s) + "," +
                         fmt9(est.ci_low_s) + "," + fmt9(est.ci_high_s) + "," +
                         std::to_string(est.n_dwells));
          b_points.push_back(b);
          tau_points.push_back(est.tau_s);
        } catch (const input_error&) {
          // too few complete dwells at this point; leave it out of the fit
        }
      }
      const FitResult fit = fit_bias_lifetime(b_points, tau_points);
      json entry = {{"power_w", power},
                    {"b_opt_t", fit["b_opt"]},
                    {"b_opt_err_t", fit.error_of("b_opt")},
                    {"tau_max_s", fit["tau_max"]},
                    {"width_t", fit["width"]},
                    {"converged", fit.converged},
                    {"extrapolated", fit.extrapolated},
                    {"n_points", b_points.size()}};
      fits.push_back(entry);
      if (fit.converged) {
        fit_powers.push_back(power);
        fit_bopts.push_back(fit["b_opt"]);
      }
    }
    write_lines(ctx.path("sweep_tau.csv"), rows);
    json sweep = json::object();
    sweep["fits"] = fits;
    sweep["model"] = {{"tau_floor_s", tau_floor},
                      {"tau_max_s", tau_max},
                      {"width_t", width},
                      {"b_opt_slope_t_per_w", slope},
                      {"b_opt_intercept_t", intercept}};
    if (fit_powers.size() >= 2) {
      const LinearFit lf = optimal_bias_linear_fit(fit_powers, fit_bopts);
      sweep["linear_fit"] = {{"slope_t_per_w", lf.slope},
                             {"intercept_t", lf.intercept},
                             {"slope_se", lf.slope_se},
                             {"intercept_se", lf.intercept_se}};
    }
    out["bias_sweep"] = sweep;
  }

  save_json_file(out, ctx.path("mc_analysis.json"));
  ctx.note("mc: " + std::to_string(n_traces) + " trace(s), " + std::to_string(cycles) +
           " cycles");
  return exit_ok;
}

// --- fit --------------------------------------------------------------------

inline int cmd_fit(const RunContext& ctx) {
  const json& cfg = ctx.cfg;
  check_keys(cfg, "fit", {"seed", "model", "data_csv"});
  const std::string model = get_str(cfg, "model", "fit");
  std::vector<double> x, y;
  load_xy_csv(get_str(cfg, "data_csv", "fit"), x, y);

  json out = ctx.result_header("fit");
  out["model"] = model;
  out["n_points"] = x.size();
  int code = exit_ok;

  if (model == "linear") {
    const LinearFit lf = linear_fit(x, y);
    out["parameters"] = {{"slope", lf.slope}, {"intercept", lf.intercept}};
    out["std_errors"] = {{"slope", lf.slope_se}, {"intercept", lf.intercept_se}};
    double ssr = 0;
    for (double r : lf.residuals) ssr += sqr(r);
    out["residual_norm"] = std::sqrt(ssr);
    out["converged"] = true;
  } else {
    FitResult f;
    if (model == "exponential")
      f = fit_exponential(x, y);
    else if (model == "erf")
      f = fit_erf(x, y);
    else if (model == "bias_lifetime")
      f = fit_bias_lifetime(x, y);
    else
      throw config_error("fit: model must be exponential, erf, bias_lifetime, or linear");
    json params = json::object(), errors = json::object();
    for (std::size_t i = 0; i < f.names.size(); ++i) {
      params[f.names[i]] = f.params[i];
      errors[f.names[i]] = f.std_errors[i];
    }
    out["parameters"] = params;
    out["std_errors"] = errors;
    out["residual_norm"] = f.residual_norm;
    out["iterations"] = f.iterations;
    out["converged"] = f.converged;
    out["extrapolated"] = f.extrapolated;
    if (!f.converged) code = exit_no_convergence;
  }
  save_json_file(out, ctx.path("fit.json"));
  ctx.note("fit: " + model + (code == exit_ok ? "" : " (did not converge)"));
  return code;
}

// --- ingest -----------------------------------------------------------------

inline int cmd_ingest(const RunContext& ctx) {
  const json& cfg = ctx.cfg;
  check_keys(cfg, "ingest", {"seed", "schema", "csv", "sidecar", "analysis"});
  const std::string schema = get_str(cfg, "schema", "ingest");
  const std::string csv = get_str(cfg, "csv", "ingest");

  json out = ctx.result_header("ingest");
  out["input_schema"] = schema;

  if (schema == "points") {
    std::vector<double> x, y;
    load_xy_csv(csv, x, y);
    save_xy_csv(ctx.path("points.csv"), "x", "y", x, y);
    out["n_rows"] = x.size();
    out["x_min"] = *std::min_element(x.begin(), x.end());
    out["x_max"] = *std::max_element(x.begin(), x.end());
    save_json_file(out, ctx.path("ingest_report.json"));
    ctx.note("ingest: " + std::to_string(x.size()) + " points");
    return exit_ok;
  }
  if (schema != "trace") throw config_error("ingest: schema must be trace or points");

  const json side = load_json_file(get_str(cfg, "sidecar", "ingest"));
  check_keys(side, "sidecar",
             {"schema", "command", "config_hash", "seed", "stream_index", "bin_s", "prep_s",
              "probe_s", "cycles", "source"});
  const double bin_s = get_num(side, "bin_s", "sidecar");
  const double prep_s = get_num(side, "prep_s", "sidecar");
  const double probe_s = get_num(side, "probe_s", "sidecar");
  if (bin_s <= 0) throw config_error("sidecar: bin_s must be > 0");

  TelegraphTrace trace;
  trace.source = TraceSource::ingested;
  trace.bin_s = bin_s;
  trace.prep_bins = detail::bins_of(prep_s, bin_s, "prep_s");
  const int probe_bins = detail::bins_of(probe_s, bin_s, "probe_s");
  trace.bins_per_cycle = trace.prep_bins + probe_bins;
  trace.params.prep_s = prep_s;
  trace.params.probe_s = probe_s;
  trace.params.lifetime_s = 1.0;  // unused for ingested data; keeps the struct valid
  trace.counts = load_trace_csv(csv, bin_s);
  if (trace.n_bins() % trace.bins_per_cycle != 0)
    throw input_error(csv + ": trace length is not a whole number of cycles (" +
                      std::to_string(trace.n_bins()) + " bins, " +
                      std::to_string(trace.bins_per_cycle) + " per cycle)");
  trace.n_cycles = trace.n_bins() / trace.bins_per_cycle;

  save_trace_csv(trace, ctx.path("ingested_trace.csv"));
  const AnalysisFlags flags = parse_analysis(cfg, "ingest");
  json analysis = analyze_trace(trace, flags, ctx, "decay_ingested.csv");
  analysis["n_cycles"] = trace.n_cycles;
  analysis["bin_s"] = bin_s;
  out["analysis"] = analysis;
  save_json_file(out, ctx.path("ingest_report.json"));
  ctx.note("ingest: " + std::to_string(trace.n_cycles) + " cycles");
  return exit_ok;
}

// --- driver -----------------------------------------------------------------

inline int dispatch(const std::string& command, const RunContext& ctx) {
  if (command == "design") return cmd_design(ctx);
  if (command == "focus") return cmd_focus(ctx);
  if (command == "trap") return cmd_trap(ctx);
  if (command == "mc") return cmd_mc(ctx);
  if (command == "fit") return cmd_fit(ctx);
  if (command == "ingest") return cmd_ingest(ctx);
  throw config_error("unknown command " + command);
}

inline int run(int argc, char** argv) {
  CLI::App app{"dual-band geometric-phase metalens design and single-atom detection toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;
  std::vector<CLI::Option*> seed_opts;

  const std::pair<const char*, const char*> commands[] = {
      {"design", "generate a nanobrick layout from a lens prescription"},
      {"focus", "propagate a source and report focal metrics"},
      {"trap", "dipole trap depth, frequencies, and photon budget"},
      {"mc", "simulate telegraph traces and analyze them"},
      {"fit", "fit a model to two-column CSV data"},
      {"ingest", "validate and analyze externally produced data"}};
  for (const auto& [name, blurb] : commands) {
    CLI::App* sub = app.add_subcommand(name, blurb);
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (created if missing)");
    seed_opts.push_back(sub->add_option("--seed", seed, "override the master seed"));
    sub->add_option("--threads", threads, "worker threads for propagation");
    sub->add_flag("--quiet", quiet, "suppress progress notes");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    RunContext ctx;
    ctx.cfg = load_json_file(config_path);
    if (!ctx.cfg.is_object()) throw config_error(config_path + ": config root must be an object");
    ctx.hash = config_hash_hex(ctx.cfg);
    ctx.out_dir = out_dir;
    ctx.threads = std::max(1, threads);
    ctx.quiet = quiet;
    ctx.seed = static_cast<std::uint64_t>(get_int_or(ctx.cfg, "seed", 12345, "config"));
    for (const CLI::Option* o : seed_opts)
      if (o->count() > 0) ctx.seed = seed;
    std::filesystem::create_directories(out_dir);
    return dispatch(app.get_subcommands().front()->get_name(), ctx);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return exit_input;
  } catch (const convergence_error& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return exit_no_convergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_unexpected;
  }
}

// convenience wrapper for tests: run({"trap", "--config", "cfg.json"})
inline int run(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.emplace_back("atomlens");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<char*> argv;
  argv.reserve(full.size());
  for (auto& s : full) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace atomlens::cli
