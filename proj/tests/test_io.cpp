#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "atomlens/cli.hpp"
#include "atomlens/config.hpp"
#include "atomlens/csvio.hpp"
#include "atomlens/lens_design.hpp"
#include "oracles.hpp"

using namespace atomlens;
using oracles::TempDir;

namespace {
bool close(double a, double b, double tol) { return std::abs(a - b) < tol; }

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}
}  // namespace

TEST_CASE("nine-digit formatting round trips", "[io]") {
  for (double v : {0.0, 1.0, -3.86e-5, 852e-9, 0.84521832, 1.888373534746283e9, -0.5}) {
    const double back = parse_double(fmt9(v), "test");
    REQUIRE(close(back, v, 1e-8 * std::max(1.0, std::abs(v))));
  }
  REQUIRE(fmt9(1.5) == fmt9(1.5));  // deterministic
  REQUIRE_THROWS_AS(parse_double("1.5x", "test"), input_error);
  REQUIRE_THROWS_AS(parse_double("", "test"), input_error);
  REQUIRE_THROWS_AS(parse_long("3.5", "test"), input_error);
  REQUIRE_THROWS_AS(parse_long("abc", "test"), input_error);
}

TEST_CASE("layout CSV round trip", "[io]") {
  TempDir dir("layout");
  LensPrescription p;
  p.focal_length_m = 3.86e-5;
  p.diameter_m = 8.0e-6;
  p.pitch_m = 4.0e-7;
  const LayoutTable t = generate_layout(p);
  REQUIRE(t.sites.size() > 100);

  const std::string path = dir.file("layout.csv");
  save_layout_csv(t, path);
  const std::vector<NanobrickSpec> back = load_layout_csv(path);
  REQUIRE(back.size() == t.sites.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(close(back[i].x_m, t.sites[i].x_m, 1e-12));
    REQUIRE(close(back[i].y_m, t.sites[i].y_m, 1e-12));
    REQUIRE(back[i].cls == t.sites[i].cls);
    REQUIRE(close(back[i].theta_rad, t.sites[i].theta_rad, 1e-8));
    REQUIRE(back[i].len_m == (back[i].cls == BrickClass::lambda1 ? 250e-9 : 160e-9));
  }

  // byte-stable export
  save_layout_csv(t, dir.file("layout2.csv"));
  REQUIRE(oracles::read_text(path) == oracles::read_text(dir.file("layout2.csv")));

  // errors carry the file line number (header is line 1)
  oracles::write_text(dir.file("bad_class.csv"),
                      "x_m,y_m,class,theta_rad,len_m,wid_m\n"
                      "0,0,1,0.5,2.5e-07,1.4e-07\n"
                      "0,0,7,0.5,2.5e-07,1.4e-07\n");
  const std::string msg =
      message_of([&] { load_layout_csv(dir.file("bad_class.csv")); });
  REQUIRE(msg.find(":3") != std::string::npos);
  REQUIRE(msg.find("class") != std::string::npos);

  oracles::write_text(dir.file("bad_header.csv"), "a,b,c,d,e,f\n0,0,1,0,0,0\n");
  REQUIRE_THROWS_AS(load_layout_csv(dir.file("bad_header.csv")), input_error);
  oracles::write_text(dir.file("short_row.csv"),
                      "x_m,y_m,class,theta_rad,len_m,wid_m\n0,0,1\n");
  REQUIRE_THROWS_AS(load_layout_csv(dir.file("short_row.csv")), input_error);
  REQUIRE_THROWS_AS(load_layout_csv(dir.file("absent.csv")), input_error);
}

TEST_CASE("efficiency CSV round trip and validation", "[io]") {
  TempDir dir("eff");
  const EfficiencyTable t = EfficiencyTable::builtin();
  const std::string path = dir.file("eff.csv");
  save_efficiency_csv(t, path);
  const EfficiencyTable back = load_efficiency_csv(path);
  REQUIRE(back.lambda_m.size() == t.lambda_m.size());
  REQUIRE(close(back.interpolate(BrickClass::lambda1, 852e-9), 0.48, 1e-7));
  REQUIRE(close(back.interpolate(BrickClass::lambda2, 780e-9),
                t.interpolate(BrickClass::lambda2, 780e-9), 1e-7));

  oracles::write_text(dir.file("desc.csv"),
                      "lambda_m,eff_class1,eff_class2\n8e-07,0.5,0.5\n7e-07,0.5,0.5\n");
  REQUIRE(message_of([&] { load_efficiency_csv(dir.file("desc.csv")); })
              .find("ascending") != std::string::npos);
  oracles::write_text(dir.file("range.csv"),
                      "lambda_m,eff_class1,eff_class2\n7e-07,0.5,0.5\n8e-07,1.5,0.5\n");
  REQUIRE_THROWS_AS(load_efficiency_csv(dir.file("range.csv")), input_error);
  oracles::write_text(dir.file("one_row.csv"), "lambda_m,eff_class1,eff_class2\n7e-07,0.5,0.5\n");
  REQUIRE_THROWS_AS(load_efficiency_csv(dir.file("one_row.csv")), input_error);
}

TEST_CASE("trace CSV round trip and validation", "[io]") {
  TempDir dir("trace");
  const TelegraphTrace t = simulate_trace(DynamicsParams::metalens_preset(), 5, 0.05, 77);
  const std::string path = dir.file("trace.csv");
  save_trace_csv(t, path);
  const std::vector<long> counts = load_trace_csv(path, 0.05);
  REQUIRE(counts == t.counts);

  oracles::write_text(dir.file("gap.csv"),
                      "bin_index,t_start_s,counts\n0,0,3\n2,0.1,4\n");
  REQUIRE(message_of([&] { load_trace_csv(dir.file("gap.csv"), 0.05); })
              .find("contiguous") != std::string::npos);
  oracles::write_text(dir.file("time.csv"),
                      "bin_index,t_start_s,counts\n0,0,3\n1,0.2,4\n");
  REQUIRE_THROWS_AS(load_trace_csv(dir.file("time.csv"), 0.05), input_error);
  oracles::write_text(dir.file("neg.csv"),
                      "bin_index,t_start_s,counts\n0,0,3\n1,0.05,-4\n");
  REQUIRE_THROWS_AS(load_trace_csv(dir.file("neg.csv"), 0.05), input_error);
  oracles::write_text(dir.file("empty.csv"), "bin_index,t_start_s,counts\n");
  REQUIRE_THROWS_AS(load_trace_csv(dir.file("empty.csv"), 0.05), input_error);
}

TEST_CASE("generic two-column CSV", "[io]") {
  TempDir dir("xy");
  const std::vector<double> x{0.0, 0.5, 1.0}, y{1.0, 0.6, 0.37};
  save_xy_csv(dir.file("d.csv"), "t_s", "value", x, y);
  std::vector<double> bx, by;
  load_xy_csv(dir.file("d.csv"), bx, by);
  REQUIRE(bx.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(close(bx[i], x[i], 1e-9));
    REQUIRE(close(by[i], y[i], 1e-9));
  }
  REQUIRE_THROWS_AS(save_xy_csv(dir.file("m.csv"), "a", "b", {1.0}, {1.0, 2.0}), input_error);
  oracles::write_text(dir.file("single.csv"), "a,b\n1,2\n");
  REQUIRE_THROWS_AS(load_xy_csv(dir.file("single.csv"), bx, by), input_error);
}

TEST_CASE("config loading, key checking, and hashing", "[io]") {
  TempDir dir("cfg");
  oracles::write_text(dir.file("bad.json"), "{ not json");
  REQUIRE_THROWS_AS(load_json_file(dir.file("bad.json")), config_error);
  REQUIRE_THROWS_AS(load_json_file(dir.file("missing.json")), config_error);

  const json a = json::parse(R"({"alpha": 1, "beta": {"x": 2.5}})");
  const json b = json::parse(R"({"beta": {"x": 2.5}, "alpha": 1})");
  const json c = json::parse(R"({"alpha": 1, "beta": {"x": 2.6}})");
  const std::string ha = config_hash_hex(a);
  REQUIRE(ha.size() == 16);
  REQUIRE(ha == config_hash_hex(a));
  REQUIRE(ha == config_hash_hex(b));  // key order is canonicalized
  REQUIRE(ha != config_hash_hex(c));

  save_json_file(a, dir.file("echo.json"));
  REQUIRE(load_json_file(dir.file("echo.json")) == a);

  REQUIRE_THROWS_AS(check_keys(a, "test", {"alpha"}), config_error);
  REQUIRE_NOTHROW(check_keys(a, "test", {"alpha", "beta"}));
  const std::string msg = message_of([&] { check_keys(a, "test", {"alpha"}); });
  REQUIRE(msg.find("beta") != std::string::npos);
}

TEST_CASE("cli: design then focus on the produced layout", "[io][cli]") {
  TempDir dir("chain");
  json design_cfg = {
      {"seed", 7},
      {"prescription",
       {{"focal_length_m", 3.86e-5}, {"diameter_m", 4.0e-5}, {"lambda1_m", 852e-9},
        {"lambda2_m", 780e-9}, {"pitch_m", 4.0e-7}}},
      {"efficiency", {{"source", "builtin"}}}};
  save_json_file(design_cfg, dir.file("design.json"));
  REQUIRE(cli::run({"design", "--config", dir.file("design.json"), "--out",
                    dir.file("design_out"), "--quiet"}) == cli::exit_ok);

  const json summary = load_json_file(dir.file("design_out/design_summary.json"));
  REQUIRE(summary.at("sites_total").get<long>() == 7845);
  REQUIRE(summary.at("sites_class1").get<long>() == 3937);
  REQUIRE(summary.at("sites_class2").get<long>() == 3908);
  REQUIRE(summary.at("partition").get<std::string>() == "checkerboard");
  REQUIRE(close(summary.at("na").get<double>(), 0.46, 0.01));
  REQUIRE(summary.at("config_hash").get<std::string>() == config_hash_hex(design_cfg));
  REQUIRE(summary.at("schema").get<std::string>() == result_schema);

  json focus_cfg = {{"source", "layout"},
                    {"layout_csv", dir.file("design_out/layout.csv")},
                    {"design_summary", dir.file("design_out/design_summary.json")},
                    {"lambda_m", json::array({852e-9, 780e-9})},
                    {"grid", {{"n", 512}, {"pitch_m", 2.0e-7}}},
                    {"scan", {{"z_span_m", 1.6e-5}, {"n_planes", 21}}},
                    {"kernel", "exact"},
                    {"background", true}};
  save_json_file(focus_cfg, dir.file("focus.json"));
  REQUIRE(cli::run({"focus", "--config", dir.file("focus.json"), "--out",
                    dir.file("focus_out"), "--quiet"}) == cli::exit_ok);

  const json metrics = load_json_file(dir.file("focus_out/focus_metrics.json"));
  REQUIRE(metrics.at("wavelengths").size() == 2);
  const json& first = metrics.at("wavelengths").at(0);
  REQUIRE(close(first.at("lambda_m").get<double>(), 852e-9, 1e-15));
  REQUIRE(first.at("w0_m").get<double>() > 0.6e-6);
  REQUIRE(first.at("w0_m").get<double>() < 0.95e-6);
  REQUIRE(close(first.at("best_z_m").get<double>(), 3.86e-5, 1.5e-6));
  REQUIRE(first.at("background_ratio").get<double>() > 0.0);
  REQUIRE(std::abs(metrics.at("axial_offset_m").get<double>()) < 2.0e-6);
  // per-wavelength profiles land next to the metrics
  std::vector<double> zx, zy;
  load_xy_csv(dir.file("focus_out/axial_0.csv"), zx, zy);
  REQUIRE(zx.size() == 21);
  load_xy_csv(dir.file("focus_out/radial_1.csv"), zx, zy);
  REQUIRE(zx.size() > 10);
}

TEST_CASE("cli: trap report", "[io][cli]") {
  TempDir dir("trap");
  json cfg = {{"species", "rb87"},
              {"power_w", 15.9e-3},
              {"zeta", 0.33},
              {"w0_m", 1.33e-6},
              {"lambda_trap_m", 852e-9},
              {"collection",
               json::array({{{"label", "metalens"}, {"eta", 0.04}, {"t", 0.22}, {"zeta", 0.33}},
                            {{"label", "objective"}, {"eta", 0.015}, {"t", 0.8}, {"zeta", 1.0}}})}};
  save_json_file(cfg, dir.file("trap.json"));
  REQUIRE(cli::run({"trap", "--config", dir.file("trap.json"), "--out", dir.file("out"),
                    "--quiet"}) == cli::exit_ok);
  const json out = load_json_file(dir.file("out/trap.json"));
  REQUIRE(close(out.at("depth_mk").get<double>(), 0.84521832, 1e-4));
  REQUIRE(out.at("u0_j").get<double>() < 0.0);
  REQUIRE(close(out.at("count_ratio").get<double>(), 0.242, 1e-9));
  REQUIRE(out.at("collection").size() == 2);
  REQUIRE(close(out.at("collection").at(0).at("budget").get<double>(),
                0.04 * 0.22 * 0.33, 1e-12));
  REQUIRE(out.at("f_r_hz").get<double>() > 6.0e4);
  REQUIRE(out.at("f_r_hz").get<double>() < 8.0e4);
}

TEST_CASE("cli: mc is seed-deterministic", "[io][cli]") {
  TempDir dir("mc");
  json cfg = {{"preset", "metalens"},
              {"cycles", 60},
              {"bin_s", 0.05},
              {"traces", 1},
              {"seed", 2024},
              {"analysis", {{"histogram", true}, {"lifetime", false}}}};
  save_json_file(cfg, dir.file("mc.json"));
  REQUIRE(cli::run({"mc", "--config", dir.file("mc.json"), "--out", dir.file("a"),
                    "--quiet"}) == cli::exit_ok);
  REQUIRE(cli::run({"mc", "--config", dir.file("mc.json"), "--out", dir.file("b"),
                    "--quiet"}) == cli::exit_ok);
  REQUIRE(oracles::read_text(dir.file("a/trace_0.csv")) ==
          oracles::read_text(dir.file("b/trace_0.csv")));

  // --seed beats the config seed and changes the realization
  REQUIRE(cli::run({"mc", "--config", dir.file("mc.json"), "--out", dir.file("c"), "--seed",
                    "99", "--quiet"}) == cli::exit_ok);
  REQUIRE(oracles::read_text(dir.file("a/trace_0.csv")) !=
          oracles::read_text(dir.file("c/trace_0.csv")));
  const json meta = load_json_file(dir.file("c/trace_0.meta.json"));
  REQUIRE(meta.at("seed").get<long>() == 99);
  REQUIRE(meta.at("source").get<std::string>() == "simulated");
  REQUIRE(close(meta.at("bin_s").get<double>(), 0.05, 1e-12));

  const json analysis = load_json_file(dir.file("a/mc_analysis.json"));
  REQUIRE(analysis.at("traces").size() == 1);
  REQUIRE(analysis.at("traces").at(0).contains("histogram"));
  REQUIRE_FALSE(analysis.at("traces").at(0).contains("lifetime"));
}

TEST_CASE("cli: ingest echoes a simulated trace byte for byte", "[io][cli]") {
  TempDir dir("ingest");
  json mc_cfg = {{"preset", "metalens"}, {"cycles", 150}, {"bin_s", 0.05},
                 {"seed", 2024},        {"traces", 1},
                 {"analysis", {{"histogram", true}, {"lifetime", true}}}};
  save_json_file(mc_cfg, dir.file("mc.json"));
  REQUIRE(cli::run({"mc", "--config", dir.file("mc.json"), "--out", dir.file("sim"),
                    "--quiet"}) == cli::exit_ok);

  json in_cfg = {{"schema", "trace"},
                 {"csv", dir.file("sim/trace_0.csv")},
                 {"sidecar", dir.file("sim/trace_0.meta.json")},
                 {"analysis", {{"histogram", true}, {"lifetime", true}}}};
  save_json_file(in_cfg, dir.file("ingest.json"));
  REQUIRE(cli::run({"ingest", "--config", dir.file("ingest.json"), "--out", dir.file("ing"),
                    "--quiet"}) == cli::exit_ok);

  REQUIRE(oracles::read_text(dir.file("sim/trace_0.csv")) ==
          oracles::read_text(dir.file("ing/ingested_trace.csv")));

  // same counts, same analysis numbers
  const json sim = load_json_file(dir.file("sim/mc_analysis.json"));
  const json ing = load_json_file(dir.file("ing/ingest_report.json"));
  const json& sim_h = sim.at("traces").at(0).at("histogram");
  const json& ing_h = ing.at("analysis").at("histogram");
  REQUIRE(close(sim_h.at("atom_mean").get<double>(), ing_h.at("atom_mean").get<double>(), 1e-9));
  REQUIRE(close(sim_h.at("threshold").get<double>(), ing_h.at("threshold").get<double>(), 1e-9));
  const json& sim_l = sim.at("traces").at(0).at("lifetime");
  const json& ing_l = ing.at("analysis").at("lifetime");
  REQUIRE(close(sim_l.at("tau_s").get<double>(), ing_l.at("tau_s").get<double>(), 1e-9));
  REQUIRE(ing.at("analysis").at("n_cycles").get<long>() == 150);
}

TEST_CASE("cli: ingest validates hand-made traces", "[io][cli]") {
  TempDir dir("hand");
  oracles::write_text(dir.file("side.json"),
                      R"({"bin_s": 0.5, "prep_s": 1.0, "probe_s": 1.0})");
  // two clean cycles of four bins
  oracles::write_text(dir.file("good.csv"),
                      "bin_index,t_start_s,counts\n"
                      "0,0,1\n1,0.5,2\n2,1,9\n3,1.5,8\n"
                      "4,2,0\n5,2.5,1\n6,3,0\n7,3.5,2\n");
  json cfg = {{"schema", "trace"},
              {"csv", dir.file("good.csv")},
              {"sidecar", dir.file("side.json")},
              {"analysis", {{"histogram", false}}}};
  save_json_file(cfg, dir.file("in.json"));
  REQUIRE(cli::run({"ingest", "--config", dir.file("in.json"), "--out", dir.file("ok"),
                    "--quiet"}) == cli::exit_ok);
  const json rep = load_json_file(dir.file("ok/ingest_report.json"));
  REQUIRE(rep.at("analysis").at("n_cycles").get<long>() == 2);

  // negative counts
  oracles::write_text(dir.file("neg.csv"),
                      "bin_index,t_start_s,counts\n0,0,1\n1,0.5,-2\n2,1,9\n3,1.5,8\n");
  cfg["csv"] = dir.file("neg.csv");
  save_json_file(cfg, dir.file("in_neg.json"));
  REQUIRE(cli::run({"ingest", "--config", dir.file("in_neg.json"), "--out", dir.file("x1"),
                    "--quiet"}) == cli::exit_input);

  // not a whole number of cycles
  oracles::write_text(dir.file("ragged.csv"),
                      "bin_index,t_start_s,counts\n0,0,1\n1,0.5,2\n2,1,9\n");
  cfg["csv"] = dir.file("ragged.csv");
  save_json_file(cfg, dir.file("in_ragged.json"));
  REQUIRE(cli::run({"ingest", "--config", dir.file("in_ragged.json"), "--out", dir.file("x2"),
                    "--quiet"}) == cli::exit_input);

  // points schema passthrough
  save_xy_csv(dir.file("pts.csv"), "x", "y", {1.0, 2.0, 3.0}, {2.0, 4.0, 6.0});
  json pts = {{"schema", "points"}, {"csv", dir.file("pts.csv")}};
  save_json_file(pts, dir.file("in_pts.json"));
  REQUIRE(cli::run({"ingest", "--config", dir.file("in_pts.json"), "--out", dir.file("p"),
                    "--quiet"}) == cli::exit_ok);
  const json prep = load_json_file(dir.file("p/ingest_report.json"));
  REQUIRE(prep.at("n_rows").get<long>() == 3);
  REQUIRE(close(prep.at("x_max").get<double>(), 3.0, 1e-12));
}

TEST_CASE("cli: fit from CSV", "[io][cli]") {
  TempDir dir("fit");
  std::vector<double> t, y;
  for (int i = 0; i < 40; ++i) {
    t.push_back(0.1 * i);
    y.push_back(0.5 + 8.0 * std::exp(-t.back() / 0.9));
  }
  save_xy_csv(dir.file("data.csv"), "t_s", "counts", t, y);
  json cfg = {{"model", "exponential"}, {"data_csv", dir.file("data.csv")}};
  save_json_file(cfg, dir.file("fit.json"));
  REQUIRE(cli::run({"fit", "--config", dir.file("fit.json"), "--out", dir.file("out"),
                    "--quiet"}) == cli::exit_ok);
  const json out = load_json_file(dir.file("out/fit.json"));
  REQUIRE(out.at("converged").get<bool>());
  REQUIRE(close(out.at("parameters").at("tau").get<double>(), 0.9, 1e-6));
  REQUIRE(close(out.at("parameters").at("offset").get<double>(), 0.5, 1e-6));

  json lin = {{"model", "linear"}, {"data_csv", dir.file("data.csv")}};
  save_json_file(lin, dir.file("lin.json"));
  REQUIRE(cli::run({"fit", "--config", dir.file("lin.json"), "--out", dir.file("out_lin"),
                    "--quiet"}) == cli::exit_ok);
  const json lout = load_json_file(dir.file("out_lin/fit.json"));
  REQUIRE(lout.at("parameters").at("slope").get<double>() < 0.0);
}

TEST_CASE("cli: documented exit codes", "[io][cli]") {
  TempDir dir("exit");
  // unknown top-level key
  oracles::write_text(dir.file("unknown.json"),
                      R"({"power_w": 0.0159, "zeta": 0.33, "w0_m": 1.33e-6,)"
                      R"( "lambda_trap_m": 8.52e-7, "power_mw": 15.9})");
  REQUIRE(cli::run({"trap", "--config", dir.file("unknown.json"), "--out", dir.file("o1"),
                    "--quiet"}) == cli::exit_config);
  // malformed JSON
  oracles::write_text(dir.file("broken.json"), "{ nope");
  REQUIRE(cli::run({"trap", "--config", dir.file("broken.json"), "--out", dir.file("o2"),
                    "--quiet"}) == cli::exit_config);
  // referenced data file missing
  json fit_cfg = {{"model", "exponential"}, {"data_csv", dir.file("absent.csv")}};
  save_json_file(fit_cfg, dir.file("fit.json"));
  REQUIRE(cli::run({"fit", "--config", dir.file("fit.json"), "--out", dir.file("o3"),
                    "--quiet"}) == cli::exit_input);
  // resonant trap wavelength is an input-domain error
  json res = {{"power_w", 1e-3}, {"zeta", 0.33}, {"w0_m", 1.33e-6},
              {"lambda_trap_m", 780.241209686e-9}};
  save_json_file(res, dir.file("res.json"));
  REQUIRE(cli::run({"trap", "--config", dir.file("res.json"), "--out", dir.file("o4"),
                    "--quiet"}) == cli::exit_input);
  // usage errors from the argument parser
  REQUIRE(cli::run({"trap"}) == cli::exit_config);                      // missing --config
  REQUIRE(cli::run({"bogus", "--config", "x.json"}) == cli::exit_config);
}
