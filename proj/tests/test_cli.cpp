#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hartree/field_io.hpp"
#include "hartree/run_config.hpp"

using namespace hartree;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  fs::path p = fs::temp_directory_path() / "hartree_cli_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

#ifdef HARTREE_LAB_PATH
int run_tool(const std::string& args) {
  const std::string cmd = std::string(HARTREE_LAB_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}
#endif

}  // namespace

TEST_CASE("field files: bit-exact round trip and corruption guards") {
  const fs::path p = scratch() / "field.bin";
  GridSpec g(8, 3.0);
  ComplexField f(g, Space::position);
  f.fill([](double x, double y, double z) {
    return cplx(std::sin(x + 2 * y) * std::exp(-z * z), std::cos(x - z));
  });
  write_field(p, f);
  ComplexField r = read_field(p);
  REQUIRE(r.grid() == g);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(r[i] == f[i]);

  CHECK(fs::file_size(p) == 8 + 16 + f.size() * 16);

  SECTION("bad magic") {
    std::string bytes = slurp(p);
    bytes[0] = 'X';
    std::ofstream(p, std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_field(p), std::runtime_error);
  }
  SECTION("truncation") {
    std::string bytes = slurp(p);
    std::ofstream(p, std::ios::binary)
        << bytes.substr(0, bytes.size() - 8);
    CHECK_THROWS_AS(read_field(p), std::runtime_error);
  }
  SECTION("trailing garbage") {
    std::ofstream(p, std::ios::binary | std::ios::app) << "zz";
    CHECK_THROWS_AS(read_field(p), std::runtime_error);
  }
  SECTION("frequency-space fields are refused") {
    ComplexField hat = forward_transform(f);
    CHECK_THROWS_AS(write_field(p, hat), std::invalid_argument);
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(read_field(scratch() / "nope.bin"), std::runtime_error);
  }
}

TEST_CASE("csv writer: fixed format, deterministic bytes, ragged guard") {
  const fs::path a = scratch() / "a.csv", b = scratch() / "b.csv";
  std::vector<std::string> header = {"t", "value"};
  std::vector<std::vector<double>> rows = {{1.0, 0.1}, {2.5, 1e-17}};
  write_csv(a, header, rows);
  write_csv(b, header, rows);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) ==
        "t,value\n1,0.10000000000000001\n2.5,1.0000000000000001e-17\n");
  rows.push_back({3.0});
  CHECK_THROWS_AS(write_csv(a, header, rows), std::invalid_argument);
}

TEST_CASE("config parsing: defaults, validation, derived settings") {
  RunConfig c = parse_config(nlohmann::json::object());
  CHECK(c.grid.n() == 64);
  CHECK(c.b == 0.45);
  CHECK(c.pairs.size() == 3);
  CHECK(c.pairs[0].q == inf);
  CHECK(c.effective_T1() == 12.0);  // min(3 * 4, 64 / 4)
  CHECK(c.effective_t_out() == c.t_min);
  CHECK(c.effective_knots() == decay_knots(4.0, 64.0));

  SECTION("auto terminal-cutoff rule tracks the window") {
    nlohmann::json u = {{"phase", {{"t_min", 1.0}, {"T_end", 2.0}}}};
    CHECK(parse_config(u).effective_T1() == 1.0);  // clamped from 0.5
    u["phase"]["T_end"] = 64.0;
    CHECK(parse_config(u).effective_T1() == 3.0);
    u["phase"]["T1"] = 8.0;
    CHECK(parse_config(u).effective_T1() == 8.0);
  }

  SECTION("rejections") {
    auto bad = [](nlohmann::json u) {
      CHECK_THROWS_AS(parse_config(u), ConfigError);
    };
    bad({{"scattering", {{"b", 0.6}}}});
    bad({{"scattering", {{"b", 0.25}}}});
    bad({{"coupling", -1.0}});
    bad({{"no_such_section", 1}});
    bad({{"grid", {{"bad_key", 1}}}});
    bad({{"datum", {{"rho0", 0.2}}}});  // support sits below c0
    bad({{"datum", {{"sigma", 0.0}}}});
    bad({{"phase", {{"t_min", 0.5}}}});
    bad({{"phase", {{"T_end", 2.0}}}});  // below t_min
    bad({{"phase", {{"knots", {4.0, 3.0}}}}});
    bad({{"evolution", {{"dt", 0.0}}}});
    bad({{"diagnostics", {{"pairs", {{3.0, 3.0}}}}}});
    bad({{"grid", {{"n", 7}}}});  // not a transform-friendly size
  }

  SECTION("explicit knots and sample times pass through") {
    nlohmann::json u = {{"phase", {{"knots", {4.0, 8.0, 16.0}}}},
                        {"scattering", {{"sample_times", {4.0, 16.0}}}}};
    RunConfig cc = parse_config(u);
    CHECK(cc.effective_knots() == std::vector<double>{4.0, 8.0, 16.0});
    CHECK(x_norm_spec(cc).sample_times == std::vector<double>{4.0, 16.0});
  }

  SECTION("x-norm spec defaults to a geometric ladder with a finite-q pair") {
    XNormSpec s = x_norm_spec(c);
    CHECK(s.b == c.b);
    CHECK(s.pair.q == 4.0);
    REQUIRE(s.sample_times.size() == 4);
    CHECK(s.sample_times.front() == c.T);
    CHECK(s.sample_times.back() == 64.0);
  }
}

TEST_CASE("overrides: dotted paths, JSON coercion, bad specs") {
  nlohmann::json doc = nlohmann::json::object();
  apply_override(doc, "evolution.dt=0.125");
  apply_override(doc, "grid.n=48");
  apply_override(doc, "datum.path=some/file.bin");
  apply_override(doc, "phase.free_potential=true");
  CHECK(doc["evolution"]["dt"] == 0.125);
  CHECK(doc["grid"]["n"] == 48);
  CHECK(doc["datum"]["path"] == "some/file.bin");
  CHECK(doc["phase"]["free_potential"] == true);
  RunConfig c = parse_config(doc);
  CHECK(c.evolution.dt == 0.125);
  CHECK(c.grid.n() == 48);
  CHECK(c.datum_path == "some/file.bin");

  CHECK_THROWS_AS(apply_override(doc, "no_equals"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "=5"), ConfigError);
  apply_override(doc, "typo_key.x=1");
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("datum from file: round trip through the binary format") {
  GridSpec g(32, 2.0);
  ComplexField shell(g, Space::position);
  shell.fill([](double x, double y, double z) {
    const double r = std::sqrt(x * x + y * y + z * z);
    return cplx(0.05 * std::exp(-std::pow((r - 1.3) / 0.1, 2.0)) *
                    (r < 0.3 ? 0.0 : 1.0),
                0.0);
  });
  const fs::path p = scratch() / "datum.bin";
  write_field(p, shell);

  nlohmann::json u = {{"datum", {{"path", p.string()}}}};
  RunConfig c = parse_config(u);
  ScatteringDatum d = build_datum(c);
  CHECK(d.l2_norm == Catch::Approx(shell.norm_l2()).epsilon(1e-12));
  CHECK(d.c0 == 0.3);

  SECTION("support violation in the file is a config rejection") {
    ComplexField bad(g, Space::position);
    bad.fill([](double x, double y, double z) {
      return cplx(0.05 * std::exp(-4.0 * (x * x + y * y + z * z)), 0.0);
    });
    const fs::path pb = scratch() / "bad_datum.bin";
    write_field(pb, bad);
    nlohmann::json ub = {{"datum", {{"path", pb.string()}}}};
    CHECK_THROWS_AS(build_datum(parse_config(ub)), ConfigError);
  }
}

#ifdef HARTREE_LAB_PATH

TEST_CASE("driver: exit codes and byte-identical reruns") {
  const fs::path out = scratch() / "runs";
  fs::remove_all(out);
  const std::string base = "phase-solve --output ";

  SECTION("certified phase run exits zero and archives its artifacts") {
    const fs::path cfg = scratch() / "phase.json";
    std::ofstream(cfg) << R"({
      "grid": {"n": 16, "L": 10.0},
      "datum": {"rho0": 4.0, "sigma": 0.5, "c0": 2.0},
      "phase": {"T1": 64.0, "t_min": 1.0, "T_end": 16.0,
                "launch_slope_min": 0.0, "support_slope": 0.0}
    })";
    REQUIRE(run_tool("phase-solve --config " + cfg.string() + " --output " +
                     (out / "a").string()) == 0);
    CHECK(fs::exists(out / "a" / "phase-solve" / "verdicts.csv"));
    CHECK(fs::exists(out / "a" / "phase-solve" / "resolved_config.json"));
    CHECK(fs::exists(out / "a" / "phase-solve" / "phase_certificate.csv"));

    // identical config -> identical bytes
    REQUIRE(run_tool("phase-solve --config " + cfg.string() + " --output " +
                     (out / "b").string()) == 0);
    CHECK(slurp(out / "a" / "phase-solve" / "phase_certificate.csv") ==
          slurp(out / "b" / "phase-solve" / "phase_certificate.csv"));
    CHECK(slurp(out / "a" / "phase-solve" / "verdicts.csv") ==
          slurp(out / "b" / "phase-solve" / "verdicts.csv"));
  }

  SECTION("config errors exit 2") {
    CHECK(run_tool(base + (out / "c").string() +
                   " --override scattering.b=0.6") == 2);
    CHECK(run_tool("phase-solve --config /no/such/file.json --output " +
                   (out / "c").string()) == 2);
    CHECK(run_tool(base + (out / "c").string() + " --override bogus.key=1") ==
          2);
  }

  SECTION("a terminal cutoff forced too small fails numerically: exit 3") {
    CHECK(run_tool(base + (out / "d").string() +
                   " --override phase.T1=1.5 --override phase.t_min=2"
                   " --override phase.T_end=20"
                   " --override phase.launch_slope_min=0"
                   " --override phase.support_slope=0"
                   " --override grid.n=32 --override grid.L=24") == 3);
  }

  SECTION("unknown subcommand is a usage error") {
    CHECK(run_tool("frobnicate") != 0);
  }
}

#endif  // HARTREE_LAB_PATH
