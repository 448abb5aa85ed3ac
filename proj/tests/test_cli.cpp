#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "skewmeas/construction.hpp"
#include "skewmeas/io.hpp"
#include "skewmeas/spectrum.hpp"

using namespace skewmeas;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI binary with stderr redirected into a scratch file; stdout is
// captured through a pipe.
RunResult run_cli(const std::string& args, const std::string& err_path = "") {
  std::string cmd = std::string(SKEWMEAS_CLI_PATH) + " " + args;
  cmd += err_path.empty() ? " 2>/dev/null" : " 2>" + err_path;
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) res.out.append(buf, got);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "skewmeas_cli_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = scratch_dir() / name;
  std::ofstream out(p, std::ios::binary);
  out << body;
  return p;
}

std::string reference_config() {
  return write_config("reference.json", R"({
    "stages": [
      {"s": 3, "a": 1, "b": 2, "digits": [0, 1], "eps": "1/2"},
      {"s": 3, "a": 7, "b": 8, "digits": [0, 1], "eps": "1/3"}
    ],
    "provenance": "reference"
  })")
      .string();
}

Schedule reference_schedule() {
  Schedule sched;
  StageParams s1;
  s1.s = 3;
  s1.a = 1;
  s1.b = 2;
  s1.digits = make_digit_set(3, {0, 1});
  s1.eps = Rat(1, 2);
  StageParams s2;
  s2.s = 3;
  s2.a = 7;
  s2.b = 8;
  s2.digits = make_digit_set(3, {0, 1});
  s2.eps = Rat(1, 3);
  sched.stages = {s1, s2};
  sched.provenance = "reference";
  derive_stage_quantities(sched);
  return sched;
}

// Data lines of a CSV artifact: comment header and column row stripped.
std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  bool seen_columns = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_columns) {
      seen_columns = true;
      continue;
    }
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) fields.push_back(f);
  return fields;
}

}  // namespace

TEST_CASE("order query prints the bare value", "[cli]") {
  const RunResult r = run_cli("nt ord 2 9");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "6\n");
  const RunResult r2 = run_cli("nt ord 2 7");
  CHECK(r2.out == "3\n");
  const RunResult r3 = run_cli("nt ord 2 6561");
  CHECK(r3.out == "4374\n");

  const RunResult f = run_cli("nt factor 5040");
  const Json j = Json::parse(f.out);
  REQUIRE(j.at("factors").size() == 4);
  CHECK(j.at("factors")[0].at("prime") == 2);
  CHECK(j.at("factors")[0].at("exp") == 4);
  CHECK(j.at("factors")[3].at("prime") == 7);
}

TEST_CASE("validation reports and exit codes", "[cli]") {
  const std::string ref = reference_config();

  const RunResult r = run_cli("validate " + ref);
  CHECK(r.exit_code == 1);  // the reference schedule fails the ratio check
  const Json j = Json::parse(r.out);
  CHECK(j.at("meta").at("tool") == kToolVersion);
  CHECK(j.at("meta").at("schema") == kSchemaVersion);
  CHECK(j.at("meta").at("schedule") ==
        schedule_hash(reference_schedule()));
  CHECK(j.at("depth") == 2);
  const Json& checks = j.at("report").at("checks");
  CHECK(checks.at("abs").at("pass") == true);
  CHECK(checks.at("growth3").at("pass") == true);
  CHECK(checks.at("growth16").at("pass") == true);
  CHECK(checks.at("ratio_to_zero").at("pass") == false);
  CHECK(j.at("report").at("divergence_sums").at("3") == "5/6");

  // A widening-gap variant satisfies every hypothesis.
  const std::string good = write_config("good.json", R"({
    "stages": [
      {"s": 3, "a": 1, "b": 2, "digits": [0, 1], "eps": "1/2"},
      {"s": 3, "a": 7, "b": 16, "digits": [0, 1], "eps": "1/3"}
    ]
  })")
                               .string();
  const RunResult g = run_cli("validate " + good);
  CHECK(g.exit_code == 0);
  CHECK(Json::parse(g.out).at("report").at("pass") == true);

  const std::string err = (scratch_dir() / "err.json").string();
  const RunResult missing = run_cli("validate /nonexistent/cfg.json", err);
  CHECK(missing.exit_code == 3);
  CHECK(Json::parse(slurp(err)).at("error") == "io");

  const std::string empty =
      write_config("empty.json", R"({"stages": []})").string();
  const RunResult bad = run_cli("validate " + empty, err);
  CHECK(bad.exit_code == 1);
  CHECK(Json::parse(slurp(err)).at("error") == "validation");

  const RunResult budget =
      run_cli("build " + ref + " --stage 2 --leaf-budget 10", err);
  CHECK(budget.exit_code == 2);
  CHECK(Json::parse(slurp(err)).at("error") == "budget");

  const RunResult usage = run_cli("spectrum " + ref + " --stage 2", err);
  CHECK(usage.exit_code == 1);
  CHECK(Json::parse(slurp(err)).at("error") == "usage");
}

TEST_CASE("artifacts are byte-identical across reruns", "[cli]") {
  const std::string ref = reference_config();
  const fs::path dir = scratch_dir();

  const std::string spec_a = (dir / "spec_a.csv").string();
  const std::string spec_b = (dir / "spec_b.csv").string();
  REQUIRE(run_cli("spectrum " + ref + " --stage 2 --xi-max 150 --out " +
                  spec_a)
              .exit_code == 0);
  REQUIRE(run_cli("spectrum " + ref + " --stage 2 --xi-max 150 --out " +
                  spec_b)
              .exit_code == 0);
  CHECK(slurp(spec_a) == slurp(spec_b));

  const std::string samp_a = (dir / "samp_a.csv").string();
  const std::string samp_b = (dir / "samp_b.csv").string();
  const std::string samp_c = (dir / "samp_c.csv").string();
  REQUIRE(run_cli("sample " + ref +
                  " --stage 2 --count 50 --seed 42 --out " + samp_a)
              .exit_code == 0);
  REQUIRE(run_cli("sample " + ref +
                  " --stage 2 --count 50 --seed 42 --out " + samp_b)
              .exit_code == 0);
  REQUIRE(run_cli("sample " + ref +
                  " --stage 2 --count 50 --seed 43 --out " + samp_c)
              .exit_code == 0);
  CHECK(slurp(samp_a) == slurp(samp_b));
  CHECK(slurp(samp_a) != slurp(samp_c));

  // Envelope output must not depend on the worker count.
  const std::string env_a = (dir / "env_a.json").string();
  const std::string env_b = (dir / "env_b.json").string();
  REQUIRE(run_cli("envelope " + ref +
                  " --stage 2 --xi-max 200 --threads 1 --out " + env_a)
              .exit_code == 0);
  REQUIRE(run_cli("envelope " + ref +
                  " --stage 2 --xi-max 200 --threads 4 --out " + env_b)
              .exit_code == 0);
  CHECK(slurp(env_a) == slurp(env_b));

  const std::string del_a = (dir / "del_a.csv").string();
  const std::string del_b = (dir / "del_b.csv").string();
  REQUIRE(run_cli("del " + ref +
                  " --stage 2 --n-max 12 --base 2 --split-stage 1 --out " +
                  del_a)
              .exit_code == 0);
  REQUIRE(run_cli("del " + ref +
                  " --stage 2 --n-max 12 --base 2 --split-stage 1 --out " +
                  del_b)
              .exit_code == 0);
  CHECK(slurp(del_a) == slurp(del_b));
}

TEST_CASE("leaf table matches the library build", "[cli]") {
  const std::string ref = reference_config();
  const RunResult r = run_cli("build " + ref + " --stage 1");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("# skewmeas") == 0);
  CHECK(r.out.find("# stage: 1\n") != std::string::npos);
  CHECK(r.out.find("# leaves: 6\n") != std::string::npos);
  CHECK(r.out.find("left,weight,favoured,lineage\n") != std::string::npos);

  const auto lines = data_lines(r.out);
  const StageMeasure meas = build(reference_schedule(), 1);
  REQUIRE(lines.size() == meas.leaves.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    REQUIRE(f.size() == 4);
    CHECK(parse_rat(f[0]) == meas.leaves[i].left);
    CHECK(parse_rat(f[1]) == meas.leaves[i].weight);
    CHECK(f[2] == (meas.leaves[i].favoured ? "1" : "0"));
    CHECK(f[3] == lineage_string(meas.leaves[i].lineage));
  }
}

TEST_CASE("spectrum rows match the evaluator", "[cli]") {
  const std::string ref = reference_config();
  const RunResult r =
      run_cli("spectrum " + ref + " --stage 2 --xi-min 5 --xi-max 20");
  REQUIRE(r.exit_code == 0);

  const auto lines = data_lines(r.out);
  REQUIRE(lines.size() == 16);
  const Schedule sched = reference_schedule();
  SpectrumEvaluator eval(sched, 2, {});
  for (const std::string& line : lines) {
    const auto f = split_fields(line);
    REQUIRE(f.size() == 9);
    const Int xi = parse_int(f[0]);
    const SpectrumRow row = eval.row(xi);
    // 17-significant-digit formatting round-trips doubles exactly.
    CHECK(std::stod(f[1]) == row.coeff.real());
    CHECK(std::stod(f[2]) == row.coeff.imag());
    CHECK(std::stod(f[3]) == std::abs(row.coeff));
    CHECK(std::stoi(f[4]) == row.band);
    CHECK(std::stoi(f[5]) == row.subband);
    CHECK(std::stod(f[6]) == row.envelope);
    CHECK(f[7] == row.method);
    CHECK(std::stod(f[8]) == row.error_budget);
  }
}

TEST_CASE("envelope report and row dump", "[cli]") {
  const std::string ref = reference_config();
  const fs::path rows = scratch_dir() / "env_rows.csv";
  const RunResult r = run_cli("envelope " + ref +
                              " --stage 2 --xi-max 200 --rows " +
                              rows.string());
  REQUIRE(r.exit_code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j.at("report").at("xi_lo") == 6);
  CHECK(j.at("report").at("xi_hi") == 200);
  REQUIRE(j.at("report").at("bands").size() == 1);
  const Json& band = j.at("report").at("bands")[0];
  CHECK(band.at("band") == 1);
  CHECK(band.at("count") == 195);
  CHECK(band.at("max_ratio").get<double>() < 1.0);
  CHECK(band.at("envelope_bound").get<double>() == Approx(2.0523163).epsilon(1e-6));

  const std::string dump = slurp(rows);
  CHECK(data_lines(dump).size() == 195);
  CHECK(dump.find("xi,re,im,abs,band,subband,envelope_bound,method,error_budget") !=
        std::string::npos);
}

TEST_CASE("sample artifact format", "[cli]") {
  const std::string ref = reference_config();
  const RunResult r =
      run_cli("sample " + ref + " --stage 2 --count 5 --seed 42");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("# seed: 42\n") != std::string::npos);
  CHECK(r.out.find("value,lineage\n") != std::string::npos);

  const auto lines = data_lines(r.out);
  REQUIRE(lines.size() == 5);
  const std::regex row_re(
      R"(^\d+\.\d{30},\d+:\d+;\d+:\d+$)");
  for (const std::string& line : lines)
    CHECK(std::regex_match(line, row_re));

  // Seeded draws agree with the library exactly.
  const auto pts = sample(reference_schedule(), 2, 5, 42);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto f = split_fields(lines[i]);
    CHECK(f[0] == format_fixed30(pts[i].x));
    CHECK(f[1] == lineage_string(pts[i].lineage));
  }

  // Sampling without a seed is rejected at parse time.
  const RunResult noseed = run_cli("sample " + ref + " --stage 2 --count 5");
  CHECK(noseed.exit_code == 1);
}

TEST_CASE("digit bias statistics", "[cli]") {
  const std::string ref = reference_config();
  const RunResult r = run_cli("digit-bias " + ref +
                              " --stage 2 --count 400 --seed 7 "
                              "--positions 1,2 --block-len 2");
  REQUIRE(r.exit_code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j.at("meta").at("seed") == 7);
  const Json& st = j.at("stats");
  CHECK(st.at("base") == 3);
  CHECK(st.at("sample_count") == 400);
  std::uint64_t total = 0;
  for (const Json& c : st.at("counts").at("1")) total += c.get<std::uint64_t>();
  CHECK(total == 400);
  std::uint64_t blocks = 0;
  for (const Json& b : st.at("block_counts"))
    blocks += b.at("count").get<std::uint64_t>();
  CHECK(blocks == 400);
}

TEST_CASE("orbit average and correlation series", "[cli]") {
  const RunResult w = run_cli("weyl --x 1/2 --base 3 --n 4096");
  REQUIRE(w.exit_code == 0);
  const Json jw = Json::parse(w.out);
  CHECK(jw.at("abs").get<double>() == Approx(1.0).margin(1e-12));
  CHECK(jw.at("re").get<double>() == Approx(-1.0).margin(1e-12));

  const std::string ref = reference_config();
  const RunResult d =
      run_cli("del " + ref + " --stage 2 --n-max 8 --base 2 --split-stage 1");
  REQUIRE(d.exit_code == 0);
  CHECK(d.out.find("N,inner_sum,partial_sum,inner_abs,partial_abs,"
                   "u_inner,u_partial,v_inner,v_partial\n") !=
        std::string::npos);
  const auto lines = data_lines(d.out);
  REQUIRE(lines.size() == 8);
  const auto first = split_fields(lines[0]);
  CHECK(first[0] == "1");
  CHECK(std::stod(first[1]) == 1.0);
  CHECK(std::stod(first[2]) == 1.0);

  const RunResult plain =
      run_cli("del " + ref + " --stage 2 --n-max 8 --base 2");
  CHECK(plain.out.find("N,inner_sum,partial_sum\n") != std::string::npos);
  CHECK(split_fields(data_lines(plain.out)[0]).size() == 3);
}

TEST_CASE("index classification output", "[cli]") {
  const std::string ref = reference_config();
  const RunResult r = run_cli("classify " + ref +
                              " --stage 2 --u 3 --v 3 --n 25 --base 2 --k 1");
  REQUIRE(r.exit_code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j.at("level1") == "U2");
  CHECK(j.at("level2") == "V2");
  CHECK(j.contains("level3"));
  CHECK(j.at("K") == 1);

  const RunResult early = run_cli("classify " + ref +
                                  " --stage 2 --u 1 --v 2 --n 25 --base 2");
  const Json je = Json::parse(early.out);
  CHECK(je.at("level1") == "U1");
  CHECK(je.at("level2") == "V11");
  CHECK_FALSE(je.contains("level3"));
}

TEST_CASE("number-theoretic set queries", "[cli]") {
  const RunResult o = run_cli("nt oset 20 1 5 2");
  const Json jo = Json::parse(o.out);
  CHECK(jo.at("count") == 5);  // ord(2 mod 5) = 4: v = 0,4,8,12,16
  CHECK(jo.at("set")[1] == 4);
  CHECK(jo.at("pass") == true);

  const RunResult x = run_cli("nt xset 1 1 2 3 2");
  const Json jx = Json::parse(x.out);
  CHECK(jx.at("pass") == true);
  CHECK(jx.at("set")[0] == 0);

  const RunResult e = run_cli("nt eset 1 2 3 3 0");
  CHECK(Json::parse(e.out).at("pass") == true);

  const RunResult dd = run_cli("nt dset 3 4");
  const Json jd = Json::parse(dd.out);
  CHECK(jd.at("pass") == true);
  CHECK(jd.at("count").get<int>() >= 1);

  const RunResult k = run_cli("nt kappa 3");
  CHECK(std::stod(k.out) == Approx(0.0356839).epsilon(1e-4));
}

TEST_CASE("certification suites and gating", "[cli]") {
  const std::string ref = reference_config();
  const RunResult r = run_cli("certify " + ref + " --xi-max 300");
  REQUIRE(r.exit_code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j.at("pass") == true);
  REQUIRE(j.at("suites").size() == 4);
  for (const Json& s : j.at("suites")) CHECK(s.at("status") == "pass");

  // A schedule violating the cubic growth hypothesis cannot support the
  // envelope bound; the suite reports itself as skipped and exits cleanly.
  const std::string weak = write_config("weak.json", R"({
    "stages": [
      {"s": 3, "a": 1, "b": 2, "digits": [0, 1], "eps": "1/2"},
      {"s": 3, "a": 5, "b": 6, "digits": [0, 1], "eps": "1/3"}
    ]
  })")
                               .string();
  const RunResult gated = run_cli("certify " + weak + " --suite envelope");
  CHECK(gated.exit_code == 0);
  const Json jg = Json::parse(gated.out);
  REQUIRE(jg.at("suites").size() == 1);
  CHECK(jg.at("suites")[0].at("status") == "skipped");
  CHECK(jg.at("suites")[0].at("reason").get<std::string>().find(
            "cubic growth") != std::string::npos);
  CHECK(jg.at("pass") == true);

  const std::string err = (scratch_dir() / "suite_err.json").string();
  const RunResult unknown =
      run_cli("certify " + ref + " --suite nonsense", err);
  CHECK(unknown.exit_code == 1);
  CHECK(Json::parse(slurp(err)).at("error") == "validation");
}

TEST_CASE("help text and version", "[cli]") {
  const RunResult v = run_cli("--version");
  CHECK(v.exit_code == 0);
  CHECK(v.out.find(kToolVersion) != std::string::npos);

  const RunResult h = run_cli("--help");
  CHECK(h.exit_code == 0);
  for (const char* name :
       {"validate", "build", "spectrum", "envelope", "frostman", "sample",
        "digit-bias", "weyl", "del", "classify", "nt", "certify"})
    CHECK(h.out.find(name) != std::string::npos);
  CHECK(h.out.find("SKEWMEAS_THREADS") != std::string::npos);

  // Every spectrum CSV column is documented.
  const RunResult hs = run_cli("spectrum --help");
  for (const char* col : {"xi", "re", "im", "abs", "band", "subband",
                          "envelope_bound", "method", "error_budget"})
    CHECK(hs.out.find(col) != std::string::npos);

  const RunResult hd = run_cli("del --help");
  for (const char* col : {"inner_sum", "partial_sum", "inner_abs",
                          "u_inner", "v_partial"})
    CHECK(hd.out.find(col) != std::string::npos);

  const RunResult hb = run_cli("build --help");
  for (const char* col : {"left", "weight", "favoured", "lineage"})
    CHECK(hb.out.find(col) != std::string::npos);

  const RunResult hsam = run_cli("sample --help");
  CHECK(hsam.out.find("value") != std::string::npos);
  CHECK(hsam.out.find("lineage") != std::string::npos);
}

TEST_CASE("generator configs load", "[cli]") {
  const std::string apx = write_config("appendix.json", R"({
    "generator": {"kind": "appendix", "A0": 4, "depth": 16}
  })")
                              .string();
  const RunResult r = run_cli("validate " + apx);
  const Json j = Json::parse(r.out);
  CHECK(j.at("depth") == 16);
  CHECK(j.at("provenance") == "appendix");
  CHECK(j.at("report").at("checks").at("abs").at("pass") == true);
  CHECK(j.at("report").at("checks").at("growth3").at("pass") == true);

  const std::string tbl = write_config("table1.json", R"({
    "generator": {"kind": "table1", "bases": [3, 4], "depth": 4}
  })")
                              .string();
  const RunResult t = run_cli("validate " + tbl);
  CHECK(Json::parse(t.out).at("provenance") == "table1");

  // Oversized exponents may be spelled as powers.
  const std::string pw = write_config("pow.json", R"({
    "stages": [
      {"s": 3, "a": 1, "b": 2, "digits": [0, 1], "eps": "1/2"},
      {"s": 3, "a": {"pow": {"base": 3, "exp": 4}}, "b": 100,
       "digits": [0, 1], "eps": "1/3"}
    ]
  })")
                              .string();
  const RunResult p = run_cli("validate " + pw);
  const Json jp = Json::parse(p.out);
  CHECK(jp.at("report").at("checks").at("abs").at("pass") == true);
}
