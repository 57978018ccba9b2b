#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Workspace {
 public:
  Workspace() {
    static int counter = 0;
    root_ = fs::temp_directory_path() / ("driftmon_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }

  fs::path operator/(const std::string& name) const { return root_ / name; }

  Run run(const std::string& args) const {
    const fs::path out = root_ / "stdout.txt";
    const fs::path err = root_ / "stderr.txt";
    const std::string cmd = std::string(DRIFTMON_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

 private:
  fs::path root_;
};

std::size_t count_pgm(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".pgm";
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate writes frames, manifest, truth and resolved options") {
    Workspace ws;
    const Run r = ws.run("simulate --scenario s1 --regime oc --n 128 --horizon 60 --sigma 0.15 --seed 7 --out " +
                         (ws / "sim").string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("manifest.csv") != std::string::npos);
    CHECK(count_pgm(ws / "sim") == 60);
    CHECK(fs::exists(ws / "sim" / "truth.csv"));
    const std::string resolved = slurp(ws / "sim" / "resolved_config.ini");
    CHECK(resolved.find("sigma=0.15") != std::string::npos);
    CHECK(resolved.find("change-time=20") != std::string::npos);
  }

  TEST_CASE("simulate is byte-for-byte reproducible") {
    Workspace ws;
    const std::string flags = "simulate --scenario s3 --regime oc --n 16 --horizon 5 --seed 3 --out ";
    REQUIRE(ws.run(flags + (ws / "a").string()).code == 0);
    REQUIRE(ws.run(flags + (ws / "b").string()).code == 0);
    for (const auto& e : fs::directory_iterator(ws / "a")) {
      if (e.path().filename() == "resolved_config.ini") continue;
      CHECK(slurp(e.path()) == slurp(ws / "b" / e.path().filename()));
    }
  }

  TEST_CASE("invalid flags exit 1 with usage text") {
    Workspace ws;
    const Run r = ws.run("simulate --sigma -1 --out " + (ws / "x").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(ws.run("").code == 1);
    CHECK(ws.run("frobnicate").code == 1);
  }

  TEST_CASE("a config file supplies defaults that flags override") {
    Workspace ws;
    {
      std::ofstream cfg(ws / "sim.ini");
      cfg << "scenario=s2\nn=12\nhorizon=3\nsigma=0.3\n";
    }
    REQUIRE(ws.run("simulate --config " + (ws / "sim.ini").string() + " --sigma 0.05 --out " + (ws / "c").string())
                .code == 0);
    const std::string truth = slurp(ws / "c" / "truth.csv");
    CHECK(truth.find("s2,ic,12,0.05") != std::string::npos);
    CHECK(count_pgm(ws / "c") == 3);
  }

  TEST_CASE("monitor exits 2 on the first frame after a doubled drift") {
    Workspace ws;
    REQUIRE(ws.run("simulate --scenario s1 --regime oc --n 64 --horizon 24 --seed 7 --out " + (ws / "oc").string())
                .code == 0);
    const Run r = ws.run("monitor --manifest " + (ws / "oc" / "manifest.csv").string() +
                         " --intensity-range=-1,2 --kappa 0.9 --q0 1.3 --theta-sq 0.0224 --chart " +
                         (ws / "chart.csv").string());
    CHECK(r.code == 2);
    CHECK(r.out.find("k=21") != std::string::npos);
    const std::string chart = slurp(ws / "chart.csv");
    CHECK(chart.rfind("k,t,lambda,increment,Q,signal\n21,21,", 0) == 0);
    CHECK(fs::exists(ws / "chart.csv.config"));
  }

  TEST_CASE("monitor errors") {
    Workspace ws;
    const Run missing = ws.run("monitor --manifest " + (ws / "nope.csv").string() + " --kappa 1 --q0 1 --theta-sq 1");
    CHECK(missing.code == 1);
    CHECK(missing.err.find("nope.csv") != std::string::npos);
    REQUIRE(ws.run("simulate --n 8 --horizon 20 --out " + (ws / "s").string()).code == 0);
    CHECK(ws.run("monitor --manifest " + (ws / "s" / "manifest.csv").string() + " --kappa 1 --q0 1 --theta-sq 1")
              .code == 1);
    CHECK(ws.run("monitor --manifest " + (ws / "s" / "manifest.csv").string() + " --m0 5 --q0 1 --theta-sq 1").code ==
          1);
  }

  TEST_CASE("denoise and impute smoke runs") {
    Workspace ws;
    REQUIRE(ws.run("simulate --n 16 --horizon 20 --out " + (ws / "s").string()).code == 0);
    const std::string manifest = (ws / "s" / "manifest.csv").string();
    const Run d = ws.run("denoise --manifest " + manifest + " --intensity-range=-1,2 --m0 20 --frame 19 --out " +
                         (ws / "d.pgm").string());
    CHECK(d.code == 0);
    CHECK(fs::exists(ws / "d.pgm"));
    CHECK(fs::exists(ws / "d.pgm.config"));

    {
      std::ofstream gap(ws / "s" / "gap.csv");
      gap << "filename,time\nframe_0001.pgm,1\nframe_0002.pgm,2\nframe_0005.pgm,5\nframe_0006.pgm,6\n";
    }
    const Run i = ws.run("impute --manifest " + (ws / "s" / "gap.csv").string() +
                         " --intensity-range=-1,2 --times 1,2,3,4,5,6 --out " + (ws / "i").string());
    CHECK(i.code == 0);
    CHECK(count_pgm(ws / "i") == 6);
  }

  TEST_CASE("calibrate and eval chain through a calibration file") {
    Workspace ws;
    const std::string common = " --n 12 --m0 4 --theta-frames 4 --directions 16 --seed 5";
    // Small frames give small increments, so the allowance is small too.
    const Run c = ws.run("calibrate --scenario s1 --kappa 0.05 --arl0 4 --reps 8" + common + " --out " +
                         (ws / "cal.txt").string() + " --report " + (ws / "steps.csv").string());
    REQUIRE(c.code == 0);
    CHECK(c.out.find("q0=") != std::string::npos);
    CHECK(c.out.find("achieved ARL=") != std::string::npos);
    const std::string cal = slurp(ws / "cal.txt");
    CHECK(cal.find("kappa=0.05") != std::string::npos);
    CHECK(cal.find("theta_sq=") != std::string::npos);

    const Run e = ws.run("eval --scenario s1 --reps 4 --max-run-length 10" + common + " --calibration " +
                         (ws / "cal.txt").string() + " --report " + (ws / "rep.csv").string() + " --summary " +
                         (ws / "sum.csv").string());
    REQUIRE(e.code == 0);
    const std::string rep = slurp(ws / "rep.csv");
    CHECK(rep.rfind("rep,seed,regime,run_length,censored,delay\n", 0) == 0);
    std::size_t rows = 0;
    for (char ch : rep) rows += ch == '\n';
    CHECK(rows == 9);
    CHECK(slurp(ws / "sum.csv").rfind("label,regime,reps,arl,censored,delay,false_alarms\ns1,ic,4,", 0) == 0);
  }
}
