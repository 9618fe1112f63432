#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <wigprop/cli.hpp>

using namespace wigprop;
namespace fs = std::filesystem;

namespace {

ScalarField sample(int np, int nq) {
  ScalarField f(PhaseGrid(-1.5, 2.5, np, -0.3, 0.7, nq));
  for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = std::sin(0.37 * k) * std::pow(10.0, static_cast<int>(k % 7) - 3);
  return f;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("wigprop_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  args.insert(args.begin(), "wigprop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int rc = run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return rc;
}

}  // namespace

TEST(Wpg, RoundTripIsBitExact) {
  const ScalarField f = sample(5, 3);
  const GridFileHeader h = make_header(f, "propagator", "semiclassical", 0.6283185307179586, {0.0, 0.1}, "morse m=0.5");
  const auto [h2, f2] = decode_field(encode_field(h, f));
  EXPECT_EQ(h, h2);
  EXPECT_EQ(f.values, f2.values);
  EXPECT_TRUE(f2.grid.same_as(f.grid));
  const fs::path p = scratch("rt.wpg");
  write_field(p.string(), h, f);
  EXPECT_EQ(read_field(p.string()).second.values, f.values);
}

TEST(Wpg, PayloadLayout) {
  ScalarField f(PhaseGrid(0, 2, 2, 0, 2, 2));
  f.values = {1.0, -2.0, 0.5, 3.0};
  const std::string s = encode_field(make_header(f, "wigner", "exact", 0, {0, 0}, "x"), f);
  const auto blank = s.find("\n\n");
  ASSERT_NE(blank, std::string::npos);
  EXPECT_EQ(s.size() - (blank + 2), 32u);
  EXPECT_EQ(s.rfind("magic=WPG1\n", 0), 0u);
  // 1.0 little-endian: 00 .. 00 f0 3f
  EXPECT_EQ(static_cast<unsigned char>(s[blank + 2 + 6]), 0xf0);
  EXPECT_EQ(static_cast<unsigned char>(s[blank + 2 + 7]), 0x3f);
  // p index slow: second value is (p0, q1)
  EXPECT_EQ(decode_field(s).second.at(0, 1), -2.0);
}

TEST(Wpg, Rejections) {
  const ScalarField f = sample(2, 2);
  const std::string good = encode_field(make_header(f, "propagator", "exact", 0, {0, 0}, "m"), f);
  std::string bad = good;
  bad.replace(bad.find("WPG1"), 4, "WPG2");
  EXPECT_THROW(decode_field(bad), NumericError);
  EXPECT_THROW(decode_field(good.substr(0, good.size() - 1)), NumericError);
  EXPECT_THROW(decode_field(good + "x"), NumericError);
  bad = good;
  const double nan = std::nan("");
  std::memcpy(bad.data() + bad.size() - 8, &nan, 8);
  EXPECT_THROW(decode_field(bad), NumericError);
  bad = good;
  bad.replace(bad.find("kind=propagator"), 15, "kind=potato");
  EXPECT_THROW(decode_field(bad), NumericError);
  bad = good;
  bad.replace(bad.find("encoding=f64le"), 14, "encoding=f32be");
  EXPECT_THROW(decode_field(bad), NumericError);
  bad = good;
  bad.erase(bad.find("t=0\n"), 4);
  EXPECT_THROW(decode_field(bad), NumericError);
  EXPECT_THROW(encode_field(make_header(sample(3, 2), "wigner", "exact", 0, {0, 0}, "m"), f), ConfigError);
}

TEST(Wpg, InfinityIsAllowed) {
  ScalarField f = sample(2, 2);
  f.values[1] = -INFINITY;
  EXPECT_EQ(decode_field(encode_field(make_header(f, "wigner", "exact", 0, {0, 0}, "m"), f)).second.values[1], -INFINITY);
}

TEST(Config, DefaultsAreTheFirstFigure) {
  const RunConfig c = parse_config(slurp(fs::path(WIGPROP_CONFIG_DIR) / "fig1.cfg"));
  const RunConfig d;
  EXPECT_EQ(c.system.mass, d.system.mass);
  EXPECT_EQ(c.np, 128);
  EXPECT_EQ(c.box_n, 1023);
  EXPECT_TRUE(c.quarter);
  EXPECT_NEAR(c.time(), pi / 5, 1e-15);
  EXPECT_EQ(c.origin.q, 0.1);
  EXPECT_EQ(c.res.sigma_p, 0.15);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"fig1.cfg", "fig1_harmonic.cfg", "fig3.cfg"})
    EXPECT_NO_THROW(parse_config(slurp(fs::path(WIGPROP_CONFIG_DIR) / name))) << name;
}

TEST(Config, OverridesAndComments) {
  const RunConfig c = parse_config("mass = 2  # heavier\n\nt=0.3\norigin=0.5,-0.2\n", {{"mass", "4"}, {"masses", "1, 2,3"}});
  EXPECT_EQ(c.system.mass, 4.0);
  EXPECT_FALSE(c.quarter);
  EXPECT_EQ(c.t, 0.3);
  EXPECT_EQ(c.origin.p, 0.5);
  EXPECT_EQ(c.origin.q, -0.2);
  EXPECT_EQ(c.masses, (std::vector<double>{1, 2, 3}));
}

TEST(Config, ErrorsNameTheKey) {
  auto key_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const KeyError& e) {
      return e.key;
    }
    return std::string("none");
  };
  EXPECT_EQ(key_of("mass=-1"), "mass");
  EXPECT_EQ(key_of("bogus=1"), "bogus");
  EXPECT_EQ(key_of("np=abc"), "np");
  EXPECT_EQ(key_of("box_n=1024"), "box_n");
  EXPECT_EQ(key_of("sigma_p=0.1\nsigma_q=0"), "sigma_q");
  EXPECT_EQ(key_of("origin=0,100"), "origin");
  EXPECT_EQ(key_of("potential=quartic"), "potential");
  EXPECT_EQ(key_of("mass=nan"), "mass");
  EXPECT_THROW(parse_config("just words"), ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
  std::string err;
  EXPECT_EQ(run_cli({"exact", "--mass", "-1"}, nullptr, &err), 2);
  EXPECT_NE(err.find("mass"), std::string::npos);
  EXPECT_EQ(run_cli({"exact", "--set", "nonsense=3"}, nullptr, &err), 2);
  EXPECT_NE(err.find("nonsense"), std::string::npos);
  EXPECT_EQ(run_cli({"bogus"}), 2);
  EXPECT_EQ(run_cli({}), 2);
  EXPECT_EQ(run_cli({"exact", "--config", "/nonexistent/x.cfg"}), 2);
  EXPECT_EQ(run_cli({"exact", "--workers", "0", "--set", "workers=0"}), 2);
}

TEST(Cli, NumericFailureExitsThree) {
  // the origin is not a node of the box
  std::string err;
  const std::string out = scratch("num.wpg").string();
  EXPECT_EQ(run_cli({"exact", "--set", "box_n=255", "--set", "box_qmin=-4", "--set", "box_qmax=6", "--origin", "0,0.1333",
                     "--out", out},
                    nullptr, &err),
            2);
  // endpoint outside the window is a numeric failure
  EXPECT_EQ(run_cli({"classical", "--set", "pmin=-0.05", "--set", "pmax=0.05", "--set", "qmin=0", "--set", "qmax=0.5",
                     "--set", "np=8", "--set", "nq=8", "--out", out},
                    nullptr, &err),
            3);
  EXPECT_NE(err.find("numeric failure"), std::string::npos);
}

TEST(Cli, ClassicalWritesFieldAndTrajectory) {
  const fs::path out = scratch("cl.wpg");
  std::string so;
  ASSERT_EQ(run_cli({"classical", "--out", out.string(), "--text-export"}, &so), 0) << so;
  const auto [h, f] = read_field(out.string());
  EXPECT_EQ(h.route, "classical");
  EXPECT_EQ(h.np, 128);
  EXPECT_NEAR(integral(f), 1.0, 1e-12);
  EXPECT_TRUE(fs::exists(scratch("cl.traj")));
  EXPECT_TRUE(fs::exists(out.string() + ".txt"));
}

TEST(Cli, ModularReportsKeys) {
  std::string so;
  ASSERT_EQ(run_cli({"modular", "--set", "potential=free", "--set", "box_n=255", "--set", "box_qmin=-5.1", "--set",
                     "box_qmax=5.1", "--origin", "0.5,0.1", "--t", "0.3"},
                    &so),
            0);
  for (const char* k : {"finite_difference=", "quantum_rhs=", "classical_rhs=", "order=", "quantum_classical_gap="})
    EXPECT_NE(so.find(k), std::string::npos) << k;
}

TEST(Cli, WorkerCountDoesNotChangeBytes) {
  // run the built binary: exact (small box) and semiclassical slices at 1 and 3 workers
  const std::string common = " --set box_n=255 --set box_qmin=-3.98 --set box_qmax=6.22 --set np=32 --set nq=32"
                             " --set qmin=-1.02 --set qmax=2.82 --set scan_n=64 --set scan_extent_p=3 --set scan_extent_q=3 --set monitor=false";
  for (const char* route : {"exact", "semiclassical"}) {
    std::string files[2];
    int k = 0;
    for (int w : {1, 3}) {
      const fs::path out = scratch(std::string(route) + "_w" + std::to_string(w) + ".wpg");
      const std::string cmd = std::string(WIGPROP_CLI) + " " + route + common + " --workers " + std::to_string(w) +
                              " --out " + out.string() + " > /dev/null";
      ASSERT_EQ(std::system(cmd.c_str()), 0) << cmd;
      files[k++] = slurp(out);
    }
    EXPECT_FALSE(files[0].empty());
    EXPECT_EQ(files[0], files[1]) << route;
  }
}
