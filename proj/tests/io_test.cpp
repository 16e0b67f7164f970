#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "ssnt/cli.hpp"
#include "ssnt/io.hpp"
#include "ssnt/synth.hpp"
#include "support.hpp"

using namespace ssnt;
using namespace ssnt::testing;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ssnt_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

io::FormatError::Kind decode_error(const std::vector<unsigned char>& bytes) {
  try {
    io::decode_tensor(bytes);
  } catch (const io::FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode accepted corrupt bytes";
  return io::FormatError::Kind::Magic;
}

// ------------------------------------------------------------ tensor container

TEST(Container, LayoutAndChecksum) {
  Tensor3 t(Dims{1, 1, 2});
  t(0, 0, 0) = 1.0;
  t(0, 0, 1) = -2.5;
  const auto bytes = io::encode_tensor(t);
  ASSERT_EQ(bytes.size(), io::kHeaderSize + 16 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "SSNT1");
  EXPECT_EQ(bytes[5], 1);
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(bytes[23], 2);
  // FNV-1a reference values.
  EXPECT_EQ(io::fnv1a64({}), 0xcbf29ce484222325ULL);
  const unsigned char a[] = {'a'};
  EXPECT_EQ(io::fnv1a64(a), 0xaf63dc4c8601ec8cULL);
}

TEST_F(TempDir, RoundTripIsBitExact) {
  std::mt19937_64 gen(1);
  Tensor3 t = random_tensor(Dims{7, 3, 5}, gen);
  t[0] = std::numeric_limits<double>::denorm_min();
  t[1] = -0.0;
  io::write_tensor(path("t.ssnt"), t);
  const Tensor3 back = io::read_tensor(path("t.ssnt"));
  ASSERT_EQ(back.dims(), t.dims());
  for (Index n = 0; n < t.size(); ++n) EXPECT_EQ(std::signbit(back[n]), std::signbit(t[n]));
  EXPECT_EQ(back, t);
  EXPECT_FALSE(fs::exists(path("t.ssnt.tmp")));
}

TEST(Container, CorruptionKinds) {
  std::mt19937_64 gen(2);
  const auto good = io::encode_tensor(random_tensor(Dims{3, 2, 2}, gen));

  auto flipped = good;
  flipped[io::kHeaderSize + 3] ^= 0x10;
  EXPECT_EQ(decode_error(flipped), io::FormatError::Kind::Checksum);

  auto bad_sum = good;
  bad_sum.back() ^= 0x01;
  EXPECT_EQ(decode_error(bad_sum), io::FormatError::Kind::Checksum);

  auto truncated = good;
  truncated.resize(good.size() - 9);
  EXPECT_EQ(decode_error(truncated), io::FormatError::Kind::Dims);
  EXPECT_EQ(decode_error(std::vector<unsigned char>(good.begin(), good.begin() + 20)), io::FormatError::Kind::Dims);

  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(decode_error(magic), io::FormatError::Kind::Magic);
  EXPECT_EQ(decode_error({}), io::FormatError::Kind::Magic);

  auto version = good;
  version[5] = 2;
  EXPECT_EQ(decode_error(version), io::FormatError::Kind::Version);

  auto zero = good;
  std::fill(zero.begin() + 7, zero.begin() + 15, 0);
  EXPECT_EQ(decode_error(zero), io::FormatError::Kind::Dims);

  auto huge = good;
  std::fill(huge.begin() + 7, huge.begin() + 31, 0xff);
  EXPECT_EQ(decode_error(huge), io::FormatError::Kind::Dims);
}

TEST_F(TempDir, MissingFileIsIoError) {
  EXPECT_THROW(io::read_tensor(path("absent.ssnt")), io::IoError);
  EXPECT_THROW(io::write_tensor(path("no/such/dir/t.ssnt"), Tensor3(Dims{1, 1, 1})), io::IoError);
}

// ------------------------------------------------------------ numbers and CSV

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(io::format_double(std::nan("")), "nan");
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int n = 0; n < 1000; ++n) {
    const double v = u(gen) * std::pow(10.0, n % 40 - 20);
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  }
  EXPECT_TRUE(std::isinf(io::parse_double("inf")));
  EXPECT_TRUE(std::isnan(io::parse_double("nan")));
  EXPECT_THROW(io::parse_double("1.5x"), io::FormatError);
  EXPECT_THROW(io::parse_double(""), io::FormatError);
}

TEST(TensorCsv, RoundTripAndShapeCheck) {
  std::mt19937_64 gen(4);
  const Tensor3 t = random_tensor(Dims{3, 4, 2}, gen);
  const std::string csv = io::tensor_to_csv(t);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 24);
  EXPECT_EQ(io::tensor_from_csv(csv, t.dims()), t);
  EXPECT_THROW(io::tensor_from_csv(csv, Dims{3, 4, 3}), io::FormatError);
  EXPECT_THROW(io::tensor_from_csv("1\nfoo\n", Dims{2, 1, 1}), io::FormatError);
}

Diagnostics sample_record(int it) {
  Diagnostics d;
  d.iteration = it;
  d.rel_err_weights = 1.0 / 3.0;
  d.rel_err_v = 2e-17;
  d.loss = {0.125, std::nextafter(1.0, 2.0), 0.0, 0.125 + std::nextafter(1.0, 2.0)};
  return d;
}

TEST_F(TempDir, DiagnosticsExport) {
  EXPECT_THROW(io::export_diagnostics({}, path("d.csv")), std::invalid_argument);
  EXPECT_FALSE(fs::exists(path("d.csv")));

  io::export_diagnostics({sample_record(1)}, path("d.csv"));
  const std::string text = slurp(path("d.csv"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.substr(0, text.find('\n')), io::kDiagnosticsHeader);

  const std::vector<Diagnostics> h{sample_record(1), sample_record(2), sample_record(3)};
  const auto back = io::parse_diagnostics_csv(io::diagnostics_csv(h));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(back[t].iteration, h[t].iteration);
    EXPECT_EQ(back[t].rel_err_weights, h[t].rel_err_weights);
    EXPECT_EQ(back[t].rel_err_v, h[t].rel_err_v);
    EXPECT_EQ(back[t].loss.total, h[t].loss.total);
    EXPECT_EQ(back[t].loss.l1_lowrank, h[t].loss.l1_lowrank);
    EXPECT_EQ(back[t].loss.l2_fidelity, h[t].loss.l2_fidelity);
    EXPECT_EQ(back[t].loss.tv_penalty, h[t].loss.tv_penalty);
  }
  EXPECT_THROW(io::parse_diagnostics_csv("wrong,header\n1,2\n"), io::FormatError);
}

TEST(MetricsCsv, Format) {
  MetricReport r;
  r.psnr = std::numeric_limits<double>::infinity();
  r.ssim = 1.0;
  r.sam = 0.0;
  EXPECT_EQ(io::metrics_csv(r), "psnr,ssim,sam,peak\ninf,1,0,1\n");
}

// ------------------------------------------------------------ JSON

TEST(Json, ConfigRoundTrip) {
  SolverConfig cfg = default_config(ProblemKind::SCI, Dims{9, 8, 7});
  cfg.activation = ActivationKind::leaky_relu(0.2);
  cfg.regularizer = Regularizer::Sparse;
  cfg.seed = 0xffffffffffffULL;
  cfg.plateau_tol = 1e-5;
  cfg.sci_init.steps = 7;
  const SolverConfig back = io::config_from_json(io::config_to_json(cfg));
  EXPECT_EQ(io::config_to_json(back), io::config_to_json(cfg));
  EXPECT_EQ(back.lambda, cfg.lambda);
  EXPECT_EQ(back.activation, cfg.activation);
  EXPECT_EQ(back.regularizer, cfg.regularizer);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.transformed_dim, 14u);
  EXPECT_EQ(back.sci_init.steps, 7);
}

TEST(Json, ManifestRoundTrip) {
  io::RunManifest m;
  m.command = "complete";
  m.argv = {"complete", "--input", "a b.ssnt"};
  m.config = {{"problem", "tc"}, {"sr", 0.3}};
  m.seed = 42;
  m.started_at = io::utc_timestamp();
  m.finished_at = m.started_at;
  m.diagnostics_path = "x.csv";
  m.metrics = MetricReport{30.5, 0.9, 0.01, 1.0, std::vector<double>{29.0, 32.0}};
  m.normalization = io::Normalization{-3.0, 250.0};
  m.warnings = {"loss increased"};
  const io::RunManifest back = io::parse_manifest(io::serialize_manifest(m));
  EXPECT_EQ(io::manifest_to_json(back), io::manifest_to_json(m));
  EXPECT_EQ(back.argv, m.argv);
  EXPECT_EQ(back.normalization, m.normalization);
  ASSERT_TRUE(back.metrics && back.metrics->per_slice_psnr);
  EXPECT_EQ(back.metrics->per_slice_psnr->at(1), 32.0);
  EXPECT_THROW(io::parse_manifest("{not json"), io::FormatError);
  EXPECT_EQ(m.started_at.size(), 20u);
  EXPECT_EQ(m.started_at.back(), 'Z');
}

TEST(Json, InfiniteMetricSurvives) {
  MetricReport r;
  r.psnr = std::numeric_limits<double>::infinity();
  EXPECT_TRUE(std::isinf(io::metrics_from_json(io::metrics_to_json(r)).psnr));
}

// ------------------------------------------------------------ command line

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

TEST_F(TempDir, CliSynthIsDeterministic) {
  const std::string a = path("a.ssnt"), b = path("b.ssnt");
  ASSERT_EQ(cli({"synth", "--dims", "6,5,4", "--tubal-rank", "2", "--seed", "3", "--output", a}).code, 0);
  ASSERT_EQ(cli({"synth", "--dims", "6,5,4", "--tubal-rank", "2", "--seed", "3", "--output", b}).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(io::read_tensor(a), synth_low_tubal_rank(Dims{6, 5, 4}, 2, 3));
}

TEST_F(TempDir, CliMetricsSelfComparison) {
  const std::string a = path("a.ssnt");
  ASSERT_EQ(cli({"synth", "--dims", "8,8,3", "--output", a}).code, 0);
  const CliRun r = cli({"metrics", a, a});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "psnr,ssim,sam,peak\ninf,1,0,1\n");
}

TEST_F(TempDir, CliFullObservationCompletionIsExact) {
  const std::string a = path("a.ssnt"), o = path("o.ssnt");
  ASSERT_EQ(cli({"synth", "--dims", "6,6,3", "--seed", "2", "--output", a}).code, 0);
  const CliRun r = cli({"complete", "--input", a, "--sr", "1.0", "--truth", a, "--tmax", "5", "--output", o, "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("inf,1,0"), std::string::npos) << r.out;
  EXPECT_EQ(io::read_tensor(o), io::read_tensor(a));
  EXPECT_TRUE(fs::exists(o + ".diagnostics.csv"));
  const io::RunManifest m = io::parse_manifest(slurp(o + ".manifest.json"));
  EXPECT_EQ(m.command, "complete");
  ASSERT_TRUE(m.metrics.has_value());
  EXPECT_TRUE(std::isinf(m.metrics->psnr));
}

TEST_F(TempDir, CliConvertRoundTrip) {
  const std::string a = path("a.ssnt"), c = path("a.csv"), b = path("b.ssnt");
  ASSERT_EQ(cli({"synth", "--dims", "4,3,2", "--output", a}).code, 0);
  ASSERT_EQ(cli({"convert", "--input", a, "--output", c}).code, 0);
  ASSERT_EQ(cli({"convert", "--input", c, "--output", b, "--dims", "4,3,2"}).code, 0);
  EXPECT_EQ(io::read_tensor(a), io::read_tensor(b));
}

TEST_F(TempDir, CliExitCodes) {
  const std::string a = path("a.ssnt"), m = path("m.ssnt"), bad = path("bad.ssnt");
  ASSERT_EQ(cli({"synth", "--dims", "4,4,2", "--output", a}).code, 0);
  ASSERT_EQ(cli({"synth", "--dims", "4,4,3", "--output", m}).code, 0);

  CliRun r = cli({"bogus"});
  EXPECT_EQ(r.code, cli::kUsage);
  r = cli({"synth", "--dims", "4,4,2", "--output", a, "--frobnicate"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("error code=2 kind=usage"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"degrade", "--input", a, "--sr", "1.5", "--output", bad}).code, cli::kUsage);

  r = cli({"metrics", a, path("absent.ssnt")});
  EXPECT_EQ(r.code, cli::kIo);
  EXPECT_NE(r.err.find("error code=3"), std::string::npos);

  r = cli({"metrics", a, m});
  EXPECT_EQ(r.code, cli::kShape);
  EXPECT_NE(r.err.find("kind=shape"), std::string::npos);

  std::ofstream(bad, std::ios::binary) << "not a tensor";
  r = cli({"metrics", a, bad});
  EXPECT_EQ(r.code, cli::kFormat);
  EXPECT_NE(r.err.find("kind=format"), std::string::npos);
  EXPECT_NE(r.err.find("magic"), std::string::npos);

  EXPECT_EQ(cli({"--help"}).code, cli::kOk);
}

}  // namespace
