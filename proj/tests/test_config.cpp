#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>
#include <unistd.h>

#include "uda/config.hpp"
#include "uda/errors.hpp"

using namespace uda;
using cli::ExperimentConfig;

namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("uda_cfg_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++) + ".conf");
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::filesystem::remove(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_SUITE("config") {

TEST_CASE("an empty path yields the default experiment") {
  ExperimentConfig c = cli::parse_config("");
  CHECK(c.dataset.kind == "two_moons");
  CHECK(c.dataset.n_source == 600);
  CHECK(c.dataset.n_target == 500);
  CHECK(c.dataset.standardize == "auto");
  CHECK(c.model.extractor_dims == std::vector<int>{128, 64});
  CHECK(c.model.dropout_p == 0.5);
  CHECK(c.train.epochs == 20);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.lr == 0.01);
  CHECK(c.method.mode == adapt::Mode::UncertaintyFull);
  CHECK(c.method.metric == adapt::Metric::Entropy);
  CHECK(c.method.T == 12);
  CHECK(c.method.tau == 1.5);
  CHECK(c.method.tau_c == 1.8);
  CHECK(c.method.t_u == 0.2);
  CHECK(c.method.gamma == -10.0);
  CHECK(c.method.lambda_u_ratio == 0.25);
  CHECK(c.method.discrepancy_q == 2);
}

TEST_CASE("a full config file parses, with comments and spacing") {
  TempFile f(R"(# experiment: moons under a rotation shift
dataset.kind = two_moons
dataset.seed = 11
dataset.n_source = 200
dataset.n_target = 150          # smaller target pool
dataset.noise_sigma = 0.05
shift.rotation_deg = 40
shift.translation = 0.5, -0.25
shift.class_prior = 0.7, 0.3
model.extractor_dims = 32, 16
model.classifier_dims =
model.discriminator_dims = 8
model.dropout_p = 0.4
train.epochs = 3
train.batch_size = 16
train.seed = 12
method.mode = adversarial_plain
method.uncertainty_metric = variance
method.mc_passes = 6
method.t_u = 0.3
method.gamma = -5
method.l_u_generator_only = true
)");
  ExperimentConfig c = cli::parse_config(f.str());
  CHECK(c.dataset.seed == 11);
  CHECK(c.dataset.n_target == 150);
  CHECK(c.dataset.shift.rotation_deg == 40.0);
  CHECK(c.dataset.shift.translation == std::vector<double>{0.5, -0.25});
  CHECK(c.dataset.shift.class_prior == std::vector<double>{0.7, 0.3});
  CHECK(c.model.extractor_dims == std::vector<int>{32, 16});
  CHECK(c.model.classifier_dims.empty());
  CHECK(c.model.dropout_p == 0.4);
  CHECK(c.train.epochs == 3);
  CHECK(c.method.mode == adapt::Mode::AdversarialPlain);
  CHECK(c.method.metric == adapt::Metric::Variance);
  CHECK(c.method.T == 6);
  CHECK(c.method.t_u == 0.3);
  CHECK(c.method.gamma == -5.0);
  CHECK(c.method.l_u_generator_only);
}

TEST_CASE("unknown keys are named in the error") {
  TempFile f("dataset.sigma = 0.1\n");
  try {
    cli::parse_config(f.str());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dataset.sigma") != std::string::npos);
  }
}

TEST_CASE("constraint violations name the offending key") {
  TempFile f("method.t_u = -0.1\n");
  try {
    cli::parse_config(f.str());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("method.t_u") != std::string::npos);
  }

  TempFile g("method.gamma = 2\n");
  try {
    cli::parse_config(g.str());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("method.gamma") != std::string::npos);
  }

  TempFile h("train.momentum = 1.0\n");
  CHECK_THROWS_AS(cli::parse_config(h.str()), ConfigError);
  TempFile i("model.dropout_p = 1.0\n");
  CHECK_THROWS_AS(cli::parse_config(i.str()), ConfigError);
  TempFile j("method.discrepancy_q = 3\n");
  CHECK_THROWS_AS(cli::parse_config(j.str()), ConfigError);
  TempFile k("method.mode = dann\n");
  CHECK_THROWS_AS(cli::parse_config(k.str()), ConfigError);
  TempFile l("train.epochs = soon\n");
  CHECK_THROWS_AS(cli::parse_config(l.str()), ConfigError);
}

TEST_CASE("syntax errors carry the file position") {
  TempFile f("dataset.kind two_moons\n");
  try {
    cli::parse_config(f.str());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
  CHECK_THROWS_AS(cli::parse_config("/nonexistent/path.conf"), ConfigError);
}

TEST_CASE("kind=idx demands the four file paths") {
  TempFile f("dataset.kind = idx\n");
  try {
    cli::parse_config(f.str());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("source_images") != std::string::npos);
  }
}

TEST_CASE("the shipped sample configs parse to their documented values") {
  const std::filesystem::path dir = UDA_REPO_CONFIGS;

  ExperimentConfig moons = cli::parse_config((dir / "two_moons.conf").string());
  CHECK(moons.dataset.kind == "two_moons");
  CHECK(moons.dataset.n_source == 180);
  CHECK(moons.dataset.shift.rotation_deg == 40.0);
  CHECK(moons.dataset.shift.class_prior == std::vector<double>{0.7, 0.3});
  CHECK(moons.model.dropout_p == 0.15);
  CHECK(moons.train.epochs == 180);
  CHECK(moons.method.gamma == -6.0);
  CHECK(moons.method.lambda_u_ratio == 0.04);

  ExperimentConfig blobs = cli::parse_config((dir / "blobs_negative.conf").string());
  CHECK(blobs.dataset.kind == "blobs");
  CHECK(blobs.dataset.separation == 1.5);
  CHECK(blobs.dataset.shift.dropped_classes == std::vector<int>{3, 4});
  CHECK(blobs.train.epochs == 40);

  ExperimentConfig digits = cli::parse_config((dir / "digits.conf").string());
  CHECK(digits.dataset.kind == "idx");
  CHECK(digits.dataset.n_source == 2000);
  CHECK(digits.dataset.target_images == "data/digits/usps-images-idx3-ubyte");
}

TEST_CASE("overrides win over the file and are validated") {
  TempFile f("train.epochs = 3\ntrain.batch_size = 16\n");
  ExperimentConfig c = cli::parse_config(f.str());
  cli::apply_overrides(c, {"train.epochs=5", "method.tau = 2.0"});
  CHECK(c.train.epochs == 5);
  CHECK(c.train.batch_size == 16);
  CHECK(c.method.tau == 2.0);

  CHECK_THROWS_AS(cli::apply_overrides(c, {"train.epochs"}), ConfigError);
  CHECK_THROWS_AS(cli::apply_overrides(c, {"no.such.key=1"}), ConfigError);
  CHECK_THROWS_AS(cli::apply_overrides(c, {"method.t_u=7"}), ConfigError);
}

}  // TEST_SUITE config
