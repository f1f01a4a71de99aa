#include "pcsc/config.hpp"

#include <filesystem>
#include <fstream>

#include "test_util.hpp"

using namespace pcsc;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& body) {
  auto path = (fs::temp_directory_path() / "pcsc_config_test.json").string();
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("both presets validate") {
  CHECK_NOTHROW(full_preset().validate());
  CHECK_NOTHROW(toy_preset().validate());
  CHECK(full_preset().encoder.d == 1024);
  CHECK(toy_preset().encoder.d == 128);
  CHECK(toy_preset().backbone.condition_width == 131);
  CHECK_THROWS_AS(preset_by_name("giant"), InvalidConfig);
}

TEST_CASE("load applies preset then overrides") {
  auto path = write_temp(R"({
    "preset": "toy",
    "seed": 99,
    "output_dir": "runs/t",
    "diffusion": {"T": 120},
    "training": {"pretrain": {"epochs": 3, "lr": 0.01}}
  })");
  RunConfig c = load_run_config(path);
  CHECK(c.preset == "toy");
  CHECK(c.seed == 99);
  CHECK(c.output_dir == "runs/t");
  CHECK(c.diffusion_T == 120);
  CHECK(c.training.pretrain.epochs == 3);
  CHECK(c.training.pretrain.lr == doctest::Approx(0.01));
  // untouched fields keep the toy defaults
  CHECK(c.training.pretrain.batch_size == 8);
  CHECK(c.encoder.d == 128);
  std::remove(path.c_str());
}

TEST_CASE("encoder width override keeps the dependent widths in sync") {
  auto path = write_temp(R"({
    "preset": "toy",
    "encoder": {"d": 64, "d1": 32, "d2": 48},
    "jscc": {"rates": [64, 32]}
  })");
  RunConfig c = load_run_config(path);
  CHECK(c.jscc.d == 64);
  CHECK(c.backbone.condition_width == 67);
  CHECK(c.training.rates == std::vector<int>{64, 32});
  std::remove(path.c_str());
}

TEST_CASE("unknown keys are rejected at every level") {
  for (const char* body : {
           R"({"preset": "toy", "wat": 1})",
           R"({"preset": "toy", "encoder": {"width": 64}})",
           R"({"preset": "toy", "training": {"pretrain": {"steps": 5}}})",
           R"({"preset": "toy", "jscc": {"d": 64}})",
           R"({"preset": "toy", "datagen": {"classes": 3}})",
       }) {
    auto path = write_temp(body);
    CHECK_THROWS_AS(load_run_config(path), ParseError);
    std::remove(path.c_str());
  }
}

TEST_CASE("invalid combinations fail validation on load") {
  // rates exceeding the feature width
  auto path = write_temp(R"({"preset": "toy", "jscc": {"rates": [256, 32]}})");
  CHECK_THROWS_AS(load_run_config(path), InvalidConfig);
  std::remove(path.c_str());
  path = write_temp(R"({"preset": "toy", "backbone": {"widths": [32, 8]}})");
  CHECK_THROWS_AS(load_run_config(path), InvalidConfig);
  std::remove(path.c_str());
  path = write_temp("{ nope");
  CHECK_THROWS_AS(load_run_config(path), ParseError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), IoError);
}

TEST_CASE("save then load is the identity on the resolved config") {
  RunConfig c = toy_preset();
  c.seed = 1234;
  c.training.channel = ChannelKind::kRayleigh;
  c.datagen.families = {"box", "cone"};
  auto path = (fs::temp_directory_path() / "pcsc_config_rt.json").string();
  save_run_config(c, path);
  RunConfig back = load_run_config(path);
  CHECK(back.preset == c.preset);
  CHECK(back.seed == 1234);
  CHECK(back.training.channel == ChannelKind::kRayleigh);
  CHECK(back.datagen.families == c.datagen.families);
  CHECK(back.encoder.d == c.encoder.d);
  CHECK(back.jscc.rates == c.jscc.rates);
  CHECK(back.training.pretrain.epochs == c.training.pretrain.epochs);
  CHECK(back.diffusion_T == c.diffusion_T);
  // byte-stable: saving the reloaded config reproduces the file
  auto path2 = (fs::temp_directory_path() / "pcsc_config_rt2.json").string();
  save_run_config(back, path2);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}
