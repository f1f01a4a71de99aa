#pragma once

#include "pcsc/diffusion.hpp"
#include "pcsc/encoder.hpp"
#include "pcsc/jscc.hpp"
#include "pcsc/training.hpp"

namespace pcsc {

struct DataGenConfig {
  int n_points = 1024;
  int train_per_class = 20;
  int heldout_per_class = 20;
  std::vector<std::string> families = {"box", "cylinder", "torus"};
};

// Everything one run needs; a JSON file selects a preset ("full" or
// "toy") and may override any field. Unknown keys are rejected, and every
// run writes its fully resolved config next to its outputs.
struct RunConfig {
  std::string preset = "full";
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  std::string dataset_manifest = "data/train/manifest.json";
  std::string heldout_manifest = "data/heldout/manifest.json";

  EncoderConfig encoder;
  CpcConfig backbone;
  int diffusion_T = 2000;
  double beta_start = 1e-4;
  double beta_end = 1e-2;
  JsccConfig jscc;
  TrainingConfig training;
  DataGenConfig datagen;

  void validate() const;
};

RunConfig full_preset();
RunConfig toy_preset();
RunConfig preset_by_name(const std::string& name);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

}  // namespace pcsc
