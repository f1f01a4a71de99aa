#include "pcsc/config.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "pcsc/dataio.hpp"

namespace pcsc {

using nlohmann::json;

void RunConfig::validate() const {
  if (preset != "full" && preset != "toy")
    throw InvalidConfig("config: preset must be full or toy");
  encoder.validate();
  jscc.validate();
  training.validate();
  if (jscc.d != encoder.d)
    throw InvalidConfig("config: codec width must match the semantic width");
  if (backbone.condition_width != encoder.d + 3)
    throw InvalidConfig("config: backbone condition width must be d + 3");
  if (backbone.widths.empty() || backbone.widths.back() != 3)
    throw InvalidConfig("config: backbone must end in width 3");
  if (diffusion_T < 1 || beta_start <= 0.0 || beta_end <= beta_start)
    throw InvalidConfig("config: bad diffusion schedule parameters");
  if (datagen.n_points < 64 || datagen.train_per_class < 1 ||
      datagen.heldout_per_class < 0 || datagen.families.empty())
    throw InvalidConfig("config: bad dataset generation parameters");
  for (const auto& f : datagen.families) shape_family_from_name(f);
  if (training.rates != jscc.rates)
    throw InvalidConfig("config: training and codec rate grids must match");
}

RunConfig full_preset() {
  RunConfig c;  // struct defaults are the full-scale values
  c.preset = "full";
  c.backbone.condition_width = c.encoder.d + 3;
  return c;
}

RunConfig toy_preset() {
  RunConfig c;
  c.preset = "toy";
  c.encoder.d1 = 64;
  c.encoder.d2 = 96;
  c.encoder.d = 128;
  c.encoder.group_count = 16;
  c.encoder.patch_size = 32;
  c.encoder.mask_fraction = 0.8;
  c.encoder.transformer_layers = 2;
  c.encoder.transformer_heads = 2;
  c.backbone.widths = {32, 64, 128, 64, 32, 3};
  c.backbone.condition_width = c.encoder.d + 3;
  c.diffusion_T = 200;
  c.jscc.d = 128;
  c.jscc.condition_width = 32;
  c.jscc.rates = {128, 96, 64, 32};
  c.training.rates = c.jscc.rates;
  c.training.pretrain = {50, 8, 1e-3, 0.05, 5};
  c.training.finetune = {20, 8, 3e-4, 1e-4, 2};
  c.training.jscc = {50, 8, 1e-3, 1e-4, 5};
  c.training.rd = {20, 8, 3e-4, 1e-4, 2};
  c.training.ddim_steps_jscc = 8;
  c.training.rd_sample_steps = 25;
  c.training.rd_triplet_count = 128;
  c.datagen.n_points = 256;
  c.datagen.train_per_class = 20;
  c.datagen.heldout_per_class = 20;
  return c;
}

RunConfig preset_by_name(const std::string& name) {
  if (name == "full") return full_preset();
  if (name == "toy") return toy_preset();
  throw InvalidConfig("config: unknown preset " + name);
}

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& where) {
  for (auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("config: unknown key '" + key + "' in " + where);
}

void apply_phase(const json& j, PhaseHyper& p, const std::string& where) {
  reject_unknown(j, {"epochs", "batch_size", "lr", "weight_decay",
                     "warmup_epochs"}, where);
  if (j.contains("epochs")) p.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) p.batch_size = j["batch_size"].get<int>();
  if (j.contains("lr")) p.lr = j["lr"].get<double>();
  if (j.contains("weight_decay"))
    p.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("warmup_epochs"))
    p.warmup_epochs = j["warmup_epochs"].get<int>();
}

void apply_overrides(const json& j, RunConfig& c) {
  reject_unknown(j, {"preset", "seed", "output_dir", "dataset_manifest",
                     "heldout_manifest", "encoder", "backbone", "diffusion",
                     "jscc", "training", "datagen"},
                 "top level");
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("dataset_manifest"))
    c.dataset_manifest = j["dataset_manifest"].get<std::string>();
  if (j.contains("heldout_manifest"))
    c.heldout_manifest = j["heldout_manifest"].get<std::string>();

  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    reject_unknown(e, {"d1", "d2", "d", "group_count", "patch_size",
                       "mask_fraction", "transformer_layers",
                       "transformer_heads"}, "encoder");
    if (e.contains("d1")) c.encoder.d1 = e["d1"].get<int>();
    if (e.contains("d2")) c.encoder.d2 = e["d2"].get<int>();
    if (e.contains("d")) c.encoder.d = e["d"].get<int>();
    if (e.contains("group_count"))
      c.encoder.group_count = e["group_count"].get<int>();
    if (e.contains("patch_size"))
      c.encoder.patch_size = e["patch_size"].get<int>();
    if (e.contains("mask_fraction"))
      c.encoder.mask_fraction = e["mask_fraction"].get<double>();
    if (e.contains("transformer_layers"))
      c.encoder.transformer_layers = e["transformer_layers"].get<int>();
    if (e.contains("transformer_heads"))
      c.encoder.transformer_heads = e["transformer_heads"].get<int>();
    c.backbone.condition_width = c.encoder.d + 3;
    c.jscc.d = c.encoder.d;
  }
  if (j.contains("backbone")) {
    const json& b = j["backbone"];
    reject_unknown(b, {"widths"}, "backbone");
    if (b.contains("widths"))
      c.backbone.widths = b["widths"].get<std::vector<int>>();
  }
  if (j.contains("diffusion")) {
    const json& d = j["diffusion"];
    reject_unknown(d, {"T", "beta_start", "beta_end"}, "diffusion");
    if (d.contains("T")) c.diffusion_T = d["T"].get<int>();
    if (d.contains("beta_start")) c.beta_start = d["beta_start"].get<double>();
    if (d.contains("beta_end")) c.beta_end = d["beta_end"].get<double>();
  }
  if (j.contains("jscc")) {
    const json& s = j["jscc"];
    reject_unknown(s, {"condition_width", "rates", "snr_levels_db",
                       "snr_stages", "rate_stages_enc", "rate_stages_dec",
                       "feature_stages"}, "jscc");
    if (s.contains("condition_width"))
      c.jscc.condition_width = s["condition_width"].get<int>();
    if (s.contains("rates")) {
      c.jscc.rates = s["rates"].get<std::vector<int>>();
      c.training.rates = c.jscc.rates;
    }
    if (s.contains("snr_levels_db")) {
      c.jscc.snr_levels_db = s["snr_levels_db"].get<std::vector<double>>();
      c.training.snr_levels_db = c.jscc.snr_levels_db;
    }
    if (s.contains("snr_stages")) c.jscc.snr_stages = s["snr_stages"].get<int>();
    if (s.contains("rate_stages_enc"))
      c.jscc.rate_stages_enc = s["rate_stages_enc"].get<int>();
    if (s.contains("rate_stages_dec"))
      c.jscc.rate_stages_dec = s["rate_stages_dec"].get<int>();
    if (s.contains("feature_stages"))
      c.jscc.feature_stages = s["feature_stages"].get<int>();
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    reject_unknown(t, {"pretrain", "finetune", "jscc", "rd", "segment_count",
                       "ddim_steps_jscc", "rd_sample_steps",
                       "rd_triplet_count", "finetune_cd_on_noise", "channel"},
                   "training");
    if (t.contains("pretrain"))
      apply_phase(t["pretrain"], c.training.pretrain, "training.pretrain");
    if (t.contains("finetune"))
      apply_phase(t["finetune"], c.training.finetune, "training.finetune");
    if (t.contains("jscc"))
      apply_phase(t["jscc"], c.training.jscc, "training.jscc");
    if (t.contains("rd")) apply_phase(t["rd"], c.training.rd, "training.rd");
    if (t.contains("segment_count"))
      c.training.segment_count = t["segment_count"].get<int>();
    if (t.contains("ddim_steps_jscc"))
      c.training.ddim_steps_jscc = t["ddim_steps_jscc"].get<int>();
    if (t.contains("rd_sample_steps"))
      c.training.rd_sample_steps = t["rd_sample_steps"].get<int>();
    if (t.contains("rd_triplet_count"))
      c.training.rd_triplet_count = t["rd_triplet_count"].get<int>();
    if (t.contains("finetune_cd_on_noise"))
      c.training.finetune_cd_on_noise = t["finetune_cd_on_noise"].get<bool>();
    if (t.contains("channel"))
      c.training.channel =
          channel_kind_from_name(t["channel"].get<std::string>());
  }
  if (j.contains("datagen")) {
    const json& d = j["datagen"];
    reject_unknown(d, {"n_points", "train_per_class", "heldout_per_class",
                       "families"}, "datagen");
    if (d.contains("n_points")) c.datagen.n_points = d["n_points"].get<int>();
    if (d.contains("train_per_class"))
      c.datagen.train_per_class = d["train_per_class"].get<int>();
    if (d.contains("heldout_per_class"))
      c.datagen.heldout_per_class = d["heldout_per_class"].get<int>();
    if (d.contains("families"))
      c.datagen.families = d["families"].get<std::vector<std::string>>();
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config: " + std::string(e.what()));
  }
  RunConfig c = preset_by_name(
      j.contains("preset") ? j["preset"].get<std::string>() : "full");
  apply_overrides(j, c);
  c.validate();
  return c;
}

void save_run_config(const RunConfig& c, const std::string& path) {
  auto phase = [](const PhaseHyper& p) {
    return json{{"epochs", p.epochs},
                {"batch_size", p.batch_size},
                {"lr", p.lr},
                {"weight_decay", p.weight_decay},
                {"warmup_epochs", p.warmup_epochs}};
  };
  json j{
      {"preset", c.preset},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"dataset_manifest", c.dataset_manifest},
      {"heldout_manifest", c.heldout_manifest},
      {"encoder",
       {{"d1", c.encoder.d1},
        {"d2", c.encoder.d2},
        {"d", c.encoder.d},
        {"group_count", c.encoder.group_count},
        {"patch_size", c.encoder.patch_size},
        {"mask_fraction", c.encoder.mask_fraction},
        {"transformer_layers", c.encoder.transformer_layers},
        {"transformer_heads", c.encoder.transformer_heads}}},
      {"backbone", {{"widths", c.backbone.widths}}},
      {"diffusion",
       {{"T", c.diffusion_T},
        {"beta_start", c.beta_start},
        {"beta_end", c.beta_end}}},
      {"jscc",
       {{"condition_width", c.jscc.condition_width},
        {"rates", c.jscc.rates},
        {"snr_levels_db", c.jscc.snr_levels_db},
        {"snr_stages", c.jscc.snr_stages},
        {"rate_stages_enc", c.jscc.rate_stages_enc},
        {"rate_stages_dec", c.jscc.rate_stages_dec},
        {"feature_stages", c.jscc.feature_stages}}},
      {"training",
       {{"pretrain", phase(c.training.pretrain)},
        {"finetune", phase(c.training.finetune)},
        {"jscc", phase(c.training.jscc)},
        {"rd", phase(c.training.rd)},
        {"segment_count", c.training.segment_count},
        {"ddim_steps_jscc", c.training.ddim_steps_jscc},
        {"rd_sample_steps", c.training.rd_sample_steps},
        {"rd_triplet_count", c.training.rd_triplet_count},
        {"finetune_cd_on_noise", c.training.finetune_cd_on_noise},
        {"channel", channel_kind_name(c.training.channel)}}},
      {"datagen",
       {{"n_points", c.datagen.n_points},
        {"train_per_class", c.datagen.train_per_class},
        {"heldout_per_class", c.datagen.heldout_per_class},
        {"families", c.datagen.families}}}};
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pcsc
