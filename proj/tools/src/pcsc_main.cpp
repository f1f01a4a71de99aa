// pcsc: batch experiment driver for the point-cloud semantic communication
// stack. Subcommands cover dataset generation, the four training phases,
// single transmissions, SNR x rate sweeps, and the octree digital baseline.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcsc/config.hpp"
#include "pcsc/dataio.hpp"
#include "pcsc/nn/checkpoint.hpp"
#include "pcsc/octree.hpp"
#include "pcsc/training.hpp"

namespace fs = std::filesystem;
using namespace pcsc;

namespace {

struct Model {
  nn::ParamStore store;
  SemanticEncoder encoder;
  CpcBackbone backbone;
  DiffusionSchedule schedule;
};

Model build_model(const RunConfig& c) {
  Model m;
  Rng rng(c.seed ^ 0x6d6f64656cULL);  // independent of data/train streams
  m.encoder = SemanticEncoder(m.store, c.encoder, rng);
  m.backbone = CpcBackbone(m.store, "cpc", c.backbone, rng);
  m.schedule = linear_beta_schedule(c.diffusion_T, c.beta_start, c.beta_end);
  return m;
}

JsccConfig widen_stages(JsccConfig c, int stages) {
  c.snr_stages = stages;
  c.rate_stages_enc = stages;
  c.rate_stages_dec = stages;
  c.feature_stages = stages;
  return c;
}

struct SamplerSpec {
  bool ddpm = false;
  int ddim_steps = 8;
  std::string text = "ddim:8";
};

SamplerSpec parse_sampler(const std::string& text) {
  SamplerSpec s;
  s.text = text;
  if (text == "ddpm") {
    s.ddpm = true;
    return s;
  }
  if (text.rfind("ddim:", 0) == 0) {
    s.ddim_steps = std::stoi(text.substr(5));
    if (s.ddim_steps < 1) throw InvalidConfig("sampler: steps must be >= 1");
    return s;
  }
  throw InvalidConfig("sampler must be 'ddpm' or 'ddim:<steps>': " + text);
}

std::vector<TrainSample> load_dataset(const std::string& manifest_path) {
  DatasetManifest m = load_manifest(manifest_path);
  std::vector<TrainSample> out;
  for (const auto& e : m.entries) {
    TrainSample s;
    s.cloud = load_manifest_cloud(m, e);
    s.keypoints.indices = e.keypoint_indices;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw InvalidInput("dataset is empty: " + manifest_path);
  return out;
}

// Every run directory gets the resolved config plus a small provenance
// record so a row in any CSV is reproducible from the directory alone.
struct RunDir {
  fs::path dir;

  explicit RunDir(const RunConfig& c, const std::string& command) : dir(c.output_dir) {
    fs::create_directories(dir);
    save_run_config(c, (dir / "resolved_config.json").string());
    meta_["command"] = command;
    meta_["seed"] = c.seed;
    meta_["checkpoints"] = nlohmann::json::object();
  }
  void record_checkpoint(const std::string& role, const std::string& path) {
    meta_["checkpoints"][role] = {{"path", path},
                                  {"fnv1a", nn::file_hash_hex(path)}};
  }
  void finish() {
    std::ofstream out(dir / "run.json");
    out << meta_.dump(2) << "\n";
  }

 private:
  nlohmann::json meta_;
};

struct TransmitOutcome {
  PointCloud recon;
  MetricReport metrics;
  double symbols = 0.0;
  double seconds = 0.0;
};

TransmitOutcome run_transmission(const Model& m, const JsccCodec& codec,
                                 const PointCloud& cloud,
                                 const KeypointSet& keypoints, double snr_db,
                                 int rate, ChannelKind channel,
                                 const SamplerSpec& sampler, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  nn::Matrix f_s = m.encoder.extract_value(cloud, keypoints, rng);
  SymbolVector sent = codec.encode_value(f_s, snr_db, rate);
  SymbolVector received = transmit(sent, channel, snr_db, rng);
  nn::Matrix f_hat = codec.decode_value(received);

  TransmitOutcome out;
  out.symbols = static_cast<double>(sent.size());
  nn::Matrix pts;
  if (sampler.ddpm) {
    pts = ddpm_sample(m.backbone, f_hat, m.schedule, cloud.size(), rng);
  } else {
    auto tau = make_subsequence(m.schedule.T, sampler.ddim_steps);
    pts = ddim_sample(m.backbone, f_hat, m.schedule, tau,
                      DdimSigma::kDeterministic, cloud.size(), rng);
  }
  out.recon.points = std::move(pts);
  out.recon.id = cloud.id + "_recon";
  out.metrics = evaluate_all(cloud, out.recon);
  out.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return out;
}

int cmd_gen_data(const RunConfig& c) {
  RunDir run(c, "gen-data");
  Rng rng(c.seed);
  auto emit = [&](const std::string& manifest_path, int per_class) {
    fs::path dir = fs::path(manifest_path).parent_path();
    fs::create_directories(dir);
    DatasetManifest m;
    m.base_dir = dir.string();
    for (const auto& family : c.datagen.families) {
      SyntheticShapeSpec spec;
      spec.family = shape_family_from_name(family);
      spec.n_points = c.datagen.n_points;
      spec.size_a = 1.0;
      spec.size_b = spec.family == ShapeFamily::kTorus ? 0.35 : 1.4;
      for (int i = 0; i < per_class; ++i) {
        auto [cloud, kps] = gen_synthetic(spec, rng);
        ManifestEntry e;
        e.id = family + "_" + std::to_string(i);
        e.class_label = family;
        e.cloud_path = e.id + ".ply";
        e.keypoint_indices = kps.indices;
        cloud.id = e.id;
        save_ply(cloud, (dir / e.cloud_path).string());
        m.entries.push_back(std::move(e));
      }
    }
    save_manifest(m, manifest_path);
    validate_manifest(load_manifest(manifest_path));
  };
  emit(c.dataset_manifest, c.datagen.train_per_class);
  emit(c.heldout_manifest, c.datagen.heldout_per_class);
  run.finish();
  std::cout << "wrote " << c.dataset_manifest << " and " << c.heldout_manifest
            << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& c) {
  RunDir run(c, "pretrain");
  Model m = build_model(c);
  auto dataset = load_dataset(c.dataset_manifest);
  TrainingLog log((run.dir / "train_log.csv").string());
  Rng rng(c.seed);
  run_pretrain(m.store, m.encoder, m.backbone, m.schedule, dataset, c.training,
               &log, c.seed, rng);
  const std::string out = (run.dir / "model_pretrained.ckpt").string();
  nn::save_checkpoint(m.store, out);
  run.record_checkpoint("model_pretrained", out);
  run.finish();
  return 0;
}

int cmd_finetune(const RunConfig& c, const std::string& model_path) {
  RunDir run(c, "finetune");
  Model m = build_model(c);
  nn::load_checkpoint(m.store, model_path);
  run.record_checkpoint("input_model", model_path);
  auto dataset = load_dataset(c.dataset_manifest);
  TrainingLog log((run.dir / "train_log.csv").string());
  Rng rng(c.seed + 1);
  run_finetune(m.store, m.encoder, m.backbone, m.schedule, dataset, c.training,
               &log, c.seed, rng);
  const std::string out = (run.dir / "model.ckpt").string();
  nn::save_checkpoint(m.store, out);
  run.record_checkpoint("model", out);
  run.finish();
  return 0;
}

int cmd_train_jscc(const RunConfig& c, const std::string& model_path) {
  RunDir run(c, "train-jscc");
  Model m = build_model(c);
  nn::load_checkpoint(m.store, model_path);
  run.record_checkpoint("input_model", model_path);
  auto dataset = load_dataset(c.dataset_manifest);
  TrainingLog log((run.dir / "train_log.csv").string());
  Rng rng(c.seed + 2);

  // pretraining-pruning pipeline: train a 5-stage codec for the first half
  // of the epoch budget, keep the 3 most active stages per family, then
  // train the pruned codec for the rest.
  nn::ParamStore base_store;
  JsccCodec base(base_store, widen_stages(c.jscc, 5), rng);
  TrainingConfig half = c.training;
  half.jscc.epochs = std::max(1, c.training.jscc.epochs / 2);
  run_train_jscc(base_store, m.store, m.encoder, m.backbone, m.schedule, base,
                 dataset, half, &log, c.seed, rng);

  std::vector<nn::Matrix> calib;
  std::vector<double> calib_snrs;
  std::vector<int> calib_rates;
  for (std::size_t i = 0; i < dataset.size() && i < 32; ++i) {
    calib.push_back(m.encoder.extract_value(dataset[i].cloud,
                                            dataset[i].keypoints, rng));
    calib_snrs.push_back(
        c.jscc.snr_levels_db[i % c.jscc.snr_levels_db.size()]);
    calib_rates.push_back(c.jscc.rates[i % c.jscc.rates.size()]);
  }
  StageDeviations dev = base.calibrate(calib, calib_snrs, calib_rates);
  nn::ParamStore codec_store;
  JsccCodec codec = prune_adaptation_stages(base, codec_store, c.jscc, dev);

  half.jscc.epochs = std::max(1, c.training.jscc.epochs - half.jscc.epochs);
  run_train_jscc(codec_store, m.store, m.encoder, m.backbone, m.schedule,
                 codec, dataset, half, &log, c.seed, rng);

  const std::string out = (run.dir / "codec.ckpt").string();
  nn::save_checkpoint(codec_store, out);
  run.record_checkpoint("codec", out);
  run.finish();
  return 0;
}

int cmd_rectify(const RunConfig& c, const std::string& model_path) {
  RunDir run(c, "rectify");
  Model m = build_model(c);
  nn::load_checkpoint(m.store, model_path);
  run.record_checkpoint("input_model", model_path);
  auto dataset = load_dataset(c.dataset_manifest);
  TrainingLog log((run.dir / "train_log.csv").string());
  Rng rng(c.seed + 3);

  auto triplets = rd_generate(m.encoder, m.backbone, m.schedule, dataset,
                              c.training.rd_triplet_count,
                              c.training.rd_sample_steps, rng);
  const std::string tri_path = (run.dir / "rd_triplets.ckpt").string();
  save_rd_triplets(triplets, tri_path);
  run.record_checkpoint("rd_triplets", tri_path);

  run_rd_retrain(m.store, m.backbone, m.schedule, triplets, c.training, &log,
                 c.seed, rng);
  const std::string out = (run.dir / "model_rectified.ckpt").string();
  nn::save_checkpoint(m.store, out);
  run.record_checkpoint("model_rectified", out);
  run.finish();
  return 0;
}

int cmd_transmit(const RunConfig& c, const std::string& model_path,
                 const std::string& codec_path, const std::string& cloud_path,
                 double snr_db, int rate, const std::string& channel_name,
                 const std::string& sampler_text, std::uint64_t seed) {
  RunDir run(c, "transmit");
  Model m = build_model(c);
  nn::load_checkpoint(m.store, model_path);
  run.record_checkpoint("model", model_path);
  nn::ParamStore codec_store;
  Rng init_rng(c.seed);
  JsccCodec codec(codec_store, c.jscc, init_rng);
  nn::load_checkpoint(codec_store, codec_path);
  run.record_checkpoint("codec", codec_path);

  PointCloud cloud = load_ply(cloud_path);
  cloud = normalize_unit_sphere(cloud).cloud;
  KeypointSet keypoints;  // plain PLY carries no annotations
  Rng rng(seed);
  auto outcome = run_transmission(m, codec, cloud, keypoints, snr_db, rate,
                                  channel_kind_from_name(channel_name),
                                  parse_sampler(sampler_text), rng);
  const std::string out_ply = (run.dir / (cloud.id + "_recon.ply")).string();
  save_ply(outcome.recon, out_ply);
  run.finish();
  std::printf("mse=%.9g cd=%.9g hd=%.9g emd=%.9g symbols=%g recon=%s\n",
              outcome.metrics.mse, outcome.metrics.cd, outcome.metrics.hd,
              outcome.metrics.emd, outcome.symbols, out_ply.c_str());
  return 0;
}

int cmd_sweep(const RunConfig& c, const std::string& model_path,
              const std::string& codec_path, std::vector<double> snr_list,
              std::vector<int> rate_list, int repeats,
              const std::string& channel_name,
              const std::string& sampler_text) {
  RunDir run(c, "sweep");
  Model m = build_model(c);
  nn::load_checkpoint(m.store, model_path);
  run.record_checkpoint("model", model_path);
  nn::ParamStore codec_store;
  Rng init_rng(c.seed);
  JsccCodec codec(codec_store, c.jscc, init_rng);
  nn::load_checkpoint(codec_store, codec_path);
  run.record_checkpoint("codec", codec_path);

  auto heldout = load_dataset(c.heldout_manifest);
  if (snr_list.empty()) snr_list = c.jscc.snr_levels_db;
  if (rate_list.empty()) rate_list = c.jscc.rates;
  const ChannelKind channel = channel_kind_from_name(channel_name);
  const SamplerSpec sampler = parse_sampler(sampler_text);

  std::ofstream csv(run.dir / "sweep.csv");
  csv << "cloud_id,channel,snr_db,rate,repeat,mse,cd,hd,emd,symbols,sampler,"
         "seconds\n";
  for (double snr : snr_list)
    for (int rate : rate_list)
      for (int rep = 0; rep < repeats; ++rep)
        for (std::size_t i = 0; i < heldout.size(); ++i) {
          // per-row stream keyed by coordinates so each row is independently
          // reproducible from (config, seed, row coordinates)
          Rng rng(c.seed ^ (std::hash<std::string>{}(heldout[i].cloud.id) +
                            0x9e3779b97f4a7c15ULL * (rep + 1) +
                            static_cast<std::uint64_t>(rate) * 1315423911ULL +
                            static_cast<std::uint64_t>(
                                std::llround(snr * 1024.0 + (1 << 20)))));
          auto o = run_transmission(m, codec, heldout[i].cloud,
                                    heldout[i].keypoints, snr, rate, channel,
                                    sampler, rng);
          char buf[320];
          std::snprintf(buf, sizeof(buf),
                        "%s,%s,%.9g,%d,%d,%.9g,%.9g,%.9g,%.9g,%g,%s,%.3f\n",
                        heldout[i].cloud.id.c_str(),
                        channel_kind_name(channel).c_str(), snr, rate, rep,
                        o.metrics.mse, o.metrics.cd, o.metrics.hd,
                        o.metrics.emd, o.symbols, sampler.text.c_str(),
                        o.seconds);
          csv << buf;
        }
  run.finish();
  std::cout << "wrote " << (run.dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_baseline(const RunConfig& c, int depth,
                 const std::string& modulation_name,
                 const std::string& coding_name,
                 std::vector<double> snr_list) {
  RunDir run(c, "baseline");
  auto heldout = load_dataset(c.heldout_manifest);
  if (snr_list.empty()) snr_list = c.jscc.snr_levels_db;
  Modulation mod;
  if (modulation_name == "bpsk") mod = Modulation::kBpsk;
  else if (modulation_name == "qpsk") mod = Modulation::kQpsk;
  else throw InvalidConfig("modulation must be bpsk or qpsk");
  Coding cod;
  if (coding_name == "none") cod = Coding::kNone;
  else if (coding_name == "ideal-half") cod = Coding::kIdealRateHalf;
  else throw InvalidConfig("coding must be none or ideal-half");

  std::ofstream csv(run.dir / "baseline.csv");
  csv << "cloud_id,depth,modulation,coding,snr_db,outcome,cd,hd,symbols\n";
  for (double snr : snr_list)
    for (std::size_t i = 0; i < heldout.size(); ++i) {
      Rng rng(c.seed ^ (std::hash<std::string>{}(heldout[i].cloud.id) +
                        static_cast<std::uint64_t>(
                            std::llround(snr * 1024.0 + (1 << 20)))));
      DigitalLinkConfig link{mod, cod, snr};
      auto r = baseline_transmit(heldout[i].cloud, depth, link, rng);
      char buf[256];
      if (r.decode_failed) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%s,%s,%.9g,decode_failure,,,%g\n",
                      heldout[i].cloud.id.c_str(), depth,
                      modulation_name.c_str(), coding_name.c_str(), snr,
                      r.symbol_count);
      } else {
        std::snprintf(buf, sizeof(buf), "%s,%d,%s,%s,%.9g,ok,%.9g,%.9g,%g\n",
                      heldout[i].cloud.id.c_str(), depth,
                      modulation_name.c_str(), coding_name.c_str(), snr,
                      r.metrics->cd, r.metrics->hd, r.symbol_count);
      }
      csv << buf;
    }
  run.finish();
  std::cout << "wrote " << (run.dir / "baseline.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point cloud semantic communication experiment driver"};
  app.require_subcommand(1);

  std::string config_path;
  if (const char* env = std::getenv("PCSC_CONFIG")) config_path = env;
  std::string preset = "toy";
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  app.add_option("--config", config_path,
                 "JSON run config (default: $PCSC_CONFIG)");
  app.add_option("--preset", preset, "preset when no config file: full|toy");
  app.add_option("--out", out_dir, "override output directory");
  app.add_option("--seed", seed_override, "override seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* gen = app.add_subcommand("gen-data", "generate synthetic datasets");
  auto* pre = app.add_subcommand("pretrain", "diffusion pretraining");
  auto* fin = app.add_subcommand("finetune", "dual-metric fine-tuning");
  auto* tjc = app.add_subcommand("train-jscc", "codec training with pruning");
  auto* rec = app.add_subcommand("rectify", "triplet generation + retraining");
  auto* trn = app.add_subcommand("transmit", "single cloud transmission");
  auto* swp = app.add_subcommand("sweep", "SNR x rate sweep to CSV");
  auto* bas = app.add_subcommand("baseline", "octree digital baseline to CSV");

  std::string model_path, codec_path, cloud_path;
  std::string channel_name = "awgn", sampler_text = "ddim:8";
  double snr_db = 10.0;
  int rate = 0;
  std::uint64_t tx_seed = 1;
  for (CLI::App* s : {fin, tjc, rec, trn, swp})
    s->add_option("--model", model_path, "model checkpoint");
  for (CLI::App* s : {trn, swp})
    s->add_option("--codec", codec_path, "codec checkpoint");
  trn->add_option("--cloud", cloud_path, "input PLY")->required();
  trn->add_option("--snr", snr_db, "channel SNR in dB");
  trn->add_option("--rate", rate, "symbol rate (default: largest)");
  tx_seed = 1;
  trn->add_option("--seed", tx_seed, "transmission noise seed");
  for (CLI::App* s : {trn, swp}) {
    s->add_option("--channel", channel_name, "awgn|rayleigh");
    s->add_option("--sampler", sampler_text, "ddpm|ddim:<steps>");
  }

  std::vector<double> snr_list;
  std::vector<int> rate_list;
  int repeats = 1;
  swp->add_option("--snr-list", snr_list, "SNR grid (dB)");
  swp->add_option("--rate-list", rate_list, "rate grid");
  swp->add_option("--repeats", repeats, "repeats per cell");

  int depth = 8;
  std::string modulation_name = "bpsk", coding_name = "none";
  bas->add_option("--depth", depth, "octree depth");
  bas->add_option("--modulation", modulation_name, "bpsk|qpsk");
  bas->add_option("--coding", coding_name, "none|ideal-half");
  bas->add_option("--snr-list", snr_list, "SNR grid (dB)");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig c = config_path.empty() ? preset_by_name(preset)
                                      : load_run_config(config_path);
    if (!out_dir.empty()) c.output_dir = out_dir;
    if (seed_set) c.seed = seed_override;
    c.validate();
    const fs::path run_dir(c.output_dir);
    if (model_path.empty()) model_path = (run_dir / "model.ckpt").string();
    if (codec_path.empty()) codec_path = (run_dir / "codec.ckpt").string();
    if (rate == 0) rate = c.jscc.rates.front();

    if (gen->parsed()) return cmd_gen_data(c);
    if (pre->parsed()) return cmd_pretrain(c);
    if (fin->parsed()) return cmd_finetune(c, model_path);
    if (tjc->parsed()) return cmd_train_jscc(c, model_path);
    if (rec->parsed()) return cmd_rectify(c, model_path);
    if (trn->parsed())
      return cmd_transmit(c, model_path, codec_path, cloud_path, snr_db, rate,
                          channel_name, sampler_text, tx_seed);
    if (swp->parsed())
      return cmd_sweep(c, model_path, codec_path, snr_list, rate_list, repeats,
                       channel_name, sampler_text);
    if (bas->parsed())
      return cmd_baseline(c, depth, modulation_name, coding_name, snr_list);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
