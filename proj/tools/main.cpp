// snncraft experiment runner: trains ANNs, converts them to spiking models,
// trains SNNs with crafted/Gaussian input noise, attacks and evaluates them,
// and writes every result as CSV or a checkpoint into the output directory.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "snncraft/attacks.hpp"
#include "snncraft/checkpoint.hpp"
#include "snncraft/dataset.hpp"
#include "snncraft/error.hpp"
#include "snncraft/metrics.hpp"
#include "snncraft/model.hpp"
#include "snncraft/report.hpp"
#include "snncraft/training.hpp"

namespace fs = std::filesystem;
using namespace snncraft;

namespace {

// Accepts plain decimals and ratios like "8/255".
double parse_value(const std::string& s) {
  std::size_t slash = s.find('/');
  try {
    if (slash == std::string::npos) return std::stod(s);
    double num = std::stod(s.substr(0, slash));
    double den = std::stod(s.substr(slash + 1));
    if (den == 0.0) throw ConfigError("zero denominator in '" + s + "'");
    return num / den;
  } catch (const std::invalid_argument&) {
    throw ConfigError("cannot parse number '" + s + "'");
  }
}

// "a,b,c" or "lo:hi" (5 points) or "lo:hi:n".
std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
      if (ch == ':') {
        parts.push_back(cur);
        cur.clear();
      } else
        cur += ch;
    }
    parts.push_back(cur);
    double lo = parse_value(parts[0]);
    double hi = parse_value(parts[1]);
    std::size_t n = parts.size() > 2 ? std::stoul(parts[2]) : 5;
    if (n < 2) throw ConfigError("range sweep needs at least 2 points");
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return out;
  }
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(parse_value(cur));
      cur.clear();
    } else
      cur += ch;
  }
  if (out.empty()) throw ConfigError("empty sweep list '" + s + "'");
  return out;
}

struct DataArgs {
  std::string data;
  std::string labels;
  std::string format = "auto";
  std::size_t synth_n = 2000;
  std::uint64_t synth_seed = 1;
  double synth_signal = 0.12;
  double synth_sigma = 0.18;
  std::size_t limit = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "dataset: path to idx/cifar/csv file, or 'synth'")
        ->required();
    cmd->add_option("--labels", labels, "IDX label file (idx format only)");
    cmd->add_option("--data-format", format, "idx|cifar|csv|synth|auto");
    cmd->add_option("--synth-n", synth_n, "synthetic sample count");
    cmd->add_option("--synth-seed", synth_seed, "synthetic generator seed");
    cmd->add_option("--synth-signal", synth_signal, "synthetic prototype contrast");
    cmd->add_option("--synth-sigma", synth_sigma, "synthetic pixel noise");
    cmd->add_option("--limit", limit, "use only the first N samples");
  }

  Dataset load() const {
    std::string fmt = format;
    if (fmt == "auto") {
      if (data == "synth") {
        fmt = "synth";
      } else if (data.size() > 4 && data.substr(data.size() - 4) == ".csv") {
        fmt = "csv";
      } else if (data.size() > 4 && data.substr(data.size() - 4) == ".bin") {
        fmt = "cifar";
      } else {
        fmt = "idx";
      }
    }
    Dataset ds;
    if (fmt == "synth") {
      SyntheticSpec spec;
      spec.count = synth_n;
      spec.seed = synth_seed;
      spec.signal = synth_signal;
      spec.noise_sigma = synth_sigma;
      ds = make_synthetic(spec);
    } else if (fmt == "csv") {
      ds = load_csv(data);
    } else if (fmt == "cifar") {
      ds = load_cifar_binary(data);
    } else if (fmt == "idx") {
      if (labels.empty()) throw ConfigError("idx datasets need --labels");
      ds = load_idx(data, labels);
    } else {
      throw ConfigError("unknown data format '" + fmt + "'");
    }
    if (limit > 0 && limit < ds.size()) ds = subset(ds, 0, limit);
    return ds;
  }
};

std::string out_dir_default() {
  const char* env = std::getenv("SNNCRAFT_OUT");
  return env && *env ? env : ".";
}

std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

std::vector<LayerSpec> arch_from_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DependencyError("architecture file '" + path + "' not found");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad architecture JSON: ") + e.what(), 0);
  }
  std::vector<LayerSpec> layers;
  for (const auto& item : j) {
    std::string kind = item.at("kind").get<std::string>();
    if (kind == "conv") {
      layers.push_back(LayerSpec::conv2d(item.at("k").get<std::size_t>(),
                                         item.at("out").get<std::size_t>(),
                                         item.value("stride", std::size_t(1)),
                                         item.value("pad", std::size_t(0))));
    } else if (kind == "linear") {
      layers.push_back(LayerSpec::linear(item.at("out").get<std::size_t>()));
    } else if (kind == "avgpool") {
      layers.push_back(LayerSpec::avgpool(item.value("window", std::size_t(2))));
    } else if (kind == "dropout") {
      layers.push_back(LayerSpec::dropout(item.value("rate", 0.2)));
    } else if (kind == "neuron") {
      layers.push_back(LayerSpec::neuron());
    } else if (kind == "relu") {
      layers.push_back(LayerSpec::relu());
    } else if (kind == "output-accumulator") {
      layers.push_back(LayerSpec::output_accumulator());
    } else {
      throw ConfigError("unknown layer kind '" + kind + "' in " + path);
    }
  }
  if (layers.empty() || layers.back().kind != LayerKind::kOutputAccumulator) {
    layers.push_back(LayerSpec::output_accumulator());
  }
  return layers;
}

AttackConfig attack_from_flags(const std::string& family, const std::string& eps,
                               double alpha, std::size_t iters, bool random_start,
                               const std::string& encoder, std::uint64_t seed) {
  AttackConfig cfg;
  if (family == "fgsm") {
    cfg.family = AttackFamily::kFgsm;
  } else if (family == "pgd") {
    cfg.family = AttackFamily::kPgd;
  } else {
    throw ConfigError("unknown attack family '" + family + "'");
  }
  cfg.epsilon = parse_value(eps);
  cfg.alpha = alpha;
  cfg.iters = iters;
  cfg.random_start = random_start;
  cfg.seed = seed;
  if (encoder == "poisson") {
    cfg.encoder = Encoder::kPoisson;
  } else if (encoder != "direct") {
    throw ConfigError("unknown encoder '" + encoder + "'");
  }
  cfg.validate();
  return cfg;
}

void require_stage(const Checkpoint& ckpt, std::initializer_list<Stage> allowed,
                   const std::string& what) {
  for (Stage s : allowed) {
    if (ckpt.meta.stage == s) return;
  }
  throw DependencyError(what + " needs a checkpoint in stage " +
                        std::string(stage_name(*allowed.begin())) + ", got " +
                        stage_name(ckpt.meta.stage));
}

int run_cli(int argc, char** argv) {
  CLI::App app{"low-latency spiking network training, attacks and energy metrics"};
  app.require_subcommand(1);

  // ------------------------------------------------------------------ train-ann
  auto* ann_cmd = app.add_subcommand("train-ann", "train the ANN seed model");
  ann_cmd->set_config("--config");
  DataArgs ann_data;
  ann_data.attach(ann_cmd);
  std::string ann_out = out_dir_default(), ann_tag = "ann", ann_arch_file;
  std::size_t ann_epochs = 12, ann_batch = 32;
  double ann_lr = 0.01;
  std::uint64_t ann_seed = 1;
  ann_cmd->add_option("--out", ann_out, "output directory");
  ann_cmd->add_option("--tag", ann_tag, "output file prefix");
  ann_cmd->add_option("--arch-file", ann_arch_file, "JSON layer list");
  ann_cmd->add_option("--epochs", ann_epochs);
  ann_cmd->add_option("--batch", ann_batch);
  ann_cmd->add_option("--lr", ann_lr);
  ann_cmd->add_option("--seed", ann_seed);
  ann_cmd->callback([&] {
    Dataset train = ann_data.load();
    std::vector<LayerSpec> layers = ann_arch_file.empty()
                                        ? desk_conv_arch(train.classes)
                                        : arch_from_json(ann_arch_file);
    for (LayerSpec& l : layers) {
      if (l.kind == LayerKind::kNeuron) l.kind = LayerKind::kRelu;
    }
    ModelGraph g = make_graph(std::move(layers), train.image_shape(), ExecMode::kAnn,
                              1, ann_seed);
    TrainConfig cfg;
    cfg.mode = TrainMode::kAnn;
    cfg.epochs = ann_epochs;
    cfg.batch_size = ann_batch;
    cfg.lr = LrSchedule::ann_default();
    cfg.lr.initial = ann_lr;
    cfg.seed = ann_seed;
    TrainResult res = train_ann(g, train, nullptr, cfg);

    Checkpoint ckpt;
    ckpt.graph = std::move(g);
    ckpt.meta.stage = Stage::kAnnTrained;
    ckpt.meta.train_mode = "ann";
    ckpt.meta.epochs = static_cast<std::uint32_t>(ann_epochs);
    ckpt.meta.seed = ann_seed;
    ckpt.meta.final_lr = cfg.lr.rate_at(ann_epochs ? ann_epochs - 1 : 0, ann_epochs);
    save_checkpoint(ckpt, out_path(ann_out, ann_tag + ".ckpt"));
    write_train_log_csv(out_path(ann_out, ann_tag + "_train_log.csv"), res.log);
    std::cout << "train-ann: final train acc "
              << (res.log.empty() ? 0.0 : res.log.back().train_acc) << "%\n";
  });

  // ------------------------------------------------------------------ convert
  auto* conv_cmd = app.add_subcommand("convert", "ANN-to-SNN threshold calibration");
  conv_cmd->set_config("--config");
  DataArgs conv_data;
  conv_data.attach(conv_cmd);
  std::string conv_ckpt, conv_out = out_dir_default(), conv_tag = "converted";
  double conv_percentile = 99.7;
  std::size_t conv_T = 6, conv_calib = 64;
  conv_cmd->add_option("--ckpt", conv_ckpt, "trained ANN checkpoint")->required();
  conv_cmd->add_option("--out", conv_out);
  conv_cmd->add_option("--tag", conv_tag);
  conv_cmd->add_option("--percentile", conv_percentile, "threshold percentile");
  conv_cmd->add_option("--T", conv_T, "SNN time steps");
  conv_cmd->add_option("--calib-n", conv_calib, "calibration sample count");
  conv_cmd->callback([&] {
    Checkpoint src = load_checkpoint(conv_ckpt);
    require_stage(src, {Stage::kAnnTrained}, "convert");
    Dataset ds = conv_data.load();
    std::size_t n = std::min(conv_calib, ds.size());
    std::vector<Tensor> calib(ds.images.begin(), ds.images.begin() + n);
    ModelGraph snn = convert_ann_to_snn(src.graph, calib, conv_percentile, conv_T);

    Checkpoint out;
    out.graph = std::move(snn);
    out.meta = src.meta;
    out.meta.stage = Stage::kConverted;
    save_checkpoint(out, out_path(conv_out, conv_tag + ".ckpt"));
    std::cout << "convert: thresholds calibrated at percentile " << conv_percentile
              << " over " << n << " samples\n";
  });

  // ------------------------------------------------------------------ train-snn
  auto* snn_cmd =
      app.add_subcommand("train-snn", "SNN training (traditional/hire/gaussian)");
  snn_cmd->set_config("--config");
  DataArgs snn_data;
  snn_data.attach(snn_cmd);
  std::string snn_ckpt, snn_out = out_dir_default(), snn_tag = "snn";
  std::string snn_mode = "traditional";
  std::size_t snn_T = 0, snn_N = 2, snn_epochs = 8, snn_batch = 32;
  std::string snn_eps_s = "0.013", snn_eps_t;
  double snn_lr = 1e-4, snn_gamma = 0.3, snn_momentum = 0.0;
  bool snn_freeze_vt = false, snn_freeze_lk = false, snn_carry = false,
       snn_detach = false;
  std::uint64_t snn_seed = 1;
  snn_cmd->add_option("--ckpt", snn_ckpt, "converted checkpoint")->required();
  snn_cmd->add_option("--out", snn_out);
  snn_cmd->add_option("--tag", snn_tag);
  snn_cmd->add_option("--mode", snn_mode, "traditional|hire|gaussian");
  snn_cmd->add_option("--T", snn_T, "time steps (default: checkpoint value)");
  snn_cmd->add_option("--N", snn_N, "periods per batch");
  snn_cmd->add_option("--eps-s", snn_eps_s, "noise step");
  snn_cmd->add_option("--eps-t", snn_eps_t, "noise bound (default: eps-s)");
  snn_cmd->add_option("--gamma", snn_gamma, "surrogate damping");
  snn_cmd->add_option("--epochs", snn_epochs);
  snn_cmd->add_option("--batch", snn_batch);
  snn_cmd->add_option("--lr", snn_lr);
  snn_cmd->add_option("--momentum", snn_momentum);
  snn_cmd->add_flag("--freeze-vt", snn_freeze_vt, "keep thresholds at initialization");
  snn_cmd->add_flag("--freeze-lk", snn_freeze_lk, "keep leaks at initialization");
  snn_cmd->add_flag("--carry-membrane", snn_carry, "carry membrane across periods");
  snn_cmd->add_flag("--detach-reset", snn_detach, "detach the reset path in BPTT");
  snn_cmd->add_option("--seed", snn_seed);
  snn_cmd->callback([&] {
    Checkpoint src = load_checkpoint(snn_ckpt);
    require_stage(src, {Stage::kConverted, Stage::kSnnTrained}, "train-snn");
    Dataset train = snn_data.load();

    TrainConfig cfg;
    cfg.mode = train_mode_from_name(snn_mode);
    if (cfg.mode == TrainMode::kAnn) throw ConfigError("use train-ann for ANN mode");
    cfg.time_steps = snn_T ? snn_T : src.graph.time_steps;
    cfg.periods = snn_N;
    cfg.eps_s = parse_value(snn_eps_s);
    cfg.eps_t = snn_eps_t.empty() ? cfg.eps_s : parse_value(snn_eps_t);
    if (cfg.mode == TrainMode::kSnnTraditional) {
      cfg.eps_s = 0.0;
      cfg.eps_t = 0.0;
    }
    cfg.epochs = snn_epochs;
    cfg.batch_size = snn_batch;
    cfg.lr = LrSchedule::snn_default();
    cfg.lr.initial = snn_lr;
    cfg.gamma = snn_gamma;
    cfg.momentum = snn_momentum;
    cfg.freeze_v_t = snn_freeze_vt;
    cfg.freeze_l_k = snn_freeze_lk;
    cfg.carry_membrane = snn_carry;
    cfg.detach_reset = snn_detach;
    cfg.seed = snn_seed;

    ModelGraph g = std::move(src.graph);
    g.time_steps = cfg.time_steps;
    TrainResult res = train_snn(g, train, nullptr, cfg);

    Checkpoint out;
    out.graph = std::move(g);
    out.meta.stage = Stage::kSnnTrained;
    out.meta.train_mode = train_mode_name(cfg.mode);
    out.meta.epochs = static_cast<std::uint32_t>(cfg.epochs);
    out.meta.seed = cfg.seed;
    out.meta.final_lr = cfg.lr.rate_at(cfg.epochs ? cfg.epochs - 1 : 0, cfg.epochs);
    out.meta.gamma = cfg.gamma;
    save_checkpoint(out, out_path(snn_out, snn_tag + ".ckpt"));
    write_train_log_csv(out_path(snn_out, snn_tag + "_train_log.csv"), res.log);
    std::cout << "train-snn(" << train_mode_name(cfg.mode) << "): stored steps/update "
              << res.peak_stored_steps << ", updates " << res.updates << "\n";
  });

  // ------------------------------------------------------------------ attack
  auto* atk_cmd = app.add_subcommand("attack", "generate an adversarial batch");
  atk_cmd->set_config("--config");
  DataArgs atk_data;
  atk_data.attach(atk_cmd);
  std::string atk_ckpt, atk_source, atk_out = out_dir_default(), atk_tag = "attack";
  std::string atk_family = "fgsm", atk_eps = "8/255", atk_encoder = "direct";
  double atk_alpha = 0.01;
  std::size_t atk_iters = 7;
  bool atk_random_start = false;
  std::uint64_t atk_seed = 1;
  atk_cmd->add_option("--ckpt", atk_ckpt, "target model checkpoint")->required();
  atk_cmd->add_option("--source", atk_source, "black-box source checkpoint");
  atk_cmd->add_option("--out", atk_out);
  atk_cmd->add_option("--tag", atk_tag);
  atk_cmd->add_option("--family", atk_family, "fgsm|pgd");
  atk_cmd->add_option("--eps", atk_eps, "L-inf bound (accepts a/b)");
  atk_cmd->add_option("--alpha", atk_alpha, "PGD step size");
  atk_cmd->add_option("--K", atk_iters, "PGD iterations");
  atk_cmd->add_flag("--random-start", atk_random_start);
  atk_cmd->add_option("--encoder", atk_encoder, "direct|poisson");
  atk_cmd->add_option("--seed", atk_seed);
  atk_cmd->callback([&] {
    Checkpoint target = load_checkpoint(atk_ckpt);
    Dataset ds = atk_data.load();
    AttackConfig cfg = attack_from_flags(atk_family, atk_eps, atk_alpha, atk_iters,
                                         atk_random_start, atk_encoder, atk_seed);
    Checkpoint source;
    bool blackbox = !atk_source.empty();
    if (blackbox) source = load_checkpoint(atk_source);

    Dataset adv = ds;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      adv.images[i] =
          blackbox ? blackbox_generate(source.graph, target.graph, ds.images[i],
                                       ds.labels[i], cfg)
                   : generate_adversarial(target.graph, ds.images[i], ds.labels[i], cfg);
      if (predict_class(target.graph, adv.images[i], cfg.encoder, cfg.seed) ==
          ds.labels[i]) {
        ++correct;
      }
    }
    double acc = 100.0 * static_cast<double>(correct) / static_cast<double>(ds.size());
    save_csv(adv, out_path(atk_out, atk_tag + "_adv.csv"));
    std::vector<KvRow> rows = {{"tag", atk_tag},
                               {"family", atk_family},
                               {"eps", format_double(cfg.epsilon)},
                               {"alpha", format_double(cfg.alpha)},
                               {"K", std::to_string(cfg.iters)},
                               {"setting", blackbox ? "black-box" : "white-box"},
                               {"samples", std::to_string(ds.size())},
                               {"accuracy", format_double(acc)}};
    write_kv_csv(out_path(atk_out, atk_tag + "_summary.csv"), rows);
    std::cout << "attack: robust accuracy " << acc << "% over " << ds.size()
              << " images\n";
  });

  // ------------------------------------------------------------------ eval
  auto* eval_cmd = app.add_subcommand("eval", "accuracy + activity/energy report");
  eval_cmd->set_config("--config");
  DataArgs eval_data;
  eval_data.attach(eval_cmd);
  std::string eval_ckpt, eval_source, eval_out = out_dir_default(), eval_tag = "eval";
  std::string eval_family, eval_eps = "8/255", eval_encoder = "direct";
  std::string eval_precision = "fp32";
  double eval_alpha = 0.01;
  std::size_t eval_iters = 7;
  bool eval_checklist = false;
  std::uint64_t eval_seed = 1;
  eval_cmd->add_option("--ckpt", eval_ckpt)->required();
  eval_cmd->add_option("--source", eval_source, "black-box source checkpoint");
  eval_cmd->add_option("--out", eval_out);
  eval_cmd->add_option("--tag", eval_tag);
  eval_cmd->add_option("--family", eval_family, "attack family; omit for clean");
  eval_cmd->add_option("--eps", eval_eps);
  eval_cmd->add_option("--alpha", eval_alpha);
  eval_cmd->add_option("--K", eval_iters);
  eval_cmd->add_option("--encoder", eval_encoder, "direct|poisson");
  eval_cmd->add_option("--precision", eval_precision, "fp32|int32");
  eval_cmd->add_flag("--checklist", eval_checklist, "run the obfuscation checklist");
  eval_cmd->add_option("--seed", eval_seed);
  eval_cmd->callback([&] {
    Checkpoint ckpt = load_checkpoint(eval_ckpt);
    Dataset ds = eval_data.load();

    EvalOptions opt;
    opt.encoder = eval_encoder == "poisson" ? Encoder::kPoisson : Encoder::kDirect;
    opt.precision = eval_precision == "int32" ? Precision::kInt32 : Precision::kFp32;
    opt.encoder_seed = eval_seed;
    Checkpoint source;
    if (!eval_family.empty()) {
      opt.attack = attack_from_flags(eval_family, eval_eps, eval_alpha, eval_iters,
                                     false, eval_encoder, eval_seed);
      if (!eval_source.empty()) {
        source = load_checkpoint(eval_source);
        opt.attack_source = &source.graph;
      }
    }
    EvalResult res = evaluate(ckpt.graph, ds, opt);
    write_layer_report(out_path(eval_out, eval_tag + "_layers.csv"), res.layers);
    write_kv_csv(out_path(eval_out, eval_tag + "_summary.csv"),
                 eval_summary_rows(res, eval_tag));

    if (eval_checklist) {
      ChecklistOptions copt;
      copt.attack = opt.attack ? *opt.attack
                               : attack_from_flags("pgd", eval_eps, eval_alpha,
                                                   eval_iters, false, eval_encoder,
                                                   eval_seed);
      if (opt.attack_source) copt.blackbox_source = opt.attack_source;
      std::vector<ChecklistRow> rows = obfuscation_checklist(ckpt.graph, ds, copt);
      write_checklist_csv(out_path(eval_out, eval_tag + "_checklist.csv"), rows);
      for (const ChecklistRow& r : rows) {
        std::cout << (r.pass ? "pass" : "FAIL") << "  " << r.test << "  ["
                  << r.measured << "]\n";
      }
    }
    std::cout << "eval: accuracy " << res.accuracy << "% over " << res.samples
              << " images\n";
  });

  // ------------------------------------------------------------------ sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "attack-strength or eps_s knob sweeps");
  sweep_cmd->set_config("--config");
  DataArgs sweep_data;
  sweep_data.attach(sweep_cmd);
  std::string sweep_ckpt, sweep_out = out_dir_default(), sweep_tag = "sweep";
  std::string sweep_eps_list, sweep_k_list, sweep_eps_s_list;
  std::string sweep_eps = "8/255";
  double sweep_alpha = 0.01;
  std::size_t sweep_iters = 7;
  std::size_t sweep_T = 0, sweep_N = 2, sweep_epochs = 4, sweep_batch = 32;
  double sweep_lr = 1e-4;
  std::uint64_t sweep_seed = 1;
  sweep_cmd->add_option("--ckpt", sweep_ckpt)->required();
  sweep_cmd->add_option("--out", sweep_out);
  sweep_cmd->add_option("--tag", sweep_tag);
  sweep_cmd->add_option("--eps", sweep_eps_list, "epsilon list/range for attacks");
  sweep_cmd->add_option("--K", sweep_k_list, "PGD iteration list/range");
  sweep_cmd->add_option("--eps-s", sweep_eps_s_list, "training noise-step list/range");
  sweep_cmd->add_option("--attack-eps", sweep_eps, "fixed eps for K sweeps");
  sweep_cmd->add_option("--alpha", sweep_alpha);
  sweep_cmd->add_option("--attack-K", sweep_iters, "fixed K for eps sweeps");
  sweep_cmd->add_option("--T", sweep_T);
  sweep_cmd->add_option("--N", sweep_N);
  sweep_cmd->add_option("--epochs", sweep_epochs);
  sweep_cmd->add_option("--batch", sweep_batch);
  sweep_cmd->add_option("--lr", sweep_lr);
  sweep_cmd->add_option("--seed", sweep_seed);
  sweep_cmd->callback([&] {
    Checkpoint ckpt = load_checkpoint(sweep_ckpt);
    Dataset ds = sweep_data.load();
    int chosen = (!sweep_eps_list.empty()) + (!sweep_k_list.empty()) +
                 (!sweep_eps_s_list.empty());
    if (chosen != 1) {
      throw ConfigError("sweep needs exactly one of --eps, --K, --eps-s");
    }

    AttackConfig base;
    base.family = AttackFamily::kPgd;
    base.epsilon = parse_value(sweep_eps);
    base.alpha = sweep_alpha;
    base.iters = sweep_iters;
    base.seed = sweep_seed;

    if (!sweep_eps_s_list.empty()) {
      require_stage(ckpt, {Stage::kConverted}, "eps-s sweep");
      std::ofstream f(out_path(sweep_out, sweep_tag + "_eps_s.csv"));
      f << "eps_s,clean_acc,fgsm_acc,pgd_acc\n";
      for (double eps_s : parse_list(sweep_eps_s_list)) {
        ModelGraph g = ckpt.graph;
        TrainConfig cfg;
        cfg.mode = eps_s == 0.0 ? TrainMode::kSnnTraditional : TrainMode::kSnnHire;
        cfg.time_steps = sweep_T ? sweep_T : g.time_steps;
        cfg.periods = sweep_N;
        cfg.eps_s = eps_s;
        cfg.eps_t = eps_s;
        cfg.epochs = sweep_epochs;
        cfg.batch_size = sweep_batch;
        cfg.lr = LrSchedule::snn_default();
        cfg.lr.initial = sweep_lr;
        cfg.seed = sweep_seed;
        g.time_steps = cfg.time_steps;
        train_snn(g, ds, nullptr, cfg);

        EvalOptions clean;
        double acc_clean = evaluate(g, ds, clean).accuracy;
        EvalOptions fg;
        fg.attack = base;
        fg.attack->family = AttackFamily::kFgsm;
        fg.collect_pd = false;
        double acc_fgsm = evaluate(g, ds, fg).accuracy;
        EvalOptions pg;
        pg.attack = base;
        pg.collect_pd = false;
        double acc_pgd = evaluate(g, ds, pg).accuracy;
        f << format_double(eps_s) << "," << format_double(acc_clean) << ","
          << format_double(acc_fgsm) << "," << format_double(acc_pgd) << "\n";
        std::cout << "eps_s=" << eps_s << " clean=" << acc_clean
                  << " fgsm=" << acc_fgsm << " pgd=" << acc_pgd << "\n";
      }
      return;
    }

    SweepAxis axis =
        sweep_eps_list.empty() ? SweepAxis::kIterations : SweepAxis::kEpsilon;
    std::vector<double> values =
        parse_list(sweep_eps_list.empty() ? sweep_k_list : sweep_eps_list);
    std::vector<SweepPoint> curve =
        attack_sweep(ckpt.graph, ds.images, ds.labels, axis, values, base);
    write_sweep_csv(out_path(sweep_out, sweep_tag + "_sweep.csv"),
                    axis == SweepAxis::kEpsilon ? "eps" : "K", curve);
    for (const SweepPoint& p : curve) {
      std::cout << (axis == SweepAxis::kEpsilon ? "eps=" : "K=") << p.value
                << " accuracy=" << p.accuracy << "%\n";
    }
  });

  // ------------------------------------------------------------------ energy-report
  auto* en_cmd = app.add_subcommand("energy-report", "FLOPs and compute-energy model");
  en_cmd->set_config("--config");
  DataArgs en_data;
  en_data.attach(en_cmd);
  std::string en_ckpt, en_out = out_dir_default(), en_tag = "energy";
  std::string en_precision = "fp32";
  std::uint64_t en_seed = 1;
  en_cmd->add_option("--ckpt", en_ckpt)->required();
  en_cmd->add_option("--out", en_out);
  en_cmd->add_option("--tag", en_tag);
  en_cmd->add_option("--precision", en_precision, "fp32|int32");
  en_cmd->add_option("--seed", en_seed);
  en_cmd->callback([&] {
    Checkpoint ckpt = load_checkpoint(en_ckpt);
    Dataset ds = en_data.load();
    Precision prec = en_precision == "int32" ? Precision::kInt32 : Precision::kFp32;

    EvalOptions opt;
    opt.precision = prec;
    opt.encoder_seed = en_seed;
    EvalResult res = evaluate(ckpt.graph, ds, opt);
    write_layer_report(out_path(en_out, en_tag + "_layers.csv"), res.layers);

    // zeta from the recorded run, re-priced under each input mode
    std::vector<double> zeta;
    for (const LayerActivityRecord& r : res.layers) {
      if (r.kind == "conv" || r.kind == "linear") {
        zeta.push_back(r.flops_ann ? r.flops_snn / static_cast<double>(r.flops_ann)
                                   : 0.0);
      }
    }
    std::vector<LayerFlops> fl = flops_report(ckpt.graph, zeta);
    double e_direct = snn_energy_pj(fl, InputMode::kDirect, prec);
    double e_rate = snn_energy_pj(fl, InputMode::kRate, prec);
    double e_ann = ann_energy_pj(fl, prec);
    std::vector<KvRow> rows = {
        {"tag", en_tag},
        {"precision", en_precision},
        {"accuracy", format_double(res.accuracy)},
        {"energy_direct_pj", format_double(e_direct)},
        {"energy_rate_pj", format_double(e_rate)},
        {"energy_ann_pj", format_double(e_ann)},
        {"ratio_rate_over_direct", format_double(e_direct > 0 ? e_rate / e_direct : 0.0)},
        {"ratio_ann_over_direct", format_double(e_direct > 0 ? e_ann / e_direct : 0.0)},
    };
    write_kv_csv(out_path(en_out, en_tag + "_summary.csv"), rows);
    std::cout << "energy: direct " << e_direct << " pJ, rate " << e_rate
              << " pJ, ann " << e_ann << " pJ\n";
  });

  // ------------------------------------------------------------------ compare
  auto* cmp_cmd = app.add_subcommand("compare", "delta table between two summaries");
  std::string cmp_a, cmp_b, cmp_out = out_dir_default(), cmp_tag = "compare";
  cmp_cmd->add_option("--a", cmp_a, "first summary CSV")->required();
  cmp_cmd->add_option("--b", cmp_b, "second summary CSV")->required();
  cmp_cmd->add_option("--out", cmp_out);
  cmp_cmd->add_option("--tag", cmp_tag);
  cmp_cmd->callback([&] {
    std::vector<KvRow> a = read_kv_csv(cmp_a);
    std::vector<KvRow> b = read_kv_csv(cmp_b);
    std::vector<KvRow> delta = compare_summaries(a, b);
    write_kv_csv(out_path(cmp_out, cmp_tag + "_delta.csv"), delta);
    for (const KvRow& r : delta) std::cout << r.key << " = " << r.value << "\n";
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
