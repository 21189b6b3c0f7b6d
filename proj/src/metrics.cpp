#include "snncraft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "snncraft/error.hpp"
#include "snncraft/rng.hpp"

namespace snncraft {

void EnergyConstants::validate() const {
  auto close = [](double a, double b) { return std::fabs(a - b) < 1e-12; };
  if (!close(mac_int32(), table_mac_int32) || !close(ac_int32(), table_ac_int32) ||
      !close(mac_fp32(), table_mac_fp32) || !close(ac_fp32(), table_ac_fp32)) {
    throw ConfigError("energy constants do not reproduce the table values");
  }
}

Activity spiking_activity(double total_spikes, std::size_t neuron_count,
                          std::size_t steps) {
  if (neuron_count == 0) throw InputError("spiking activity of zero neurons");
  if (steps < 1) throw InputError("spiking activity needs steps >= 1");
  Activity a;
  a.sa = total_spikes / static_cast<double>(neuron_count);
  a.tasa = a.sa / static_cast<double>(steps);
  return a;
}

Activity spiking_activity(const SpikeTrace& trace, std::size_t steps) {
  if (trace.steps() == 0) throw InputError("spiking activity of an empty trace");
  return spiking_activity(trace.total_spikes(), trace.spikes[0].size(), steps);
}

double perturbation_distance(const Tensor& x, const Tensor& x_adv) {
  require_same_shape(x, x_adv, "perturbation_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = std::fabs(x.data[i] - x_adv.data[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

Tensor spike_counts(const SpikeTrace& trace) {
  if (trace.steps() == 0) throw InputError("spike counts of an empty trace");
  Tensor counts = Tensor::zeros(trace.spikes[0].shape);
  for (const Tensor& s : trace.spikes) add_into(counts, s);
  return counts;
}

double spike_pd(const Tensor& counts_clean, const Tensor& counts_adv,
                std::size_t steps) {
  require_same_shape(counts_clean, counts_adv, "spike_pd");
  if (steps < 1) throw InputError("spike_pd needs steps >= 1");
  double sum = 0.0;
  double inv = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < counts_clean.size(); ++i) {
    double d = std::fabs(counts_clean.data[i] * inv - counts_adv.data[i] * inv);
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<LayerFlops> flops_report(const ModelGraph& g,
                                     const std::vector<double>& zeta) {
  std::vector<LayerFlops> out;
  std::size_t weighted = 0;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const LayerSpec& spec = g.layers[l];
    if (spec.kind != LayerKind::kConv && spec.kind != LayerKind::kLinear) continue;
    LayerFlops f;
    f.layer = l;
    f.kind = layer_kind_name(spec.kind);
    f.neurons = numel(g.out_shapes[l]);
    f.flops_ann = spec.kind == LayerKind::kConv
                      ? conv2d_flops(spec.conv, g.in_shapes[l])
                      : linear_flops(numel(g.in_shapes[l]), spec.linear_out);
    if (!zeta.empty()) {
      if (weighted >= zeta.size()) {
        throw InputError("flops_report: missing activity for weighted layer " +
                         std::to_string(l));
      }
      f.zeta = zeta[weighted];
      f.flops_snn = static_cast<double>(f.flops_ann) * f.zeta;
    }
    ++weighted;
    out.push_back(std::move(f));
  }
  return out;
}

double snn_energy_pj(const std::vector<LayerFlops>& layers, InputMode input_mode,
                     Precision precision, const EnergyConstants& constants) {
  double e_mac = precision == Precision::kFp32 ? constants.mac_fp32()
                                               : constants.mac_int32();
  double e_ac = precision == Precision::kFp32 ? constants.ac_fp32()
                                              : constants.ac_int32();
  double total = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    bool mac_layer = input_mode == InputMode::kDirect && i == 0;
    total += layers[i].flops_snn * (mac_layer ? e_mac : e_ac);
  }
  return total;
}

double ann_energy_pj(const std::vector<LayerFlops>& layers, Precision precision,
                     const EnergyConstants& constants) {
  double e_mac = precision == Precision::kFp32 ? constants.mac_fp32()
                                               : constants.mac_int32();
  double total = 0.0;
  for (const LayerFlops& f : layers) {
    total += static_cast<double>(f.flops_ann) * e_mac;
  }
  return total;
}

namespace {

// Fraction of nonzero values in the inputs a weighted layer saw, per step.
// Equals the TASA of a binary input spike map; 1.0 for a dense direct-coded
// image.
double input_activity(const std::vector<Tensor>& step_inputs) {
  if (step_inputs.empty()) return 0.0;
  std::size_t nonzero = 0, total = 0;
  for (const Tensor& t : step_inputs) {
    for (double v : t.data)
      if (v != 0.0) ++nonzero;
    total += t.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(nonzero) / static_cast<double>(total);
}

}  // namespace

EvalResult evaluate(const ModelGraph& g, const Dataset& ds, const EvalOptions& opt) {
  if (ds.size() == 0) throw InputError("evaluate needs a non-empty dataset");
  ds.validate();

  EvalResult res;
  res.samples = ds.size();

  const bool snn = g.mode == ExecMode::kSnn;
  const std::size_t L = g.layers.size();
  std::vector<double> spikes_total(L, 0.0);
  std::vector<std::vector<double>> zeta_sums;  // per image, per weighted layer
  std::vector<double> spd_sum;
  std::size_t spd_count = 0;
  std::size_t correct = 0;
  double pd_sum = 0.0;

  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Tensor& clean = ds.images[i];
    Tensor input = clean;
    if (opt.attack && opt.attack->epsilon >= 0.0) {
      const ModelGraph& crafter = opt.attack_source ? *opt.attack_source : g;
      input = opt.attack_source
                  ? blackbox_generate(crafter, g, clean, ds.labels[i], *opt.attack)
                  : generate_adversarial(g, clean, ds.labels[i], *opt.attack);
      double pd = perturbation_distance(clean, input);
      pd_sum += pd;
      res.pd_max = std::max(res.pd_max, pd);
    }

    if (!snn) {
      AnnRun run = forward_ann(g, input);
      std::size_t pred = static_cast<std::size_t>(
          std::max_element(run.logits.data.begin(), run.logits.data.end()) -
          run.logits.data.begin());
      if (pred == ds.labels[i]) ++correct;
      continue;
    }

    SnnOptions sopt;
    sopt.encoder = opt.encoder;
    sopt.encoder_seed = mix_seed(opt.encoder_seed, i);
    sopt.record = true;
    SnnRun run = forward_snn(g, input, sopt);
    std::size_t pred = static_cast<std::size_t>(
        std::max_element(run.logits.data.begin(), run.logits.data.end()) -
        run.logits.data.begin());
    if (pred == ds.labels[i]) ++correct;

    std::vector<double> zeta;
    for (std::size_t l = 0; l < L; ++l) {
      if (g.layers[l].kind == LayerKind::kNeuron) {
        spikes_total[l] += run.traces[l].total_spikes();
      }
      if (g.layers[l].kind == LayerKind::kConv ||
          g.layers[l].kind == LayerKind::kLinear) {
        zeta.push_back(input_activity(run.layer_inputs[l]));
      }
    }
    zeta_sums.push_back(std::move(zeta));

    if (opt.attack && opt.collect_pd) {
      // Spike-PD needs the clean trace too.
      SnnOptions copt = sopt;
      SnnRun clean_run = forward_snn(g, clean, copt);
      std::size_t k = 0;
      for (std::size_t l = 0; l < L; ++l) {
        if (g.layers[l].kind != LayerKind::kNeuron) continue;
        double spd = spike_pd(spike_counts(clean_run.traces[l]),
                              spike_counts(run.traces[l]), run.steps);
        if (spd_sum.size() <= k) spd_sum.push_back(0.0);
        spd_sum[k++] += spd;
      }
      ++spd_count;
    }
  }

  res.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(ds.size());
  if (opt.attack) {
    res.pd_mean = pd_sum / static_cast<double>(ds.size());
  }
  if (spd_count > 0) {
    for (double s : spd_sum) res.spike_pd_mean.push_back(s / static_cast<double>(spd_count));
  }

  if (snn) {
    // Mean input activity per weighted layer across the dataset.
    std::vector<double> zeta_mean;
    if (!zeta_sums.empty()) {
      zeta_mean.assign(zeta_sums[0].size(), 0.0);
      for (const auto& z : zeta_sums)
        for (std::size_t k = 0; k < z.size(); ++k) zeta_mean[k] += z[k];
      for (double& v : zeta_mean) v /= static_cast<double>(zeta_sums.size());
    }
    std::vector<LayerFlops> fl = flops_report(g, zeta_mean);
    EnergyConstants ec;
    double e_mac = opt.precision == Precision::kFp32 ? ec.mac_fp32() : ec.mac_int32();
    double e_ac = opt.precision == Precision::kFp32 ? ec.ac_fp32() : ec.ac_int32();
    InputMode im = opt.encoder == Encoder::kDirect ? InputMode::kDirect
                                                   : InputMode::kRate;
    res.energy_total_pj = snn_energy_pj(fl, im, opt.precision);

    std::size_t weighted = 0;
    for (std::size_t l = 0; l < L; ++l) {
      LayerActivityRecord rec;
      rec.layer = l;
      rec.kind = layer_kind_name(g.layers[l].kind);
      rec.neurons = numel(g.out_shapes[l]);
      if (g.layers[l].kind == LayerKind::kNeuron) {
        Activity a = spiking_activity(
            spikes_total[l] / static_cast<double>(ds.size()), rec.neurons,
            g.time_steps);
        rec.sa = a.sa;
        rec.tasa = a.tasa;
      }
      if (g.layers[l].kind == LayerKind::kConv ||
          g.layers[l].kind == LayerKind::kLinear) {
        rec.flops_ann = fl[weighted].flops_ann;
        rec.flops_snn = fl[weighted].flops_snn;
        bool mac_layer = im == InputMode::kDirect && weighted == 0;
        rec.energy_pj = fl[weighted].flops_snn * (mac_layer ? e_mac : e_ac);
        ++weighted;
      }
      res.layers.push_back(std::move(rec));
    }
  } else {
    std::vector<LayerFlops> fl = flops_report(g, {});
    res.energy_total_pj = ann_energy_pj(fl, opt.precision);
    std::size_t weighted = 0;
    EnergyConstants ec;
    double e_mac = opt.precision == Precision::kFp32 ? ec.mac_fp32() : ec.mac_int32();
    for (std::size_t l = 0; l < L; ++l) {
      if (g.layers[l].kind != LayerKind::kConv &&
          g.layers[l].kind != LayerKind::kLinear)
        continue;
      LayerActivityRecord rec;
      rec.layer = l;
      rec.kind = layer_kind_name(g.layers[l].kind);
      rec.neurons = numel(g.out_shapes[l]);
      rec.flops_ann = fl[weighted].flops_ann;
      rec.energy_pj = static_cast<double>(fl[weighted].flops_ann) * e_mac;
      ++weighted;
      res.layers.push_back(std::move(rec));
    }
  }
  return res;
}

double delta_accuracy(double acc_a, double acc_b) { return acc_a - acc_b; }

std::vector<ChecklistRow> obfuscation_checklist(const ModelGraph& g,
                                                const Dataset& ds,
                                                const ChecklistOptions& opt) {
  if (ds.size() == 0) throw InputError("checklist needs a non-empty dataset");
  char buf[160];
  std::vector<ChecklistRow> rows;
  const double tol = opt.tolerance_points;

  EvalOptions fgsm_opt;
  fgsm_opt.attack = opt.attack;
  fgsm_opt.attack->family = AttackFamily::kFgsm;
  fgsm_opt.collect_pd = false;
  double acc_fgsm = evaluate(g, ds, fgsm_opt).accuracy;

  EvalOptions pgd_opt;
  pgd_opt.attack = opt.attack;
  pgd_opt.attack->family = AttackFamily::kPgd;
  pgd_opt.collect_pd = false;
  double acc_pgd_wb = evaluate(g, ds, pgd_opt).accuracy;

  std::snprintf(buf, sizeof buf, "fgsm=%.2f pgd=%.2f", acc_fgsm, acc_pgd_wb);
  rows.push_back({"single-step attack weaker than iterative",
                  acc_fgsm >= acc_pgd_wb - tol, buf});

  if (opt.blackbox_source != nullptr) {
    EvalOptions bb_opt = pgd_opt;
    bb_opt.attack_source = opt.blackbox_source;
    double acc_pgd_bb = evaluate(g, ds, bb_opt).accuracy;
    std::snprintf(buf, sizeof buf, "bb=%.2f wb=%.2f", acc_pgd_bb, acc_pgd_wb);
    rows.push_back({"black-box attack weaker than white-box",
                    acc_pgd_bb >= acc_pgd_wb - tol, buf});
  } else {
    rows.push_back({"black-box attack weaker than white-box", false,
                    "no source model supplied"});
  }

  std::vector<double> eps = opt.eps_sweep;
  if (eps.empty()) eps = {0.0, 2.0 / 255, 8.0 / 255, 32.0 / 255, 128.0 / 255, 1.0};
  AttackConfig sweep_cfg = opt.attack;
  sweep_cfg.family = AttackFamily::kPgd;
  std::vector<SweepPoint> curve =
      attack_sweep(g, ds.images, ds.labels, SweepAxis::kEpsilon, eps, sweep_cfg);

  bool monotone = true;
  std::string curve_str;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (i > 0 && curve[i].accuracy > curve[i - 1].accuracy + tol) monotone = false;
    std::snprintf(buf, sizeof buf, "%s%.3f:%.1f", i ? " " : "", curve[i].value,
                  curve[i].accuracy);
    curve_str += buf;
  }
  rows.push_back({"accuracy non-increasing in eps", monotone, curve_str});

  double chance = 100.0 / static_cast<double>(ds.classes);
  double final_acc = curve.back().accuracy;
  std::snprintf(buf, sizeof buf, "acc(eps=%.2f)=%.2f chance=%.2f", curve.back().value,
                final_acc, chance);
  rows.push_back({"unbounded attack reaches chance", final_acc <= chance + 5.0, buf});

  std::size_t fooled = 0;
  AttackConfig probe = opt.attack;
  probe.family = AttackFamily::kPgd;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Tensor adv = generate_adversarial(g, ds.images[i], ds.labels[i], probe);
    if (predict_class(g, adv) != ds.labels[i]) {
      ++fooled;
      break;
    }
  }
  std::snprintf(buf, sizeof buf, "adversarial examples found: %s",
                fooled ? "yes" : "no");
  rows.push_back({"gradient attacks find adversarial examples", fooled > 0, buf});
  return rows;
}

}  // namespace snncraft
