#include "snncraft/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "snncraft/error.hpp"

namespace snncraft {

std::string format_double(double v) {
  char buf[40];
  // Shortest representation that round-trips a double.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = std::strtod(buf, nullptr);
    if (back == v || (std::isnan(back) && std::isnan(v))) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw InputError("cannot write '" + path + "'");
  return f;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_kv_csv(const std::string& path, const std::vector<KvRow>& rows) {
  std::ofstream f = open_out(path);
  f << "key,value\n";
  for (const KvRow& r : rows) f << r.key << "," << r.value << "\n";
}

std::vector<KvRow> read_kv_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DependencyError("report '" + path + "' not found");
  std::string line;
  if (!std::getline(f, line) || line != "key,value") {
    throw FormatError("'" + path + "' is not a key/value report", 0);
  }
  std::vector<KvRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) throw FormatError("bad row in '" + path + "'", 0);
    rows.push_back({fields[0], fields[1]});
  }
  return rows;
}

std::string kv_lookup(const std::vector<KvRow>& rows, const std::string& key) {
  for (const KvRow& r : rows)
    if (r.key == key) return r.value;
  throw InputError("report has no key '" + key + "'");
}

void write_layer_report(const std::string& path,
                        const std::vector<LayerActivityRecord>& layers) {
  std::ofstream f = open_out(path);
  f << "layer,kind,neurons,sa,tasa,flops_ann,flops_snn,energy_pj\n";
  for (const LayerActivityRecord& r : layers) {
    f << r.layer << "," << r.kind << "," << r.neurons << "," << format_double(r.sa)
      << "," << format_double(r.tasa) << "," << r.flops_ann << ","
      << format_double(r.flops_snn) << "," << format_double(r.energy_pj) << "\n";
  }
}

std::vector<LayerActivityRecord> read_layer_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DependencyError("report '" + path + "' not found");
  std::string line;
  if (!std::getline(f, line) ||
      line != "layer,kind,neurons,sa,tasa,flops_ann,flops_snn,energy_pj") {
    throw FormatError("'" + path + "' is not a layer report", 0);
  }
  std::vector<LayerActivityRecord> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 8) throw FormatError("bad row in '" + path + "'", 0);
    LayerActivityRecord r;
    r.layer = std::strtoull(fields[0].c_str(), nullptr, 10);
    r.kind = fields[1];
    r.neurons = std::strtoull(fields[2].c_str(), nullptr, 10);
    r.sa = std::strtod(fields[3].c_str(), nullptr);
    r.tasa = std::strtod(fields[4].c_str(), nullptr);
    r.flops_ann = std::strtoull(fields[5].c_str(), nullptr, 10);
    r.flops_snn = std::strtod(fields[6].c_str(), nullptr);
    r.energy_pj = std::strtod(fields[7].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_checklist_csv(const std::string& path,
                         const std::vector<ChecklistRow>& rows) {
  std::ofstream f = open_out(path);
  f << "test,pass,measured\n";
  for (const ChecklistRow& r : rows) {
    f << r.test << "," << (r.pass ? "pass" : "fail") << "," << r.measured << "\n";
  }
}

void write_train_log_csv(const std::string& path,
                         const std::vector<TrainLogRow>& rows) {
  std::ofstream f = open_out(path);
  f << "epoch,mode,train_acc,val_acc,loss,lr,kappa_saturation,sim_steps\n";
  for (const TrainLogRow& r : rows) {
    f << r.epoch << "," << r.mode << "," << format_double(r.train_acc) << ","
      << format_double(r.val_acc) << "," << format_double(r.loss) << ","
      << format_double(r.lr) << "," << format_double(r.kappa_saturation) << ","
      << r.sim_steps << "\n";
  }
}

std::vector<KvRow> eval_summary_rows(const EvalResult& res, const std::string& tag) {
  std::vector<KvRow> rows;
  rows.push_back({"tag", tag});
  rows.push_back({"samples", std::to_string(res.samples)});
  rows.push_back({"accuracy", format_double(res.accuracy)});
  rows.push_back({"energy_total_pj", format_double(res.energy_total_pj)});
  rows.push_back({"pd_mean", format_double(res.pd_mean)});
  rows.push_back({"pd_max", format_double(res.pd_max)});
  for (std::size_t i = 0; i < res.spike_pd_mean.size(); ++i) {
    rows.push_back({"spike_pd_mean_" + std::to_string(i),
                    format_double(res.spike_pd_mean[i])});
  }
  return rows;
}

std::vector<KvRow> compare_summaries(const std::vector<KvRow>& a,
                                     const std::vector<KvRow>& b) {
  std::vector<KvRow> out;
  for (const KvRow& ra : a) {
    for (const KvRow& rb : b) {
      if (ra.key != rb.key) continue;
      char* enda = nullptr;
      char* endb = nullptr;
      double va = std::strtod(ra.value.c_str(), &enda);
      double vb = std::strtod(rb.value.c_str(), &endb);
      bool numeric = enda != ra.value.c_str() && *enda == '\0' &&
                     endb != rb.value.c_str() && *endb == '\0';
      if (numeric) {
        out.push_back({"delta_" + ra.key, format_double(va - vb)});
      }
      break;
    }
  }
  return out;
}

void write_sweep_csv(const std::string& path, const std::string& axis,
                     const std::vector<SweepPoint>& curve) {
  std::ofstream f = open_out(path);
  f << axis << ",accuracy\n";
  for (const SweepPoint& p : curve) {
    f << format_double(p.value) << "," << format_double(p.accuracy) << "\n";
  }
}

}  // namespace snncraft
