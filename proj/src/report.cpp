// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/report.hpp"

#include <cstdio>
#include <sstream>

namespace emtnet {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string metric_columns(const MetricsReport& r) {
  return format_metric(r.acc) + ',' + format_metric(r.sen) + ',' + format_metric(r.spe) + ',' +
         format_metric(r.dsc) + ',' + format_metric(r.iou);
}

}  // namespace

std::string metrics_record(const MetricsReport& r) {
  return "acc=" + format_metric(r.acc) + " sen=" + format_metric(r.sen) + " spe=" + format_metric(r.spe) +
         " dsc=" + format_metric(r.dsc) + " iou=" + format_metric(r.iou) + " n=" + std::to_string(r.n_samples);
}

std::string sweep_csv_header() { return "w_p,w_clf,acc,sen,spe,dsc,iou"; }

std::string sweep_csv_row(const SweepRow& row) {
  return number(row.w_p) + ',' + (row.w_clf ? number(*row.w_clf) : "NA") + ',' + metric_columns(row.report);
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = sweep_csv_header() + '\n';
  for (const auto& r : rows) out += sweep_csv_row(r) + '\n';
  return out;
}

std::string run_csv(const RunRecord& record) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_acc,val_dsc\n";
  for (const auto& e : record.epochs) {
    char loss[32];
    std::snprintf(loss, sizeof loss, "%.9g", e.train_loss);
    out << e.epoch << ',' << loss << ',' << format_metric(e.val_loss) << ',' << format_metric(e.val.acc) << ','
        << format_metric(e.val.dsc) << '\n';
  }
  return out.str();
}

std::string run_report(const RunRecord& record) {
  const TrainConfig& c = record.config;
  std::ostringstream out;
  out << "variant: " << to_string(c.variant) << '\n'
      << "width: " << (c.toy ? "toy" : "full") << '\n'
      << "input_size: " << c.model_config().input_size << '\n'
      << "epochs: " << c.epochs << '\n'
      << "batch_size: " << c.batch_size << '\n'
      << "optimizer: " << to_string(c.optimizer.kind) << '\n'
      << "learning_rate: " << number(c.optimizer.learning_rate) << '\n'
      << "w_p: " << (c.variant == Variant::single_sgm ? "NA" : number(c.loss_weights.w_p)) << '\n'
      << "w_clf: " << (c.variant == Variant::emt_net ? number(c.loss_weights.w_clf) : "NA") << '\n'
      << "seed: " << c.seed << '\n'
      << "split: "
      << (c.split.kind == SplitSpec::Kind::kfold
              ? "kfold K=" + std::to_string(c.split.k) + " fold=" + std::to_string(c.fold)
              : "holdout " + number(c.split.train_pct) + "/" + number(c.split.val_pct) + "/" +
                    number(c.split.test_pct))
      << " seed=" << c.split.seed << '\n'
      << "samples: train=" << record.train_samples << " val=" << record.val_samples
      << " test=" << record.test_samples << '\n'
      << "best_epoch: " << record.best_epoch << '\n'
      << "test: " << metrics_record(record.test) << '\n';
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", record.wall_seconds);
  out << "wall_seconds: " << wall << '\n';
  return out.str();
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "model,acc,sen,spe,dsc,iou,parameters,bytes\n";
  for (const auto& r : rows) {
    out += to_string(r.variant) + ',' + metric_columns(r.report) + ',' + std::to_string(r.parameters) + ',' +
           std::to_string(r.serialized_bytes) + '\n';
  }
  return out;
}

}  // namespace emtnet
