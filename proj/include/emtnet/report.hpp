// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "emtnet/trainer.hpp"

namespace emtnet {

/// `acc=0.875000 sen=NA ...` on one line.
std::string metrics_record(const MetricsReport& report);

/// Header `w_p,w_clf,acc,sen,spe,dsc,iou`; undefined values print as NA.
std::string sweep_csv(std::span<const SweepRow> rows);
std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);

/// Per-epoch table: `epoch,train_loss,val_loss,val_acc,val_dsc`.
std::string run_csv(const RunRecord& record);

/// `key: value` lines echoing the configuration and the final metrics.
std::string run_report(const RunRecord& record);

/// Ablation table: `model,acc,sen,spe,dsc,iou,parameters,bytes`.
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace emtnet
