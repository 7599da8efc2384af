#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctxemo/tensor.hpp"

namespace ctxemo::gradcheck {

struct Options {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// A coordinate whose h and h/2 central differences disagree by more than
  /// this (relative) sits on a non-differentiable point and is skipped.
  double kink_tolerance = 1e-5;
  /// A check fails outright when more coordinates than this are skipped.
  double max_skip_fraction = 0.05;
};

struct Result {
  std::string name;
  std::size_t trials = 0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;  // worst trial
  bool passed = true;
};

/// Compares the reverse-mode gradient of `f` with respect to `leaves`
/// against central differences. `f` must be deterministic and return a
/// scalar. Relative error is normwise per trial:
/// max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-8).
Result check(const std::string& name, const std::vector<nd::Tensor>& leaves,
             const std::function<nd::Tensor()>& f, const Options& options = {});

/// Folds a trial into an aggregate result.
void merge(Result& total, const Result& trial);

/// Runs every built-in check (ops, ST-GCN units and model, losses) over
/// `seeds` random instances each.
std::vector<Result> run_suite(std::size_t seeds, std::uint64_t base_seed = 1,
                              const Options& options = {});

std::string format_table(const std::vector<Result>& results);
std::string format_json(const std::vector<Result>& results);

}  // namespace ctxemo::gradcheck
