#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "loadcycle/nn/loss.hpp"
#include "loadcycle/nn/model.hpp"

namespace loadcycle::train {

struct GradCheckOptions {
  // Step h. The five-point stencil at 1e-3 keeps double roundoff near 1e-13
  // absolute; the two-point one at 1e-5 sits near 1e-10.
  double eps = 1e-3;
  // 2: (f(x+h) - f(x-h)) / 2h. 4: five-point central stencil.
  int order = 4;
  int batch = 4;
  double l2_lambda = 1e-3;
  nn::ClassWeights class_weights{1.0, 1.5, 2.0};
  bool reduce_width = true;  // cap unit counts at 8 before building
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t n_checked = 0;
  // Coordinates whose finite-difference stencil crossed a ReLU kink at every
  // step size tried.
  std::size_t n_kink_skipped = 0;
  std::string worst_tensor;
};

// |a - n| / max(|a|, |n|, 1e-8) per coordinate, maximized.
double relative_error(double analytic, double numeric);

// Compares loss_and_grads against central differences for every trainable
// tensor of an existing 64-bit model on a fixed batch. Frozen tensors are
// not compared.
GradCheckResult grad_check(const nn::Model64& model, const nn::Batch64& batch, const GradCheckOptions& opt);

// Builds a seeded instance of spec (reduced when requested) with a seeded
// random batch and checks it.
GradCheckResult grad_check(const nn::ModelSpec& spec, std::uint64_t seed, const GradCheckOptions& opt = {});

}  // namespace loadcycle::train
