#pragma once

#include <string>

#include "freqpad/tensor.hpp"

namespace freqpad::losses {

inline constexpr double kProbabilityEpsilon = 1e-7;

enum class LossKind { FocalSmoothL1, Bce };
LossKind parse_loss_kind(const std::string& text);
std::string to_string(LossKind kind);

// lambda1 = initial for epochs [0, after_epoch), value afterwards (0-based epochs).
struct Lambda1Schedule {
  double initial = 1.0;
  int after_epoch = 5;
  double value = 100.0;
};

struct LossWeights {
  Lambda1Schedule lambda1_schedule;
  double lambda2 = 1.0;
  double gamma = 2.0;

  double lambda1_at(int epoch) const;
};

// All-ones for bona fide (label 1), all-zeros for attacks (label 0).
Grid<double> ground_truth_mask(int label, int size = 14);

// Mean over pixels of 0.5 r^2 (|r| < 1) or |r| - 0.5, r = pred - target.
double smooth_l1(const Grid<double>& pred, const Grid<double>& target);
// d smooth_l1 / d pred.
Grid<double> smooth_l1_grad(const Grid<double>& pred, const Grid<double>& target);

// -(1 - p_t)^gamma log(p_t), p_t = p for y = 1 and 1 - p for y = 0.
// p is clamped to [1e-7, 1 - 1e-7].
double focal_loss(double p, int y, double gamma = 2.0);
double focal_loss_grad(double p, int y, double gamma = 2.0);  // d/dp, zero where clamped
double bce_loss(double p, int y);
double bce_loss_grad(double p, int y);

// lambda1 * pixel + lambda2 * binary.
double overall_loss(double pixel, double binary, int epoch, const LossWeights& weights);

// Logit-space forms used in training. They evaluate log-sigmoid stably, so no
// clamping is needed and gradients never vanish at saturation.
struct LossAndGrad {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d logit
};
LossAndGrad focal_from_logit(double logit, int y, double gamma);
LossAndGrad bce_from_logit(double logit, int y);

// Per-sample head losses plus logit gradients, batch-averaged.
struct BatchLoss {
  double pixel = 0.0;    // mean pixel term over the batch
  double binary = 0.0;   // mean binary term over the batch
  double total = 0.0;    // weighted objective
  double lambda1 = 1.0;
  Tensor<double> grad_pixel_logits;
  Tensor<double> grad_binary_logits;
};

// Focal + smooth L1 (weighted by the lambda schedule) or the 0.5/0.5 BCE
// baseline applied to both heads. Labels: 1 = bona fide, 0 = attack.
template <typename T>
BatchLoss batch_loss(const Tensor<T>& pixel_logits, const Tensor<T>& binary_logits,
                     std::span<const int> labels, LossKind kind, const LossWeights& weights, int epoch);

}  // namespace freqpad::losses
