#include "freqpad/losses/losses.hpp"

#include <algorithm>
#include <cmath>

namespace freqpad::losses {

namespace {

void check_label(int y) { require(y == 0 || y == 1, "label must be 0 or 1, got " + std::to_string(y)); }

double clamp_probability(double p) {
  require(std::isfinite(p), "probability must be finite");
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

}  // namespace

LossKind parse_loss_kind(const std::string& text) {
  if (text == "focal_sl") return LossKind::FocalSmoothL1;
  if (text == "bce") return LossKind::Bce;
  throw ValidationError("unknown loss kind '" + text + "'");
}

std::string to_string(LossKind kind) { return kind == LossKind::Bce ? "bce" : "focal_sl"; }

double LossWeights::lambda1_at(int epoch) const {
  require(epoch >= 0, "epoch must be non-negative");
  return epoch < lambda1_schedule.after_epoch ? lambda1_schedule.initial : lambda1_schedule.value;
}

Grid<double> ground_truth_mask(int label, int size) {
  check_label(label);
  return Grid<double>::Constant(size, size, static_cast<double>(label));
}

double smooth_l1(const Grid<double>& pred, const Grid<double>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols() && pred.size() > 0,
          "smooth_l1: shape mismatch");
  require(pred.allFinite(), "smooth_l1: non-finite prediction");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = std::abs(pred.data()[i] - target.data()[i]);
    sum += r < 1.0 ? 0.5 * r * r : r - 0.5;
  }
  return sum / static_cast<double>(pred.size());
}

Grid<double> smooth_l1_grad(const Grid<double>& pred, const Grid<double>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "smooth_l1_grad: shape mismatch");
  Grid<double> g(pred.rows(), pred.cols());
  const double n = static_cast<double>(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = pred.data()[i] - target.data()[i];
    g.data()[i] = (std::abs(r) < 1.0 ? r : (r > 0 ? 1.0 : -1.0)) / n;
  }
  return g;
}

double focal_loss(double p, int y, double gamma) {
  check_label(y);
  require(gamma >= 0.0, "focal gamma must be non-negative");
  const double pc = clamp_probability(p);
  const double pt = y == 1 ? pc : 1.0 - pc;
  return -std::pow(1.0 - pt, gamma) * std::log(pt);
}

double focal_loss_grad(double p, int y, double gamma) {
  check_label(y);
  const double pc = clamp_probability(p);
  if (pc != p) return 0.0;
  const double pt = y == 1 ? pc : 1.0 - pc;
  const double dpt = y == 1 ? 1.0 : -1.0;
  const double q = 1.0 - pt;
  const double dl_dpt = (gamma > 0.0 ? gamma * std::pow(q, gamma - 1.0) * std::log(pt) : 0.0) - std::pow(q, gamma) / pt;
  return dl_dpt * dpt;
}

double bce_loss(double p, int y) {
  check_label(y);
  const double pc = clamp_probability(p);
  return -(y * std::log(pc) + (1 - y) * std::log(1.0 - pc));
}

double bce_loss_grad(double p, int y) {
  check_label(y);
  const double pc = clamp_probability(p);
  if (pc != p) return 0.0;
  return -(y / pc) + (1 - y) / (1.0 - pc);
}

double overall_loss(double pixel, double binary, int epoch, const LossWeights& weights) {
  require(pixel >= 0.0 && binary >= 0.0, "overall_loss: component losses must be non-negative");
  return weights.lambda1_at(epoch) * pixel + weights.lambda2 * binary;
}

LossAndGrad focal_from_logit(double logit, int y, double gamma) {
  check_label(y);
  const double s = y == 1 ? 1.0 : -1.0;
  const double log_pt = log_sigmoid(s * logit);
  const double pt = sigmoid(s * logit);
  const double q = 1.0 - pt;  // = sigmoid(-s * logit)
  const double qg = std::pow(q, gamma);
  LossAndGrad r;
  r.loss = -qg * log_pt;
  // d/dz = s * [gamma * pt * q^gamma * log pt - q^(gamma + 1)]
  r.grad = s * (gamma * pt * qg * log_pt - qg * q);
  return r;
}

LossAndGrad bce_from_logit(double logit, int y) {
  check_label(y);
  const double s = y == 1 ? 1.0 : -1.0;
  return {-log_sigmoid(s * logit), sigmoid(logit) - y};
}

template <typename T>
BatchLoss batch_loss(const Tensor<T>& pixel_logits, const Tensor<T>& binary_logits, std::span<const int> labels,
                     LossKind kind, const LossWeights& weights, int epoch) {
  const int n = binary_logits.n();
  require(static_cast<int>(labels.size()) == n && pixel_logits.n() == n, "batch_loss: batch size mismatch");
  require(pixel_logits.c() == 1 && binary_logits.shape().sample() == 1, "batch_loss: heads must be single-channel");
  BatchLoss out;
  out.grad_pixel_logits = Tensor<double>(pixel_logits.shape());
  out.grad_binary_logits = Tensor<double>(binary_logits.shape());
  const std::size_t pixels = pixel_logits.shape().plane();
  const double inv_n = 1.0 / n;

  double pixel_weight, binary_weight;
  if (kind == LossKind::Bce) {
    pixel_weight = 0.5;
    binary_weight = 0.5;
    out.lambda1 = 0.5;
  } else {
    out.lambda1 = weights.lambda1_at(epoch);
    pixel_weight = out.lambda1;
    binary_weight = weights.lambda2;
  }

  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    check_label(y);
    const T* z = pixel_logits.sample(i);
    double* gz = out.grad_pixel_logits.sample(i);
    double pixel = 0.0;
    for (std::size_t j = 0; j < pixels; ++j) {
      const double zj = static_cast<double>(z[j]);
      if (kind == LossKind::Bce) {
        const auto lg = bce_from_logit(zj, y);
        pixel += lg.loss;
        gz[j] = lg.grad / pixels;
      } else {
        const double p = sigmoid(zj);
        const double r = p - y;  // |r| < 1 always since p is in (0, 1)
        pixel += std::abs(r) < 1.0 ? 0.5 * r * r : std::abs(r) - 0.5;
        const double dl_dp = std::abs(r) < 1.0 ? r : (r > 0 ? 1.0 : -1.0);
        gz[j] = dl_dp * p * (1.0 - p) / pixels;
      }
    }
    pixel /= pixels;

    const double zb = static_cast<double>(binary_logits[i]);
    const auto lb = kind == LossKind::Bce ? bce_from_logit(zb, y) : focal_from_logit(zb, y, weights.gamma);
    out.pixel += pixel * inv_n;
    out.binary += lb.loss * inv_n;
    for (std::size_t j = 0; j < pixels; ++j) gz[j] *= pixel_weight * inv_n;
    out.grad_binary_logits[i] = lb.grad * binary_weight * inv_n;
  }
  out.total = pixel_weight * out.pixel + binary_weight * out.binary;
  return out;
}

template BatchLoss batch_loss<float>(const Tensor<float>&, const Tensor<float>&, std::span<const int>, LossKind,
                                     const LossWeights&, int);
template BatchLoss batch_loss<double>(const Tensor<double>&, const Tensor<double>&, std::span<const int>, LossKind,
                                      const LossWeights&, int);

}  // namespace freqpad::losses
