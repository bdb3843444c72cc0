#pragma once

#include <memory>
#include <string>
#include <vector>

#include "freqpad/tensor.hpp"

namespace freqpad::nn {

enum class Mode { Train, Eval };

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool weight_decay = true;

  Parameter() = default;
  Parameter(std::string param_name, Tensor<T> init, bool decay = true)
      : name(std::move(param_name)), value(std::move(init)), grad(value.shape()), weight_decay(decay) {}

  void zero_grad() { grad.zero(); }
};

// Non-trainable state that still belongs in a checkpoint (running statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T> value;
};

// A differentiable op with cached forward state. backward() must follow the
// forward() whose activations it consumes; it accumulates parameter gradients
// and returns the gradient w.r.t. the input, or an empty tensor when input
// gradients are disabled.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor<T> forward(const Tensor<T>& input, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_output) = 0;

  virtual void collect_parameters(std::vector<Parameter<T>*>& /*out*/) {}
  virtual void collect_buffers(std::vector<Buffer<T>*>& /*out*/) {}

  void set_input_grad(bool enabled) { input_grad_ = enabled; }
  bool input_grad() const { return input_grad_; }

 protected:
  bool input_grad_ = true;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

template <typename T>
std::vector<Parameter<T>*> parameters_of(Layer<T>& layer) {
  std::vector<Parameter<T>*> out;
  layer.collect_parameters(out);
  return out;
}

}  // namespace freqpad::nn
