#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fontmanifold/rng.hpp"
#include "fontmanifold/tensor.hpp"

namespace fm::ad {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  const Tape* tape = nullptr;
  std::size_t index = 0;
};

/// Named parameter tensors; iteration order (sorted by name) is the fixed
/// order used for optimizer updates and serialization.
using ParameterSet = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

/// Linear record of primitive operations. Nodes are appended in evaluation
/// order, so the node list is already topologically sorted and backward
/// walks it in exact reverse.
class Tape {
 public:
  /// Accumulates input gradients for one node: receives the tape, the
  /// gradient flowing into the node's output, and the per-node gradient
  /// buffers (an empty tensor means "zero so far").
  using BackwardFn = std::function<void(const Tape&, const Tensor&, std::vector<Tensor>&)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(std::string name, Tensor value);

  const Tensor& value(Var v) const;
  const Tensor& value(std::size_t index) const { return nodes_[index].value; }
  bool requires_grad(std::size_t index) const { return nodes_[index].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::uint64_t id() const noexcept { return id_; }

  /// Appends an operation result. `backward` is only invoked when at least
  /// one input requires a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  bool owns(Var v) const noexcept { return v.tape == this && v.index < nodes_.size(); }

 private:
  friend Gradients backward(const Tape& tape, Var loss);

  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string parameter_name;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::uint64_t id_;
};

/// Reverse-mode gradients of a scalar loss with respect to every parameter
/// reachable from it. Throws Error{Errc::Graph} if `loss` was not produced
/// on `tape` or is not a scalar.
Gradients backward(const Tape& tape, Var loss);

/// Adds `delta` into `grads[index]`, allocating a zero buffer on first use.
void accumulate(std::vector<Tensor>& grads, std::size_t index, const Tensor& like,
                const std::function<void(Tensor&)>& add);

// -- primitives ---------------------------------------------------------------

/// 3x3 cross-correlation with zero padding 1. input [C_in,H,W], kernels
/// [C_out,C_in,3,3], bias [C_out]; output [C_out, ceil(H/s), ceil(W/s)].
Var conv2d(Var input, Var kernels, Var bias, int stride);

/// weights [M,N] times input [N] plus bias [M].
Var dense(Var input, Var weights, Var bias);

enum class Activation { Relu, Sigmoid };
Var activation(Var input, Activation kind);
inline Var relu(Var input) { return activation(input, Activation::Relu); }
inline Var sigmoid(Var input) { return activation(input, Activation::Sigmoid); }

/// Nearest-neighbour 2x upsampling: [C,H,W] -> [C,2H,2W].
Var upsample2x(Var input);

Var reshape(Var input, Shape shape);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var input, double factor);
Var sum(Var input);

/// z = mu + exp(logvar / 2) * noise.
Var reparameterize(Var mu, Var logvar, Var noise);

/// KL(N(mu, exp(logvar)) || N(0, I)) summed over dimensions.
Var kl_divergence(Var mu, Var logvar);

/// Summed pixel binary cross-entropy with predictions clamped to
/// [1e-7, 1 - 1e-7]. Gradients flow to `prediction` only.
Var bce_loss(Var prediction, Var target);

inline constexpr double kBceClamp = 1e-7;

// -- scalar helpers shared with non-taped code ----------------------------------

double stable_sigmoid(double v) noexcept;

/// n standard normal draws from the stream (Box-Muller).
Tensor gaussian_sample(Rng& rng, std::size_t n);

}  // namespace fm::ad
