#pragma once
// Feedforward approximators V_n: k affine maps (input d -> k-1 hidden layers
// of width l -> scalar output) with ReLU or logistic activations and batch
// normalization at configurable sites. Parameters live in one flat vector
// with a documented block layout; batch-norm running statistics live in a
// separate state so trained networks can be evaluated purely.
//
// Flat parameter layout (offsets ascending):
//   affine blocks in layer order, each weights row-major (fan_out x fan_in)
//   followed by the bias, then for every enabled normalization site in
//   pipeline order a scale block followed by a shift block.
// Normalization sites: site 0 acts on the input before the first affine
// map, site i (1 <= i < k) on the pre-activation of hidden layer i, and
// site k on the scalar emitted as the output.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "deepsplit/rng.hpp"

namespace deepsplit {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { relu, logistic };

/// Variance floor used by batch normalization: features are divided by
/// sqrt(max(batch variance, kBnEpsilon)).
inline constexpr double kBnEpsilon = 1e-6;

struct NetworkArchitecture {
  int input_dim = 0;      // d
  int depth = 3;          // k: number of affine maps, k >= 3
  int hidden_width = 0;   // l
  Activation activation = Activation::relu;
  std::vector<bool> bn_sites;  // size depth+1; see layout comment above

  static NetworkArchitecture standard(int input_dim, int hidden_width, int depth = 3);
  static NetworkArchitecture without_bn(int input_dim, int hidden_width, int depth = 3);

  int layer_in(int layer) const { return layer == 1 ? input_dim : hidden_width; }
  int layer_out(int layer) const { return layer == depth ? 1 : hidden_width; }
  int site_features(int site) const {
    return site == 0 ? input_dim : (site == depth ? 1 : hidden_width);
  }
  bool has_bn(int site) const { return bn_sites[static_cast<std::size_t>(site)]; }

  int affine_param_count() const;
  int bn_feature_count() const;
  int param_count() const { return affine_param_count() + 2 * bn_feature_count(); }

  void validate() const;  // throws std::invalid_argument

  friend bool operator==(const NetworkArchitecture&, const NetworkArchitecture&) = default;
};

/// Offset table mapping every parameter block to a disjoint range of the
/// flat vector; the union of the ranges covers it exactly.
class ParameterLayout {
 public:
  enum class BlockKind { weight, bias, bn_scale, bn_shift };

  struct Block {
    BlockKind kind;
    int index;  // layer (1-based) for affine blocks, site for bn blocks
    Eigen::Index offset;
    int rows;
    int cols;
    Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols; }
  };

  explicit ParameterLayout(const NetworkArchitecture& arch);

  const NetworkArchitecture& arch() const { return arch_; }
  Eigen::Index total_size() const { return total_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  Eigen::Index weight_offset(int layer) const;
  Eigen::Index bias_offset(int layer) const;
  Eigen::Index bn_scale_offset(int site) const;
  Eigen::Index bn_shift_offset(int site) const;
  /// Offset of a site's features inside the running-statistics vectors.
  Eigen::Index bn_state_offset(int site) const;

 private:
  NetworkArchitecture arch_;
  std::vector<Block> blocks_;
  std::vector<Eigen::Index> weight_off_, bias_off_, scale_off_, shift_off_, state_off_;
  Eigen::Index total_ = 0;
};

/// Flat parameter vector with typed block views. Mutation stamps a fresh
/// generation so gradient caches can detect staleness.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::shared_ptr<const ParameterLayout> layout);

  const ParameterLayout& layout() const { return *layout_; }
  std::shared_ptr<const ParameterLayout> layout_ptr() const { return layout_; }
  const NetworkArchitecture& arch() const { return layout_->arch(); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& mutable_values();

  std::uint64_t generation() const { return generation_; }

  Eigen::Map<const RowMajorMatrix> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bn_scale(int site) const;
  Eigen::Map<const Eigen::VectorXd> bn_shift(int site) const;

  Eigen::Map<RowMajorMatrix> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<Eigen::VectorXd> bn_scale(int site);
  Eigen::Map<Eigen::VectorXd> bn_shift(int site);

 private:
  std::shared_ptr<const ParameterLayout> layout_;
  Eigen::VectorXd values_;
  std::uint64_t generation_ = 0;
};

/// Running mean/variance per normalized feature (site-concatenated) plus
/// the number of training-mode updates folded in.
struct BatchNormState {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  long step_count = 0;
  double momentum = 0.9;

  static BatchNormState fresh(const NetworkArchitecture& arch, double momentum = 0.9);
};

enum class ForwardMode { train, infer };

/// Intermediates of a train-mode forward pass, consumed by grad_params.
struct ForwardCache {
  std::uint64_t params_generation = 0;
  int batch = 0;
  std::vector<Eigen::MatrixXd> inputs;       // inputs[i-1]: input of affine layer i
  std::vector<Eigen::MatrixXd> act_deriv;    // rho'(post-BN pre-activation), layers 1..k-1
  std::vector<Eigen::MatrixXd> bn_xhat;      // per site (enabled only; indexed by site)
  std::vector<Eigen::ArrayXd> bn_invstd;     // per site
  std::vector<Eigen::ArrayXd> bn_var_above_floor;  // 1.0 where batch var > eps
};

struct ForwardResult {
  Eigen::VectorXd values;
  BatchNormState bn_out;
  ForwardCache cache;  // populated in train mode
};

/// Applies the affine/normalization/activation pipeline to a batch of rows.
/// Train mode normalizes by batch statistics (J >= 2 required), folds them
/// into the running statistics when update_running is set, and fills the
/// cache. Infer mode uses running statistics only, evaluates rows
/// independently (joint and one-at-a-time evaluation agree bit-exactly),
/// and leaves the state untouched.
ForwardResult forward(const ParameterVector& params, const BatchNormState& bn,
                      const Eigen::MatrixXd& x, ForwardMode mode, bool update_running = true);

/// Convenience: infer-mode values only.
Eigen::VectorXd infer_values(const ParameterVector& params, const BatchNormState& bn,
                             const Eigen::MatrixXd& x);

/// Exact reverse-mode gradient d output / d input of the infer-mode map,
/// row by row; ReLU uses the weak derivative rho'(0) = 0.
Eigen::MatrixXd grad_x(const ParameterVector& params, const BatchNormState& bn,
                       const Eigen::MatrixXd& x);

/// One infer-mode pass producing both values and input gradients; values
/// agree bit-exactly with infer_values.
Eigen::VectorXd infer_values_and_grad_x(const ParameterVector& params, const BatchNormState& bn,
                                        const Eigen::MatrixXd& x, Eigen::MatrixXd& grads);

/// Reverse-mode gradient of sum_j upstream_j * output_j with respect to
/// every parameter, through the train-mode pass that produced `cache`
/// (batch statistics treated as functions of the batch). Throws
/// std::logic_error if the parameters changed since the forward pass.
ParameterVector grad_params(const ParameterVector& params, const ForwardCache& cache,
                            const Eigen::VectorXd& upstream);

/// Xavier initialization: weight blocks uniform on +-sqrt(6/(fan_in+fan_out)),
/// biases zero, normalization scales one and shifts zero.
ParameterVector init_params(const NetworkArchitecture& arch, const rng::Stream& stream);

/// A trained, frozen (parameters, statistics) pair.
struct Snapshot {
  ParameterVector params;
  BatchNormState bn;
};

}  // namespace deepsplit
