#include "deepsplit/network.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace deepsplit {

namespace {

std::atomic<std::uint64_t> g_generation{1};

std::uint64_t next_generation() { return g_generation.fetch_add(1, std::memory_order_relaxed); }

inline double activate(double x, Activation a) {
  if (a == Activation::relu) return x > 0.0 ? x : 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

// derivative expressed through the activation value (logistic) or the
// pre-activation sign (relu, with rho'(0) = 0)
inline double activate_deriv(double pre, double post, Activation a) {
  if (a == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
  return post * (1.0 - post);
}

}  // namespace

NetworkArchitecture NetworkArchitecture::standard(int input_dim, int hidden_width, int depth) {
  NetworkArchitecture arch;
  arch.input_dim = input_dim;
  arch.depth = depth;
  arch.hidden_width = hidden_width;
  arch.bn_sites.assign(static_cast<std::size_t>(depth) + 1, true);
  arch.validate();
  return arch;
}

NetworkArchitecture NetworkArchitecture::without_bn(int input_dim, int hidden_width, int depth) {
  NetworkArchitecture arch;
  arch.input_dim = input_dim;
  arch.depth = depth;
  arch.hidden_width = hidden_width;
  arch.bn_sites.assign(static_cast<std::size_t>(depth) + 1, false);
  arch.validate();
  return arch;
}

int NetworkArchitecture::affine_param_count() const {
  int total = 0;
  for (int layer = 1; layer <= depth; ++layer) {
    total += layer_out(layer) * (layer_in(layer) + 1);
  }
  return total;
}

int NetworkArchitecture::bn_feature_count() const {
  int total = 0;
  for (int site = 0; site <= depth; ++site) {
    if (has_bn(site)) total += site_features(site);
  }
  return total;
}

void NetworkArchitecture::validate() const {
  if (input_dim < 1) throw std::invalid_argument("network: input dimension must be positive");
  if (depth < 3) throw std::invalid_argument("network: depth must be at least 3 affine maps");
  if (hidden_width < 1) throw std::invalid_argument("network: hidden width must be positive");
  if (bn_sites.size() != static_cast<std::size_t>(depth) + 1)
    throw std::invalid_argument("network: normalization site list must have depth+1 entries");
}

ParameterLayout::ParameterLayout(const NetworkArchitecture& arch) : arch_(arch) {
  arch_.validate();
  weight_off_.assign(static_cast<std::size_t>(arch.depth) + 1, -1);
  bias_off_.assign(static_cast<std::size_t>(arch.depth) + 1, -1);
  scale_off_.assign(static_cast<std::size_t>(arch.depth) + 1, -1);
  shift_off_.assign(static_cast<std::size_t>(arch.depth) + 1, -1);
  state_off_.assign(static_cast<std::size_t>(arch.depth) + 1, -1);

  Eigen::Index offset = 0;
  for (int layer = 1; layer <= arch.depth; ++layer) {
    const int rows = arch.layer_out(layer);
    const int cols = arch.layer_in(layer);
    weight_off_[static_cast<std::size_t>(layer)] = offset;
    blocks_.push_back({BlockKind::weight, layer, offset, rows, cols});
    offset += static_cast<Eigen::Index>(rows) * cols;
    bias_off_[static_cast<std::size_t>(layer)] = offset;
    blocks_.push_back({BlockKind::bias, layer, offset, rows, 1});
    offset += rows;
  }
  Eigen::Index state = 0;
  for (int site = 0; site <= arch.depth; ++site) {
    if (!arch.has_bn(site)) continue;
    const int features = arch.site_features(site);
    scale_off_[static_cast<std::size_t>(site)] = offset;
    blocks_.push_back({BlockKind::bn_scale, site, offset, features, 1});
    offset += features;
    shift_off_[static_cast<std::size_t>(site)] = offset;
    blocks_.push_back({BlockKind::bn_shift, site, offset, features, 1});
    offset += features;
    state_off_[static_cast<std::size_t>(site)] = state;
    state += features;
  }
  total_ = offset;
}

namespace {
Eigen::Index checked(const std::vector<Eigen::Index>& table, int index, const char* what) {
  if (index < 0 || static_cast<std::size_t>(index) >= table.size() || table[static_cast<std::size_t>(index)] < 0)
    throw std::invalid_argument(std::string("parameter layout: no such block: ") + what);
  return table[static_cast<std::size_t>(index)];
}
}  // namespace

Eigen::Index ParameterLayout::weight_offset(int layer) const { return checked(weight_off_, layer, "weight"); }
Eigen::Index ParameterLayout::bias_offset(int layer) const { return checked(bias_off_, layer, "bias"); }
Eigen::Index ParameterLayout::bn_scale_offset(int site) const { return checked(scale_off_, site, "bn scale"); }
Eigen::Index ParameterLayout::bn_shift_offset(int site) const { return checked(shift_off_, site, "bn shift"); }
Eigen::Index ParameterLayout::bn_state_offset(int site) const { return checked(state_off_, site, "bn state"); }

ParameterVector::ParameterVector(std::shared_ptr<const ParameterLayout> layout)
    : layout_(std::move(layout)),
      values_(Eigen::VectorXd::Zero(layout_->total_size())),
      generation_(next_generation()) {}

Eigen::VectorXd& ParameterVector::mutable_values() {
  generation_ = next_generation();
  return values_;
}

Eigen::Map<const RowMajorMatrix> ParameterVector::weight(int layer) const {
  const auto& a = arch();
  return {values_.data() + layout_->weight_offset(layer), a.layer_out(layer), a.layer_in(layer)};
}
Eigen::Map<const Eigen::VectorXd> ParameterVector::bias(int layer) const {
  return {values_.data() + layout_->bias_offset(layer), arch().layer_out(layer)};
}
Eigen::Map<const Eigen::VectorXd> ParameterVector::bn_scale(int site) const {
  return {values_.data() + layout_->bn_scale_offset(site), arch().site_features(site)};
}
Eigen::Map<const Eigen::VectorXd> ParameterVector::bn_shift(int site) const {
  return {values_.data() + layout_->bn_shift_offset(site), arch().site_features(site)};
}

Eigen::Map<RowMajorMatrix> ParameterVector::weight(int layer) {
  const auto& a = arch();
  return {mutable_values().data() + layout_->weight_offset(layer), a.layer_out(layer),
          a.layer_in(layer)};
}
Eigen::Map<Eigen::VectorXd> ParameterVector::bias(int layer) {
  return {mutable_values().data() + layout_->bias_offset(layer), arch().layer_out(layer)};
}
Eigen::Map<Eigen::VectorXd> ParameterVector::bn_scale(int site) {
  return {mutable_values().data() + layout_->bn_scale_offset(site), arch().site_features(site)};
}
Eigen::Map<Eigen::VectorXd> ParameterVector::bn_shift(int site) {
  return {mutable_values().data() + layout_->bn_shift_offset(site), arch().site_features(site)};
}

BatchNormState BatchNormState::fresh(const NetworkArchitecture& arch, double momentum) {
  BatchNormState state;
  const int features = arch.bn_feature_count();
  state.mean = Eigen::VectorXd::Zero(features);
  state.var = Eigen::VectorXd::Ones(features);
  state.step_count = 0;
  state.momentum = momentum;
  return state;
}

namespace {

void check_finite(const Eigen::MatrixXd& m, int layer) {
  if (!m.allFinite())
    throw std::runtime_error("network: non-finite activations at layer " + std::to_string(layer));
}

// Train-mode normalization of M in place; returns batch stats via out-params.
void bn_train_apply(Eigen::MatrixXd& m, const Eigen::Map<const Eigen::VectorXd>& scale,
                    const Eigen::Map<const Eigen::VectorXd>& shift, Eigen::ArrayXd& mu,
                    Eigen::ArrayXd& var, Eigen::ArrayXd& invstd, Eigen::ArrayXd& above_floor,
                    Eigen::MatrixXd& xhat) {
  const Eigen::RowVectorXd mu_row = m.colwise().mean();
  m.rowwise() -= mu_row;
  const Eigen::RowVectorXd var_row = m.array().square().matrix().colwise().mean();
  mu = mu_row.transpose().array();
  var = var_row.transpose().array();
  above_floor = (var > kBnEpsilon).cast<double>();
  invstd = var.max(kBnEpsilon).sqrt().inverse();
  xhat.noalias() = m * invstd.matrix().asDiagonal();
  m.noalias() = xhat * scale.asDiagonal();
  m.rowwise() += shift.transpose();
}

}  // namespace

ForwardResult forward(const ParameterVector& params, const BatchNormState& bn,
                      const Eigen::MatrixXd& x, ForwardMode mode, bool update_running) {
  const auto& arch = params.arch();
  const auto& layout = params.layout();
  const Eigen::Index J = x.rows();
  if (x.cols() != arch.input_dim)
    throw std::invalid_argument("network: input dimension mismatch");
  if (J < 1) throw std::invalid_argument("network: empty batch");

  if (mode == ForwardMode::infer) {
    ForwardResult result;
    result.values = infer_values(params, bn, x);
    result.bn_out = bn;
    return result;
  }

  if (J < 2)
    throw std::invalid_argument("network: train mode needs a batch of at least two rows");

  ForwardResult result;
  result.bn_out = bn;
  auto& cache = result.cache;
  cache.params_generation = params.generation();
  cache.batch = static_cast<int>(J);
  cache.inputs.resize(static_cast<std::size_t>(arch.depth));
  cache.act_deriv.resize(static_cast<std::size_t>(arch.depth) - 1);
  cache.bn_xhat.resize(static_cast<std::size_t>(arch.depth) + 1);
  cache.bn_invstd.resize(static_cast<std::size_t>(arch.depth) + 1);
  cache.bn_var_above_floor.resize(static_cast<std::size_t>(arch.depth) + 1);

  Eigen::ArrayXd mu, var;
  auto fold_running = [&](int site, const Eigen::ArrayXd& bmu, const Eigen::ArrayXd& bvar) {
    if (!update_running) return;
    const Eigen::Index off = layout.bn_state_offset(site);
    const Eigen::Index n = arch.site_features(site);
    const double keep = result.bn_out.momentum;
    result.bn_out.mean.segment(off, n) =
        keep * result.bn_out.mean.segment(off, n) + (1.0 - keep) * bmu.matrix();
    result.bn_out.var.segment(off, n) =
        keep * result.bn_out.var.segment(off, n) + (1.0 - keep) * bvar.matrix();
  };

  Eigen::MatrixXd h = x;
  if (arch.has_bn(0)) {
    bn_train_apply(h, params.bn_scale(0), params.bn_shift(0), mu, var, cache.bn_invstd[0],
                   cache.bn_var_above_floor[0], cache.bn_xhat[0]);
    fold_running(0, mu, var);
  }

  for (int layer = 1; layer <= arch.depth; ++layer) {
    cache.inputs[static_cast<std::size_t>(layer - 1)] = h;
    Eigen::MatrixXd z(J, arch.layer_out(layer));
    z.noalias() = h * params.weight(layer).transpose();
    z.rowwise() += params.bias(layer).transpose();
    if (arch.has_bn(layer)) {
      bn_train_apply(z, params.bn_scale(layer), params.bn_shift(layer), mu, var,
                     cache.bn_invstd[static_cast<std::size_t>(layer)],
                     cache.bn_var_above_floor[static_cast<std::size_t>(layer)],
                     cache.bn_xhat[static_cast<std::size_t>(layer)]);
      fold_running(layer, mu, var);
    }
    check_finite(z, layer);
    if (layer < arch.depth) {
      Eigen::MatrixXd activated(J, z.cols());
      auto& deriv = cache.act_deriv[static_cast<std::size_t>(layer - 1)];
      deriv.resize(J, z.cols());
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        for (Eigen::Index r = 0; r < J; ++r) {
          const double pre = z(r, c);
          const double post = activate(pre, arch.activation);
          activated(r, c) = post;
          deriv(r, c) = activate_deriv(pre, post, arch.activation);
        }
      }
      h = std::move(activated);
    } else {
      h = std::move(z);
    }
  }

  if (update_running) result.bn_out.step_count += 1;
  result.values = h.col(0);
  return result;
}

namespace {

// Per-row infer pass; writes post-BN pre-activations (z-tilde) when asked,
// so the x-gradient pass can reuse them.
double infer_row(const ParameterVector& params, const BatchNormState& bn,
                 Eigen::VectorXd& h, std::vector<Eigen::VectorXd>* pre_acts) {
  const auto& arch = params.arch();
  const auto& layout = params.layout();

  auto bn_infer = [&](int site, Eigen::VectorXd& v) {
    if (!arch.has_bn(site)) return;
    const Eigen::Index off = layout.bn_state_offset(site);
    const Eigen::Index n = arch.site_features(site);
    const auto rm = bn.mean.segment(off, n).array();
    const auto rv = bn.var.segment(off, n).array();
    const auto scale = params.bn_scale(site).array();
    const auto shift = params.bn_shift(site).array();
    v = ((v.array() - rm) * rv.max(kBnEpsilon).sqrt().inverse() * scale + shift).matrix();
  };

  bn_infer(0, h);
  Eigen::VectorXd z;
  for (int layer = 1; layer <= arch.depth; ++layer) {
    z.noalias() = params.weight(layer) * h;
    z += params.bias(layer);
    bn_infer(layer, z);
    if (pre_acts) (*pre_acts)[static_cast<std::size_t>(layer - 1)] = z;
    if (layer < arch.depth) {
      h.resize(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) h[i] = activate(z[i], arch.activation);
    } else {
      h = z;
    }
  }
  return h[0];
}

}  // namespace

Eigen::VectorXd infer_values(const ParameterVector& params, const BatchNormState& bn,
                             const Eigen::MatrixXd& x) {
  const auto& arch = params.arch();
  if (x.cols() != arch.input_dim)
    throw std::invalid_argument("network: input dimension mismatch");
  Eigen::VectorXd out(x.rows());
  Eigen::VectorXd h;
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    h = x.row(j).transpose();
    out[j] = infer_row(params, bn, h, nullptr);
    if (!std::isfinite(out[j]))
      throw std::runtime_error("network: non-finite output at row " + std::to_string(j));
  }
  return out;
}

Eigen::MatrixXd grad_x(const ParameterVector& params, const BatchNormState& bn,
                       const Eigen::MatrixXd& x) {
  const auto& arch = params.arch();
  const auto& layout = params.layout();
  if (x.cols() != arch.input_dim)
    throw std::invalid_argument("network: input dimension mismatch");

  Eigen::MatrixXd grads(x.rows(), x.cols());
  std::vector<Eigen::VectorXd> pre_acts(static_cast<std::size_t>(arch.depth));

  auto bn_scale_factor = [&](int site) -> Eigen::ArrayXd {
    const Eigen::Index off = layout.bn_state_offset(site);
    const Eigen::Index n = arch.site_features(site);
    return params.bn_scale(site).array() *
           bn.var.segment(off, n).array().max(kBnEpsilon).sqrt().inverse();
  };

  Eigen::VectorXd h, d;
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    h = x.row(j).transpose();
    infer_row(params, bn, h, &pre_acts);

    d = Eigen::VectorXd::Ones(1);
    for (int layer = arch.depth; layer >= 1; --layer) {
      if (layer < arch.depth) {
        const auto& z = pre_acts[static_cast<std::size_t>(layer - 1)];
        for (Eigen::Index i = 0; i < d.size(); ++i) {
          const double post = activate(z[i], arch.activation);
          d[i] *= activate_deriv(z[i], post, arch.activation);
        }
      }
      if (arch.has_bn(layer)) d.array() *= bn_scale_factor(layer);
      d = (params.weight(layer).transpose() * d).eval();
    }
    if (arch.has_bn(0)) d.array() *= bn_scale_factor(0);
    grads.row(j) = d.transpose();
  }
  return grads;
}

Eigen::VectorXd infer_values_and_grad_x(const ParameterVector& params, const BatchNormState& bn,
                                        const Eigen::MatrixXd& x, Eigen::MatrixXd& grads) {
  const auto& arch = params.arch();
  const auto& layout = params.layout();
  if (x.cols() != arch.input_dim)
    throw std::invalid_argument("network: input dimension mismatch");
  const Eigen::Index J = x.rows();

  // row-wise forward (identical to infer_values), capturing pre-activations
  std::vector<Eigen::MatrixXd> pre(static_cast<std::size_t>(arch.depth));
  for (int layer = 1; layer <= arch.depth; ++layer)
    pre[static_cast<std::size_t>(layer - 1)].resize(J, arch.layer_out(layer));
  std::vector<Eigen::VectorXd> pre_row(static_cast<std::size_t>(arch.depth));
  Eigen::VectorXd values(J);
  Eigen::VectorXd h;
  for (Eigen::Index j = 0; j < J; ++j) {
    h = x.row(j).transpose();
    values[j] = infer_row(params, bn, h, &pre_row);
    for (int layer = 1; layer < arch.depth; ++layer)
      pre[static_cast<std::size_t>(layer - 1)].row(j) =
          pre_row[static_cast<std::size_t>(layer - 1)].transpose();
  }

  auto bn_scale_vec = [&](int site) -> Eigen::VectorXd {
    const Eigen::Index off = layout.bn_state_offset(site);
    const Eigen::Index n = arch.site_features(site);
    return (params.bn_scale(site).array() *
            bn.var.segment(off, n).array().max(kBnEpsilon).sqrt().inverse())
        .matrix();
  };

  // batched backward through the piecewise-affine infer map
  const double a_out = arch.has_bn(arch.depth) ? bn_scale_vec(arch.depth)(0) : 1.0;
  Eigen::MatrixXd cur = (a_out * Eigen::VectorXd::Ones(J)) * params.weight(arch.depth);
  for (int layer = arch.depth - 1; layer >= 1; --layer) {
    const auto& z = pre[static_cast<std::size_t>(layer - 1)];
    for (Eigen::Index c = 0; c < cur.cols(); ++c) {
      for (Eigen::Index r = 0; r < J; ++r) {
        const double post = activate(z(r, c), arch.activation);
        cur(r, c) *= activate_deriv(z(r, c), post, arch.activation);
      }
    }
    if (arch.has_bn(layer)) cur = cur * bn_scale_vec(layer).asDiagonal();
    grads.resize(J, arch.layer_in(layer));
    grads.noalias() = cur * params.weight(layer);
    cur.swap(grads);
  }
  if (arch.has_bn(0)) cur = cur * bn_scale_vec(0).asDiagonal();
  grads = std::move(cur);
  return values;
}

ParameterVector grad_params(const ParameterVector& params, const ForwardCache& cache,
                            const Eigen::VectorXd& upstream) {
  if (cache.params_generation != params.generation())
    throw std::logic_error("network: gradient cache is stale (parameters changed since forward)");
  const auto& arch = params.arch();
  const Eigen::Index J = cache.batch;
  if (upstream.size() != J)
    throw std::invalid_argument("network: upstream length does not match the cached batch");

  ParameterVector grad(params.layout_ptr());

  // backward through a train-mode normalization site
  auto bn_backward = [&](int site, Eigen::MatrixXd& dout) {
    const auto scale = params.bn_scale(site);
    const auto& xhat = cache.bn_xhat[static_cast<std::size_t>(site)];
    const auto& invstd = cache.bn_invstd[static_cast<std::size_t>(site)];
    const auto& above = cache.bn_var_above_floor[static_cast<std::size_t>(site)];

    grad.bn_shift(site) = dout.colwise().sum().transpose();
    grad.bn_scale(site) = (dout.array() * xhat.array()).matrix().colwise().sum().transpose();

    Eigen::MatrixXd dxhat = dout * scale.asDiagonal();
    const Eigen::RowVectorXd mean_dxhat = dxhat.colwise().mean();
    // variance term only where the batch variance is above the floor
    Eigen::RowVectorXd mean_dxhat_xhat =
        (dxhat.array() * xhat.array()).matrix().colwise().mean();
    mean_dxhat_xhat.array() *= above.transpose();

    dxhat.rowwise() -= mean_dxhat;
    dxhat.noalias() -= xhat * mean_dxhat_xhat.transpose().asDiagonal();
    dout.noalias() = dxhat * invstd.matrix().asDiagonal();
  };

  Eigen::MatrixXd dh = upstream;
  for (int layer = arch.depth; layer >= 1; --layer) {
    Eigen::MatrixXd dz;
    if (layer < arch.depth) {
      dz = dh.array() * cache.act_deriv[static_cast<std::size_t>(layer - 1)].array();
    } else {
      dz = dh;
    }
    if (arch.has_bn(layer)) bn_backward(layer, dz);
    grad.weight(layer).noalias() = dz.transpose() * cache.inputs[static_cast<std::size_t>(layer - 1)];
    grad.bias(layer) = dz.colwise().sum().transpose();
    if (layer > 1 || arch.has_bn(0)) {
      dh.resize(J, arch.layer_in(layer));
      dh.noalias() = dz * params.weight(layer);
    }
  }
  if (arch.has_bn(0)) bn_backward(0, dh);
  return grad;
}

ParameterVector init_params(const NetworkArchitecture& arch, const rng::Stream& stream) {
  auto layout = std::make_shared<const ParameterLayout>(arch);
  ParameterVector params(layout);
  rng::SequenceGen gen(stream);
  for (int layer = 1; layer <= arch.depth; ++layer) {
    const double fan_in = arch.layer_in(layer);
    const double fan_out = arch.layer_out(layer);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    auto w = params.weight(layer);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = bound * (2.0 * gen.next_uniform() - 1.0);
    params.bias(layer).setZero();
  }
  for (int site = 0; site <= arch.depth; ++site) {
    if (!arch.has_bn(site)) continue;
    params.bn_scale(site).setOnes();
    params.bn_shift(site).setZero();
  }
  return params;
}

}  // namespace deepsplit
