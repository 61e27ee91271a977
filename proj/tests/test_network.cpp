#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "deepsplit/network.hpp"
#include "deepsplit/rng.hpp"

using namespace deepsplit;

namespace {

ParameterVector zeros_like(const NetworkArchitecture& arch) {
  return ParameterVector(std::make_shared<const ParameterLayout>(arch));
}

// the spec'd hand example: d=1, k=3, l=1, no normalization,
// layer1 (w=2,b=0), layer2 (w=1,b=-1), layer3 (w=3,b=0.5)
ParameterVector hand_network() {
  auto arch = NetworkArchitecture::without_bn(1, 1);
  ParameterVector p = zeros_like(arch);
  p.weight(1)(0, 0) = 2.0;
  p.bias(1)(0) = 0.0;
  p.weight(2)(0, 0) = 1.0;
  p.bias(2)(0) = -1.0;
  p.weight(3)(0, 0) = 3.0;
  p.bias(3)(0) = 0.5;
  return p;
}

}  // namespace

TEST_CASE("parameter layout covers the vector with disjoint blocks") {
  auto arch = NetworkArchitecture::standard(7, 5);
  ParameterLayout layout(arch);
  std::vector<int> hits(static_cast<std::size_t>(layout.total_size()), 0);
  for (const auto& block : layout.blocks()) {
    for (Eigen::Index i = 0; i < block.size(); ++i)
      hits[static_cast<std::size_t>(block.offset + i)] += 1;
  }
  for (int h : hits) CHECK(h == 1);
}

TEST_CASE("affine parameter count matches the layout formula") {
  // l(d+1) + l(l+1) + (l+1) = 220 + 420 + 21 = 661 for d=10, k=3, l=20
  auto arch = NetworkArchitecture::standard(10, 20);
  CHECK(arch.affine_param_count() == 661);
  CHECK(arch.bn_feature_count() == 10 + 20 + 20 + 1);
  CHECK(arch.param_count() == 661 + 2 * 51);

  auto no_bn = NetworkArchitecture::without_bn(10, 20);
  CHECK(no_bn.param_count() == 661);
}

TEST_CASE("block round-trip through typed views is the identity") {
  auto arch = NetworkArchitecture::standard(4, 3);
  ParameterVector p = zeros_like(arch);
  p.mutable_values().setConstant(std::numeric_limits<double>::quiet_NaN());
  double tag = 1.0;
  for (int layer = 1; layer <= arch.depth; ++layer) {
    p.weight(layer).setConstant(tag++);
    p.bias(layer).setConstant(tag++);
  }
  for (int site = 0; site <= arch.depth; ++site) {
    p.bn_scale(site).setConstant(tag++);
    p.bn_shift(site).setConstant(tag++);
  }
  CHECK(p.values().allFinite());  // every entry reached through exactly one view
  CHECK(p.weight(1)(0, 0) == 1.0);
  CHECK(p.bn_shift(arch.depth)(0) == tag - 1.0);
}

TEST_CASE("xavier initialization conventions") {
  auto arch = NetworkArchitecture::standard(100, 110);
  ParameterVector p = init_params(arch, rng::Stream{123});

  for (int layer = 1; layer <= arch.depth; ++layer)
    CHECK(p.bias(layer).cwiseAbs().maxCoeff() == 0.0);
  for (int site = 0; site <= arch.depth; ++site) {
    CHECK(p.bn_scale(site).minCoeff() == 1.0);
    CHECK(p.bn_scale(site).maxCoeff() == 1.0);
    CHECK(p.bn_shift(site).cwiseAbs().maxCoeff() == 0.0);
  }

  // first block variance ~ (1/3) * 6/(fan_in+fan_out), 11000 samples
  auto w = p.weight(1);
  const double expected = (1.0 / 3.0) * 6.0 / (100.0 + 110.0);
  const double var = w.reshaped().array().square().mean();
  CHECK(var == doctest::Approx(expected).epsilon(0.10));
  const double bound = std::sqrt(6.0 / 210.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);

  // deterministic given the stream
  ParameterVector q = init_params(arch, rng::Stream{123});
  CHECK(p.values() == q.values());
}

TEST_CASE("zero parameters give the zero map in infer mode") {
  auto arch = NetworkArchitecture::standard(3, 4);
  ParameterVector p = zeros_like(arch);
  p.bn_scale(0).setOnes();
  p.bn_scale(1).setOnes();
  p.bn_scale(2).setOnes();
  p.bn_scale(3).setOnes();
  BatchNormState bn = BatchNormState::fresh(arch);
  Eigen::MatrixXd x(2, 3);
  x << 1.0, -2.0, 3.0, 0.0, 5.0, -1.0;
  Eigen::VectorXd v = infer_values(p, bn, x);
  CHECK(v(0) == 0.0);
  CHECK(v(1) == 0.0);
}

TEST_CASE("hand-evaluated composition") {
  ParameterVector p = hand_network();
  BatchNormState bn = BatchNormState::fresh(p.arch());
  Eigen::MatrixXd x(2, 1);
  x << 1.0, -1.0;
  Eigen::VectorXd v = infer_values(p, bn, x);
  CHECK(v(0) == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(v(1) == doctest::Approx(0.5).epsilon(1e-15));

  Eigen::MatrixXd g = grad_x(p, bn, x);
  CHECK(g(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(g(1, 0) == 0.0);

  // relu weak derivative at exactly zero pre-activation contributes nothing
  Eigen::MatrixXd x0(1, 1);
  x0 << 0.0;
  CHECK(grad_x(p, bn, x0)(0, 0) == 0.0);
}

TEST_CASE("gradient of an effectively affine network is the weight product") {
  // positive weights and positive inputs keep every relu in its linear range
  auto arch = NetworkArchitecture::without_bn(2, 3);
  ParameterVector p = zeros_like(arch);
  p.weight(1).setConstant(0.3);
  p.bias(1).setConstant(0.1);
  p.weight(2).setConstant(0.25);
  p.bias(2).setConstant(0.2);
  p.weight(3).setConstant(0.5);
  BatchNormState bn = BatchNormState::fresh(arch);

  Eigen::MatrixXd expected = (p.weight(3) * p.weight(2) * p.weight(1)).eval();
  for (double scale : {0.5, 1.0, 2.0}) {
    Eigen::MatrixXd x(1, 2);
    x << 0.7 * scale, 1.3 * scale;
    Eigen::MatrixXd g = grad_x(p, bn, x);
    CHECK(g(0, 0) == doctest::Approx(expected(0, 0)).epsilon(1e-14));
    CHECK(g(0, 1) == doctest::Approx(expected(0, 1)).epsilon(1e-14));
  }
}

TEST_CASE("infer mode evaluates rows independently and bit-exactly") {
  auto arch = NetworkArchitecture::standard(6, 9);
  ParameterVector p = init_params(arch, rng::Stream{9});
  BatchNormState bn = BatchNormState::fresh(arch);
  // nontrivial running statistics
  rng::SequenceGen gen(rng::Stream{10});
  for (Eigen::Index i = 0; i < bn.mean.size(); ++i) {
    bn.mean(i) = gen.next_normal();
    bn.var(i) = 0.5 + gen.next_uniform();
  }

  Eigen::MatrixXd x(7, 6);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = gen.next_normal();

  Eigen::VectorXd joint = infer_values(p, bn, x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::VectorXd single = infer_values(p, bn, x.row(r));
    CHECK(joint(r) == single(0));
  }

  // purity: repeated evaluation is identical, bn untouched
  ForwardResult fr = forward(p, bn, x, ForwardMode::infer);
  CHECK(fr.values == joint);
  CHECK(fr.bn_out.mean == bn.mean);
  CHECK(fr.bn_out.var == bn.var);
  CHECK(fr.bn_out.step_count == bn.step_count);
}

TEST_CASE("train-mode normalization statistics") {
  auto arch = NetworkArchitecture::standard(5, 8);
  ParameterVector p = init_params(arch, rng::Stream{21});
  BatchNormState bn = BatchNormState::fresh(arch);

  rng::SequenceGen gen(rng::Stream{22});
  Eigen::MatrixXd x(64, 5);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = 2.0 * gen.next_normal() + 1.0;

  ForwardResult fr = forward(p, bn, x, ForwardMode::train);
  // site 0 x-hat has column mean ~0 and variance ~1 (input variance >> floor)
  const Eigen::MatrixXd& xhat = fr.cache.bn_xhat[0];
  for (Eigen::Index c = 0; c < xhat.cols(); ++c) {
    CHECK(std::abs(xhat.col(c).mean()) <= 1e-12);
    const double var = xhat.col(c).array().square().mean() - std::pow(xhat.col(c).mean(), 2);
    CHECK(std::abs(var - 1.0) <= 1e-10);
  }
  // running statistics moved toward the batch statistics
  CHECK(fr.bn_out.step_count == 1);
  CHECK(fr.bn_out.mean.segment(0, 5).cwiseAbs().minCoeff() > 0.0);

  // identical rows: every normalized feature is zero, output equals the
  // output-site shift regardless of the weights
  Eigen::MatrixXd same(2, 5);
  same.row(0) = x.row(0);
  same.row(1) = x.row(0);
  ForwardResult fs = forward(p, bn, same, ForwardMode::train, /*update_running=*/false);
  CHECK(fs.values(0) == p.bn_shift(arch.depth)(0));
  CHECK(fs.values(1) == p.bn_shift(arch.depth)(0));

  // J=1 in train mode is rejected
  CHECK_THROWS_AS(forward(p, bn, x.topRows(1), ForwardMode::train), std::invalid_argument);
}

namespace {

// margin of the smallest |pre-activation| over relu layers, computed with an
// independent plain forward (valid for fresh BN state: infer is an identity
// normalization there)
double relu_margin_fresh_bn(const ParameterVector& p, const Eigen::VectorXd& x) {
  const auto& arch = p.arch();
  double margin = std::numeric_limits<double>::infinity();
  Eigen::VectorXd h = x;
  for (int layer = 1; layer <= arch.depth; ++layer) {
    Eigen::VectorXd z = p.weight(layer) * h + p.bias(layer);
    if (layer < arch.depth) {
      margin = std::min(margin, z.cwiseAbs().minCoeff());
      h = z.cwiseMax(0.0);
    }
  }
  return margin;
}

}  // namespace

TEST_CASE("grad_x matches central finite differences away from kinks") {
  const int d = 10;
  auto arch = NetworkArchitecture::without_bn(d, 12);
  ParameterVector p = init_params(arch, rng::Stream{31});
  BatchNormState bn = BatchNormState::fresh(arch);
  rng::SequenceGen gen(rng::Stream{32});

  int tested = 0;
  for (int attempt = 0; attempt < 400 && tested < 200; ++attempt) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = gen.next_normal();
    if (relu_margin_fresh_bn(p, x) < 1e-3) continue;
    ++tested;

    Eigen::MatrixXd g = grad_x(p, bn, x.transpose());
    const int coord = tested % d;
    const double h = 1e-5;
    Eigen::MatrixXd xp = x.transpose(), xm = x.transpose();
    xp(0, coord) += h;
    xm(0, coord) -= h;
    const double fd = (infer_values(p, bn, xp)(0) - infer_values(p, bn, xm)(0)) / (2.0 * h);
    if (std::abs(fd) > 1e-8) {
      CHECK(g(0, coord) == doctest::Approx(fd).epsilon(1e-6));
    } else {
      CHECK(std::abs(g(0, coord) - fd) < 1e-8);
    }
  }
  CHECK(tested == 200);
}

TEST_CASE("grad_params matches finite differences of the weighted output") {
  const int d = 5;
  const int J = 8;
  auto arch = NetworkArchitecture::standard(d, 6);
  ParameterVector p = init_params(arch, rng::Stream{41});
  BatchNormState bn = BatchNormState::fresh(arch);
  rng::SequenceGen gen(rng::Stream{42});

  Eigen::MatrixXd x(J, d);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = gen.next_normal();
  Eigen::VectorXd upstream(J);
  for (int j = 0; j < J; ++j) upstream(j) = gen.next_normal();

  auto weighted_sum = [&](const ParameterVector& params) {
    ForwardResult fr = forward(params, bn, x, ForwardMode::train, /*update_running=*/false);
    return upstream.dot(fr.values);
  };

  ForwardResult fr = forward(p, bn, x, ForwardMode::train, /*update_running=*/false);
  ParameterVector g = grad_params(p, fr.cache, upstream);

  int checked = 0;
  const Eigen::Index total = p.values().size();
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index i =
        static_cast<Eigen::Index>(gen.next_uniform() * static_cast<double>(total));
    const double h = 1e-6 * std::max(1.0, std::abs(p.values()(i)));
    ParameterVector pp = p, pm = p;
    pp.mutable_values()(i) += h;
    pm.mutable_values()(i) -= h;
    const double fd = (weighted_sum(pp) - weighted_sum(pm)) / (2.0 * h);
    const double an = g.values()(i);
    if (std::abs(fd) > 1e-6) {
      CHECK(an == doctest::Approx(fd).epsilon(1e-5));
    } else {
      CHECK(std::abs(an - fd) <= 1e-7);
    }
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("zero upstream gives a zero gradient") {
  auto arch = NetworkArchitecture::standard(4, 5);
  ParameterVector p = init_params(arch, rng::Stream{51});
  BatchNormState bn = BatchNormState::fresh(arch);
  rng::SequenceGen gen(rng::Stream{52});
  Eigen::MatrixXd x(6, 4);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = gen.next_normal();

  ForwardResult fr = forward(p, bn, x, ForwardMode::train);
  ParameterVector g = grad_params(p, fr.cache, Eigen::VectorXd::Zero(6));
  CHECK(g.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("output bias gradient without output normalization is the upstream sum") {
  auto arch = NetworkArchitecture::standard(4, 5);
  arch.bn_sites[static_cast<std::size_t>(arch.depth)] = false;
  ParameterVector p = init_params(arch, rng::Stream{61});
  BatchNormState bn = BatchNormState::fresh(arch);
  rng::SequenceGen gen(rng::Stream{62});
  Eigen::MatrixXd x(5, 4);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = gen.next_normal();
  Eigen::VectorXd upstream(5);
  upstream << 0.3, -1.2, 0.7, 2.0, -0.4;

  ForwardResult fr = forward(p, bn, x, ForwardMode::train);
  ParameterVector g = grad_params(p, fr.cache, upstream);
  const double want = upstream.sum();
  CHECK(g.values()(p.layout().bias_offset(arch.depth)) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("stale gradient caches are rejected") {
  auto arch = NetworkArchitecture::standard(3, 4);
  ParameterVector p = init_params(arch, rng::Stream{71});
  BatchNormState bn = BatchNormState::fresh(arch);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  ForwardResult fr = forward(p, bn, x, ForwardMode::train);
  p.mutable_values()(0) += 0.1;
  CHECK_THROWS_AS(grad_params(p, fr.cache, Eigen::VectorXd::Ones(4)), std::logic_error);
}

TEST_CASE("logistic activation forward and gradient") {
  auto arch = NetworkArchitecture::without_bn(1, 1);
  arch.activation = Activation::logistic;
  ParameterVector p = zeros_like(arch);
  p.weight(1)(0, 0) = 1.0;
  p.weight(2)(0, 0) = 1.0;
  p.weight(3)(0, 0) = 1.0;
  BatchNormState bn = BatchNormState::fresh(arch);

  Eigen::MatrixXd x(1, 1);
  x << 0.3;
  auto sigmoid = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  const double expect = sigmoid(sigmoid(0.3));
  CHECK(infer_values(p, bn, x)(0) == doctest::Approx(expect).epsilon(1e-14));

  const double h = 1e-6;
  Eigen::MatrixXd xp = x, xm = x;
  xp(0, 0) += h;
  xm(0, 0) -= h;
  const double fd = (infer_values(p, bn, xp)(0) - infer_values(p, bn, xm)(0)) / (2.0 * h);
  CHECK(grad_x(p, bn, x)(0, 0) == doctest::Approx(fd).epsilon(1e-8));
}
