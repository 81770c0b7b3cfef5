#ifndef HSD_NN_ADAM_HPP
#define HSD_NN_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "hsd/errors.hpp"
#include "hsd/nn/network.hpp"

namespace hsd::nn {

struct AdamHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected update of one block; `step` is the 1-based update count.
template <typename Derived, typename Grad>
void adam_update(Eigen::MatrixBase<Derived>& theta, const Eigen::MatrixBase<Grad>& grad,
                 Eigen::MatrixBase<Derived>& m, Eigen::MatrixBase<Derived>& v, std::int64_t step,
                 const AdamHyper& hp) {
  using Scalar = typename Derived::Scalar;
  if (grad.rows() != theta.rows() || grad.cols() != theta.cols() || m.rows() != theta.rows() ||
      m.cols() != theta.cols() || v.rows() != theta.rows() || v.cols() != theta.cols()) {
    throw ShapeError("adam_update: block shapes differ");
  }
  const auto b1 = static_cast<Scalar>(hp.beta1);
  const auto b2 = static_cast<Scalar>(hp.beta2);
  m = b1 * m + (Scalar(1) - b1) * grad;
  v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
  const auto c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step));
  const auto c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step));
  const auto lr = static_cast<Scalar>(hp.learning_rate);
  const auto eps = static_cast<Scalar>(hp.epsilon);
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

/// Moments for every block of a network. Zero-initialised, step starts at 0.
template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  NetworkParams<Scalar> m;
  NetworkParams<Scalar> v;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(const NetworkShape& shape, AdamHyper hp)
      : m(NetworkParams<Scalar>::zeros(shape)), v(NetworkParams<Scalar>::zeros(shape)),
        hyper(hp) {}
};

template <typename Scalar>
Scalar global_norm(const NetworkParams<Scalar>& grads) {
  Scalar sq = 0;
  grads.visit([&sq](const char*, const Mat<Scalar>& g) { sq += g.squaredNorm(); });
  return std::sqrt(sq);
}

/// Rescales gradients whose global L2 norm exceeds `max_norm`.
template <typename Scalar>
void clip_global_norm(NetworkParams<Scalar>& grads, Scalar max_norm) {
  const Scalar norm = global_norm(grads);
  if (norm <= max_norm || norm == Scalar(0)) return;
  const Scalar scale = max_norm / norm;
  grads.visit([scale](const char*, Mat<Scalar>& g) { g *= scale; });
}

/// One optimiser step over all blocks.
template <typename Scalar>
void adam_step(NetworkParams<Scalar>& params, const NetworkParams<Scalar>& grads,
               AdamState<Scalar>& state) {
  ++state.step;
  std::vector<Mat<Scalar>*> p, m, v;
  std::vector<const Mat<Scalar>*> g;
  params.visit([&p](const char*, Mat<Scalar>& x) { p.push_back(&x); });
  state.m.visit([&m](const char*, Mat<Scalar>& x) { m.push_back(&x); });
  state.v.visit([&v](const char*, Mat<Scalar>& x) { v.push_back(&x); });
  grads.visit([&g](const char*, const Mat<Scalar>& x) { g.push_back(&x); });
  for (std::size_t i = 0; i < p.size(); ++i) {
    adam_update(*p[i], *g[i], *m[i], *v[i], state.step, state.hyper);
  }
}

}  // namespace hsd::nn

#endif  // HSD_NN_ADAM_HPP
