#ifndef HSD_NN_NETWORK_HPP
#define HSD_NN_NETWORK_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hsd/errors.hpp"
#include "hsd/nn/activations.hpp"
#include "hsd/nn/lstm.hpp"
#include "hsd/random.hpp"

namespace hsd::nn {

/// Layer sizes of the four-layer classifier:
/// embedding -> LSTM -> [h_T ; extra features] -> dense (ReLU) -> softmax(3).
struct NetworkShape {
  Eigen::Index vocab_rows = 2;
  Eigen::Index embedding_dim = 16;
  Eigen::Index hidden = 200;
  Eigen::Index extra_features = 0;
  Eigen::Index dense_width = 30;
  Eigen::Index classes = 3;
  CellActivation activation = CellActivation::Sigmoid;
  /// Index-0 timesteps carry the state through unchanged.
  bool masking = true;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

template <typename Scalar>
struct NetworkParams {
  Mat<Scalar> embedding;  // [embedding_dim x vocab_rows], one column per index
  LstmParams<Scalar> lstm;
  Mat<Scalar> dense_w;  // [dense_width x (hidden + extra_features)]
  Mat<Scalar> dense_b;
  Mat<Scalar> out_w;  // [classes x dense_width]
  Mat<Scalar> out_b;

  template <typename F>
  void visit(F&& f) {
    f("embedding", embedding);
    f("lstm.W", lstm.W);
    f("lstm.U", lstm.U);
    f("lstm.b", lstm.b);
    f("dense.W", dense_w);
    f("dense.b", dense_b);
    f("out.W", out_w);
    f("out.b", out_b);
  }

  template <typename F>
  void visit(F&& f) const {
    f("embedding", embedding);
    f("lstm.W", lstm.W);
    f("lstm.U", lstm.U);
    f("lstm.b", lstm.b);
    f("dense.W", dense_w);
    f("dense.b", dense_b);
    f("out.W", out_w);
    f("out.b", out_b);
  }

  static NetworkParams zeros(const NetworkShape& s) {
    NetworkParams p;
    p.embedding = Mat<Scalar>::Zero(s.embedding_dim, s.vocab_rows);
    p.lstm = LstmParams<Scalar>::zeros(s.embedding_dim, s.hidden);
    p.dense_w = Mat<Scalar>::Zero(s.dense_width, s.hidden + s.extra_features);
    p.dense_b = Mat<Scalar>::Zero(s.dense_width, 1);
    p.out_w = Mat<Scalar>::Zero(s.classes, s.dense_width);
    p.out_b = Mat<Scalar>::Zero(s.classes, 1);
    return p;
  }

  /// Uniform Glorot weights, zero biases, forget-gate bias 1.
  static NetworkParams glorot(const NetworkShape& s, Rng& rng) {
    auto p = zeros(s);
    auto fill = [&rng](auto block, Eigen::Index fan_in, Eigen::Index fan_out) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (Eigen::Index j = 0; j < block.cols(); ++j) {
        for (Eigen::Index i = 0; i < block.rows(); ++i) {
          block(i, j) = static_cast<Scalar>(rng.uniform(-limit, limit));
        }
      }
    };
    fill(p.embedding.block(0, 0, p.embedding.rows(), p.embedding.cols()), s.vocab_rows,
         s.embedding_dim);
    for (auto g : kGates) {
      fill(p.lstm.gate_rows(p.lstm.W, g), s.embedding_dim, s.hidden);
      fill(p.lstm.gate_rows(p.lstm.U, g), s.hidden, s.hidden);
    }
    p.lstm.gate_rows(p.lstm.b, Gate::Forget).setOnes();
    fill(p.dense_w.block(0, 0, p.dense_w.rows(), p.dense_w.cols()), p.dense_w.cols(),
         p.dense_w.rows());
    fill(p.out_w.block(0, 0, p.out_w.rows(), p.out_w.cols()), p.out_w.cols(), p.out_w.rows());
    return p;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&n](const char*, const Mat<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

/// Everything the backward pass needs. Index t of h and c is the state after
/// t evaluated steps (h[0] = c[0] = 0).
template <typename Scalar>
struct ForwardCache {
  Eigen::MatrixXi tokens;  // [timesteps x batch]
  Mat<Scalar> features;    // [extra_features x batch]
  Eigen::Index steps = 0;  // timesteps actually evaluated
  std::vector<Mat<Scalar>> x, h, c, gates, cell_act;
  std::vector<Eigen::Array<Scalar, 1, Eigen::Dynamic>> mask;
  Mat<Scalar> z, dense_pre, dense, probs;
};

/// Mean categorical cross-entropy, probabilities clamped to [1e-12, 1].
template <typename Scalar>
Scalar cross_entropy(const Mat<Scalar>& probs, const Eigen::VectorXi& targets) {
  if (targets.size() != probs.cols()) throw ShapeError("cross_entropy: batch size mismatch");
  Scalar total = 0;
  for (Eigen::Index b = 0; b < probs.cols(); ++b) {
    const Scalar p = probs(targets(b), b);
    total -= std::log(std::clamp(p, Scalar(1e-12), Scalar(1)));
  }
  return probs.cols() ? total / static_cast<Scalar>(probs.cols()) : Scalar(0);
}

template <typename Scalar>
class Network {
 public:
  Network() = default;
  Network(NetworkShape shape, NetworkParams<Scalar> params)
      : shape_(shape), params_(std::move(params)) {
    check();
  }

  static Network initialize(const NetworkShape& shape, Rng& rng) {
    return Network(shape, NetworkParams<Scalar>::glorot(shape, rng));
  }

  const NetworkShape& shape() const { return shape_; }
  const NetworkParams<Scalar>& params() const { return params_; }
  NetworkParams<Scalar>& params() { return params_; }

  /// Class probabilities [classes x batch] for token columns [timesteps x batch].
  Mat<Scalar> predict(const Eigen::MatrixXi& tokens, const Mat<Scalar>& features) const {
    return run<false>(tokens, features).probs;
  }

  ForwardCache<Scalar> forward(const Eigen::MatrixXi& tokens, const Mat<Scalar>& features) const {
    return run<true>(tokens, features);
  }

  /// Gradients of the mean cross-entropy of `cache.probs` against `targets`
  /// (class ordinals), through the full unrolled recurrence.
  NetworkParams<Scalar> backward(const ForwardCache<Scalar>& k,
                                 const Eigen::VectorXi& targets) const {
    const Eigen::Index B = k.probs.cols();
    const Eigen::Index H = shape_.hidden;
    if (targets.size() != B) throw ShapeError("backward: batch size mismatch");
    auto g = NetworkParams<Scalar>::zeros(shape_);

    Mat<Scalar> dlogits = k.probs;
    for (Eigen::Index b = 0; b < B; ++b) dlogits(targets(b), b) -= Scalar(1);
    dlogits /= static_cast<Scalar>(B);
    g.out_w.noalias() = dlogits * k.dense.transpose();
    g.out_b = dlogits.rowwise().sum();

    Mat<Scalar> ddense = params_.out_w.transpose() * dlogits;
    Mat<Scalar> dpre = (k.dense_pre.array() > Scalar(0)).select(ddense, Scalar(0));
    g.dense_w.noalias() = dpre * k.z.transpose();
    g.dense_b = dpre.rowwise().sum();
    Mat<Scalar> dz = params_.dense_w.transpose() * dpre;

    Mat<Scalar> dh = dz.topRows(H);
    Mat<Scalar> dc = Mat<Scalar>::Zero(H, B);
    Mat<Scalar> da(4 * H, B);
    const auto act = shape_.activation;
    for (Eigen::Index t = k.steps - 1; t >= 0; --t) {
      const auto& gates = k.gates[t];
      const auto i = gates.middleRows(0, H).array();
      const auto f = gates.middleRows(H, H).array();
      const auto o = gates.middleRows(2 * H, H).array();
      const auto cand = gates.middleRows(3 * H, H);
      const auto& m = k.mask[t];

      const Mat<Scalar> dc_tilde =
          dc.array() + dh.array() * o * activation_grad_from_output(k.cell_act[t], act).array();
      da.middleRows(0, H) = (dc_tilde.array() * cand.array() * i * (Scalar(1) - i)).matrix();
      da.middleRows(H, H) =
          (dc_tilde.array() * k.c[t].array() * f * (Scalar(1) - f)).matrix();
      da.middleRows(2 * H, H) =
          (dh.array() * k.cell_act[t].array() * o * (Scalar(1) - o)).matrix();
      da.middleRows(3 * H, H) =
          (dc_tilde.array() * i * activation_grad_from_output(cand, act).array()).matrix();
      da.array().rowwise() *= m;

      g.lstm.W.noalias() += da * k.x[t].transpose();
      g.lstm.U.noalias() += da * k.h[t].transpose();
      g.lstm.b += da.rowwise().sum();
      const Mat<Scalar> dx = params_.lstm.W.transpose() * da;
      for (Eigen::Index b = 0; b < B; ++b) {
        if (m(b) != Scalar(0)) g.embedding.col(k.tokens(t, b)) += dx.col(b);
      }

      const auto keep = (Scalar(1) - m);
      Mat<Scalar> dh_prev = params_.lstm.U.transpose() * da;
      dh_prev.array() += dh.array().rowwise() * keep;
      Mat<Scalar> dc_prev = (dc_tilde.array() * f).matrix();
      dc_prev.array().rowwise() *= m;
      dc_prev.array() += dc.array().rowwise() * keep;
      dh.swap(dh_prev);
      dc.swap(dc_prev);
    }
    return g;
  }

 private:
  void check() const {
    params_.lstm.check_shapes();
    const auto& s = shape_;
    const auto& p = params_;
    if (p.embedding.rows() != s.embedding_dim || p.embedding.cols() != s.vocab_rows ||
        p.lstm.hidden() != s.hidden || p.lstm.input_dim() != s.embedding_dim ||
        p.dense_w.rows() != s.dense_width || p.dense_w.cols() != s.hidden + s.extra_features ||
        p.dense_b.rows() != s.dense_width || p.dense_b.cols() != 1 ||
        p.out_w.rows() != s.classes || p.out_w.cols() != s.dense_width ||
        p.out_b.rows() != s.classes || p.out_b.cols() != 1) {
      throw ShapeError("network parameters do not match the configured shape");
    }
  }

  template <bool Store>
  ForwardCache<Scalar> run(const Eigen::MatrixXi& tokens, const Mat<Scalar>& features) const {
    const Eigen::Index B = tokens.cols();
    const Eigen::Index H = shape_.hidden;
    if (features.rows() != shape_.extra_features || features.cols() != B) {
      throw ShapeError("forward: expected " + std::to_string(shape_.extra_features) +
                       " feature rows for " + std::to_string(B) + " columns");
    }
    if (tokens.size() > 0 && (tokens.minCoeff() < 0 || tokens.maxCoeff() >= shape_.vocab_rows)) {
      throw std::out_of_range("forward: token index outside the embedding table (size " +
                              std::to_string(shape_.vocab_rows) + ")");
    }

    ForwardCache<Scalar> k;
    Eigen::Index steps = tokens.rows();
    if (shape_.masking) {
      while (steps > 0 && (tokens.row(steps - 1).array() == 0).all()) --steps;
    }
    k.steps = steps;
    if constexpr (Store) {
      k.tokens = tokens;
      k.features = features;
      k.x.reserve(steps);
      k.h.reserve(steps + 1);
      k.c.reserve(steps + 1);
      k.gates.reserve(steps);
      k.cell_act.reserve(steps);
      k.mask.reserve(steps);
    }

    Mat<Scalar> h = Mat<Scalar>::Zero(H, B);
    Mat<Scalar> c = Mat<Scalar>::Zero(H, B);
    if constexpr (Store) {
      k.h.push_back(h);
      k.c.push_back(c);
    }
    Mat<Scalar> x(shape_.embedding_dim, B);
    for (Eigen::Index t = 0; t < steps; ++t) {
      for (Eigen::Index b = 0; b < B; ++b) x.col(b) = params_.embedding.col(tokens(t, b));
      auto s = lstm_step(params_.lstm, x, h, c, shape_.activation);
      Eigen::Array<Scalar, 1, Eigen::Dynamic> m;
      if (shape_.masking) {
        m = (tokens.row(t).array() != 0).template cast<Scalar>();
        const auto keep = (Scalar(1) - m);
        s.h.array() = s.h.array().rowwise() * m + h.array().rowwise() * keep;
        s.c.array() = s.c.array().rowwise() * m + c.array().rowwise() * keep;
      } else {
        m = Eigen::Array<Scalar, 1, Eigen::Dynamic>::Ones(B);
      }
      h = s.h;
      c = s.c;
      if constexpr (Store) {
        k.x.push_back(x);
        k.h.push_back(h);
        k.c.push_back(c);
        k.gates.push_back(std::move(s.gates));
        k.cell_act.push_back(std::move(s.cell_act));
        k.mask.push_back(std::move(m));
      }
    }

    k.z.resize(H + shape_.extra_features, B);
    k.z.topRows(H) = h;
    k.z.bottomRows(shape_.extra_features) = features;
    k.dense_pre = params_.dense_w * k.z;
    k.dense_pre.colwise() += params_.dense_b.col(0);
    k.dense = relu(k.dense_pre);
    Mat<Scalar> logits = params_.out_w * k.dense;
    logits.colwise() += params_.out_b.col(0);
    k.probs = softmax(logits);
    return k;
  }

  NetworkShape shape_;
  NetworkParams<Scalar> params_;
};

}  // namespace hsd::nn

#endif  // HSD_NN_NETWORK_HPP
