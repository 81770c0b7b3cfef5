#ifndef HSD_NN_LSTM_HPP
#define HSD_NN_LSTM_HPP

#include <array>
#include <string>

#include <Eigen/Core>

#include "hsd/errors.hpp"
#include "hsd/nn/activations.hpp"

namespace hsd::nn {

/// Gate blocks are stacked row-wise in this order inside W, U and b.
enum class Gate { Input = 0, Forget = 1, Output = 2, Candidate = 3 };

inline constexpr std::array<Gate, 4> kGates{Gate::Input, Gate::Forget, Gate::Output,
                                            Gate::Candidate};

inline char gate_code(Gate g) {
  constexpr char codes[] = {'i', 'f', 'o', 'g'};
  return codes[static_cast<int>(g)];
}

/// W: [4H x input], U: [4H x H], b: [4H x 1].
template <typename Scalar>
struct LstmParams {
  Mat<Scalar> W;
  Mat<Scalar> U;
  Mat<Scalar> b;

  Eigen::Index hidden() const { return U.cols(); }
  Eigen::Index input_dim() const { return W.cols(); }

  auto gate_rows(Mat<Scalar>& m, Gate g) const {
    return m.middleRows(static_cast<Eigen::Index>(g) * hidden(), hidden());
  }
  auto gate_rows(const Mat<Scalar>& m, Gate g) const {
    return m.middleRows(static_cast<Eigen::Index>(g) * hidden(), hidden());
  }

  static LstmParams zeros(Eigen::Index input_dim, Eigen::Index hidden) {
    return {Mat<Scalar>::Zero(4 * hidden, input_dim), Mat<Scalar>::Zero(4 * hidden, hidden),
            Mat<Scalar>::Zero(4 * hidden, 1)};
  }

  void check_shapes() const {
    const auto h = hidden();
    if (W.rows() != 4 * h || U.rows() != 4 * h || b.rows() != 4 * h || b.cols() != 1) {
      throw ShapeError("LSTM parameter blocks disagree on the hidden size");
    }
  }
};

/// Activations of one step; `gates` holds post-activation i, f, o, g stacked.
template <typename Scalar>
struct LstmStep {
  Mat<Scalar> h;
  Mat<Scalar> c;
  Mat<Scalar> gates;
  Mat<Scalar> cell_act;  // act(c) before masking
};

/// One LSTM step for a batch of column vectors.
///   i, f, o = sigmoid(.)   g = act(.)   c = f*c_prev + i*g   h = o*act(c)
template <typename Scalar>
LstmStep<Scalar> lstm_step(const LstmParams<Scalar>& p, const Mat<Scalar>& x,
                           const Mat<Scalar>& h_prev, const Mat<Scalar>& c_prev,
                           CellActivation act) {
  const auto H = p.hidden();
  if (x.rows() != p.input_dim() || h_prev.rows() != H || c_prev.rows() != H ||
      h_prev.cols() != x.cols() || c_prev.cols() != x.cols()) {
    throw ShapeError("lstm_step: input " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + " does not fit input_dim " +
                     std::to_string(p.input_dim()) + ", hidden " + std::to_string(H));
  }
  LstmStep<Scalar> s;
  Mat<Scalar> pre = p.W * x + p.U * h_prev;
  pre.colwise() += p.b.col(0);
  s.gates.resize(4 * H, x.cols());
  s.gates.topRows(3 * H) = sigmoid(pre.topRows(3 * H));
  s.gates.bottomRows(H) = activate(pre.bottomRows(H), act);
  const auto i = s.gates.middleRows(0, H).array();
  const auto f = s.gates.middleRows(H, H).array();
  const auto o = s.gates.middleRows(2 * H, H).array();
  const auto g = s.gates.middleRows(3 * H, H).array();
  s.c = (f * c_prev.array() + i * g).matrix();
  s.cell_act = activate(s.c, act);
  s.h = (o * s.cell_act.array()).matrix();
  return s;
}

}  // namespace hsd::nn

#endif  // HSD_NN_LSTM_HPP
