#ifndef HSD_NN_ACTIVATIONS_HPP
#define HSD_NN_ACTIVATIONS_HPP

#include <optional>
#include <string_view>

#include <Eigen/Core>

namespace hsd::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Activation of the LSTM candidate and of the cell output.
enum class CellActivation { Sigmoid, Tanh };

inline std::string_view to_string(CellActivation a) {
  return a == CellActivation::Sigmoid ? "sigmoid" : "tanh";
}

inline std::optional<CellActivation> parse_cell_activation(std::string_view s) {
  if (s == "sigmoid") return CellActivation::Sigmoid;
  if (s == "tanh") return CellActivation::Tanh;
  return std::nullopt;
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.cwiseMax(Scalar(0));
}

template <typename Derived>
Mat<typename Derived::Scalar> activate(const Eigen::MatrixBase<Derived>& x, CellActivation a) {
  if (a == CellActivation::Tanh) return x.array().tanh().matrix();
  return sigmoid(x);
}

/// Derivative expressed through the activation's output y = act(x).
template <typename Derived>
Mat<typename Derived::Scalar> activation_grad_from_output(const Eigen::MatrixBase<Derived>& y,
                                                          CellActivation a) {
  using Scalar = typename Derived::Scalar;
  if (a == CellActivation::Tanh) return (Scalar(1) - y.array().square()).matrix();
  return (y.array() * (Scalar(1) - y.array())).matrix();
}

/// Column-wise softmax, shifted by the column maximum.
template <typename Derived>
Mat<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Scalar top = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - top).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

}  // namespace hsd::nn

#endif  // HSD_NN_ACTIVATIONS_HPP
