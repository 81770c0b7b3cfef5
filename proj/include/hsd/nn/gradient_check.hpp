#ifndef HSD_NN_GRADIENT_CHECK_HPP
#define HSD_NN_GRADIENT_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hsd/nn/network.hpp"

namespace hsd::nn {

struct BlockCheck {
  std::string name;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t entries = 0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<BlockCheck> blocks;
  double tolerance = 0.0;
  bool passed() const {
    return std::all_of(blocks.begin(), blocks.end(), [](const BlockCheck& b) { return b.passed; });
  }
  double worst() const {
    double w = 0.0;
    for (const auto& b : blocks) w = std::max(w, b.max_relative_error);
    return w;
  }
};

/// Entry-wise error |a - n| / max(|a|, |n|, floor). The floor keeps entries
/// whose true gradient is ~0 from dividing round-off by round-off.
inline constexpr double kRelativeErrorFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

using GradientFn =
    std::function<NetworkParams<double>(const Network<double>&, const ForwardCache<double>&,
                                        const Eigen::VectorXi&)>;

/// Compares analytic gradients with central differences of the loss, entry by
/// entry. LSTM blocks are reported per gate (lstm.W_i, lstm.U_f, ...).
/// `gradient` defaults to Network::backward; tests substitute a broken one.
inline GradientCheckReport gradient_check(const Network<double>& net, const Eigen::MatrixXi& tokens,
                                          const Mat<double>& features,
                                          const Eigen::VectorXi& targets, double h,
                                          double tolerance, GradientFn gradient = {}) {
  if (!gradient) {
    gradient = [](const Network<double>& n, const ForwardCache<double>& k,
                  const Eigen::VectorXi& y) { return n.backward(k, y); };
  }
  const auto analytic = gradient(net, net.forward(tokens, features), targets);

  Network<double> probe = net;
  auto loss_at = [&]() { return cross_entropy(probe.predict(tokens, features), targets); };

  std::vector<std::pair<std::string, const Mat<double>*>> grads;
  analytic.visit([&grads](const char* name, const Mat<double>& g) { grads.emplace_back(name, &g); });
  std::vector<Mat<double>*> params;
  probe.params().visit([&params](const char*, Mat<double>& p) { params.push_back(&p); });

  GradientCheckReport report;
  report.tolerance = tolerance;
  const Eigen::Index H = net.shape().hidden;
  for (std::size_t bi = 0; bi < params.size(); ++bi) {
    auto& p = *params[bi];
    const auto& g = *grads[bi].second;
    const std::string& name = grads[bi].first;
    const bool per_gate = name.rfind("lstm.", 0) == 0;
    std::vector<BlockCheck> parts(per_gate ? 4 : 1);
    for (std::size_t gi = 0; gi < parts.size(); ++gi) {
      parts[gi].name = per_gate ? name + "_" + gate_code(kGates[gi]) : name;
    }
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double saved = p(i, j);
        p(i, j) = saved + h;
        const double up = loss_at();
        p(i, j) = saved - h;
        const double down = loss_at();
        p(i, j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        auto& part = parts[per_gate ? static_cast<std::size_t>(i / H) : 0];
        part.max_relative_error = std::max(part.max_relative_error, relative_error(g(i, j), numeric));
        part.max_absolute_error = std::max(part.max_absolute_error, std::abs(g(i, j) - numeric));
        ++part.entries;
      }
    }
    for (auto& part : parts) {
      part.passed = part.max_relative_error < tolerance;
      report.blocks.push_back(std::move(part));
    }
  }
  return report;
}

}  // namespace hsd::nn

#endif  // HSD_NN_GRADIENT_CHECK_HPP
