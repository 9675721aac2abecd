#include "nsr/model/tape.hpp"

#include <cmath>

#include "nsr/error.hpp"

namespace nsr::model {

template <class T>
int ParameterSet<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw InvalidConfig("unknown parameter '" + std::string(name) + "'");
}

template <class T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += static_cast<std::size_t>(v.size());
  return n;
}

template <class T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  out.names = names;
  for (const auto& v : values) out.values.push_back(Mat<T>::Zero(v.rows(), v.cols()));
  return out;
}

template <class T>
void ParameterSet<T>::set_zero() {
  for (auto& v : values) v.setZero();
}

template <class T>
bool ParameterSet<T>::all_finite() const {
  for (const auto& v : values)
    if (!v.allFinite()) return false;
  return true;
}

template <class T>
void ParameterSet<T>::accumulate(const ParameterSet& other) {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
}

template <class T>
typename Tape<T>::Var Tape<T>::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
const typename Tape<T>::M& Tape<T>::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.op == Op::Param ? params_->values[static_cast<std::size_t>(n.i0)] : n.value;
}

template <class T>
typename Tape<T>::Var Tape<T>::param(int index) {
  Node n{Op::Param, {}};
  n.i0 = index;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::input(M value) {
  return push(Node{Op::Input, std::move(value)});
}

template <class T>
typename Tape<T>::Var Tape<T>::matmul(Var a, Var b) {
  Node n{Op::MatMul, value(a) * value(b)};
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::matmul_nt(Var a, Var b) {
  Node n{Op::MatMulNT, value(a) * value(b).transpose()};
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::add(Var a, Var b) {
  Node n{Op::Add, value(a) + value(b)};
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::add_row(Var a, Var row) {
  M out = value(a);
  out.rowwise() += value(row).row(0);
  Node n{Op::AddRow, std::move(out)};
  n.a = a.id;
  n.b = row.id;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::scale(Var a, T s) {
  Node n{Op::Scale, value(a) * s};
  n.a = a.id;
  n.s = s;
  return push(std::move(n));
}

namespace {
template <class T>
T normal_cdf(T x) {
  return T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440)));
}
template <class T>
T normal_pdf(T x) {
  return T(0.39894228040143267794) * std::exp(T(-0.5) * x * x);
}
}  // namespace

template <class T>
typename Tape<T>::Var Tape<T>::gelu(Var a) {
  const M& x = value(a);
  Node n{Op::Gelu, x.unaryExpr([](T v) { return v * normal_cdf(v); })};
  n.a = a.id;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::layer_norm(Var x, Var gain, Var bias) {
  constexpr T eps = T(1e-5);
  const M& in = value(x);
  const auto cols = static_cast<T>(in.cols());
  M xhat(in.rows(), in.cols());
  M rstd(in.rows(), 1);
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const T mean = in.row(r).sum() / cols;
    const T var = (in.row(r).array() - mean).square().sum() / cols;
    rstd(r, 0) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * rstd(r, 0);
  }
  M out = xhat.array().rowwise() * value(gain).row(0).array();
  out.rowwise() += value(bias).row(0);
  Node n{Op::LayerNorm, std::move(out)};
  n.a = x.id;
  n.b = gain.id;
  n.c = bias.id;
  n.aux.resize(in.rows(), in.cols() + 1);
  n.aux.leftCols(in.cols()) = xhat;
  n.aux.rightCols(1) = rstd;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::softmax_rows(Var a, bool causal) {
  const M& in = value(a);
  M out(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const Eigen::Index width = causal ? std::min<Eigen::Index>(r + 1, in.cols()) : in.cols();
    const T mx = in.row(r).head(width).maxCoeff();
    T sum = T(0);
    for (Eigen::Index c = 0; c < width; ++c) {
      out(r, c) = std::exp(in(r, c) - mx);
      sum += out(r, c);
    }
    for (Eigen::Index c = 0; c < width; ++c) out(r, c) /= sum;
    for (Eigen::Index c = width; c < in.cols(); ++c) out(r, c) = T(0);
  }
  Node n{Op::Softmax, std::move(out)};
  n.a = a.id;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::col_slice(Var a, int first, int width) {
  Node n{Op::ColSlice, value(a).middleCols(first, width)};
  n.a = a.id;
  n.i0 = first;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::concat_cols(const std::vector<Var>& parts) {
  Eigen::Index cols = 0;
  for (Var p : parts) cols += value(p).cols();
  M out(value(parts.front()).rows(), cols);
  Node n{Op::ConcatCols, {}};
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
    n.ids.push_back(p.id);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::gather_rows(Var table, std::vector<int> rows) {
  const M& t = value(table);
  M out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = t.row(rows[i]);
  Node n{Op::GatherRows, std::move(out)};
  n.a = table.id;
  n.ids = std::move(rows);
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::row_slice(Var a, int first, int count) {
  Node n{Op::RowSlice, value(a).middleRows(first, count)};
  n.a = a.id;
  n.i0 = first;
  return push(std::move(n));
}

template <class T>
typename Tape<T>::Var Tape<T>::cross_entropy(Var logits, std::vector<int> targets) {
  const M& z = value(logits);
  M probs(z.rows(), z.cols());
  T total = T(0);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const T mx = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - mx).exp();
    const T sum = probs.row(r).sum();
    probs.row(r) /= sum;
    total += mx + std::log(sum) - z(r, targets[static_cast<std::size_t>(r)]);
  }
  M out(1, 1);
  out(0, 0) = total;
  Node n{Op::CrossEntropy, std::move(out)};
  n.a = logits.id;
  n.ids = std::move(targets);
  n.aux = std::move(probs);
  return push(std::move(n));
}

template <class T>
typename Tape<T>::M& Tape<T>::grad_of(int id) {
  const auto i = static_cast<std::size_t>(id);
  if (!has_grad_[i]) {
    const M& v = value(Var{id});
    grads_[i] = M::Zero(v.rows(), v.cols());
    has_grad_[i] = 1;
  }
  return grads_[i];
}

template <class T>
void Tape<T>::backward(Var root, ParameterSet<T>& grads) {
  grads_.assign(nodes_.size(), M());
  has_grad_.assign(nodes_.size(), 0);
  grad_of(root.id).setConstant(T(1));

  for (int id = root.id; id >= 0; --id) {
    const auto i = static_cast<std::size_t>(id);
    if (!has_grad_[i]) continue;
    const Node& n = nodes_[i];
    const M g = std::move(grads_[i]);
    has_grad_[i] = 0;
    switch (n.op) {
      case Op::Param:
        grads.values[static_cast<std::size_t>(n.i0)] += g;
        break;
      case Op::Input:
        break;
      case Op::MatMul:
        grad_of(n.a).noalias() += g * value(Var{n.b}).transpose();
        grad_of(n.b).noalias() += value(Var{n.a}).transpose() * g;
        break;
      case Op::MatMulNT:
        grad_of(n.a).noalias() += g * value(Var{n.b});
        grad_of(n.b).noalias() += g.transpose() * value(Var{n.a});
        break;
      case Op::Add:
        grad_of(n.a) += g;
        grad_of(n.b) += g;
        break;
      case Op::AddRow:
        grad_of(n.a) += g;
        grad_of(n.b) += g.colwise().sum();
        break;
      case Op::Scale:
        grad_of(n.a) += g * n.s;
        break;
      case Op::Gelu: {
        const M& x = value(Var{n.a});
        grad_of(n.a).array() +=
            g.array() * x.unaryExpr([](T v) { return normal_cdf(v) + v * normal_pdf(v); }).array();
        break;
      }
      case Op::LayerNorm: {
        const Eigen::Index cols = g.cols();
        const auto xhat = n.aux.leftCols(cols);
        const auto rstd = n.aux.rightCols(1);
        const auto& gain = value(Var{n.b});
        grad_of(n.b) += (g.array() * xhat.array()).colwise().sum().matrix();
        grad_of(n.c) += g.colwise().sum();
        M dxhat = g.array().rowwise() * gain.row(0).array();
        M& gx = grad_of(n.a);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const T mean_d = dxhat.row(r).mean();
          const T mean_dx = (dxhat.row(r).array() * xhat.row(r).array()).mean();
          gx.row(r).array() += rstd(r, 0) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
        }
        break;
      }
      case Op::Softmax: {
        const M& p = n.value;
        const auto dot = (g.array() * p.array()).rowwise().sum().eval();
        grad_of(n.a).array() += p.array() * (g.array().colwise() - dot);
        break;
      }
      case Op::ColSlice:
        grad_of(n.a).middleCols(n.i0, g.cols()) += g;
        break;
      case Op::ConcatCols: {
        Eigen::Index at = 0;
        for (int part : n.ids) {
          const Eigen::Index w = value(Var{part}).cols();
          grad_of(part) += g.middleCols(at, w);
          at += w;
        }
        break;
      }
      case Op::GatherRows: {
        M& gt = grad_of(n.a);
        for (std::size_t r = 0; r < n.ids.size(); ++r) gt.row(n.ids[r]) += g.row(static_cast<Eigen::Index>(r));
        break;
      }
      case Op::RowSlice:
        grad_of(n.a).middleRows(n.i0, g.rows()) += g;
        break;
      case Op::CrossEntropy: {
        M d = n.aux;
        for (std::size_t r = 0; r < n.ids.size(); ++r) d(static_cast<Eigen::Index>(r), n.ids[r]) -= T(1);
        grad_of(n.a) += d * g(0, 0);
        break;
      }
    }
  }
}

template struct ParameterSet<float>;
template struct ParameterSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace nsr::model
