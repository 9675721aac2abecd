#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace nsr::model {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Named parameter arrays, all stored as matrices (vectors are 1 x n).
template <class T>
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Mat<T>> values;

  int add(std::string name, Mat<T> value) {
    names.push_back(std::move(name));
    values.push_back(std::move(value));
    return static_cast<int>(values.size()) - 1;
  }
  /// Throws InvalidConfig for an unknown name.
  int index_of(std::string_view name) const;
  Mat<T>& operator[](std::string_view name) { return values[static_cast<std::size_t>(index_of(name))]; }
  const Mat<T>& operator[](std::string_view name) const { return values[static_cast<std::size_t>(index_of(name))]; }
  std::size_t size() const { return values.size(); }
  std::size_t scalar_count() const;
  ParameterSet zeros_like() const;
  void set_zero();
  bool all_finite() const;
  /// this += other, array by array.
  void accumulate(const ParameterSet& other);

  template <class U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    out.names = names;
    for (const auto& v : values) out.values.push_back(v.template cast<U>());
    return out;
  }
};

/// Reverse-mode differentiation over matrix operations. Nodes are recorded in
/// evaluation order; backward() walks them in reverse.
template <class T>
class Tape {
 public:
  using M = Mat<T>;
  struct Var {
    int id = -1;
  };

  explicit Tape(const ParameterSet<T>& params) : params_(&params) {}

  Var param(int index);
  Var input(M value);
  const M& value(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  Var matmul(Var a, Var b);     // a b
  Var matmul_nt(Var a, Var b);  // a b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // row (1 x c) broadcast over the rows of a
  Var scale(Var a, T s);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gain, Var bias);
  /// Row-wise softmax; with `causal`, entry (i, j) for j > i is masked out.
  Var softmax_rows(Var a, bool causal);
  Var col_slice(Var a, int first, int width);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather_rows(Var table, std::vector<int> rows);
  Var row_slice(Var a, int first, int count);
  /// Sum over rows of -log softmax(logits)[row, targets[row]]; a 1 x 1 node.
  Var cross_entropy(Var logits, std::vector<int> targets);

  /// Seeds d(root)/d(root) = 1 (root must be 1 x 1) and accumulates parameter
  /// gradients into `grads`, which must be shaped like the parameter set.
  void backward(Var root, ParameterSet<T>& grads);

 private:
  enum class Op {
    Param, Input, MatMul, MatMulNT, Add, AddRow, Scale, Gelu, LayerNorm, Softmax,
    ColSlice, ConcatCols, GatherRows, RowSlice, CrossEntropy,
  };
  struct Node {
    Node(Op o, M v = M()) : op(o), value(std::move(v)) {}
    Op op;
    M value;
    int a = -1, b = -1, c = -1;
    int i0 = 0, i1 = 0;
    T s = T(0);
    std::vector<int> ids;
    M aux;
  };

  Var push(Node n);
  M& grad_of(int id);

  const ParameterSet<T>* params_;
  std::vector<Node> nodes_;
  std::vector<M> grads_;
  std::vector<char> has_grad_;
};

extern template struct ParameterSet<float>;
extern template struct ParameterSet<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace nsr::model
