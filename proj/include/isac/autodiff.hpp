#pragma once

#include "isac/types.hpp"

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace isac::ad {

using Arr = Eigen::ArrayXd;
using Eigen::Index;

// Complex data on the tape is stored as interleaved re/im pairs in
// row-major order, bit-compatible with Tensor3c / std::complex<double>.
Arr pack(const CVec& v);
Arr pack(const CMat& m);       // row-major traversal
Arr pack(const Tensor3c& t);
Arr pack(const RVec& v);
CVec unpack_cvec(const Arr& a);
Tensor3c unpack_tensor(const Arr& a, Index d0, Index d1, Index d2);

/// Handle to a tape node.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Append-only reverse-mode tape over flat real arrays. One backward pass
/// per tape; every primitive registers its vector-Jacobian product as a
/// closure over the node ids it needs.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----
  Var constant(Arr v);
  Var param(const std::string& name, const Arr& value);

  // ---- real elementwise / reductions ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(double c, Var x);
  Var scale_var(Var c, Var x);  // 1-element node times array (real or complex)
  Var sum(Var x);
  Var dot(Var a, Var b);
  Var abs_elem(Var x);
  Var sin_elem(Var x);
  Var exp_elem(Var x);
  Var gelu(Var x);
  Var softmax(Var x);
  Var max_reduce(Var x);
  Var div_by_scalar(Var x, Var s);  // zero divisor yields zeros
  Var slice(Var x, Index offset, Index len);
  Var concat(Var a, Var b);
  Var detach(Var x);

  // ---- dense layers ----
  Var affine(Var x, Var w, Var b, Index n_out, Index n_in);
  /// Zero-padded square-kernel convolution over a [C,H,W] channel-major
  /// image; weights [c_out, c_in, k, k], k odd.
  Var conv2d(Var x, Var w, Var b, Index c_in, Index c_out, Index h, Index wd, Index k);

  // ---- complex primitives ----
  Var cmul(Var a, Var b);
  /// Scales row (axis 0) or column (axis 1) slices of a complex [r,c]
  /// matrix by the complex vector h.
  Var cmul_bcast(Var h, Var m, Index rows, Index cols, int axis);
  Var conj(Var z);
  Var ctranspose(Var m, Index rows, Index cols);
  /// out[i,j,k] = sum_m z[m,i,j] d[m,k]; z shape [d0,d1,d2], d shape [d0,n].
  Var contract_first(Var z, std::array<Index, 3> zshape, Var d, Index n);
  Var magnitude(Var z);                       // complex n -> real n
  Var mix_cols(Var w_real, Var m, Index rows, Index cols);  // complex [rows]
  Var outer3c(Var a, Var b, Var c, Index da, Index db, Index dc);
  Var marginal(Var a, std::array<Index, 3> shape, int axis);  // real
  Var complex_to_channels(Var z, Index k, Index s, Index t);  // -> [2K,S,T]
  Var channels_to_complex(Var img, Index k, Index s, Index t);
  /// Entrywise principal-branch power w^g with real scalar exponent g.
  Var cpow(Var w, Var g);
  /// out[k,i] = exp(j (k+1) u_i) for k = 0..dim-1: phase dictionary columns.
  Var vandermonde_phase(Var u, Index dim);

  // ---- access ----
  const Arr& val(Var v) const;
  double scalar(Var v) const;
  Index size() const { return Index(nodes_.size()); }

  void backward(Var loss);
  bool has_grad(Var v) const;
  const Arr& grad(Var v) const;
  /// Gradients of all registered parameters (zero arrays where unreached).
  std::map<std::string, Arr> param_grads() const;

 private:
  struct Node {
    Arr val;
    bool needs = false;
    std::function<void(Tape&)> vjp;  // nullptr for leaves
  };

  Var push(Arr val, bool needs, std::function<void(Tape&)> vjp);
  bool needs(Var v) const { return nodes_[check(v)].needs; }
  Arr& gbuf(int32_t id);
  int32_t check(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Arr> grads_;
  std::vector<std::pair<std::string, int32_t>> params_;
  bool backward_done_ = false;
};

/// Named parameter arrays; map ordering fixes every reduction order.
struct ParamStore {
  std::map<std::string, Arr> values;

  Arr& at(const std::string& name);
  const Arr& at(const std::string& name) const;
  bool has(const std::string& name) const { return values.count(name) != 0; }
  void add(const std::string& name, Arr v);
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::map<std::string, Arr> m, v;

  /// Standard bias-corrected update, applied parameter by parameter.
  void step(ParamStore& params, const std::map<std::string, Arr>& grads);
};

}  // namespace isac::ad
