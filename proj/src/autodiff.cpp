#include "isac/autodiff.hpp"

#include <cmath>

namespace isac::ad {

namespace {

using CArr = Eigen::ArrayXcd;
using MapC = Eigen::Map<CArr>;
using MapConstC = Eigen::Map<const CArr>;
using MapRRM = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MapConstRRM =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

MapConstC cv(const Arr& a) {
  return MapConstC(reinterpret_cast<const cd*>(a.data()), a.size() / 2);
}
MapC cv(Arr& a) { return MapC(reinterpret_cast<cd*>(a.data()), a.size() / 2); }

MapConstCRM cm(const Arr& a, Index r, Index c) {
  return MapConstCRM(reinterpret_cast<const cd*>(a.data()), r, c);
}
MapCRM cm(Arr& a, Index r, Index c) {
  return MapCRM(reinterpret_cast<cd*>(a.data()), r, c);
}

double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

}  // namespace

Arr pack(const CVec& v) {
  Arr a(2 * v.size());
  cv(a) = v.array();
  return a;
}

Arr pack(const CMat& m) {
  Arr a(2 * m.size());
  cm(a, m.rows(), m.cols()) = m;
  return a;
}

Arr pack(const Tensor3c& t) {
  Arr a(2 * t.size());
  cv(a) = t.data.array();
  return a;
}

Arr pack(const RVec& v) { return v.array(); }

CVec unpack_cvec(const Arr& a) { return cv(a).matrix(); }

Tensor3c unpack_tensor(const Arr& a, Index d0, Index d1, Index d2) {
  Tensor3c t(d0, d1, d2);
  t.data = cv(a).matrix();
  return t;
}

int32_t Tape::check(Var v) const {
  if (!v.valid() || v.id >= Index(nodes_.size()))
    throw UsageError("autodiff: variable does not belong to this tape");
  return v.id;
}

Var Tape::push(Arr val, bool needs, std::function<void(Tape&)> vjp) {
  nodes_.push_back(Node{std::move(val), needs, std::move(vjp)});
  return Var{int32_t(nodes_.size() - 1)};
}

Arr& Tape::gbuf(int32_t id) {
  if (grads_[id].size() == 0) grads_[id] = Arr::Zero(nodes_[id].val.size());
  return grads_[id];
}

Var Tape::constant(Arr v) { return push(std::move(v), false, nullptr); }

Var Tape::param(const std::string& name, const Arr& value) {
  Var v = push(value, true, nullptr);
  params_.emplace_back(name, v.id);
  return v;
}

const Arr& Tape::val(Var v) const { return nodes_[check(v)].val; }

double Tape::scalar(Var v) const {
  const Arr& a = val(v);
  if (a.size() != 1) throw UsageError("autodiff: scalar() on non-scalar node");
  return a[0];
}

bool Tape::has_grad(Var v) const { return grads_[check(v)].size() != 0; }

const Arr& Tape::grad(Var v) const {
  static const Arr empty;
  const Arr& g = grads_[check(v)];
  return g.size() ? g : empty;
}

void Tape::backward(Var loss) {
  const int32_t id = check(loss);
  if (nodes_[id].val.size() != 1)
    throw UsageError("autodiff: backward requires a scalar loss");
  if (backward_done_) throw UsageError("autodiff: one backward pass per tape");
  backward_done_ = true;
  grads_.assign(nodes_.size(), Arr());
  gbuf(id)[0] = 1.0;
  for (int32_t i = id; i >= 0; --i) {
    if (!nodes_[i].needs || grads_[i].size() == 0 || !nodes_[i].vjp) continue;
    nodes_[i].vjp(*this);
  }
}

std::map<std::string, Arr> Tape::param_grads() const {
  std::map<std::string, Arr> out;
  for (const auto& [name, id] : params_) {
    if (!grads_.empty() && grads_[id].size())
      out[name] = grads_[id];
    else
      out[name] = Arr::Zero(nodes_[id].val.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// real primitives

Var Tape::add(Var a, Var b) {
  const int32_t ia = check(a), ib = check(b);
  require(nodes_[ia].val.size() == nodes_[ib].val.size(), "add: size mismatch");
  Arr out = nodes_[ia].val + nodes_[ib].val;
  const bool ng = nodes_[ia].needs || nodes_[ib].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ia, ib, io](Tape& t) {
    const Arr& g = t.grads_[io];
    if (t.nodes_[ia].needs) t.gbuf(ia) += g;
    if (t.nodes_[ib].needs) t.gbuf(ib) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  const int32_t ia = check(a), ib = check(b);
  require(nodes_[ia].val.size() == nodes_[ib].val.size(), "sub: size mismatch");
  Arr out = nodes_[ia].val - nodes_[ib].val;
  const bool ng = nodes_[ia].needs || nodes_[ib].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ia, ib, io](Tape& t) {
    const Arr& g = t.grads_[io];
    if (t.nodes_[ia].needs) t.gbuf(ia) += g;
    if (t.nodes_[ib].needs) t.gbuf(ib) -= g;
  });
}

Var Tape::scale(double c, Var x) {
  const int32_t ix = check(x);
  Arr out = c * nodes_[ix].val;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io, c](Tape& t) {
    if (t.nodes_[ix].needs) t.gbuf(ix) += c * t.grads_[io];
  });
}

Var Tape::scale_var(Var c, Var x) {
  const int32_t ic = check(c), ix = check(x);
  require(nodes_[ic].val.size() == 1, "scale_var: scale must be scalar");
  const double cval = nodes_[ic].val[0];
  Arr out = cval * nodes_[ix].val;
  const bool ng = nodes_[ic].needs || nodes_[ix].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ic, ix, io, cval](Tape& t) {
    const Arr& g = t.grads_[io];
    if (t.nodes_[ic].needs) t.gbuf(ic)[0] += (g * t.nodes_[ix].val).sum();
    if (t.nodes_[ix].needs) t.gbuf(ix) += cval * g;
  });
}

Var Tape::sum(Var x) {
  const int32_t ix = check(x);
  Arr out(1);
  out[0] = nodes_[ix].val.sum();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io](Tape& t) {
    if (t.nodes_[ix].needs) t.gbuf(ix) += t.grads_[io][0];
  });
}

Var Tape::dot(Var a, Var b) {
  const int32_t ia = check(a), ib = check(b);
  require(nodes_[ia].val.size() == nodes_[ib].val.size(), "dot: size mismatch");
  Arr out(1);
  out[0] = (nodes_[ia].val * nodes_[ib].val).sum();
  const bool ng = nodes_[ia].needs || nodes_[ib].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ia, ib, io](Tape& t) {
    const double g = t.grads_[io][0];
    if (t.nodes_[ia].needs) t.gbuf(ia) += g * t.nodes_[ib].val;
    if (t.nodes_[ib].needs) t.gbuf(ib) += g * t.nodes_[ia].val;
  });
}

Var Tape::abs_elem(Var x) {
  const int32_t ix = check(x);
  Arr out = nodes_[ix].val.abs();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io](Tape& t) {
    if (!t.nodes_[ix].needs) return;
    // subgradient 0 at the kink
    t.gbuf(ix) += t.grads_[io] * t.nodes_[ix].val.sign();
  });
}

Var Tape::sin_elem(Var x) {
  const int32_t ix = check(x);
  Arr out = nodes_[ix].val.sin();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io](Tape& t) {
    if (t.nodes_[ix].needs) t.gbuf(ix) += t.grads_[io] * t.nodes_[ix].val.cos();
  });
}

Var Tape::exp_elem(Var x) {
  const int32_t ix = check(x);
  Arr out = nodes_[ix].val.exp();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io](Tape& t) {
    if (t.nodes_[ix].needs) t.gbuf(ix) += t.grads_[io] * t.nodes_[io].val;
  });
}

Var Tape::gelu(Var x) {
  const int32_t ix = check(x);
  const Arr& xv = nodes_[ix].val;
  Arr out(xv.size());
  for (Index i = 0; i < xv.size(); ++i) out[i] = xv[i] * norm_cdf(xv[i]);
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io](Tape& t) {
    if (!t.nodes_[ix].needs) return;
    const Arr& xv = t.nodes_[ix].val;
    Arr& g = t.gbuf(ix);
    const Arr& up = t.grads_[io];
    for (Index i = 0; i < xv.size(); ++i)
      g[i] += up[i] * (norm_cdf(xv[i]) + xv[i] * norm_pdf(xv[i]));
  });
}

Var Tape::softmax(Var x) {
  const int32_t ix = check(x);
  const Arr& xv = nodes_[ix].val;
  Arr out = (xv - xv.maxCoeff()).exp();
  out /= out.sum();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io](Tape& t) {
    if (!t.nodes_[ix].needs) return;
    const Arr& s = t.nodes_[io].val;
    const Arr& g = t.grads_[io];
    const double inner = (g * s).sum();
    t.gbuf(ix) += s * (g - inner);
  });
}

Var Tape::max_reduce(Var x) {
  const int32_t ix = check(x);
  Index arg = 0;
  nodes_[ix].val.maxCoeff(&arg);
  Arr out(1);
  out[0] = nodes_[ix].val[arg];
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io, arg](Tape& t) {
    if (t.nodes_[ix].needs) t.gbuf(ix)[arg] += t.grads_[io][0];
  });
}

Var Tape::div_by_scalar(Var x, Var s) {
  const int32_t ix = check(x), is = check(s);
  require(nodes_[is].val.size() == 1, "div_by_scalar: divisor must be scalar");
  const double sval = nodes_[is].val[0];
  Arr out = (sval == 0.0) ? Arr(Arr::Zero(nodes_[ix].val.size()))
                          : Arr(nodes_[ix].val / sval);
  const bool ng = nodes_[ix].needs || nodes_[is].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ix, is, io, sval](Tape& t) {
    if (sval == 0.0) return;
    const Arr& g = t.grads_[io];
    if (t.nodes_[ix].needs) t.gbuf(ix) += g / sval;
    if (t.nodes_[is].needs) t.gbuf(is)[0] -= (g * t.nodes_[io].val).sum() / sval;
  });
}

Var Tape::slice(Var x, Index offset, Index len) {
  const int32_t ix = check(x);
  require(offset >= 0 && offset + len <= nodes_[ix].val.size(), "slice: out of range");
  Arr out = nodes_[ix].val.segment(offset, len);
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ix].needs, [ix, io, offset, len](Tape& t) {
    if (t.nodes_[ix].needs) t.gbuf(ix).segment(offset, len) += t.grads_[io];
  });
}

Var Tape::concat(Var a, Var b) {
  const int32_t ia = check(a), ib = check(b);
  const Index na = nodes_[ia].val.size(), nb = nodes_[ib].val.size();
  Arr out(na + nb);
  out.head(na) = nodes_[ia].val;
  out.tail(nb) = nodes_[ib].val;
  const bool ng = nodes_[ia].needs || nodes_[ib].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ia, ib, io, na, nb](Tape& t) {
    const Arr& g = t.grads_[io];
    if (t.nodes_[ia].needs) t.gbuf(ia) += g.head(na);
    if (t.nodes_[ib].needs) t.gbuf(ib) += g.tail(nb);
  });
}

Var Tape::detach(Var x) {
  const int32_t ix = check(x);
  return push(nodes_[ix].val, false, nullptr);
}

Var Tape::affine(Var x, Var w, Var b, Index n_out, Index n_in) {
  const int32_t ix = check(x), iw = check(w), ib = check(b);
  require(nodes_[ix].val.size() == n_in && nodes_[iw].val.size() == n_out * n_in &&
              nodes_[ib].val.size() == n_out,
          "affine: shape mismatch");
  MapConstRRM wm(nodes_[iw].val.data(), n_out, n_in);
  Arr out = (wm * nodes_[ix].val.matrix()).array() + nodes_[ib].val;
  const bool ng = nodes_[ix].needs || nodes_[iw].needs || nodes_[ib].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ix, iw, ib, io, n_out, n_in](Tape& t) {
    const Arr& g = t.grads_[io];
    MapConstRRM wm(t.nodes_[iw].val.data(), n_out, n_in);
    if (t.nodes_[ix].needs)
      t.gbuf(ix).matrix() += wm.transpose() * g.matrix();
    if (t.nodes_[iw].needs) {
      MapRRM gw(t.gbuf(iw).data(), n_out, n_in);
      gw.noalias() += g.matrix() * t.nodes_[ix].val.matrix().transpose();
    }
    if (t.nodes_[ib].needs) t.gbuf(ib) += g;
  });
}

Var Tape::conv2d(Var x, Var w, Var b, Index c_in, Index c_out, Index h, Index wd,
                 Index k) {
  const int32_t ix = check(x), iw = check(w), ib = check(b);
  require(k % 2 == 1, "conv2d: kernel must be odd");
  require(nodes_[ix].val.size() == c_in * h * wd, "conv2d: input shape mismatch");
  require(nodes_[iw].val.size() == c_out * c_in * k * k, "conv2d: weight shape mismatch");
  require(nodes_[ib].val.size() == c_out, "conv2d: bias shape mismatch");
  const Index pad = k / 2;
  const Arr& xv = nodes_[ix].val;
  const Arr& wv = nodes_[iw].val;
  Arr out(c_out * h * wd);
  for (Index co = 0; co < c_out; ++co) {
    const double bias = nodes_[ib].val[co];
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < wd; ++c) {
        double acc = bias;
        for (Index ci = 0; ci < c_in; ++ci)
          for (Index kr = 0; kr < k; ++kr) {
            const Index rr = r + kr - pad;
            if (rr < 0 || rr >= h) continue;
            for (Index kc = 0; kc < k; ++kc) {
              const Index cc = c + kc - pad;
              if (cc < 0 || cc >= wd) continue;
              acc += wv[((co * c_in + ci) * k + kr) * k + kc] *
                     xv[(ci * h + rr) * wd + cc];
            }
          }
        out[(co * h + r) * wd + c] = acc;
      }
  }
  const bool ng = nodes_[ix].needs || nodes_[iw].needs || nodes_[ib].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [=](Tape& t) {
    const Arr& g = t.grads_[io];
    const Arr& xv = t.nodes_[ix].val;
    const Arr& wv = t.nodes_[iw].val;
    const bool nx = t.nodes_[ix].needs, nw = t.nodes_[iw].needs,
               nb = t.nodes_[ib].needs;
    Arr* gx = nx ? &t.gbuf(ix) : nullptr;
    Arr* gw = nw ? &t.gbuf(iw) : nullptr;
    Arr* gb = nb ? &t.gbuf(ib) : nullptr;
    for (Index co = 0; co < c_out; ++co)
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < wd; ++c) {
          const double go = g[(co * h + r) * wd + c];
          if (go == 0.0) continue;
          if (nb) (*gb)[co] += go;
          for (Index ci = 0; ci < c_in; ++ci)
            for (Index kr = 0; kr < k; ++kr) {
              const Index rr = r + kr - pad;
              if (rr < 0 || rr >= h) continue;
              for (Index kc = 0; kc < k; ++kc) {
                const Index cc = c + kc - pad;
                if (cc < 0 || cc >= wd) continue;
                const Index wi = ((co * c_in + ci) * k + kr) * k + kc;
                const Index xi = (ci * h + rr) * wd + cc;
                if (nw) (*gw)[wi] += go * xv[xi];
                if (nx) (*gx)[xi] += go * wv[wi];
              }
            }
        }
  });
}

// ---------------------------------------------------------------------------
// complex primitives

Var Tape::cmul(Var a, Var b) {
  const int32_t ia = check(a), ib = check(b);
  require(nodes_[ia].val.size() == nodes_[ib].val.size(), "cmul: size mismatch");
  Arr out(nodes_[ia].val.size());
  cv(out) = cv(nodes_[ia].val) * cv(nodes_[ib].val);
  const bool ng = nodes_[ia].needs || nodes_[ib].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ia, ib, io](Tape& t) {
    const auto g = cv(t.grads_[io]);
    if (t.nodes_[ia].needs)
      cv(t.gbuf(ia)) += g * cv(t.nodes_[ib].val).conjugate();
    if (t.nodes_[ib].needs)
      cv(t.gbuf(ib)) += g * cv(t.nodes_[ia].val).conjugate();
  });
}

Var Tape::cmul_bcast(Var h, Var m, Index rows, Index cols, int axis) {
  const int32_t ih = check(h), im = check(m);
  const Index hd = (axis == 0) ? rows : cols;
  require(nodes_[ih].val.size() == 2 * hd, "cmul_bcast: vector length mismatch");
  require(nodes_[im].val.size() == 2 * rows * cols, "cmul_bcast: matrix size mismatch");
  Arr out(nodes_[im].val.size());
  {
    auto hm = cv(nodes_[ih].val);
    auto mm = cm(nodes_[im].val, rows, cols);
    auto om = cm(out, rows, cols);
    if (axis == 0)
      om = mm.array().colwise() * hm.matrix().array();
    else
      om = mm.array().rowwise() * hm.matrix().transpose().array();
  }
  const bool ng = nodes_[ih].needs || nodes_[im].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ih, im, io, rows, cols, axis](Tape& t) {
    auto g = cm(t.grads_[io], rows, cols);
    auto mm = cm(t.nodes_[im].val, rows, cols);
    auto hm = cv(t.nodes_[ih].val);
    if (t.nodes_[im].needs) {
      auto gm = cm(t.gbuf(im), rows, cols);
      if (axis == 0)
        gm.array() += g.array().colwise() * hm.matrix().conjugate().array();
      else
        gm.array() += g.array().rowwise() * hm.matrix().transpose().conjugate().array();
    }
    if (t.nodes_[ih].needs) {
      auto gh = cv(t.gbuf(ih));
      if (axis == 0)
        gh += (g.array() * mm.array().conjugate()).rowwise().sum();
      else
        gh += (g.array() * mm.array().conjugate()).colwise().sum().transpose();
    }
  });
}

Var Tape::conj(Var z) {
  const int32_t iz = check(z);
  Arr out(nodes_[iz].val.size());
  cv(out) = cv(nodes_[iz].val).conjugate();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[iz].needs, [iz, io](Tape& t) {
    if (t.nodes_[iz].needs) cv(t.gbuf(iz)) += cv(t.grads_[io]).conjugate();
  });
}

Var Tape::ctranspose(Var m, Index rows, Index cols) {
  const int32_t im = check(m);
  require(nodes_[im].val.size() == 2 * rows * cols, "ctranspose: size mismatch");
  Arr out(nodes_[im].val.size());
  cm(out, cols, rows) = cm(nodes_[im].val, rows, cols).transpose();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[im].needs, [im, io, rows, cols](Tape& t) {
    if (t.nodes_[im].needs)
      cm(t.gbuf(im), rows, cols) += cm(t.grads_[io], cols, rows).transpose();
  });
}

Var Tape::contract_first(Var z, std::array<Index, 3> zshape, Var d, Index n) {
  const int32_t iz = check(z), id = check(d);
  const auto [d0, d1, d2] = zshape;
  require(nodes_[iz].val.size() == 2 * d0 * d1 * d2, "contract_first: tensor size");
  require(nodes_[id].val.size() == 2 * d0 * n, "contract_first: dictionary size");
  const Index rest = d1 * d2;
  Arr out(2 * rest * n);
  cm(out, rest, n).noalias() =
      cm(nodes_[iz].val, d0, rest).transpose() * cm(nodes_[id].val, d0, n);
  const bool ng = nodes_[iz].needs || nodes_[id].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [iz, id, io, d0, rest, n](Tape& t) {
    auto g = cm(t.grads_[io], rest, n);
    if (t.nodes_[iz].needs)
      cm(t.gbuf(iz), d0, rest).noalias() +=
          cm(t.nodes_[id].val, d0, n).conjugate() * g.transpose();
    if (t.nodes_[id].needs)
      cm(t.gbuf(id), d0, n).noalias() +=
          cm(t.nodes_[iz].val, d0, rest).conjugate() * g;
  });
}

Var Tape::magnitude(Var z) {
  const int32_t iz = check(z);
  Arr out = cv(nodes_[iz].val).abs();
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[iz].needs, [iz, io](Tape& t) {
    if (!t.nodes_[iz].needs) return;
    auto zm = cv(t.nodes_[iz].val);
    const Arr& mag = t.nodes_[io].val;
    const Arr& g = t.grads_[io];
    auto gz = cv(t.gbuf(iz));
    for (Index i = 0; i < mag.size(); ++i)
      if (mag[i] > 0.0) gz[i] += g[i] / mag[i] * zm[i];
  });
}

Var Tape::mix_cols(Var w_real, Var m, Index rows, Index cols) {
  const int32_t iw = check(w_real), im = check(m);
  require(nodes_[iw].val.size() == cols, "mix_cols: weight length mismatch");
  require(nodes_[im].val.size() == 2 * rows * cols, "mix_cols: matrix size mismatch");
  Arr out(2 * rows);
  cv(out).matrix() = cm(nodes_[im].val, rows, cols) * nodes_[iw].val.matrix().cast<cd>();
  const bool ng = nodes_[iw].needs || nodes_[im].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [iw, im, io, rows, cols](Tape& t) {
    auto g = cv(t.grads_[io]);
    if (t.nodes_[iw].needs)
      t.gbuf(iw).matrix() +=
          (g.matrix().adjoint() * cm(t.nodes_[im].val, rows, cols)).real().transpose();
    if (t.nodes_[im].needs)
      cm(t.gbuf(im), rows, cols).noalias() +=
          g.matrix() * t.nodes_[iw].val.matrix().transpose().cast<cd>();
  });
}

Var Tape::outer3c(Var a, Var b, Var c, Index da, Index db, Index dc) {
  const int32_t ia = check(a), ib = check(b), ic = check(c);
  require(nodes_[ia].val.size() == 2 * da && nodes_[ib].val.size() == 2 * db &&
              nodes_[ic].val.size() == 2 * dc,
          "outer3c: factor length mismatch");
  Arr out(2 * da * db * dc);
  {
    auto av = cv(nodes_[ia].val);
    auto bv = cv(nodes_[ib].val);
    auto cvv = cv(nodes_[ic].val);
    auto ov = cv(out);
    Index p = 0;
    for (Index m = 0; m < da; ++m)
      for (Index i = 0; i < db; ++i) {
        const cd ab = av[m] * bv[i];
        for (Index j = 0; j < dc; ++j) ov[p++] = ab * cvv[j];
      }
  }
  const bool ng = nodes_[ia].needs || nodes_[ib].needs || nodes_[ic].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [ia, ib, ic, io, da, db, dc](Tape& t) {
    auto g = cv(t.grads_[io]);
    auto av = cv(t.nodes_[ia].val);
    auto bv = cv(t.nodes_[ib].val);
    auto cvv = cv(t.nodes_[ic].val);
    const bool na = t.nodes_[ia].needs, nb = t.nodes_[ib].needs, nc = t.nodes_[ic].needs;
    MapC ga = na ? cv(t.gbuf(ia)) : MapC(nullptr, 0);
    MapC gb = nb ? cv(t.gbuf(ib)) : MapC(nullptr, 0);
    MapC gc = nc ? cv(t.gbuf(ic)) : MapC(nullptr, 0);
    Index p = 0;
    for (Index m = 0; m < da; ++m)
      for (Index i = 0; i < db; ++i) {
        const cd ab = av[m] * bv[i];
        const cd cb_a = std::conj(av[m]);
        const cd cb_b = std::conj(bv[i]);
        for (Index j = 0; j < dc; ++j, ++p) {
          const cd gp = g[p];
          if (na) ga[m] += gp * std::conj(bv[i] * cvv[j]);
          if (nb) gb[i] += gp * cb_a * std::conj(cvv[j]);
          if (nc) gc[j] += gp * std::conj(ab);
        }
      }
  });
}

Var Tape::marginal(Var a, std::array<Index, 3> shape, int axis) {
  const int32_t ia = check(a);
  const auto [n0, n1, n2] = shape;
  require(nodes_[ia].val.size() == n0 * n1 * n2, "marginal: size mismatch");
  const Index nd = (axis == 0) ? n0 : (axis == 1) ? n1 : n2;
  Arr out = Arr::Zero(nd);
  {
    const Arr& av = nodes_[ia].val;
    Index p = 0;
    for (Index i = 0; i < n0; ++i)
      for (Index j = 0; j < n1; ++j)
        for (Index k = 0; k < n2; ++k, ++p)
          out[(axis == 0) ? i : (axis == 1) ? j : k] += av[p];
  }
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ia].needs, [ia, io, n0, n1, n2, axis](Tape& t) {
    if (!t.nodes_[ia].needs) return;
    Arr& ga = t.gbuf(ia);
    const Arr& g = t.grads_[io];
    Index p = 0;
    for (Index i = 0; i < n0; ++i)
      for (Index j = 0; j < n1; ++j)
        for (Index k = 0; k < n2; ++k, ++p)
          ga[p] += g[(axis == 0) ? i : (axis == 1) ? j : k];
  });
}

Var Tape::complex_to_channels(Var z, Index k, Index s, Index t_) {
  const int32_t iz = check(z);
  require(nodes_[iz].val.size() == 2 * k * s * t_, "complex_to_channels: size mismatch");
  const Index plane = s * t_;
  Arr out(2 * k * plane);
  const Arr& zv = nodes_[iz].val;
  for (Index a = 0; a < k; ++a)
    for (Index p = 0; p < plane; ++p) {
      out[(2 * a) * plane + p] = zv[(a * plane + p) * 2];
      out[(2 * a + 1) * plane + p] = zv[(a * plane + p) * 2 + 1];
    }
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[iz].needs, [iz, io, k, plane](Tape& t) {
    if (!t.nodes_[iz].needs) return;
    Arr& gz = t.gbuf(iz);
    const Arr& g = t.grads_[io];
    for (Index a = 0; a < k; ++a)
      for (Index p = 0; p < plane; ++p) {
        gz[(a * plane + p) * 2] += g[(2 * a) * plane + p];
        gz[(a * plane + p) * 2 + 1] += g[(2 * a + 1) * plane + p];
      }
  });
}

Var Tape::channels_to_complex(Var img, Index k, Index s, Index t_) {
  const int32_t ii = check(img);
  require(nodes_[ii].val.size() == 2 * k * s * t_, "channels_to_complex: size mismatch");
  const Index plane = s * t_;
  Arr out(2 * k * plane);
  const Arr& iv = nodes_[ii].val;
  for (Index a = 0; a < k; ++a)
    for (Index p = 0; p < plane; ++p) {
      out[(a * plane + p) * 2] = iv[(2 * a) * plane + p];
      out[(a * plane + p) * 2 + 1] = iv[(2 * a + 1) * plane + p];
    }
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[ii].needs, [ii, io, k, plane](Tape& t) {
    if (!t.nodes_[ii].needs) return;
    Arr& gi = t.gbuf(ii);
    const Arr& g = t.grads_[io];
    for (Index a = 0; a < k; ++a)
      for (Index p = 0; p < plane; ++p) {
        gi[(2 * a) * plane + p] += g[(a * plane + p) * 2];
        gi[(2 * a + 1) * plane + p] += g[(a * plane + p) * 2 + 1];
      }
  });
}

Var Tape::cpow(Var w, Var g) {
  const int32_t iw = check(w), ig = check(g);
  require(nodes_[ig].val.size() == 1, "cpow: exponent must be scalar");
  const double gval = nodes_[ig].val[0];
  Arr out(nodes_[iw].val.size());
  {
    auto wv = cv(nodes_[iw].val);
    auto ov = cv(out);
    for (Index i = 0; i < wv.size(); ++i) {
      const double r = std::abs(wv[i]);
      ov[i] = (r == 0.0) ? cd(0, 0)
                         : std::polar(std::pow(r, gval), gval * std::arg(wv[i]));
    }
  }
  const bool ng = nodes_[iw].needs || nodes_[ig].needs;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), ng, [iw, ig, io, gval](Tape& t) {
    auto gr = cv(t.grads_[io]);
    auto wv = cv(t.nodes_[iw].val);
    auto ov = cv(t.nodes_[io].val);
    if (t.nodes_[iw].needs) {
      auto gw = cv(t.gbuf(iw));
      for (Index i = 0; i < wv.size(); ++i)
        if (wv[i] != cd(0, 0))
          gw[i] += gr[i] * std::conj(gval * ov[i] / wv[i]);  // holomorphic branch
    }
    if (t.nodes_[ig].needs) {
      double acc = 0.0;
      for (Index i = 0; i < wv.size(); ++i) {
        const double r = std::abs(wv[i]);
        if (r == 0.0) continue;
        const cd dg = ov[i] * cd(std::log(r), std::arg(wv[i]));
        acc += std::real(std::conj(gr[i]) * dg);
      }
      t.gbuf(ig)[0] += acc;
    }
  });
}

Var Tape::vandermonde_phase(Var u, Index dim) {
  const int32_t iu = check(u);
  const Index n = nodes_[iu].val.size();
  Arr out(2 * dim * n);
  {
    auto om = cm(out, dim, n);
    const Arr& uv = nodes_[iu].val;
    for (Index k = 0; k < dim; ++k)
      for (Index i = 0; i < n; ++i) om(k, i) = std::polar(1.0, double(k + 1) * uv[i]);
  }
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), nodes_[iu].needs, [iu, io, dim, n](Tape& t) {
    if (!t.nodes_[iu].needs) return;
    auto g = cm(t.grads_[io], dim, n);
    auto ov = cm(t.nodes_[io].val, dim, n);
    Arr& gu = t.gbuf(iu);
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index k = 0; k < dim; ++k)
        acc += std::real(std::conj(g(k, i)) * (cd(0, double(k + 1)) * ov(k, i)));
      gu[i] += acc;
    }
  });
}

// ---------------------------------------------------------------------------

Arr& ParamStore::at(const std::string& name) {
  auto it = values.find(name);
  if (it == values.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

const Arr& ParamStore::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::add(const std::string& name, Arr v) {
  if (!values.emplace(name, std::move(v)).second)
    throw UsageError("duplicate parameter: " + name);
}

void AdamState::step(ParamStore& params, const std::map<std::string, Arr>& grads) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, double(t));
  const double bc2 = 1.0 - std::pow(beta2, double(t));
  for (auto& [name, value] : params.values) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Arr& g = git->second;
    require(g.size() == value.size(), "adam: gradient shape mismatch for " + name);
    Arr& mm = m.try_emplace(name, Arr::Zero(value.size())).first->second;
    Arr& vv = v.try_emplace(name, Arr::Zero(value.size())).first->second;
    mm = beta1 * mm + (1.0 - beta1) * g;
    vv = beta2 * vv + (1.0 - beta2) * g.square();
    value -= lr * (mm / bc1) / ((vv / bc2).sqrt() + eps);
  }
}

}  // namespace isac::ad
