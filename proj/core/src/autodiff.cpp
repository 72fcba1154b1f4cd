#include "fontmanifold/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "fontmanifold/error.hpp"

namespace fm::ad {

namespace {

std::atomic<std::uint64_t> next_tape_id{1};

const Tape& tape_of(Var v) {
  if (v.tape == nullptr || !v.tape->owns(v)) {
    throw Error(Errc::Graph, "variable does not belong to a live tape");
  }
  return *v.tape;
}

const Tape& common_tape(std::initializer_list<Var> vars) {
  const Tape* tape = nullptr;
  for (Var v : vars) {
    const Tape& t = tape_of(v);
    if (tape && tape != &t) throw Error(Errc::Graph, "operands recorded on different tapes");
    tape = &t;
  }
  return *tape;
}

// Ops are recorded through a const handle; the tape itself is the only
// mutable owner, so recording goes through this cast.
Tape& mutable_tape(const Tape& tape) { return const_cast<Tape&>(tape); }

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw Error(Errc::Shape, std::string(what) + ": expected shape " + shape_string(expected) +
                                 ", got " + shape_string(t.shape()));
  }
}

}  // namespace

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(std::string name, Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, std::move(name), true});
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  if (!owns(v)) throw Error(Errc::Graph, "variable does not belong to this tape");
  return nodes_[v.index].value;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw Error(Errc::Domain, "non-finite value produced on tape");
  }
  bool needs_grad = false;
  for (std::size_t i : inputs) needs_grad = needs_grad || nodes_.at(i).requires_grad;
  nodes_.push_back(Node{std::move(value), std::move(inputs),
                        needs_grad ? std::move(backward) : BackwardFn{}, {}, needs_grad});
  return Var{this, nodes_.size() - 1};
}

void accumulate(std::vector<Tensor>& grads, std::size_t index, const Tensor& like,
                const std::function<void(Tensor&)>& add) {
  Tensor& g = grads[index];
  if (g.empty()) g = Tensor(like.shape(), 0.0);
  add(g);
}

Gradients backward(const Tape& tape, Var loss) {
  if (!tape.owns(loss)) throw Error(Errc::Graph, "loss was not recorded on this tape");
  const Tensor& loss_value = tape.value(loss);
  if (loss_value.size() != 1) {
    throw Error(Errc::Graph, "loss must be a scalar, got shape " + shape_string(loss_value.shape()));
  }

  std::vector<Tensor> grads(tape.size());
  grads[loss.index] = Tensor(loss_value.shape(), 1.0);

  Gradients result;
  for (std::size_t k = loss.index + 1; k-- > 0;) {
    const auto& node = tape.nodes_[k];
    if (!node.requires_grad || grads[k].empty()) continue;
    if (!node.parameter_name.empty()) {
      auto [it, inserted] = result.try_emplace(node.parameter_name, grads[k]);
      if (!inserted) {
        for (std::size_t i = 0; i < it->second.size(); ++i) it->second[i] += grads[k][i];
      }
      continue;
    }
    if (node.backward) node.backward(tape, grads[k], grads);
    grads[k] = Tensor();
  }
  return result;
}

// -- conv2d -----------------------------------------------------------------

Var conv2d(Var input, Var kernels, Var bias, int stride) {
  const Tape& tape = common_tape({input, kernels, bias});
  const Tensor& x = tape.value(input);
  const Tensor& k = tape.value(kernels);
  const Tensor& b = tape.value(bias);
  if (stride != 1 && stride != 2) throw Error(Errc::Shape, "conv2d: stride must be 1 or 2");
  if (x.rank() != 3) throw Error(Errc::Shape, "conv2d: input must be [C,H,W]");
  if (k.rank() != 4 || k.dim(2) != 3 || k.dim(3) != 3) {
    throw Error(Errc::Shape, "conv2d: kernels must be [C_out,C_in,3,3]");
  }
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = k.dim(0);
  if (k.dim(1) != cin) {
    throw Error(Errc::Shape, "conv2d: kernel expects " + std::to_string(k.dim(1)) +
                                 " input channels, input has " + std::to_string(cin));
  }
  require_shape(b, Shape{cout}, "conv2d bias");

  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t oh = (h + s - 1) / s, ow = (w + s - 1) / s;
  Tensor out(Shape{cout, oh, ow});

  // Output positions whose tap lands inside the input: 0 <= o*s + tap - 1 < n.
  auto range = [s](std::size_t tap, std::size_t n, std::size_t on) {
    const auto pos = [&](std::size_t o) {
      return static_cast<std::ptrdiff_t>(o * s + tap) - 1;
    };
    std::size_t lo = 0;
    while (lo < on && pos(lo) < 0) ++lo;
    std::size_t hi = on;
    while (hi > lo && pos(hi - 1) >= static_cast<std::ptrdiff_t>(n)) --hi;
    return std::pair{lo, hi};
  };

  for (std::size_t co = 0; co < cout; ++co) {
    double* o = out.data() + co * oh * ow;
    std::fill(o, o + oh * ow, b[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* xi = x.data() + ci * h * w;
      const double* kk = k.data() + (co * cin + ci) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const auto [y0, y1] = range(ky, h, oh);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wgt = kk[ky * 3 + kx];
          const auto [x0, x1] = range(kx, w, ow);
          for (std::size_t oy = y0; oy < y1; ++oy) {
            const double* row = xi + (oy * s + ky - 1) * w;
            double* orow = o + oy * ow;
            for (std::size_t ox = x0; ox < x1; ++ox) orow[ox] += wgt * row[ox * s + kx - 1];
          }
        }
      }
    }
  }

  const std::size_t xi_idx = input.index, k_idx = kernels.index, b_idx = bias.index;
  return mutable_tape(tape).record(
      std::move(out), {xi_idx, k_idx, b_idx},
      [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& xv = t.value(xi_idx);
        const Tensor& kv = t.value(k_idx);
        if (t.requires_grad(b_idx)) {
          accumulate(grads, b_idx, t.value(b_idx), [&](Tensor& gb) {
            for (std::size_t co = 0; co < cout; ++co) {
              double acc = 0.0;
              for (std::size_t i = 0; i < oh * ow; ++i) acc += g[co * oh * ow + i];
              gb[co] += acc;
            }
          });
        }
        const bool want_x = t.requires_grad(xi_idx);
        const bool want_k = t.requires_grad(k_idx);
        if (!want_x && !want_k) return;
        if (want_x) accumulate(grads, xi_idx, xv, [](Tensor&) {});
        if (want_k) accumulate(grads, k_idx, kv, [](Tensor&) {});
        for (std::size_t co = 0; co < cout; ++co) {
          const double* go = g.data() + co * oh * ow;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xi = xv.data() + ci * h * w;
            const double* kk = kv.data() + (co * cin + ci) * 9;
            double* gx = want_x ? grads[xi_idx].data() + ci * h * w : nullptr;
            double* gk = want_k ? grads[k_idx].data() + (co * cin + ci) * 9 : nullptr;
            for (std::size_t ky = 0; ky < 3; ++ky) {
              const auto [y0, y1] = range(ky, h, oh);
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const auto [x0, x1] = range(kx, w, ow);
                const double wgt = kk[ky * 3 + kx];
                double kacc = 0.0;
                for (std::size_t oy = y0; oy < y1; ++oy) {
                  const std::size_t in_row = (oy * s + ky - 1) * w;
                  const double* grow = go + oy * ow;
                  for (std::size_t ox = x0; ox < x1; ++ox) {
                    const std::size_t in = in_row + ox * s + kx - 1;
                    if (gx) gx[in] += wgt * grow[ox];
                    kacc += xi[in] * grow[ox];
                  }
                }
                if (gk) gk[ky * 3 + kx] += kacc;
              }
            }
          }
        }
      });
}

// -- dense ------------------------------------------------------------------

Var dense(Var input, Var weights, Var bias) {
  const Tape& tape = common_tape({input, weights, bias});
  const Tensor& x = tape.value(input);
  const Tensor& wt = tape.value(weights);
  const Tensor& b = tape.value(bias);
  if (wt.rank() != 2) throw Error(Errc::Shape, "dense: weights must be [M,N]");
  const std::size_t m = wt.dim(0), n = wt.dim(1);
  if (x.size() != n) {
    throw Error(Errc::Shape, "dense: input has " + std::to_string(x.size()) +
                                 " values, weights expect " + std::to_string(n));
  }
  require_shape(b, Shape{m}, "dense bias");

  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = wt.data() + i * n;
    double acc = b[i];
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }

  const std::size_t xi = input.index, wi = weights.index, bi = bias.index;
  return mutable_tape(tape).record(
      std::move(out), {xi, wi, bi},
      [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& xv = t.value(xi);
        const Tensor& wv = t.value(wi);
        if (t.requires_grad(bi)) {
          accumulate(grads, bi, t.value(bi), [&](Tensor& gb) {
            for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
          });
        }
        if (t.requires_grad(wi)) {
          accumulate(grads, wi, wv, [&](Tensor& gw) {
            for (std::size_t i = 0; i < m; ++i) {
              double* row = gw.data() + i * n;
              for (std::size_t j = 0; j < n; ++j) row[j] += g[i] * xv[j];
            }
          });
        }
        if (t.requires_grad(xi)) {
          accumulate(grads, xi, xv, [&](Tensor& gx) {
            for (std::size_t i = 0; i < m; ++i) {
              const double* row = wv.data() + i * n;
              for (std::size_t j = 0; j < n; ++j) gx[j] += g[i] * row[j];
            }
          });
        }
      });
}

// -- elementwise ------------------------------------------------------------

double stable_sigmoid(double v) noexcept {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Var activation(Var input, Activation kind) {
  const Tape& tape = tape_of(input);
  const Tensor& x = tape.value(input);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = kind == Activation::Relu ? std::max(0.0, x[i]) : stable_sigmoid(x[i]);
  }
  const std::size_t xi = input.index;
  const std::size_t oi = tape.size();
  return mutable_tape(tape).record(
      std::move(out), {xi}, [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& xv = t.value(xi);
        const Tensor& yv = t.value(oi);
        accumulate(grads, xi, xv, [&](Tensor& gx) {
          if (kind == Activation::Relu) {
            for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : 0.0;
          } else {
            for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
          }
        });
      });
}

Var upsample2x(Var input) {
  const Tape& tape = tape_of(input);
  const Tensor& x = tape.value(input);
  if (x.rank() != 3) throw Error(Errc::Shape, "upsample2x: input must be [C,H,W]");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(Shape{c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const double* src = x.data() + (ch * h + y / 2) * w;
      double* dst = out.data() + (ch * 2 * h + y) * 2 * w;
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
    }
  }
  const std::size_t xi = input.index;
  return mutable_tape(tape).record(
      std::move(out), {xi}, [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        accumulate(grads, xi, t.value(xi), [&](Tensor& gx) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t y = 0; y < 2 * h; ++y) {
              double* dst = gx.data() + (ch * h + y / 2) * w;
              const double* src = g.data() + (ch * 2 * h + y) * 2 * w;
              for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
            }
          }
        });
      });
}

Var reshape(Var input, Shape shape) {
  const Tape& tape = tape_of(input);
  Tensor out = tape.value(input).reshaped(std::move(shape));
  const std::size_t xi = input.index;
  return mutable_tape(tape).record(
      std::move(out), {xi}, [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        accumulate(grads, xi, t.value(xi), [&](Tensor& gx) {
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
      });
}

Var add(Var a, Var b) {
  const Tape& tape = common_tape({a, b});
  const Tensor& av = tape.value(a);
  require_shape(tape.value(b), av.shape(), "add");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + tape.value(b)[i];
  const std::size_t ai = a.index, bi = b.index;
  return mutable_tape(tape).record(
      std::move(out), {ai, bi}, [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        for (std::size_t idx : {ai, bi}) {
          if (!t.requires_grad(idx)) continue;
          accumulate(grads, idx, t.value(idx), [&](Tensor& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
          });
        }
      });
}

Var mul(Var a, Var b) {
  const Tape& tape = common_tape({a, b});
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_shape(bv, av.shape(), "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ai = a.index, bi = b.index;
  return mutable_tape(tape).record(
      std::move(out), {ai, bi}, [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        if (t.requires_grad(ai)) {
          accumulate(grads, ai, t.value(ai), [&](Tensor& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * t.value(bi)[i];
          });
        }
        if (t.requires_grad(bi)) {
          accumulate(grads, bi, t.value(bi), [&](Tensor& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * t.value(ai)[i];
          });
        }
      });
}

Var scale(Var input, double factor) {
  const Tape& tape = tape_of(input);
  const Tensor& x = tape.value(input);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  const std::size_t xi = input.index;
  return mutable_tape(tape).record(
      std::move(out), {xi}, [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        accumulate(grads, xi, t.value(xi), [&](Tensor& gx) {
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
        });
      });
}

Var sum(Var input) {
  const Tape& tape = tape_of(input);
  const Tensor& x = tape.value(input);
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const std::size_t xi = input.index;
  return mutable_tape(tape).record(
      Tensor::scalar(acc), {xi}, [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        accumulate(grads, xi, t.value(xi), [&](Tensor& gx) {
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
        });
      });
}

// -- VAE-specific composites --------------------------------------------------

Var reparameterize(Var mu, Var logvar, Var noise) {
  const Tape& tape = common_tape({mu, logvar, noise});
  const Tensor& m = tape.value(mu);
  const Tensor& lv = tape.value(logvar);
  const Tensor& n = tape.value(noise);
  require_shape(lv, m.shape(), "reparameterize logvar");
  require_shape(n, m.shape(), "reparameterize noise");
  Tensor out(m.shape());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] + std::exp(0.5 * lv[i]) * n[i];
  const std::size_t mi = mu.index, li = logvar.index, ni = noise.index;
  return mutable_tape(tape).record(
      std::move(out), {mi, li, ni},
      [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& lvv = t.value(li);
        const Tensor& nv = t.value(ni);
        if (t.requires_grad(mi)) {
          accumulate(grads, mi, t.value(mi), [&](Tensor& gm) {
            for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
          });
        }
        if (t.requires_grad(li)) {
          accumulate(grads, li, lvv, [&](Tensor& gl) {
            for (std::size_t i = 0; i < g.size(); ++i) {
              gl[i] += g[i] * 0.5 * std::exp(0.5 * lvv[i]) * nv[i];
            }
          });
        }
        if (t.requires_grad(ni)) {
          accumulate(grads, ni, nv, [&](Tensor& gn) {
            for (std::size_t i = 0; i < g.size(); ++i) gn[i] += g[i] * std::exp(0.5 * lvv[i]);
          });
        }
      });
}

Var kl_divergence(Var mu, Var logvar) {
  const Tape& tape = common_tape({mu, logvar});
  const Tensor& m = tape.value(mu);
  const Tensor& lv = tape.value(logvar);
  require_shape(lv, m.shape(), "kl_divergence logvar");
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    acc += -0.5 * (1.0 + lv[i] - m[i] * m[i] - std::exp(lv[i]));
  }
  const std::size_t mi = mu.index, li = logvar.index;
  return mutable_tape(tape).record(
      Tensor::scalar(acc), {mi, li},
      [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& mv = t.value(mi);
        const Tensor& lvv = t.value(li);
        if (t.requires_grad(mi)) {
          accumulate(grads, mi, mv, [&](Tensor& gm) {
            for (std::size_t i = 0; i < mv.size(); ++i) gm[i] += g[0] * mv[i];
          });
        }
        if (t.requires_grad(li)) {
          accumulate(grads, li, lvv, [&](Tensor& gl) {
            for (std::size_t i = 0; i < lvv.size(); ++i) {
              gl[i] += g[0] * 0.5 * (std::exp(lvv[i]) - 1.0);
            }
          });
        }
      });
}

Var bce_loss(Var prediction, Var target) {
  const Tape& tape = common_tape({prediction, target});
  const Tensor& p = tape.value(prediction);
  const Tensor& tv = tape.value(target);
  if (p.size() != tv.size()) throw Error(Errc::Shape, "bce_loss: prediction/target size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    acc -= tv[i] * std::log(q) + (1.0 - tv[i]) * std::log(1.0 - q);
  }
  const std::size_t pi = prediction.index, ti = target.index;
  return mutable_tape(tape).record(
      Tensor::scalar(acc), {pi, ti},
      [=](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        if (!t.requires_grad(pi)) return;
        const Tensor& pv = t.value(pi);
        const Tensor& target_v = t.value(ti);
        accumulate(grads, pi, pv, [&](Tensor& gp) {
          for (std::size_t i = 0; i < pv.size(); ++i) {
            const double q = pv[i];
            if (q < kBceClamp || q > 1.0 - kBceClamp) continue;
            gp[i] += g[0] * (-target_v[i] / q + (1.0 - target_v[i]) / (1.0 - q));
          }
        });
      });
}

Tensor gaussian_sample(Rng& rng, std::size_t n) {
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.normal();
  return out;
}

}  // namespace fm::ad
