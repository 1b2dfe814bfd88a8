#include "diffpaint/unet.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>

namespace diffpaint {

struct TensorD {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  TensorD() = default;
  TensorD(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

  std::size_t size() const { return v.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  double* plane(int ci) { return v.data() + static_cast<std::size_t>(ci) * plane_size(); }
  const double* plane(int ci) const {
    return v.data() + static_cast<std::size_t>(ci) * plane_size();
  }
};

namespace {

constexpr double kNormEps = 1e-5;

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

int groups_for(int channels) {
  for (int g : {8, 4, 2}) {
    if (channels % g == 0) return g;
  }
  return 1;
}

TensorD from_image(const ImageTensor& x) {
  TensorD out(x.channels(), x.height(), x.width());
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = x[i];
  return out;
}

ImageTensor to_image(const TensorD& x) {
  ImageTensor out(x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x.v[i]);
  return out;
}

// 3x3 convolution, stride 1, zero padding 1, expressed as nine shifted
// accumulations per (out, in) channel pair.
void conv3_forward(const TensorD& in, const Parameter& w, const Parameter& b,
                   TensorD& out) {
  const int h = in.h, wd = in.w;
  for (int co = 0; co < out.c; ++co) {
    double* op = out.plane(co);
    std::fill(op, op + out.plane_size(), b.value[co]);
    for (int ci = 0; ci < in.c; ++ci) {
      const double* ip = in.plane(ci);
      const double* wp = &w.value[(static_cast<std::size_t>(co) * in.c + ci) * 9];
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
          const double wv = wp[ky * 3 + kx];
          for (int y = y0; y < y1; ++y) {
            double* orow = op + static_cast<std::size_t>(y) * wd;
            const double* irow = ip + static_cast<std::size_t>(y + dy) * wd;
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x + dx];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients; writes input gradient when din != nullptr.
void conv3_backward(const TensorD& in, Parameter& w, Parameter& b,
                    const TensorD& dout, TensorD* din) {
  const int h = in.h, wd = in.w;
  for (int co = 0; co < dout.c; ++co) {
    const double* dop = dout.plane(co);
    b.grad[co] += std::accumulate(dop, dop + dout.plane_size(), 0.0);
    for (int ci = 0; ci < in.c; ++ci) {
      const double* ip = in.plane(ci);
      double* dip = din ? din->plane(ci) : nullptr;
      const std::size_t wbase = (static_cast<std::size_t>(co) * in.c + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
          const double wv = w.value[wbase + ky * 3 + kx];
          double wacc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* dorow = dop + static_cast<std::size_t>(y) * wd;
            const double* irow = ip + static_cast<std::size_t>(y + dy) * wd;
            if (dip) {
              double* dirow = dip + static_cast<std::size_t>(y + dy) * wd;
              for (int x = x0; x < x1; ++x) {
                const double d = dorow[x];
                wacc += d * irow[x + dx];
                dirow[x + dx] += wv * d;
              }
            } else {
              for (int x = x0; x < x1; ++x) wacc += dorow[x] * irow[x + dx];
            }
          }
          w.grad[wbase + ky * 3 + kx] += wacc;
        }
      }
    }
  }
}

TensorD avgpool2(const TensorD& in) {
  TensorD out(in.c, in.h / 2, in.w / 2);
  for (int ci = 0; ci < in.c; ++ci) {
    const double* ip = in.plane(ci);
    double* op = out.plane(ci);
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        const std::size_t r0 = static_cast<std::size_t>(2 * y) * in.w + 2 * x;
        const std::size_t r1 = r0 + in.w;
        op[static_cast<std::size_t>(y) * out.w + x] =
            0.25 * (ip[r0] + ip[r0 + 1] + ip[r1] + ip[r1 + 1]);
      }
    }
  }
  return out;
}

TensorD avgpool2_backward(const TensorD& dout, int in_h, int in_w) {
  TensorD din(dout.c, in_h, in_w);
  for (int ci = 0; ci < dout.c; ++ci) {
    const double* dop = dout.plane(ci);
    double* dip = din.plane(ci);
    for (int y = 0; y < dout.h; ++y) {
      for (int x = 0; x < dout.w; ++x) {
        const double g = 0.25 * dop[static_cast<std::size_t>(y) * dout.w + x];
        const std::size_t r0 = static_cast<std::size_t>(2 * y) * in_w + 2 * x;
        const std::size_t r1 = r0 + in_w;
        dip[r0] = g;
        dip[r0 + 1] = g;
        dip[r1] = g;
        dip[r1 + 1] = g;
      }
    }
  }
  return din;
}

TensorD upsample2(const TensorD& in) {
  TensorD out(in.c, in.h * 2, in.w * 2);
  for (int ci = 0; ci < in.c; ++ci) {
    const double* ip = in.plane(ci);
    double* op = out.plane(ci);
    for (int y = 0; y < out.h; ++y) {
      const double* irow = ip + static_cast<std::size_t>(y / 2) * in.w;
      double* orow = op + static_cast<std::size_t>(y) * out.w;
      for (int x = 0; x < out.w; ++x) orow[x] = irow[x / 2];
    }
  }
  return out;
}

TensorD upsample2_backward(const TensorD& dout) {
  TensorD din(dout.c, dout.h / 2, dout.w / 2);
  for (int ci = 0; ci < dout.c; ++ci) {
    const double* dop = dout.plane(ci);
    double* dip = din.plane(ci);
    for (int y = 0; y < dout.h; ++y) {
      const double* dorow = dop + static_cast<std::size_t>(y) * dout.w;
      double* dirow = dip + static_cast<std::size_t>(y / 2) * din.w;
      for (int x = 0; x < dout.w; ++x) dirow[x / 2] += dorow[x];
    }
  }
  return din;
}

TensorD concat_channels(const TensorD& a, const TensorD& b) {
  TensorD out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.size());
  return out;
}

std::vector<double> linear_forward(const Parameter& w, const Parameter& b,
                                   const std::vector<double>& x) {
  const std::size_t out_n = b.value.size();
  const std::size_t in_n = x.size();
  std::vector<double> out(out_n);
  for (std::size_t o = 0; o < out_n; ++o) {
    double acc = b.value[o];
    const double* wrow = &w.value[o * in_n];
    for (std::size_t i = 0; i < in_n; ++i) acc += wrow[i] * x[i];
    out[o] = acc;
  }
  return out;
}

void linear_backward(Parameter& w, Parameter& b, const std::vector<double>& x,
                     const std::vector<double>& dout, std::vector<double>* dx) {
  const std::size_t out_n = dout.size();
  const std::size_t in_n = x.size();
  if (dx) std::fill(dx->begin(), dx->end(), 0.0);
  for (std::size_t o = 0; o < out_n; ++o) {
    const double d = dout[o];
    b.grad[o] += d;
    double* wgrow = &w.grad[o * in_n];
    const double* wrow = &w.value[o * in_n];
    for (std::size_t i = 0; i < in_n; ++i) {
      wgrow[i] += d * x[i];
      if (dx) (*dx)[i] += wrow[i] * d;
    }
  }
}

// Per-group mean/variance over (channels-in-group, H, W); biased variance.
void groupnorm_forward(const TensorD& x, const Parameter& gamma,
                       const Parameter& beta, int groups, TensorD& xhat,
                       std::vector<double>& inv_std, TensorD& out) {
  const int gs = x.c / groups;
  const std::size_t n = static_cast<std::size_t>(gs) * x.plane_size();
  xhat = TensorD(x.c, x.h, x.w);
  out = TensorD(x.c, x.h, x.w);
  inv_std.assign(groups, 0.0);
  for (int g = 0; g < groups; ++g) {
    const double* xp = x.plane(g * gs);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += xp[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = xp[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    inv_std[g] = inv;
    double* xhp = xhat.plane(g * gs);
    for (std::size_t i = 0; i < n; ++i) xhp[i] = (xp[i] - mean) * inv;
    for (int cc = 0; cc < gs; ++cc) {
      const int ch = g * gs + cc;
      const double gm = gamma.value[ch], bt = beta.value[ch];
      const double* xh = xhat.plane(ch);
      double* op = out.plane(ch);
      for (std::size_t i = 0; i < x.plane_size(); ++i) op[i] = gm * xh[i] + bt;
    }
  }
}

TensorD groupnorm_backward(const TensorD& dout, const TensorD& xhat,
                           const std::vector<double>& inv_std, Parameter& gamma,
                           Parameter& beta, int groups) {
  const int gs = xhat.c / groups;
  const std::size_t plane = xhat.plane_size();
  const std::size_t n = static_cast<std::size_t>(gs) * plane;
  TensorD dx(xhat.c, xhat.h, xhat.w);
  for (int g = 0; g < groups; ++g) {
    // dxhat plus its group means drive the input gradient
    double m1 = 0.0, m2 = 0.0;
    for (int cc = 0; cc < gs; ++cc) {
      const int ch = g * gs + cc;
      const double gm = gamma.value[ch];
      const double* dop = dout.plane(ch);
      const double* xh = xhat.plane(ch);
      double dg = 0.0, db = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        dg += dop[i] * xh[i];
        db += dop[i];
        const double dxh = dop[i] * gm;
        m1 += dxh;
        m2 += dxh * xh[i];
      }
      gamma.grad[ch] += dg;
      beta.grad[ch] += db;
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    const double inv = inv_std[g];
    for (int cc = 0; cc < gs; ++cc) {
      const int ch = g * gs + cc;
      const double gm = gamma.value[ch];
      const double* dop = dout.plane(ch);
      const double* xh = xhat.plane(ch);
      double* dxp = dx.plane(ch);
      for (std::size_t i = 0; i < plane; ++i) {
        dxp[i] = inv * (dop[i] * gm - m1 - xh[i] * m2);
      }
    }
  }
  return dx;
}

std::vector<double> sinusoid_embedding(int t, int dim) {
  const int half = dim / 2;
  std::vector<double> out(dim);
  for (int i = 0; i < half; ++i) {
    const double freq =
        half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
  return out;
}

}  // namespace

struct UNetDenoiser::BlockCache {
  TensorD in, h2, h3, h4, xhat, h5, out;
  std::vector<double> inv_std;
};

struct UNetDenoiser::Workspace {
  TensorD input;
  std::vector<double> emb0, e1, e2, emb;
  TensorD stem_out;
  std::vector<BlockCache> enc;
  std::vector<TensorD> pooled;
  BlockCache mid;
  std::vector<BlockCache> dec;
  TensorD pred;
};

int UNetDenoiser::add_param(std::string name, std::vector<int> shape) {
  std::size_t numel = 1;
  for (int d : shape) numel *= static_cast<std::size_t>(d);
  params_.push_back(Parameter{std::move(name), std::move(shape),
                              std::vector<double>(numel, 0.0),
                              std::vector<double>(numel, 0.0)});
  return static_cast<int>(params_.size()) - 1;
}

UNetDenoiser::Block UNetDenoiser::add_block(const std::string& name, int cin,
                                            int cout) {
  Block b;
  b.cin = cin;
  b.cout = cout;
  b.conv1_w = add_param(name + ".conv1.w", {cout, cin, 3, 3});
  b.conv1_b = add_param(name + ".conv1.b", {cout});
  b.tproj_w = add_param(name + ".time_proj.w", {cout, emb_dim_});
  b.tproj_b = add_param(name + ".time_proj.b", {cout});
  b.conv2_w = add_param(name + ".conv2.w", {cout, cout, 3, 3});
  b.conv2_b = add_param(name + ".conv2.b", {cout});
  b.gamma = add_param(name + ".norm.gamma", {cout});
  b.beta = add_param(name + ".norm.beta", {cout});
  return b;
}

UNetDenoiser::UNetDenoiser(DenoiserSpec spec, RngStream& rng)
    : spec_(std::move(spec)) {
  spec_.validate();
  emb_dim_ = 2 * spec_.base_channels;

  std::vector<int> ch(spec_.depth);
  for (int i = 0; i < spec_.depth; ++i) {
    ch[i] = spec_.base_channels * spec_.channel_multipliers[i];
  }

  stem_w_ = add_param("stem.w", {ch[0], spec_.in_channels, 3, 3});
  stem_b_ = add_param("stem.b", {ch[0]});
  tmlp_w1_ = add_param("time_mlp.fc1.w", {emb_dim_, emb_dim_});
  tmlp_b1_ = add_param("time_mlp.fc1.b", {emb_dim_});
  tmlp_w2_ = add_param("time_mlp.fc2.w", {emb_dim_, emb_dim_});
  tmlp_b2_ = add_param("time_mlp.fc2.b", {emb_dim_});

  enc_.reserve(spec_.depth);
  for (int i = 0; i < spec_.depth; ++i) {
    const int cin = i == 0 ? ch[0] : ch[i - 1];
    enc_.push_back(add_block("enc" + std::to_string(i), cin, ch[i]));
  }
  mid_ = add_block("mid", ch[spec_.depth - 1], ch[spec_.depth - 1]);
  dec_.reserve(spec_.depth - 1);
  for (int i = 0; i + 1 < spec_.depth; ++i) {
    dec_.push_back(add_block("dec" + std::to_string(i), ch[i + 1] + ch[i], ch[i]));
  }
  head_w_ = add_param("head.w", {spec_.data_channels(), ch[0], 3, 3});
  head_b_ = add_param("head.b", {spec_.data_channels()});

  init_values(rng);
}

void UNetDenoiser::init_values(RngStream& rng) {
  for (int idx = 0; idx < static_cast<int>(params_.size()); ++idx) {
    Parameter& p = params_[idx];
    if (idx == head_w_ || idx == head_b_) continue;  // predicts zero at init
    if (p.shape.size() == 4) {
      const double fan_in =
          static_cast<double>(p.shape[1]) * p.shape[2] * p.shape[3];
      const double scale = std::sqrt(2.0 / fan_in);
      for (auto& v : p.value) v = scale * rng.normal();
    } else if (p.shape.size() == 2) {
      const double scale = std::sqrt(1.0 / p.shape[1]);
      for (auto& v : p.value) v = scale * rng.normal();
    } else if (p.name.size() >= 5 &&
               p.name.compare(p.name.size() - 5, 5, "gamma") == 0) {
      std::fill(p.value.begin(), p.value.end(), 1.0);
    }
    // biases and beta stay zero
  }
}

void UNetDenoiser::block_forward(const Block& blk, const TensorD& in,
                                 const std::vector<double>& emb,
                                 BlockCache& c) const {
  c.in = in;
  TensorD h1(blk.cout, in.h, in.w);
  conv3_forward(in, params_[blk.conv1_w], params_[blk.conv1_b], h1);
  const std::vector<double> tvec =
      linear_forward(params_[blk.tproj_w], params_[blk.tproj_b], emb);
  for (int ch = 0; ch < blk.cout; ++ch) {
    double* p = h1.plane(ch);
    for (std::size_t i = 0; i < h1.plane_size(); ++i) p[i] += tvec[ch];
  }
  c.h2 = std::move(h1);
  c.h3 = TensorD(blk.cout, in.h, in.w);
  for (std::size_t i = 0; i < c.h2.size(); ++i) c.h3.v[i] = silu(c.h2.v[i]);
  c.h4 = TensorD(blk.cout, in.h, in.w);
  conv3_forward(c.h3, params_[blk.conv2_w], params_[blk.conv2_b], c.h4);
  groupnorm_forward(c.h4, params_[blk.gamma], params_[blk.beta],
                    groups_for(blk.cout), c.xhat, c.inv_std, c.h5);
  c.out = TensorD(blk.cout, in.h, in.w);
  for (std::size_t i = 0; i < c.h5.size(); ++i) c.out.v[i] = silu(c.h5.v[i]);
}

TensorD UNetDenoiser::block_backward(const Block& blk, const BlockCache& c,
                                     TensorD dout, const std::vector<double>& emb,
                                     std::vector<double>& demb) {
  for (std::size_t i = 0; i < dout.size(); ++i) dout.v[i] *= silu_grad(c.h5.v[i]);
  const TensorD dh4 =
      groupnorm_backward(dout, c.xhat, c.inv_std, params_[blk.gamma],
                         params_[blk.beta], groups_for(blk.cout));
  TensorD dh3(blk.cout, c.in.h, c.in.w);
  conv3_backward(c.h3, params_[blk.conv2_w], params_[blk.conv2_b], dh4, &dh3);
  for (std::size_t i = 0; i < dh3.size(); ++i) dh3.v[i] *= silu_grad(c.h2.v[i]);

  std::vector<double> dtvec(blk.cout, 0.0);
  for (int ch = 0; ch < blk.cout; ++ch) {
    const double* p = dh3.plane(ch);
    double acc = 0.0;
    for (std::size_t i = 0; i < dh3.plane_size(); ++i) acc += p[i];
    dtvec[ch] = acc;
  }
  std::vector<double> demb_local(emb.size(), 0.0);
  linear_backward(params_[blk.tproj_w], params_[blk.tproj_b], emb, dtvec,
                  &demb_local);
  for (std::size_t i = 0; i < demb.size(); ++i) demb[i] += demb_local[i];

  TensorD din(blk.cin, c.in.h, c.in.w);
  conv3_backward(c.in, params_[blk.conv1_w], params_[blk.conv1_b], dh3, &din);
  return din;
}

void UNetDenoiser::run_forward(const ImageTensor& input, int t,
                               Workspace& ws) const {
  if (input.channels() != spec_.in_channels) {
    throw ShapeError("denoiser expects " + std::to_string(spec_.in_channels) +
                     " input channels, got " + std::to_string(input.channels()));
  }
  const int div = spec_.spatial_divisor();
  if (input.height() % div != 0 || input.width() % div != 0) {
    throw ShapeError("denoiser input " + std::to_string(input.height()) + "x" +
                     std::to_string(input.width()) +
                     " must be divisible by " + std::to_string(div));
  }
  if (t < 1) throw DataError("denoiser timestep must be >= 1");

  const int d = spec_.depth;
  ws.input = from_image(input);
  ws.emb0 = sinusoid_embedding(t, emb_dim_);
  ws.e1 = linear_forward(params_[tmlp_w1_], params_[tmlp_b1_], ws.emb0);
  ws.e2.resize(ws.e1.size());
  for (std::size_t i = 0; i < ws.e1.size(); ++i) ws.e2[i] = silu(ws.e1[i]);
  ws.emb = linear_forward(params_[tmlp_w2_], params_[tmlp_b2_], ws.e2);

  ws.stem_out = TensorD(enc_[0].cin, input.height(), input.width());
  conv3_forward(ws.input, params_[stem_w_], params_[stem_b_], ws.stem_out);

  ws.enc.resize(d);
  ws.pooled.resize(d - 1);
  const TensorD* cur = &ws.stem_out;
  for (int i = 0; i < d; ++i) {
    block_forward(enc_[i], *cur, ws.emb, ws.enc[i]);
    if (i + 1 < d) {
      ws.pooled[i] = avgpool2(ws.enc[i].out);
      cur = &ws.pooled[i];
    }
  }

  block_forward(mid_, ws.enc[d - 1].out, ws.emb, ws.mid);

  ws.dec.resize(d - 1);
  const TensorD* up_src = &ws.mid.out;
  for (int i = d - 2; i >= 0; --i) {
    const TensorD up = upsample2(*up_src);
    const TensorD cat = concat_channels(up, ws.enc[i].out);
    block_forward(dec_[i], cat, ws.emb, ws.dec[i]);
    up_src = &ws.dec[i].out;
  }

  ws.pred = TensorD(spec_.data_channels(), input.height(), input.width());
  conv3_forward(*up_src, params_[head_w_], params_[head_b_], ws.pred);
}

ImageTensor UNetDenoiser::forward(const ImageTensor& input, int t) const {
  Workspace ws;
  run_forward(input, t, ws);
  return to_image(ws.pred);
}

ImageTensor UNetDenoiser::predict_epsilon(const ImageTensor& x_t, int t) const {
  if (conditional()) {
    throw VariantMismatchError("denoiser is conditional and requires (x_known, mask)");
  }
  return forward(x_t, t);
}

ImageTensor UNetDenoiser::predict_epsilon(const ImageTensor& x_t, int t,
                                          const ImageTensor& x_known,
                                          const Mask& mask) const {
  if (!conditional()) {
    throw VariantMismatchError("unconditional denoiser rejects a supplied condition");
  }
  return forward(concat_condition(x_t, x_known, mask), t);
}

double UNetDenoiser::accumulate_gradients(const ImageTensor& input, int t,
                                          const ImageTensor& eps_target) {
  if (eps_target.channels() != spec_.data_channels() ||
      eps_target.height() != input.height() ||
      eps_target.width() != input.width()) {
    throw ShapeError("gradient target shape does not match the prediction");
  }

  Workspace ws;
  run_forward(input, t, ws);
  const int d = spec_.depth;

  const std::size_t n = ws.pred.size();
  TensorD dpred(ws.pred.c, ws.pred.h, ws.pred.w);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = ws.pred.v[i] - eps_target[i];
    loss += diff * diff;
    dpred.v[i] = 2.0 * diff / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);

  const TensorD& head_in = d > 1 ? ws.dec[0].out : ws.mid.out;
  TensorD dcur(head_in.c, head_in.h, head_in.w);
  conv3_backward(head_in, params_[head_w_], params_[head_b_], dpred, &dcur);

  std::vector<double> demb(emb_dim_, 0.0);
  std::vector<TensorD> dskip(d > 0 ? d - 1 : 0);
  for (int i = 0; i + 1 < d; ++i) {
    TensorD dcat = block_backward(dec_[i], ws.dec[i], std::move(dcur), ws.emb, demb);
    const int skip_c = enc_[i].cout;
    const int up_c = dec_[i].cin - skip_c;
    TensorD dup(up_c, dcat.h, dcat.w);
    std::copy(dcat.v.begin(), dcat.v.begin() + dup.size(), dup.v.begin());
    dskip[i] = TensorD(skip_c, dcat.h, dcat.w);
    std::copy(dcat.v.begin() + dup.size(), dcat.v.end(), dskip[i].v.begin());
    dcur = upsample2_backward(dup);
  }

  TensorD g = block_backward(mid_, ws.mid, std::move(dcur), ws.emb, demb);
  for (int i = d - 1; i >= 0; --i) {
    if (i + 1 < d) {
      for (std::size_t k = 0; k < g.size(); ++k) g.v[k] += dskip[i].v[k];
    }
    TensorD din = block_backward(enc_[i], ws.enc[i], std::move(g), ws.emb, demb);
    if (i > 0) {
      g = avgpool2_backward(din, ws.enc[i - 1].out.h, ws.enc[i - 1].out.w);
    } else {
      conv3_backward(ws.input, params_[stem_w_], params_[stem_b_], din, nullptr);
    }
  }

  std::vector<double> de2(emb_dim_, 0.0);
  linear_backward(params_[tmlp_w2_], params_[tmlp_b2_], ws.e2, demb, &de2);
  for (std::size_t i = 0; i < de2.size(); ++i) de2[i] *= silu_grad(ws.e1[i]);
  linear_backward(params_[tmlp_w1_], params_[tmlp_b1_], ws.emb0, de2, nullptr);

  return loss;
}

void UNetDenoiser::zero_gradients() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::size_t UNetDenoiser::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::unique_ptr<UNetDenoiser> make_trainable_denoiser(const DenoiserSpec& spec,
                                                      RngStream& rng) {
  return std::make_unique<UNetDenoiser>(spec, rng);
}

}  // namespace diffpaint
