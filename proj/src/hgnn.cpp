#include "tsfract/hgnn.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "tsfract/rng.hpp"

namespace tsfract {

namespace {

constexpr std::size_t kChunkSize = 16;  // gradient accumulation granularity

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& a) {
  return 1.0 / (1.0 + (-a).exp());
}

}  // namespace

void HgnnConfig::validate() const {
  if (fusion_dim < 2 || fusion_dim % 2 != 0)
    throw InvalidInput("fusion_dim must be an even integer >= 2");
  if (kernel_size < 1) throw InvalidInput("kernel_size must be at least 1");
  if (kernel_size > fusion_dim)
    throw InvalidInput("kernel_size exceeds the fused feature width");
  if (num_classes < 2) throw InvalidInput("num_classes must be at least 2");
}

HgnnParams HgnnParams::zeros(const HgnnConfig& config) {
  config.validate();
  const int h = config.hidden_dim();
  const int d_f = config.fusion_dim;
  HgnnParams p;
  for (auto& layer : p.lstm)
    for (LstmDirParams* dir : {&layer.fwd, &layer.bwd})
      for (int g = 0; g < 4; ++g) {
        dir->w[g] = Eigen::MatrixXd::Zero(h, 1);
        dir->u[g] = Eigen::MatrixXd::Zero(h, h);
        dir->b[g] = Eigen::VectorXd::Zero(h);
      }
  for (auto& conv : p.conv) {
    conv.kernels = Eigen::MatrixXd::Zero(d_f, config.kernel_size);
    conv.bias = Eigen::VectorXd::Zero(d_f);
  }
  for (auto& fusion : p.fusion) {
    fusion.w_ctx = Eigen::MatrixXd::Zero(d_f, d_f);
    fusion.b_ctx = Eigen::VectorXd::Zero(d_f);
    fusion.w_loc = Eigen::MatrixXd::Zero(d_f, d_f);
    fusion.b_loc = Eigen::VectorXd::Zero(d_f);
  }
  p.fc_w = Eigen::MatrixXd::Zero(config.num_classes, 2 * d_f);
  p.fc_b = Eigen::VectorXd::Zero(config.num_classes);
  return p;
}

HgnnParams HgnnParams::init(const HgnnConfig& config) {
  HgnnParams p = zeros(config);
  Rng rng(config.seed);
  const auto fill = [&rng](double* data, std::size_t n, double bound) {
    for (std::size_t i = 0; i < n; ++i) data[i] = rng.next_symmetric(bound);
  };
  const double h_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim()));
  const double d_bound = 1.0 / std::sqrt(static_cast<double>(config.kernel_size));
  const double f_bound = 1.0 / std::sqrt(static_cast<double>(config.fusion_dim));
  const double fc_bound = 1.0 / std::sqrt(2.0 * config.fusion_dim);
  for (auto& layer : p.lstm)
    for (LstmDirParams* dir : {&layer.fwd, &layer.bwd})
      for (int g = 0; g < 4; ++g) {
        fill(dir->w[g].data(), dir->w[g].size(), 1.0);  // scalar input, fan_in 1
        fill(dir->u[g].data(), dir->u[g].size(), h_bound);
        fill(dir->b[g].data(), dir->b[g].size(), h_bound);
      }
  for (auto& conv : p.conv) {
    fill(conv.kernels.data(), conv.kernels.size(), d_bound);
    fill(conv.bias.data(), conv.bias.size(), d_bound);
  }
  for (auto& fusion : p.fusion) {
    fill(fusion.w_ctx.data(), fusion.w_ctx.size(), f_bound);
    fill(fusion.b_ctx.data(), fusion.b_ctx.size(), f_bound);
    fill(fusion.w_loc.data(), fusion.w_loc.size(), f_bound);
    fill(fusion.b_loc.data(), fusion.b_loc.size(), f_bound);
  }
  fill(p.fc_w.data(), p.fc_w.size(), fc_bound);
  fill(p.fc_b.data(), p.fc_b.size(), fc_bound);
  return p;
}

namespace {

template <typename Params, typename Ptr>
std::vector<std::pair<Ptr, std::size_t>> collect_blocks(Params& p) {
  std::vector<std::pair<Ptr, std::size_t>> out;
  const auto add = [&out](auto& m) {
    out.emplace_back(m.data(), static_cast<std::size_t>(m.size()));
  };
  for (auto& layer : p.lstm)
    for (auto* dir : {&layer.fwd, &layer.bwd})
      for (int g = 0; g < 4; ++g) {
        add(dir->w[g]);
        add(dir->u[g]);
        add(dir->b[g]);
      }
  for (auto& conv : p.conv) {
    add(conv.kernels);
    add(conv.bias);
  }
  for (auto& fusion : p.fusion) {
    add(fusion.w_ctx);
    add(fusion.b_ctx);
    add(fusion.w_loc);
    add(fusion.b_loc);
  }
  add(p.fc_w);
  add(p.fc_b);
  return out;
}

}  // namespace

std::vector<std::pair<double*, std::size_t>> HgnnParams::blocks() {
  return collect_blocks<HgnnParams, double*>(*this);
}

std::vector<std::pair<const double*, std::size_t>> HgnnParams::blocks() const {
  return collect_blocks<const HgnnParams, const double*>(*this);
}

std::size_t HgnnParams::param_count() const {
  std::size_t n = 0;
  for (const auto& [ptr, size] : blocks()) n += size;
  return n;
}

void HgnnParams::set_zero() {
  for (auto& [ptr, size] : blocks()) std::fill(ptr, ptr + size, 0.0);
}

void HgnnParams::axpy(double scale, const HgnnParams& other) {
  const auto mine = blocks();
  const auto theirs = other.blocks();
  if (mine.size() != theirs.size()) throw InvalidInput("parameter shapes differ");
  for (std::size_t b = 0; b < mine.size(); ++b) {
    if (mine[b].second != theirs[b].second)
      throw InvalidInput("parameter shapes differ");
    for (std::size_t i = 0; i < mine[b].second; ++i)
      mine[b].first[i] += scale * theirs[b].first[i];
  }
}

double HgnnParams::get_flat(std::size_t index) const {
  for (const auto& [ptr, size] : blocks()) {
    if (index < size) return ptr[index];
    index -= size;
  }
  throw InvalidInput("flat parameter index out of range");
}

void HgnnParams::set_flat(std::size_t index, double value) {
  for (auto& [ptr, size] : blocks()) {
    if (index < size) {
      ptr[index] = value;
      return;
    }
    index -= size;
  }
  throw InvalidInput("flat parameter index out of range");
}

std::vector<double> flatten(const HgnnParams& params) {
  std::vector<double> flat;
  flat.reserve(params.param_count());
  for (const auto& [ptr, size] : params.blocks())
    flat.insert(flat.end(), ptr, ptr + size);
  return flat;
}

HgnnParams unflatten(const HgnnConfig& config, std::span<const double> flat) {
  HgnnParams p = HgnnParams::zeros(config);
  if (flat.size() != p.param_count())
    throw ConfigError("checkpoint parameter count does not match the config");
  std::size_t cursor = 0;
  for (auto& [ptr, size] : p.blocks()) {
    std::copy(flat.begin() + cursor, flat.begin() + cursor + size, ptr);
    cursor += size;
  }
  return p;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_cell_step(
    const LstmDirParams& params, const Eigen::VectorXd& x,
    const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev) {
  const Eigen::Index h = params.u[0].rows();
  if (params.w[0].cols() != x.size() || h_prev.size() != h || c_prev.size() != h)
    throw InvalidInput("lstm step shape mismatch");
  const Eigen::ArrayXd f =
      sigmoid((params.w[0] * x + params.u[0] * h_prev + params.b[0]).array());
  const Eigen::ArrayXd i =
      sigmoid((params.w[1] * x + params.u[1] * h_prev + params.b[1]).array());
  const Eigen::ArrayXd g =
      (params.w[2] * x + params.u[2] * h_prev + params.b[2]).array().tanh();
  const Eigen::ArrayXd o =
      sigmoid((params.w[3] * x + params.u[3] * h_prev + params.b[3]).array());
  const Eigen::ArrayXd c = i * g + f * c_prev.array();
  const Eigen::ArrayXd h_new = o * c.tanh();
  return {h_new.matrix(), c.matrix()};
}

namespace {

LstmDirTrace run_direction(const LstmDirParams& p, std::span<const double> seq,
                           bool reverse) {
  const auto steps = static_cast<Eigen::Index>(seq.size());
  const Eigen::Index h = p.u[0].rows();
  LstmDirTrace tr;
  for (Eigen::MatrixXd* m : {&tr.f, &tr.i, &tr.g, &tr.o, &tr.c, &tr.h})
    m->resize(h, steps);
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const std::size_t pos = reverse ? seq.size() - 1 - t : t;
    const double x = seq[pos];
    tr.f.col(t) = sigmoid((p.w[0].col(0) * x + p.u[0] * h_prev + p.b[0]).array());
    tr.i.col(t) = sigmoid((p.w[1].col(0) * x + p.u[1] * h_prev + p.b[1]).array());
    tr.g.col(t) = (p.w[2].col(0) * x + p.u[2] * h_prev + p.b[2]).array().tanh();
    tr.o.col(t) = sigmoid((p.w[3].col(0) * x + p.u[3] * h_prev + p.b[3]).array());
    tr.c.col(t) = tr.i.col(t).cwiseProduct(tr.g.col(t)) +
                  tr.f.col(t).cwiseProduct(c_prev);
    tr.h.col(t) = tr.o.col(t).cwiseProduct(tr.c.col(t).array().tanh().matrix());
    h_prev = tr.h.col(t);
    c_prev = tr.c.col(t);
  }
  return tr;
}

BiLstmTrace bilstm_trace(const BiLstmParams& p, std::span<const double> seq) {
  if (seq.empty()) throw InvalidInput("empty sequence");
  BiLstmTrace tr;
  tr.fwd = run_direction(p.fwd, seq, false);
  tr.bwd = run_direction(p.bwd, seq, true);
  const Eigen::Index h = p.fwd.u[0].rows();
  tr.out.resize(2 * h);
  tr.out.head(h) = tr.fwd.h.col(tr.fwd.h.cols() - 1);
  tr.out.tail(h) = tr.bwd.h.col(tr.bwd.h.cols() - 1);
  return tr;
}

// BPTT for one direction given the gradient of the final hidden state.
// Parameter gradients accumulate into grad; input gradients into d_seq.
void backward_direction(const LstmDirParams& p, const LstmDirTrace& tr,
                        std::span<const double> seq, bool reverse,
                        const Eigen::VectorXd& d_final, LstmDirParams& grad,
                        std::span<double> d_seq) {
  const auto steps = static_cast<Eigen::Index>(seq.size());
  const Eigen::Index h = p.u[0].rows();
  Eigen::VectorXd dh = d_final;
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(h);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const std::size_t pos = reverse ? seq.size() - 1 - t : t;
    const double x = seq[pos];
    const Eigen::ArrayXd f = tr.f.col(t).array();
    const Eigen::ArrayXd i = tr.i.col(t).array();
    const Eigen::ArrayXd g = tr.g.col(t).array();
    const Eigen::ArrayXd o = tr.o.col(t).array();
    const Eigen::ArrayXd tanh_c = tr.c.col(t).array().tanh();

    const Eigen::ArrayXd d_o = dh.array() * tanh_c;
    dc.array() += dh.array() * o * (1.0 - tanh_c.square());
    const Eigen::VectorXd c_prev =
        t > 0 ? Eigen::VectorXd(tr.c.col(t - 1)) : Eigen::VectorXd::Zero(h);
    const Eigen::ArrayXd d_f = dc.array() * c_prev.array();
    const Eigen::ArrayXd d_i = dc.array() * g;
    const Eigen::ArrayXd d_g = dc.array() * i;

    const Eigen::VectorXd da[4] = {
        (d_f * f * (1.0 - f)).matrix(),
        (d_i * i * (1.0 - i)).matrix(),
        (d_g * (1.0 - g.square())).matrix(),
        (d_o * o * (1.0 - o)).matrix(),
    };
    const Eigen::VectorXd h_prev =
        t > 0 ? Eigen::VectorXd(tr.h.col(t - 1)) : Eigen::VectorXd::Zero(h);

    Eigen::VectorXd dh_prev = Eigen::VectorXd::Zero(h);
    double dx = 0.0;
    for (int gate = 0; gate < 4; ++gate) {
      grad.w[gate].col(0) += da[gate] * x;
      grad.u[gate] += da[gate] * h_prev.transpose();
      grad.b[gate] += da[gate];
      dx += p.w[gate].col(0).dot(da[gate]);
      dh_prev += p.u[gate].transpose() * da[gate];
    }
    d_seq[pos] += dx;
    dh = dh_prev;
    dc = (dc.array() * f).matrix();
  }
}

// Gradients w.r.t. both the parameters and the input sequence.
void bilstm_backward(const BiLstmParams& p, const BiLstmTrace& tr,
                     std::span<const double> seq, const Eigen::VectorXd& d_out,
                     BiLstmParams& grad, std::span<double> d_seq) {
  const Eigen::Index h = p.fwd.u[0].rows();
  backward_direction(p.fwd, tr.fwd, seq, false, d_out.head(h), grad.fwd, d_seq);
  backward_direction(p.bwd, tr.bwd, seq, true, d_out.tail(h), grad.bwd, d_seq);
}

ConvTrace conv_trace(const ConvParams& p, std::span<const double> seq) {
  const Eigen::Index filters = p.kernels.rows();
  const Eigen::Index width = p.kernels.cols();
  const auto n = static_cast<Eigen::Index>(seq.size());
  if (n < width)
    throw InvalidInput("sequence shorter than the convolution kernel");
  ConvTrace tr;
  tr.out.resize(filters);
  tr.argmax.assign(filters, -1);
  for (Eigen::Index m = 0; m < filters; ++m) {
    double best = 0.0;
    int best_pos = -1;
    for (Eigen::Index k = 0; k + width <= n; ++k) {
      double pre = p.bias[m];
      for (Eigen::Index j = 0; j < width; ++j) pre += p.kernels(m, j) * seq[k + j];
      if (pre > best) {  // ReLU floor at 0; first maximum wins
        best = pre;
        best_pos = static_cast<int>(k);
      }
    }
    tr.out[m] = best;
    tr.argmax[m] = best_pos;
  }
  return tr;
}

void conv_backward(const ConvParams& p, const ConvTrace& tr,
                   std::span<const double> seq, const Eigen::VectorXd& d_out,
                   ConvParams& grad, std::span<double> d_seq) {
  const Eigen::Index width = p.kernels.cols();
  for (Eigen::Index m = 0; m < p.kernels.rows(); ++m) {
    const int k = tr.argmax[m];
    if (k < 0) continue;  // pooled to the ReLU floor, zero subgradient
    const double da = d_out[m];
    for (Eigen::Index j = 0; j < width; ++j) {
      grad.kernels(m, j) += da * seq[k + j];
      d_seq[k + j] += da * p.kernels(m, j);
    }
    grad.bias[m] += da;
  }
}

FusionTrace fuse_trace(const FusionParams& p, const Eigen::VectorXd& ctx,
                       const Eigen::VectorXd& loc) {
  if (ctx.size() != loc.size() || ctx.size() != p.w_ctx.rows())
    throw InvalidInput("fusion input lengths differ");
  FusionTrace tr;
  tr.lambda = sigmoid((p.w_ctx * ctx + p.b_ctx).array()).matrix();
  tr.eta = sigmoid((p.w_loc * loc + p.b_loc).array()).matrix();
  tr.psi.resize(ctx.size());
  for (Eigen::Index i = 0; i < ctx.size(); ++i)
    tr.psi[i] = fusion_weight(tr.lambda[i], tr.eta[i]);
  tr.out = fuse_with_weights(ctx, loc, tr.psi);
  return tr;
}

// Returns (d_ctx, d_loc); parameter gradients accumulate into grad.
std::pair<Eigen::VectorXd, Eigen::VectorXd> fusion_backward(
    const FusionParams& p, const FusionTrace& tr, const Eigen::VectorXd& ctx,
    const Eigen::VectorXd& loc, const Eigen::VectorXd& d_out,
    FusionParams& grad) {
  const Eigen::ArrayXd lambda = tr.lambda.array();
  const Eigen::ArrayXd eta = tr.eta.array();
  const Eigen::ArrayXd psi = tr.psi.array();

  const Eigen::ArrayXd d_psi = d_out.array() * (loc.array() - ctx.array());
  const Eigen::ArrayXd d_lambda = d_psi * (eta * 2.0 * (1.0 - lambda) + (1.0 - eta));
  const Eigen::ArrayXd d_eta = d_psi * ((1.0 - (1.0 - lambda).square()) - lambda);
  const Eigen::VectorXd d_a = (d_lambda * lambda * (1.0 - lambda)).matrix();
  const Eigen::VectorXd d_b = (d_eta * eta * (1.0 - eta)).matrix();

  grad.w_ctx += d_a * ctx.transpose();
  grad.b_ctx += d_a;
  grad.w_loc += d_b * loc.transpose();
  grad.b_loc += d_b;

  Eigen::VectorXd d_ctx = (d_out.array() * (1.0 - psi)).matrix();
  d_ctx += p.w_ctx.transpose() * d_a;
  Eigen::VectorXd d_loc = (d_out.array() * psi).matrix();
  d_loc += p.w_loc.transpose() * d_b;
  return {std::move(d_ctx), std::move(d_loc)};
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out.head(a.size()) = a;
  out.tail(b.size()) = b;
  return out;
}

}  // namespace

Eigen::VectorXd bilstm_encode(const BiLstmParams& params,
                              std::span<const double> sequence) {
  return bilstm_trace(params, sequence).out;
}

Eigen::VectorXd conv_maxpool(const ConvParams& params,
                             std::span<const double> sequence) {
  return conv_trace(params, sequence).out;
}

double fusion_weight(double lambda, double eta) {
  return eta * (1.0 - (1.0 - lambda) * (1.0 - lambda)) + (1.0 - eta) * lambda;
}

Eigen::VectorXd fuse_with_weights(const Eigen::VectorXd& context,
                                  const Eigen::VectorXd& local,
                                  const Eigen::VectorXd& psi) {
  if (context.size() != local.size() || context.size() != psi.size())
    throw InvalidInput("fusion input lengths differ");
  return ((1.0 - psi.array()) * context.array() + psi.array() * local.array())
      .matrix();
}

Eigen::VectorXd fuse(const FusionParams& params, const Eigen::VectorXd& context,
                     const Eigen::VectorXd& local) {
  return fuse_trace(params, context, local).out;
}

ForwardTrace hgnn_forward(const Eigen::VectorXd& features,
                          const HgnnParams& params, const HgnnConfig& config) {
  if (features.size() < config.kernel_size)
    throw InvalidInput("input shorter than the convolution kernel");
  ForwardTrace tr;
  tr.input = features;

  // layer 1: both branches read the raw feature sequence
  tr.lstm_in[0] = features;
  tr.conv_in[0] = features;
  tr.ctx[0] = bilstm_trace(params.lstm[0], as_span(tr.lstm_in[0]));
  tr.loc[0] = conv_trace(params.conv[0], as_span(tr.conv_in[0]));
  tr.fused[0] = fuse_trace(params.fusion[0], tr.ctx[0].out, tr.loc[0].out);

  // layer 2: context from the fused vector, local from fused + raw input
  tr.lstm_in[1] = tr.fused[0].out;
  tr.conv_in[1] = concat(tr.fused[0].out, features);
  tr.ctx[1] = bilstm_trace(params.lstm[1], as_span(tr.lstm_in[1]));
  tr.loc[1] = conv_trace(params.conv[1], as_span(tr.conv_in[1]));
  tr.fused[1] = fuse_trace(params.fusion[1], tr.ctx[1].out, tr.loc[1].out);

  // layer 3: context from both earlier fusions, local from the second
  tr.lstm_in[2] = concat(tr.fused[0].out, tr.fused[1].out);
  tr.conv_in[2] = tr.fused[1].out;
  tr.ctx[2] = bilstm_trace(params.lstm[2], as_span(tr.lstm_in[2]));
  tr.loc[2] = conv_trace(params.conv[2], as_span(tr.conv_in[2]));
  tr.fused[2] = fuse_trace(params.fusion[2], tr.ctx[2].out, tr.loc[2].out);

  // layer 4: concatenation instead of gating
  tr.lstm_in[3] = tr.fused[2].out;
  tr.conv_in[3] = concat(tr.fused[2].out, tr.fused[1].out);
  tr.ctx[3] = bilstm_trace(params.lstm[3], as_span(tr.lstm_in[3]));
  tr.loc[3] = conv_trace(params.conv[3], as_span(tr.conv_in[3]));
  tr.fused4 = concat(tr.ctx[3].out, tr.loc[3].out);

  tr.logits = params.fc_w * tr.fused4 + params.fc_b;
  const double max_logit = tr.logits.maxCoeff();
  const Eigen::ArrayXd shifted = (tr.logits.array() - max_logit).exp();
  tr.probs = (shifted / shifted.sum()).matrix();
  return tr;
}

int predict(const ForwardTrace& trace) {
  int best = 0;
  for (Eigen::Index c = 1; c < trace.probs.size(); ++c)
    if (trace.probs[c] > trace.probs[best]) best = static_cast<int>(c);
  return best + 1;  // 1-indexed level
}

double cross_entropy(const ForwardTrace& trace, int label) {
  if (label < 0 || label >= trace.probs.size())
    throw InvalidInput("label out of range");
  return -std::log(trace.probs[label]);
}

void hgnn_backward(const HgnnParams& params, const HgnnConfig& config,
                   const ForwardTrace& trace, int label, HgnnParams& grad) {
  const int d_f = config.fusion_dim;
  Eigen::VectorXd d_logits = trace.probs;
  d_logits[label] -= 1.0;

  grad.fc_w += d_logits * trace.fused4.transpose();
  grad.fc_b += d_logits;
  const Eigen::VectorXd d_fused4 = params.fc_w.transpose() * d_logits;

  Eigen::VectorXd d_ff1 = Eigen::VectorXd::Zero(d_f);
  Eigen::VectorXd d_ff2 = Eigen::VectorXd::Zero(d_f);
  Eigen::VectorXd d_ff3 = Eigen::VectorXd::Zero(d_f);

  // layer 4: fused4 = [ctx4; loc4], conv input [ff3; ff2], lstm input ff3
  {
    const Eigen::VectorXd d_ctx4 = d_fused4.head(d_f);
    const Eigen::VectorXd d_loc4 = d_fused4.tail(d_f);
    Eigen::VectorXd d_conv_in = Eigen::VectorXd::Zero(trace.conv_in[3].size());
    conv_backward(params.conv[3], trace.loc[3], as_span(trace.conv_in[3]),
                  d_loc4, grad.conv[3],
                  {d_conv_in.data(), static_cast<std::size_t>(d_conv_in.size())});
    d_ff3 += d_conv_in.head(d_f);
    d_ff2 += d_conv_in.tail(d_f);
    Eigen::VectorXd d_lstm_in = Eigen::VectorXd::Zero(trace.lstm_in[3].size());
    bilstm_backward(params.lstm[3], trace.ctx[3], as_span(trace.lstm_in[3]),
                    d_ctx4, grad.lstm[3],
                    {d_lstm_in.data(), static_cast<std::size_t>(d_lstm_in.size())});
    d_ff3 += d_lstm_in;
  }

  // layer 3 fusion, then its branches: conv input ff2, lstm input [ff1; ff2]
  {
    auto [d_ctx3, d_loc3] =
        fusion_backward(params.fusion[2], trace.fused[2], trace.ctx[2].out,
                        trace.loc[2].out, d_ff3, grad.fusion[2]);
    Eigen::VectorXd d_conv_in = Eigen::VectorXd::Zero(trace.conv_in[2].size());
    conv_backward(params.conv[2], trace.loc[2], as_span(trace.conv_in[2]),
                  d_loc3, grad.conv[2],
                  {d_conv_in.data(), static_cast<std::size_t>(d_conv_in.size())});
    d_ff2 += d_conv_in;
    Eigen::VectorXd d_lstm_in = Eigen::VectorXd::Zero(trace.lstm_in[2].size());
    bilstm_backward(params.lstm[2], trace.ctx[2], as_span(trace.lstm_in[2]),
                    d_ctx3, grad.lstm[2],
                    {d_lstm_in.data(), static_cast<std::size_t>(d_lstm_in.size())});
    d_ff1 += d_lstm_in.head(d_f);
    d_ff2 += d_lstm_in.tail(d_f);
  }

  // layer 2 fusion, branches: conv input [ff1; input], lstm input ff1
  {
    auto [d_ctx2, d_loc2] =
        fusion_backward(params.fusion[1], trace.fused[1], trace.ctx[1].out,
                        trace.loc[1].out, d_ff2, grad.fusion[1]);
    Eigen::VectorXd d_conv_in = Eigen::VectorXd::Zero(trace.conv_in[1].size());
    conv_backward(params.conv[1], trace.loc[1], as_span(trace.conv_in[1]),
                  d_loc2, grad.conv[1],
                  {d_conv_in.data(), static_cast<std::size_t>(d_conv_in.size())});
    d_ff1 += d_conv_in.head(d_f);  // the raw-input tail carries no parameters
    Eigen::VectorXd d_lstm_in = Eigen::VectorXd::Zero(trace.lstm_in[1].size());
    bilstm_backward(params.lstm[1], trace.ctx[1], as_span(trace.lstm_in[1]),
                    d_ctx2, grad.lstm[1],
                    {d_lstm_in.data(), static_cast<std::size_t>(d_lstm_in.size())});
    d_ff1 += d_lstm_in;
  }

  // layer 1 fusion, branches both read the raw input
  {
    auto [d_ctx1, d_loc1] =
        fusion_backward(params.fusion[0], trace.fused[0], trace.ctx[0].out,
                        trace.loc[0].out, d_ff1, grad.fusion[0]);
    Eigen::VectorXd d_input = Eigen::VectorXd::Zero(trace.input.size());
    conv_backward(params.conv[0], trace.loc[0], as_span(trace.conv_in[0]),
                  d_loc1, grad.conv[0],
                  {d_input.data(), static_cast<std::size_t>(d_input.size())});
    bilstm_backward(params.lstm[0], trace.ctx[0], as_span(trace.lstm_in[0]),
                    d_ctx1, grad.lstm[0],
                    {d_input.data(), static_cast<std::size_t>(d_input.size())});
  }
}

namespace {

void validate_samples(std::span<const Sample> samples, const HgnnConfig& config) {
  for (const Sample& s : samples) {
    if (s.label < 0 || s.label >= config.num_classes)
      throw InvalidInput("sample label out of range for the class count");
    if (s.features.size() < config.kernel_size)
      throw InvalidInput("sample features shorter than the convolution kernel");
  }
}

}  // namespace

ConfusionMatrix hgnn_confusion(std::span<const Sample> samples,
                               const HgnnParams& params,
                               const HgnnConfig& config) {
  std::vector<int> preds(samples.size());
  std::vector<std::exception_ptr> errors(samples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    try {
      preds[i] = predict(hgnn_forward(samples[i].features, params, config)) - 1;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  ConfusionMatrix matrix(config.num_classes);
  for (std::size_t i = 0; i < samples.size(); ++i)
    matrix.add(samples[i].label, preds[i]);
  return matrix;
}

double mean_loss(std::span<const Sample> samples, const HgnnParams& params,
                 const HgnnConfig& config) {
  if (samples.empty()) throw InvalidInput("no samples");
  double acc = 0.0;
  for (const Sample& s : samples)
    acc += cross_entropy(hgnn_forward(s.features, params, config), s.label);
  return acc / static_cast<double>(samples.size());
}

TrainResult train(std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const HgnnConfig& config,
                  const TrainSchedule& schedule) {
  config.validate();
  if (train_set.empty()) throw InvalidInput("empty training set");
  if (schedule.epochs < 1) throw InvalidInput("epochs must be at least 1");
  if (schedule.batch < 1) throw InvalidInput("batch size must be at least 1");
  if (schedule.lr < 0.0) throw InvalidInput("learning rate must be non-negative");
  validate_samples(train_set, config);
  validate_samples(val_set, config);

  HgnnParams params = HgnnParams::init(config);
  const std::size_t n_params = params.param_count();
  std::vector<double> moment1(n_params, 0.0), moment2(n_params, 0.0);
  long long adam_step = 0;

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(derive_seed(config.seed, 0x7261696eULL));

  const std::size_t max_chunks =
      (static_cast<std::size_t>(schedule.batch) + kChunkSize - 1) / kChunkSize;
  std::vector<HgnnParams> chunk_grads;
  chunk_grads.reserve(max_chunks);
  for (std::size_t c = 0; c < max_chunks; ++c)
    chunk_grads.push_back(HgnnParams::zeros(config));
  HgnnParams total_grad = HgnnParams::zeros(config);

  TrainResult result{HgnnParams::zeros(config), {}};
  double best_f1 = -1.0;

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss_sum = 0.0;

    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(schedule.batch)) {
      const std::size_t batch_n =
          std::min(static_cast<std::size_t>(schedule.batch), n - start);
      const std::size_t n_chunks = (batch_n + kChunkSize - 1) / kChunkSize;

      std::vector<double> chunk_loss(n_chunks, 0.0);
      std::vector<std::exception_ptr> chunk_error(n_chunks);
      for (std::size_t c = 0; c < n_chunks; ++c) chunk_grads[c].set_zero();

      // Chunks have a fixed size independent of the thread count and are
      // merged in chunk order below, so training is reproducible at any
      // OpenMP width.
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_chunks); ++c) {
        try {
          const std::size_t chunk_begin = start + c * kChunkSize;
          const std::size_t chunk_end =
              std::min(chunk_begin + kChunkSize, start + batch_n);
          for (std::size_t idx = chunk_begin; idx < chunk_end; ++idx) {
            const Sample& sample = train_set[order[idx]];
            const ForwardTrace trace =
                hgnn_forward(sample.features, params, config);
            chunk_loss[c] += cross_entropy(trace, sample.label);
            hgnn_backward(params, config, trace, sample.label, chunk_grads[c]);
          }
        } catch (...) {
          chunk_error[c] = std::current_exception();
        }
      }
      for (auto& err : chunk_error)
        if (err) std::rethrow_exception(err);

      total_grad.set_zero();
      double batch_loss = 0.0;
      for (std::size_t c = 0; c < n_chunks; ++c) {
        total_grad.axpy(1.0, chunk_grads[c]);
        batch_loss += chunk_loss[c];
      }
      epoch_loss_sum += batch_loss;

      ++adam_step;
      const double bias1 = 1.0 - std::pow(schedule.beta1, adam_step);
      const double bias2 = 1.0 - std::pow(schedule.beta2, adam_step);
      const double inv_batch = 1.0 / static_cast<double>(batch_n);
      const auto param_blocks = params.blocks();
      const auto grad_blocks = total_grad.blocks();
      std::size_t cursor = 0;
      for (std::size_t b = 0; b < param_blocks.size(); ++b) {
        double* p = param_blocks[b].first;
        const double* g = grad_blocks[b].first;
        for (std::size_t i = 0; i < param_blocks[b].second; ++i, ++cursor) {
          const double gi = g[i] * inv_batch;
          moment1[cursor] = schedule.beta1 * moment1[cursor] +
                            (1.0 - schedule.beta1) * gi;
          moment2[cursor] = schedule.beta2 * moment2[cursor] +
                            (1.0 - schedule.beta2) * gi * gi;
          const double m_hat = moment1[cursor] / bias1;
          const double v_hat = moment2[cursor] / bias2;
          p[i] -= schedule.lr * m_hat / (std::sqrt(v_hat) + schedule.eps);
        }
      }
    }

    const double epoch_loss = epoch_loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw TrainingDiverged(epoch + 1, "training loss is not finite at epoch " +
                                            std::to_string(epoch + 1));
    result.history.train_loss.push_back(epoch_loss);

    double val_f1 = 0.0;
    if (!val_set.empty()) {
      const ConfusionMatrix cm = hgnn_confusion(val_set, params, config);
      val_f1 = macro_report(cm).macro_f1;
    }
    result.history.val_macro_f1.push_back(val_f1);

    if (val_set.empty() || val_f1 > best_f1) {
      best_f1 = val_f1;
      result.history.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

}  // namespace tsfract
