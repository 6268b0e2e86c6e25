#include "serkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace serkit {

namespace {

constexpr std::size_t kC1 = 64, kC2 = 64, kC3 = 128;
constexpr std::size_t kKernel = 5;
constexpr std::size_t kPool1 = 4, kPool2 = 2;
constexpr double kProbFloor = 1e-30;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void he_uniform(std::vector<double>& w, std::size_t fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& x : w) x = (2.0 * uniform01(rng) - 1.0) * limit;
}

void conv_forward(const ConvParams& c, const double* in, std::size_t len, double* out) {
  const long long pad = static_cast<long long>(c.kernel / 2);
  const long long L = static_cast<long long>(len);
  for (std::size_t co = 0; co < c.out_ch; ++co) {
    double* dst = out + co * len;
    std::fill(dst, dst + len, c.b[co]);
    for (std::size_t ci = 0; ci < c.in_ch; ++ci) {
      const double* src = in + ci * len;
      const double* wrow = c.w.data() + (co * c.in_ch + ci) * c.kernel;
      for (std::size_t kk = 0; kk < c.kernel; ++kk) {
        const double wv = wrow[kk];
        const long long off = static_cast<long long>(kk) - pad;
        const long long t0 = off < 0 ? -off : 0;
        const long long t1 = off > 0 ? L - off : L;
        for (long long t = t0; t < t1; ++t) dst[t] += wv * src[t + off];
      }
    }
  }
}

void conv_backward(const ConvParams& c, const double* in, const double* d_out, std::size_t len,
                   double* d_in, double* gw, double* gb) {
  const long long pad = static_cast<long long>(c.kernel / 2);
  const long long L = static_cast<long long>(len);
  for (std::size_t co = 0; co < c.out_ch; ++co) {
    const double* g = d_out + co * len;
    double accb = 0.0;
    for (std::size_t t = 0; t < len; ++t) accb += g[t];
    gb[co] += accb;
    for (std::size_t ci = 0; ci < c.in_ch; ++ci) {
      const double* src = in + ci * len;
      const double* wrow = c.w.data() + (co * c.in_ch + ci) * c.kernel;
      double* gq = gw + (co * c.in_ch + ci) * c.kernel;
      double* dsrc = d_in ? d_in + ci * len : nullptr;
      for (std::size_t kk = 0; kk < c.kernel; ++kk) {
        const long long off = static_cast<long long>(kk) - pad;
        const long long t0 = off < 0 ? -off : 0;
        const long long t1 = off > 0 ? L - off : L;
        double acc = 0.0;
        for (long long t = t0; t < t1; ++t) acc += g[t] * src[t + off];
        gq[kk] += acc;
        if (dsrc) {
          const double wv = wrow[kk];
          for (long long t = t0; t < t1; ++t) dsrc[t + off] += wv * g[t];
        }
      }
    }
  }
}

void relu_forward(const std::vector<double>& a, std::vector<double>& r) {
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void maxpool_forward(const double* in, std::size_t ch, std::size_t len, std::size_t width, double* out,
                     int* idx) {
  const std::size_t out_len = len / width;
  for (std::size_t c = 0; c < ch; ++c) {
    const double* src = in + c * len;
    for (std::size_t i = 0; i < out_len; ++i) {
      std::size_t best = i * width;
      double bv = src[best];
      for (std::size_t j = 1; j < width; ++j) {
        const std::size_t p = i * width + j;
        if (src[p] > bv) {
          bv = src[p];
          best = p;
        }
      }
      out[c * out_len + i] = bv;
      idx[c * out_len + i] = static_cast<int>(best);
    }
  }
}

struct Workspace {
  std::size_t len = 0, len1 = 0, len2 = 0, classes = 0;

  std::vector<double> x;                 // 1 x len
  std::vector<double> a1, r1;            // kC1 x len
  std::vector<double> a2, r2, m2, r2d;   // kC2 x len
  std::vector<double> p1;                // kC2 x len1
  std::vector<int> i1;
  std::vector<double> a3, r3, m3, r3d;   // kC3 x len1
  std::vector<double> p2;                // kC3 x len2
  std::vector<int> i2;
  std::vector<double> logits, probs;

  std::vector<double> d_logits, d_flat, d_r3d, d_a3, d_p1, d_r2d, d_a2, d_r1, d_a1;

  void resize(const CnnModel& m) {
    len = m.input_dim;
    len1 = m.pooled1_len();
    len2 = m.pooled2_len();
    classes = m.n_classes;
    x.resize(len);
    a1.resize(kC1 * len);
    r1.resize(kC1 * len);
    a2.resize(kC2 * len);
    r2.resize(kC2 * len);
    m2.resize(kC2 * len);
    r2d.resize(kC2 * len);
    p1.resize(kC2 * len1);
    i1.resize(kC2 * len1);
    a3.resize(kC3 * len1);
    r3.resize(kC3 * len1);
    m3.resize(kC3 * len1);
    r3d.resize(kC3 * len1);
    p2.resize(kC3 * len2);
    i2.resize(kC3 * len2);
    logits.resize(classes);
    probs.resize(classes);
    d_logits.resize(classes);
    d_flat.resize(kC3 * len2);
    d_r3d.resize(kC3 * len1);
    d_a3.resize(kC3 * len1);
    d_p1.resize(kC2 * len1);
    d_r2d.resize(kC2 * len);
    d_a2.resize(kC2 * len);
    d_r1.resize(kC1 * len);
    d_a1.resize(kC1 * len);
  }
};

void forward_sample(const CnnModel& m, Workspace& ws, const double* x, bool train, std::mt19937_64* rng) {
  std::copy(x, x + m.input_dim, ws.x.begin());

  conv_forward(m.conv1, ws.x.data(), ws.len, ws.a1.data());
  relu_forward(ws.a1, ws.r1);

  conv_forward(m.conv2, ws.r1.data(), ws.len, ws.a2.data());
  relu_forward(ws.a2, ws.r2);

  if (train && m.dropout_rate > 0.0) {
    const double scale = 1.0 / (1.0 - m.dropout_rate);
    for (std::size_t i = 0; i < ws.m2.size(); ++i)
      ws.m2[i] = uniform01(*rng) < m.dropout_rate ? 0.0 : scale;
  } else {
    std::fill(ws.m2.begin(), ws.m2.end(), 1.0);
  }
  for (std::size_t i = 0; i < ws.r2.size(); ++i) ws.r2d[i] = ws.r2[i] * ws.m2[i];

  maxpool_forward(ws.r2d.data(), kC2, ws.len, kPool1, ws.p1.data(), ws.i1.data());

  conv_forward(m.conv3, ws.p1.data(), ws.len1, ws.a3.data());
  relu_forward(ws.a3, ws.r3);

  if (train && m.dropout_rate > 0.0) {
    const double scale = 1.0 / (1.0 - m.dropout_rate);
    for (std::size_t i = 0; i < ws.m3.size(); ++i)
      ws.m3[i] = uniform01(*rng) < m.dropout_rate ? 0.0 : scale;
  } else {
    std::fill(ws.m3.begin(), ws.m3.end(), 1.0);
  }
  for (std::size_t i = 0; i < ws.r3.size(); ++i) ws.r3d[i] = ws.r3[i] * ws.m3[i];

  maxpool_forward(ws.r3d.data(), kC3, ws.len1, kPool2, ws.p2.data(), ws.i2.data());

  const std::size_t flat = ws.p2.size();
  for (std::size_t o = 0; o < m.n_classes; ++o) {
    double acc = m.dense.b[o];
    const double* wrow = m.dense.w.data() + o * flat;
    for (std::size_t i = 0; i < flat; ++i) acc += wrow[i] * ws.p2[i];
    ws.logits[o] = acc;
  }

  double mx = ws.logits[0];
  for (double l : ws.logits) mx = std::max(mx, l);
  double sum = 0.0;
  for (std::size_t o = 0; o < m.n_classes; ++o) {
    ws.probs[o] = std::exp(ws.logits[o] - mx);
    sum += ws.probs[o];
  }
  for (double& p : ws.probs) p /= sum;
}

double cross_entropy(const std::vector<double>& probs, int label) {
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbFloor));
}

/// dLoss/dlogits via chained CE and softmax backward passes.
void logit_grad_from_probs(const std::vector<double>& probs, int label, double weight,
                           std::vector<double>& d_logits) {
  const std::size_t n = probs.size();
  std::vector<double> dp(n, 0.0);
  dp[static_cast<std::size_t>(label)] = -weight / std::max(probs[static_cast<std::size_t>(label)], kProbFloor);
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += dp[j] * probs[j];
  for (std::size_t i = 0; i < n; ++i) d_logits[i] = probs[i] * (dp[i] - dot);
}

struct Grads {
  std::vector<double> c1w, c1b, c2w, c2b, c3w, c3b, dw, db;

  void init(const CnnModel& m) {
    c1w.assign(m.conv1.w.size(), 0.0);
    c1b.assign(m.conv1.b.size(), 0.0);
    c2w.assign(m.conv2.w.size(), 0.0);
    c2b.assign(m.conv2.b.size(), 0.0);
    c3w.assign(m.conv3.w.size(), 0.0);
    c3b.assign(m.conv3.b.size(), 0.0);
    dw.assign(m.dense.w.size(), 0.0);
    db.assign(m.dense.b.size(), 0.0);
  }

  void zero() {
    for (auto* v : {&c1w, &c1b, &c2w, &c2b, &c3w, &c3b, &dw, &db}) std::fill(v->begin(), v->end(), 0.0);
  }
};

void backward_sample(const CnnModel& m, Workspace& ws, int label, double weight, Grads& g) {
  logit_grad_from_probs(ws.probs, label, weight, ws.d_logits);

  const std::size_t flat = ws.p2.size();
  std::fill(ws.d_flat.begin(), ws.d_flat.end(), 0.0);
  for (std::size_t o = 0; o < m.n_classes; ++o) {
    const double go = ws.d_logits[o];
    g.db[o] += go;
    const double* wrow = m.dense.w.data() + o * flat;
    double* gw = g.dw.data() + o * flat;
    for (std::size_t i = 0; i < flat; ++i) {
      gw[i] += go * ws.p2[i];
      ws.d_flat[i] += go * wrow[i];
    }
  }

  std::fill(ws.d_r3d.begin(), ws.d_r3d.end(), 0.0);
  for (std::size_t c = 0; c < kC3; ++c)
    for (std::size_t i = 0; i < ws.len2; ++i)
      ws.d_r3d[c * ws.len1 + static_cast<std::size_t>(ws.i2[c * ws.len2 + i])] += ws.d_flat[c * ws.len2 + i];

  for (std::size_t i = 0; i < ws.d_a3.size(); ++i)
    ws.d_a3[i] = ws.r3[i] > 0.0 ? ws.d_r3d[i] * ws.m3[i] : 0.0;

  std::fill(ws.d_p1.begin(), ws.d_p1.end(), 0.0);
  conv_backward(m.conv3, ws.p1.data(), ws.d_a3.data(), ws.len1, ws.d_p1.data(), g.c3w.data(), g.c3b.data());

  std::fill(ws.d_r2d.begin(), ws.d_r2d.end(), 0.0);
  for (std::size_t c = 0; c < kC2; ++c)
    for (std::size_t i = 0; i < ws.len1; ++i)
      ws.d_r2d[c * ws.len + static_cast<std::size_t>(ws.i1[c * ws.len1 + i])] += ws.d_p1[c * ws.len1 + i];

  for (std::size_t i = 0; i < ws.d_a2.size(); ++i)
    ws.d_a2[i] = ws.r2[i] > 0.0 ? ws.d_r2d[i] * ws.m2[i] : 0.0;

  std::fill(ws.d_r1.begin(), ws.d_r1.end(), 0.0);
  conv_backward(m.conv2, ws.r1.data(), ws.d_a2.data(), ws.len, ws.d_r1.data(), g.c2w.data(), g.c2b.data());

  for (std::size_t i = 0; i < ws.d_a1.size(); ++i) ws.d_a1[i] = ws.r1[i] > 0.0 ? ws.d_r1[i] : 0.0;

  // input gradient is not needed
  conv_backward(m.conv1, ws.x.data(), ws.d_a1.data(), ws.len, nullptr, g.c1w.data(), g.c1b.data());
}

struct ParamRef {
  std::vector<double>* p;
  std::vector<double>* g;
};

std::vector<ParamRef> param_refs(CnnModel& m, Grads& g) {
  return {{&m.conv1.w, &g.c1w}, {&m.conv1.b, &g.c1b}, {&m.conv2.w, &g.c2w}, {&m.conv2.b, &g.c2b},
          {&m.conv3.w, &g.c3w}, {&m.conv3.b, &g.c3b}, {&m.dense.w, &g.dw},  {&m.dense.b, &g.db}};
}

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;

  void init(const std::vector<ParamRef>& refs) {
    m.clear();
    v.clear();
    for (const auto& r : refs) {
      m.emplace_back(r.p->size(), 0.0);
      v.emplace_back(r.p->size(), 0.0);
    }
  }
};

void optimizer_step(std::vector<ParamRef>& refs, AdamState& st, const TrainConfig& cfg) {
  if (cfg.optimizer == "sgd") {
    for (auto& r : refs)
      for (std::size_t i = 0; i < r.p->size(); ++i) (*r.p)[i] -= cfg.learning_rate * (*r.g)[i];
    return;
  }
  ++st.t;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.t));
  for (std::size_t r = 0; r < refs.size(); ++r) {
    auto& p = *refs[r].p;
    auto& g = *refs[r].g;
    auto& mm = st.m[r];
    auto& vv = st.v[r];
    for (std::size_t i = 0; i < p.size(); ++i) {
      mm[i] = cfg.adam_beta1 * mm[i] + (1.0 - cfg.adam_beta1) * g[i];
      vv[i] = cfg.adam_beta2 * vv[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      p[i] -= cfg.learning_rate * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + cfg.adam_eps);
    }
  }
}

void standardize_row(const CnnModel& m, const double* in, double* out) {
  for (std::size_t j = 0; j < m.input_dim; ++j) out[j] = (in[j] - m.feat_mean[j]) / m.feat_std[j];
}

}  // namespace

std::size_t CnnModel::parameter_count() const {
  return conv1.w.size() + conv1.b.size() + conv2.w.size() + conv2.b.size() + conv3.w.size() +
         conv3.b.size() + dense.w.size() + dense.b.size();
}

CnnModel init_model(std::size_t input_dim, std::size_t n_classes, std::uint64_t seed) {
  if (input_dim < 8) throw ModelError("init_model: input_dim must be >= 8");
  if (n_classes < 2) throw ModelError("init_model: n_classes must be >= 2");

  CnnModel m;
  m.input_dim = input_dim;
  m.n_classes = n_classes;
  m.rng_seed = seed;

  m.conv1 = {1, kC1, kKernel, std::vector<double>(kC1 * 1 * kKernel), std::vector<double>(kC1, 0.0)};
  m.conv2 = {kC1, kC2, kKernel, std::vector<double>(kC2 * kC1 * kKernel), std::vector<double>(kC2, 0.0)};
  m.conv3 = {kC2, kC3, kKernel, std::vector<double>(kC3 * kC2 * kKernel), std::vector<double>(kC3, 0.0)};
  const std::size_t flat = m.flat_dim();
  m.dense = {flat, n_classes, std::vector<double>(n_classes * flat), std::vector<double>(n_classes, 0.0)};

  std::mt19937_64 rng(seed);
  he_uniform(m.conv1.w, m.conv1.in_ch * kKernel, rng);
  he_uniform(m.conv2.w, m.conv2.in_ch * kKernel, rng);
  he_uniform(m.conv3.w, m.conv3.in_ch * kKernel, rng);
  he_uniform(m.dense.w, flat, rng);

  m.feat_mean.assign(input_dim, 0.0);
  m.feat_std.assign(input_dim, 1.0);
  m.dropout_rng.seed(rng());
  return m;
}

Mat forward(CnnModel& model, const Mat& batch, bool train_mode) {
  if (batch.cols != model.input_dim) throw ShapeMismatch("forward: batch width != input_dim");
  Workspace ws;
  ws.resize(model);
  Mat out(batch.rows, model.n_classes);
  for (std::size_t i = 0; i < batch.rows; ++i) {
    forward_sample(model, ws, batch.row(i), train_mode, &model.dropout_rng);
    std::copy(ws.probs.begin(), ws.probs.end(), out.row(i));
  }
  return out;
}

TrainHistory fit(CnnModel& model, const Mat& x, const std::vector<int>& y, const TrainConfig& cfg,
                 const Mat* x_val, const std::vector<int>* y_val) {
  if (x.rows != y.size()) throw ShapeMismatch("fit: x rows != y length");
  if (x.cols != model.input_dim) throw ShapeMismatch("fit: x width != input_dim");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate <= 0.0)
    throw ModelError("fit: invalid training config");

  std::vector<bool> seen(model.n_classes, false);
  std::size_t distinct = 0;
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= model.n_classes)
      throw ShapeMismatch("fit: label out of range");
    if (!seen[static_cast<std::size_t>(label)]) {
      seen[static_cast<std::size_t>(label)] = true;
      ++distinct;
    }
  }
  if (distinct < 2) throw DegenerateData("fit: training data contains a single class");

  const std::size_t n = x.rows, d = x.cols;
  model.feat_mean.assign(d, 0.0);
  model.feat_std.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) model.feat_mean[j] += row[j];
  }
  for (double& mu : model.feat_mean) mu /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - model.feat_mean[j];
      model.feat_std[j] += c * c;
    }
  }
  for (double& s : model.feat_std) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) s = 1.0;
  }

  Mat xs(n, d);
  for (std::size_t i = 0; i < n; ++i) standardize_row(model, x.row(i), xs.row(i));
  Mat xvs;
  if (x_val) {
    if (!y_val || x_val->rows != y_val->size()) throw ShapeMismatch("fit: bad validation data");
    xvs = Mat(x_val->rows, d);
    for (std::size_t i = 0; i < x_val->rows; ++i) standardize_row(model, x_val->row(i), xvs.row(i));
  }

  Workspace ws;
  ws.resize(model);
  Grads grads;
  grads.init(model);
  auto refs = param_refs(model, grads);
  AdamState adam;
  adam.init(refs);

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainHistory hist;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng() % (i + 1));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      grads.zero();
      double batch_loss = 0.0;
      for (std::size_t bi = start; bi < stop; ++bi) {
        const std::size_t s = order[bi];
        forward_sample(model, ws, xs.row(s), true, &model.dropout_rng);
        batch_loss += cross_entropy(ws.probs, y[s]);
        const std::size_t arg = static_cast<std::size_t>(
            std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin());
        if (arg == static_cast<std::size_t>(y[s])) ++correct;
        backward_sample(model, ws, y[s], inv, grads);
      }
      batch_loss *= inv;
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "fit: non-finite loss at epoch " << epoch << ", batch starting at sample " << start;
        throw NonFiniteLoss(msg.str());
      }
      epoch_loss += batch_loss * static_cast<double>(stop - start);
      optimizer_step(refs, adam, cfg);
    }
    hist.train_loss.push_back(epoch_loss / static_cast<double>(n));
    hist.train_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));

    if (x_val) {
      double vloss = 0.0;
      std::size_t vcorrect = 0;
      for (std::size_t i = 0; i < xvs.rows; ++i) {
        forward_sample(model, ws, xvs.row(i), false, nullptr);
        vloss += cross_entropy(ws.probs, (*y_val)[i]);
        const std::size_t arg = static_cast<std::size_t>(
            std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin());
        if (arg == static_cast<std::size_t>((*y_val)[i])) ++vcorrect;
      }
      hist.val_loss.push_back(vloss / static_cast<double>(xvs.rows));
      hist.val_accuracy.push_back(static_cast<double>(vcorrect) / static_cast<double>(xvs.rows));
    }
  }
  return hist;
}

std::vector<double> predict(const CnnModel& model, std::span<const double> v) {
  if (v.size() != model.input_dim) throw ShapeMismatch("predict: vector length != input_dim");
  Workspace ws;
  ws.resize(model);
  std::vector<double> xs(model.input_dim);
  standardize_row(model, v.data(), xs.data());
  forward_sample(model, ws, xs.data(), false, nullptr);
  return ws.probs;
}

std::vector<int> predict_labels(const CnnModel& model, const Mat& x) {
  if (x.cols != model.input_dim) throw ShapeMismatch("predict_labels: width != input_dim");
  Workspace ws;
  ws.resize(model);
  std::vector<double> xs(model.input_dim);
  std::vector<int> labels(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    standardize_row(model, x.row(i), xs.data());
    forward_sample(model, ws, xs.data(), false, nullptr);
    labels[i] = static_cast<int>(std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin());
  }
  return labels;
}

double sample_loss(const CnnModel& model, std::span<const double> v, int label) {
  const std::vector<double> p = predict(model, v);
  return -std::log(std::max(p[static_cast<std::size_t>(label)], kProbFloor));
}

std::vector<double> logit_gradient(const CnnModel& model, std::span<const double> v, int label) {
  const std::vector<double> p = predict(model, v);
  std::vector<double> d(p.size());
  logit_grad_from_probs(p, label, 1.0, d);
  return d;
}

namespace {

void analytic_grads(CnnModel& model, std::span<const double> v, int label, Grads& grads) {
  Workspace ws;
  ws.resize(model);
  std::vector<double> xs(model.input_dim);
  standardize_row(model, v.data(), xs.data());
  forward_sample(model, ws, xs.data(), false, nullptr);
  grads.init(model);
  backward_sample(model, ws, label, 1.0, grads);
}

}  // namespace

void train_single_step(CnnModel& model, std::span<const double> v, int label, const TrainConfig& cfg) {
  if (v.size() != model.input_dim) throw ShapeMismatch("train_single_step: vector length != input_dim");
  Grads grads;
  analytic_grads(model, v, label, grads);
  auto refs = param_refs(model, grads);
  AdamState adam;
  adam.init(refs);
  optimizer_step(refs, adam, cfg);
}

double gradient_check(CnnModel& model, std::span<const double> v, int label, double epsilon) {
  if (v.size() != model.input_dim) throw ShapeMismatch("gradient_check: vector length != input_dim");

  Grads grads;
  analytic_grads(model, v, label, grads);
  auto refs = param_refs(model, grads);

  std::mt19937_64 rng(model.rng_seed ^ 0x9E3779B97F4A7C15ULL);
  double max_rel = 0.0;
  for (auto& r : refs) {
    auto& p = *r.p;
    const auto& g = *r.g;
    const std::size_t count = std::max<std::size_t>(1, (p.size() + 99) / 100);
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = static_cast<std::size_t>(rng() % p.size());
      const double saved = p[i];
      p[i] = saved + epsilon;
      const double lp = sample_loss(model, v, label);
      p[i] = saved - epsilon;
      const double lm = sample_loss(model, v, label);
      p[i] = saved;
      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double rel = std::abs(g[i] - numeric) / std::max(1e-8, std::abs(g[i]) + std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "serkit-cnn";
  j["version"] = 1;
  j["input_dim"] = model.input_dim;
  j["n_classes"] = model.n_classes;
  j["rng_seed"] = model.rng_seed;
  j["dropout_rate"] = model.dropout_rate;
  j["feat_mean"] = model.feat_mean;
  j["feat_std"] = model.feat_std;
  auto conv = [](const ConvParams& c) {
    return nlohmann::json{{"in_ch", c.in_ch}, {"out_ch", c.out_ch}, {"kernel", c.kernel}, {"w", c.w}, {"b", c.b}};
  };
  j["conv1"] = conv(model.conv1);
  j["conv2"] = conv(model.conv2);
  j["conv3"] = conv(model.conv3);
  j["dense"] = {{"in_dim", model.dense.in_dim}, {"out_dim", model.dense.out_dim}, {"w", model.dense.w},
                {"b", model.dense.b}};

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ModelError("save_checkpoint: cannot open " + path.string());
  f << j.dump() << '\n';
}

CnnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ModelError("load_checkpoint: cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.value("format", "") != "serkit-cnn" || j.value("version", 0) != 1)
    throw ModelError("load_checkpoint: unrecognized checkpoint format");

  CnnModel m;
  m.input_dim = j["input_dim"].get<std::size_t>();
  m.n_classes = j["n_classes"].get<std::size_t>();
  m.rng_seed = j["rng_seed"].get<std::uint64_t>();
  m.dropout_rate = j["dropout_rate"].get<double>();
  m.feat_mean = j["feat_mean"].get<std::vector<double>>();
  m.feat_std = j["feat_std"].get<std::vector<double>>();
  auto conv = [](const nlohmann::json& cj) {
    ConvParams c;
    c.in_ch = cj["in_ch"].get<std::size_t>();
    c.out_ch = cj["out_ch"].get<std::size_t>();
    c.kernel = cj["kernel"].get<std::size_t>();
    c.w = cj["w"].get<std::vector<double>>();
    c.b = cj["b"].get<std::vector<double>>();
    if (c.w.size() != c.out_ch * c.in_ch * c.kernel || c.b.size() != c.out_ch)
      throw ModelError("load_checkpoint: conv tensor shape mismatch");
    return c;
  };
  m.conv1 = conv(j["conv1"]);
  m.conv2 = conv(j["conv2"]);
  m.conv3 = conv(j["conv3"]);
  m.dense.in_dim = j["dense"]["in_dim"].get<std::size_t>();
  m.dense.out_dim = j["dense"]["out_dim"].get<std::size_t>();
  m.dense.w = j["dense"]["w"].get<std::vector<double>>();
  m.dense.b = j["dense"]["b"].get<std::vector<double>>();
  if (m.dense.w.size() != m.dense.in_dim * m.dense.out_dim || m.dense.b.size() != m.dense.out_dim)
    throw ModelError("load_checkpoint: dense tensor shape mismatch");
  if (m.dense.in_dim != m.flat_dim() || m.dense.out_dim != m.n_classes ||
      m.feat_mean.size() != m.input_dim || m.feat_std.size() != m.input_dim)
    throw ModelError("load_checkpoint: layer shapes do not chain to input_dim/n_classes");

  m.dropout_rng.seed(m.rng_seed);
  return m;
}

}  // namespace serkit
