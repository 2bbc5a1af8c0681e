#include "pgnaa/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "pgnaa/error.hpp"
#include "pgnaa/kernels.hpp"
#include "pgnaa/parallel.hpp"

namespace pgnaa {

using json = nlohmann::json;

// ---------------------------------------------------------------- scaler

MinMaxScaler::MinMaxScaler(std::vector<double> min, std::vector<double> max)
    : min_(std::move(min)), max_(std::move(max)) {
  if (min_.size() != max_.size()) throw Error(ErrorCode::LengthMismatch, "scaler min/max sizes differ");
}

MinMaxScaler MinMaxScaler::fit(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "cannot fit a scaler on no rows");
  const std::size_t n = rows.front().size();
  std::vector<double> lo(rows.front()), hi(rows.front());
  for (const auto& r : rows) {
    if (r.size() != n) throw Error(ErrorCode::LengthMismatch, "ragged rows");
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], r[i]);
      hi[i] = std::max(hi[i], r[i]);
    }
  }
  return MinMaxScaler(std::move(lo), std::move(hi));
}

std::vector<double> MinMaxScaler::transform(std::span<const double> x) const {
  if (x.size() != min_.size()) throw Error(ErrorCode::LengthMismatch, "scaler input size");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double range = max_[i] - min_[i];
    out[i] = range > 0.0 ? (x[i] - min_[i]) / range : 0.0;
  }
  return out;
}

std::vector<double> MinMaxScaler::inverse(std::span<const double> y) const {
  if (y.size() != min_.size()) throw Error(ErrorCode::LengthMismatch, "scaler input size");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = min_[i] + y[i] * (max_[i] - min_[i]);
  return out;
}

// ---------------------------------------------------------------- layout

CvaeLayout::CvaeLayout(const CvaeShape& s) {
  std::size_t offset = 0;
  auto block = [&](const char* name, std::size_t rows, std::size_t cols) {
    Block b{name, offset, rows, cols};
    offset += rows * cols;
    return b;
  };
  enc_w = block("encoder.weight", s.hidden, s.input + s.labels);
  enc_b = block("encoder.bias", s.hidden, 1);
  mu_w = block("mu.weight", s.latent, s.hidden);
  mu_b = block("mu.bias", s.latent, 1);
  logvar_w = block("logvar.weight", s.latent, s.hidden);
  logvar_b = block("logvar.bias", s.latent, 1);
  dec_w = block("decoder.weight", s.hidden, s.latent + s.labels);
  dec_b = block("decoder.bias", s.hidden, 1);
  out_w = block("output.weight", s.input, s.hidden);
  out_b = block("output.bias", s.input, 1);
  total = offset;
}

std::vector<CvaeLayout::Block> CvaeLayout::blocks() const {
  return {enc_w, enc_b, mu_w, mu_b, logvar_w, logvar_b, dec_w, dec_b, out_w, out_b};
}

// ---------------------------------------------------------------- model

CvaeModel::CvaeModel(CvaeShape shape, std::vector<std::string> labels, std::uint64_t seed)
    : shape_(shape), layout_(shape), labels_(std::move(labels)), params_(layout_.total, 0.0) {
  if (shape_.input == 0 || shape_.hidden == 0 || shape_.latent == 0) {
    throw Error(ErrorCode::OutOfRange, "cvae dimensions must be positive");
  }
  if (shape_.labels != labels_.size()) {
    throw Error(ErrorCode::LengthMismatch, "cvae label count does not match shape");
  }
  Engine engine = make_engine(derive_seed(seed, StreamDomain::CvaeInit));
  for (const auto* b : {&layout_.enc_w, &layout_.mu_w, &layout_.logvar_w, &layout_.dec_w, &layout_.out_w}) {
    const double limit = std::sqrt(6.0 / static_cast<double>(b->rows + b->cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < b->size(); ++i) params_[b->offset + i] = u(engine);
  }
}

std::size_t CvaeModel::label_index(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw Error(ErrorCode::InvalidArgument, "unknown label '" + label + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

namespace {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y[r] = W[r, :cols_dense] . x + W[r, cols_dense + label] + b[r]
void affine_onehot(std::span<const double> p, const CvaeLayout::Block& w, const CvaeLayout::Block& b,
                   std::span<const double> x, std::size_t label, std::span<double> y) {
  const std::size_t dense = x.size();
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = p.data() + w.offset + r * w.cols;
    y[r] = kernels::active().dot(row, x.data(), dense) + row[dense + label] + p[b.offset + r];
  }
}

void affine(std::span<const double> p, const CvaeLayout::Block& w, const CvaeLayout::Block& b,
            std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    y[r] = kernels::active().dot(p.data() + w.offset + r * w.cols, x.data(), w.cols) + p[b.offset + r];
  }
}

// Activations of one forward pass, kept for backprop.
struct Trace {
  std::vector<double> h1, a1, mu, logvar, sigma, z, h2, a2, y;
  explicit Trace(const CvaeShape& s)
      : h1(s.hidden), a1(s.hidden), mu(s.latent), logvar(s.latent), sigma(s.latent), z(s.latent),
        h2(s.hidden), a2(s.hidden), y(s.input) {}
};

}  // namespace

void CvaeModel::encode(std::span<const double> x, std::size_t label, std::span<double> mu,
                       std::span<double> logvar) const {
  std::vector<double> h(shape_.hidden);
  affine_onehot(params_, layout_.enc_w, layout_.enc_b, x, label, h);
  for (double& v : h) v = relu(v);
  affine(params_, layout_.mu_w, layout_.mu_b, h, mu);
  affine(params_, layout_.logvar_w, layout_.logvar_b, h, logvar);
}

void CvaeModel::decode(std::span<const double> z, std::size_t label, std::span<double> out) const {
  std::vector<double> h(shape_.hidden);
  affine_onehot(params_, layout_.dec_w, layout_.dec_b, z, label, h);
  for (double& v : h) v = relu(v);
  affine(params_, layout_.out_w, layout_.out_b, h, out);
  for (double& v : out) v = logistic(v);
}

double kl_standard_normal(std::span<const double> mu, std::span<const double> logvar) {
  double kl = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    kl += mu[j] * mu[j] + std::exp(logvar[j]) - logvar[j] - 1.0;
  }
  return 0.5 * kl;
}

// ---------------------------------------------------------------- loss

ElboResult elbo_loss(const CvaeModel& model, std::span<const std::vector<double>> batch,
                     std::span<const std::size_t> labels, double beta, std::span<const double> noise) {
  const CvaeShape& s = model.shape();
  const CvaeLayout& L = model.layout();
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
  if (labels.size() != batch.size() || noise.size() != batch.size() * s.latent) {
    throw Error(ErrorCode::LengthMismatch, "batch, labels and noise sizes disagree");
  }
  const auto p = model.params();
  ElboResult res;
  res.gradients.assign(L.total, 0.0);
  double* g = res.gradients.data();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Trace t(s);
  std::vector<double> d_out(s.input), d_a2(s.hidden), d_h2(s.hidden), d_z(s.latent), d_mu(s.latent),
      d_lv(s.latent), d_a1(s.hidden), d_h1(s.hidden);

  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const std::vector<double>& x = batch[bi];
    const std::size_t label = labels[bi];
    if (x.size() != s.input) throw Error(ErrorCode::LengthMismatch, "batch row has wrong width");
    if (label >= s.labels) throw Error(ErrorCode::OutOfRange, "label index out of range");
    const double* eps = noise.data() + bi * s.latent;

    // forward
    affine_onehot(p, L.enc_w, L.enc_b, x, label, t.h1);
    for (std::size_t r = 0; r < s.hidden; ++r) t.a1[r] = relu(t.h1[r]);
    affine(p, L.mu_w, L.mu_b, t.a1, t.mu);
    affine(p, L.logvar_w, L.logvar_b, t.a1, t.logvar);
    for (std::size_t j = 0; j < s.latent; ++j) {
      t.sigma[j] = std::exp(0.5 * t.logvar[j]);
      t.z[j] = t.mu[j] + t.sigma[j] * eps[j];
    }
    affine_onehot(p, L.dec_w, L.dec_b, t.z, label, t.h2);
    for (std::size_t r = 0; r < s.hidden; ++r) t.a2[r] = relu(t.h2[r]);
    affine(p, L.out_w, L.out_b, t.a2, t.y);
    double recon = 0.0;
    for (std::size_t i = 0; i < s.input; ++i) {
      t.y[i] = logistic(t.y[i]);
      const double diff = t.y[i] - x[i];
      recon += diff * diff;
    }
    const double kl = kl_standard_normal(t.mu, t.logvar);
    res.reconstruction += recon * inv_b;
    res.kl += kl * inv_b;

    // backward; every gradient carries the 1/B batch mean factor
    std::fill(d_a2.begin(), d_a2.end(), 0.0);
    for (std::size_t i = 0; i < s.input; ++i) {
      d_out[i] = inv_b * 2.0 * (t.y[i] - x[i]) * t.y[i] * (1.0 - t.y[i]);
      const double* row = p.data() + L.out_w.offset + i * s.hidden;
      kernels::active().axpy(d_out[i], t.a2.data(), g + L.out_w.offset + i * s.hidden, s.hidden);
      kernels::active().axpy(d_out[i], row, d_a2.data(), s.hidden);
      g[L.out_b.offset + i] += d_out[i];
    }
    std::fill(d_z.begin(), d_z.end(), 0.0);
    const std::size_t dec_cols = L.dec_w.cols;
    for (std::size_t r = 0; r < s.hidden; ++r) {
      d_h2[r] = t.h2[r] > 0.0 ? d_a2[r] : 0.0;
      if (d_h2[r] == 0.0) continue;
      double* grow = g + L.dec_w.offset + r * dec_cols;
      const double* row = p.data() + L.dec_w.offset + r * dec_cols;
      kernels::active().axpy(d_h2[r], t.z.data(), grow, s.latent);
      grow[s.latent + label] += d_h2[r];
      kernels::active().axpy(d_h2[r], row, d_z.data(), s.latent);
      g[L.dec_b.offset + r] += d_h2[r];
    }
    for (std::size_t j = 0; j < s.latent; ++j) {
      d_mu[j] = d_z[j] + inv_b * beta * t.mu[j];
      d_lv[j] = d_z[j] * eps[j] * 0.5 * t.sigma[j] + inv_b * beta * 0.5 * (t.sigma[j] * t.sigma[j] - 1.0);
    }
    std::fill(d_a1.begin(), d_a1.end(), 0.0);
    for (std::size_t j = 0; j < s.latent; ++j) {
      kernels::active().axpy(d_mu[j], t.a1.data(), g + L.mu_w.offset + j * s.hidden, s.hidden);
      kernels::active().axpy(d_lv[j], t.a1.data(), g + L.logvar_w.offset + j * s.hidden, s.hidden);
      kernels::active().axpy(d_mu[j], p.data() + L.mu_w.offset + j * s.hidden, d_a1.data(), s.hidden);
      kernels::active().axpy(d_lv[j], p.data() + L.logvar_w.offset + j * s.hidden, d_a1.data(), s.hidden);
      g[L.mu_b.offset + j] += d_mu[j];
      g[L.logvar_b.offset + j] += d_lv[j];
    }
    const std::size_t enc_cols = L.enc_w.cols;
    for (std::size_t r = 0; r < s.hidden; ++r) {
      d_h1[r] = t.h1[r] > 0.0 ? d_a1[r] : 0.0;
      if (d_h1[r] == 0.0) continue;
      double* grow = g + L.enc_w.offset + r * enc_cols;
      kernels::active().axpy(d_h1[r], x.data(), grow, s.input);
      grow[s.input + label] += d_h1[r];
      g[L.enc_b.offset + r] += d_h1[r];
    }
  }

  res.loss = res.reconstruction + beta * res.kl;
  if (!std::isfinite(res.loss)) throw Error(ErrorCode::NonFinite, "loss is not finite");
  for (std::size_t i = 0; i < res.gradients.size(); ++i) {
    if (!std::isfinite(res.gradients[i])) {
      throw Error(ErrorCode::NonFinite, "gradient " + std::to_string(i) + " is not finite");
    }
  }
  return res;
}

ElboResult elbo_loss(const CvaeModel& model, std::span<const std::vector<double>> batch,
                     std::span<const std::size_t> labels, double beta, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(batch.size() * model.shape().latent);
  for (double& e : noise) e = normal(rng);
  return elbo_loss(model, batch, labels, beta, noise);
}

// ---------------------------------------------------------------- adam

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::LengthMismatch, "adam shapes disagree");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

// ---------------------------------------------------------------- training

TrainHistory train(CvaeModel& model, const LabeledDataset& dataset, const CvaeTrainConfig& config) {
  TrainHistory history;
  if (config.epochs == 0) return history;
  dataset.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyInput, "cannot train on an empty dataset");
  if (config.batch_size == 0) throw Error(ErrorCode::OutOfRange, "batch size must be >= 1");
  if (dataset.spectra.front().size() != model.shape().input) {
    throw Error(ErrorCode::LengthMismatch, "dataset width does not match model input");
  }

  const std::size_t n = dataset.size();
  std::vector<std::vector<double>> raw(n);
  std::vector<std::size_t> label_idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i].assign(dataset.spectra[i].counts().begin(), dataset.spectra[i].counts().end());
    label_idx[i] = model.label_index(dataset.labels[i]);
  }
  model.scaler() = MinMaxScaler::fit(raw);
  std::vector<std::vector<double>> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = model.scaler().transform(raw[i]);
  raw.clear();

  const double beta = config.beta.value_or(default_beta(model.shape()));
  AdamState state(model.params().size());
  std::vector<std::size_t> order(n);
  std::vector<std::vector<double>> batch;
  std::vector<std::size_t> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Engine shuffle = make_engine(derive_seed(config.seed, StreamDomain::CvaeShuffle, epoch));
    std::shuffle(order.begin(), order.end(), shuffle);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      batch.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(scaled[order[k]]);
        batch_labels.push_back(label_idx[order[k]]);
      }
      Engine noise = make_engine(derive_seed(config.seed, StreamDomain::CvaeNoise, history.steps));
      ElboResult r;
      try {
        r = elbo_loss(model, batch, batch_labels, beta, noise);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFinite) throw;
        throw Error(ErrorCode::NonFinite, "training step " + std::to_string(history.steps) + ": " + e.what());
      }
      adam_step(model.params(), r.gradients, state, config.adam);
      ++history.steps;
      epoch_loss += r.loss * static_cast<double>(stop - start);
    }
    history.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  return history;
}

// ---------------------------------------------------------------- generation

LabeledDataset generate(const CvaeModel& model, const std::string& label, std::size_t count,
                        std::uint64_t seed, const GenerateOptions& options) {
  const std::size_t li = model.label_index(label);
  if (count > 0 && !model.scaler().fitted()) {
    throw Error(ErrorCode::InvalidArgument, "cvae has no fitted scaler; train it first");
  }
  const CvaeShape& s = model.shape();
  LabeledDataset out;
  out.spectra.resize(count);
  out.labels.assign(count, label);
  parallel_for(count, [&](std::size_t i) {
    Engine engine = make_engine(derive_seed(seed, StreamDomain::CvaeGenerate, li, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(s.latent), y(s.input);
    for (double& v : z) v = normal(engine);
    model.decode(z, li, y);
    if (options.noise_sigma > 0.0) {
      std::normal_distribution<double> jitter(0.0, options.noise_sigma);
      for (double& v : y) v += jitter(engine);
    }
    std::vector<double> counts = model.scaler().inverse(y);
    for (double& c : counts) c = std::max(0.0, c);
    out.spectra[i] = Spectrum(std::move(counts));
  });
  out.provenance = {"cvae", seed, "generate", 0.0, 0.0};
  return out;
}

// ---------------------------------------------------------------- persistence

namespace {
constexpr int kCvaeFormatVersion = 1;
}

void save_cvae(const CvaeModel& model, const std::filesystem::path& path) {
  const CvaeShape& s = model.shape();
  json j;
  j["format"] = "pgnaa-cvae";
  j["version"] = kCvaeFormatVersion;
  j["shape"] = {{"input", s.input}, {"hidden", s.hidden}, {"latent", s.latent}, {"labels", s.labels}};
  j["labels"] = model.labels();
  j["scaler"] = {{"min", model.scaler().min()}, {"max", model.scaler().max()}};
  j["params"] = std::vector<double>(model.params().begin(), model.params().end());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump();
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

CvaeModel load_cvae(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "pgnaa-cvae") throw Error(ErrorCode::Config, "not a cvae model file");
  if (j.value("version", 0) != kCvaeFormatVersion) {
    throw Error(ErrorCode::Config, "unsupported cvae model version");
  }
  CvaeShape s;
  s.input = j.at("shape").at("input").get<std::size_t>();
  s.hidden = j.at("shape").at("hidden").get<std::size_t>();
  s.latent = j.at("shape").at("latent").get<std::size_t>();
  s.labels = j.at("shape").at("labels").get<std::size_t>();
  CvaeModel model(s, j.at("labels").get<std::vector<std::string>>(), 0);
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != model.params().size()) throw Error(ErrorCode::LengthMismatch, "parameter count");
  std::copy(params.begin(), params.end(), model.params().begin());
  auto lo = j.at("scaler").at("min").get<std::vector<double>>();
  auto hi = j.at("scaler").at("max").get<std::vector<double>>();
  if (!lo.empty()) {
    if (lo.size() != s.input) throw Error(ErrorCode::LengthMismatch, "scaler width");
    model.scaler() = MinMaxScaler(std::move(lo), std::move(hi));
  }
  return model;
}

}  // namespace pgnaa
