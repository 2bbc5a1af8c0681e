#include "pgnaa/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <random>

#include "pgnaa/error.hpp"
#include "pgnaa/io.hpp"
#include "pgnaa/kernels.hpp"
#include "pgnaa/log.hpp"
#include "pgnaa/parallel.hpp"

namespace pgnaa {

using json = nlohmann::json;

namespace {
constexpr int kClassifierFormatVersion = 1;

json header(const Classifier& c) {
  return {{"format", "pgnaa-classifier"}, {"version", kClassifierFormatVersion}, {"kind", c.kind()},
          {"labels", c.labels()}};
}
}  // namespace

std::size_t select_best(std::span<const double> scores, Polarity polarity) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const bool better = polarity == Polarity::Maximize ? scores[i] > scores[best] : scores[i] < scores[best];
    if (better) best = i;
  }
  return best;
}

std::size_t Classifier::predict_index(const Spectrum& s) const {
  return select_best(predict_scores(s), polarity());
}

const std::string& Classifier::predict(const Spectrum& s) const { return labels_[predict_index(s)]; }

void Classifier::require_fitted() const {
  if (labels_.empty()) throw Error(ErrorCode::InvalidArgument, kind() + " classifier is not fitted");
}

std::vector<std::size_t> Classifier::index_labels(const LabeledDataset& train) {
  train.validate();
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, kind() + ": empty training set");
  labels_ = train.distinct_labels();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels_.size(); ++i) index[labels_[i]] = i;
  std::vector<std::size_t> out(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) out[i] = index.at(train.labels[i]);
  return out;
}

// ====================================================================== MLC

double mlc_log_likelihood(const Spectrum& s, std::span<const double> ref_log_probs) {
  if (s.size() != ref_log_probs.size()) {
    throw Error(ErrorCode::LengthMismatch, "spectrum has " + std::to_string(s.size()) +
                                               " channels, reference has " + std::to_string(ref_log_probs.size()));
  }
  return kernels::dot(s.counts(), ref_log_probs);
}

std::vector<double> add_one_log_probs(const Spectrum& reference) {
  const double total = reference.total() + static_cast<double>(reference.size());
  const double log_total = std::log(total);
  std::vector<double> out(reference.size());
  for (std::size_t i = 0; i < reference.size(); ++i) out[i] = std::log(reference[i] + 1.0) - log_total;
  return out;
}

namespace {

// Adds the (optionally weighted) add-one log-probabilities of `ref` to `sum`.
void accumulate_reference(std::vector<double>& sum, const Spectrum& ref, const std::vector<double>* weights) {
  if (sum.empty()) sum.assign(ref.size(), 0.0);
  if (ref.size() != sum.size()) throw Error(ErrorCode::LengthMismatch, "references differ in channel count");
  if (weights == nullptr || weights->empty()) {
    const std::vector<double> lp = add_one_log_probs(ref);
    kernels::axpy(1.0, lp, sum);
    return;
  }
  const CategoricalDistribution weighted = apply_channel_weights(smooth_add_one(ref), *weights);
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += std::log(weighted[i]);
}

}  // namespace

void MlcClassifier::set_reference_weights(std::vector<std::vector<double>> weights, std::vector<std::string> order) {
  if (weights.size() != order.size()) throw Error(ErrorCode::LengthMismatch, "one weight vector per label");
  ref_weights_ = std::move(weights);
  ref_weight_labels_ = std::move(order);
}

const std::vector<double>* MlcClassifier::weights_for(const std::string& label) const {
  const auto it = std::find(ref_weight_labels_.begin(), ref_weight_labels_.end(), label);
  if (it == ref_weight_labels_.end()) return nullptr;
  return &ref_weights_[static_cast<std::size_t>(it - ref_weight_labels_.begin())];
}

void MlcClassifier::fit(const LabeledDataset& train) {
  const std::vector<std::size_t> idx = index_labels(train);
  mean_log_probs_.assign(labels_.size(), {});
  n_refs_.assign(labels_.size(), 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    accumulate_reference(mean_log_probs_[idx[i]], train.spectra[i], weights_for(labels_[idx[i]]));
    ++n_refs_[idx[i]];
  }
  for (std::size_t l = 0; l < labels_.size(); ++l) {
    const double inv = 1.0 / static_cast<double>(n_refs_[l]);
    for (double& v : mean_log_probs_[l]) v *= inv;
  }
}

void MlcClassifier::fit_streaming(const std::vector<std::string>& labels, std::size_t n_refs,
                                  const std::function<Spectrum(std::size_t, std::size_t)>& make_reference) {
  if (labels.empty()) throw Error(ErrorCode::EmptyTrainingSet, "mlc: no labels");
  if (n_refs < 1) throw Error(ErrorCode::OutOfRange, "n_refs must be >= 1");
  std::vector<std::vector<double>> sums(labels.size());
  parallel_for(labels.size(), [&](std::size_t l) {
    const std::vector<double>* w = weights_for(labels[l]);
    for (std::size_t j = 0; j < n_refs; ++j) accumulate_reference(sums[l], make_reference(l, j), w);
    const double inv = 1.0 / static_cast<double>(n_refs);
    for (double& v : sums[l]) v *= inv;
  });
  for (const auto& s : sums) {
    if (s.size() != sums.front().size()) throw Error(ErrorCode::LengthMismatch, "references differ in channel count");
  }
  labels_ = labels;
  mean_log_probs_ = std::move(sums);
  n_refs_.assign(labels.size(), n_refs);
}

std::vector<double> MlcClassifier::predict_scores(const Spectrum& s) const {
  require_fitted();
  std::vector<double> scores(labels_.size());
  for (std::size_t l = 0; l < labels_.size(); ++l) scores[l] = mlc_log_likelihood(s, mean_log_probs_[l]);
  return scores;
}

json MlcClassifier::to_json() const {
  json j = header(*this);
  j["reference_counts"] = n_refs_;
  j["mean_log_probs"] = mean_log_probs_;
  return j;
}

MlcClassifier MlcClassifier::from_json(const json& j) {
  MlcClassifier m;
  m.labels_ = j.at("labels").get<std::vector<std::string>>();
  m.n_refs_ = j.at("reference_counts").get<std::vector<std::size_t>>();
  m.mean_log_probs_ = j.at("mean_log_probs").get<std::vector<std::vector<double>>>();
  if (m.mean_log_probs_.size() != m.labels_.size() || m.n_refs_.size() != m.labels_.size()) {
    throw Error(ErrorCode::LengthMismatch, "mlc model arrays do not match labels");
  }
  return m;
}

MlcClassifier mlc_fit(const AlloyLibrary& lib, const MlcFitOptions& options) {
  lib.validate();
  const MlcConfig& cfg = options.config;
  const auto transform = [&](Spectrum s) { return options.transform ? options.transform(s) : s; };
  const DetectorProfile profile = options.transformed_profile.value_or(lib.detector);
  const std::vector<std::string> labels = lib.labels();

  MlcClassifier model;
  if (options.escape_weighting) {
    std::vector<std::vector<double>> weights;
    for (const auto& e : lib.entries) {
      const Spectrum lt = transform(e.long_term);
      const PeakSet peaks = detect_peaks(lt, options.peak_params, profile.calibration);
      weights.push_back(band_weights(lt.size(), escape_peak_channels(peaks, profile), *options.escape_weighting));
    }
    model.set_reference_weights(std::move(weights), labels);
  }

  const std::uint64_t ref_seed = derive_seed(options.seed, StreamDomain::Reference);
  TrainingSetRequest req;
  req.measurement_time_s = cfg.ref_time_s;
  req.seed = ref_seed;
  req.mode = SampleMode::Train;

  if (cfg.generator == ReferenceGenerator::Categorical) {
    const TrainingSetSampler sampler(lib, req);
    model.fit_streaming(labels, cfg.n_refs,
                        [&](std::size_t a, std::size_t j) { return transform(sampler.sample(a, j)); });
    return model;
  }

  std::optional<CvaeModel> owned;
  const CvaeModel* cvae = options.cvae;
  if (cvae == nullptr) {
    req.n_per_alloy = cfg.cvae_train_per_alloy;
    const LabeledDataset train_set = build_training_set(lib, req);
    const CvaeShape shape{lib.detector.n_channels, cfg.cvae_hidden, cfg.cvae_latent, lib.size()};
    owned.emplace(shape, labels, derive_seed(ref_seed, StreamDomain::CvaeInit));
    CvaeTrainConfig tc = cfg.cvae_train;
    tc.seed = derive_seed(ref_seed, StreamDomain::CvaeShuffle);
    train(*owned, train_set, tc);
    cvae = &*owned;
  }
  const std::uint64_t gen_seed = derive_seed(ref_seed, StreamDomain::CvaeGenerate);
  std::vector<LabeledDataset> generated(labels.size());
  for (std::size_t a = 0; a < labels.size(); ++a) generated[a] = generate(*cvae, labels[a], cfg.n_refs, gen_seed);
  model.fit_streaming(labels, cfg.n_refs,
                      [&](std::size_t a, std::size_t j) { return transform(generated[a].spectra[j]); });
  return model;
}

// ====================================================================== Kuiper

double kuiper_statistic(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::LengthMismatch, "kuiper inputs differ in length");
  double cp = 0.0, cq = 0.0, d_plus = 0.0, d_minus = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp += p[i];
    cq += q[i];
    d_plus = std::max(d_plus, cp - cq);
    d_minus = std::max(d_minus, cq - cp);
  }
  return d_plus + d_minus;
}

double kuiper_statistic(const CategoricalDistribution& p, const CategoricalDistribution& q) {
  return kuiper_statistic(p.probs(), q.probs());
}

void KuiperClassifier::fit(const LabeledDataset& train) {
  const std::vector<std::size_t> idx = index_labels(train);
  std::vector<std::vector<double>> sums(labels_.size(), std::vector<double>(train.spectra.front().size(), 0.0));
  for (std::size_t i = 0; i < train.size(); ++i) kernels::axpy(1.0, train.spectra[i].counts(), sums[idx[i]]);
  references_.clear();
  for (auto& s : sums) {
    const CategoricalDistribution d = normalize(Spectrum(std::move(s)));
    references_.emplace_back(d.probs().begin(), d.probs().end());
  }
}

void KuiperClassifier::fit_library(const AlloyLibrary& lib, const std::function<Spectrum(const Spectrum&)>& transform) {
  lib.validate();
  labels_ = lib.labels();
  references_.clear();
  for (const auto& e : lib.entries) {
    const CategoricalDistribution d = normalize(transform ? transform(e.long_term) : e.long_term);
    references_.emplace_back(d.probs().begin(), d.probs().end());
  }
}

std::vector<double> KuiperClassifier::predict_scores(const Spectrum& s) const {
  require_fitted();
  const CategoricalDistribution d = normalize(s);
  std::vector<double> scores(references_.size());
  for (std::size_t l = 0; l < references_.size(); ++l) scores[l] = kuiper_statistic(d.probs(), references_[l]);
  return scores;
}

json KuiperClassifier::to_json() const {
  json j = header(*this);
  j["references"] = references_;
  return j;
}

KuiperClassifier KuiperClassifier::from_json(const json& j) {
  KuiperClassifier k;
  k.labels_ = j.at("labels").get<std::vector<std::string>>();
  k.references_ = j.at("references").get<std::vector<std::vector<double>>>();
  if (k.references_.size() != k.labels_.size()) throw Error(ErrorCode::LengthMismatch, "kuiper references");
  return k;
}

// ====================================================================== neighbours

void NeighborsBase::fit(const LabeledDataset& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, kind() + ": empty training set");
  row_labels_ = index_labels(train);
  width_ = train.spectra.front().size();
  rows_.resize(train.size() * width_);
  for (std::size_t i = 0; i < train.size(); ++i) {
    std::copy(train.spectra[i].counts().begin(), train.spectra[i].counts().end(),
              rows_.begin() + static_cast<std::ptrdiff_t>(i * width_));
  }
}

std::vector<NeighborsBase::Neighbor> NeighborsBase::distances_to(const Spectrum& s) const {
  require_fitted();
  if (s.size() != width_) throw Error(ErrorCode::LengthMismatch, kind() + ": spectrum width differs from training");
  const auto& k = kernels::active();
  std::vector<Neighbor> out(row_labels_.size());
  for (std::size_t i = 0; i < row_labels_.size(); ++i) {
    out[i] = {std::sqrt(k.squared_distance(s.counts().data(), rows_.data() + i * width_, width_)), row_labels_[i]};
  }
  return out;
}

std::vector<double> NeighborsBase::vote(std::span<const Neighbor> neighbors) const {
  std::vector<double> scores(labels_.size(), 0.0);
  const bool exact = std::any_of(neighbors.begin(), neighbors.end(), [](const Neighbor& n) { return n.distance == 0.0; });
  for (const Neighbor& n : neighbors) {
    if (exact) {
      if (n.distance == 0.0) scores[n.label] += 1.0;
    } else {
      scores[n.label] += 1.0 / n.distance;
    }
  }
  return scores;
}

void KnnClassifier::fit(const LabeledDataset& train) {
  if (params_.k < 1) throw Error(ErrorCode::OutOfRange, "knn: k must be >= 1");
  NeighborsBase::fit(train);
  effective_k_ = std::min(params_.k, row_labels_.size());
  if (effective_k_ < params_.k) {
    log_warning("knn: k=" + std::to_string(params_.k) + " exceeds the " + std::to_string(row_labels_.size()) +
                " training spectra; using k=" + std::to_string(effective_k_));
  }
}

std::vector<double> KnnClassifier::predict_scores(const Spectrum& s) const {
  std::vector<Neighbor> all = distances_to(s);
  // Order by (distance, label) so the chosen set does not depend on the
  // order of the training rows.
  const auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.label < b.label);
  };
  const auto kth = all.begin() + static_cast<std::ptrdiff_t>(effective_k_);
  if (kth != all.end()) std::nth_element(all.begin(), kth - 1, all.end(), closer);
  return vote(std::span<const Neighbor>(all.data(), effective_k_));
}

json KnnClassifier::to_json() const {
  if (manifest_.empty()) throw Error(ErrorCode::Config, "knn: persisting needs the training dataset directory");
  json j = header(*this);
  j["k"] = params_.k;
  j["training_manifest"] = manifest_.string();
  return j;
}

void RncClassifier::fit(const LabeledDataset& train) {
  if (!(params_.radius >= 0.0)) throw Error(ErrorCode::OutOfRange, "rnc: radius must be >= 0");
  NeighborsBase::fit(train);
  std::vector<std::size_t> counts(labels_.size(), 0);
  for (std::size_t l : row_labels_) ++counts[l];
  most_frequent_ = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<double> RncClassifier::predict_scores(const Spectrum& s) const {
  std::vector<Neighbor> all = distances_to(s);
  std::erase_if(all, [&](const Neighbor& n) { return n.distance > params_.radius; });
  if (all.empty()) {
    std::vector<double> scores(labels_.size(), 0.0);
    scores[most_frequent_] = 1.0;
    return scores;
  }
  return vote(all);
}

json RncClassifier::to_json() const {
  if (manifest_.empty()) throw Error(ErrorCode::Config, "rnc: persisting needs the training dataset directory");
  json j = header(*this);
  j["radius"] = params_.radius;
  j["training_manifest"] = manifest_.string();
  return j;
}

// ====================================================================== linear

void LinearOvrBase::fit(const LabeledDataset& train) {
  const std::vector<std::size_t> idx = index_labels(train);
  if (labels_.size() < 2) {
    const std::string only = labels_.front();
    labels_.clear();
    throw Error(ErrorCode::SingleClass, kind() + ": training set has only label '" + only + "'");
  }
  const std::size_t n = train.size();
  const std::size_t d = train.spectra.front().size();
  std::vector<double> X(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(train.spectra[i].counts().begin(), train.spectra[i].counts().end(),
              X.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const std::size_t n_classes = labels_.size();
  std::vector<BinaryFit> fits(n_classes);
  parallel_for(n_classes, [&](std::size_t c) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = idx[i] == c ? 1.0 : 0.0;
    fits[c] = fit_binary(X, n, d, y);
  });
  weights_.clear();
  intercepts_.clear();
  iterations_.clear();
  final_metrics_.clear();
  for (auto& f : fits) {
    weights_.push_back(std::move(f.w));
    intercepts_.push_back(f.b);
    iterations_.push_back(f.iterations);
    final_metrics_.push_back(f.final_metric);
  }
}

std::vector<double> LinearOvrBase::predict_scores(const Spectrum& s) const {
  require_fitted();
  std::vector<double> scores(labels_.size());
  for (std::size_t c = 0; c < labels_.size(); ++c) {
    if (s.size() != weights_[c].size()) throw Error(ErrorCode::LengthMismatch, kind() + ": spectrum width");
    scores[c] = kernels::dot(s.counts(), weights_[c]) + intercepts_[c];
  }
  return scores;
}

json LinearOvrBase::linear_json() const {
  json j = header(*this);
  j["weights"] = weights_;
  j["intercepts"] = intercepts_;
  j["iterations"] = iterations_;
  return j;
}

void LinearOvrBase::load_linear_json(const json& j) {
  labels_ = j.at("labels").get<std::vector<std::string>>();
  weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
  intercepts_ = j.at("intercepts").get<std::vector<double>>();
  iterations_ = j.value("iterations", std::vector<std::size_t>(labels_.size(), 0));
  if (weights_.size() != labels_.size() || intercepts_.size() != labels_.size()) {
    throw Error(ErrorCode::LengthMismatch, kind() + ": weight arrays do not match labels");
  }
}

namespace {

// z = X w + b
void linear_response(std::span<const double> X, std::size_t n, std::size_t d, std::span<const double> w, double b,
                     std::span<double> z) {
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < n; ++i) z[i] = k.dot(X.data() + i * d, w.data(), d) + b;
}

// g += X^T r
void accumulate_transpose(std::span<const double> X, std::size_t n, std::size_t d, std::span<const double> r,
                          std::span<double> g) {
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] != 0.0) k.axpy(r[i], X.data() + i * d, g.data(), d);
  }
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

}  // namespace

LinearOvrBase::BinaryFit LogisticOvrClassifier::fit_binary(std::span<const double> X, std::size_t n, std::size_t d,
                                                           std::span<const double> y) const {
  if (!(params_.C > 0.0)) throw Error(ErrorCode::OutOfRange, "lr: C must be > 0");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda = 1.0 / params_.C;
  // Descent runs in centred coordinates z = w . (x - mu) + c with c = b + w . mu,
  // which removes the coupling between the weights and the unpenalised
  // intercept. The termination test uses the gradient in the original
  // coordinates: d/dw = gw + mu * gc, d/db = gc.
  std::vector<double> mu(d, 0.0);
  if (params_.fit_intercept) {
    for (std::size_t i = 0; i < n; ++i) kernels::axpy(inv_n, X.subspan(i * d, d), mu);
  }
  BinaryFit fit;
  fit.w.assign(d, 0.0);
  double c = 0.0;
  std::vector<double> z(n, 0.0), r(n), gw(d), xd(n), z_new(n), gw_prev(d), orig(d);
  double w_sq = 0.0;

  const auto data_loss = [&](std::span<const double> zz) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += softplus(zz[i]) - y[i] * zz[i];
    return acc * inv_n;
  };
  double gc = 0.0;
  double g_sq = 0.0;  // squared norm of the centred gradient
  const auto gradient = [&] {
    for (std::size_t i = 0; i < n; ++i) r[i] = (sigmoid(z[i]) - y[i]) * inv_n;
    for (std::size_t j = 0; j < d; ++j) gw[j] = lambda * fit.w[j];
    accumulate_transpose(X, n, d, r, gw);
    const double r_sum = std::accumulate(r.begin(), r.end(), 0.0);
    if (params_.fit_intercept) kernels::axpy(-r_sum, mu, gw);
    gc = params_.fit_intercept ? r_sum : 0.0;
    g_sq = kernels::dot(gw, gw) + gc * gc;
    orig = gw;
    kernels::axpy(gc, mu, orig);
    return std::sqrt(kernels::dot(orig, orig) + gc * gc);
  };

  double f = data_loss(z) + 0.5 * lambda * w_sq;
  double gnorm = gradient();
  double step = 1.0;
  while (fit.iterations < params_.max_iter && gnorm >= params_.tol) {
    // direction = -gradient
    linear_response(X, n, d, gw, gc - kernels::dot(gw, mu), xd);
    const double w_dot_g = kernels::dot(fit.w, gw);
    const double g_sq_w = kernels::dot(gw, gw);
    double t = step;
    double f_new = f;
    bool accepted = false;
    for (int h = 0; h < kMaxHalvings; ++h) {
      for (std::size_t i = 0; i < n; ++i) z_new[i] = z[i] - t * xd[i];
      const double w_sq_new = w_sq - 2.0 * t * w_dot_g + t * t * g_sq_w;
      f_new = data_loss(z_new) + 0.5 * lambda * w_sq_new;
      if (f_new <= f - kArmijo * t * g_sq) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    kernels::axpy(-t, gw, fit.w);
    c -= t * gc;
    z.swap(z_new);
    w_sq = kernels::dot(fit.w, fit.w);
    f = f_new;
    ++fit.iterations;
    gw_prev = gw;
    const double gc_prev = gc;
    gnorm = gradient();
    // Barzilai-Borwein trial step for the next search: s = -t g_prev,
    // s . s / s . (g - g_prev).
    double curv = 0.0;
    for (std::size_t j = 0; j < d; ++j) curv += gw_prev[j] * (gw[j] - gw_prev[j]);
    curv = -t * (curv + gc_prev * (gc - gc_prev));
    const double s_sq = t * t * (kernels::dot(gw_prev, gw_prev) + gc_prev * gc_prev);
    step = curv > 0.0 ? std::clamp(s_sq / curv, 1e-10, 1e10) : std::min(t * 2.0, 1e6);
  }
  fit.b = c - kernels::dot(fit.w, mu);
  fit.final_metric = gnorm;
  return fit;
}

json LogisticOvrClassifier::to_json() const {
  json j = linear_json();
  j["C"] = params_.C;
  j["max_iter"] = params_.max_iter;
  j["tol"] = params_.tol;
  j["final_gradient_norms"] = final_metrics_;
  return j;
}

LogisticOvrClassifier LogisticOvrClassifier::from_json(const json& j) {
  LogisticParams p;
  p.C = j.value("C", p.C);
  p.max_iter = j.value("max_iter", p.max_iter);
  p.tol = j.value("tol", p.tol);
  LogisticOvrClassifier c(p);
  c.load_linear_json(j);
  return c;
}

LinearOvrBase::BinaryFit LinearSvmOvrClassifier::fit_binary(std::span<const double> X, std::size_t n, std::size_t d,
                                                            std::span<const double> y01) const {
  if (!(params_.C > 0.0)) throw Error(ErrorCode::OutOfRange, "svm: C must be > 0");
  const double C = params_.C;
  const double bias_sq = params_.fit_intercept ? 1.0 : 0.0;
  // Steps run on centred rows x - mu; the unpenalised intercept absorbs the
  // shift, so the objective is unchanged.
  std::vector<double> mu(d, 0.0);
  if (params_.fit_intercept) {
    for (std::size_t i = 0; i < n; ++i) kernels::axpy(1.0 / static_cast<double>(n), X.subspan(i * d, d), mu);
  }
  const double mu_sq = kernels::dot(mu, mu);
  std::vector<double> y(n), x_sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = y01[i] > 0.5 ? 1.0 : -1.0;
    const auto xi = X.subspan(i * d, d);
    x_sq[i] = kernels::dot(xi, xi) - 2.0 * kernels::dot(xi, mu) + mu_sq;
  }

  BinaryFit fit;
  fit.w.assign(d, 0.0);
  std::vector<double> z(n);
  const auto objective = [&](const std::vector<double>& w, double b) {
    linear_response(X, n, d, w, b, z);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = 1.0 - y[i] * z[i];
      if (m > 0.0) acc += m * m;
    }
    return 0.5 * kernels::dot(w, w) + C * acc;
  };

  // One epoch is a pass of per-sample subgradient steps over a shuffled
  // order. The step minimises the sample's squared hinge along its gradient.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(0x5356u);
  const double inv_n = 1.0 / static_cast<double>(n);
  double obj = objective(fit.w, fit.b);
  std::vector<double> w_next;
  while (fit.iterations < params_.max_iter) {
    w_next = fit.w;
    // Centred intercept: f = w . (x - mu) + c.
    double c_next = fit.b + kernels::dot(fit.w, mu);
    std::shuffle(order.begin(), order.end(), rng);
    for (const std::size_t i : order) {
      const auto xi = X.subspan(i * d, d);
      const double f = kernels::dot(w_next, xi) - kernels::dot(w_next, mu) + c_next;
      const double m = 1.0 - y[i] * f;
      const double eta = 1.0 / (2.0 * C * (x_sq[i] + bias_sq) + inv_n);
      const double shrink = 1.0 - eta * inv_n;
      for (double& v : w_next) v *= shrink;
      if (m > 0.0) {
        const double g = 2.0 * C * m * y[i] * eta;
        kernels::axpy(g, xi, w_next);
        kernels::axpy(-g, mu, w_next);
        if (params_.fit_intercept) c_next += g;
      }
    }
    const double b_next = c_next - kernels::dot(w_next, mu);
    const double obj_next = objective(w_next, b_next);
    if (!(obj - obj_next >= params_.tol)) break;
    fit.w.swap(w_next);
    fit.b = b_next;
    obj = obj_next;
    ++fit.iterations;
  }
  fit.final_metric = obj;
  return fit;
}

json LinearSvmOvrClassifier::to_json() const {
  json j = linear_json();
  j["C"] = params_.C;
  j["max_iter"] = params_.max_iter;
  j["tol"] = params_.tol;
  return j;
}

LinearSvmOvrClassifier LinearSvmOvrClassifier::from_json(const json& j) {
  SvmParams p;
  p.C = j.value("C", p.C);
  p.max_iter = j.value("max_iter", p.max_iter);
  p.tol = j.value("tol", p.tol);
  LinearSvmOvrClassifier c(p);
  c.load_linear_json(j);
  return c;
}

// ====================================================================== factory

ClassifierSpec classifier_spec_from_json(const json& j) {
  ClassifierSpec s;
  try {
    if (j.is_string()) {
      s.kind = j.get<std::string>();
    } else {
      s.kind = j.value("kind", s.kind);
      s.mlc.n_refs = j.value("n_refs", s.mlc.n_refs);
      s.mlc.ref_time_s = j.value("ref_time_s", s.mlc.ref_time_s);
      const std::string gen = j.value("generator", std::string("categorical"));
      if (gen == "categorical") {
        s.mlc.generator = ReferenceGenerator::Categorical;
      } else if (gen == "cvae") {
        s.mlc.generator = ReferenceGenerator::Cvae;
      } else {
        throw Error(ErrorCode::Config, "unknown generator '" + gen + "'");
      }
      s.mlc.cvae_train_per_alloy = j.value("cvae_train_per_alloy", s.mlc.cvae_train_per_alloy);
      s.mlc.cvae_train.epochs = j.value("cvae_epochs", s.mlc.cvae_train.epochs);
      s.mlc.cvae_train.batch_size = j.value("cvae_batch_size", s.mlc.cvae_train.batch_size);
      s.mlc.cvae_train.adam.learning_rate = j.value("cvae_learning_rate", s.mlc.cvae_train.adam.learning_rate);
      s.mlc.cvae_hidden = j.value("cvae_hidden", s.mlc.cvae_hidden);
      s.mlc.cvae_latent = j.value("cvae_latent", s.mlc.cvae_latent);
      s.knn.k = j.value("k", s.knn.k);
      s.rnc.radius = j.value("radius", s.rnc.radius);
      if (s.kind == "lr") {
        s.lr.C = j.value("C", s.lr.C);
        s.lr.max_iter = j.value("max_iter", s.lr.max_iter);
        s.lr.tol = j.value("tol", s.lr.tol);
      }
      if (s.kind == "svm") {
        s.svm.C = j.value("C", s.svm.C);
        s.svm.max_iter = j.value("max_iter", s.svm.max_iter);
        s.svm.tol = j.value("tol", s.svm.tol);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("classifier spec: ") + e.what());
  }
  static const std::vector<std::string> kinds{"mlc", "kuiper", "knn", "rnc", "lr", "svm"};
  if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end()) {
    throw Error(ErrorCode::Config, "unknown classifier '" + s.kind + "'");
  }
  return s;
}

json to_json(const ClassifierSpec& s) {
  json j = {{"kind", s.kind}};
  if (s.kind == "mlc") {
    j["n_refs"] = s.mlc.n_refs;
    j["ref_time_s"] = s.mlc.ref_time_s;
    j["generator"] = s.mlc.generator == ReferenceGenerator::Cvae ? "cvae" : "categorical";
    if (s.mlc.generator == ReferenceGenerator::Cvae) {
      j["cvae_train_per_alloy"] = s.mlc.cvae_train_per_alloy;
      j["cvae_epochs"] = s.mlc.cvae_train.epochs;
      j["cvae_batch_size"] = s.mlc.cvae_train.batch_size;
      j["cvae_learning_rate"] = s.mlc.cvae_train.adam.learning_rate;
      j["cvae_hidden"] = s.mlc.cvae_hidden;
      j["cvae_latent"] = s.mlc.cvae_latent;
    }
  } else if (s.kind == "knn") {
    j["k"] = s.knn.k;
  } else if (s.kind == "rnc") {
    j["radius"] = s.rnc.radius;
  } else if (s.kind == "lr") {
    j["C"] = s.lr.C;
    j["max_iter"] = s.lr.max_iter;
    j["tol"] = s.lr.tol;
  } else if (s.kind == "svm") {
    j["C"] = s.svm.C;
    j["max_iter"] = s.svm.max_iter;
    j["tol"] = s.svm.tol;
  }
  return j;
}

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
  if (spec.kind == "mlc") return std::make_unique<MlcClassifier>();
  if (spec.kind == "kuiper") return std::make_unique<KuiperClassifier>();
  if (spec.kind == "knn") return std::make_unique<KnnClassifier>(spec.knn);
  if (spec.kind == "rnc") return std::make_unique<RncClassifier>(spec.rnc);
  if (spec.kind == "lr") return std::make_unique<LogisticOvrClassifier>(spec.lr);
  if (spec.kind == "svm") return std::make_unique<LinearSvmOvrClassifier>(spec.svm);
  throw Error(ErrorCode::Config, "unknown classifier '" + spec.kind + "'");
}

void save_classifier(const Classifier& c, const std::filesystem::path& path) { write_json_file(path, c.to_json()); }

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (j.value("format", "") != "pgnaa-classifier") throw Error(ErrorCode::Config, path.string() + ": not a model");
  if (j.value("version", 0) != kClassifierFormatVersion) {
    throw Error(ErrorCode::Config, path.string() + ": unsupported model version");
  }
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "mlc") return std::make_unique<MlcClassifier>(MlcClassifier::from_json(j));
    if (kind == "kuiper") return std::make_unique<KuiperClassifier>(KuiperClassifier::from_json(j));
    if (kind == "lr") return std::make_unique<LogisticOvrClassifier>(LogisticOvrClassifier::from_json(j));
    if (kind == "svm") return std::make_unique<LinearSvmOvrClassifier>(LinearSvmOvrClassifier::from_json(j));
    if (kind == "knn" || kind == "rnc") {
      const std::filesystem::path manifest = j.at("training_manifest").get<std::string>();
      const LabeledDataset train = load_dataset(manifest);
      std::unique_ptr<NeighborsBase> c;
      if (kind == "knn") {
        c = std::make_unique<KnnClassifier>(KnnParams{j.value("k", std::size_t{8000})});
      } else {
        c = std::make_unique<RncClassifier>(RncParams{j.value("radius", 500.0)});
      }
      c->fit(train);
      c->set_training_manifest(manifest);
      if (c->labels() != j.at("labels").get<std::vector<std::string>>()) {
        throw Error(ErrorCode::Config, path.string() + ": training data labels changed since the model was saved");
      }
      return c;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
  throw Error(ErrorCode::Config, "unknown classifier kind '" + kind + "'");
}

}  // namespace pgnaa
