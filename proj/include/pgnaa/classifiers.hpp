#pragma once

// Spectrum classifiers behind one fit / predict interface.
//
// Scores are per label in the order of labels(), which is first appearance in
// the training data. MLC, KNN, RNC, LR and SVM maximise their score; Kuiper
// minimises its distance. Ties go to the lowest label index.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnaa/cvae.hpp"
#include "pgnaa/preprocess.hpp"
#include "pgnaa/sampling.hpp"
#include "pgnaa/spectrum.hpp"

namespace pgnaa {

enum class Polarity { Maximize, Minimize };

// Index of the best score under `polarity`; lowest index wins ties.
std::size_t select_best(std::span<const double> scores, Polarity polarity);

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string kind() const = 0;
  virtual void fit(const LabeledDataset& train) = 0;
  virtual std::vector<double> predict_scores(const Spectrum& s) const = 0;
  virtual Polarity polarity() const { return Polarity::Maximize; }
  virtual nlohmann::json to_json() const = 0;

  std::size_t predict_index(const Spectrum& s) const;
  const std::string& predict(const Spectrum& s) const;
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 protected:
  void require_fitted() const;
  // Label of each training row as an index into labels_.
  std::vector<std::size_t> index_labels(const LabeledDataset& train);

  std::vector<std::string> labels_;
};

// ------------------------------------------------------------------ MLC

// sum_i counts[i] * ref_log_probs[i]. Throws LengthMismatch.
double mlc_log_likelihood(const Spectrum& s, std::span<const double> ref_log_probs);

// log((c_i + 1) / sum_j (c_j + 1)).
std::vector<double> add_one_log_probs(const Spectrum& reference);

enum class ReferenceGenerator { Categorical, Cvae };

struct MlcConfig {
  std::size_t n_refs = 500;
  double ref_time_s = 1800.0;
  ReferenceGenerator generator = ReferenceGenerator::Categorical;
  // CVAE generator: spectra per alloy the autoencoder is trained on, and
  // its training settings.
  std::size_t cvae_train_per_alloy = 200;
  CvaeTrainConfig cvae_train;
  std::size_t cvae_hidden = 100;
  std::size_t cvae_latent = 10;
};

// Maximum-likelihood classifier over add-one smoothed references.
//
// The score of a label is the mean log-likelihood over its references. The
// log-likelihood is linear in the reference log-probabilities, so the mean
// equals the log-likelihood under the averaged log-probability vector; the
// model stores that average plus the reference count.
class MlcClassifier : public Classifier {
 public:
  std::string kind() const override { return "mlc"; }
  // Every spectrum of `train` is one reference of its label.
  void fit(const LabeledDataset& train) override;
  std::vector<double> predict_scores(const Spectrum& s) const override;
  nlohmann::json to_json() const override;
  static MlcClassifier from_json(const nlohmann::json& j);

  // Averages make_reference(label_index, j) for j < n_refs without keeping
  // the references in memory.
  void fit_streaming(const std::vector<std::string>& labels, std::size_t n_refs,
                     const std::function<Spectrum(std::size_t, std::size_t)>& make_reference);

  // Per-label channel weights applied to every reference distribution (then
  // renormalized) before the log. Set before fitting.
  void set_reference_weights(std::vector<std::vector<double>> weights_by_label_order,
                             std::vector<std::string> label_order);

  const std::vector<std::vector<double>>& mean_log_probs() const noexcept { return mean_log_probs_; }
  const std::vector<std::size_t>& reference_counts() const noexcept { return n_refs_; }

 private:
  const std::vector<double>* weights_for(const std::string& label) const;

  std::vector<std::vector<double>> mean_log_probs_;
  std::vector<std::size_t> n_refs_;
  std::vector<std::vector<double>> ref_weights_;
  std::vector<std::string> ref_weight_labels_;
};

struct MlcFitOptions {
  MlcConfig config;
  std::uint64_t seed = 0;
  // Applied to each generated reference before smoothing (subset, rebin,
  // unique-peak weights). Identity when empty.
  std::function<Spectrum(const Spectrum&)> transform;
  // Escape-peak band weighting of each alloy's references; the peaks are
  // detected on the transformed long-term spectrum.
  std::optional<BandWeighting> escape_weighting;
  PeakParams peak_params;
  // Calibration of the transformed channel grid (for escape positions).
  std::optional<DetectorProfile> transformed_profile;
  // Reuse an already trained CVAE for the Cvae generator.
  const CvaeModel* cvae = nullptr;
};

// Generates config.n_refs references per alloy at config.ref_time_s and fits.
MlcClassifier mlc_fit(const AlloyLibrary& lib, const MlcFitOptions& options);

// ------------------------------------------------------------------ Kuiper

// V = max(0, max_i(P_i - Q_i)) + max(0, max_i(Q_i - P_i)) over the CDFs.
double kuiper_statistic(const CategoricalDistribution& p, const CategoricalDistribution& q);
double kuiper_statistic(std::span<const double> p, std::span<const double> q);

class KuiperClassifier : public Classifier {
 public:
  std::string kind() const override { return "kuiper"; }
  // Reference distribution per label: the normalized sum of its spectra.
  void fit(const LabeledDataset& train) override;
  // Reference distribution per label: the normalized long-term spectrum.
  void fit_library(const AlloyLibrary& lib,
                   const std::function<Spectrum(const Spectrum&)>& transform = {});
  // Throws ZeroTotal for an empty spectrum.
  std::vector<double> predict_scores(const Spectrum& s) const override;
  Polarity polarity() const override { return Polarity::Minimize; }
  nlohmann::json to_json() const override;
  static KuiperClassifier from_json(const nlohmann::json& j);

 private:
  std::vector<std::vector<double>> references_;  // probabilities
};

// ------------------------------------------------------------------ neighbours

struct KnnParams {
  std::size_t k = 8000;
};

struct RncParams {
  double radius = 500.0;
};

// Brute-force Euclidean neighbour search over dense training rows.
class NeighborsBase : public Classifier {
 public:
  void fit(const LabeledDataset& train) override;
  // Dataset directory the training rows were loaded from; stored instead of
  // the rows when persisting.
  void set_training_manifest(std::filesystem::path p) { manifest_ = std::move(p); }

 protected:
  struct Neighbor {
    double distance;
    std::size_t label;
  };
  std::vector<Neighbor> distances_to(const Spectrum& s) const;
  // Inverse-distance vote; any zero-distance neighbour turns the vote into a
  // count of exact matches.
  std::vector<double> vote(std::span<const Neighbor> neighbors) const;

  std::size_t width_ = 0;
  std::vector<double> rows_;
  std::vector<std::size_t> row_labels_;
  std::filesystem::path manifest_;
};

class KnnClassifier : public NeighborsBase {
 public:
  explicit KnnClassifier(KnnParams params = {}) : params_(params) {}
  std::string kind() const override { return "knn"; }
  void fit(const LabeledDataset& train) override;
  std::vector<double> predict_scores(const Spectrum& s) const override;
  nlohmann::json to_json() const override;
  std::size_t effective_k() const noexcept { return effective_k_; }

 private:
  KnnParams params_;
  std::size_t effective_k_ = 0;
};

class RncClassifier : public NeighborsBase {
 public:
  explicit RncClassifier(RncParams params = {}) : params_(params) {}
  std::string kind() const override { return "rnc"; }
  void fit(const LabeledDataset& train) override;
  // Empty radius ball: one-hot on the most frequent training label.
  std::vector<double> predict_scores(const Spectrum& s) const override;
  nlohmann::json to_json() const override;

 private:
  RncParams params_;
  std::size_t most_frequent_ = 0;
};

// ------------------------------------------------------------------ linear

struct LogisticParams {
  double C = 1.0;
  std::size_t max_iter = 150;
  double tol = 1e-4;  // gradient norm
  bool fit_intercept = true;
};

struct SvmParams {
  double C = 3.0;
  std::size_t max_iter = 100;
  double tol = 1.0;  // objective change
  bool fit_intercept = true;
};

// One-vs-rest affine model; scores are w_c . x + b_c.
class LinearOvrBase : public Classifier {
 public:
  void fit(const LabeledDataset& train) override;
  std::vector<double> predict_scores(const Spectrum& s) const override;

  const std::vector<std::vector<double>>& weights() const noexcept { return weights_; }
  const std::vector<double>& intercepts() const noexcept { return intercepts_; }
  const std::vector<std::size_t>& iterations() const noexcept { return iterations_; }

 protected:
  struct BinaryFit {
    std::vector<double> w;
    double b = 0.0;
    std::size_t iterations = 0;
    double final_metric = 0.0;
  };
  // X is row-major n x d; y in {0, 1}.
  virtual BinaryFit fit_binary(std::span<const double> X, std::size_t n, std::size_t d,
                               std::span<const double> y) const = 0;
  nlohmann::json linear_json() const;
  void load_linear_json(const nlohmann::json& j);

  std::vector<std::vector<double>> weights_;
  std::vector<double> intercepts_;
  std::vector<std::size_t> iterations_;
  std::vector<double> final_metrics_;
};

// L2-regularised logistic regression: mean cross-entropy + ||w||^2 / (2C),
// intercept unpenalised. Full-batch gradient descent on mean-centred rows with
// Armijo backtracking from a Barzilai-Borwein trial step.
class LogisticOvrClassifier : public LinearOvrBase {
 public:
  explicit LogisticOvrClassifier(LogisticParams params = {}) : params_(params) {}
  std::string kind() const override { return "lr"; }
  nlohmann::json to_json() const override;
  static LogisticOvrClassifier from_json(const nlohmann::json& j);
  // Gradient norm of each per-class objective at termination.
  const std::vector<double>& final_gradient_norms() const noexcept { return final_metrics_; }

 protected:
  BinaryFit fit_binary(std::span<const double> X, std::size_t n, std::size_t d,
                       std::span<const double> y) const override;

 private:
  LogisticParams params_;
};

// Linear SVM with squared hinge loss: ||w||^2 / 2 + C sum max(0, 1 - y f)^2,
// epochs of per-sample subgradient steps in a seeded shuffled order. An epoch
// whose objective improvement is below tol ends training and is not applied.
class LinearSvmOvrClassifier : public LinearOvrBase {
 public:
  explicit LinearSvmOvrClassifier(SvmParams params = {}) : params_(params) {}
  std::string kind() const override { return "svm"; }
  nlohmann::json to_json() const override;
  static LinearSvmOvrClassifier from_json(const nlohmann::json& j);
  const std::vector<double>& final_objectives() const noexcept { return final_metrics_; }

 protected:
  BinaryFit fit_binary(std::span<const double> X, std::size_t n, std::size_t d,
                       std::span<const double> y) const override;

 private:
  SvmParams params_;
};

// ------------------------------------------------------------------ factory

struct ClassifierSpec {
  std::string kind = "mlc";  // mlc | kuiper | knn | rnc | lr | svm
  MlcConfig mlc;
  KnnParams knn;
  RncParams rnc;
  LogisticParams lr;
  SvmParams svm;
};

ClassifierSpec classifier_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClassifierSpec& spec);

// Untrained classifier of spec.kind. Throws Config on unknown kinds.
std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec);

// Versioned model files. KNN/RNC files reference their training dataset
// directory, which is loaded again on read.
void save_classifier(const Classifier& c, const std::filesystem::path& path);
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path);

}  // namespace pgnaa
