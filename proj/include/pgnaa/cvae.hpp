#pragma once

// Conditional variational autoencoder for class-conditional spectrum
// generation. Single hidden layer encoder and decoder, one-hot label
// concatenated to both inputs, manual backpropagation and Adam.
//
//   encoder: [x ; onehot] -> affine(H) -> relu -> { affine(M) = mu, affine(M) = log var }
//   decoder: [z ; onehot] -> affine(H) -> relu -> affine(N) -> logistic
//
// Inputs are min-max scaled to [0, 1] per channel; the scaler is part of the
// model so generated spectra come back in count units.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgnaa/rng.hpp"
#include "pgnaa/sampling.hpp"

namespace pgnaa {

class MinMaxScaler {
 public:
  MinMaxScaler() = default;
  MinMaxScaler(std::vector<double> min, std::vector<double> max);

  // Throws EmptyInput on an empty row set, LengthMismatch on ragged rows.
  static MinMaxScaler fit(std::span<const std::vector<double>> rows);

  std::size_t size() const noexcept { return min_.size(); }
  bool fitted() const noexcept { return !min_.empty(); }
  const std::vector<double>& min() const noexcept { return min_; }
  const std::vector<double>& max() const noexcept { return max_; }

  // Constant channels (max == min) map to 0 and invert to min.
  std::vector<double> transform(std::span<const double> x) const;
  std::vector<double> inverse(std::span<const double> y) const;

 private:
  std::vector<double> min_;
  std::vector<double> max_;
};

struct CvaeShape {
  std::size_t input = 0;    // N, channels
  std::size_t hidden = 100;  // H
  std::size_t latent = 10;   // M
  std::size_t labels = 0;    // L

  friend bool operator==(const CvaeShape&, const CvaeShape&) = default;
};

// Offsets of each tensor inside the flat parameter vector. Weight matrices
// are row-major with one row per output unit.
struct CvaeLayout {
  struct Block {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const noexcept { return rows * cols; }
  };
  Block enc_w, enc_b, mu_w, mu_b, logvar_w, logvar_b, dec_w, dec_b, out_w, out_b;
  std::size_t total = 0;

  explicit CvaeLayout(const CvaeShape& shape);
  std::vector<Block> blocks() const;
};

class CvaeModel {
 public:
  // Glorot-uniform weights, zero biases.
  CvaeModel(CvaeShape shape, std::vector<std::string> labels, std::uint64_t seed);

  const CvaeShape& shape() const noexcept { return shape_; }
  const CvaeLayout& layout() const noexcept { return layout_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  // Throws InvalidArgument for unknown labels.
  std::size_t label_index(const std::string& label) const;

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  MinMaxScaler& scaler() noexcept { return scaler_; }
  const MinMaxScaler& scaler() const noexcept { return scaler_; }

  void encode(std::span<const double> x, std::size_t label, std::span<double> mu,
              std::span<double> logvar) const;
  // Decoder mean in scaled units, each value in [0, 1].
  void decode(std::span<const double> z, std::size_t label, std::span<double> out) const;

 private:
  CvaeShape shape_;
  CvaeLayout layout_;
  std::vector<std::string> labels_;
  std::vector<double> params_;
  MinMaxScaler scaler_;
};

inline double default_beta(const CvaeShape& shape) {
  return static_cast<double>(shape.input) / static_cast<double>(shape.latent);
}

// KL(N(mu, exp(logvar)) || N(0, I)) = 1/2 sum(mu^2 + exp(logvar) - logvar - 1).
double kl_standard_normal(std::span<const double> mu, std::span<const double> logvar);

struct ElboResult {
  double loss = 0.0;            // reconstruction + beta * kl, batch mean
  double reconstruction = 0.0;  // summed squared error, batch mean
  double kl = 0.0;              // batch mean
  std::vector<double> gradients;
};

// Negative ELBO with squared-error reconstruction over a batch of scaled
// rows. `noise` holds batch.size() * latent standard normal draws used for
// the reparameterisation z = mu + exp(logvar / 2) * eps.
// Throws NonFinite if the loss or any gradient is not finite.
ElboResult elbo_loss(const CvaeModel& model, std::span<const std::vector<double>> batch,
                     std::span<const std::size_t> labels, double beta, std::span<const double> noise);
ElboResult elbo_loss(const CvaeModel& model, std::span<const std::vector<double>> batch,
                     std::span<const std::size_t> labels, double beta, Engine& rng);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;  // steps taken

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update; increments state.t first.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

struct CvaeTrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::optional<double> beta;  // default: input / latent
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> epoch_loss;  // mean loss per epoch
  std::size_t steps = 0;
};

// Fits the scaler on the dataset, then runs epochs * ceil(n / batch) Adam
// steps over shuffled mini-batches. Throws NonFinite naming the failing step.
TrainHistory train(CvaeModel& model, const LabeledDataset& dataset, const CvaeTrainConfig& config);

struct GenerateOptions {
  // Standard deviation of Gaussian noise added to the decoder mean in scaled
  // units. 0 returns the mean.
  double noise_sigma = 0.0;
};

// `count` spectra for `label`, decoded from z ~ N(0, I), inverse-scaled and
// clamped at zero.
LabeledDataset generate(const CvaeModel& model, const std::string& label, std::size_t count,
                        std::uint64_t seed, const GenerateOptions& options = {});

void save_cvae(const CvaeModel& model, const std::filesystem::path& path);
CvaeModel load_cvae(const std::filesystem::path& path);

}  // namespace pgnaa
