#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uwt/features/features.hpp"
#include "uwt/sim/rng.hpp"

namespace uwt {

struct ScorerConfig {
  std::size_t layers{4};
  std::size_t model_dim{128};
  std::size_t heads{4};
  std::size_t ff_dim{896};
  std::size_t input_dim{kFeatureDim};
  std::size_t seq_len{kSequenceLen};

  std::size_t head_dim() const { return model_dim / heads; }
  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const ScorerConfig&) const = default;
};

/// A named slice of the flat parameter vector, stored row-major (out x in for
/// weight matrices).
struct ParamGroup {
  std::string name;
  std::size_t offset{0};
  std::size_t rows{0};
  std::size_t cols{0};

  std::size_t size() const { return rows * cols; }
};

std::vector<ParamGroup> parameter_layout(const ScorerConfig& config);

/// Per-feature affine standardization applied before the input projection.
/// Not trained; fitted on the training set.
struct Standardizer {
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> scale{1, 1, 1, 1, 1, 1, 1};
};

/// Value returned for a sequence with no observed intervals yet.
inline constexpr double kColdStartScore = 0.8;

struct ScorerModel {
  ScorerConfig config;
  Standardizer standardizer;
  std::vector<double> params;

  static ScorerModel zeros(const ScorerConfig& config);
  static ScorerModel initialized(const ScorerConfig& config, RngStream& rng);
};

void save_model(const ScorerModel& model, const std::filesystem::path& path);
ScorerModel load_model(const std::filesystem::path& path);

/// One training or scoring example: the valid (unpadded) rows of a sequence,
/// oldest first, raw feature units.
template <typename T>
struct SeqInput {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x;
  T target{1};  // trustworthiness label: 1 benign, 0 compromised
};

/// Pre-norm transformer encoder with masked mean pooling and a logistic head.
/// Padded positions never enter the computation: the valid rows of a sequence
/// of length L sit at positions seq_len-L .. seq_len-1 and attend only to each
/// other, which is what a padding mask would enforce.
template <typename T>
class Scorer {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  explicit Scorer(const ScorerModel& model);
  Scorer(ScorerConfig config, Standardizer standardizer, std::vector<T> params);

  const ScorerConfig& config() const { return config_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  const Standardizer& standardizer() const { return std_; }
  ScorerModel to_model() const;

  /// Trust score in (0,1). Throws on non-finite input; cold-start convention
  /// for an all-padding sequence.
  double score(const FeatureSequence& seq) const;

  /// Scores many sequences in one stacked pass.
  std::vector<double> score_batch(const std::vector<const FeatureSequence*>& seqs) const;

  /// Logits for prepared inputs (each with 1..seq_len rows).
  std::vector<T> logits(const std::vector<const SeqInput<T>*>& batch) const;

  /// Mean binary cross-entropy of sigmoid(logit) against targets, with the
  /// gradient written to `grad` (resized to the parameter count).
  T loss_and_grad(const std::vector<const SeqInput<T>*>& batch, std::vector<T>& grad) const;
  T loss(const std::vector<const SeqInput<T>*>& batch) const;

  static SeqInput<T> prepare(const FeatureSequence& seq, double target = 1.0);

 private:
  struct Offsets {
    std::size_t w, b;
  };
  struct LayerOffsets {
    Offsets ln1, q, k, v, o, ln2, ff1, ff2;  // for layer norms w = gain, b = bias
  };
  struct LayerCache;
  struct Cache;

  void index_layout();
  Eigen::Map<const Mat> mat(std::size_t off, std::size_t r, std::size_t c) const;
  Eigen::Map<const RowVec> vec(std::size_t off, std::size_t n) const;
  void forward(const std::vector<const SeqInput<T>*>& batch, Cache& cache) const;

  ScorerConfig config_;
  Standardizer std_;
  std::vector<T> params_;
  Offsets input_{};
  std::size_t pos_{0};
  std::vector<LayerOffsets> layer_;
  Offsets head_{};
};

extern template class Scorer<float>;
extern template class Scorer<double>;

struct GradCheckResult {
  double max_rel_error{0.0};
  std::string worst_group;
  std::size_t checked{0};
};

/// Central finite differences (step h) of the batch loss against the analytic
/// gradient. `per_group` entries are sampled from every parameter group
/// (0 = check every entry). Relative error is |a-n| / max(|a|, |n|, floor).
GradCheckResult gradient_check(const Scorer<double>& scorer,
                               const std::vector<const SeqInput<double>*>& batch, double h,
                               std::size_t per_group, RngStream& rng, double floor = 1e-6);

}  // namespace uwt
