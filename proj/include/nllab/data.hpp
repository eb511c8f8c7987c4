#pragma once

#include "nllab/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nllab {

// Training pool: features plus observed noisy labels. true_labels is kept
// for synthetic data (evaluation only) and left empty for real data.
struct NoisyDataset {
    Matrix features;
    std::vector<int> noisy_labels;
    std::vector<int> true_labels;
    std::size_t c = 0;

    std::size_t size() const noexcept { return features.rows; }
    std::size_t dim() const noexcept { return features.cols; }
    bool has_truth() const noexcept { return !true_labels.empty(); }
    void validate() const;
};

// The small trusted subset, with its internal train/val split. train_idx
// and val_idx partition [0, size) exactly.
struct MetaSet {
    Matrix features;
    std::vector<int> clean_labels;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    std::size_t c = 0;

    std::size_t size() const noexcept { return features.rows; }
    std::vector<int> labels_at(const std::vector<std::size_t>& idx) const;
    void validate() const;
};

struct LabeledData {
    Matrix features;
    std::vector<int> labels;
};

// Balanced Gaussian blobs: class k is an isotropic Gaussian of the given
// spread centered on a distinct mean; all pairwise mean distances equal
// mean_distance. Requires d >= c. Deterministic in seed.
LabeledData make_blobs(std::size_t c, std::size_t d, std::size_t n_per_class, double spread,
                       std::uint64_t seed, double mean_distance = 4.0);

// Per-dimension standardization statistics, computed on one dataset and
// applied to any other (test data reuses the training stats).
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Standardizer fit(const Matrix& features);
    void apply(Matrix& features) const;
};

// Carves the clean meta subset out of a noisy pool. Meta samples keep their
// clean labels (true labels when present, observed labels otherwise) and are
// removed from the noisy pool; the meta set is split train/val per
// meta_ratio. Both selections are stratified by class.
std::pair<NoisyDataset, MetaSet> split_noisy_meta(const NoisyDataset& dataset,
                                                  double meta_fraction, double meta_ratio,
                                                  std::uint64_t seed);

// IDX binary files (big-endian magic 0x00000803 for image tensors and
// 0x00000801 for label vectors). Pixels come back scaled to [0,1], one
// flattened row per image.
Matrix load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
LabeledData load_idx(const std::string& images_path, const std::string& labels_path);

void write_idx_images(const std::string& path, const Matrix& features, std::size_t rows,
                      std::size_t cols);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

// CSV export with a header row: f0,...,f{d-1},label[,noisy_label].
void export_csv(const std::string& path, const Matrix& features, const std::vector<int>& labels,
                const std::vector<int>* noisy_labels = nullptr);

} // namespace nllab
