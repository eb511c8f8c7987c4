#include "nllab/data.hpp"

#include "nllab/errors.hpp"
#include "nllab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nllab {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// Per-class index lists, shuffled with the given rng for stratified draws.
std::vector<std::vector<std::size_t>> class_buckets(const std::vector<int>& labels,
                                                    std::size_t c, Rng& rng) {
    std::vector<std::vector<std::size_t>> buckets(c);
    for (std::size_t i = 0; i < labels.size(); ++i)
        buckets[static_cast<std::size_t>(labels[i])].push_back(i);
    for (auto& b : buckets) rng.shuffle(b);
    return buckets;
}

} // namespace

void NoisyDataset::validate() const {
    require(features.rows >= 1, "dataset must have at least one sample");
    require(noisy_labels.size() == features.rows, "noisy label count mismatch");
    require(true_labels.empty() || true_labels.size() == features.rows,
            "true label count mismatch");
    require(c >= 2, "class count must be >= 2");
    for (int y : noisy_labels) require(y >= 0 && y < static_cast<int>(c), "label out of range");
    for (int y : true_labels) require(y >= 0 && y < static_cast<int>(c), "label out of range");
    if (!features.all_finite()) throw NumericError("dataset features contain non-finite values");
}

std::vector<int> MetaSet::labels_at(const std::vector<std::size_t>& idx) const {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(clean_labels[i]);
    return out;
}

void MetaSet::validate() const {
    require(clean_labels.size() == features.rows, "meta label count mismatch");
    require(train_idx.size() + val_idx.size() == features.rows,
            "meta train/val must partition the meta set");
    std::vector<char> seen(features.rows, 0);
    for (std::size_t i : train_idx) {
        require(i < features.rows && !seen[i], "meta train/val indices overlap");
        seen[i] = 1;
    }
    for (std::size_t i : val_idx) {
        require(i < features.rows && !seen[i], "meta train/val indices overlap");
        seen[i] = 1;
    }
}

LabeledData make_blobs(std::size_t c, std::size_t d, std::size_t n_per_class, double spread,
                       std::uint64_t seed, double mean_distance) {
    require(c >= 2, "make_blobs: c must be >= 2");
    require(d >= 2, "make_blobs: d must be >= 2");
    require(d >= c, "make_blobs: d must be >= c so class means can be placed apart");
    require(n_per_class >= 1, "make_blobs: n_per_class must be >= 1");
    require(spread >= 0.0, "make_blobs: spread must be nonnegative");

    // Class k sits at scale * e_k, which makes every pairwise mean distance
    // exactly mean_distance.
    const double scale = mean_distance / std::sqrt(2.0);

    Rng rng(seed);
    LabeledData out;
    out.features = Matrix(c * n_per_class, d);
    out.labels.resize(c * n_per_class);
    std::size_t row = 0;
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            auto r = out.features.row(row);
            for (std::size_t j = 0; j < d; ++j) r[j] = spread * rng.normal();
            r[k] += scale;
            out.labels[row] = static_cast<int>(k);
        }
    }
    return out;
}

Standardizer Standardizer::fit(const Matrix& features) {
    require(features.rows >= 1, "Standardizer: empty matrix");
    Standardizer s;
    s.mean.assign(features.cols, 0.0);
    s.stddev.assign(features.cols, 0.0);
    const double n = static_cast<double>(features.rows);
    for (std::size_t r = 0; r < features.rows; ++r)
        for (std::size_t j = 0; j < features.cols; ++j) s.mean[j] += features.at(r, j);
    for (double& m : s.mean) m /= n;
    for (std::size_t r = 0; r < features.rows; ++r)
        for (std::size_t j = 0; j < features.cols; ++j) {
            const double dv = features.at(r, j) - s.mean[j];
            s.stddev[j] += dv * dv;
        }
    for (double& v : s.stddev) {
        v = std::sqrt(v / n);
        if (v < 1e-12) v = 1.0; // constant dimension: leave it centered only
    }
    return s;
}

void Standardizer::apply(Matrix& features) const {
    require(features.cols == mean.size(), "Standardizer: dimension mismatch");
    for (std::size_t r = 0; r < features.rows; ++r)
        for (std::size_t j = 0; j < features.cols; ++j)
            features.at(r, j) = (features.at(r, j) - mean[j]) / stddev[j];
}

std::pair<NoisyDataset, MetaSet> split_noisy_meta(const NoisyDataset& dataset,
                                                  double meta_fraction, double meta_ratio,
                                                  std::uint64_t seed) {
    dataset.validate();
    require(meta_fraction > 0.0 && meta_fraction < 1.0,
            "split_noisy_meta: meta_fraction must be in (0,1)");
    require(meta_ratio > 0.0 && meta_ratio < 1.0,
            "split_noisy_meta: meta_ratio must be in (0,1)");

    const std::size_t n = dataset.size();
    const std::size_t c = dataset.c;
    const std::size_t m_total =
        static_cast<std::size_t>(std::llround(meta_fraction * static_cast<double>(n)));
    require(m_total >= c, "split_noisy_meta: meta set smaller than class count");

    // Meta samples are trusted: use true labels when available, otherwise
    // treat the observed labels of the selected subset as clean.
    const std::vector<int>& clean_source =
        dataset.has_truth() ? dataset.true_labels : dataset.noisy_labels;

    Rng rng(seed);
    auto buckets = class_buckets(clean_source, c, rng);

    // floor(M/c) per class, remainder spread over the lowest class ids.
    std::vector<std::size_t> take(c, m_total / c);
    for (std::size_t k = 0; k < m_total % c; ++k) take[k] += 1;

    std::vector<char> is_meta(n, 0);
    std::vector<std::size_t> meta_rows;
    meta_rows.reserve(m_total);
    for (std::size_t k = 0; k < c; ++k) {
        if (buckets[k].size() < take[k])
            throw std::runtime_error("split_noisy_meta: class " + std::to_string(k) +
                                     " has too few samples for a stratified meta set");
        for (std::size_t i = 0; i < take[k]; ++i) {
            meta_rows.push_back(buckets[k][i]);
            is_meta[buckets[k][i]] = 1;
        }
    }
    std::sort(meta_rows.begin(), meta_rows.end());

    MetaSet meta;
    meta.c = c;
    meta.features = gather_rows(dataset.features, meta_rows);
    meta.clean_labels.reserve(m_total);
    for (std::size_t r : meta_rows) meta.clean_labels.push_back(clean_source[r]);

    // Internal train/val split, stratified again so every class appears in
    // both halves.
    auto meta_buckets = class_buckets(meta.clean_labels, c, rng);
    for (std::size_t k = 0; k < c; ++k) {
        const std::size_t sz = meta_buckets[k].size();
        const std::size_t tr =
            static_cast<std::size_t>(std::llround(meta_ratio * static_cast<double>(sz)));
        if (tr == 0 || tr == sz)
            throw std::runtime_error("split_noisy_meta: class " + std::to_string(k) +
                                     " missing from meta-train or meta-val");
        for (std::size_t i = 0; i < sz; ++i)
            (i < tr ? meta.train_idx : meta.val_idx).push_back(meta_buckets[k][i]);
    }
    std::sort(meta.train_idx.begin(), meta.train_idx.end());
    std::sort(meta.val_idx.begin(), meta.val_idx.end());
    meta.validate();

    NoisyDataset noisy;
    noisy.c = c;
    std::vector<std::size_t> keep;
    keep.reserve(n - m_total);
    for (std::size_t i = 0; i < n; ++i)
        if (!is_meta[i]) keep.push_back(i);
    noisy.features = gather_rows(dataset.features, keep);
    noisy.noisy_labels.reserve(keep.size());
    for (std::size_t i : keep) noisy.noisy_labels.push_back(dataset.noisy_labels[i]);
    if (dataset.has_truth()) {
        noisy.true_labels.reserve(keep.size());
        for (std::size_t i : keep) noisy.true_labels.push_back(dataset.true_labels[i]);
    }
    noisy.validate();

    return {std::move(noisy), std::move(meta)};
}

// ---------------------------------------------------------------------------
// IDX binary format
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& in, std::size_t& offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw ParseError("truncated IDX header", offset);
    offset += 4;
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::vector<unsigned char> read_payload(std::ifstream& in, std::size_t count,
                                        std::size_t& offset) {
    std::vector<unsigned char> bytes(count);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw ParseError("IDX payload shorter than header dims imply",
                         offset + static_cast<std::size_t>(std::max<std::streamsize>(in.gcount(), 0)));
    offset += count;
    in.peek();
    if (!in.eof()) throw ParseError("trailing bytes after IDX payload", offset);
    return bytes;
}

} // namespace

Matrix load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path, 0);
    std::size_t offset = 0;
    const std::uint32_t magic = read_be32(in, offset);
    if (magic != kIdxImagesMagic)
        throw ParseError("bad IDX image magic " + std::to_string(magic), 0);
    const std::size_t n = read_be32(in, offset);
    const std::size_t rows = read_be32(in, offset);
    const std::size_t cols = read_be32(in, offset);
    const auto bytes = read_payload(in, n * rows * cols, offset);
    Matrix out(n, rows * cols);
    for (std::size_t k = 0; k < bytes.size(); ++k)
        out.data[k] = static_cast<double>(bytes[k]) / 255.0;
    return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path, 0);
    std::size_t offset = 0;
    const std::uint32_t magic = read_be32(in, offset);
    if (magic != kIdxLabelsMagic)
        throw ParseError("bad IDX label magic " + std::to_string(magic), 0);
    const std::size_t n = read_be32(in, offset);
    const auto bytes = read_payload(in, n, offset);
    return {bytes.begin(), bytes.end()};
}

LabeledData load_idx(const std::string& images_path, const std::string& labels_path) {
    LabeledData out;
    out.features = load_idx_images(images_path);
    out.labels = load_idx_labels(labels_path);
    if (out.features.rows != out.labels.size())
        throw ParseError("IDX image/label counts disagree", 4);
    return out;
}

void write_idx_images(const std::string& path, const Matrix& features, std::size_t rows,
                      std::size_t cols) {
    require(rows * cols == features.cols, "write_idx_images: rows*cols must equal feature dim");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_be32(out, kIdxImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(features.rows));
    write_be32(out, static_cast<std::uint32_t>(rows));
    write_be32(out, static_cast<std::uint32_t>(cols));
    for (double v : features.data) {
        const auto byte = static_cast<unsigned char>(std::llround(v * 255.0));
        out.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_be32(out, kIdxLabelsMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int y : labels) {
        const auto byte = static_cast<unsigned char>(y);
        out.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

void export_csv(const std::string& path, const Matrix& features, const std::vector<int>& labels,
                const std::vector<int>* noisy_labels) {
    require(labels.size() == features.rows, "export_csv: label count mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t j = 0; j < features.cols; ++j) out << 'f' << j << ',';
    out << "label";
    if (noisy_labels != nullptr) out << ",noisy_label";
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < features.rows; ++r) {
        for (std::size_t j = 0; j < features.cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", features.at(r, j));
            out << buf << ',';
        }
        out << labels[r];
        if (noisy_labels != nullptr) out << ',' << (*noisy_labels)[r];
        out << '\n';
    }
}

} // namespace nllab
