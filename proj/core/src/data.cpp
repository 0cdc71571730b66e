#include "enscert/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "enscert/format.hpp"
#include "enscert/numstats.hpp"

namespace enscert::data {

void Dataset::validate() const {
    if (features.empty()) throw std::invalid_argument("Dataset: empty");
    if (features.size() != labels.size())
        throw std::invalid_argument("Dataset: one label per row");
    for (const auto& f : features) {
        if (static_cast<int>(f.size()) != dim)
            throw std::invalid_argument("Dataset: ragged feature rows");
        for (double v : f) {
            if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature");
        }
    }
    for (int l : labels) {
        if (l < 0 || l >= num_classes)
            throw std::invalid_argument("Dataset: label out of range");
    }
}

Dataset gen_two_moons(int n, double noise_std, uint64_t seed) {
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("gen_two_moons: n must be even and >= 2");
    numstats::RngStream rng(seed, 0);
    const int half = n / 2;
    Dataset ds;
    ds.dim = 2;
    ds.num_classes = 2;
    for (int i = 0; i < half; ++i) {
        const double t = M_PI * i / std::max(half - 1, 1);
        Vector p = {std::cos(t), std::sin(t)};
        p[0] += noise_std * rng.normal();
        p[1] += noise_std * rng.normal();
        ds.features.push_back(p);
        ds.labels.push_back(0);
    }
    for (int i = 0; i < half; ++i) {
        const double t = M_PI * i / std::max(half - 1, 1);
        Vector p = {0.5 - std::cos(t), 0.5 - std::sin(t)};
        p[0] += noise_std * rng.normal();
        p[1] += noise_std * rng.normal();
        ds.features.push_back(p);
        ds.labels.push_back(1);
    }
    return ds;
}

Dataset gen_blobs(const std::vector<Vector>& centers, int per_center, double noise_std,
                  uint64_t seed) {
    if (centers.size() < 2) throw std::invalid_argument("gen_blobs: need at least 2 centers");
    if (per_center < 1) throw std::invalid_argument("gen_blobs: per_center must be >= 1");
    const int dim = static_cast<int>(centers[0].size());
    for (const auto& c : centers) {
        if (static_cast<int>(c.size()) != dim)
            throw std::invalid_argument("gen_blobs: centers must share a dimension");
    }
    numstats::RngStream rng(seed, 0);
    Dataset ds;
    ds.dim = dim;
    ds.num_classes = static_cast<int>(centers.size());
    for (size_t ci = 0; ci < centers.size(); ++ci) {
        for (int i = 0; i < per_center; ++i) {
            Vector p = centers[ci];
            for (auto& v : p) v += noise_std * rng.normal();
            ds.features.push_back(std::move(p));
            ds.labels.push_back(static_cast<int>(ci));
        }
    }
    return ds;
}

namespace {

struct ByteReader {
    std::vector<unsigned char> bytes;
    std::string path;

    uint32_t be32(size_t offset) const {
        if (offset + 4 > bytes.size()) {
            std::ostringstream os;
            os << "idx parse error in " << path << ": truncated at byte offset " << offset;
            throw std::runtime_error(os.str());
        }
        return (uint32_t(bytes[offset]) << 24) | (uint32_t(bytes[offset + 1]) << 16) |
               (uint32_t(bytes[offset + 2]) << 8) | uint32_t(bytes[offset + 3]);
    }
};

ByteReader slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx parse error: cannot open " + path);
    ByteReader r;
    r.path = path;
    r.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return r;
}

}  // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
    const ByteReader img = slurp(images_path);
    const uint32_t img_magic = img.be32(0);
    if (img_magic != 0x00000803u) {
        std::ostringstream os;
        os << "idx parse error in " << images_path << ": bad image magic 0x" << std::hex
           << img_magic << " at byte offset 0";
        throw std::runtime_error(os.str());
    }
    const uint32_t count = img.be32(4);
    const uint32_t rows = img.be32(8);
    const uint32_t cols = img.be32(12);
    const size_t pixels = static_cast<size_t>(count) * rows * cols;
    if (img.bytes.size() != 16 + pixels) {
        std::ostringstream os;
        os << "idx parse error in " << images_path << ": expected " << (16 + pixels)
           << " bytes, found " << img.bytes.size() << " (truncated at byte offset "
           << img.bytes.size() << ")";
        throw std::runtime_error(os.str());
    }

    const ByteReader lab = slurp(labels_path);
    const uint32_t lab_magic = lab.be32(0);
    if (lab_magic != 0x00000801u) {
        std::ostringstream os;
        os << "idx parse error in " << labels_path << ": bad label magic 0x" << std::hex
           << lab_magic << " at byte offset 0";
        throw std::runtime_error(os.str());
    }
    const uint32_t lab_count = lab.be32(4);
    if (lab.bytes.size() != 8 + lab_count) {
        std::ostringstream os;
        os << "idx parse error in " << labels_path << ": expected " << (8 + lab_count)
           << " bytes, found " << lab.bytes.size() << " (truncated at byte offset "
           << lab.bytes.size() << ")";
        throw std::runtime_error(os.str());
    }
    if (lab_count != count) {
        std::ostringstream os;
        os << "idx parse error: image count " << count << " != label count " << lab_count
           << " (header byte offset 4)";
        throw std::runtime_error(os.str());
    }

    Dataset ds;
    ds.dim = static_cast<int>(rows * cols);
    int max_label = 0;
    for (uint32_t i = 0; i < count; ++i) {
        Vector row(ds.dim);
        const size_t base = 16 + static_cast<size_t>(i) * ds.dim;
        for (int p = 0; p < ds.dim; ++p) row[p] = img.bytes[base + p] / 255.0;
        ds.features.push_back(std::move(row));
        const int label = lab.bytes[8 + i];
        max_label = std::max(max_label, label);
        ds.labels.push_back(label);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

void write_idx(const Dataset& ds, int rows, int cols, const std::string& images_path,
               const std::string& labels_path) {
    if (rows * cols != ds.dim)
        throw std::invalid_argument("write_idx: rows * cols must equal the feature width");
    auto put32 = [](std::ofstream& out, uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };

    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("write_idx: cannot open " + images_path);
    put32(img, 0x00000803u);
    put32(img, static_cast<uint32_t>(ds.size()));
    put32(img, static_cast<uint32_t>(rows));
    put32(img, static_cast<uint32_t>(cols));
    for (const auto& f : ds.features) {
        for (double v : f) {
            const double clamped = std::min(std::max(v, 0.0), 1.0);
            const unsigned char b = static_cast<unsigned char>(std::lround(clamped * 255.0));
            img.write(reinterpret_cast<const char*>(&b), 1);
        }
    }

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("write_idx: cannot open " + labels_path);
    put32(lab, 0x00000801u);
    put32(lab, static_cast<uint32_t>(ds.size()));
    for (int l : ds.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
}

SplitResult split_and_subsample(const Dataset& ds, double train_fraction, int64_t max_n,
                                int stride, uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
        throw std::invalid_argument("split_and_subsample: fraction must lie in [0, 1]");
    if (stride < 1) throw std::invalid_argument("split_and_subsample: stride must be >= 1");

    std::vector<size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    numstats::RngStream rng(seed, 0);
    for (size_t i = idx.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    if (max_n > 0 && static_cast<int64_t>(idx.size()) > max_n) idx.resize(max_n);

    const size_t n_train = static_cast<size_t>(std::llround(train_fraction * idx.size()));
    SplitResult out;
    out.train.dim = out.test.dim = ds.dim;
    out.train.num_classes = out.test.num_classes = ds.num_classes;
    for (size_t i = 0; i < n_train; ++i) {
        out.train.features.push_back(ds.features[idx[i]]);
        out.train.labels.push_back(ds.labels[idx[i]]);
    }
    for (size_t i = n_train, pos = 0; i < idx.size(); ++i, ++pos) {
        if (pos % static_cast<size_t>(stride) != 0) continue;
        out.test.features.push_back(ds.features[idx[i]]);
        out.test.labels.push_back(ds.labels[idx[i]]);
    }
    if (out.train.features.empty() && out.test.features.empty())
        throw std::invalid_argument("split_and_subsample: empty split");
    return out;
}

std::string to_csv(const Dataset& ds) {
    std::ostringstream os;
    for (int c = 0; c < ds.dim; ++c) os << "x" << c << ",";
    os << "label\n";
    for (size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.features[i]) os << fmt17(v) << ",";
        os << ds.labels[i] << "\n";
    }
    return os.str();
}

}  // namespace enscert::data
